"""Compare the numba and pure-numpy kernel backends.

Each backend runs in its own interpreter because the choice is made at
import time from ``DAEAD_NUMBA``.  The first run of each workload is a
warm-up (JIT compilation or cache load) and is not timed.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from daead import kernels
from daead.integrate import IvpConfig, consistent_initialize, reduce_and_integrate, taylor_integrate
from daead.problems import get_problem

repeat = int(sys.argv[1])
cases = [
    ("planets taylor tol=1e-13 t=200", "planets", {}, "taylor", 1e-13, 200.0),
    ("pendulum taylor tol=1e-10 t=100", "pendulum", {}, "taylor", 1e-10, 100.0),
    ("spring_mass n=3 taylor tol=1e-10 t=5", "spring_mass", {"n": 3}, "taylor", 1e-10, 5.0),
    ("pendulum dd-rk tol=1e-8 t=20", "pendulum", {}, "dd-rk", 1e-8, 20.0),
]
out = {"backend": kernels.BACKEND, "cases": {}}
for label, name, over, method, tol, t_end in cases:
    pd = get_problem(name)
    dae, p = pd.build(over)
    s = dae.structure()
    items = consistent_initialize(dae, s, pd.initial(p))
    cfg = IvpConfig(tol=tol, t_end=t_end)
    run = taylor_integrate if method == "taylor" else reduce_and_integrate
    tr = run(dae, s, items, cfg)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        tr = run(dae, s, items, cfg)
        best = min(best, time.perf_counter() - t0)
    out["cases"][label] = {"seconds": best, "steps": tr.stats["steps"], "final": tr.items[-1].tolist()}
print(json.dumps(out))
"""


def run_backend(flag, repeat):
    env = dict(os.environ, DAEAD_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    nb = run_backend("1", args.repeat)
    np_ = run_backend("0", args.repeat)
    print(f"{'workload':<40} {nb['backend']:>10} {np_['backend']:>10} {'speedup':>8} {'max |diff|':>11}")
    for label, a in nb["cases"].items():
        b = np_["cases"][label]
        diff = max(abs(x - y) for x, y in zip(a["final"], b["final"]))
        print(f"{label:<40} {a['seconds']:>9.3f}s {b['seconds']:>9.3f}s "
              f"{b['seconds'] / a['seconds']:>7.1f}x {diff:>11.1e}")


if __name__ == "__main__":
    main()
