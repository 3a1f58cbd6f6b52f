"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in the "acceptance criteria" section of the terminal summary.
"""
import itertools
import math
import time

import numpy as np

from daead import functions as fn
from daead.adjoint import Tape, backprop
from daead.dummy import AugmentedSystem, ReducedOde, _scheme_from_delta, dd_switch
from daead.integrate import IvpConfig, consistent_initialize, reduce_and_integrate, taylor_integrate
from daead.lagrangian import rod_kinetic_energy, rod_kinetic_energy_quadrature, setup_equations
from daead.problems import (REGISTRY, InitialCondition, build_pendulum, get_problem, pendulum_residual,
                            planets_invariants)
from daead.structural import analyze, system_jacobian
from daead.taylor import TaylorScalar

NI = -np.inf


def prepared(name, over=None):
    pd = get_problem(name)
    dae, p = pd.build(over)
    s = dae.structure()
    return dae, s, p, consistent_initialize(dae, s, pd.initial(p))


def test_criterion_1_structural_goldens(report):
    t0 = time.perf_counter()
    checks = []
    s = analyze(get_problem("pendulum").build()[0])
    checks.append(np.array_equal(s.sigma, [[2, NI, 0], [NI, 2, 0], [0, 0, NI]]))
    checks.append(list(s.c) == [0, 0, 2] and list(s.d) == [2, 2, 0] and s.nu == 2 and s.dof == 2)
    s = analyze(get_problem("controlled_pendulum").build()[0])
    checks.append(np.array_equal(s.sigma, [[2, NI, 0, 0], [NI, 2, 0, NI], [0, 0, NI, NI], [0, NI, NI, NI]]))
    checks.append(s.transversal == [(0, 3), (1, 2), (2, 1), (3, 0)])
    checks.append(list(s.c) == [0, 0, 2, 2] and list(s.d) == [2, 2, 0, 0] and s.dof == 0)
    c2 = analyze(get_problem("toy_ode_part").build()[0]).c
    c3 = analyze(get_problem("toy_no_dof").build()[0]).c
    checks.append(list(c2) == [0, 0] and list(c3) == [1, 0])
    dt = time.perf_counter() - t0
    report(1, "structural goldens", all(checks) and dt < 1.0, f"{sum(checks)}/{len(checks)} exact", dt)


def _minimal_pair(sigma, value, bound=4):
    n = sigma.shape[0]
    s = np.where(np.isfinite(sigma), sigma, -10**6)
    best = None
    for c in itertools.product(range(bound + 1), repeat=n):
        c = np.array(c)
        d = np.maximum((s + c[:, None]).max(axis=0), 0)
        if np.all(d <= bound) and d.sum() - c.sum() == value:
            pair = np.concatenate([c, d])
            best = pair if best is None else np.minimum(best, pair)
    return best[:n], best[n:]


def test_criterion_2_offset_minimality(report):
    t0 = time.perf_counter()
    names = []
    ok = True
    for name, pd in REGISTRY.items():
        dae, _ = pd.build()
        if dae.n > 4:
            continue
        s = analyze(dae)
        c, d = _minimal_pair(s.sigma, s.value)
        ok &= np.array_equal(c, s.c) and np.array_equal(d, s.d)
        names.append(name)
    dt = time.perf_counter() - t0
    report(2, "offset minimality (brute force, bound 4)", ok and dt < 10.0, f"{len(names)} problems", dt)


def test_criterion_3_lagrangian_correctness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        m, g, L = rng.uniform(0.5, 3.0), rng.uniform(1.0, 20.0), rng.uniform(1.0, 20.0)
        p = {"m": m, "g": g, "L": L}
        z = [TaylorScalar(rng.normal(size=5) * L), TaylorScalar(rng.normal(size=5) * L),
             TaylorScalar(rng.normal(size=3))]
        t = rng.uniform(-5, 5)
        f = setup_equations(build_pendulum(p), t, z)
        h = pendulum_residual(t, [z[0], z[1], z[2] * (2.0 / m)], p)
        for a, b in zip(f, [m * h[0], m * h[1], h[2]]):
            k = min(a.order, b.order) + 1
            worst = max(worst, np.max(np.abs(a.coeffs[:k] - b.coeffs[:k])) / max(1.0, np.max(np.abs(b.coeffs[:k]))))
    rod_err = 0.0
    for _ in range(10):
        mm = rng.uniform(0.1, 5.0)
        a, b = rng.normal(size=2) * 3, rng.normal(size=2) * 3
        q = rod_kinetic_energy_quadrature(mm, a, b, elements=100_000)
        rod_err = max(rod_err, abs(rod_kinetic_energy(mm, a, b) - q) / abs(q))
    dt = time.perf_counter() - t0
    report(3, "Lagrangian residuals and rod kinetic energy", worst <= 1e-12 and rod_err <= 1e-8,
           f"residual rel err {worst:.1e} (<=1e-12), rod KE rel err {rod_err:.1e} (<=1e-8)", dt)


def test_criterion_4_spring_mass_models_agree(report):
    t0 = time.perf_counter()
    te = np.linspace(0.0, 40.0, 801)
    dae, s, p, items = prepared("spring_mass")
    a = taylor_integrate(dae, s, items, IvpConfig(tol=1e-8, t_end=40.0, t_eval=te))
    dae2, s2, p2, items2 = prepared("spring_mass_theta")
    b = taylor_integrate(dae2, s2, items2, IvpConfig(tol=1e-12, t_end=40.0, t_eval=te))
    na, nb = a.item_names(), b.item_names()
    x0, x1, y1 = (a.eval_items[:, na.index(k)] for k in ("x0", "x1", "y1"))
    x, th = b.eval_items[:, nb.index("x")], b.eval_items[:, nb.index("theta")]
    l = p["l"]
    errs = [np.max(np.abs(x0 - x)), np.max(np.abs(x1 - (x + l * np.sin(th)))),
            np.max(np.abs(y1 - l * np.cos(th)))]
    dt = time.perf_counter() - t0
    report(4, "spring-mass cartesian vs angle model on [0, 40]", max(errs) <= 5e-6 and dt < 60.0,
           "max diff x {:.1e}, rod-end x {:.1e}, rod-end y {:.1e} (<=5e-6)".format(*errs), dt)


def test_criterion_5_dummy_derivatives(report):
    t0 = time.perf_counter()
    tol = 1e-8
    dae, s, p, items = prepared("pendulum")
    period = 2 * math.pi * math.sqrt(p["L"] / p["g"]) * 1.08
    rk = reduce_and_integrate(dae, s, items, IvpConfig(tol=tol, t_end=period))
    ta = taylor_integrate(dae, s, items, IvpConfig(tol=tol, t_end=period, t_eval=rk.t))
    match = np.max(np.abs(ta.eval_items - rk.items))
    dae, s, p, items = prepared("pendulum", {"x0": 0.0, "xdot0": 25.0})
    rot = reduce_and_integrate(dae, s, items, IvpConfig(tol=tol, t_end=5.0))
    x, y = rot.variable("x"), rot.variable("y")
    drift = np.max(np.abs(x**2 + y**2 - p["L"] ** 2))
    ok = (match <= 100 * tol and rot.stats["switches"] >= 2 and rot.stats["switch_jump"] <= 10 * tol
          and drift <= 50 * tol)
    dt = time.perf_counter() - t0
    report(5, "dummy-derivative reduced ODE", ok,
           f"RK vs Taylor {match:.1e} (<=1e-6); rotation: {rot.stats['switches']} switches, "
           f"item jump {rot.stats['switch_jump']:.1e} (<=1e-7), |C| {drift:.1e} (<=5e-7)", dt)


def _controlled(a, omega_factor=1.0):
    pd = get_problem("controlled_pendulum")
    g, L = 9.8, 10.0
    omega = math.sqrt(g / L) * omega_factor
    dae, p = pd.build({"g": g, "L": L, "a": a, "omega": omega})
    s = dae.structure()
    t0 = time.perf_counter()
    items = consistent_initialize(dae, s, pd.initial(p))
    tr = taylor_integrate(dae, s, items, IvpConfig(tol=1e-10, t_end=20.0))
    dt = time.perf_counter() - t0
    err = np.max(np.abs(tr.variable("x") - a * np.sin(omega * tr.t)))
    return err, np.max(np.abs(tr.variable("u"))), dt


def test_criterion_6_controlled_pendulum(report):
    t0 = time.perf_counter()
    base = [_controlled(a) for a in (1.0, 5.0, 9.0)]
    fast = [_controlled(a, 1.2) for a in (1.0, 5.0, 9.0)]
    err = max(r[0] for r in base + fast)
    umax = [r[1] for r in base]
    monotone = all(u1 < u2 for u1, u2 in zip(umax, umax[1:]))
    faster = all(f[1] > b[1] for f, b in zip(fast, base))
    slowest = max(r[2] for r in base + fast)
    ok = err <= 100 * 1e-10 and monotone and faster and slowest < 5.0
    dt = time.perf_counter() - t0
    report(6, "controlled pendulum", ok,
           f"max|x - a sin wt| {err:.1e} (<=1e-8); max|u| {', '.join(f'{u:.3g}' for u in umax)} "
           f"(+20% omega: {', '.join(f'{r[1]:.3g}' for r in fast)}); slowest run {slowest:.2f} s", dt)


def test_criterion_7_planets(report):
    t0 = time.perf_counter()
    dae, s, p, items = prepared("planets")
    nq = dae.lagrangian.n_q
    finals = {}
    drift = 0.0
    for tol in (1e-13, 1e-15):
        tr = taylor_integrate(dae, s, items, IvpConfig(tol=tol, t_end=20.0))
        finals[tol] = tr.items[-1]
        if tol == 1e-13:
            q = lambda k: (np.array([tr.variable(j)[k] for j in range(nq)]),
                           np.array([tr.column(dae.names[j] + "'")[k] for j in range(nq)]))
            E0, H0, _ = planets_invariants(p, *q(0))
            for k in range(len(tr.t)):
                E, H, _ = planets_invariants(p, *q(k))
                drift = max(drift, abs(E - E0) / abs(E0), np.linalg.norm(H - H0) / np.linalg.norm(H0))
    a, b = finals[1e-13], finals[1e-15]
    agree = np.max(np.abs(a - b) / np.abs(b))
    long = taylor_integrate(dae, s, items, IvpConfig(tol=1e-13, t_end=2000.0))
    h_lo, h_hi = long.stats["h_min"], long.stats["h_max"]
    steps_ok = 1.725 / 5 <= h_lo and h_hi <= 5.654 * 5
    dt = time.perf_counter() - t0
    ok = agree <= 1e-10 and drift <= 1e-10 and steps_ok and dt < 60.0
    report(7, "outer planets", ok,
           f"tol 1e-13 vs 1e-15 rel diff {agree:.1e} (<=1e-10); invariant drift {drift:.1e} (<=1e-10); "
           f"2000 TU steps in [{h_lo:.3f}, {h_hi:.3f}] ({long.stats['steps']} steps)", dt)


def test_criterion_8_property_suites(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    results = {}
    # convolution and Leibniz
    ok = True
    for _ in range(200):
        p = int(rng.integers(1, 9))
        a, b = TaylorScalar(rng.normal(size=p + 1)), TaylorScalar(rng.normal(size=p + 1))
        ref = np.array([sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(p + 1)])
        ok &= np.allclose((a * b).coeffs, ref, rtol=1e-13, atol=1e-13)
        lhs = (a * b).diff(1)
        rhs = a.diff(1) * b.truncate(p - 1) + a.truncate(p - 1) * b.diff(1)
        ok &= np.allclose(lhs.coeffs, rhs.coeffs, rtol=1e-12, atol=1e-12)
    results["Leibniz/convolution"] = ok
    # gradient versus central differences for the Lagrangian built-ins
    worst = 0.0
    for name in ("pendulum", "spring_mass", "spring_mass_theta", "pendulum_theta", "planets"):
        dae, _ = get_problem(name).build()
        spec = dae.lagrangian
        nq = spec.n_q
        x0 = rng.uniform(0.5, 2.0, size=2 * nq) * np.where(np.arange(2 * nq) % 2, 1, 3)
        L = lambda x: spec.lagrangian(0.0, list(x[:nq]), list(x[nq:]), spec.params)
        tape = Tape()
        xs = tape.independents(list(x0))
        out = spec.lagrangian(0.0, xs[:nq], xs[nq:], spec.params)
        tape.close()
        g = np.array([float(v) for v in backprop(tape, out)])
        for i in range(x0.size):
            h = 1e-6 * max(1.0, abs(x0[i]))
            e = np.zeros_like(x0)
            e[i] = h
            fd = (L(x0 + e) - L(x0 - e)) / (2 * h)
            scale = max(abs(g[i]), abs(fd), 1e-3 * max(1.0, abs(L(x0))))
            worst = max(worst, abs(g[i] - fd) / scale)
    results[f"gradient vs FD {worst:.1e}"] = worst <= 1e-6
    # duality and zero pattern for all problems
    ok = True
    for name, pd in REGISTRY.items():
        dae, s, p, items = prepared(name)
        gap = s.d[None, :] - s.c[:, None]
        fin = np.isfinite(s.sigma)
        ok &= bool(np.all(gap[fin] >= s.sigma[fin])) and all(gap[i, j] == s.sigma[i, j] for i, j in s.transversal)
        point, pos = [], 0
        for j in range(s.n):
            dj = int(s.d[j])
            point.append(items[pos:pos + dj + 1] / [math.factorial(l) for l in range(dj + 1)])
            pos += dj + 1
        J = system_jacobian(dae, s.c, s.d, point, t=0.3)
        ok &= bool(np.all(J[~fin | (gap != s.sigma)] == 0.0))
    results["duality/zero-pattern"] = ok
    # switch exactness
    pd = get_problem("pendulum_dae")
    dae, _ = pd.build()
    s = dae.structure()
    items = consistent_initialize(dae, s, InitialCondition({"x": 9.0, "x'": 0.5}, {"y": 4.0}))
    aug = AugmentedSystem.build(dae, s)
    red = ReducedOde(aug, _scheme_from_delta(aug, [2, 0, 0]), 0.0, items.copy())
    _, _, switched = dd_switch(red, 0.0, items)
    results["switch exactness"] = switched and np.array_equal(red.items, items)
    # reproducibility
    dae, s, p, items = prepared("spring_mass")
    cfg = IvpConfig(tol=1e-8, t_end=3.0)
    r1, r2 = taylor_integrate(dae, s, items, cfg), taylor_integrate(dae, s, items, cfg)
    results["reproducibility"] = np.array_equal(r1.items, r2.items) and np.array_equal(r1.t, r2.t)
    dt = time.perf_counter() - t0
    report(8, "property suites", all(results.values()),
           "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in results.items()), dt)
