"""Command-line driver: ``daead list|analyze|reduce|solve``.

Exit status: 0 on success, 1 on usage errors, 2 on numerical failure.
"""
import argparse
import difflib
import json
import math
import sys

import numpy as np

from .errors import DaeError
from .problems import REGISTRY, get_problem


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        val = float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value for {k!r} must be a number") from None
    if val == int(val) and "." not in v and "e" not in v.lower():
        val = int(val)
    return k.strip(), val


def build_parser():
    p = _Parser(prog="daead", description="Structural analysis, dummy derivatives and "
                "Lagrangian equations of motion for DAEs.")
    sub = p.add_subparsers(dest="command")
    sub.add_parser("list", help="list built-in problems")

    def common(sp):
        sp.add_argument("problem")
        sp.add_argument("--param", action="append", type=_kv, default=[], metavar="K=V",
                        help="override a problem parameter")
        sp.add_argument("--json", action="store_true", help="machine-readable output")

    a = sub.add_parser("analyze", help="signature matrix, offsets, index and DOF")
    common(a)
    r = sub.add_parser("reduce", help="augmented system and dummy-derivative chart")
    common(r)
    r.add_argument("--dd-spec", nargs="+", type=int, metavar="D", help="force a DD-spec vector")
    r.add_argument("--ic", action="append", type=_kv, default=[], metavar="ITEM=V")
    s = sub.add_parser("solve", help="integrate a problem and write CSV")
    common(s)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--order", type=int, default=15)
    s.add_argument("--t-end", type=float, default=None)
    s.add_argument("--method", choices=("taylor", "dd-rk"), default="taylor")
    s.add_argument("--out", default=None, help="CSV file (default: stdout)")
    s.add_argument("--ic", action="append", type=_kv, default=[], metavar="ITEM=V",
                   help="override an initial item, e.g. x=5 or \"x'=0\"")
    s.add_argument("--dd-spec", nargs="+", type=int, metavar="D")
    return p


def _problem(name):
    try:
        return get_problem(name)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None


def _build(args):
    pd = _problem(args.problem)
    try:
        dae, params = pd.build(dict(args.param))
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return pd, dae, params


def _initial(pd, params, overrides):
    ic = pd.initial(params)
    for k, v in overrides:
        if k in ic.guess:
            ic.guess[k] = v
        else:
            ic.fixed[k] = v
    return ic


def format_signature_table(dae, s):
    """Fixed-width signature-matrix table; blanks are absent entries, ``o`` marks the transversal."""
    n = s.n
    names = dae.names
    T = set(s.transversal)
    rows_lbl = [f"f{i + 1}" for i in range(n)]
    w = max(4, max(len(x) for x in names) + 2)
    lw = max(len(x) for x in rows_lbl) + 1
    lines = [" " * lw + "".join(f"{x:>{w}}" for x in names) + f"{'c_i':>{w}}"]
    for i in range(n):
        cells = []
        for j in range(n):
            v = s.sigma[i, j]
            cell = "" if not math.isfinite(v) else str(int(v)) + ("o" if (i, j) in T else " ")
            cells.append(f"{cell:>{w}}")
        lines.append(f"{rows_lbl[i]:<{lw}}" + "".join(cells) + f"{int(s.c[i]):>{w}}")
    lines.append(f"{'d_j':<{lw}}" + "".join(f"{int(v):>{w}}" for v in s.d))
    lines.append(f"index nu = {s.nu}, DOF = {s.dof}, transversal value = {s.value}")
    return "\n".join(lines)


def cmd_list(args, out):
    for name, pd in REGISTRY.items():
        out.write(f"{name:<26} {pd.doc}\n")
    return 0


def cmd_analyze(args, out):
    pd, dae, params = _build(args)
    s = dae.structure()
    if args.json:
        sig = [[None if not math.isfinite(v) else int(v) for v in row] for row in s.sigma]
        json.dump({"problem": pd.name, "names": dae.names, "sigma": sig,
                   "transversal": [list(map(int, t)) for t in s.transversal],
                   "c": s.c.tolist(), "d": s.d.tolist(), "nu": s.nu, "dof": s.dof}, out)
        out.write("\n")
    else:
        out.write(f"{pd.name}: {pd.doc}\n")
        out.write(format_signature_table(dae, s) + "\n")
    return 0


def cmd_reduce(args, out):
    from .dummy import AugmentedSystem, _scheme_from_delta, describe, select_state_vector, validate_dd_spec
    from .integrate import consistent_initialize

    pd, dae, params = _build(args)
    s = dae.structure()
    aug = AugmentedSystem.build(dae, s)
    items = consistent_initialize(dae, s, _initial(pd, params, args.ic))
    if args.dd_spec:
        ok, why = validate_dd_spec(np.array(args.dd_spec), s)
        if not ok:
            raise UsageError(f"invalid --dd-spec: {why}")
        scheme = _scheme_from_delta(aug, args.dd_spec)
    else:
        scheme = select_state_vector(aug, 0.0, items)
    if args.json:
        json.dump({"problem": pd.name, "n_equations": aug.n_equations, "n_items": aug.n_items,
                   "items": aug.item_names(), "delta": [int(v) for v in scheme.delta],
                   "S": [dae.names[j] + "'" * l for j, l in scheme.S],
                   "stages": {str(k): [int(aug.stage_rows(k).size), int(aug.stage_cols(k).size)]
                              for k in range(aug.kd, 1)}}, out)
        out.write("\n")
    else:
        out.write(describe(aug, scheme) + "\n")
    return 0


def cmd_solve(args, out):
    from .integrate import (IvpConfig, consistent_initialize, reduce_and_integrate, stats_json,
                            taylor_integrate, write_csv)

    pd, dae, params = _build(args)
    s = dae.structure()
    t_end = pd.t_end if args.t_end is None else args.t_end
    cfg = IvpConfig(tol=args.tol, order=args.order, t_end=t_end)
    items = consistent_initialize(dae, s, _initial(pd, params, args.ic), newton_tol=min(1e-10, cfg.ntol))
    if args.method == "taylor":
        traj = taylor_integrate(dae, s, items, cfg)
    else:
        traj = reduce_and_integrate(dae, s, items, cfg, args.dd_spec)
    if args.out:
        write_csv(traj, args.out)
    else:
        write_csv(traj, out)
    stats = stats_json(traj)
    if args.json:
        (sys.stdout if args.out else sys.stderr).write(stats + "\n")
    else:
        sys.stderr.write(stats + "\n")
    return 0


COMMANDS = {"list": cmd_list, "analyze": cmd_analyze, "reduce": cmd_reduce, "solve": cmd_solve}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(out)
            return 1
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        msg = str(exc)
        words = [w for w in (argv or sys.argv[1:]) if w.startswith("-")]
        known = [a for act in parser._actions for a in getattr(act, "option_strings", [])]
        for sp in parser._subparsers._group_actions[0].choices.values():
            known += [a for act in sp._actions for a in act.option_strings]
        for w in words:
            flag = w.split("=")[0]
            if flag not in known:
                close = difflib.get_close_matches(flag, known, n=2)
                if close:
                    msg += f" (did you mean {' or '.join(close)}?)"
        sys.stderr.write(f"daead: error: {msg}\n")
        return 1
    except (DaeError, np.linalg.LinAlgError, ArithmeticError) as exc:
        sys.stderr.write(f"daead: numerical failure: {exc}\n")
        return 2
    except ValueError as exc:
        sys.stderr.write(f"daead: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
