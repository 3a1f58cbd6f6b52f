"""Initial-value solution: consistent initialisation, Taylor and RK integration.

Trajectories store every item ``x_j^{(l)}``, ``l <= d_j``, in derivative form
at each accepted step, together with the time derivative of each item so
that :func:`dense_output` can use Hermite cubics.
"""
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .compiled import Expansion
from .dummy import AugmentedSystem, ReducedOde, dd_switch, select_state_vector
from .errors import (ChartFailure, ConvergenceError, InconsistentInitialConditionError,
                     IntegrationError, NotSAFriendlyError, SingularEvaluationError)

log = logging.getLogger("daead")
if os.environ.get("DAE_LOG"):
    logging.basicConfig(level=os.environ["DAE_LOG"].upper(), stream=sys.stderr)


@dataclass
class IvpConfig:
    tol: float = 1e-8
    order: int = 15
    t0: float = 0.0
    t_end: float = 10.0
    max_steps: int = 1_000_000
    newton_tol: Optional[float] = None
    switch_threshold: float = 0.1
    singular_threshold: float = 1e-12
    h0: Optional[float] = None
    t_eval: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.order < 1:
            raise ValueError("order must be at least 1")

    @property
    def ntol(self):
        return 0.01 * self.tol if self.newton_tol is None else self.newton_tol


@dataclass
class Trajectory:
    t: np.ndarray
    items: np.ndarray
    derivs: np.ndarray
    item_index: list
    names: list
    d: np.ndarray
    stats: dict = field(default_factory=dict)
    schemes: list = field(default_factory=list)
    eval_t: Optional[np.ndarray] = None
    eval_items: Optional[np.ndarray] = None

    def item_names(self):
        return [self.names[j] + "'" * l for j, l in self.item_index]

    def column(self, name):
        """Samples of one item, e.g. ``"x"`` or ``"y'"``."""
        return self.items[:, self.item_names().index(name)]

    def state_columns(self):
        """Indices of items ``x_j^{(l)}`` with ``l < max(d_j, 1)``."""
        return [p for p, (j, l) in enumerate(self.item_index) if l < max(int(self.d[j]), 1)]

    def variable(self, j_or_name):
        j = self.names.index(j_or_name) if isinstance(j_or_name, str) else j_or_name
        return self.items[:, self.item_index.index((j, 0))]


# -- consistent initialisation -------------------------------------------------


def _item_lookup(names, item_index):
    table = {}
    for p, (j, l) in enumerate(item_index):
        table[names[j] + "'" * l] = p
    return table


def consistent_initialize(dae, structure, ic, t0=0.0, newton_tol=1e-10, maxit=20):
    """Consistent item vector with the items in ``ic.fixed`` held fixed.

    ``ic`` has ``fixed`` and ``guess`` dicts keyed by item name
    (``"x"``, ``"x'"``, ...); unspecified items start at zero.
    """
    e = Expansion(dae.program(), structure.c, structure.d, order=0)
    table = _item_lookup(dae.names, e.item_index)
    items = np.zeros(e.n_items)
    free = np.ones(e.n_items, dtype=bool)
    for name, v in dict(ic.guess).items():
        if name not in table:
            raise KeyError(f"unknown item {name!r}; items are {list(table)}")
        items[table[name]] = v
    for name, v in dict(ic.fixed).items():
        if name not in table:
            raise KeyError(f"unknown item {name!r}; items are {list(table)}")
        items[table[name]] = v
        free[table[name]] = False
    e.set_time(t0)
    e.set_items(items)
    try:
        e.project(tol=newton_tol, maxit=maxit, free=free)
    except (ConvergenceError, SingularEvaluationError) as exc:
        worst = _worst_residuals(dae, structure, t0, e.get_items())
        raise InconsistentInitialConditionError(f"consistent initialisation failed: {exc}", worst) from None
    out = e.get_items()
    out[~free] = items[~free]
    return out


def _worst_residuals(dae, structure, t, items, count=5):
    aug = AugmentedSystem.build(dae, structure)
    try:
        r = aug.evaluate(t, items)
    except SingularEvaluationError:
        return []
    eqs = aug.equations
    order = np.argsort(-np.abs(r))[:count]
    return [(f"f{eqs[p][0] + 1}" + "'" * eqs[p][1], float(r[p])) for p in order]


# -- Taylor integration -------------------------------------------------------


def _item_derivs_from_series(e, series):
    out = np.empty(e.n_items)
    for p, (j, l) in enumerate(e.item_index):
        ser = series[j]
        out[p] = ser[l + 1] * e.fact[l + 1] if l + 1 < len(ser) else 0.0
    return out


def _items_at(e, series, h):
    out = np.empty(e.n_items)
    for j in range(e.n):
        ser = series[j]
        dj = int(e.d[j])
        p = len(ser) - 1
        sl = e.item_slice(j)
        for l in range(dj + 1):
            acc = 0.0
            for m in range(p, l - 1, -1):
                acc = acc * h + ser[m] * (e.fact[m] / e.fact[m - l])
            out[sl.start + l] = acc
    return out


def taylor_step_size(e, series, items, tol, safety=0.8):
    """Largest step keeping the two top series terms below the tolerance."""
    h = math.inf
    for j in range(e.n):
        ser = series[j]
        dj = int(e.d[j])
        top = len(ser) - 1
        sl = e.item_slice(j)
        for l in range(max(dj, 1)):
            scale = tol * (1.0 + abs(items[sl.start + l]))
            for m in (top - 1, top):
                if m <= l:
                    continue
                a = abs(ser[m]) * e.fact[m] / e.fact[m - l]
                if a > 0.0:
                    h = min(h, (scale / a) ** (1.0 / (m - l)))
    return safety * h


def _spread(h, remaining):
    """Shorten ``h`` so the rest of the interval splits into equal steps.

    Avoids a last step much longer (or shorter) than its predecessors, which
    would make the final-time error jump as the tolerance changes.
    """
    if h >= remaining or remaining <= 0.0:
        return h
    return remaining / math.ceil(remaining / h * (1.0 - 1e-12))


def _expand_at(e, t, items, threshold):
    e.set_time(t)
    e.set_items(items)
    e.evaluate_stages(0)
    lu, J, rc = e.factor(threshold)
    if lu is None:
        raise IntegrationError(f"system Jacobian is singular (rcond {rc:.3g})", t)
    e.expand(lu)
    return e.all_series(), rc


def taylor_integrate(dae, structure, items0, cfg):
    """Variable-step Taylor series integration from consistent ``items0``."""
    cpu0 = time.process_time()
    prog = dae.program()
    e = Expansion(prog, structure.c, structure.d, cfg.order)
    proj = Expansion(prog, structure.c, structure.d, order=0)
    t = float(cfg.t0)
    items = np.array(items0, dtype=float)
    direction = 1.0 if cfg.t_end >= t else -1.0
    T, X, D = [t], [items.copy()], []
    accepted = rejected = 0
    h_min, h_max = math.inf, 0.0
    h_prev = None
    min_rcond = math.inf
    t_eval = None if cfg.t_eval is None else np.sort(np.asarray(cfg.t_eval, dtype=float))[::int(direction)]
    ET, EX = [], []
    ie = 0
    if t_eval is not None:
        while ie < len(t_eval) and direction * (t_eval[ie] - t) <= 0:
            if t_eval[ie] == t:
                ET.append(t)
                EX.append(items.copy())
            ie += 1
    while True:
        try:
            series, rc = _expand_at(e, t, items, cfg.singular_threshold)
        except SingularEvaluationError as exc:
            raise IntegrationError(f"series evaluation failed: {exc}", t) from None
        min_rcond = min(min_rcond, rc)
        D.append(_item_derivs_from_series(e, series))
        if direction * (cfg.t_end - t) <= 0:
            break
        if accepted >= cfg.max_steps:
            raise IntegrationError(f"maximum number of steps ({cfg.max_steps}) exceeded", t)
        h = taylor_step_size(e, series, items, cfg.tol)
        if cfg.h0 is not None and h_prev is None:
            h = min(h, cfg.h0)
        if h_prev is not None:
            h = min(max(h, 0.2 * h_prev), 2.5 * h_prev)
        if not math.isfinite(h):
            h = abs(cfg.t_end - t)
        h = _spread(h, abs(cfg.t_end - t))
        while True:
            clipped = False
            if h >= abs(cfg.t_end - t):
                h = abs(cfg.t_end - t)
                clipped = True
            if h <= 1e-14 * (1.0 + abs(t)):
                raise IntegrationError("step size underflow", t)
            t_new = cfg.t_end if clipped else t + direction * h
            pred = _items_at(e, series, direction * h)
            try:
                proj.set_time(t_new)
                proj.set_items(pred)
                corr = proj.project(tol=cfg.ntol)
                new_items = proj.get_items()
                big = np.max(np.abs(corr) / (1.0 + np.abs(new_items))) if corr.size else 0.0
                if big > max(1e4 * cfg.tol, 1e-10):
                    raise ConvergenceError(f"projection correction {big:.3g} too large")
            except (ConvergenceError, SingularEvaluationError) as exc:
                log.debug("reject step h=%g at t=%g: %s", h, t, exc)
                rejected += 1
                h *= 0.5
                continue
            break
        accepted += 1
        if not clipped or accepted == 1:
            h_min = min(h_min, h)
        h_max = max(h_max, h)
        if not clipped:
            h_prev = h
        if t_eval is not None:
            while ie < len(t_eval) and direction * (t_eval[ie] - t_new) <= 0:
                ET.append(t_eval[ie])
                EX.append(new_items.copy() if t_eval[ie] == t_new else _items_at(e, series, t_eval[ie] - t))
                ie += 1
        t = t_new
        items = new_items
        T.append(t)
        X.append(items.copy())
    stats = {"steps": accepted, "rejected": rejected,
             "h_min": float(h_min) if accepted else 0.0, "h_max": float(h_max), "switches": 0,
             "cpu_s": time.process_time() - cpu0, "min_rcond": min_rcond,
             "method": "taylor", "order": cfg.order, "tol": cfg.tol}
    traj = Trajectory(np.array(T), np.array(X), np.array(D), list(e.item_index), list(dae.names),
                      structure.d.copy(), stats)
    if t_eval is not None:
        traj.eval_t = np.array(ET)
        traj.eval_items = np.array(EX).reshape(len(ET), e.n_items)
    return traj


# -- explicit Runge-Kutta on the reduced ODE -----------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _rk_norm(v, y0, y1, tol):
    sc = tol * (1.0 + np.maximum(np.abs(y0), np.abs(y1)))
    return float(np.sqrt(np.mean((v / sc) ** 2))) if v.size else 0.0


def _initial_step(f, t, y, f0, tol, span):
    sc = tol * (1.0 + np.abs(y))
    d0 = np.sqrt(np.mean((y / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(t + h0, y + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
    return min(100 * h0, h1, span)


def _item_derivs(e, t, items, threshold):
    """Time derivatives of all items via one stage of the expansion."""
    e.set_time(t)
    e.set_items(items)
    e.evaluate_stages(0)
    lu, _, rc = e.factor(threshold)
    if lu is None:
        raise IntegrationError(f"system Jacobian is singular (rcond {rc:.3g})", t)
    e.expand(lu, 1, 1)
    return _item_derivs_from_series(e, e.all_series())


def rk_integrate(reduced, cfg):
    """Dormand-Prince 5(4) on the reduced ODE, switching charts as needed."""
    if reduced.size == 0:
        raise ValueError("the problem has no degrees of freedom; there is nothing to integrate")
    cpu0 = time.process_time()
    aug = reduced.aug
    dexp = Expansion(aug.dae.program(), aug.c, aug.d, order=1)
    f = reduced.rhs
    t = float(cfg.t0)
    t_end = float(cfg.t_end)
    if t_end <= t:
        raise ValueError("t_end must exceed t0")
    reduced.t = t
    y = reduced.state()
    k1 = f(t, y)
    items = reduced.items.copy()
    T, X, D = [t], [items.copy()], [_item_derivs(dexp, t, items, cfg.singular_threshold)]
    schemes = [(t, reduced.scheme.key())]
    h = cfg.h0 if cfg.h0 is not None else _initial_step(f, t, y, k1, cfg.tol, t_end - t)
    reduced.items = items.copy()
    err_prev = 1e-4
    accepted = rejected = switches = 0
    h_min, h_max = math.inf, 0.0
    switch_items_jump = 0.0
    failures_here = 0
    while t < t_end:
        if accepted + rejected >= cfg.max_steps:
            raise IntegrationError(f"maximum number of steps ({cfg.max_steps}) exceeded", t)
        clipped = t + h >= t_end
        if clipped:
            h = t_end - t
        if h <= 1e-14 * (1.0 + abs(t)):
            raise IntegrationError("step size underflow", t)
        base_items = items.copy()
        try:
            K = [k1]
            for s in range(1, 7):
                ys = y + h * sum(a * K[i] for i, a in enumerate(_A[s]) if a != 0.0)
                K.append(f(t + _C[s] * h, ys))
            y_new = y + h * sum(b * K[i] for i, b in enumerate(_B) if b != 0.0)
            err = _rk_norm(h * sum(ei * K[i] for i, ei in enumerate(_E) if ei != 0.0), y, y_new, cfg.tol)
        except ChartFailure as exc:
            reduced.items = base_items.copy()
            failures_here += 1
            scheme, y_sw, switched = dd_switch(reduced, t, base_items)
            if switched:
                switches += 1
                schemes.append((float(t), scheme.key()))
                y = y_sw
                k1 = f(t, y)
                log.debug("chart switch at t=%g after failure (%s)", t, exc)
            else:
                rejected += 1
                h *= 0.5
                reduced.items = base_items.copy()
            if failures_here > 60:
                raise IntegrationError(f"repeated chart failure: {exc}", t) from None
            continue
        if not np.isfinite(err):
            err = math.inf
        if err <= 1.0:
            failures_here = 0
            accepted += 1
            if not clipped or accepted == 1:
                h_min = min(h_min, h)
            h_max = max(h_max, h)
            t = t_end if clipped else t + h
            y = y_new
            k1 = K[6]  # first-same-as-last: rhs at (t, y_new); items refreshed
            items = reduced.items.copy()
            rho = reduced.conditioning(t, items)
            if rho < cfg.switch_threshold:
                old = items.copy()
                scheme, y_sw, switched = dd_switch(reduced, t, items)
                if switched:
                    switches += 1
                    schemes.append((float(t), scheme.key()))
                    switch_items_jump = max(switch_items_jump, float(np.max(np.abs(reduced.items - old))))
                    y = y_sw
                    k1 = f(t, y)
                    items = reduced.items.copy()
            T.append(t)
            X.append(items.copy())
            D.append(_item_derivs(dexp, t, items, cfg.singular_threshold))
            fac = 0.9 * max(err, 1e-10) ** -0.17 * err_prev ** 0.04
            fac = min(5.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
            h = h * fac
        else:
            rejected += 1
            reduced.items = base_items.copy()
            fac = max(0.2, 0.9 * err ** -0.2)
            h = h * fac
    stats = {"steps": accepted, "rejected": rejected, "h_min": float(h_min) if accepted else 0.0,
             "h_max": float(h_max), "switches": switches, "cpu_s": time.process_time() - cpu0,
             "method": "dd-rk", "tol": cfg.tol, "switch_jump": switch_items_jump}
    return Trajectory(np.array(T), np.array(X), np.array(D), list(aug.items), list(aug.dae.names),
                      aug.d.copy(), stats, schemes)


def reduce_and_integrate(dae, structure, items0, cfg, delta=None):
    """Build the chart at ``items0`` (or from ``delta``) and run :func:`rk_integrate`."""
    from .dummy import _scheme_from_delta, validate_dd_spec

    aug = AugmentedSystem.build(dae, structure)
    if delta is None:
        scheme = select_state_vector(aug, cfg.t0, items0)
    else:
        ok, why = validate_dd_spec(delta, structure)
        if not ok:
            raise ValueError(f"invalid DD-spec vector: {why}")
        scheme = _scheme_from_delta(aug, delta)
    reduced = ReducedOde(aug, scheme, cfg.t0, items0, cfg.tol, cfg.newton_tol)
    return rk_integrate(reduced, cfg)


# -- dense output and files ----------------------------------------------------


def dense_output(traj, t):
    """Hermite-cubic interpolation of every item at time(s) ``t``."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    lo, hi = traj.t[0], traj.t[-1]
    if np.any(ts < min(lo, hi) - 1e-12 * (1 + abs(lo))) or np.any(ts > max(lo, hi) + 1e-12 * (1 + abs(hi))):
        raise ValueError(f"t outside the integrated range [{lo}, {hi}]")
    tt = traj.t
    flip = tt[-1] < tt[0]
    if flip:
        tt = tt[::-1]
        X, D = traj.items[::-1], traj.derivs[::-1]
    else:
        X, D = traj.items, traj.derivs
    idx = np.clip(np.searchsorted(tt, ts, side="right") - 1, 0, len(tt) - 2) if len(tt) > 1 else np.zeros(ts.size, int)
    if len(tt) == 1:
        out = np.repeat(X[:1], ts.size, axis=0)
        return out if np.ndim(t) else out[0]
    t0, t1 = tt[idx], tt[idx + 1]
    h = (t1 - t0)[:, None]
    s = ((ts - t0) / (t1 - t0))[:, None]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    out = h00 * X[idx] + h10 * h * D[idx] + h01 * X[idx + 1] + h11 * h * D[idx + 1]
    exact = ts == t0
    out[exact] = X[idx[exact]]
    exact1 = ts == t1
    out[exact1] = X[idx[exact1] + 1]
    return out if np.ndim(t) else out[0]


def write_csv(traj, out, columns=None):
    """CSV with header ``t,name,name',...`` and 17 significant digits."""
    cols = traj.state_columns() if columns is None else columns
    names = traj.item_names()
    close = False
    if isinstance(out, (str, os.PathLike)):
        out = open(out, "w", newline="")
        close = True
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t"] + [names[c] for c in cols])
        for i in range(len(traj.t)):
            w.writerow([f"{traj.t[i]:.17g}"] + [f"{traj.items[i, c]:.17g}" for c in cols])
    finally:
        if close:
            out.close()


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    return header, data


def stats_json(traj):
    keys = ("steps", "rejected", "h_min", "h_max", "switches", "cpu_s")
    return json.dumps({k: traj.stats.get(k) for k in keys} | {
        k: v for k, v in traj.stats.items() if k not in keys}, default=float)
