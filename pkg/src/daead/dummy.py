"""Dummy-derivative index reduction.

The augmented system consists of the equations ``f_i^{(l)}``, ``l <= c_i``,
in the items ``x_j^{(l)}``, ``l <= d_j``.  It is solved stage by stage:
stage ``k`` (``k = kd..0``, ``kd = -max d_j``) holds the equations with
``l = k + c_i`` and the unknowns with ``l = k + d_j``, and its Jacobian
``J_k`` is the sub-matrix of the system Jacobian with rows ``k + c_i >= 0``
and columns ``k + d_j >= 0``.  Choosing a square nonsingular ``G_k`` inside
each ``J_k`` (nested as ``k`` grows) leaves ``n_k - m_k`` columns per stage
whose items become states; together they form a chart of the consistent
manifold and turn the DAE into an ODE of size DOF.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .compiled import Expansion
from .errors import ChartFailure, ConvergenceError, NotSAFriendlyError, SingularEvaluationError


@dataclass
class AugmentedSystem:
    """Equations ``f_i^{(l)}`` (``l <= c_i``) in items ``x_j^{(l)}`` (``l <= d_j``)."""

    dae: object
    structure: object
    expansion: Expansion = field(repr=False)

    @classmethod
    def build(cls, dae, structure=None):
        s = dae.structure() if structure is None else structure
        return cls(dae, s, Expansion(dae.program(), s.c, s.d, order=0))

    @property
    def c(self):
        return self.structure.c

    @property
    def d(self):
        return self.structure.d

    @property
    def n(self):
        return self.structure.n

    @property
    def kd(self):
        return self.expansion.kd

    @property
    def items(self):
        return self.expansion.item_index

    @property
    def equations(self):
        return [(i, l) for i in range(self.n) for l in range(int(self.c[i]) + 1)]

    @property
    def n_equations(self):
        return int(self.n + self.c.sum())

    @property
    def n_items(self):
        return int(self.n + self.d.sum())

    def item_names(self):
        names = self.dae.names
        return [names[j] + "'" * l for j, l in self.items]

    def item_position(self, j, l):
        return self.expansion.item_slice(j).start + l

    def evaluate(self, t, items):
        """All augmented residuals, ordered like :attr:`equations`."""
        e = self.expansion
        e.set_time(t)
        e.set_items(items)
        e.evaluate_stages(0)
        out = np.empty(self.n_equations)
        pos = 0
        for i in range(self.n):
            ci = int(self.c[i])
            ser = e.output_series(i, ci)
            out[pos : pos + ci + 1] = ser * e.fact[: ci + 1]
            pos += ci + 1
        return out

    def jacobian(self, t, items):
        """System Jacobian at a point given by its items."""
        e = self.expansion
        e.set_time(t)
        e.set_items(items)
        e.evaluate_stages(0)
        return e.jacobian()

    def stage_rows(self, k):
        return np.nonzero(self.c + k >= 0)[0]

    def stage_cols(self, k):
        return np.nonzero(self.d + k >= 0)[0]

    def stage_matrices(self, J, scheme=None):
        """``{k: (J_k, G_k)}`` for ``k = kd..0``; ``G_k`` needs a scheme."""
        out = {}
        for k in range(self.kd, 1):
            Jk = J[np.ix_(self.stage_rows(k), self.stage_cols(k))]
            Gk = None
            if scheme is not None:
                Gk = J[np.ix_(self.stage_rows(k), scheme.gk_columns[k])]
            out[k] = (Jk, Gk)
        return out


def augment(dae, c=None, d=None):
    """Build the augmented system for ``dae`` (offsets default to its own)."""
    if c is None or d is None:
        return AugmentedSystem.build(dae)
    from .structural import StructuralResult

    s = dae.structure()
    s = StructuralResult(s.sigma, s.transversal, s.value, np.asarray(c), np.asarray(d), s.nu, s.dof,
                         s.jac_pattern)
    return AugmentedSystem.build(dae, s)


@dataclass
class DDScheme:
    """A dummy-derivative chart."""

    delta: np.ndarray
    S: list
    gk_columns: dict

    def __eq__(self, other):
        return isinstance(other, DDScheme) and np.array_equal(self.delta, other.delta)

    def __hash__(self):
        return hash(tuple(int(v) for v in self.delta))

    def key(self):
        return tuple(int(v) for v in self.delta)


def _scheme_from_delta(aug, delta):
    delta = np.asarray(delta, dtype=int)
    S = [(j, l) for j in range(aug.n) for l in range(int(delta[j]))]
    gk = {}
    for k in range(aug.kd, 1):
        cols = aug.stage_cols(k)
        gk[k] = np.array([j for j in cols if not (k + aug.d[j] < delta[j])], dtype=int)
    return DDScheme(delta, S, gk)


def validate_dd_spec(delta, structure):
    """Check a DD-spec vector; returns ``(True, "ok")`` or ``(False, reason)``."""
    delta = np.asarray(delta)
    c, d = structure.c, structure.d
    n = len(d)
    if delta.shape != (n,):
        return False, f"length: need {n} entries, got {delta.size}"
    if np.any(delta != np.round(delta)):
        return False, "integrality: entries must be integers"
    delta = delta.astype(int)
    if np.any(delta < 0) or np.any(delta > d):
        return False, "range: need 0 <= delta_j <= d_j"
    if int(delta.sum()) != structure.dof:
        return False, f"degree-of-freedom count: sum(delta) = {int(delta.sum())}, DOF = {structure.dof}"
    kd = -int(d.max()) if n else 0
    for k in range(kd, 0):
        m_k = int(np.sum(c + k >= 0))
        n_k = int(np.sum(d + k >= 0))
        states = int(np.sum((k + d >= 0) & (k + d < delta)))
        if states != n_k - m_k:
            return False, (f"stage {k}: the state items x_j^(l), l < delta_j, give {states} "
                           f"unselected columns but J_{k} leaves {n_k - m_k}; "
                           "state derivatives must be contiguous from the top stage down")
    return True, "ok"


def _orth_complement_project(A, B):
    """Columns of ``B`` with their component in range(A) removed."""
    if A.shape[1] == 0:
        return B
    Q, _ = np.linalg.qr(A)
    return B - Q @ (Q.T @ B)


def select_state_vector(aug, t, items, singular_tol=1e-12):
    """Choose nested, well-conditioned ``G_k`` at the point; return the scheme."""
    J = aug.jacobian(t, items)
    n = aug.n
    selected = []
    delta = np.zeros(n, dtype=int)
    for k in range(aug.kd, 1):
        rows = aug.stage_rows(k)
        cols = aug.stage_cols(k)
        Jk = J[np.ix_(rows, cols)]
        pos = {j: p for p, j in enumerate(cols)}
        prev = [j for j in selected]
        need = rows.size - len(prev)
        cand = [j for j in cols if j not in prev]
        if need < 0 or need > len(cand):
            raise NotSAFriendlyError(f"stage {k}: cannot select a square G_{k}")
        chosen = []
        if need > 0:
            A = Jk[:, [pos[j] for j in prev]]
            B = _orth_complement_project(A, Jk[:, [pos[j] for j in cand]])
            _, _, piv = scipy.linalg.qr(B, pivoting=True, mode="economic")
            chosen = [cand[p] for p in piv[:need]]
        selected = prev + chosen
        G = Jk[:, [pos[j] for j in selected]]
        if G.size and np.linalg.svd(G, compute_uv=False)[-1] <= singular_tol * max(1.0, np.abs(Jk).max()):
            raise NotSAFriendlyError(f"no nonsingular G_{k} selection at this point")
        if k < 0:
            for j in cand:
                if j not in chosen:
                    delta[j] += 1
    return _scheme_from_delta(aug, delta)


def scheme_conditioning(aug, J, scheme):
    """``min_k sigma_min(G_k) / sigma_max(J_k)`` over the selection stages."""
    worst = 1.0
    for k in range(aug.kd, 0):
        rows = aug.stage_rows(k)
        if rows.size == 0:
            continue
        Jk = J[np.ix_(rows, aug.stage_cols(k))]
        Gk = J[np.ix_(rows, scheme.gk_columns[k])]
        smax = np.linalg.svd(Jk, compute_uv=False)[0]
        smin = np.linalg.svd(Gk, compute_uv=False)[-1] if Gk.size else 0.0
        worst = min(worst, smin / smax if smax > 0 else 0.0)
    return worst


class ReducedOde:
    """The DAE as an ODE in the state items of a chart.

    Holds the last full item vector as warm start, so one instance serves a
    single integration.
    """

    def __init__(self, aug, scheme, t, items, tol=1e-8, newton_tol=None, maxit=10):
        self.aug = aug
        self.scheme = scheme
        self.items = np.array(items, dtype=float)
        self.t = t
        self.tol = tol
        self.newton_tol = 0.01 * tol if newton_tol is None else newton_tol
        self.maxit = maxit
        self._set_scheme(scheme)

    def _set_scheme(self, scheme):
        self.scheme = scheme
        self.state_pos = np.array([self.aug.item_position(j, l) for j, l in scheme.S], dtype=int)
        self.deriv_pos = np.array([self.aug.item_position(j, l + 1) for j, l in scheme.S], dtype=int)
        free = {}
        for k in range(self.aug.kd, 1):
            mask = np.zeros(self.aug.n, dtype=bool)
            mask[scheme.gk_columns[k]] = True
            free[k] = mask
        self._free = free

    @property
    def size(self):
        return len(self.scheme.S)

    def state(self, items=None):
        items = self.items if items is None else items
        return items[self.state_pos].copy()

    def solve(self, t, xS, warm=None):
        """Full consistent items for state ``xS`` (Newton from the warm start)."""
        e = self.aug.expansion
        e.set_time(t)
        items = self.items.copy() if warm is None else np.array(warm, dtype=float)
        items[self.state_pos] = xS
        e.set_items(items)
        try:
            for k in range(self.aug.kd, 1):
                e.solve_stage(k, self._free[k], self.newton_tol, self.maxit)
        except (ConvergenceError, SingularEvaluationError, np.linalg.LinAlgError) as exc:
            raise ChartFailure(f"chart {self.scheme.key()} failed at t = {t}: {exc}") from None
        out = e.get_items()
        out[self.state_pos] = xS
        return out

    def rhs(self, t, xS):
        items = self.solve(t, xS)
        self.items = items
        self.t = t
        return items[self.deriv_pos].copy()

    def conditioning(self, t=None, items=None):
        t = self.t if t is None else t
        items = self.items if items is None else items
        J = self.aug.jacobian(t, items)
        return scheme_conditioning(self.aug, J, self.scheme)


def reduced_ode_eval(reduced, t, xS):
    """Right-hand side ``xS' `` of the reduced ODE."""
    return reduced.rhs(t, xS)


def dd_switch(reduced, t=None, items=None):
    """Re-select the chart at the current items; state is remapped exactly.

    Returns ``(scheme, new_state, switched)``.  Items are not re-solved.
    """
    t = reduced.t if t is None else t
    items = reduced.items if items is None else np.asarray(items, dtype=float)
    try:
        scheme = select_state_vector(reduced.aug, t, items)
    except NotSAFriendlyError as exc:
        raise ChartFailure(f"no valid chart at t = {t}: {exc}") from None
    switched = scheme.key() != reduced.scheme.key()
    if switched:
        reduced._set_scheme(scheme)
    reduced.items = items.copy()
    reduced.t = t
    return reduced.scheme, reduced.state(items), switched


def describe(aug, scheme=None, J=None):
    """Text inventory of the augmented system (used by the CLI)."""
    lines = [f"augmented system: {aug.n_equations} equations in {aug.n_items} items (DOF {aug.structure.dof})"]
    names = aug.dae.names
    eqs = ", ".join(f"f{i + 1}" + "'" * l for i, l in aug.equations)
    lines.append(f"equations: {eqs}")
    lines.append("items: " + ", ".join(aug.item_names()))
    if scheme is not None:
        lines.append("delta: (" + ", ".join(str(int(v)) for v in scheme.delta) + ")")
        lines.append("state items S: " + (", ".join(names[j] + "'" * l for j, l in scheme.S) or "(none)"))
    for k in range(aug.kd, 1):
        m_k = aug.stage_rows(k).size
        n_k = aug.stage_cols(k).size
        line = f"stage {k:>2}: J_k {m_k}x{n_k}"
        if scheme is not None:
            gcols = ", ".join(names[j] for j in scheme.gk_columns[k])
            line += f", G_k columns [{gcols}]"
        lines.append(line)
    return "\n".join(lines)
