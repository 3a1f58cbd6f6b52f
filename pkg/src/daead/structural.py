"""Signature-matrix structural analysis.

The signature matrix is read off the residual code itself by running it on
:class:`SignatureScalar` values, which track the highest derivative order of
each variable an expression depends on.  A highest-value transversal is
found by a shortest-augmenting-path assignment solver, and the canonical
offsets by the usual fixed-point iteration.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import OffsetIterationError, StructurallySingularError, StructureError

NEG_INF = -np.inf


class SignatureScalar:
    """Map variable index -> highest derivative order present."""

    __slots__ = ("orders",)

    def __init__(self, orders=None):
        self.orders = dict(orders or {})

    @classmethod
    def variable(cls, j):
        return cls({j: 0})

    def __repr__(self):
        return f"SignatureScalar({self.orders})"

    def _merge(self, other):
        if isinstance(other, SignatureScalar):
            out = dict(self.orders)
            for j, o in other.orders.items():
                if out.get(j, -1) < o:
                    out[j] = o
            return SignatureScalar(out)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return SignatureScalar(self.orders)
        return NotImplemented

    __add__ = __radd__ = __sub__ = __rsub__ = _merge
    __mul__ = __rmul__ = __truediv__ = __rtruediv__ = _merge

    def __pow__(self, r):
        return self._merge(r)

    __rpow__ = __pow__

    def _same(self):
        return SignatureScalar(self.orders)

    __neg__ = __pos__ = sqr = sqrt = exp = log = sin = cos = _same

    def diff(self, q=1):
        return SignatureScalar({j: o + q for j, o in self.orders.items()})

    def _no_branching(self, *args):
        raise StructureError("residual code branches on values; structure must not depend on data")

    __bool__ = __float__ = __int__ = __lt__ = __le__ = __gt__ = __ge__ = _no_branching
    __eq__ = __ne__ = _no_branching
    __hash__ = None


def signature_matrix(dae):
    """Signature matrix of ``dae`` (``-inf`` marks absent entries)."""
    n = dae.n
    z = [SignatureScalar.variable(j) for j in range(n)]
    out = list(dae.residual(SignatureScalar(), z, dae.params))
    if len(out) != n:
        raise StructureError(f"residual returned {len(out)} equations for {n} variables")
    sigma = np.full((n, n), NEG_INF)
    for i, f in enumerate(out):
        if isinstance(f, SignatureScalar):
            for j, o in f.orders.items():
                sigma[i, j] = o
    return sigma


def _lap_min(cost):
    """Minimum-cost assignment of a square matrix (shortest augmenting paths).

    Returns ``col_of_row``.  Classic O(n^3) potential-based Hungarian scheme.
    """
    n = cost.shape[0]
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of_col = np.zeros(n + 1, dtype=int)  # 1-based, 0 = free
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[row_of_col[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        while True:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        col_of_row[row_of_col[j] - 1] = j - 1
    return col_of_row


def highest_value_transversal(sigma):
    """Transversal maximising the sum of finite signature entries.

    Returns ``(pairs, value)`` where ``pairs`` lists ``(row, col)`` by row.
    Raises :class:`StructurallySingularError` when every transversal meets an
    absent entry.
    """
    sigma = np.asarray(sigma, dtype=float)
    n, m = sigma.shape
    if n != m:
        raise ValueError("signature matrix must be square")
    if n == 0:
        return [], 0
    finite = np.isfinite(sigma)
    if finite.any():
        lo, hi = sigma[finite].min(), sigma[finite].max()
    else:
        lo = hi = 0.0
    spread = hi - lo + 1.0
    # forbidden entries cost more than any all-finite assignment could
    big = n * spread + 1.0
    cost = np.where(finite, hi - sigma, big)
    col_of_row = _lap_min(cost)
    bad = [i for i in range(n) if not finite[i, col_of_row[i]]]
    if bad:
        cols = sorted(int(col_of_row[i]) for i in bad)
        raise StructurallySingularError(
            f"structurally singular: rows {bad} and columns {cols} cannot be matched",
            rows=bad, cols=cols)
    pairs = [(i, int(col_of_row[i])) for i in range(n)]
    value = int(sum(sigma[i, j] for i, j in pairs))
    return pairs, value


def canonical_offsets(sigma, transversal):
    """Smallest non-negative offsets ``(c, d)`` dual to ``transversal``."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    partner = np.empty(n, dtype=int)
    for i, j in transversal:
        partner[i] = j
    finite = np.isfinite(sigma)
    s = np.where(finite, sigma, 0).astype(np.int64)
    c = np.zeros(n, dtype=np.int64)
    d = np.zeros(n, dtype=np.int64)
    for _ in range(n * n + n + 1):
        cand = np.where(finite, s + c[:, None], np.iinfo(np.int64).min)
        d = cand.max(axis=0) if n else d
        c_new = d[partner] - s[np.arange(n), partner]
        if np.array_equal(c_new, c):
            return c.copy(), d.copy()
        c = c_new
    raise OffsetIterationError("offset iteration did not converge; transversal is not of highest value")


def index_and_dof(c, d):
    """Structural index ``max c`` and degrees of freedom ``sum d - sum c``."""
    c = np.asarray(c)
    d = np.asarray(d)
    nu = int(c.max()) if c.size else 0
    return nu, int(d.sum() - c.sum())


@dataclass
class StructuralResult:
    sigma: np.ndarray
    transversal: list
    value: int
    c: np.ndarray
    d: np.ndarray
    nu: int
    dof: int
    jac_pattern: frozenset = field(default_factory=frozenset)

    @property
    def n(self):
        return self.sigma.shape[0]

    @property
    def n_equations(self):
        """Size of the augmented equation set, ``n + sum c``."""
        return int(self.n + self.c.sum())

    @property
    def n_items(self):
        """Number of items in the augmented system, ``n + sum d``."""
        return int(self.n + self.d.sum())


def analyze(dae):
    """Full structural analysis of ``dae``."""
    sigma = signature_matrix(dae)
    pairs, value = highest_value_transversal(sigma)
    c, d = canonical_offsets(sigma, pairs)
    nu, dof = index_and_dof(c, d)
    n = sigma.shape[0]
    pattern = frozenset((i, j) for i in range(n) for j in range(n)
                        if np.isfinite(sigma[i, j]) and d[j] - c[i] == sigma[i, j])
    return StructuralResult(sigma, pairs, value, c, d, nu, dof, pattern)


def system_jacobian(dae, c, d, point, t=0.0):
    """System Jacobian ``df_i^{(c_i)} / dx_j^{(d_j)}`` at ``point``.

    ``point`` holds, for each variable j, its Taylor coefficients
    ``x_j[0..d_j]`` (coefficient form).  Computed by a leading-coefficient
    reverse sweep over the traced residual program.
    """
    from .compiled import Expansion

    exp = Expansion(dae.program(), c, d, order=0)
    exp.set_time(t)
    exp.set_items_coefficients(point)
    for k in range(exp.kd, 1):
        exp.stage_pass(k)
    return exp.jacobian()


@dataclass
class SAFriendliness:
    friendly: bool
    rcond: float
    jacobian: np.ndarray

    def __bool__(self):
        return self.friendly


def reciprocal_condition(J):
    """Reciprocal 1-norm condition number (0 for a singular matrix)."""
    J = np.asarray(J, dtype=float)
    if J.size == 0:
        return 1.0
    if not np.all(np.isfinite(J)):
        return 0.0
    with np.errstate(all="ignore"):
        try:
            cond = np.linalg.cond(J, 1)
        except np.linalg.LinAlgError:
            return 0.0
    if not np.isfinite(cond) or cond == 0:
        return 0.0
    return float(1.0 / cond)


def sa_friendly_check(dae, structural, point, t=0.0, threshold=1e-12):
    """Is the system Jacobian at ``point`` numerically nonsingular?"""
    J = system_jacobian(dae, structural.c, structural.d, point, t)
    rc = reciprocal_condition(J)
    return SAFriendliness(rc >= threshold, rc, J)


__all__ = [
    "SignatureScalar", "signature_matrix", "highest_value_transversal", "canonical_offsets",
    "index_and_dof", "StructuralResult", "analyze", "system_jacobian", "sa_friendly_check",
    "SAFriendliness", "reciprocal_condition",
]
