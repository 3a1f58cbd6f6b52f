"""Traced residual programs and offset-guided Taylor expansion.

The generic residual code is run once on :class:`TraceScalar` values, which
record every operation into flat opcode arrays (a :class:`SeriesProgram`).
An :class:`Expansion` replays that program coefficient by coefficient with
the kernels in :mod:`daead.kernels`, following the structural offsets: at
stage ``k`` every node ``v`` computes its coefficient ``k + o_v``, where the
node offset ``o_v`` is inherited from the variable offsets ``d_j``.

A reverse sweep over the leading coefficients gives the system Jacobian in
derivative units, which is the same matrix at every stage; this is what
makes stage-by-stage Newton solves exact.
"""
import math

import numpy as np
import scipy.linalg

from . import kernels as K
from .errors import ConvergenceError, SingularEvaluationError, StructureError
from .structural import reciprocal_condition
from .taylor import factorial_vector

_NUM = (int, float, np.floating, np.integer)
_BINARY = (K.ADD, K.SUB, K.MUL, K.DIV)
_UNARY = (K.SQR, K.NEG, K.ADDC, K.MULC, K.SQRT, K.EXP, K.LOG, K.POW, K.DIFF)


class TraceBuilder:
    """Collects operations recorded by :class:`TraceScalar` values."""

    def __init__(self):
        self.ops = []
        self.arg_a = []
        self.arg_b = []
        self.iarg = []
        self.carg = []
        self._consts = {}
        self._sincos = {}

    def push(self, op, a=-1, b=-1, q=0, cv=0.0):
        self.ops.append(op)
        self.arg_a.append(a)
        self.arg_b.append(b)
        self.iarg.append(q)
        self.carg.append(cv)
        return TraceScalar(self, len(self.ops) - 1)

    def const(self, value):
        value = float(value)
        node = self._consts.get(value)
        if node is None:
            node = self.push(K.CONST, cv=value)
            self._consts[value] = node
        return node

    def sincos(self, x):
        pair = self._sincos.get(x.index)
        if pair is None:
            s = self.push(K.SIN, x.index, len(self.ops) + 1)
            c = self.push(K.COS, x.index, s.index)
            pair = (s, c)
            self._sincos[x.index] = pair
        return pair


class TraceScalar:
    """A node of a program being recorded."""

    __slots__ = ("builder", "index")

    def __init__(self, builder, index):
        self.builder = builder
        self.index = index

    def __repr__(self):
        return f"TraceScalar(node={self.index}, op={K.OP_NAMES[self.builder.ops[self.index]]})"

    def _node(self, other):
        if isinstance(other, TraceScalar):
            if other.builder is not self.builder:
                raise StructureError("operands belong to different traces")
            return other
        if isinstance(other, _NUM):
            return None
        raise TypeError(f"cannot combine a traced value with {type(other).__name__}")

    def __add__(self, other):
        o = self._node(other)
        if o is None:
            return self.builder.push(K.ADDC, self.index, cv=float(other))
        return self.builder.push(K.ADD, self.index, o.index)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._node(other)
        if o is None:
            return self.builder.push(K.ADDC, self.index, cv=-float(other))
        return self.builder.push(K.SUB, self.index, o.index)

    def __rsub__(self, other):
        self._node(other)
        neg = self.builder.push(K.NEG, self.index)
        return self.builder.push(K.ADDC, neg.index, cv=float(other))

    def __neg__(self):
        return self.builder.push(K.NEG, self.index)

    def __pos__(self):
        return self

    def __mul__(self, other):
        o = self._node(other)
        if o is None:
            if other == 1:
                return self
            return self.builder.push(K.MULC, self.index, cv=float(other))
        if o.index == self.index:
            return self.builder.push(K.SQR, self.index)
        return self.builder.push(K.MUL, self.index, o.index)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._node(other)
        if o is None:
            if other == 0:
                raise SingularEvaluationError("division by the constant 0")
            return self.builder.push(K.MULC, self.index, cv=1.0 / float(other))
        return self.builder.push(K.DIV, self.index, o.index)

    def __rtruediv__(self, other):
        self._node(other)
        c = self.builder.const(other)
        return self.builder.push(K.DIV, c.index, self.index)

    def __pow__(self, r):
        if isinstance(r, TraceScalar):
            return (self.log() * r).exp()
        r = float(r)
        if r == int(r) and abs(r) <= 64:
            n = int(r)
            if n == 0:
                return 1.0
            if n < 0:
                return 1.0 / (self ** (-n))
            result = None
            base = self
            while n:
                if n & 1:
                    result = base if result is None else result * base
                n >>= 1
                if n:
                    base = base.sqr()
            return result
        if r == 0.5:
            return self.sqrt()
        return self.builder.push(K.POW, self.index, cv=r)

    def sqr(self):
        return self.builder.push(K.SQR, self.index)

    def sqrt(self):
        return self.builder.push(K.SQRT, self.index)

    def exp(self):
        return self.builder.push(K.EXP, self.index)

    def log(self):
        return self.builder.push(K.LOG, self.index)

    def sin(self):
        return self.builder.sincos(self)[0]

    def cos(self):
        return self.builder.sincos(self)[1]

    def diff(self, q=1):
        q = int(q)
        if q < 0:
            raise ValueError("derivative order must be non-negative")
        if q == 0:
            return self
        return self.builder.push(K.DIFF, self.index, q=q)

    def _no_branching(self, *args):
        raise StructureError("residual code branches on values; structure must not depend on data")

    __bool__ = __float__ = __int__ = __lt__ = __le__ = __gt__ = __ge__ = _no_branching
    __eq__ = __ne__ = _no_branching
    __hash__ = None


class SeriesProgram:
    """Flat, pruned opcode program for a residual function."""

    def __init__(self, ops, arg_a, arg_b, iarg, carg, inputs, outputs, time_node):
        self.ops = np.asarray(ops, dtype=np.int64)
        self.arg_a = np.asarray(arg_a, dtype=np.int64)
        self.arg_b = np.asarray(arg_b, dtype=np.int64)
        self.iarg = np.asarray(iarg, dtype=np.int64)
        self.carg = np.asarray(carg, dtype=float)
        self.inputs = np.asarray(inputs, dtype=np.int64)
        self.outputs = np.asarray(outputs, dtype=np.int64)
        self.time_node = int(time_node)

    @property
    def size(self):
        return int(self.ops.shape[0])

    @property
    def n(self):
        return int(self.inputs.shape[0])

    @classmethod
    def trace(cls, residual, n, params=None):
        """Record ``residual(t, z, params)`` for ``n`` variables."""
        b = TraceBuilder()
        t = b.push(K.TIME)
        z = [b.push(K.INPUT, q=j) for j in range(n)]
        out = list(residual(t, z, params))
        if len(out) != n:
            raise StructureError(f"residual returned {len(out)} equations for {n} variables")
        outputs = []
        for f in out:
            if not isinstance(f, TraceScalar):
                f = b.const(f)
            elif f.builder is not b:
                raise StructureError("residual returned a value from another trace")
            outputs.append(f.index)
        return cls._pruned(b, t.index, [x.index for x in z], outputs)

    @classmethod
    def _pruned(cls, b, time_node, inputs, outputs):
        ops = b.ops
        N = len(ops)
        live = np.zeros(N, dtype=bool)
        live[outputs] = True
        live[inputs] = True
        live[time_node] = True
        for v in range(N - 1, -1, -1):
            if not live[v]:
                continue
            op = ops[v]
            if op in _BINARY or op == K.SIN or op == K.COS:
                live[b.arg_a[v]] = True
                live[b.arg_b[v]] = True
            elif op in _UNARY:
                live[b.arg_a[v]] = True
        # a COS node is live whenever its SIN companion is (and vice versa);
        # both share the argument, which is already marked
        for v in range(N):
            if ops[v] == K.SIN and (live[v] or live[b.arg_b[v]]):
                live[v] = live[b.arg_b[v]] = True
        new = -np.ones(N, dtype=np.int64)
        new[live] = np.arange(int(live.sum()))

        def remap(x):
            return int(new[x]) if x >= 0 else -1

        keep = np.nonzero(live)[0]
        return cls(
            [ops[v] for v in keep],
            [remap(b.arg_a[v]) for v in keep],
            [remap(b.arg_b[v]) for v in keep],
            [b.iarg[v] for v in keep],
            [b.carg[v] for v in keep],
            [remap(v) for v in inputs],
            [remap(v) for v in outputs],
            remap(time_node),
        )

    def offsets(self, d):
        """Node offsets induced by the variable offsets ``d``."""
        INF = K.OFFSET_INF
        o = np.empty(self.size, dtype=np.int64)
        ops, a, b, q = self.ops, self.arg_a, self.arg_b, self.iarg
        for v in range(self.size):
            op = ops[v]
            if op == K.INPUT:
                o[v] = d[q[v]]
            elif op == K.TIME or op == K.CONST:
                o[v] = INF
            elif op in _BINARY:
                o[v] = min(o[a[v]], o[b[v]])
            elif op == K.DIFF:
                o[v] = INF if o[a[v]] == INF else o[a[v]] - q[v]
            else:
                o[v] = o[a[v]]
        return o

    def time_only_extra(self, offs):
        """Extra width needed so time-only derivatives stay exact."""
        mask = (offs == K.OFFSET_INF) & (self.ops == K.DIFF)
        return int(self.iarg[mask].sum())


class Expansion:
    """Stage-wise Taylor expansion of a traced DAE at one time point.

    ``order`` is the number of stages ``k = 1..order`` computed past the
    items, so variable ``j`` gets coefficients up to ``order + d_j``.
    """

    def __init__(self, program, c, d, order):
        self.program = program
        self.c = np.asarray(c, dtype=np.int64)
        self.d = np.asarray(d, dtype=np.int64)
        self.n = program.n
        self.order = int(order)
        self.offs = program.offsets(self.d)
        out_offs = self.offs[program.outputs]
        if not np.array_equal(out_offs, self.c):
            raise StructureError(f"output offsets {out_offs.tolist()} disagree with c = {self.c.tolist()}")
        self.max_d = int(self.d.max()) if self.n else 0
        self.kd = -self.max_d
        self.width = self.order + self.max_d + 1
        full = self.width + program.time_only_extra(self.offs)
        self.coef = np.zeros((program.size, full))
        self.active = np.ones(program.size, dtype=bool)
        self.tmask = self.offs == K.OFFSET_INF
        const = program.ops == K.CONST
        self.coef[const, 0] = program.carg[const]
        self.fact = factorial_vector(full + 2)
        self.item_index = [(j, l) for j in range(self.n) for l in range(int(self.d[j]) + 1)]
        self.n_items = len(self.item_index)
        self._item_start = np.concatenate([[0], np.cumsum(self.d + 1)])
        self.t = None

    # -- state -----------------------------------------------------------

    def set_time(self, t):
        p = self.program
        row = self.coef[p.time_node]
        row[:] = 0.0
        row[0] = t
        if row.size > 1:
            row[1] = 1.0
        status = K.time_pass(p.ops, p.arg_a, p.arg_b, p.iarg, p.carg, self.tmask, self.coef)
        if status:
            raise SingularEvaluationError(f"non-finite value in time-only node {status - 1} at t = {t}")
        self.t = t

    def set_items_coefficients(self, coeffs):
        """Set ``x_j[0..d_j]`` from per-variable coefficient sequences."""
        inp = self.program.inputs
        for j in range(self.n):
            row = self.coef[inp[j]]
            row[:] = 0.0
            dj = int(self.d[j])
            row[: dj + 1] = np.asarray(coeffs[j], dtype=float)[: dj + 1]

    def set_items(self, items):
        """Set all items from a flat vector in derivative form."""
        items = np.asarray(items, dtype=float)
        inp = self.program.inputs
        for j in range(self.n):
            s, e = self._item_start[j], self._item_start[j + 1]
            row = self.coef[inp[j]]
            row[:] = 0.0
            row[: e - s] = items[s:e] / self.fact[: e - s]

    def get_items(self):
        """Flat vector of items ``x_j^{(l)}``, ``l <= d_j``, derivative form."""
        out = np.empty(self.n_items)
        inp = self.program.inputs
        for j in range(self.n):
            s, e = self._item_start[j], self._item_start[j + 1]
            out[s:e] = self.coef[inp[j], : e - s] * self.fact[: e - s]
        return out

    def item_slice(self, j):
        return slice(int(self._item_start[j]), int(self._item_start[j + 1]))

    def series(self, j):
        """Taylor coefficients ``x_j[0..order + d_j]``."""
        return self.coef[self.program.inputs[j], : self.order + int(self.d[j]) + 1].copy()

    def all_series(self):
        return [self.series(j) for j in range(self.n)]

    def output_series(self, i, upto=None):
        m = self.order + int(self.c[i]) if upto is None else upto
        return self.coef[self.program.outputs[i], : m + 1].copy()

    # -- stages ----------------------------------------------------------

    def rows(self, k):
        return np.nonzero(self.c + k >= 0)[0]

    def cols(self, k):
        return np.nonzero(self.d + k >= 0)[0]

    def stage_pass(self, k):
        p = self.program
        status = K.stage_pass(p.ops, p.arg_a, p.arg_b, p.iarg, p.carg, self.offs,
                              self.active, self.coef, k)
        if status:
            v = status - 1
            raise SingularEvaluationError(
                f"non-finite {K.OP_NAMES[p.ops[v]]} at node {v} (stage {k}, t = {self.t})")

    def residual(self, k, rows=None):
        """Stage-k residuals ``f_i^{(k+c_i)}`` (derivative units) of ``rows``."""
        rows = self.rows(k) if rows is None else rows
        m = k + self.c[rows]
        return self.coef[self.program.outputs[rows], m] * self.fact[m]

    def jacobian(self, rows=None):
        """System Jacobian rows (all columns) from the leading coefficients."""
        p = self.program
        rows = np.arange(self.n) if rows is None else np.asarray(rows)
        seeds = p.outputs[rows]
        return K.leading_jacobian(p.ops, p.arg_a, p.arg_b, p.iarg, p.carg, self.offs,
                                  self.active, self.coef, seeds, p.inputs)

    def update(self, k, cols, delta):
        m = k + self.d[cols]
        self.coef[self.program.inputs[cols], m] += delta / self.fact[m]

    def stage_values(self, k, cols):
        m = k + self.d[cols]
        return self.coef[self.program.inputs[cols], m] * self.fact[m]

    def evaluate_stages(self, k_to=0):
        """Forward passes over stages ``kd..k_to`` without solving."""
        for k in range(self.kd, k_to + 1):
            self.stage_pass(k)

    def solve_stage(self, k, free=None, tol=1e-12, maxit=10, scale=None):
        """Newton solve of stage ``k`` for the free stage unknowns.

        ``free`` is a boolean mask over variables (columns) allowed to move;
        by default every column with ``k + d_j >= 0``.  Corrections are
        minimum-norm least-squares steps.  Returns the accumulated correction
        (derivative units) over the free columns.
        """
        rows = self.rows(k)
        cols = self.cols(k)
        if free is not None:
            cols = cols[np.asarray(free, dtype=bool)[cols]]
        total = np.zeros(cols.size)
        self.stage_pass(k)
        if rows.size == 0:
            return cols, total
        if cols.size == 0:
            r = self.residual(k, rows)
            if np.max(np.abs(r)) > tol * (1.0 + (0.0 if scale is None else scale)):
                raise ConvergenceError(f"stage {k} has no free unknowns but residual {np.max(np.abs(r)):.3g}")
            return cols, total
        tol_eff = max(tol, 16 * np.finfo(float).eps)
        prev = np.inf
        for _ in range(maxit):
            r = self.residual(k, rows)
            J = self.jacobian(rows)[:, cols]
            x = self.stage_values(k, cols)
            delta = _min_norm_solve(J, -r)
            self.update(k, cols, delta)
            self.stage_pass(k)
            total += delta
            size = np.max(np.abs(delta) / (1.0 + np.abs(x))) if delta.size else 0.0
            if size <= tol_eff:
                return cols, total
            if size > prev and size > 1e-3:
                break
            prev = size
        r = self.residual(k, rows)
        raise ConvergenceError(f"stage {k} Newton iteration failed; residual {np.max(np.abs(r)):.3g}")

    def project(self, tol=1e-12, maxit=10, free=None):
        """Newton-project the items onto the consistent manifold.

        ``free`` optionally masks items (flat derivative-form index) that may
        move.  Returns the correction vector over all items.
        """
        corr = np.zeros(self.n_items)
        for k in range(self.kd, 1):
            fmask = None
            if free is not None:
                fmask = np.zeros(self.n, dtype=bool)
                for j in range(self.n):
                    l = k + int(self.d[j])
                    if l >= 0:
                        fmask[j] = free[self._item_start[j] + l]
            cols, delta = self.solve_stage(k, fmask, tol, maxit)
            for cj, dv in zip(cols, delta):
                corr[self._item_start[cj] + k + self.d[cj]] += dv
        return corr

    def factor(self, threshold=1e-12):
        """LU-factorise the system Jacobian at the current point."""
        J = self.jacobian()
        rc = reciprocal_condition(J)
        if rc < threshold:
            return None, J, rc
        return scipy.linalg.lu_factor(J, check_finite=False), J, rc

    def expand(self, lu, k_from=1, k_to=None):
        """Compute stages ``k_from..k_to`` with the factorised Jacobian."""
        k_to = self.order if k_to is None else k_to
        allrows = np.arange(self.n)
        allcols = np.arange(self.n)
        for k in range(k_from, k_to + 1):
            self.stage_pass(k)
            r = self.residual(k, allrows)
            delta = scipy.linalg.lu_solve(lu, -r, check_finite=False)
            self.update(k, allcols, delta)
            self.stage_pass(k)

    def clear_above(self, k):
        """Zero every input coefficient of stage greater than ``k``."""
        inp = self.program.inputs
        for j in range(self.n):
            self.coef[inp[j], k + int(self.d[j]) + 1:] = 0.0


def _min_norm_solve(J, rhs):
    m, n = J.shape
    if m == n:
        try:
            lu = scipy.linalg.lu_factor(J, check_finite=False)
            if np.all(np.isfinite(lu[0])) and np.min(np.abs(np.diag(lu[0]))) > 0:
                x = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
                if np.all(np.isfinite(x)):
                    return x
        except (ValueError, np.linalg.LinAlgError):
            pass
    x, *_ = np.linalg.lstsq(J, rhs, rcond=None)
    return x


def coefficients_to_items(series, d, h=0.0):
    """Items ``x^{(l)}(t+h)``, ``l <= d``, from one variable's coefficients."""
    p = len(series) - 1
    out = np.empty(d + 1)
    for l in range(d + 1):
        acc = 0.0
        # Horner in h over terms x[m] m!/(m-l)! h^(m-l)
        for m in range(p, l - 1, -1):
            acc = acc * h + series[m] * (math.factorial(m) / math.factorial(m - l))
        out[l] = acc
    return out
