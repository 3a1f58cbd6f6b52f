"""Taylor-coefficient kernels.

Every kernel exists twice: a numba version (explicit loops) and a numpy
version (slices and dot products). ``USE_NUMBA`` picks the one exported
under the public name; both are importable for comparison.

Coefficient arrays are 2-D, one row per node of a series program and one
column per Taylor coefficient. ``coef[v, m]`` is ``x_v^{(m)}(t0) / m!``.
"""
import math

import numpy as np

from ._jit import USE_NUMBA, njit

# opcodes
INPUT = 0
TIME = 1
CONST = 2
ADD = 3
SUB = 4
MUL = 5
SQR = 6
DIV = 7
NEG = 8
ADDC = 9
MULC = 10
SQRT = 11
EXP = 12
LOG = 13
SIN = 14  # arg_b holds the companion COS node; both rows are written here
COS = 15  # companion of a SIN node: arg_a is the argument, arg_b the SIN node
POW = 16  # constant real exponent in carg
DIFF = 17  # derivative order in iarg

OP_NAMES = (
    "input", "time", "const", "add", "sub", "mul", "sqr", "div", "neg",
    "addc", "mulc", "sqrt", "exp", "log", "sin", "cos", "pow", "diff",
)

# offset of nodes that depend on time only (never on a variable)
OFFSET_INF = 1 << 40


# ---------------------------------------------------------------------------
# numba kernels


@njit
def _nb_coef(op, coef, v, a, b, q, cv, m):
    val = 0.0
    if op == ADD:
        val = coef[a, m] + coef[b, m]
    elif op == SUB:
        val = coef[a, m] - coef[b, m]
    elif op == MUL:
        for i in range(m + 1):
            val += coef[a, i] * coef[b, m - i]
    elif op == SQR:
        for i in range((m + 1) // 2):
            val += coef[a, i] * coef[a, m - i]
        val *= 2.0
        if m % 2 == 0:
            val += coef[a, m // 2] * coef[a, m // 2]
    elif op == DIV:
        val = coef[a, m]
        for i in range(1, m + 1):
            val -= coef[b, i] * coef[v, m - i]
        val /= coef[b, 0]
    elif op == NEG:
        val = -coef[a, m]
    elif op == ADDC:
        val = coef[a, m]
        if m == 0:
            val += cv
    elif op == MULC:
        val = cv * coef[a, m]
    elif op == SQRT:
        if m == 0:
            a0 = coef[a, 0]
            val = math.sqrt(a0) if a0 >= 0.0 else np.nan
        else:
            val = coef[a, m]
            for i in range(1, m):
                val -= coef[v, i] * coef[v, m - i]
            val /= 2.0 * coef[v, 0]
    elif op == EXP:
        if m == 0:
            val = math.exp(coef[a, 0])
        else:
            for i in range(1, m + 1):
                val += i * coef[a, i] * coef[v, m - i]
            val /= m
    elif op == LOG:
        if m == 0:
            a0 = coef[a, 0]
            val = math.log(a0) if a0 > 0.0 else np.nan
        else:
            for i in range(1, m):
                val += i * coef[v, i] * coef[a, m - i]
            val = (coef[a, m] - val / m) / coef[a, 0]
    elif op == SIN:
        if m == 0:
            val = math.sin(coef[a, 0])
            coef[b, 0] = math.cos(coef[a, 0])
        else:
            c = 0.0
            for i in range(1, m + 1):
                val += i * coef[a, i] * coef[b, m - i]
                c += i * coef[a, i] * coef[v, m - i]
            val /= m
            coef[b, m] = -c / m
    elif op == POW:
        a0 = coef[a, 0]
        if m == 0:
            val = a0 ** cv if a0 > 0.0 else np.nan
        else:
            for i in range(1, m + 1):
                val += (cv * i - (m - i)) * coef[a, i] * coef[v, m - i]
            val /= m * a0
    elif op == DIFF:
        f = 1.0
        for i in range(1, q + 1):
            f *= m + i
        val = coef[a, m + q] * f
    coef[v, m] = val
    return val


@njit
def _nb_stage_pass(ops, arg_a, arg_b, iarg, carg, offs, active, coef, k):
    width = coef.shape[1]
    for v in range(ops.shape[0]):
        if not active[v]:
            continue
        op = ops[v]
        if op == COS or op == INPUT or op == TIME or op == CONST:
            continue
        m = k + offs[v]
        if m < 0 or m >= width:
            continue
        val = _nb_coef(op, coef, v, arg_a[v], arg_b[v], iarg[v], carg[v], m)
        if not np.isfinite(val):
            return v + 1
        if op == SIN and not np.isfinite(coef[arg_b[v], m]):
            return v + 1
    return 0


@njit
def _nb_time_pass(ops, arg_a, arg_b, iarg, carg, tmask, coef):
    width = coef.shape[1]
    for v in range(ops.shape[0]):
        if not tmask[v]:
            continue
        op = ops[v]
        if op == TIME or op == CONST or op == COS:
            continue
        for m in range(width):
            if op == DIFF and m + iarg[v] >= width:
                coef[v, m] = 0.0
                continue
            val = _nb_coef(op, coef, v, arg_a[v], arg_b[v], iarg[v], carg[v], m)
            if not np.isfinite(val):
                return v + 1
    return 0


@njit
def _nb_leading(ops, arg_a, arg_b, iarg, carg, offs, active, coef, seeds, inputs):
    n = ops.shape[0]
    R = seeds.shape[0]
    bar = np.zeros((n, R))
    for r in range(R):
        bar[seeds[r], r] += 1.0
    for v in range(n - 1, -1, -1):
        if not active[v]:
            continue
        op = ops[v]
        a = arg_a[v]
        b = arg_b[v]
        ov = offs[v]
        for r in range(R):
            bv = bar[v, r]
            if bv == 0.0:
                continue
            if op == ADD:
                if offs[a] == ov:
                    bar[a, r] += bv
                if offs[b] == ov:
                    bar[b, r] += bv
            elif op == SUB:
                if offs[a] == ov:
                    bar[a, r] += bv
                if offs[b] == ov:
                    bar[b, r] -= bv
            elif op == MUL:
                if offs[a] == ov:
                    bar[a, r] += bv * coef[b, 0]
                if offs[b] == ov:
                    bar[b, r] += bv * coef[a, 0]
            elif op == SQR:
                bar[a, r] += 2.0 * bv * coef[a, 0]
            elif op == DIV:
                if offs[a] == ov:
                    bar[a, r] += bv / coef[b, 0]
                if offs[b] == ov:
                    bar[b, r] -= bv * coef[v, 0] / coef[b, 0]
            elif op == NEG:
                bar[a, r] -= bv
            elif op == ADDC or op == DIFF:
                bar[a, r] += bv
            elif op == MULC:
                bar[a, r] += carg[v] * bv
            elif op == SQRT:
                bar[a, r] += 0.5 * bv / coef[v, 0]
            elif op == EXP:
                bar[a, r] += bv * coef[v, 0]
            elif op == LOG:
                bar[a, r] += bv / coef[a, 0]
            elif op == SIN:
                bar[a, r] += bv * coef[b, 0]
            elif op == COS:
                bar[a, r] -= bv * coef[b, 0]
            elif op == POW:
                bar[a, r] += bv * carg[v] * coef[v, 0] / coef[a, 0]
    J = np.empty((R, inputs.shape[0]))
    for r in range(R):
        for j in range(inputs.shape[0]):
            J[r, j] = bar[inputs[j], r]
    return J


@njit
def _nb_series(op, x, y, cv, p):
    coef = np.zeros((4, p + 1))
    coef[0, :] = x[: p + 1]
    coef[1, :] = y[: p + 1]
    b = 3 if op == SIN else 1
    for m in range(p + 1):
        _nb_coef(op, coef, 2, 0, b, 0, cv, m)
    return coef[2:, :].copy()


# ---------------------------------------------------------------------------
# numpy kernels


def _np_coef(op, coef, v, a, b, q, cv, m):
    if op == ADD:
        val = coef[a, m] + coef[b, m]
    elif op == SUB:
        val = coef[a, m] - coef[b, m]
    elif op == MUL:
        val = np.dot(coef[a, : m + 1], coef[b, m::-1])
    elif op == SQR:
        val = np.dot(coef[a, : m + 1], coef[a, m::-1])
    elif op == DIV:
        val = (coef[a, m] - np.dot(coef[b, 1 : m + 1], coef[v, m - 1 :: -1][:m])) / coef[b, 0]
    elif op == NEG:
        val = -coef[a, m]
    elif op == ADDC:
        val = coef[a, m] + (cv if m == 0 else 0.0)
    elif op == MULC:
        val = cv * coef[a, m]
    elif op == SQRT:
        if m == 0:
            a0 = coef[a, 0]
            val = math.sqrt(a0) if a0 >= 0.0 else np.nan
        else:
            val = (coef[a, m] - np.dot(coef[v, 1:m], coef[v, m - 1 : 0 : -1])) / (2.0 * coef[v, 0])
    elif op == EXP:
        if m == 0:
            val = math.exp(coef[a, 0])
        else:
            i = np.arange(1, m + 1)
            val = np.dot(i * coef[a, 1 : m + 1], coef[v, m - 1 :: -1][:m]) / m
    elif op == LOG:
        if m == 0:
            a0 = coef[a, 0]
            val = math.log(a0) if a0 > 0.0 else np.nan
        else:
            i = np.arange(1, m)
            s = np.dot(i * coef[v, 1:m], coef[a, m - 1 : 0 : -1])
            val = (coef[a, m] - s / m) / coef[a, 0]
    elif op == SIN:
        if m == 0:
            val = math.sin(coef[a, 0])
            coef[b, 0] = math.cos(coef[a, 0])
        else:
            ia = np.arange(1, m + 1) * coef[a, 1 : m + 1]
            val = np.dot(ia, coef[b, m - 1 :: -1][:m]) / m
            coef[b, m] = -np.dot(ia, coef[v, m - 1 :: -1][:m]) / m
    elif op == POW:
        a0 = coef[a, 0]
        if m == 0:
            val = a0 ** cv if a0 > 0.0 else np.nan
        else:
            i = np.arange(1, m + 1)
            w = cv * i - (m - i)
            val = np.dot(w * coef[a, 1 : m + 1], coef[v, m - 1 :: -1][:m]) / (m * a0)
    elif op == DIFF:
        val = coef[a, m + q] * math.prod(range(m + 1, m + q + 1))
    else:
        val = 0.0
    coef[v, m] = val
    return val


def _np_stage_pass(ops, arg_a, arg_b, iarg, carg, offs, active, coef, k):
    width = coef.shape[1]
    m_all = k + offs
    todo = np.nonzero(active & (m_all >= 0) & (m_all < width) & (ops > CONST) & (ops != COS))[0]
    with np.errstate(all="ignore"):
        for v in todo:
            v = int(v)
            m = int(m_all[v])
            op = int(ops[v])
            val = _np_coef(op, coef, v, int(arg_a[v]), int(arg_b[v]), int(iarg[v]), float(carg[v]), m)
            if not math.isfinite(val):
                return v + 1
            if op == SIN and not math.isfinite(coef[arg_b[v], m]):
                return v + 1
    return 0


def _np_time_pass(ops, arg_a, arg_b, iarg, carg, tmask, coef):
    width = coef.shape[1]
    todo = np.nonzero(tmask & (ops != TIME) & (ops != CONST) & (ops != COS))[0]
    with np.errstate(all="ignore"):
        for v in todo:
            v = int(v)
            op = int(ops[v])
            for m in range(width):
                if op == DIFF and m + iarg[v] >= width:
                    coef[v, m] = 0.0
                    continue
                val = _np_coef(op, coef, v, int(arg_a[v]), int(arg_b[v]), int(iarg[v]), float(carg[v]), m)
                if not math.isfinite(val):
                    return v + 1
    return 0


def _np_leading(ops, arg_a, arg_b, iarg, carg, offs, active, coef, seeds, inputs):
    n = ops.shape[0]
    R = seeds.shape[0]
    bar = np.zeros((n, R))
    for r in range(R):
        bar[seeds[r], r] += 1.0

    def push(target, w, bv):
        # w may be non-finite on nodes that are stale for rows with bv == 0
        nz = bv != 0.0
        bar[target, nz] += w * bv[nz]

    with np.errstate(all="ignore"):
        for v in range(n - 1, -1, -1):
            if not active[v]:
                continue
            bv = bar[v]
            if not bv.any():
                continue
            op = ops[v]
            a = arg_a[v]
            b = arg_b[v]
            ov = offs[v]
            if op == ADD or op == SUB:
                if offs[a] == ov:
                    push(a, 1.0, bv)
                if offs[b] == ov:
                    push(b, 1.0 if op == ADD else -1.0, bv)
            elif op == MUL:
                if offs[a] == ov:
                    push(a, coef[b, 0], bv)
                if offs[b] == ov:
                    push(b, coef[a, 0], bv)
            elif op == SQR:
                push(a, 2.0 * coef[a, 0], bv)
            elif op == DIV:
                if offs[a] == ov:
                    push(a, 1.0 / coef[b, 0], bv)
                if offs[b] == ov:
                    push(b, -coef[v, 0] / coef[b, 0], bv)
            elif op == NEG:
                push(a, -1.0, bv)
            elif op == ADDC or op == DIFF:
                push(a, 1.0, bv)
            elif op == MULC:
                push(a, carg[v], bv)
            elif op == SQRT:
                push(a, 0.5 / coef[v, 0], bv)
            elif op == EXP:
                push(a, coef[v, 0], bv)
            elif op == LOG:
                push(a, 1.0 / coef[a, 0], bv)
            elif op == SIN:
                push(a, coef[b, 0], bv)
            elif op == COS:
                push(a, -coef[b, 0], bv)
            elif op == POW:
                push(a, carg[v] * coef[v, 0] / coef[a, 0], bv)
    return bar[inputs].T.copy()


def _np_series(op, x, y, cv, p):
    if op == MUL:
        return np.vstack([np.convolve(x[: p + 1], y[: p + 1])[: p + 1], np.zeros(p + 1)])
    coef = np.zeros((4, p + 1))
    coef[0] = x[: p + 1]
    coef[1] = y[: p + 1]
    b = 3 if op == SIN else 1
    with np.errstate(all="ignore"):
        for m in range(p + 1):
            _np_coef(op, coef, 2, 0, b, 0, cv, m)
    return coef[2:].copy()


if USE_NUMBA:
    stage_pass = _nb_stage_pass
    time_pass = _nb_time_pass
    leading_jacobian = _nb_leading
    series_kernel = _nb_series
else:
    stage_pass = _np_stage_pass
    time_pass = _np_time_pass
    leading_jacobian = _np_leading
    series_kernel = _np_series

BACKEND = "numba" if USE_NUMBA else "numpy"
