"""Tape-based reverse-mode differentiation over an arbitrary inner scalar.

The inner scalar may be a float, a :class:`~daead.taylor.TaylorScalar`, or
any other type supporting the usual arithmetic (the tracing scalar used by
the compiled evaluator, for instance).  Local partial derivatives are
computed with the inner arithmetic during the forward sweep, so gradients
come back as inner values: with Taylor inner scalars the gradient of a
function is the Taylor series of its time-varying partial derivative.
"""
from . import functions as fn
from .errors import TapeUsageError


def _is_one(p):
    return isinstance(p, float) and p == 1.0


def _is_minus_one(p):
    return isinstance(p, float) and p == -1.0


class Tape:
    """Append-only record of operations.

    Each node stores its parent indices and the local partials of the node
    with respect to those parents.  Independents have no parents.
    """

    def __init__(self):
        self.parents = []
        self.partials = []
        self.inputs = []
        self.closed = False

    def __len__(self):
        return len(self.parents)

    def _push(self, value, parents, partials):
        if self.closed:
            raise TapeUsageError("cannot record on a closed tape")
        self.parents.append(parents)
        self.partials.append(partials)
        return AdjointScalar(value, self, len(self.parents) - 1)

    def independent(self, value):
        x = self._push(value, (), ())
        self.inputs.append(x.index)
        return x

    def independents(self, values):
        return [self.independent(v) for v in values]

    def close(self):
        self.closed = True


class AdjointScalar:
    """A value recorded on a :class:`Tape`."""

    __slots__ = ("value", "tape", "index")

    def __init__(self, value, tape, index):
        self.value = value
        self.tape = tape
        self.index = index

    def __repr__(self):
        return f"AdjointScalar({self.value!r}, node={self.index})"

    def _other(self, other):
        if isinstance(other, AdjointScalar):
            if other.tape is not self.tape:
                raise TapeUsageError("operands recorded on different tapes")
            return other
        return None

    def __add__(self, other):
        o = self._other(other)
        if o is None:
            return self.tape._push(self.value + other, (self.index,), (1.0,))
        return self.tape._push(self.value + o.value, (self.index, o.index), (1.0, 1.0))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        if o is None:
            return self.tape._push(self.value - other, (self.index,), (1.0,))
        return self.tape._push(self.value - o.value, (self.index, o.index), (1.0, -1.0))

    def __rsub__(self, other):
        return self.tape._push(other - self.value, (self.index,), (-1.0,))

    def __neg__(self):
        return self.tape._push(-self.value, (self.index,), (-1.0,))

    def __pos__(self):
        return self

    def __mul__(self, other):
        o = self._other(other)
        if o is None:
            return self.tape._push(self.value * other, (self.index,), (other,))
        return self.tape._push(self.value * o.value, (self.index, o.index), (o.value, self.value))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._other(other)
        if o is None:
            inv = 1.0 / other
            return self.tape._push(self.value * inv, (self.index,), (inv,))
        v = self.value / o.value
        inv = 1.0 / o.value
        return self.tape._push(v, (self.index, o.index), (inv, -(v * inv)))

    def __rtruediv__(self, other):
        v = other / self.value
        return self.tape._push(v, (self.index,), (-(v / self.value),))

    def __pow__(self, r):
        if isinstance(r, AdjointScalar):
            return (self.log() * r).exp()
        if r == 2:
            return self.sqr()
        if r == 1:
            return self
        v = fn.power(self.value, r)
        return self.tape._push(v, (self.index,), (r * fn.power(self.value, r - 1),))

    def sqr(self):
        return self.tape._push(fn.sqr(self.value), (self.index,), (2.0 * self.value,))

    def sqrt(self):
        v = fn.sqrt(self.value)
        return self.tape._push(v, (self.index,), (0.5 / v,))

    def exp(self):
        v = fn.exp(self.value)
        return self.tape._push(v, (self.index,), (v,))

    def log(self):
        return self.tape._push(fn.log(self.value), (self.index,), (1.0 / self.value,))

    def sin(self):
        return self.tape._push(fn.sin(self.value), (self.index,), (fn.cos(self.value),))

    def cos(self):
        return self.tape._push(fn.cos(self.value), (self.index,), (-fn.sin(self.value),))

    def diff(self, q=1):
        raise TypeError("time differentiation of a recorded quantity is not supported; "
                        "differentiate the gradient instead")


def record(f, inputs):
    """Run ``f(*xs)`` on fresh independents wrapping ``inputs``.

    Returns ``(output, tape)``; the tape is closed and ready for
    :func:`backprop`.
    """
    tape = Tape()
    xs = tape.independents(inputs)
    out = f(*xs)
    tape.close()
    return out, tape


def backprop(tape, output, seed=1.0):
    """Gradient of ``output`` with respect to every independent of ``tape``.

    Independents that ``output`` does not depend on get the gradient ``0.0``.
    """
    if not tape.closed:
        raise TapeUsageError("backprop called before recording finished (tape not closed)")
    n_in = len(tape.inputs)
    if not isinstance(output, AdjointScalar):
        return [0.0] * n_in
    if output.tape is not tape:
        raise TapeUsageError("output was recorded on a different tape")
    adj = [None] * (output.index + 1)
    adj[output.index] = seed
    parents = tape.parents
    partials = tape.partials
    for v in range(output.index, -1, -1):
        a = adj[v]
        if a is None:
            continue
        for p, w in zip(parents[v], partials[v]):
            if _is_one(w):
                contrib = a
            elif _is_minus_one(w):
                contrib = -a
            elif _is_one(a):
                contrib = w
            else:
                contrib = w * a
            adj[p] = contrib if adj[p] is None else adj[p] + contrib
    out = []
    for i in tape.inputs:
        g = adj[i] if i < len(adj) else None
        out.append(0.0 if g is None else g)
    return out
