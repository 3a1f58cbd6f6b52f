"""Truncated Taylor series arithmetic.

A :class:`TaylorScalar` stores Taylor *coefficients* ``x_k = x^{(k)}(t)/k!``,
not derivatives.  Binary operations between series of different orders
truncate to the shorter one; plain numbers are promoted to constant series.
"""
import math

import numpy as np

from .errors import InsufficientOrderError, SingularEvaluationError

_FACT = [math.factorial(k) for k in range(171)]


def factorial_vector(n):
    """Return ``[0!, 1!, ..., (n-1)!]`` as a float array."""
    return np.array(_FACT[:n], dtype=float)


def coeff_deriv_convert(values, direction="to_derivatives"):
    """Convert between Taylor coefficients and derivatives.

    ``direction`` is ``"to_derivatives"`` (multiply entry k by k!) or
    ``"to_coefficients"`` (divide by k!).  Accepts a TaylorScalar or any
    sequence of numbers and returns a numpy array.
    """
    arr = np.array(values.coeffs if isinstance(values, TaylorScalar) else values, dtype=float)
    f = factorial_vector(arr.shape[-1])
    if direction in ("to_derivatives", "derivatives"):
        return arr * f
    if direction in ("to_coefficients", "coefficients"):
        return arr / f
    raise ValueError(f"unknown direction {direction!r}")


def _check(coeffs, what):
    if not np.all(np.isfinite(coeffs)):
        raise SingularEvaluationError(f"non-finite coefficient in {what}")
    return coeffs


class TaylorScalar:
    """Truncated power series ``x_0 + x_1 s + ... + x_p s^p``."""

    __slots__ = ("_c",)
    __array_priority__ = 100

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float).reshape(-1)
        if c.size == 0:
            raise ValueError("a series needs at least one coefficient")
        self._c = c

    @classmethod
    def constant(cls, value, order):
        c = np.zeros(order + 1)
        c[0] = value
        return cls._wrap(c)

    @classmethod
    def variable(cls, value, order):
        """The series of ``value + s`` (the independent variable shifted)."""
        c = np.zeros(order + 1)
        c[0] = value
        if order >= 1:
            c[1] = 1.0
        return cls._wrap(c)

    @classmethod
    def from_derivatives(cls, derivs):
        return cls(coeff_deriv_convert(derivs, "to_coefficients"))

    @classmethod
    def _wrap(cls, c):
        obj = cls.__new__(cls)
        obj._c = c
        return obj

    @property
    def coeffs(self):
        return self._c.copy()

    @property
    def order(self):
        return self._c.size - 1

    def __len__(self):
        return self._c.size

    def __getitem__(self, k):
        return self._c[k]

    def derivatives(self):
        return coeff_deriv_convert(self._c, "to_derivatives")

    def truncate(self, order):
        if order > self.order:
            raise InsufficientOrderError(f"cannot extend order {self.order} to {order}")
        return TaylorScalar._wrap(self._c[: order + 1].copy())

    def __repr__(self):
        return "TaylorScalar(" + ", ".join(f"{v:.17g}" for v in self._c) + ")"

    def __eq__(self, other):
        if isinstance(other, TaylorScalar):
            return self._c.shape == other._c.shape and bool(np.all(self._c == other._c))
        return NotImplemented

    __hash__ = None

    # -- operand handling -------------------------------------------------

    def _pair(self, other):
        if isinstance(other, TaylorScalar):
            p = min(self.order, other.order)
            return self._c[: p + 1], other._c[: p + 1]
        if isinstance(other, (int, float, np.floating, np.integer)):
            o = np.zeros_like(self._c)
            o[0] = other
            return self._c, o
        return None, None

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return TaylorScalar._wrap(_check(a + b, "add"))

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return TaylorScalar._wrap(_check(a - b, "sub"))

    def __rsub__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return TaylorScalar._wrap(_check(b - a, "sub"))

    def __neg__(self):
        return TaylorScalar._wrap(-self._c)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return TaylorScalar._wrap(_check(self._c * float(other), "mul"))
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return TaylorScalar._wrap(_check(np.convolve(a, b)[: a.size], "mul"))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            if other == 0:
                raise SingularEvaluationError("division by zero")
            return TaylorScalar._wrap(_check(self._c / float(other), "div"))
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return TaylorScalar._wrap(_series_div(a, b))

    def __rtruediv__(self, other):
        a, b = self._pair(other)
        if a is None:
            return NotImplemented
        return TaylorScalar._wrap(_series_div(b, a))

    def __pow__(self, r):
        if isinstance(r, TaylorScalar):
            return (self.log() * r).exp()
        if float(r) == int(r) and abs(r) <= 64:
            n = int(r)
            if n < 0:
                return 1.0 / (self ** (-n))
            result = TaylorScalar.constant(1.0, self.order)
            base = self
            while n:
                if n & 1:
                    result = result * base
                n >>= 1
                if n:
                    base = base.sqr()
            return result
        return TaylorScalar._wrap(_series_pow(self._c, float(r)))

    def __rpow__(self, base):
        return (self * math.log(base)).exp()

    # -- elementary functions ---------------------------------------------

    def sqr(self):
        return TaylorScalar._wrap(_check(np.convolve(self._c, self._c)[: self._c.size], "sqr"))

    def sqrt(self):
        return TaylorScalar._wrap(_series_sqrt(self._c))

    def exp(self):
        return TaylorScalar._wrap(_series_exp(self._c))

    def log(self):
        return TaylorScalar._wrap(_series_log(self._c))

    def sincos(self):
        s, c = _series_sincos(self._c)
        return TaylorScalar._wrap(s), TaylorScalar._wrap(c)

    def sin(self):
        return self.sincos()[0]

    def cos(self):
        return self.sincos()[1]

    def diff(self, q=1):
        """Return the series of the q-th time derivative (order drops by q)."""
        q = int(q)
        if q < 0:
            raise ValueError("derivative order must be non-negative")
        if q == 0:
            return self
        p = self.order
        if q > p:
            raise InsufficientOrderError(f"diff of order {q} needs a series of order >= {q}, got {p}")
        k = np.arange(p - q + 1)
        fac = np.ones(p - q + 1)
        for i in range(1, q + 1):
            fac *= k + i
        return TaylorScalar._wrap(self._c[q:] * fac)


# -- recurrences on raw coefficient arrays ---------------------------------


def _series_div(a, b):
    if b[0] == 0.0:
        raise SingularEvaluationError("division by a series with zero constant term")
    v = np.empty_like(a)
    for m in range(a.size):
        v[m] = (a[m] - np.dot(b[1 : m + 1], v[m - 1 :: -1][:m])) / b[0]
    return _check(v, "div")


def _series_sqrt(a):
    if a[0] < 0.0 or (a[0] == 0.0 and a.size > 1):
        raise SingularEvaluationError(f"sqrt of a series with constant term {a[0]}")
    v = np.empty_like(a)
    v[0] = math.sqrt(a[0])
    for m in range(1, a.size):
        v[m] = (a[m] - np.dot(v[1:m], v[m - 1 : 0 : -1])) / (2.0 * v[0])
    return _check(v, "sqrt")


def _series_exp(a):
    v = np.empty_like(a)
    try:
        v[0] = math.exp(a[0])
    except OverflowError:
        raise SingularEvaluationError("exp overflow") from None
    for m in range(1, a.size):
        i = np.arange(1, m + 1)
        v[m] = np.dot(i * a[1 : m + 1], v[m - 1 :: -1][:m]) / m
    return _check(v, "exp")


def _series_log(a):
    if a[0] <= 0.0:
        raise SingularEvaluationError(f"log of a series with constant term {a[0]}")
    v = np.empty_like(a)
    v[0] = math.log(a[0])
    for m in range(1, a.size):
        i = np.arange(1, m)
        v[m] = (a[m] - np.dot(i * v[1:m], a[m - 1 : 0 : -1]) / m) / a[0]
    return _check(v, "log")


def _series_sincos(a):
    s = np.empty_like(a)
    c = np.empty_like(a)
    s[0] = math.sin(a[0])
    c[0] = math.cos(a[0])
    for m in range(1, a.size):
        ia = np.arange(1, m + 1) * a[1 : m + 1]
        s[m] = np.dot(ia, c[m - 1 :: -1][:m]) / m
        c[m] = -np.dot(ia, s[m - 1 :: -1][:m]) / m
    return _check(s, "sin"), _check(c, "cos")


def _series_pow(a, r):
    if a[0] <= 0.0:
        raise SingularEvaluationError(f"non-integer power of a series with constant term {a[0]}")
    v = np.empty_like(a)
    v[0] = a[0] ** r
    for m in range(1, a.size):
        i = np.arange(1, m + 1)
        w = r * i - (m - i)
        v[m] = np.dot(w * a[1 : m + 1], v[m - 1 :: -1][:m]) / (m * a[0])
    return _check(v, "pow")
