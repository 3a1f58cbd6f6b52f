"""Scalar-generic elementary functions.

Residual and Lagrangian code is written once against these helpers and then
run with plain floats, Taylor series, adjoint scalars, signature scalars or
tracing scalars.  Objects supply a method of the same name; plain numbers
fall back to :mod:`math`.
"""
import math

from .errors import SingularEvaluationError

_NUMBER = (int, float)


def _is_number(x):
    return isinstance(x, _NUMBER) or type(x).__module__ == "numpy"


def diff(x, q=1):
    """q-th time derivative of ``x``; plain numbers are constants."""
    if _is_number(x):
        return x if q == 0 else 0.0
    return x.diff(q)


def sqr(x):
    if _is_number(x):
        return x * x
    return x.sqr()


def _float_call(fn, name, x):
    try:
        return fn(float(x))
    except (ValueError, OverflowError) as exc:
        raise SingularEvaluationError(f"{name}({x}): {exc}") from None


def sqrt(x):
    if _is_number(x):
        return _float_call(math.sqrt, "sqrt", x)
    return x.sqrt()


def exp(x):
    if _is_number(x):
        return _float_call(math.exp, "exp", x)
    return x.exp()


def log(x):
    if _is_number(x):
        return _float_call(math.log, "log", x)
    return x.log()


def sin(x):
    if _is_number(x):
        return math.sin(x)
    return x.sin()


def cos(x):
    if _is_number(x):
        return math.cos(x)
    return x.cos()


def power(x, r):
    """``x ** r`` for a constant real exponent ``r``."""
    if _is_number(x):
        try:
            val = float(x) ** r
        except ZeroDivisionError:
            raise SingularEvaluationError(f"{x} ** {r}") from None
        if isinstance(val, complex):
            raise SingularEvaluationError(f"{x} ** {r} is not real")
        return val
    return x ** r
