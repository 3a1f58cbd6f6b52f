"""Equations of motion manufactured from a Lagrangian and constraints.

For generalized coordinates ``q`` (``n_q`` of them) and holonomic
constraints ``C_j(t, q) = 0`` with multipliers ``lambda_j`` the residuals are

    f_i         = d/dt dL/dqdot_i - dL/dq_i + sum_j lambda_j dC_j/dq_i
    f_{n_q + j} = C_j(t, q)

The partials are computed by reverse mode over whatever scalar type the
residual is evaluated with; with Taylor series the gradient with respect to
``qdot`` is itself a series, so ``d/dt`` is the series ``diff`` operator.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import functions as fn
from .adjoint import AdjointScalar, Tape, backprop
from .dae import DaeSystem
from .errors import InsufficientOrderError
from .taylor import TaylorScalar


@dataclass
class LagrangianSpec:
    """Generic code for ``L(t, q, qdot, params)`` and ``C_j(t, q, params)``.

    ``post_hook(t, z, f, params)`` may modify the residual list (external
    forces) and append equations for ``n_extra`` extra variables, which sit
    after the multipliers in ``z``.
    """

    n_q: int
    lagrangian: Callable
    constraints: Sequence[Callable] = ()
    params: Any = None
    q_names: Optional[list] = None
    post_hook: Optional[Callable] = None
    n_extra: int = 0
    extra_names: list = field(default_factory=list)
    description: str = ""

    @property
    def n_c(self):
        return len(self.constraints)

    @property
    def n(self):
        return self.n_q + self.n_c + self.n_extra

    def names(self):
        q = list(self.q_names) if self.q_names else [f"q{i}" for i in range(self.n_q)]
        lam = ["lambda"] if self.n_c == 1 else [f"lambda{j + 1}" for j in range(self.n_c)]
        extra = list(self.extra_names) or [f"u{i}" for i in range(self.n_extra)]
        return q + lam + extra


def init_q_qp(z, tape=None):
    """Register ``q_i = z_i`` and ``qdot_i = diff(z_i, 1)`` on a fresh tape.

    Returns ``(q, qdot, tape)``; all ``2 n_q`` values are independents, ``q``
    first.
    """
    for zi in z:
        if isinstance(zi, TaylorScalar) and zi.order < 2:
            raise InsufficientOrderError(
                f"coordinates need Taylor order >= 2 for the equations of motion, got {zi.order}")
    tape = Tape() if tape is None else tape
    q = tape.independents(list(z))
    qd = tape.independents([fn.diff(zi, 1) for zi in z])
    return q, qd, tape


def _value(x):
    return x.value if isinstance(x, AdjointScalar) else x


def _zero(x):
    return isinstance(x, float) and x == 0.0


def setup_equations(spec, t, z):
    """Residuals of the Lagrange equations for the items ``z``."""
    nq = spec.n_q
    params = spec.params
    q, qd, tape = init_q_qp(z[:nq])
    L = spec.lagrangian(t, q, qd, params)
    tape.close()
    grad = backprop(tape, L)
    dLdq, dLdqd = grad[:nq], grad[nq:]
    f = [fn.diff(dLdqd[i], 1) - dLdq[i] for i in range(nq)]
    cvals = []
    for j, C in enumerate(spec.constraints):
        tj = Tape()
        qj = tj.independents(list(z[:nq]))
        Cj = C(t, qj, params)
        tj.close()
        g = backprop(tj, Cj)
        lam = z[nq + j]
        for i in range(nq):
            if not _zero(g[i]):
                f[i] = f[i] + lam * g[i]
        cvals.append(_value(Cj))
    f.extend(cvals)
    if spec.post_hook is not None:
        f = list(spec.post_hook(t, z, f, params))
    return f


def to_dae(spec, names=None):
    """Wrap a :class:`LagrangianSpec` as a :class:`DaeSystem`."""

    def residual(t, z, params):
        return setup_equations(spec, t, z)

    return DaeSystem(spec.n, residual, list(names or spec.names()), spec.params,
                     spec.description, lagrangian=spec)


def second_kind_reference(spec):
    """DAE of an unconstrained (second-kind) Lagrangian: an implicit ODE."""
    if spec.n_c != 0:
        raise ValueError("second-kind systems have no constraints")
    return to_dae(spec)


def lagrangian_energy(spec, t, q, qd):
    """Energy ``qdot . dL/dqdot - L`` at plain-float coordinates."""
    tape = Tape()
    qs = tape.independents([float(v) for v in q])
    qds = tape.independents([float(v) for v in qd])
    L = spec.lagrangian(t, qs, qds, spec.params)
    tape.close()
    g = backprop(tape, L)
    p = np.array([float(v) for v in g[spec.n_q:]])
    return float(np.dot(p, np.asarray(qd, dtype=float)) - _value(L))


def constraint_values(spec, t, q):
    return np.array([float(_value(C(t, list(q), spec.params))) for C in spec.constraints])


def rod_kinetic_energy(m, r0dot, r1dot):
    """Kinetic energy of a uniform rod from its end velocities."""
    a = sum(u * u for u in r0dot)
    b = sum(u * v for u, v in zip(r0dot, r1dot))
    c = sum(v * v for v in r1dot)
    return m / 6.0 * (a + b + c)


def rod_kinetic_energy_quadrature(m, r0dot, r1dot, elements=100_000):
    """Rod kinetic energy summed over ``elements`` point masses (midpoint rule)."""
    r0dot = np.asarray(r0dot, dtype=float)
    r1dot = np.asarray(r1dot, dtype=float)
    s = (np.arange(elements) + 0.5) / elements
    v = np.outer(1.0 - s, r0dot) + np.outer(s, r1dot)
    return float(0.5 * (m / elements) * np.sum(v * v))
