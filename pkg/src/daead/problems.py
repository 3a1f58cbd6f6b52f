"""Built-in problems.

Each registry entry knows how to build its DAE from a parameter dict, what
the default parameters are, and which items to fix (and guess) for a
consistent initial point.  Item names are variable names followed by one
prime per derivative, e.g. ``x''``.
"""
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

from . import functions as fn
from .dae import DaeSystem
from .lagrangian import LagrangianSpec, rod_kinetic_energy, second_kind_reference, to_dae

DETEST_C5_SHA256 = "4c0c15272b8cd76660003eb84dcc14ccdf442700c484520971032f7921e6920c"


@dataclass
class InitialCondition:
    """Items held fixed during consistent initialisation, plus guesses."""

    fixed: dict = field(default_factory=dict)
    guess: dict = field(default_factory=dict)


@dataclass
class ProblemDef:
    name: str
    builder: Callable
    defaults: dict
    initial: Callable
    doc: str = ""
    t_end: float = 10.0

    def params(self, overrides=None):
        p = dict(self.defaults)
        for k, v in (overrides or {}).items():
            if k not in p:
                raise KeyError(f"unknown parameter {k!r} for {self.name}; known: {sorted(p)}")
            p[k] = v
        return p

    def build(self, overrides=None):
        p = self.params(overrides)
        return self.builder(p), p


def _positive(p, *keys):
    for k in keys:
        if not p[k] > 0:
            raise ValueError(f"parameter {k} must be positive, got {p[k]}")


# -- pendulum ---------------------------------------------------------------


def _pendulum_L(t, q, qd, p):
    m, g = p["m"], p["g"]
    return 0.5 * m * (fn.sqr(qd[0]) + fn.sqr(qd[1])) + m * g * q[1]


def _pendulum_C(t, q, p):
    return fn.sqr(q[0]) + fn.sqr(q[1]) - p["L"] ** 2


def build_pendulum(params):
    """Simple pendulum in cartesian coordinates, ``y`` pointing down."""
    _positive(params, "m", "L")
    return LagrangianSpec(2, _pendulum_L, [_pendulum_C], params, ["x", "y"],
                          description="simple pendulum, first-kind Lagrangian")


def pendulum_residual(t, z, p):
    """Hand-coded pendulum DAE (unit mass)."""
    x, y, lam = z
    return [fn.diff(x, 2) + x * lam,
            fn.diff(y, 2) + y * lam - p["g"],
            fn.sqr(x) + fn.sqr(y) - p["L"] ** 2]


def build_pendulum_dae(params):
    _positive(params, "L")
    return DaeSystem(3, pendulum_residual, ["x", "y", "lambda"], params, "hand-coded pendulum DAE")


def _pendulum_ic(p):
    L = p["L"]
    x0 = p.get("x0", 0.6 * L)
    return InitialCondition({"x": x0, "x'": p.get("xdot0", 0.0)},
                            {"y": math.sqrt(max(L * L - x0 * x0, 0.0)) or L})


def _theta_L(t, q, qd, p):
    m, g, L = p["m"], p["g"], p["L"]
    return 0.5 * m * L * L * fn.sqr(qd[0]) + m * g * L * fn.cos(q[0])


def build_pendulum_theta(params):
    _positive(params, "m", "L")
    return LagrangianSpec(1, _theta_L, [], params, ["theta"],
                          description="simple pendulum in angle coordinates, second kind")


# -- controlled pendulum -----------------------------------------------------


def build_controlled_pendulum(params):
    """Pendulum with horizontal force ``u`` making ``x = a sin(omega t)``."""
    _positive(params, "m", "L")
    if not abs(params["a"]) < params["L"]:
        raise ValueError("amplitude a must be smaller than the length L")
    if params.get("omega") is None:
        params["omega"] = math.sqrt(params["g"] / params["L"])

    def hook(t, z, f, p):
        f[0] = f[0] - z[3]
        f.append(z[0] - p["a"] * fn.sin(p["omega"] * t))
        return f

    return LagrangianSpec(2, _pendulum_L, [_pendulum_C], params, ["x", "y"], post_hook=hook,
                          n_extra=1, extra_names=["u"],
                          description="prescribed-trajectory control of a pendulum")


def controlled_pendulum_residual(t, z, p):
    """Hand-coded controlled pendulum (unit mass)."""
    x, y, lam, u = z
    return [fn.diff(x, 2) + x * lam - u,
            fn.diff(y, 2) + y * lam - p["g"],
            fn.sqr(x) + fn.sqr(y) - p["L"] ** 2,
            x - p["a"] * fn.sin(p["omega"] * t)]


def _controlled_ic(p):
    return InitialCondition({}, {"y": p["L"], "lambda": 0.5 * p["g"] / p["L"]})


# -- spring-mass-multipendulum ----------------------------------------------


def _chain_L(t, q, qd, p):
    n, M, m, k, g = int(p["n"]), p["M"], p["m"], p["k"], p["g"]
    x0, xs, ys = q[0], q[1 : n + 1], q[n + 1 :]
    x0d, xds, yds = qd[0], qd[1 : n + 1], qd[n + 1 :]
    T = 0.5 * M * fn.sqr(x0d)
    prev = (x0d, 0.0)
    for i in range(n):
        cur = (xds[i], yds[i])
        T = T + rod_kinetic_energy(m, prev, cur)
        prev = cur
    pe = 0.5 * ys[n - 1]
    for i in range(n - 1):
        pe = pe + ys[i]
    V = 0.5 * k * fn.sqr(x0) - m * g * pe  # y points downward
    return T - V


def _chain_constraints(n):
    def make(i):
        def C(t, q, p):
            x = q[1 : n + 1]
            y = q[n + 1 :]
            if i == 0:
                return fn.sqr(x[0] - q[0]) + fn.sqr(y[0]) - p["l"] ** 2
            return fn.sqr(x[i] - x[i - 1]) + fn.sqr(y[i] - y[i - 1]) - p["l"] ** 2

        return C

    return [make(i) for i in range(n)]


def build_spring_mass_chain(params):
    """Sliding mass on a spring with a hanging chain of ``n`` uniform rods."""
    n = int(params["n"])
    if n < 1:
        raise ValueError("need at least one rod")
    params["n"] = n
    _positive(params, "M", "m", "l")
    names = ["x0"] + [f"x{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, n + 1)]
    spec = LagrangianSpec(2 * n + 1, _chain_L, _chain_constraints(n), params, names,
                          description=f"spring-mass with {n} rods, first-kind Lagrangian")
    return spec


def _chain_names(n):
    return (["x0"] + [f"x{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, n + 1)]
            + [f"lambda{i}" for i in range(1, n + 1)])


def _chain_ic(p):
    n = int(p["n"])
    fixed = {"x0": p["x0"], "x0'": 0.0}
    guess = {}
    for i in range(1, n + 1):
        fixed[f"y{i}"] = 0.0
        fixed[f"y{i}'"] = 0.0
        guess[f"x{i}"] = p["x0"] - i * p["l"]
    return InitialCondition(fixed, guess)


def _spring_mass_theta_L(t, q, qd, p):
    M, m, k, g = p["M"], p["m"], p["k"], p["g"]
    a = 0.5 * p["l"]
    x, th = q
    xd, thd = qd
    T = (0.5 * (M + m) * fn.sqr(xd) + m * a * xd * thd * fn.cos(th)
         + 2.0 / 3.0 * m * a * a * fn.sqr(thd))
    V = 0.5 * k * fn.sqr(x) + m * g * a * (1.0 - fn.cos(th))
    return T - V


def build_spring_mass_theta(params):
    """One-rod spring-mass system in (x, theta) coordinates, second kind."""
    _positive(params, "M", "m", "l")
    return LagrangianSpec(2, _spring_mass_theta_L, [], params, ["x", "theta"],
                          description="spring-mass with one rod, second-kind Lagrangian")


def _theta_ic(p):
    return InitialCondition({"x": p["x0"], "x'": 0.0, "theta": p["theta0"], "theta'": 0.0}, {})


# -- planets -----------------------------------------------------------------


def load_detest_c5(verify=True):
    """Planetary data; the file checksum is verified against the pinned value."""
    raw = resources.files("daead").joinpath("data/detest_c5.json").read_bytes()
    if verify and hashlib.sha256(raw).hexdigest() != DETEST_C5_SHA256:
        raise ValueError("planetary data file does not match its pinned checksum")
    return json.loads(raw)


def _nbody_L(t, q, qd, p):
    m, G = p["masses"], p["G"]
    nb = len(m) - 1
    Mt = sum(m)
    rho = [q[3 * i : 3 * i + 3] for i in range(nb)]
    rhod = [qd[3 * i : 3 * i + 3] for i in range(nb)]
    # velocities about the centre of mass; the Sun sits at rho = 0
    rcd = [sum(m[i + 1] * rhod[i][k] for i in range(nb)) / Mt for k in range(3)]
    T = 0.5 * m[0] * sum(fn.sqr(rcd[k]) for k in range(3))
    for i in range(nb):
        T = T + 0.5 * m[i + 1] * sum(fn.sqr(rhod[i][k] - rcd[k]) for k in range(3))
    # r_i - r_j = rho_i - rho_j, so the potential needs no centre of mass
    U = 0.0
    for i in range(nb):
        U = U + G * m[0] * m[i + 1] / fn.sqrt(sum(fn.sqr(rho[i][k]) for k in range(3)))
        for j in range(i + 1, nb):
            dist = fn.sqrt(sum(fn.sqr(rho[i][k] - rho[j][k]) for k in range(3)))
            U = U + G * m[i + 1] * m[j + 1] / dist
    return T + U


def build_planets(params):
    """Sun plus planets, positions relative to the Sun, second kind."""
    masses = list(params["masses"])
    if len(masses) < 2 or any(not mi > 0 for mi in masses):
        raise ValueError("need at least two positive masses")
    _positive(params, "G")
    nb = len(masses) - 1
    names = [f"{c}{i + 1}" for i in range(nb) for c in "xyz"]
    return LagrangianSpec(3 * nb, _nbody_L, [], params, names,
                          description=f"{nb + 1}-body gravitational problem, relative coordinates")


def _planets_defaults():
    data = load_detest_c5()
    return {"G": data["G"], "masses": data["masses"],
            "positions": data["positions"], "velocities": data["velocities"]}


def _planets_ic(p):
    fixed = {}
    for i, (r, v) in enumerate(zip(p["positions"], p["velocities"])):
        for k, c in enumerate("xyz"):
            fixed[f"{c}{i + 1}"] = r[k]
            fixed[f"{c}{i + 1}'"] = v[k]
    return InitialCondition(fixed, {})


def planets_absolute(params, q, qd):
    """Absolute (centre-of-mass frame) positions and velocities, shape (nb+1, 3)."""
    import numpy as np

    m = np.asarray(params["masses"], dtype=float)
    rho = np.vstack([np.zeros(3), np.asarray(q, dtype=float).reshape(-1, 3)])
    rhod = np.vstack([np.zeros(3), np.asarray(qd, dtype=float).reshape(-1, 3)])
    rc = m @ rho / m.sum()
    rcd = m @ rhod / m.sum()
    return rho - rc, rhod - rcd


def planets_invariants(params, q, qd):
    """Total energy, angular momentum vector and linear momentum."""
    import numpy as np

    m = np.asarray(params["masses"], dtype=float)
    r, v = planets_absolute(params, q, qd)
    T = 0.5 * np.sum(m * np.sum(v * v, axis=1))
    V = 0.0
    for i in range(len(m)):
        for j in range(i + 1, len(m)):
            V -= params["G"] * m[i] * m[j] / np.linalg.norm(r[i] - r[j])
    H = np.sum(m[:, None] * np.cross(r, v), axis=0)
    P = np.sum(m[:, None] * v, axis=0)
    return T + V, H, P


# -- toy DAEs ----------------------------------------------------------------


def _u(t):
    return fn.sin(t)


def toy_index0_residual(t, z, p):
    """x1 - u(t) = 0, x1 - x2' = 0."""
    x1, x2 = z
    return [x1 - _u(t), x1 - fn.diff(x2, 1)]


def toy_index1_residual(t, z, p):
    """x2 - u(t) = 0, x1 - x2' = 0."""
    x1, x2 = z
    return [x2 - _u(t), x1 - fn.diff(x2, 1)]


def toy_coupled_residual(t, z, p):
    """x1 - x2 - u(t) = 0, x1 - x2' = 0."""
    x1, x2 = z
    return [x1 - x2 - _u(t), x1 - fn.diff(x2, 1)]


def build_toy_daes():
    """The three two-variable toy DAEs, keyed by registry name."""
    return {
        "toy_ode_part": DaeSystem(2, toy_index0_residual, ["x1", "x2"], {}, "x1 = u(t), x1 = x2'"),
        "toy_no_dof": DaeSystem(2, toy_index1_residual, ["x1", "x2"], {}, "x2 = u(t), x1 = x2'"),
        "toy_coupled": DaeSystem(2, toy_coupled_residual, ["x1", "x2"], {}, "x1 - x2 = u(t), x1 = x2'"),
    }


def _toy(name):
    return lambda p: build_toy_daes()[name]


# -- registry ----------------------------------------------------------------


def _lag(builder, names=None):
    def build(p):
        spec = builder(p)
        return to_dae(spec, names(p) if names else None)

    return build


REGISTRY = {}


def _register(pd):
    REGISTRY[pd.name] = pd


_register(ProblemDef(
    "pendulum", _lag(build_pendulum), {"m": 1.0, "g": 9.81, "L": 10.0, "x0": 6.0, "xdot0": 0.0},
    _pendulum_ic, "simple pendulum from its Lagrangian and length constraint; variables x, y, lambda",
    t_end=20.0))
_register(ProblemDef(
    "pendulum_dae", build_pendulum_dae, {"g": 9.81, "L": 10.0, "x0": 6.0, "xdot0": 0.0},
    _pendulum_ic, "hand-coded pendulum DAE x''+x*lambda=0, y''+y*lambda-g=0, x^2+y^2-L^2=0",
    t_end=20.0))
_register(ProblemDef(
    "pendulum_theta", lambda p: second_kind_reference(build_pendulum_theta(p)),
    {"m": 1.0, "g": 9.81, "L": 10.0, "theta0": 0.5},
    lambda p: InitialCondition({"theta": p["theta0"], "theta'": 0.0}, {}),
    "simple pendulum in angle coordinates (unconstrained)", t_end=20.0))
_register(ProblemDef(
    "controlled_pendulum", _lag(build_controlled_pendulum),
    {"m": 1.0, "g": 9.8, "L": 10.0, "a": 1.0, "omega": None},
    _controlled_ic, "pendulum driven by a horizontal force u(t) so that x = a sin(omega t); "
    "omega defaults to sqrt(g/L); zero degrees of freedom", t_end=20.0))
_register(ProblemDef(
    "controlled_pendulum_dae", lambda p: DaeSystem(
        4, controlled_pendulum_residual, ["x", "y", "lambda", "u"],
        dict(p, omega=p["omega"] if p.get("omega") is not None else math.sqrt(p["g"] / p["L"])),
        "hand-coded controlled pendulum"),
    {"g": 9.8, "L": 10.0, "a": 1.0, "omega": None},
    _controlled_ic, "hand-coded controlled pendulum DAE", t_end=20.0))
_register(ProblemDef(
    "spring_mass", _lag(build_spring_mass_chain, lambda p: _chain_names(int(p["n"]))),
    {"n": 1, "M": 5.0, "m": 2.0, "k": 10.0, "l": 2.0, "g": 9.8, "x0": 4.0},
    _chain_ic, "sliding mass on a spring with a chain of n rods, cartesian coordinates", t_end=40.0))
_register(ProblemDef(
    "spring_mass_theta", lambda p: second_kind_reference(build_spring_mass_theta(p)),
    {"M": 5.0, "m": 2.0, "k": 10.0, "l": 2.0, "g": 9.8, "x0": 4.0, "theta0": -math.pi / 2},
    _theta_ic, "one-rod spring-mass system in (x, theta) coordinates", t_end=40.0))
_register(ProblemDef(
    "planets", lambda p: second_kind_reference(build_planets(p)), _planets_defaults(),
    _planets_ic, "Sun and five outer planets, positions relative to the Sun (DETEST C5 data)",
    t_end=20.0))
for _name, _doc in (("toy_ode_part", "x1 - u(t) = 0, x1 - x2' = 0 with u = sin"),
                    ("toy_no_dof", "x2 - u(t) = 0, x1 - x2' = 0 with u = sin"),
                    ("toy_coupled", "x1 - x2 - u(t) = 0, x1 - x2' = 0 with u = sin")):
    _register(ProblemDef(_name, _toy(_name), {},
                         (lambda p: InitialCondition({"x2": 0.0}, {})) if _name != "toy_no_dof"
                         else (lambda p: InitialCondition({}, {})),
                         _doc, t_end=5.0))


def get_problem(name):
    try:
        return REGISTRY[name]
    except KeyError:
        import difflib

        close = difflib.get_close_matches(name, REGISTRY, n=3)
        hint = f"; did you mean {', '.join(close)}?" if close else ""
        raise KeyError(f"unknown problem {name!r}{hint}") from None
