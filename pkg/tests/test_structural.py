import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from daead import functions as fn
from daead.dae import DaeSystem
from daead.errors import StructurallySingularError, StructureError
from daead.integrate import consistent_initialize
from daead.problems import REGISTRY, build_toy_daes, get_problem
from daead.structural import (analyze, canonical_offsets, highest_value_transversal, index_and_dof,
                              sa_friendly_check, signature_matrix, system_jacobian)

NI = -np.inf


def built(name, **over):
    dae, _ = get_problem(name).build(over)
    return dae


def all_problems():
    return [name for name in REGISTRY]


def test_pendulum_signature_and_offsets():
    for name in ("pendulum", "pendulum_dae"):
        dae = built(name)
        s = analyze(dae)
        assert np.array_equal(s.sigma, [[2, NI, 0], [NI, 2, 0], [0, 0, NI]])
        assert s.value == 2  # 2 + 0 + 0 on {(f1,x),(f2,lambda),(f3,y)}
        assert list(s.c) == [0, 0, 2] and list(s.d) == [2, 2, 0]
        assert (s.nu, s.dof) == (2, 2)


def test_controlled_pendulum_signature_and_offsets():
    for name in ("controlled_pendulum", "controlled_pendulum_dae"):
        s = analyze(built(name))
        assert np.array_equal(s.sigma, [[2, NI, 0, 0], [NI, 2, 0, NI], [0, 0, NI, NI], [0, NI, NI, NI]])
        assert s.transversal == [(0, 3), (1, 2), (2, 1), (3, 0)]
        assert s.value == 0  # every transversal entry is 0
        assert list(s.c) == [0, 0, 2, 2] and list(s.d) == [2, 2, 0, 0]
        assert s.dof == 0


def test_toy_offsets():
    toys = build_toy_daes()
    s2 = analyze(toys["toy_ode_part"])
    assert np.array_equal(s2.sigma, [[0, NI], [0, 1]])
    assert list(s2.c) == [0, 0] and list(s2.d) == [0, 1]
    assert (s2.nu, s2.dof) == (0, 1)
    s3 = analyze(toys["toy_no_dof"])
    assert list(s3.c) == [1, 0] and list(s3.d) == [0, 1]
    assert s3.dof == 0
    s4 = analyze(toys["toy_coupled"])
    assert s4.dof == 1


def test_trivial_transversal():
    assert highest_value_transversal(np.array([[0.0]])) == ([(0, 0)], 0)
    assert index_and_dof([0, 0, 2], [2, 2, 0]) == (2, 2)


def test_structurally_singular():
    with pytest.raises(StructurallySingularError) as err:
        highest_value_transversal(np.array([[0, 1], [NI, NI]]))
    assert list(err.value.rows) == [1]
    dae = DaeSystem(2, lambda t, z, p: [z[0] + fn.diff(z[1], 1), fn.sin(t) - 1.0], ["a", "b"])
    with pytest.raises(StructurallySingularError):
        analyze(dae)


def test_branching_residual_is_rejected():
    def res(t, z, p):
        return [z[0] if z[0] > 0 else -z[0]]

    with pytest.raises(StructureError):
        signature_matrix(DaeSystem(1, res, ["x"]))


def _brute_force_value(sigma):
    n = sigma.shape[0]
    best = NI
    for perm in itertools.permutations(range(n)):
        v = sum(sigma[i, perm[i]] for i in range(n))
        best = max(best, v)
    return best


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 6).flatmap(
    lambda n: st.lists(st.one_of(st.just(NI), st.integers(0, 5).map(float)),
                       min_size=n * n, max_size=n * n).map(lambda v: np.array(v).reshape(n, n))))
def test_transversal_matches_brute_force_and_scipy(sigma):
    best = _brute_force_value(sigma)
    if not np.isfinite(best):
        with pytest.raises(StructurallySingularError):
            highest_value_transversal(sigma)
        return
    pairs, value = highest_value_transversal(sigma)
    assert value == best
    assert sorted(j for _, j in pairs) == list(range(sigma.shape[0]))
    w = np.where(np.isfinite(sigma), sigma, -1e6)
    r, c = linear_sum_assignment(w, maximize=True)
    assert w[r, c].sum() == value
    cc, dd = canonical_offsets(sigma, pairs)
    fin = np.isfinite(sigma)
    assert np.all((dd[None, :] - cc[:, None] >= sigma) | ~fin)
    for i, j in pairs:
        assert dd[j] - cc[i] == sigma[i, j]
    assert np.all(cc >= 0) and np.all(dd >= 0)


@pytest.mark.parametrize("name", all_problems())
def test_duality(name):
    s = analyze(built(name))
    fin = np.isfinite(s.sigma)
    gap = s.d[None, :] - s.c[:, None]
    assert np.all(gap[fin] >= s.sigma[fin])
    for i, j in s.transversal:
        assert gap[i, j] == s.sigma[i, j]
    assert s.dof == s.d.sum() - s.c.sum()


def brute_force_minimal_offsets(sigma, value, bound=4):
    """Elementwise minimum of all valid dual pairs with entries <= bound."""
    n = sigma.shape[0]
    fin = np.isfinite(sigma)
    s = np.where(fin, sigma, -10**6)
    best = None
    for c in itertools.product(range(bound + 1), repeat=n):
        c = np.array(c)
        d = np.maximum((s + c[:, None]).max(axis=0), 0)
        if np.any(d > bound) or d.sum() - c.sum() != value:
            continue
        pair = np.concatenate([c, d])
        best = pair if best is None else np.minimum(best, pair)
    return best[:n], best[n:]


@pytest.mark.parametrize("name", [n for n in all_problems() if built(n).n <= 4])
def test_offsets_are_elementwise_minimal(name):
    s = analyze(built(name))
    c, d = brute_force_minimal_offsets(s.sigma, s.value)
    assert np.array_equal(c, s.c) and np.array_equal(d, s.d)


def _scaled(dae, factors):
    def res(t, z, p):
        return [f * r for f, r in zip(factors, dae.residual(t, z, p))]

    return DaeSystem(dae.n, res, dae.names, dae.params)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([n for n in all_problems() if n != "planets"]), st.data())
def test_signature_invariant_under_rescaling(name, data):
    dae = built(name)
    factors = data.draw(st.lists(st.one_of(st.floats(-1e3, -1e-3), st.floats(1e-3, 1e3)),
                                 min_size=dae.n, max_size=dae.n))
    assert np.array_equal(signature_matrix(_scaled(dae, factors)), signature_matrix(dae))


def _point_from_items(s, items):
    point = []
    pos = 0
    for j in range(s.n):
        dj = int(s.d[j])
        v = np.array(items[pos:pos + dj + 1], dtype=float)
        point.append(v / np.array([math.factorial(l) for l in range(dj + 1)]))
        pos += dj + 1
    return point


@pytest.mark.parametrize("name", all_problems())
def test_zero_pattern(name, rng):
    dae = built(name)
    s = analyze(dae)
    pd = get_problem(name)
    items = consistent_initialize(dae, s, pd.initial(pd.params()))
    items = items * (1 + 1e-3 * rng.normal(size=items.size))
    J = system_jacobian(dae, s.c, s.d, _point_from_items(s, items), t=0.4)
    gap = s.d[None, :] - s.c[:, None]
    off = ~np.isfinite(s.sigma) | (gap != s.sigma)
    assert np.all(J[off] == 0.0)


def test_jacobian_pendulum_dae():
    dae = built("pendulum_dae")
    s = analyze(dae)
    x, y = 6.0, 8.0
    point = [np.array([x, 0.3, 0.0]), np.array([y, -0.2, 0.0]), np.array([0.4])]
    J = system_jacobian(dae, s.c, s.d, point)
    assert np.allclose(J, [[1, 0, x], [0, 1, y], [2 * x, 2 * y, 0]], rtol=1e-14)
    r = sa_friendly_check(dae, s, point)
    assert r.friendly
    assert np.linalg.det(J) == pytest.approx(-2 * (x * x + y * y))


def test_jacobian_lagrangian_pendulum_scales_by_mass():
    dae = built("pendulum", m=3.0)
    s = analyze(dae)
    x, y = 6.0, 8.0
    point = [np.array([x, 1.0, 0.0]), np.array([y, -0.75, 0.0]), np.array([0.4])]
    J = system_jacobian(dae, s.c, s.d, point)
    assert np.allclose(J, [[3, 0, 2 * x], [0, 3, 2 * y], [2 * x, 2 * y, 0]])


def test_pendulum_singular_at_origin():
    dae = built("pendulum_dae")
    s = analyze(dae)
    point = [np.zeros(3), np.zeros(3), np.zeros(1)]
    assert not sa_friendly_check(dae, s, point).friendly


def test_jacobian_toy_no_dof():
    dae = build_toy_daes()["toy_no_dof"]
    s = analyze(dae)
    J = system_jacobian(dae, s.c, s.d, [np.array([1.0]), np.array([0.0, 1.0])], t=0.0)
    assert np.array_equal(J, [[0.0, 1.0], [1.0, -1.0]])


def test_jacobian_diagonal_ode_is_identity():
    dae = DaeSystem(3, lambda t, z, p: [fn.diff(z[0], 1) - fn.sin(z[1]), fn.diff(z[1], 1) - z[0] * z[2],
                                        fn.diff(z[2], 1) + fn.exp(z[0])], ["a", "b", "c"])
    s = analyze(dae)
    J = system_jacobian(dae, s.c, s.d, [np.array([0.3, 0.1]), np.array([1.0, 2.0]), np.array([-1.0, 0.5])])
    assert np.array_equal(J, np.eye(3))


def test_jacobian_controlled_pendulum():
    dae = built("controlled_pendulum_dae")
    s = analyze(dae)
    x, y = 1.0, math.sqrt(99.0)
    point = [np.array([x, 0.2, 0.0]), np.array([y, 0.0, 0.0]), np.array([0.1]), np.array([0.0])]
    J = system_jacobian(dae, s.c, s.d, point, t=0.0)
    assert np.allclose(J, [[1, 0, x, -1], [0, 1, y, 0], [2 * x, 2 * y, 0, 0], [1, 0, 0, 0]])
    assert sa_friendly_check(dae, s, point).friendly
