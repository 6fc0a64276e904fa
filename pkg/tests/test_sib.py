"""Hard-margin driver: known optima, certificates, robustness."""

import math

import numpy as np
import pytest

from sibsolve import (
    Ball,
    DegenerateInstance,
    IterationCapExhausted,
    Polytope,
    ProductElement,
    ReducedPolytope,
    SibInstance,
    contains,
    crude_radius_bound,
    sib_oracle,
    solve_sib,
)
from sibsolve.eja import SQRT2
from sibsolve.reference import ref_sib
from conftest import BODY_KINDS, shell_instance


def _check_solution(bodies, sol, eps):
    dists = np.linalg.norm(sol.witnesses - sol.center, axis=1)
    assert sol.radius == float(dists.max())  # recomputed exactly
    assert np.all(dists <= sol.radius + 1e-9 * max(1.0, sol.radius))
    assert sol.nu_y > 0.0
    assert (sol.nu_x - sol.nu_y) / sol.nu_y <= eps + 1e-12
    assert sol.nu_y <= sol.nu_x + 1e-12  # weak duality
    for i, body in enumerate(bodies):
        coeffs = None
        if sol.witness_coefficients is not None:
            coeffs = sol.witness_coefficients[i]
        if isinstance(body, (Polytope, ReducedPolytope)):
            assert contains(body, sol.witnesses[i], 1e-9, coefficients=coeffs)
        else:
            assert contains(body, sol.witnesses[i], 1e-9)


# -- oracle


def test_oracle_two_singletons_uniform_start():
    bodies = [Polytope([[0.0, 0.0]]), Polytope([[2.0, 0.0]])]
    y = ProductElement(np.zeros((2, 2)), np.full(2, 1.0 / (SQRT2 * 2)))
    resp = sib_oracle(bodies, y)
    z, v = resp.x[0], resp.x[1]
    np.testing.assert_allclose(z, [0.0, 0.0])  # h = 0 tie resolves to body 0
    np.testing.assert_allclose(v, [[0.0, 0.0], [2.0, 0.0]])
    np.testing.assert_allclose(resp.payoff.bars, [[0.0, 0.0], [2.0, 0.0]])
    np.testing.assert_allclose(resp.payoff.heads, [0.0, 0.0])
    assert resp.oracle_value == 0.0


def test_oracle_two_balls_opposed_directions():
    bodies = [Ball([0.0, 0.0], 0.5), Ball([4.0, 0.0], 0.5)]
    s = 0.3
    y = ProductElement(np.array([[s, 0.0], [-s, 0.0]]), np.full(2, 1.0 / (SQRT2 * 2)))
    resp = sib_oracle(bodies, y)
    v = resp.x[1]
    np.testing.assert_allclose(v[0], [-0.5, 0.0])
    np.testing.assert_allclose(v[1], [4.5, 0.0])
    # h = 0 again: z falls back to the first body's zero-functional point
    np.testing.assert_allclose(resp.x[0], [0.0, 0.0], atol=1e-15)


def test_instance_validation():
    with pytest.raises(ValueError):
        SibInstance([Ball([0.0], 1.0)], 0.1)  # n < 2
    with pytest.raises(ValueError):
        SibInstance([Ball([0.0], 1.0), Ball([0.0, 0.0], 1.0)], 0.1)
    with pytest.raises(ValueError):
        SibInstance([Ball([0.0], 1.0), Ball([1.0], 1.0)], 0.0)


# -- known optima


def test_two_singletons():
    bodies = [Polytope([[0.0, 0.0]]), Polytope([[2.0, 0.0]])]
    sol = solve_sib(SibInstance(bodies, 0.05))
    assert 1.0 - 1e-9 <= sol.radius <= 1.05
    assert np.linalg.norm(sol.center - [1.0, 0.0]) <= 0.06
    _check_solution(bodies, sol, 0.05)


def test_parallel_unit_segments():
    bodies = [Polytope([[0.0, 0.0], [1.0, 0.0]]), Polytope([[0.0, 1.0], [1.0, 1.0]])]
    sol = solve_sib(SibInstance(bodies, 0.05))
    assert 0.5 - 1e-9 <= sol.radius <= 0.5 * 1.05
    _check_solution(bodies, sol, 0.05)


def test_collinear_disjoint_balls():
    bodies = [Ball([0.0, 0.0], 0.5), Ball([4.0, 0.0], 0.5)]
    sol = solve_sib(SibInstance(bodies, 0.05))
    assert 1.5 - 1e-9 <= sol.radius <= 1.5 * 1.05
    _check_solution(bodies, sol, 0.05)


# -- certificates and properties on random instances


@pytest.mark.parametrize("kind", BODY_KINDS)
def test_random_instances_certified(kind, rng):
    for trial in range(4):
        n = int(rng.integers(2, 7))
        d = int(rng.integers(2, 4))
        bodies = shell_instance(kind, rng, n, d, m=int(rng.integers(1, 6)))
        sol = solve_sib(SibInstance(bodies, 0.05))
        _check_solution(bodies, sol, 0.05)
        ref = ref_sib(bodies, tol=1e-6)
        assert sol.radius <= 1.05 * ref.value + 1e-6


def test_halving_count_bounded(rng):
    for _ in range(3):
        bodies = shell_instance("ball", rng, 4, 2)
        sol = solve_sib(SibInstance(bodies, 0.05))
        e, _ = crude_radius_bound(bodies)
        ref = ref_sib(bodies, tol=1e-6)
        bound = math.ceil(math.log2(6.0 * e / (2.0 * ref.value))) + 1
        assert sol.radius_halvings <= bound


def test_translation_equivariance(rng):
    bodies = shell_instance("ball", rng, 4, 3)
    shift = np.array([10.0, -7.0, 3.0])
    moved = [Ball(b.center + shift, b.radius) for b in bodies]
    a = solve_sib(SibInstance(bodies, 0.05))
    b = solve_sib(SibInstance(moved, 0.05))
    np.testing.assert_allclose(a.center + shift, b.center, atol=1e-6)
    assert b.radius == pytest.approx(a.radius, rel=1e-9)


def test_determinism(rng):
    bodies = shell_instance("polytope", rng, 3, 2, m=4)
    a = solve_sib(SibInstance(bodies, 0.05))
    b = solve_sib(SibInstance(bodies, 0.05))
    assert a.radius == b.radius
    assert np.array_equal(a.center, b.center)
    assert np.array_equal(a.witnesses, b.witnesses)
    assert a.total_iterations == b.total_iterations


def test_degenerate_identical_bodies():
    bodies = [Ball([1.0, 2.0], 0.5), Ball([1.0, 2.0], 0.5)]
    with pytest.raises(DegenerateInstance):
        solve_sib(SibInstance(bodies, 0.05))


def test_iteration_cap_gives_partial_feasible_solution():
    bodies = [Polytope([[0.0, 0.0]]), Polytope([[2.0, 0.0]])]
    with pytest.raises(IterationCapExhausted) as err:
        solve_sib(SibInstance(bodies, 0.001), max_iterations=200)
    partial = err.value.partial
    assert partial is not None
    dists = np.linalg.norm(partial.witnesses - partial.center, axis=1)
    assert partial.radius == float(dists.max())


def test_width_doubling_on_hidden_diameter(rng):
    # first vertices mutually close, hulls wide: E underestimates the
    # diameter by ~3.6x, so the initial width 2E may breach and double
    g = 1.0
    bodies = [
        Polytope([[0.0, 0.0], [1.75, 0.0]]),
        Polytope([[0.0, g], [-1.75, g]]),
    ]
    e, _ = crude_radius_bound(bodies)
    assert e == pytest.approx(g)
    sol = solve_sib(SibInstance(bodies, 0.05))
    assert sol.width_doublings <= 3
    assert 0.5 - 1e-9 <= sol.radius <= 0.5 * 1.05 + 1e-9
    _check_solution(bodies, sol, 0.05)


def test_epsilon_one_still_feasible(rng):
    # no optimality promise beyond feasibility for eps >= 1
    bodies = shell_instance("aabb", rng, 3, 2)
    sol = solve_sib(SibInstance(bodies, 1.5))
    dists = np.linalg.norm(sol.witnesses - sol.center, axis=1)
    assert np.all(dists <= sol.radius + 1e-9)
