"""Reference oracles: known geometry, projections, cross-checks."""

import numpy as np
import pytest

from sibsolve import Aabb, Ball, Polytope
from sibsolve.reference import (
    _capped_simplex_project,
    project_onto_body,
    ref_lmo,
    ref_sib,
    ref_sib_grid,
    ref_soft_sib,
)
from conftest import BODY_KINDS, make_body, shell_instance


def test_ref_sib_two_singletons():
    res = ref_sib([Polytope([[0.0, 0.0]]), Polytope([[2.0, 0.0]])], tol=1e-6)
    assert res.value == pytest.approx(1.0, abs=1e-6)
    assert res.residual <= 1e-5


def test_ref_sib_disjoint_balls_gap_formula():
    # (||c1 - c2|| - r1 - r2) / 2 for collinear disjoint balls
    res = ref_sib([Ball([0.0, 0.0], 0.5), Ball([4.0, 0.0], 0.5)], tol=1e-6)
    assert res.value == pytest.approx(1.5, abs=1e-5)


def test_ref_sib_three_boxes_vs_grid():
    bodies = [
        Aabb([-2.0, -0.5], [-1.0, 0.5]),
        Aabb([1.0, -0.5], [2.0, 0.5]),
        Aabb([-0.5, 1.5], [0.5, 2.5]),
    ]
    res = ref_sib(bodies, tol=1e-6)
    grid = ref_sib_grid(bodies, lo=[-1.0, -0.5], hi=[1.0, 1.5], resolution=0.01)
    assert res.value <= grid.value + 1e-9
    assert abs(res.value - grid.value) <= 0.02


def test_ref_soft_large_c_matches_hard():
    bodies = [Ball([0.0, 0.0], 0.5), Ball([4.0, 0.0], 0.5), Ball([0.0, 3.0], 0.2)]
    hard = ref_sib(bodies, tol=1e-6)
    soft = ref_soft_sib(bodies, C=10.0, tol=1e-6)
    assert soft.value == pytest.approx(hard.value, abs=2e-6)


def test_ref_soft_small_c_is_weighted_median_sum():
    pts = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]
    bodies = [Polytope([p]) for p in pts]
    c_small = 1.0 / 8.0
    res = ref_soft_sib(bodies, C=c_small, tol=1e-7)
    # geometric median of a square is its center: sum of distances 4*sqrt(2)
    assert res.value == pytest.approx(c_small * 4 * np.sqrt(2.0), rel=1e-4)
    assert res.argmin[1] == 0.0  # r = 0 in this regime


def test_ref_soft_single_far_outlier():
    bodies = [Polytope([[0.0, 0.0]]), Polytope([[2.0, 0.0]]), Polytope([[10.0, 0.0]])]
    res = ref_soft_sib(bodies, C=0.6, tol=1e-6)
    assert res.value == pytest.approx(5.0, abs=1e-5)


# -- projections


def test_capped_simplex_projection_properties(rng):
    for _ in range(200):
        m = int(rng.integers(2, 8))
        cap = float(rng.uniform(1.0 / m, 1.0))
        v = rng.normal(size=(1, m)) * 2.0
        q = _capped_simplex_project(v, np.array([cap]))[0]
        assert np.all(q >= -1e-12) and np.all(q <= cap + 1e-12)
        assert float(q.sum()) == pytest.approx(1.0, abs=1e-9)
        # projection optimality: no feasible direction improves ||q - v||
        for _ in range(20):
            w = rng.normal(size=m)
            w -= w.mean()  # stay on the sum-1 plane
            step = q + 1e-4 * w
            if np.all(step >= 0) and np.all(step <= cap):
                assert np.linalg.norm(step - v[0]) >= np.linalg.norm(q - v[0]) - 1e-9


def test_ellipsoid_projection_kkt(rng):
    for _ in range(50):
        body = make_body("ellipsoid", rng, rng.normal(size=3), extent=1.0)
        p = rng.normal(size=3) * 4.0
        proj, _ = project_onto_body(body, p)
        quad = float((proj - body.center) @ body.sigma @ (proj - body.center))
        assert quad <= 1.0 + 1e-9
        if quad > 1.0 - 1e-9:  # boundary: residual aligns with the normal
            normal = body.sigma @ (proj - body.center)
            resid = p - proj
            cos = resid @ normal / (np.linalg.norm(resid) * np.linalg.norm(normal) + 1e-300)
            assert cos == pytest.approx(1.0, abs=1e-6)


def test_hull_projection_matches_ball_geometry(rng):
    # projecting onto a segment: closed form available
    body = Polytope([[0.0, 0.0], [2.0, 0.0]])
    p = np.array([0.5, 1.0])
    proj, q = project_onto_body(body, p)
    np.testing.assert_allclose(proj, [0.5, 0.0], atol=1e-8)
    assert q.sum() == pytest.approx(1.0, abs=1e-10)


def test_projection_idempotent_on_members(rng):
    for kind in ("ball", "aabb", "ellipsoid"):
        body = make_body(kind, rng, rng.normal(size=3), extent=1.0)
        inside = body.center if kind != "aabb" else 0.5 * (body.lo + body.hi)
        proj, _ = project_onto_body(body, inside)
        np.testing.assert_allclose(proj, inside, atol=1e-12)


# -- translation behavior


def test_ref_sib_translation_equivariance(rng):
    bodies = shell_instance("ball", rng, 4, 2)
    shift = np.array([5.0, -3.0])
    moved = [Ball(b.center + shift, b.radius) for b in bodies]
    a = ref_sib(bodies, tol=1e-7)
    b = ref_sib(moved, tol=1e-7)
    assert a.value == pytest.approx(b.value, rel=1e-5)


def test_ref_lmo_value_is_lower_bound(rng):
    # brute force is exact for hulls and boxes; sampled-and-refined for
    # smooth bodies.  Either way the point must be feasible and the value
    # consistent with it.
    from sibsolve import contains

    for kind in BODY_KINDS:
        for _ in range(10):
            body = make_body(kind, rng, rng.normal(size=3), m=5, extent=1.0)
            h = rng.normal(size=3)
            res = ref_lmo(body, h)
            assert res.value == pytest.approx(float(h @ res.argmin), rel=1e-10, abs=1e-10)
            if kind in ("ball", "aabb", "ellipsoid"):
                assert contains(body, res.argmin, 1e-7)
