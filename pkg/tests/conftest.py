"""Shared instance generators for the test suite."""

import numpy as np
import pytest

from sibsolve import Aabb, Ball, Ellipsoid, Polytope, ReducedPolytope

BODY_KINDS = ("polytope", "reduced_polytope", "aabb", "ball", "ellipsoid")


def random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def make_body(kind, rng, center, m=4, extent=0.3):
    d = center.shape[0]
    if kind == "ball":
        return Ball(center, float(rng.uniform(0.2, 1.0) * extent))
    if kind == "aabb":
        half = rng.uniform(0.2, 1.0, size=d) * extent
        return Aabb(center - half, center + half)
    if kind == "polytope":
        return Polytope(center + rng.uniform(-extent, extent, size=(m, d)))
    if kind == "reduced_polytope":
        pts = center + rng.uniform(-extent, extent, size=(m, d))
        return ReducedPolytope(pts, float(rng.uniform(1.0 / m, 1.0)))
    if kind == "ellipsoid":
        q = random_orthogonal(rng, d)
        semi = rng.uniform(0.2, 1.0, size=d) * extent
        sigma = (q / semi**2) @ q.T
        return Ellipsoid(center, 0.5 * (sigma + sigma.T))
    raise ValueError(kind)


def shell_anchors(rng, n, d, spread=2.0, min_gap=1.0):
    """Anchor points on a jittered shell with a minimum pairwise gap, so
    the generated bodies have no common point and the optimal radius is a
    healthy fraction of the crude bound."""
    while True:
        dirs = rng.normal(size=(n, d))
        dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-12)
        anchors = dirs * spread * (1.0 + 0.15 * rng.uniform(-1.0, 1.0, size=(n, 1)))
        diffs = anchors[:, None, :] - anchors[None, :, :]
        dist = np.linalg.norm(diffs, axis=2) + np.eye(n) * 1e9
        if dist.min() >= min_gap:
            return anchors


def shell_instance(kind, rng, n, d, m=4, extent=0.3):
    anchors = shell_anchors(rng, n, d)
    return [make_body(kind, rng, anchors[i], m=m, extent=extent) for i in range(n)]


def random_points_instance(rng, n, d, spread=2.0):
    anchors = shell_anchors(rng, n, d, spread=spread)
    return [Polytope(anchors[i : i + 1]) for i in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
