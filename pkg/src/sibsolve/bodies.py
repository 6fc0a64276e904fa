"""Convex body classes and their exact linear-minimization oracles.

Five body classes are supported: convex polytopes given by their vertex
sets, reduced polytopes (vertex hulls with a per-coefficient cap), axis
aligned boxes, Euclidean balls and ellipsoids.  Each class answers
``argmin h.u over the body`` in closed form:

    polytope    enumerate vertices
    reduced     cap nu on the k-1 smallest vertex scores, remainder on
                the k-th, k = ceil(1/nu)
    box         lower bound where the coefficient is positive, upper
                bound otherwise
    ball        center - radius * h/||h||
    ellipsoid   center - Sinv h / sqrt(h' Sinv h)

Support maximization over a family of bodies reduces to the per-body
LMOs with the sign flipped; ties are always broken toward the lowest
index so repeated runs are byte-identical.

Bodies are immutable after construction (the ellipsoid inverse is
computed once, via Cholesky) and the oracles are pure functions, so they
may be evaluated concurrently.  ``BodyPack`` carries the same oracles in
a vectorized layout for the solver's inner loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np


# ---------------------------------------------------------------------------
# body classes


@dataclass
class Polytope:
    """Convex hull of a finite point set; ``points`` is (m, d)."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if self.points.size == 0 or self.points.ndim != 2:
            raise ValueError("polytope needs an (m, d) array with m >= 1")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("polytope points must be finite")

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def m(self):
        return self.points.shape[0]


@dataclass
class ReducedPolytope:
    """Convex combinations of ``points`` with every coefficient <= nu.

    Nonempty exactly when nu >= 1/m; nu = 1 recovers the plain hull.
    """

    points: np.ndarray
    nu: float

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if self.points.size == 0 or self.points.ndim != 2:
            raise ValueError("reduced polytope needs an (m, d) array with m >= 1")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("reduced polytope points must be finite")
        self.nu = float(self.nu)
        m = self.points.shape[0]
        if not (1.0 / m <= self.nu <= 1.0):
            raise ValueError(
                f"nu must satisfy 1/m <= nu <= 1 (got nu={self.nu:.6g} with m={m})"
            )

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def m(self):
        return self.points.shape[0]

    @property
    def k(self) -> int:
        """Number of active coefficients in any extreme point."""
        return math.ceil(1.0 / self.nu)


@dataclass
class Aabb:
    """Axis-aligned box lo <= v <= hi."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.ndim != 1 or self.lo.shape != self.hi.shape:
            raise ValueError("lo and hi must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise ValueError("box bounds must be finite")
        if np.any(self.lo > self.hi):
            raise ValueError("box requires lo <= hi component-wise")

    @property
    def d(self):
        return self.lo.shape[0]


@dataclass
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        if self.center.ndim != 1:
            raise ValueError("center must be a 1-d vector")
        self.radius = float(self.radius)
        if not (np.all(np.isfinite(self.center)) and math.isfinite(self.radius)):
            raise ValueError("ball parameters must be finite")
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    @property
    def d(self):
        return self.center.shape[0]


@dataclass
class Ellipsoid:
    """Points v with (v - center)' sigma (v - center) <= 1.

    ``sigma`` must be symmetric positive-definite; its inverse is
    computed once here (via Cholesky) and cached, so a non-PD matrix is a
    construction error rather than a solve-time one.
    """

    center: np.ndarray
    sigma: np.ndarray
    sigma_inv: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        d = self.center.shape[0]
        if self.center.ndim != 1 or self.sigma.shape != (d, d):
            raise ValueError("sigma must be a (d, d) matrix matching the center")
        if not (np.all(np.isfinite(self.center)) and np.all(np.isfinite(self.sigma))):
            raise ValueError("ellipsoid parameters must be finite")
        if not np.allclose(self.sigma, self.sigma.T, rtol=1e-8, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        sym = 0.5 * (self.sigma + self.sigma.T)
        try:
            chol = np.linalg.cholesky(sym)
        except np.linalg.LinAlgError as exc:
            raise ValueError("sigma must be positive-definite") from exc
        if self.sigma_inv is None:
            li = np.linalg.solve(chol, np.eye(d))
            self.sigma_inv = li.T @ li
        else:
            self.sigma_inv = np.asarray(self.sigma_inv, dtype=np.float64)
        if not np.allclose(sym @ self.sigma_inv, np.eye(d), atol=1e-8):
            raise ValueError("sigma is too ill-conditioned to invert reliably")

    @property
    def d(self):
        return self.center.shape[0]


ConvexBody = Union[Polytope, ReducedPolytope, Aabb, Ball, Ellipsoid]


def body_dim(body: ConvexBody) -> int:
    return body.d


# ---------------------------------------------------------------------------
# linear minimization


@dataclass
class LmoResult:
    """Minimizer of h.u over one body.

    Hull-type bodies also report how the point was generated (a vertex
    index or a reduced-simplex coefficient vector) so feasibility can be
    checked later without a hull-membership LP.
    """

    point: np.ndarray
    value: float
    vertex_index: Optional[int] = None
    coefficients: Optional[np.ndarray] = None


def _k_smallest_stable(vals: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries, ordered by (value, index).

    Linear-time selection with the tie band at the k-th value resolved
    toward the lowest indices.
    """
    m = vals.shape[0]
    if k >= m:
        return np.argsort(vals, kind="stable")
    kth = np.partition(vals, k - 1)[k - 1]
    less = np.flatnonzero(vals < kth)
    eq = np.flatnonzero(vals == kth)
    less = less[np.argsort(vals[less], kind="stable")]
    return np.concatenate([less, eq[: k - less.size]])


def _reduced_coefficients(scores: np.ndarray, nu: float, k: int) -> np.ndarray:
    """Minimizing capped-simplex coefficients for the given vertex scores."""
    sel = _k_smallest_stable(scores, k)
    q = np.zeros(scores.shape[0])
    q[sel[:-1]] = nu
    q[sel[-1]] = 1.0 - nu * (k - 1)
    return q


def lmo(body: ConvexBody, h: np.ndarray) -> LmoResult:
    """Exact minimizer of the linear functional h over the body.

    For balls and ellipsoids the zero functional returns the center (any
    feasible point minimizes it); every tie elsewhere resolves to the
    lowest index.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (body.d,):
        raise ValueError(f"h must have length {body.d}")

    if isinstance(body, Polytope):
        scores = body.points @ h
        j = int(np.argmin(scores))
        point = body.points[j].copy()
        return LmoResult(point, float(scores[j]), vertex_index=j)

    if isinstance(body, ReducedPolytope):
        scores = body.points @ h
        q = _reduced_coefficients(scores, body.nu, body.k)
        point = q @ body.points
        return LmoResult(point, float(scores @ q), coefficients=q)

    if isinstance(body, Aabb):
        point = np.where(h > 0, body.lo, body.hi)
        return LmoResult(point, float(h @ point))

    if isinstance(body, Ball):
        nrm = float(np.linalg.norm(h))
        if nrm == 0.0:
            return LmoResult(body.center.copy(), 0.0)
        point = body.center - body.radius / nrm * h
        return LmoResult(point, float(h @ point))

    if isinstance(body, Ellipsoid):
        w = body.sigma_inv @ h
        quad = float(h @ w)
        if quad <= 0.0:
            return LmoResult(body.center.copy(), float(h @ body.center))
        point = body.center - w / math.sqrt(quad)
        return LmoResult(point, float(h @ point))

    raise TypeError(f"unsupported body type {type(body).__name__}")


def support_max(bodies: List[ConvexBody], h: np.ndarray):
    """Maximizer of h.z over the hull of a body family.

    The hull maximum is attained inside one of the bodies, so this is the
    best of the per-body maximizers (each via ``lmo`` with the sign
    flipped).  Returns ``(index, point, value)``; ties go to the lowest
    body index.
    """
    if not bodies:
        raise ValueError("need at least one body")
    h = np.asarray(h, dtype=np.float64)
    best_i, best_point, best_val = 0, None, -math.inf
    for i, body in enumerate(bodies):
        res = lmo(body, -h)
        val = float(h @ res.point)
        if val > best_val:
            best_i, best_point, best_val = i, res.point, val
    return best_i, best_point, best_val


def contains(body: ConvexBody, p: np.ndarray, tol: float, coefficients=None) -> bool:
    """Membership check within ``tol``.

    Box, ball and ellipsoid test their defining inequality directly.
    Hull-type bodies are only checked against an explicit convex
    combination (the solver's witness certificates carry one); solving a
    hull-membership LP for arbitrary points is out of scope.
    """
    p = np.asarray(p, dtype=np.float64)
    if isinstance(body, Aabb):
        return bool(np.all(p >= body.lo - tol) and np.all(p <= body.hi + tol))
    if isinstance(body, Ball):
        return float(np.linalg.norm(p - body.center)) <= body.radius + tol
    if isinstance(body, Ellipsoid):
        delta = p - body.center
        return float(delta @ body.sigma @ delta) <= 1.0 + tol
    if isinstance(body, (Polytope, ReducedPolytope)):
        if coefficients is None:
            raise ValueError(
                "hull membership requires the generating coefficients; "
                "arbitrary-point hull tests are not supported"
            )
        q = np.asarray(coefficients, dtype=np.float64)
        if q.shape != (body.m,):
            raise ValueError(f"coefficients must have length {body.m}")
        cap = body.nu if isinstance(body, ReducedPolytope) else 1.0
        slack = tol + 1e-12
        if np.any(q < -slack) or np.any(q > cap + slack):
            return False
        if abs(float(q.sum()) - 1.0) > slack:
            return False
        recon = q @ body.points
        return float(np.linalg.norm(recon - p)) <= tol + 1e-12 * max(1.0, float(np.linalg.norm(p)))
    raise TypeError(f"unsupported body type {type(body).__name__}")


def representative(body: ConvexBody) -> np.ndarray:
    """A deterministic feasible point of the body.

    First vertex for polytopes, uniform vertex average for reduced
    polytopes (their vertices themselves may be infeasible), box center
    for boxes, center for balls and ellipsoids.
    """
    if isinstance(body, Polytope):
        return body.points[0].copy()
    if isinstance(body, ReducedPolytope):
        return body.points.mean(axis=0)
    if isinstance(body, Aabb):
        return 0.5 * (body.lo + body.hi)
    if isinstance(body, (Ball, Ellipsoid)):
        return body.center.copy()
    raise TypeError(f"unsupported body type {type(body).__name__}")


def crude_radius_bound(bodies: List[ConvexBody]):
    """Cheap upper bound E on the optimal radius, with its anchor point.

    E is the largest distance from the first body's representative to the
    representatives of the others; the ball B(anchor, E) meets every
    body, and E never exceeds the hull diameter.  E = 0 means all
    representatives coincide, i.e. the instance is degenerate.
    """
    if len(bodies) < 2:
        raise ValueError("need at least two bodies")
    reps = np.stack([representative(b) for b in bodies])
    anchor = reps[0]
    e = float(np.linalg.norm(reps[1:] - anchor, axis=1).max())
    return e, anchor.copy()


# ---------------------------------------------------------------------------
# vectorized layout for the solver's inner loop


class _Group:
    def __init__(self, kind, idx):
        self.kind = kind
        self.idx = np.asarray(idx, dtype=np.intp)


class BodyPack:
    """Bodies regrouped by class with stacked parameter arrays.

    The per-iteration oracle needs one LMO per body (each against its own
    direction) plus one support maximization against a shared direction;
    both run here as a handful of array operations per class instead of a
    Python loop over bodies.  Results are scattered back in index order,
    so the outputs are identical to calling ``lmo``/``support_max`` body
    by body.
    """

    def __init__(self, bodies: List[ConvexBody]):
        if not bodies:
            raise ValueError("need at least one body")
        d = bodies[0].d
        if any(b.d != d for b in bodies):
            raise ValueError("body dimensions must be homogeneous")
        self.bodies = list(bodies)
        self.n = len(bodies)
        self.d = d
        hull_sizes = [b.m for b in bodies if isinstance(b, (Polytope, ReducedPolytope))]
        self.m_max = max(hull_sizes) if hull_sizes else 0
        self.has_coeffs = self.m_max > 0
        self.groups = []
        by_kind = {}
        for i, b in enumerate(bodies):
            by_kind.setdefault(type(b), []).append(i)
        for cls, idx in by_kind.items():
            g = _Group(cls.__name__.lower(), idx)
            sub = [bodies[i] for i in idx]
            if cls is Ball:
                g.centers = np.stack([b.center for b in sub])
                g.radii = np.array([b.radius for b in sub])
            elif cls is Aabb:
                g.lo = np.stack([b.lo for b in sub])
                g.hi = np.stack([b.hi for b in sub])
            elif cls is Ellipsoid:
                g.centers = np.stack([b.center for b in sub])
                g.sigma_inv = np.stack([b.sigma_inv for b in sub])
            elif cls in (Polytope, ReducedPolytope):
                mg = max(b.m for b in sub)
                pts = np.zeros((len(sub), mg, d))
                mask = np.zeros((len(sub), mg), dtype=bool)
                for r, b in enumerate(sub):
                    pts[r, : b.m] = b.points
                    mask[r, : b.m] = True
                g.points = pts
                g.mask = mask
                g.m = mg
                if cls is ReducedPolytope:
                    g.nu = np.array([b.nu for b in sub])
                    g.k = np.array([b.k for b in sub], dtype=np.intp)
            else:
                raise TypeError(f"unsupported body type {cls.__name__}")
            self.groups.append(g)

    # -- per-body linear minimization, each body against its own direction

    def lmo_all(self, directions: np.ndarray):
        """Minimizers for every body; directions is (n, d).

        Returns ``(points, coeffs)`` where points is (n, d) and coeffs is
        (n, m_max) hull coefficients (zero rows for non-hull bodies), or
        None when no hull bodies are present.
        """
        v = np.empty((self.n, self.d))
        q = np.zeros((self.n, self.m_max)) if self.has_coeffs else None
        for g in self.groups:
            y = directions[g.idx]
            if g.kind == "ball":
                nrm = np.sqrt(np.einsum("ij,ij->i", y, y))
                # zero rows of y give a zero step regardless of the guard
                v[g.idx] = g.centers - y * (g.radii / np.maximum(nrm, 1e-300))[:, None]
            elif g.kind == "aabb":
                v[g.idx] = np.where(y > 0, g.lo, g.hi)
            elif g.kind == "ellipsoid":
                w = np.einsum("gde,ge->gd", g.sigma_inv, y)
                quad = np.einsum("ge,ge->g", y, w)
                den = np.sqrt(np.maximum(quad, 0.0))
                v[g.idx] = g.centers - w * (1.0 / np.maximum(den, 1e-300))[:, None]
            elif g.kind == "polytope":
                dots = np.einsum("gmd,gd->gm", g.points, y)
                dots[~g.mask] = np.inf
                j = np.argmin(dots, axis=1)
                v[g.idx] = g.points[np.arange(len(g.idx)), j]
                if q is not None:
                    q[g.idx, j] = 1.0
            else:  # reduced polytope
                dots = np.einsum("gmd,gd->gm", g.points, y)
                dots[~g.mask] = np.inf
                w = self._reduced_weights(g, dots)
                v[g.idx] = np.einsum("gm,gmd->gd", w, g.points)
                if q is not None:
                    q[g.idx, : g.m] = w
        return v, q

    @staticmethod
    def _reduced_weights(g, dots):
        """Capped-simplex minimizing weights, one row per body."""
        order = np.argsort(dots, axis=1, kind="stable")
        rank = np.arange(g.m)[None, :]
        resid = 1.0 - g.nu * (g.k - 1)
        by_rank = np.where(
            rank < (g.k - 1)[:, None],
            g.nu[:, None],
            np.where(rank == (g.k - 1)[:, None], resid[:, None], 0.0),
        )
        w = np.zeros_like(dots)
        np.put_along_axis(w, order, by_rank, axis=1)
        return w

    # -- support maximization, all bodies against one shared direction

    def support_values(self, h: np.ndarray):
        """Per-body maxima of h.z, with the attaining points.

        Mirrors ``lmo(body, -h)`` exactly, including zero-direction and
        tie behavior.
        """
        vals = np.empty(self.n)
        pts = np.empty((self.n, self.d))
        for g in self.groups:
            if g.kind == "ball":
                nrm = math.sqrt(float(h @ h))
                if nrm == 0.0:
                    pts[g.idx] = g.centers
                    vals[g.idx] = 0.0
                else:
                    pts[g.idx] = g.centers + (g.radii / nrm)[:, None] * h
                    vals[g.idx] = g.centers @ h + g.radii * nrm
            elif g.kind == "aabb":
                p = np.where(h < 0, g.lo, g.hi)
                pts[g.idx] = p
                vals[g.idx] = p @ h
            elif g.kind == "ellipsoid":
                w = np.einsum("gde,e->gd", g.sigma_inv, h)
                quad = np.einsum("gd,d->g", w, h)
                den = np.sqrt(np.maximum(quad, 0.0))
                p = g.centers + w * (1.0 / np.maximum(den, 1e-300))[:, None]
                pts[g.idx] = p
                vals[g.idx] = p @ h
            else:
                dots = np.einsum("gmd,d->gm", g.points, h)
                if g.kind == "polytope":
                    dots[~g.mask] = -np.inf
                    j = np.argmax(dots, axis=1)
                    p = g.points[np.arange(len(g.idx)), j]
                    pts[g.idx] = p
                    vals[g.idx] = dots[np.arange(len(g.idx)), j]
                else:
                    neg = -dots
                    neg[~g.mask] = np.inf
                    w = self._reduced_weights(g, neg)
                    p = np.einsum("gm,gmd->gd", w, g.points)
                    pts[g.idx] = p
                    vals[g.idx] = p @ h
        return vals, pts

    def support_point(self, h: np.ndarray):
        """Hull maximizer of h.z: (point, body index, value)."""
        vals, pts = self.support_values(h)
        i = int(np.argmax(vals))
        return pts[i].copy(), i, float(vals[i])
