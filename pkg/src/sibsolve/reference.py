"""Independent desk-scale reference oracles, used only by the test suite.

Nothing here shares computation paths with the production solver:
distances come from Euclidean projections (closed forms for box/ball, a
Newton solve on the Lagrange multiplier for ellipsoids, capped-simplex
FISTA for hull bodies), objectives are minimized by projected
subgradient descent with a shrinking Polyak target, and linear
minimization is answered by extreme-point enumeration or by boundary
sampling plus tangent-space refinement.  Accuracy goals are modest (the
consumers state their own tolerances) and reported honestly through
``residual``.

Desk scale only: n <= 16, d <= 4, m <= 8.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bodies import Aabb, Ball, Ellipsoid, Polytope, ReducedPolytope
from .errors import BudgetExceeded
from .soft import optimal_radius_for_distances


@dataclass
class ReferenceResult:
    value: float
    argmin: object
    iterations: int
    residual: float


# ---------------------------------------------------------------------------
# projections


def _capped_simplex_project(v, cap):
    """Row-wise projection onto {q : 0 <= q <= cap_r, sum q = 1}.

    Exact: the projection is clip(v - theta, 0, cap) and the mass
    function g(theta) = sum clip(v - theta, 0, cap) is piecewise linear
    and nonincreasing, so theta solves by interpolation between the two
    breakpoints that bracket g = 1.  ``v`` is (g, m), ``cap`` is (g,);
    padded entries should be very negative so they project to zero.
    """
    v = np.atleast_2d(v)
    cap = np.atleast_1d(cap)
    capc = cap[:, None]
    brk = np.sort(np.concatenate([v, v - capc], axis=1), axis=1)  # (g, 2m)
    mass = np.clip(v[:, None, :] - brk[:, :, None], 0.0, capc[:, None]).sum(axis=2)
    # mass is nonincreasing; find the first breakpoint with mass <= 1
    k = np.argmax(mass <= 1.0, axis=1)
    k = np.maximum(k, 1)
    rows = np.arange(v.shape[0])
    b_lo, b_hi = brk[rows, k - 1], brk[rows, k]
    g_lo, g_hi = mass[rows, k - 1], mass[rows, k]
    flat = g_lo <= g_hi  # zero-slope segment: any theta on it works
    frac = np.where(flat, 0.0, (g_lo - 1.0) / np.where(flat, 1.0, g_lo - g_hi))
    theta = b_lo + frac * (b_hi - b_lo)
    return np.clip(v - theta[:, None], 0.0, capc)


class _HullGroup:
    """Batched FISTA projector for the hull bodies of one instance."""

    def __init__(self, bodies, idx):
        self.idx = np.asarray(idx, dtype=np.intp)
        d = bodies[idx[0]].d
        g = len(idx)
        self.m = max(bodies[i].m for i in idx)
        self.points = np.zeros((g, self.m, d))
        self.cap = np.ones(g)
        self.scores_pad = np.full((g, self.m), -1e30)
        for r, i in enumerate(idx):
            b = bodies[i]
            self.points[r, : b.m] = b.points
            self.cap[r] = b.nu if isinstance(b, ReducedPolytope) else 1.0
            self.scores_pad[r, : b.m] = 0.0
        gram = np.einsum("gmd,gnd->gmn", self.points, self.points)
        self.lip = np.array([max(np.linalg.norm(gram[r], 2), 1e-12) for r in range(g)])
        self.warm = np.full((g, self.m), 1.0 / self.m)
        self.warm = _capped_simplex_project(self.warm + self.scores_pad, self.cap)

    def project(self, z, steps):
        if self.m == 1:  # singletons project to themselves
            return self.points[:, 0, :].copy()
        q = self.warm
        acc = q.copy()
        t_prev = 1.0
        inv_l = (1.0 / self.lip)[:, None]
        for _ in range(steps):
            pts = np.einsum("gm,gmd->gd", acc, self.points)
            grad = np.einsum("gmd,gd->gm", self.points, pts - z)
            q_new = _capped_simplex_project(acc - grad * inv_l + self.scores_pad, self.cap)
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_prev**2))
            acc = q_new + (t_prev - 1.0) / t_new * (q_new - q)
            q, t_prev = q_new, t_new
        self.warm = q
        return np.einsum("gm,gmd->gd", q, self.points)


def _project_ellipsoid(body: Ellipsoid, p, tol=1e-12, lam0=0.0):
    """Projection onto (v-c)' sigma (v-c) <= 1 via Newton on the multiplier."""
    delta = p - body.center
    if float(delta @ body.sigma @ delta) <= 1.0:
        return p.copy(), 0.0
    evals, evecs = np.linalg.eigh(body.sigma)
    w = evecs.T @ delta
    lam = max(lam0, 0.0)
    den = 1.0 + lam * evals
    if np.any(den <= 0):
        lam = 0.0
        den = 1.0 + lam * evals
    for _ in range(200):
        g = float(np.sum(evals * w**2 / den**2)) - 1.0
        if abs(g) <= tol:
            break
        gp = -2.0 * float(np.sum(evals**2 * w**2 / den**3))
        lam -= g / gp
        if lam < 0.0:
            lam = 0.0
        den = 1.0 + lam * evals
    v = w / den
    return body.center + evecs @ v, lam


def project_onto_body(body, p, q0=None):
    """Euclidean projection; hull bodies also return their coefficients."""
    p = np.asarray(p, dtype=np.float64)
    if isinstance(body, Aabb):
        return np.clip(p, body.lo, body.hi), None
    if isinstance(body, Ball):
        delta = p - body.center
        nrm = float(np.linalg.norm(delta))
        if nrm <= body.radius:
            return p.copy(), None
        return body.center + body.radius / nrm * delta, None
    if isinstance(body, Ellipsoid):
        return _project_ellipsoid(body, p)[0], None
    if isinstance(body, (Polytope, ReducedPolytope)):
        cap = body.nu if isinstance(body, ReducedPolytope) else 1.0
        if body.m == 1:
            return body.points[0].copy(), np.ones(1)
        lip = max(float(np.linalg.norm(body.points @ body.points.T, 2)), 1e-12)
        q = np.full(body.m, 1.0 / body.m) if q0 is None else np.asarray(q0, dtype=np.float64)
        acc = q.copy()
        t_prev = 1.0
        for _ in range(1500):
            grad = body.points @ (acc @ body.points - p)
            q_new = _capped_simplex_project(acc - grad / lip, np.array([cap]))[0]
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_prev**2))
            acc = q_new + (t_prev - 1.0) / t_new * (q_new - q)
            q, t_prev = q_new, t_new
        return q @ body.points, q
    raise TypeError(f"unsupported body type {type(body).__name__}")


class _DistanceEvaluator:
    """Distances to every body, grouped by class, with warm starts."""

    def __init__(self, bodies):
        self.bodies = bodies
        self.n = len(bodies)
        self.d = bodies[0].d
        hull_idx = [i for i, b in enumerate(bodies) if isinstance(b, (Polytope, ReducedPolytope))]
        self.hull = _HullGroup(bodies, hull_idx) if hull_idx else None
        ball_idx = [i for i, b in enumerate(bodies) if isinstance(b, Ball)]
        self.ball_idx = np.asarray(ball_idx, dtype=np.intp)
        if ball_idx:
            self.ball_c = np.stack([bodies[i].center for i in ball_idx])
            self.ball_r = np.array([bodies[i].radius for i in ball_idx])
        box_idx = [i for i, b in enumerate(bodies) if isinstance(b, Aabb)]
        self.box_idx = np.asarray(box_idx, dtype=np.intp)
        if box_idx:
            self.box_lo = np.stack([bodies[i].lo for i in box_idx])
            self.box_hi = np.stack([bodies[i].hi for i in box_idx])
        self.ell_idx = [i for i, b in enumerate(bodies) if isinstance(b, Ellipsoid)]
        self.ell_lam = {i: 0.0 for i in self.ell_idx}

    def __call__(self, z, hull_steps=12):
        projs = np.empty((self.n, self.d))
        if self.hull is not None:
            projs[self.hull.idx] = self.hull.project(z, hull_steps)
        if self.ball_idx.size:
            delta = z - self.ball_c
            nrm = np.sqrt(np.einsum("ij,ij->i", delta, delta))
            scale = np.minimum(1.0, self.ball_r / np.maximum(nrm, 1e-300))
            projs[self.ball_idx] = self.ball_c + scale[:, None] * delta
        if self.box_idx.size:
            projs[self.box_idx] = np.clip(z, self.box_lo, self.box_hi)
        for i in self.ell_idx:
            projs[i], self.ell_lam[i] = _project_ellipsoid(
                self.bodies[i], z, lam0=self.ell_lam[i]
            )
        dists = np.linalg.norm(projs - z, axis=1)
        return dists, projs


# ---------------------------------------------------------------------------
# objective minimization


def _polyak_descent(objective, z0, scale, tol, max_iterations):
    """Subgradient descent with a geometrically shrinking Polyak target.

    ``objective(z) -> (value, subgradient)``; stops once the target gap
    falls below ``tol * max(1, best)``.
    """
    z = np.asarray(z0, dtype=np.float64).copy()
    best_val, _ = objective(z)
    best_z = z.copy()
    delta = 0.1 * scale if scale > 0 else 1.0
    iterations = 0
    while delta > tol * max(1.0, abs(best_val)) * 0.25:
        for _ in range(60):
            iterations += 1
            if iterations > max_iterations:
                raise BudgetExceeded(
                    f"reference descent exceeded {max_iterations} iterations"
                )
            val, grad = objective(z)
            if val < best_val:
                best_val = val
                best_z = z.copy()
            gnorm2 = float(grad @ grad)
            if gnorm2 <= 0.0:
                break
            step = (val - (best_val - delta)) / gnorm2
            z = z - step * grad
        delta *= 0.6
        z = best_z.copy()
    return best_z, best_val, iterations, delta


def _feasible_start(bodies):
    return np.stack([project_onto_body(b, np.zeros(bodies[0].d))[0] for b in bodies])


def ref_sib(bodies, tol=1e-6, max_iterations=100_000) -> ReferenceResult:
    """Minimize max_i dist(z, body_i) by projected subgradient descent."""
    evaluator = _DistanceEvaluator(bodies)
    z0 = _feasible_start(bodies).mean(axis=0)
    d0, _ = evaluator(z0, hull_steps=400)
    scale = float(d0.max())

    def objective(z):
        dists, projs = evaluator(z)
        i = int(np.argmax(dists))
        val = float(dists[i])
        if val <= 0.0:
            return val, np.zeros_like(z)
        grad = (z - projs[i]) / val
        return val, grad

    best_z, _, iterations, delta = _polyak_descent(objective, z0, scale, tol, max_iterations)
    # high-accuracy final evaluation (hull projections fully converged)
    dists, _ = evaluator(best_z, hull_steps=3000)
    return ReferenceResult(
        value=float(dists.max()), argmin=best_z, iterations=iterations, residual=delta
    )


def ref_soft_sib(bodies, C, tol=1e-6, max_iterations=100_000) -> ReferenceResult:
    """Minimize r + C * sum(max(0, dist_i(z) - r)) over z and r >= 0.

    The inner minimization over r is exact (piecewise linear, a weighted
    quantile of the distances); z follows a subgradient of the reduced
    objective.
    """
    evaluator = _DistanceEvaluator(bodies)
    z0 = _feasible_start(bodies).mean(axis=0)
    d0, _ = evaluator(z0, hull_steps=400)
    scale = float(d0.max())

    def objective(z):
        dists, projs = evaluator(z)
        r = optimal_radius_for_distances(dists, C)
        val = r + C * float(np.maximum(0.0, dists - r).sum())
        grad = np.zeros_like(z)
        n_above = 0
        for i in range(len(bodies)):
            if dists[i] > r and dists[i] > 0:
                grad += C * (z - projs[i]) / dists[i]
                n_above += 1
        if r > 0:
            # interior optimum in r: the quantile-tied body carries the
            # residual weight 1 - C * n_above (zero-slope condition in r)
            resid_w = 1.0 - C * n_above
            if resid_w > 1e-15:
                ties = np.flatnonzero(np.abs(dists - r) <= 1e-12 * max(1.0, r))
                if ties.size and dists[ties[0]] > 0:
                    j = int(ties[0])
                    grad += resid_w * (z - projs[j]) / dists[j]
        return val, grad

    best_z, _, iterations, delta = _polyak_descent(objective, z0, scale, tol, max_iterations)
    dists, _ = evaluator(best_z, hull_steps=3000)
    r = optimal_radius_for_distances(dists, C)
    val = r + C * float(np.maximum(0.0, dists - r).sum())
    return ReferenceResult(
        value=val, argmin=(best_z, r), iterations=iterations, residual=delta
    )


def ref_sib_grid(bodies, lo, hi, resolution) -> ReferenceResult:
    """Dense grid cross-check of ref_sib for d <= 3."""
    d = bodies[0].d
    if d > 3:
        raise ValueError("grid search is limited to d <= 3")
    axes = [np.arange(lo[j], hi[j] + resolution, resolution) for j in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    evaluator = _DistanceEvaluator(bodies)
    best_val = math.inf
    best_z = None
    for z in grid:
        dists, _ = evaluator(z, hull_steps=60)
        val = float(dists.max())
        if val < best_val:
            best_val = val
            best_z = z.copy()
    return ReferenceResult(
        value=best_val, argmin=best_z, iterations=grid.shape[0], residual=resolution
    )


# ---------------------------------------------------------------------------
# brute-force linear minimization


def _reduced_extreme_points(m, nu):
    """All vertices of the capped simplex {q in Delta^{m-1}, q <= nu}."""
    out = []
    s_max = int(math.floor(1.0 / nu + 1e-12))
    for s in range(0, s_max + 1):
        resid = 1.0 - s * nu
        if resid < -1e-12 or resid > nu + 1e-12:
            continue
        for subset in itertools.combinations(range(m), s):
            if abs(resid) <= 1e-12:
                q = np.zeros(m)
                q[list(subset)] = nu
                out.append(q)
            else:
                for j in range(m):
                    if j in subset:
                        continue
                    q = np.zeros(m)
                    q[list(subset)] = nu
                    q[j] = resid
                    out.append(q)
    return out


def _refine_on_sphere(g, w0, iterations=300):
    """Minimize g.w over the unit sphere by tangent-space descent."""
    w = w0 / np.linalg.norm(w0)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return w
    step = 0.5 / gn
    for _ in range(iterations):
        tangent = g - float(g @ w) * w
        w_new = w - step * tangent
        w = w_new / np.linalg.norm(w_new)
    return w


def ref_lmo(body, h, samples=4096, seed=0) -> ReferenceResult:
    """Brute-force minimizer of h.u over the body.

    Vertex enumeration for hull bodies and boxes; seeded boundary
    sampling plus tangent refinement for balls and ellipsoids.
    """
    h = np.asarray(h, dtype=np.float64)
    d = body.d

    if isinstance(body, Polytope):
        vals = body.points @ h
        j = int(np.argmin(vals))
        return ReferenceResult(float(vals[j]), body.points[j].copy(), body.m, 0.0)

    if isinstance(body, ReducedPolytope):
        if body.m > 8:
            raise ValueError("reduced-polytope enumeration is limited to m <= 8")
        vals = body.points @ h
        best_val, best_pt = math.inf, None
        verts = _reduced_extreme_points(body.m, body.nu)
        for q in verts:
            v = float(vals @ q)
            if v < best_val:
                best_val, best_pt = v, q @ body.points
        return ReferenceResult(best_val, best_pt, len(verts), 0.0)

    if isinstance(body, Aabb):
        if d > 16:
            raise ValueError("box corner enumeration is limited to d <= 16")
        best_val, best_pt = math.inf, None
        for bits in itertools.product((0, 1), repeat=d):
            corner = np.where(np.array(bits, dtype=bool), body.hi, body.lo)
            v = float(h @ corner)
            if v < best_val:
                best_val, best_pt = v, corner
        return ReferenceResult(best_val, best_pt, 2**d, 0.0)

    if isinstance(body, (Ball, Ellipsoid)):
        # Parametrize the boundary as center + A w with ||w|| = 1, which
        # turns the problem into minimizing (A' h) . w over the sphere.
        if isinstance(body, Ball):
            amat = body.radius * np.eye(d)
        else:
            chol = np.linalg.cholesky(body.sigma)
            amat = np.linalg.solve(chol, np.eye(d)).T  # L^{-T}
        g = amat.T @ h
        if float(np.linalg.norm(g)) == 0.0:
            return ReferenceResult(float(h @ body.center), body.center.copy(), 0, 0.0)
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(samples, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        scores = dirs @ g
        w = _refine_on_sphere(g, dirs[int(np.argmin(scores))])
        pt = body.center + amat @ w
        return ReferenceResult(float(h @ pt), pt, samples, 1e-12)

    raise TypeError(f"unsupported body type {type(body).__name__}")
