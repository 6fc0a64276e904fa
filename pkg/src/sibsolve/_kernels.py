"""Compiled inner-loop engine for the two drivers.

The per-iteration work (one linear minimization per body, one support
maximization, the multiplicative-weights step and the running sums) is a
few hundred scalar operations, far below the dispatch overhead of array
libraries, so the drivers run it through these numba kernels in chunks
of CHECK_EVERY iterations and perform their certificate checks in Python
between chunks.  Every formula, accumulation order and tie-break below
mirrors the generic path (BodyPack + mwu_update); the test suite
cross-checks the two.

A kernel stops early inside a chunk only for conditions the generic path
also checks per iteration: a payoff width breach, and (soft game) a
positive best-response value.  Bodies are passed as flat arrays with a
per-body kind tag; plain polytopes ride the reduced-polytope path with
cap 1 (the one-active-vertex case).

When numba is unavailable the drivers silently fall back to the generic
path; results agree to floating-point noise.
"""

from __future__ import annotations

import math

import numpy as np

from .bodies import Aabb, Ball, Ellipsoid, Polytope, ReducedPolytope

try:
    from numba import njit

    AVAILABLE = True
except ImportError:  # pragma: no cover - numba is pre-installed in practice
    AVAILABLE = False

    def njit(*args, **kwargs):  # no-op decorator fallback
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


KIND_HULL = 0
KIND_AABB = 1
KIND_BALL = 2
KIND_ELLIPSOID = 3


class PackedArrays:
    """Flat body encoding consumed by the kernels."""

    def __init__(self, bodies):
        n = len(bodies)
        d = bodies[0].d
        hull_sizes = [b.m for b in bodies if isinstance(b, (Polytope, ReducedPolytope))]
        m_max = max(hull_sizes) if hull_sizes else 1
        self.n = n
        self.d = d
        self.m_max = m_max
        self.track_q = bool(hull_sizes)
        self.kinds = np.zeros(n, dtype=np.int64)
        self.verts = np.zeros((n, m_max, d))
        self.m = np.zeros(n, dtype=np.int64)
        self.nu = np.ones(n)
        self.kk = np.ones(n, dtype=np.int64)
        self.lo = np.zeros((n, d))
        self.hi = np.zeros((n, d))
        self.centers = np.zeros((n, d))
        self.radii = np.zeros(n)
        self.sig_inv = np.zeros((n, d, d))
        for i, b in enumerate(bodies):
            if isinstance(b, Polytope):
                self.kinds[i] = KIND_HULL
                self.verts[i, : b.m] = b.points
                self.m[i] = b.m
                self.nu[i] = 1.0
                self.kk[i] = 1
            elif isinstance(b, ReducedPolytope):
                self.kinds[i] = KIND_HULL
                self.verts[i, : b.m] = b.points
                self.m[i] = b.m
                self.nu[i] = b.nu
                self.kk[i] = b.k
            elif isinstance(b, Aabb):
                self.kinds[i] = KIND_AABB
                self.lo[i] = b.lo
                self.hi[i] = b.hi
            elif isinstance(b, Ball):
                self.kinds[i] = KIND_BALL
                self.centers[i] = b.center
                self.radii[i] = b.radius
            elif isinstance(b, Ellipsoid):
                self.kinds[i] = KIND_ELLIPSOID
                self.centers[i] = b.center
                self.sig_inv[i] = b.sigma_inv
            else:
                raise TypeError(f"unsupported body type {type(b).__name__}")

    def args(self):
        return (self.kinds, self.verts, self.m, self.nu, self.kk,
                self.lo, self.hi, self.centers, self.radii, self.sig_inv)


@njit(cache=True)
def _hull_weights(verts_i, m_i, nu_i, k_i, h, sign, scores, used, wbuf):
    """Capped-simplex weights minimizing (sign * h) . u over one hull body.

    Writes the weights into wbuf[:m_i]; ties resolve to the lowest vertex
    index, matching the stable selection of the batched path.
    """
    d = h.shape[0]
    for t in range(m_i):
        acc = 0.0
        for j in range(d):
            acc += verts_i[t, j] * h[j]
        scores[t] = sign * acc
        used[t] = False
        wbuf[t] = 0.0
    resid = 1.0 - nu_i * (k_i - 1)
    for c in range(k_i):
        best = -1
        bv = np.inf
        for t in range(m_i):
            if not used[t] and scores[t] < bv:
                best = t
                bv = scores[t]
        used[best] = True
        wbuf[best] = nu_i if c < k_i - 1 else resid


@njit(cache=True)
def _lmo_fill(kinds, verts, m, nu, kk, lo, hi, centers, radii, sig_inv,
              ybar, v, q, track_q, scratch, used, wbuf):
    """Per-body minimizers of ybar_i . u; hull weights into q when tracked."""
    n, d = ybar.shape
    for i in range(n):
        kind = kinds[i]
        if kind == KIND_BALL:
            nr = 0.0
            for j in range(d):
                nr += ybar[i, j] * ybar[i, j]
            nr = math.sqrt(nr)
            sc = radii[i] / max(nr, 1e-300)
            for j in range(d):
                v[i, j] = centers[i, j] - ybar[i, j] * sc
        elif kind == KIND_AABB:
            for j in range(d):
                v[i, j] = lo[i, j] if ybar[i, j] > 0 else hi[i, j]
        elif kind == KIND_ELLIPSOID:
            for j in range(d):
                acc = 0.0
                for l in range(d):
                    acc += sig_inv[i, j, l] * ybar[i, l]
                scratch[j] = acc
            quad = 0.0
            for j in range(d):
                quad += ybar[i, j] * scratch[j]
            den = math.sqrt(max(quad, 0.0))
            inv = 1.0 / max(den, 1e-300)
            for j in range(d):
                v[i, j] = centers[i, j] - scratch[j] * inv
        else:  # hull
            mi = m[i]
            _hull_weights(verts[i], mi, nu[i], kk[i], ybar[i], 1.0, scratch, used, wbuf)
            for j in range(d):
                acc = 0.0
                for t in range(mi):
                    acc += wbuf[t] * verts[i, t, j]
                v[i, j] = acc
            if track_q:
                for t in range(q.shape[1]):
                    q[i, t] = wbuf[t] if t < mi else 0.0


@njit(cache=True)
def _support_value(kinds, verts, m, nu, kk, lo, hi, centers, radii, sig_inv,
                   i, h, hn, scratch, used, wbuf):
    """max h . u over body i (the value only)."""
    d = h.shape[0]
    kind = kinds[i]
    if kind == KIND_BALL:
        if hn == 0.0:
            return 0.0
        val = 0.0
        for j in range(d):
            val += centers[i, j] * h[j]
        return val + radii[i] * hn
    if kind == KIND_AABB:
        val = 0.0
        for j in range(d):
            pj = lo[i, j] if h[j] < 0 else hi[i, j]
            val += pj * h[j]
        return val
    if kind == KIND_ELLIPSOID:
        for j in range(d):
            acc = 0.0
            for l in range(d):
                acc += sig_inv[i, j, l] * h[l]
            scratch[j] = acc
        quad = 0.0
        for j in range(d):
            quad += scratch[j] * h[j]
        den = math.sqrt(max(quad, 0.0))
        inv = 1.0 / max(den, 1e-300)
        val = 0.0
        for j in range(d):
            val += (centers[i, j] + scratch[j] * inv) * h[j]
        return val
    mi = m[i]
    _hull_weights(verts[i], mi, nu[i], kk[i], h, -1.0, scratch, used, wbuf)
    val = 0.0
    for j in range(d):
        acc = 0.0
        for t in range(mi):
            acc += wbuf[t] * verts[i, t, j]
        val += acc * h[j]
    return val


@njit(cache=True)
def _support_point(kinds, verts, m, nu, kk, lo, hi, centers, radii, sig_inv,
                   h, z, scratch, used, wbuf):
    """Hull maximizer of h . z over all bodies; lowest index wins ties."""
    n = kinds.shape[0]
    d = h.shape[0]
    hn = 0.0
    for j in range(d):
        hn += h[j] * h[j]
    hn = math.sqrt(hn)
    bestv = -np.inf
    besti = 0
    for i in range(n):
        val = _support_value(kinds, verts, m, nu, kk, lo, hi, centers, radii,
                             sig_inv, i, h, hn, scratch, used, wbuf)
        if val > bestv:
            bestv = val
            besti = i
    i = besti
    kind = kinds[i]
    if kind == KIND_BALL:
        if hn == 0.0:
            for j in range(d):
                z[j] = centers[i, j]
        else:
            sc = radii[i] / hn
            for j in range(d):
                z[j] = centers[i, j] + sc * h[j]
    elif kind == KIND_AABB:
        for j in range(d):
            z[j] = lo[i, j] if h[j] < 0 else hi[i, j]
    elif kind == KIND_ELLIPSOID:
        for j in range(d):
            acc = 0.0
            for l in range(d):
                acc += sig_inv[i, j, l] * h[l]
            scratch[j] = acc
        quad = 0.0
        for j in range(d):
            quad += scratch[j] * h[j]
        den = math.sqrt(max(quad, 0.0))
        inv = 1.0 / max(den, 1e-300)
        for j in range(d):
            z[j] = centers[i, j] + scratch[j] * inv
    else:
        mi = m[i]
        _hull_weights(verts[i], mi, nu[i], kk[i], h, -1.0, scratch, used, wbuf)
        for j in range(d):
            acc = 0.0
            for t in range(mi):
                acc += wbuf[t] * verts[i, t, j]
            z[j] = acc
    return besti


@njit(cache=True)
def _mwu_step(alpha, beta, ybar, yhead, c, anorm, expo):
    """In-place multiplicative-weights step; accumulators already updated."""
    n, d = alpha.shape
    shift = -np.inf
    for i in range(n):
        a2 = 0.0
        for j in range(d):
            a2 += alpha[i, j] * alpha[i, j]
        anorm[i] = math.sqrt(a2)
        expo[i] = c * (beta[i] + anorm[i])
        if expo[i] > shift:
            shift = expo[i]
    ssum = 0.0
    for i in range(n):
        eu = math.exp(expo[i] - shift)
        ed = math.exp(c * (beta[i] - anorm[i]) - shift)
        yhead[i] = eu + ed  # mu, normalized below
        expo[i] = eu - ed  # lam
        ssum += eu + ed
    denom = math.sqrt(2.0) * ssum
    for i in range(n):
        scale = expo[i] / (denom * max(anorm[i], 1e-300))
        yhead[i] = yhead[i] / denom
        for j in range(d):
            ybar[i, j] = scale * alpha[i, j]


@njit(cache=True)
def hard_chunk(kinds, verts, m, nu, kk, lo, hi, centers, radii, sig_inv,
               alpha, beta_zero, ybar, yhead,
               z_sum, v_sum, q_sum, ybar_sum, yhead_sum,
               c, rho, steps, track_q):
    """Up to ``steps`` iterations of the hard-margin game.

    Returns (status, done, observed): status 0 = chunk completed,
    1 = width breach at local iteration ``done`` with spectral norm
    ``observed``.
    """
    n, d = ybar.shape
    m_max = verts.shape[1]
    v = np.empty((n, d))
    q = np.empty((n, q_sum.shape[1]))
    z = np.empty(d)
    h = np.empty(d)
    scratch = np.empty(max(m_max, d))
    used = np.zeros(m_max, dtype=np.bool_)
    wbuf = np.empty(m_max)
    anorm = np.empty(n)
    expo = np.empty(n)
    sqrt2 = math.sqrt(2.0)
    for s in range(steps):
        for j in range(d):
            acc = 0.0
            for i in range(n):
                acc += ybar[i, j]
            h[j] = acc
        _lmo_fill(kinds, verts, m, nu, kk, lo, hi, centers, radii, sig_inv,
                  ybar, v, q, track_q, scratch, used, wbuf)
        _support_point(kinds, verts, m, nu, kk, lo, hi, centers, radii, sig_inv,
                       h, z, scratch, used, wbuf)
        wmax = 0.0
        for i in range(n):
            g2 = 0.0
            for j in range(d):
                gij = v[i, j] - z[j]
                g2 += gij * gij
            gn = math.sqrt(g2)
            if gn > wmax:
                wmax = gn
        observed = wmax / sqrt2
        if observed > rho:
            return 1, s + 1, observed
        for j in range(d):
            z_sum[j] += z[j]
        for i in range(n):
            for j in range(d):
                v_sum[i, j] += v[i, j]
                ybar_sum[i, j] += ybar[i, j]
            yhead_sum[i] += yhead[i]
        if track_q:
            for i in range(n):
                for t in range(q_sum.shape[1]):
                    q_sum[i, t] += q[i, t]
        for i in range(n):
            for j in range(d):
                alpha[i, j] += v[i, j] - z[j]
        _mwu_step(alpha, beta_zero, ybar, yhead, c, anorm, expo)
    return 0, steps, 0.0


@njit(cache=True)
def soft_chunk(kinds, verts, m, nu, kk, lo, hi, centers, radii, sig_inv,
               alpha, beta_acc, ybar, yhead,
               z_sum, v_sum, q_sum, xi_sum, r_sum, ybar_sum, yhead_sum,
               c, rho, steps, track_q,
               penalty, alpha_hat, beta_cap, k_sub, threshold):
    """Up to ``steps`` iterations of the soft-margin feasibility game.

    Returns (status, done, payload): status 0 = chunk completed, 1 =
    width breach (payload = observed norm), 2 = positive best-response
    value (payload = the value), both at local iteration ``done``.
    """
    n, d = ybar.shape
    m_max = verts.shape[1]
    v = np.empty((n, d))
    q = np.empty((n, q_sum.shape[1]))
    xi = np.empty(n)
    used_n = np.zeros(n, dtype=np.bool_)
    z = np.empty(d)
    h = np.empty(d)
    scratch = np.empty(max(m_max, d))
    used = np.zeros(m_max, dtype=np.bool_)
    wbuf = np.empty(m_max)
    anorm = np.empty(n)
    expo = np.empty(n)
    sqrt2 = math.sqrt(2.0)
    for s in range(steps):
        for j in range(d):
            acc = 0.0
            for i in range(n):
                acc += ybar[i, j]
            h[j] = acc
        _lmo_fill(kinds, verts, m, nu, kk, lo, hi, centers, radii, sig_inv,
                  ybar, v, q, track_q, scratch, used, wbuf)
        _support_point(kinds, verts, m, nu, kk, lo, hi, centers, radii, sig_inv,
                       h, z, scratch, used, wbuf)
        # (xi, r) extreme point of the budget region
        n_win = 0
        for i in range(n):
            xi[i] = 0.0
            used_n[i] = False
            if yhead[i] >= threshold:
                n_win += 1
        r_val = 0.0
        if n_win >= k_sub:
            for cpos in range(k_sub):
                best = -1
                bv = -np.inf
                for i in range(n):
                    if not used_n[i] and yhead[i] > bv:
                        best = i
                        bv = yhead[i]
                used_n[best] = True
                if cpos < k_sub - 1:
                    xi[best] = beta_cap
                else:
                    xi[best] = alpha_hat / penalty - (k_sub - 1) * beta_cap
        else:
            for i in range(n):
                if yhead[i] >= threshold:
                    xi[i] = beta_cap
            r_val = alpha_hat - n_win * penalty * beta_cap
            if r_val < 0.0:
                r_val = 0.0
        wmax = 0.0
        value = 0.0
        for i in range(n):
            g2 = 0.0
            gy = 0.0
            for j in range(d):
                gij = v[i, j] - z[j]
                g2 += gij * gij
                gy += gij * ybar[i, j]
            head = -(r_val + xi[i])
            bn = math.sqrt(g2) + abs(head)
            if bn > wmax:
                wmax = bn
            value += gy + head * yhead[i]
        observed = wmax / sqrt2
        if observed > rho:
            return 1, s + 1, observed
        for j in range(d):
            z_sum[j] += z[j]
        for i in range(n):
            for j in range(d):
                v_sum[i, j] += v[i, j]
                ybar_sum[i, j] += ybar[i, j]
            yhead_sum[i] += yhead[i]
            xi_sum[i] += xi[i]
        r_sum[0] += r_val
        if track_q:
            for i in range(n):
                for t in range(q_sum.shape[1]):
                    q_sum[i, t] += q[i, t]
        if value > 0.0:
            return 2, s + 1, value
        for i in range(n):
            for j in range(d):
                alpha[i, j] += v[i, j] - z[j]
            beta_acc[i] += -(r_val + xi[i])
        _mwu_step(alpha, beta_acc, ybar, yhead, c, anorm, expo)
    return 0, steps, 0.0
