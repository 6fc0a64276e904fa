"""Soft-margin smallest intersecting ball driver.

The objective ``r + C * sum(xi_i)`` with constraints
``||z - v_i|| <= r + xi_i`` is solved through a feasibility-test
subroutine: for a guessed budget alpha the min player plays
(z, v_1..v_n, xi, r) inside

    A = { z in hull, v_i in body_i, r + C*sum(xi) <= alpha,
          0 <= xi <= D, 0 <= r <= D },

the payoff is ``x_i (v_i - z, -r - xi_i)``, and the game value is
positive exactly when the guess is below the optimum.  The best response
splits into the hard-margin (z, v) oracle plus a closed-form extreme
point of the (xi, r) region: with beta = min(D, alpha/C) and
k = ceil(alpha/(C*beta)), budget goes to the slacks whose head weights
exceed C/sqrt(2) (they buy payoff faster than r does) and the remainder
to r.

An outer bracket [L, U] starts at [0, E] and shrinks by exactly 2/3 per
feasibility test (alpha = L + (U-L)/3; infeasible raises L, feasible
lowers U) until U <= (1+eps)L.  The per-step game accuracy follows the
shrinking width, so the last test dominates the cost.

The diameter D is unknown; the box constraints and the declared payoff
width 3D/sqrt(2) use a running proxy that starts at E and doubles on a
width breach.  One refinement keeps the infeasibility verdict sound: a
positive game value certifies "guess too low" for the *boxed* region, so
when the slack box is actually binding (proxy < alpha/C) the driver
treats the verdict as a probe failure and doubles the proxy instead.

When C > 1 any optimum has zero slacks, so the instance is delegated to
the hard solver; C < 1/n runs the same machinery here (the r = 0
structure of that regime emerges in the final refit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .bodies import (
    BodyPack,
    ConvexBody,
    Polytope,
    ReducedPolytope,
    crude_radius_bound,
    representative,
)
from .eja import SQRT2, ProductElement
from .errors import DegenerateInstance, IterationCapExhausted, WidthBreach
from .mwu import (
    DEFAULT_ITERATION_CAP,
    EarlyTermination,
    GameConfig,
    GameProblem,
    OracleResponse,
    schedule,
    solve_game,
)
from . import _kernels
from .sib import CHECK_EVERY, SibInstance, solve_sib

from .bodies import _k_smallest_stable


@dataclass
class SoftSibInstance:
    """Bodies plus the slack penalty weight C and the relative error target.

    The algorithm's guarantees are stated for 1/n <= C <= 1; C > 1 and
    C < 1/n are accepted and routed through the regimes where slacks
    (respectively the radius) vanish at the optimum.
    """

    bodies: List[ConvexBody]
    C: float
    epsilon: float

    def __post_init__(self):
        if len(self.bodies) < 2:
            raise ValueError("need at least two bodies")
        d = self.bodies[0].d
        if any(b.d != d for b in self.bodies):
            raise ValueError("body dimensions must be homogeneous")
        self.C = float(self.C)
        if not self.C > 0:
            raise ValueError("C must be positive")
        self.epsilon = float(self.epsilon)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def n(self):
        return len(self.bodies)

    @property
    def d(self):
        return self.bodies[0].d


@dataclass
class SoftSibSolution:
    center: np.ndarray
    witnesses: np.ndarray
    slacks: np.ndarray
    radius: float
    objective: float
    bracket_steps: int
    width_doublings: int
    total_iterations: int
    # (U - L) before each feasibility test; consecutive entries differ by
    # exactly the factor 2/3
    bracket_widths: list = field(default_factory=list, repr=False)
    witness_coefficients: list = field(default=None, repr=False)


def xi_r_suboracle(y_heads, C: float, alpha_hat: float, D: float):
    """Extreme point maximizing r/sqrt(2) + sum(y_head_i * xi_i).

    Feasible region: r + C*sum(xi) <= alpha_hat, 0 <= xi <= D,
    0 <= r <= D.  Budget spent on slack i gains y_head_i / C per unit
    while budget on r gains 1/sqrt(2), so slacks with
    y_head_i >= C/sqrt(2) win.  With beta = min(D, alpha_hat/C) and
    k = ceil(alpha_hat/(C*beta)):

      * at least k winning heads: r = 0, the k-1 largest heads take beta
        and the k-th takes the budget remainder alpha_hat/C - (k-1)*beta;
      * fewer than k: every winning head takes beta and r takes the
        remaining budget alpha_hat - |winners|*C*beta.

    The second branch keeps the budget r + C*sum(xi) = alpha_hat exact;
    dropping the C factor from the remainder is only budget-consistent
    for C = 1 and fails vertex-enumeration cross-checks otherwise (see
    tests).  Ties among equal heads resolve toward the lowest index.
    Optimality is guaranteed for alpha_hat <= D, which every caller in
    this package maintains.
    """
    y_heads = np.asarray(y_heads, dtype=np.float64)
    if not alpha_hat > 0:
        raise ValueError("alpha_hat must be positive")
    if not D > 0:
        raise ValueError("D must be positive")
    if not C > 0:
        raise ValueError("C must be positive")
    if np.any(y_heads < 0):
        raise ValueError("y_heads must be nonnegative")
    n = y_heads.shape[0]
    beta = min(D, alpha_hat / C)
    k = math.ceil(alpha_hat / (C * beta))
    winners = y_heads >= C / SQRT2
    n_win = int(np.count_nonzero(winners))
    xi = np.zeros(n)
    if n_win >= k:
        top = _k_smallest_stable(-y_heads, k)
        xi[top[:-1]] = beta
        xi[top[-1]] = alpha_hat / C - (k - 1) * beta
        r = 0.0
    else:
        xi[winners] = beta
        r = max(alpha_hat - n_win * C * beta, 0.0)
    return xi, float(r)


def optimal_radius_for_distances(dists, C: float) -> float:
    """Exact minimizer of r + C * sum(max(0, d_i - r)) over r >= 0.

    Piecewise linear in r with slope 1 - C * #{d_i > r}; the minimum sits
    at the ceil(n - 1/C)-th smallest distance, or at 0 when C*n <= 1.
    """
    d = np.sort(np.asarray(dists, dtype=np.float64))
    n = d.shape[0]
    j = math.ceil(n - 1.0 / C)
    if j <= 0:
        return 0.0
    return float(max(d[min(j, n) - 1], 0.0))


class _SoftOracle:
    """Best response for the soft game over a packed body family."""

    def __init__(self, pack: BodyPack, C: float, alpha_hat: float, box: float):
        self.pack = pack
        self.C = C
        self.alpha_hat = alpha_hat
        self.box = box

    def __call__(self, y: ProductElement) -> OracleResponse:
        v, q = self.pack.lmo_all(y.bars)
        h = y.bars.sum(axis=0)
        z, _, _ = self.pack.support_point(h)
        xi, r = xi_r_suboracle(y.heads, self.C, self.alpha_hat, self.box)
        g = v - z
        heads = -(r + xi)
        value = float(np.einsum("ij,ij->", g, y.bars) + heads @ y.heads)
        x = (z, v, xi, r) if q is None else (z, v, q, xi, r)
        return OracleResponse(x=x, payoff=ProductElement._wrap(g, heads), oracle_value=value)


def svdd_oracle(points, y: ProductElement, C: float, alpha_hat: float, D: float) -> OracleResponse:
    """Fast-path best response when every body is a single point.

    The witnesses are the points themselves, the center sub-problem is a
    plain argmax of h.p over the inputs, and (xi, r) comes from the
    closed-form extreme point; O(nd) per call.
    """
    points = np.asarray(points, dtype=np.float64)
    h = y.bars.sum(axis=0)
    scores = points @ h
    zi = int(np.argmax(scores))
    z = points[zi]
    xi, r = xi_r_suboracle(y.heads, C, alpha_hat, D)
    g = points - z
    heads = -(r + xi)
    value = float(np.einsum("ij,ij->", g, y.bars) + heads @ y.heads)
    return OracleResponse(x=(z, points, xi, r), payoff=ProductElement._wrap(g, heads), oracle_value=value)


class _SvddOracle:
    """Adapter giving ``svdd_oracle`` the same shape as _SoftOracle."""

    def __init__(self, pack: BodyPack, points, C: float, alpha_hat: float, box: float):
        self.pack = pack
        self.points = points
        self.C = C
        self.alpha_hat = alpha_hat
        self.box = box

    def __call__(self, y: ProductElement) -> OracleResponse:
        return svdd_oracle(self.points, y, self.C, self.alpha_hat, self.box)


def _singleton_points(bodies):
    """(n, d) stack of the points when every body is a one-vertex polytope."""
    if all(isinstance(b, Polytope) and b.m == 1 for b in bodies):
        return np.stack([b.points[0] for b in bodies])
    return None


@dataclass
class FtpFeasible:
    """A point satisfying the feasibility-test conditions at the tested budget."""

    center: np.ndarray
    witnesses: np.ndarray
    slacks: np.ndarray
    radius: float
    objective: float
    witness_coefficients: Optional[np.ndarray] = None


@dataclass
class FtpInfeasible:
    """Certificate that the tested budget is below the optimal value."""

    at_iteration: int


class _SoftTracker:
    """Running averages plus the two early-stop certificates.

    Infeasibility: any iteration with a strictly positive best-response
    value proves the boxed game value is positive.  When the slack box is
    binding (box < alpha_hat/C) that verdict may be an artifact of the
    truncation, so it is reported as "box" and the caller widens the
    proxy instead of concluding.

    Feasibility: periodically rebuild the averaged point, give it the
    smallest radius that covers the residual distances, and accept if the
    objective fits under (1+eps)*alpha_hat.
    """

    def __init__(self, oracle: _SoftOracle, eps_t: float):
        pack = oracle.pack
        self._oracle = oracle
        self._eps_t = eps_t
        self._box_binding = oracle.box < oracle.alpha_hat / oracle.C
        self.t = 0
        self._z_sum = np.zeros(pack.d)
        self._v_sum = np.zeros((pack.n, pack.d))
        self._xi_sum = np.zeros(pack.n)
        self._r_sum = 0.0
        self.accepted = None

    def oracle_call(self, y: ProductElement) -> OracleResponse:
        resp = self._oracle(y)
        x = resp.x
        self._z_sum += x[0]
        self._v_sum += x[1]
        self._xi_sum += x[-2]
        self._r_sum += x[-1]
        self.t += 1
        return resp

    def monitor(self, t, oracle_value, payoff):
        if oracle_value > 0.0:
            return "box" if self._box_binding else "infeasible"
        if t % CHECK_EVERY:
            return None
        z = self._z_sum / t
        v = self._v_sum / t
        xi = self._xi_sum / t
        dists = np.linalg.norm(v - z, axis=1)
        r = max(0.0, float((dists - xi).max()))
        objective = r + self._oracle.C * float(xi.sum())
        if objective <= (1.0 + self._eps_t) * self._oracle.alpha_hat:
            self.accepted = (r, objective)
            return "feasible"
        return None


def _feasible_from_average(x_bar, C, radius, coeffs_present):
    z = x_bar[0]
    v = x_bar[1]
    xi = np.asarray(x_bar[-2], dtype=np.float64)
    q = x_bar[2] if coeffs_present else None
    objective = radius + C * float(xi.sum())
    return FtpFeasible(
        center=np.asarray(z, dtype=np.float64),
        witnesses=np.asarray(v, dtype=np.float64),
        slacks=xi,
        radius=float(radius),
        objective=float(objective),
        witness_coefficients=q,
    )


@dataclass
class _SoftRun:
    status: str  # "breach" | "positive" | "accept" | "complete"
    iterations: int
    z: np.ndarray = None
    v: np.ndarray = None
    q: np.ndarray = None
    xi: np.ndarray = None
    r_avg: float = 0.0
    r_accept: float = 0.0


def _feasible_certificate(z_sum, v_sum, xi_sum, t, C, alpha_hat, eps_t):
    """Exact-fit radius for the running averages, or None if the
    feasibility budget is not yet met."""
    z = z_sum / t
    v = v_sum / t
    xi = xi_sum / t
    dists = np.linalg.norm(v - z, axis=1)
    r = max(0.0, float((dists - xi).max()))
    if r + C * float(xi.sum()) <= (1.0 + eps_t) * alpha_hat:
        return z, v, xi, r
    return None


def _run_soft_fast(packed, C, alpha_hat, box, eps_t, t_run, eta, rho):
    n, d = packed.n, packed.d
    c = eta / (SQRT2 * rho)
    alpha = np.zeros((n, d))
    beta_acc = np.zeros(n)
    ybar = np.zeros((n, d))
    yhead = np.full(n, 1.0 / (SQRT2 * n))
    z_sum = np.zeros(d)
    v_sum = np.zeros((n, d))
    q_sum = np.zeros((n, packed.m_max if packed.track_q else 1))
    xi_sum = np.zeros(n)
    r_sum = np.zeros(1)
    ybar_sum = np.zeros((n, d))
    yhead_sum = np.zeros(n)
    beta_cap = min(box, alpha_hat / C)
    k_sub = math.ceil(alpha_hat / (C * beta_cap))
    threshold = C / SQRT2
    t = 0
    while t < t_run:
        steps = min(CHECK_EVERY, t_run - t)
        status, done, _payload = _kernels.soft_chunk(
            *packed.args(), alpha, beta_acc, ybar, yhead,
            z_sum, v_sum, q_sum, xi_sum, r_sum, ybar_sum, yhead_sum,
            c, rho, steps, packed.track_q,
            C, alpha_hat, beta_cap, k_sub, threshold,
        )
        t += done
        if status == 1:
            return _SoftRun(status="breach", iterations=t)
        if status == 2:
            return _SoftRun(status="positive", iterations=t)
        if t % CHECK_EVERY == 0:
            cert = _feasible_certificate(z_sum, v_sum, xi_sum, t, C, alpha_hat, eps_t)
            if cert is not None:
                z, v, xi, r = cert
                q = q_sum / t if packed.track_q else None
                return _SoftRun("accept", t, z, v, q, xi, r_accept=r)
    q = q_sum / t if packed.track_q else None
    return _SoftRun(
        "complete", t, z_sum / t, v_sum / t, q, xi_sum / t, r_avg=float(r_sum[0] / t)
    )


def _run_soft_generic(pack, oracle, eps_t, config):
    tracker = _SoftTracker(oracle, eps_t)
    problem = GameProblem(
        oracle=tracker.oracle_call,
        payoff_map=lambda x: ProductElement(x[1] - x[0], -(x[-1] + x[-2])),
        n=pack.n,
        d=pack.d,
    )
    try:
        out = solve_game(problem, config, monitor=tracker.monitor)
    except WidthBreach:
        return _SoftRun(status="breach", iterations=tracker.t)
    except IterationCapExhausted as exc:
        out = exc.partial  # capped run; caller checks the schedule flag

    z = out.x_bar[0]
    v = out.x_bar[1]
    q = out.x_bar[2] if len(out.x_bar) > 4 else None
    xi = np.asarray(out.x_bar[-2], dtype=np.float64)
    if isinstance(out, EarlyTermination):
        if out.reason in ("infeasible", "box"):
            return _SoftRun(status="positive", iterations=out.iterations_run)
        return _SoftRun(
            "accept", out.iterations_run, z, v, q, xi, r_accept=tracker.accepted[0]
        )
    return _SoftRun("complete", out.iterations_run, z, v, q, xi, r_avg=float(out.x_bar[-1]))


def _run_ftp(pack, packed, C, alpha_hat, eps_t, proxy, budget, svdd_points=None):
    """One feasibility test with width management.

    Returns (outcome, iterations_used, proxy, width_doublings); outcome
    is FtpFeasible or FtpInfeasible.
    """
    used = 0
    doublings = 0
    while True:
        rho = 3.0 * proxy / SQRT2
        additive = eps_t * alpha_hat / SQRT2
        while additive > 2.0 * rho:
            proxy *= 2.0
            rho = 3.0 * proxy / SQRT2
            doublings += 1
        remaining = budget - used
        if remaining < 1:
            raise IterationCapExhausted("iteration budget exhausted inside feasibility test")
        config = GameConfig(epsilon=additive, rho=rho, max_iterations_cap=remaining)
        t_run, eta, capped = schedule(config, pack.n)
        # A positive value certifies infeasibility of the *boxed* region;
        # when the slack box truncates it (box < alpha_hat/C) the verdict
        # may be an artifact, so it triggers a proxy doubling instead.
        box_binding = proxy < alpha_hat / C

        if packed is not None:
            run = _run_soft_fast(packed, C, alpha_hat, proxy, eps_t, t_run, eta, rho)
        else:
            if svdd_points is None:
                oracle = _SoftOracle(pack, C, alpha_hat, box=proxy)
            else:
                oracle = _SvddOracle(pack, svdd_points, C, alpha_hat, box=proxy)
            run = _run_soft_generic(pack, oracle, eps_t, config)
        used += run.iterations

        if run.status == "breach":
            proxy *= 2.0
            doublings += 1
            continue
        if run.status == "positive":
            if box_binding:
                proxy *= 2.0
                doublings += 1
                continue
            return FtpInfeasible(at_iteration=run.iterations), used, proxy, doublings
        if run.status == "complete" and capped:
            raise IterationCapExhausted("iteration budget exhausted inside feasibility test")

        if run.status == "accept":
            radius = run.r_accept
        else:
            # Completed horizon with no positive best-response value: the
            # averaged point satisfies the distance conditions once the
            # radius absorbs the additive game error.
            radius = run.r_avg + eps_t * alpha_hat
        x_bar = (run.z, run.v, run.q, run.xi, radius) if run.q is not None else (run.z, run.v, run.xi, radius)
        feasible = _feasible_from_average(x_bar, C, radius, run.q is not None)
        if run.q is None and pack.has_coeffs:
            # singleton fast path: every witness is its body's single vertex
            feasible.witness_coefficients = np.ones((pack.n, 1))
        return feasible, used, proxy, doublings


def soft_ftp(instance: SoftSibInstance, alpha_hat: float, eps: float, max_iterations: int = DEFAULT_ITERATION_CAP):
    """Standalone feasibility test at budget guess ``alpha_hat``.

    Returns FtpFeasible (objective <= (1+eps)*alpha_hat) or FtpInfeasible
    (alpha_hat is certified below the optimum).
    """
    pack = BodyPack(instance.bodies)
    packed = _kernels.PackedArrays(instance.bodies) if _kernels.AVAILABLE else None
    e_bound, _ = crude_radius_bound(instance.bodies)
    if not 0 < alpha_hat <= e_bound:
        raise ValueError(f"alpha_hat must lie in (0, {e_bound:.6g}]")
    outcome, _, _, _ = _run_ftp(
        pack, packed, instance.C, alpha_hat, eps, proxy=e_bound, budget=max_iterations,
        svdd_points=_singleton_points(instance.bodies),
    )
    return outcome


def _trivial_feasible(bodies, anchor, e_bound):
    reps = np.stack([representative(b) for b in bodies])
    coeffs = None
    if any(isinstance(b, (Polytope, ReducedPolytope)) for b in bodies):
        m_max = max(b.m for b in bodies if isinstance(b, (Polytope, ReducedPolytope)))
        coeffs = np.zeros((len(bodies), m_max))
        for i, b in enumerate(bodies):
            if isinstance(b, Polytope):
                coeffs[i, 0] = 1.0
            elif isinstance(b, ReducedPolytope):
                coeffs[i, : b.m] = 1.0 / b.m
    return FtpFeasible(
        center=anchor.copy(),
        witnesses=reps,
        slacks=np.zeros(len(bodies)),
        radius=float(e_bound),
        objective=float(e_bound),
        witness_coefficients=coeffs,
    )


def _finalize(bodies, feasible: FtpFeasible, C, steps, doublings, total, widths):
    # Refit (r, xi) exactly for the found center/witnesses: a 1-d
    # piecewise-linear problem.  Never worse than the carried values, and
    # it realizes the structural regimes (r = 0 when C*n < 1, zero slacks
    # when C > 1) instead of leaving them to the approximation dust.
    dists = np.linalg.norm(feasible.witnesses - feasible.center, axis=1)
    r = optimal_radius_for_distances(dists, C)
    slacks = np.maximum(0.0, dists - r)
    objective = r + C * float(slacks.sum())
    if objective > feasible.objective:
        r = feasible.radius
        slacks = feasible.slacks
        objective = feasible.objective
    coeffs = None
    if feasible.witness_coefficients is not None:
        q = feasible.witness_coefficients
        coeffs = [
            q[i, : b.m].copy() if isinstance(b, (Polytope, ReducedPolytope)) else None
            for i, b in enumerate(bodies)
        ]
    return SoftSibSolution(
        center=feasible.center,
        witnesses=feasible.witnesses,
        slacks=np.asarray(slacks, dtype=np.float64),
        radius=float(r),
        objective=float(objective),
        bracket_steps=steps,
        width_doublings=doublings,
        total_iterations=total,
        bracket_widths=widths,
        witness_coefficients=coeffs,
    )


def solve_soft_sib(instance: SoftSibInstance, max_iterations: int = DEFAULT_ITERATION_CAP) -> SoftSibSolution:
    """Compute a (1 + eps)-approximate soft-margin solution.

    Bisection-by-thirds on the objective budget; every feasibility test
    shrinks the bracket width by exactly 2/3.  DegenerateInstance is
    raised when the bracket collapses to the floor without ever
    certifying a positive lower bound (the optimal objective is ~0).
    """
    bodies = instance.bodies
    C = instance.C
    eps = instance.epsilon

    if C > 1.0:
        hard = solve_sib(SibInstance(bodies, eps), max_iterations=max_iterations)
        return SoftSibSolution(
            center=hard.center,
            witnesses=hard.witnesses,
            slacks=np.zeros(len(bodies)),
            radius=hard.radius,
            objective=hard.radius,
            bracket_steps=0,
            width_doublings=hard.width_doublings,
            total_iterations=hard.total_iterations,
            bracket_widths=[],
            witness_coefficients=hard.witness_coefficients,
        )

    pack = BodyPack(bodies)
    e_bound, anchor = crude_radius_bound(bodies)
    floor = max(1e-12, 1e-9 * e_bound)
    if e_bound <= floor:
        raise DegenerateInstance(
            "all body representatives coincide; the optimal objective is ~0"
        )

    best = _trivial_feasible(bodies, anchor, e_bound)
    svdd_points = _singleton_points(bodies)
    packed = _kernels.PackedArrays(bodies) if _kernels.AVAILABLE else None
    lo = 0.0
    width = float(e_bound)
    proxy = float(e_bound)
    steps = 0
    doublings = 0
    total = 0
    widths = []

    while width > eps * lo:
        if lo <= 0.0 and width < floor:
            raise DegenerateInstance(
                "feasibility bracket collapsed without a positive lower bound; "
                "the optimal objective is ~0"
            )
        widths.append(width)
        alpha_hat = lo + width / 3.0
        eps_t = width / (3.0 * alpha_hat)
        try:
            outcome, used, proxy, dbl = _run_ftp(
                pack, packed, C, alpha_hat, eps_t, proxy,
                budget=max_iterations - total, svdd_points=svdd_points,
            )
        except IterationCapExhausted:
            partial = _finalize(bodies, best, C, steps, doublings, max_iterations, widths)
            raise IterationCapExhausted(
                "iteration budget exhausted before convergence", partial=partial
            ) from None
        total += used
        doublings += dbl
        steps += 1
        if isinstance(outcome, FtpInfeasible):
            lo = lo + width / 3.0
        else:
            best = outcome
        width *= 2.0 / 3.0

    return _finalize(bodies, best, C, steps, doublings, total, widths)
