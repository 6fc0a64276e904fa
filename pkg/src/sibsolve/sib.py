"""Hard-margin smallest intersecting ball driver.

The problem ``minimize r subject to ||z - v_i|| <= r, v_i in body_i`` is
played as a zero-sum game: the min player proposes a center z inside the
hull of the bodies plus one witness per body, the max player weights the
blocks of the payoff

    f(z, v_1..v_n) = x_i (v_i - z, 0)

on the product-cone spectraplex, and the game value equals r*/sqrt(2).
The best response decomposes into one linear minimization per body (at
its own block direction) plus one support maximization for z, so each
iteration costs n LMO calls.

The two unknown scale parameters are discovered on the fly:

    width     starts at 2E and doubles whenever an oracle response
              exceeds it (the run restarts from scratch: warm-starting
              would void the step-size analysis);
    radius    starts at E/2 and halves whenever the averaged iterates
              fail the duality test nu_y > 0 and (nu_x - nu_y)/nu_y <= eps,

where E is the crude upper bound from the body representatives.  The
duality pair is cheap: nu_x is the largest center-to-witness distance
over sqrt(2), nu_y is one extra oracle call at the averaged max-player
iterate.  Because the test is a sound certificate at *any* iterate, the
driver also evaluates it periodically inside a run and stops as soon as
it passes; the scheduled horizon is only the worst-case guarantee.

Iterations run through the compiled chunk kernels when numba is present
and through the generic ``solve_game`` loop otherwise; both paths share
every formula and decision point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _kernels
from .bodies import BodyPack, ConvexBody, Polytope, ReducedPolytope, crude_radius_bound
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

# Period of the in-run duality test; one extra oracle call per check.
CHECK_EVERY = 512


@dataclass
class SibInstance:
    """n >= 2 compact convex bodies with a common dimension, plus the
    relative radius-error target."""

    bodies: List[ConvexBody]
    epsilon: float

    def __post_init__(self):
        if len(self.bodies) < 2:
            raise ValueError("need at least two bodies")
        d = self.bodies[0].d
        if any(b.d != d for b in self.bodies):
            raise ValueError("body dimensions must be homogeneous")
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
class SibSolution:
    center: np.ndarray
    witnesses: np.ndarray  # (n, d), one genuine body point per body
    radius: float
    nu_x: float
    nu_y: float
    width_doublings: int
    radius_halvings: int
    total_iterations: int
    # per-body hull coefficients for polytope-type witnesses, None otherwise
    witness_coefficients: list = field(default=None, repr=False)


class _HardOracle:
    """Best response for the hard-margin game, on a packed body family."""

    def __init__(self, pack: BodyPack):
        self.pack = pack
        self._zero_heads = np.zeros(pack.n)

    def __call__(self, y: ProductElement) -> OracleResponse:
        v, q = self.pack.lmo_all(y.bars)
        h = y.bars.sum(axis=0)
        z, _, _ = self.pack.support_point(h)
        g = v - z
        value = float(np.einsum("ij,ij->", g, y.bars))
        x = (z, v) if q is None else (z, v, q)
        return OracleResponse(x=x, payoff=ProductElement._wrap(g, self._zero_heads), oracle_value=value)


def sib_oracle(bodies, y: ProductElement) -> OracleResponse:
    """Single best-response evaluation; ``bodies`` may be a list or a BodyPack."""
    pack = bodies if isinstance(bodies, BodyPack) else BodyPack(list(bodies))
    return _HardOracle(pack)(y)


@dataclass
class _RunOutcome:
    status: str  # "accept" | "complete" | "breach"
    iterations: int
    z: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    y_bar: Optional[ProductElement] = None
    nu_x: float = 0.0
    nu_y: float = 0.0


def _accept_test(raw: _HardOracle, eps, z, v, y_bar):
    nu_x = float(np.linalg.norm(v - z, axis=1).max()) / SQRT2
    nu_y = raw(y_bar).oracle_value
    passed = nu_y > 0.0 and (nu_x - nu_y) / nu_y <= eps
    return passed, nu_x, nu_y


def _run_hard_fast(packed, raw, eps, t_run, eta, rho):
    n, d = packed.n, packed.d
    c = eta / (SQRT2 * rho)
    alpha = np.zeros((n, d))
    beta_zero = np.zeros(n)
    ybar = np.zeros((n, d))
    yhead = np.full(n, 1.0 / (SQRT2 * n))
    z_sum = np.zeros(d)
    v_sum = np.zeros((n, d))
    q_sum = np.zeros((n, packed.m_max if packed.track_q else 1))
    ybar_sum = np.zeros((n, d))
    yhead_sum = np.zeros(n)
    t = 0
    while t < t_run:
        steps = min(CHECK_EVERY, t_run - t)
        status, done, observed = _kernels.hard_chunk(
            *packed.args(), alpha, beta_zero, ybar, yhead,
            z_sum, v_sum, q_sum, ybar_sum, yhead_sum,
            c, rho, steps, packed.track_q,
        )
        t += done
        if status == 1:
            return _RunOutcome(status="breach", iterations=t)
        if t % CHECK_EVERY == 0:
            z = z_sum / t
            v = v_sum / t
            y_bar = ProductElement._wrap(ybar_sum / t, yhead_sum / t)
            passed, nu_x, nu_y = _accept_test(raw, eps, z, v, y_bar)
            if passed:
                q = q_sum / t if packed.track_q else None
                return _RunOutcome("accept", t, z, v, q, y_bar, nu_x, nu_y)
    z = z_sum / t
    v = v_sum / t
    q = q_sum / t if packed.track_q else None
    y_bar = ProductElement._wrap(ybar_sum / t, yhead_sum / t)
    return _RunOutcome("complete", t, z, v, q, y_bar)


class _RunTracker:
    """Monitor-side duplicate of the running averages (generic path).

    The monitor protocol only sees (t, oracle_value, payoff), so the
    driver keeps its own sums (identical to the solver's, same additions
    in the same order) and runs the duality test every CHECK_EVERY
    iterations.
    """

    def __init__(self, raw_oracle: _HardOracle, eps: float):
        pack = raw_oracle.pack
        self._raw = raw_oracle
        self._eps = eps
        self.t = 0
        self._z_sum = np.zeros(pack.d)
        self._v_sum = np.zeros((pack.n, pack.d))
        self._ybar_sum = np.zeros((pack.n, pack.d))
        self._yhead_sum = np.zeros(pack.n)
        self.accepted = None  # (nu_x, nu_y) once the test passes

    def oracle(self, y: ProductElement) -> OracleResponse:
        resp = self._raw(y)
        self._z_sum += resp.x[0]
        self._v_sum += resp.x[1]
        self._ybar_sum += y.bars
        self._yhead_sum += y.heads
        self.t += 1
        return resp

    def monitor(self, t, oracle_value, payoff):
        if t % CHECK_EVERY:
            return None
        z = self._z_sum / t
        v = self._v_sum / t
        y_bar = ProductElement._wrap(self._ybar_sum / t, self._yhead_sum / t)
        passed, nu_x, nu_y = _accept_test(self._raw, self._eps, z, v, y_bar)
        if passed:
            self.accepted = (nu_x, nu_y)
            return "accept"
        return None


def _run_hard_generic(pack, raw, eps, config):
    tracker = _RunTracker(raw, eps)
    problem = GameProblem(
        oracle=tracker.oracle,
        payoff_map=lambda x: ProductElement(x[1] - x[0], np.zeros(pack.n)),
        n=pack.n,
        d=pack.d,
    )
    try:
        out = solve_game(problem, config, monitor=tracker.monitor)
    except WidthBreach:
        return _RunOutcome(status="breach", iterations=tracker.t)
    except IterationCapExhausted as exc:
        out = exc.partial  # treated as a completed (capped) run by the caller

    z = out.x_bar[0]
    v = out.x_bar[1]
    q = out.x_bar[2] if len(out.x_bar) > 2 else None
    if isinstance(out, EarlyTermination):
        nu_x, nu_y = tracker.accepted
        return _RunOutcome("accept", out.iterations_run, z, v, q, out.y_bar, nu_x, nu_y)
    return _RunOutcome("complete", out.iterations_run, z, v, q, out.y_bar)


def _extract(bodies, outcome: _RunOutcome, doublings, halvings, total):
    z = outcome.z
    v = outcome.v
    coeffs = None
    if outcome.q is not None:
        coeffs = [
            outcome.q[i, : b.m].copy() if isinstance(b, (Polytope, ReducedPolytope)) else None
            for i, b in enumerate(bodies)
        ]
    radius = float(np.linalg.norm(v - z, axis=1).max())
    return SibSolution(
        center=np.asarray(z, dtype=np.float64),
        witnesses=np.asarray(v, dtype=np.float64),
        radius=radius,
        nu_x=radius / SQRT2,
        nu_y=float(outcome.nu_y),
        width_doublings=doublings,
        radius_halvings=halvings,
        total_iterations=total,
        witness_coefficients=coeffs,
    )


def solve_sib(instance: SibInstance, max_iterations: int = DEFAULT_ITERATION_CAP) -> SibSolution:
    """Compute a (1 + eps)-approximate smallest intersecting ball.

    Raises DegenerateInstance when the radius guess collapses below
    max(1e-12, 1e-9 * E): the bodies then almost certainly share a common
    point, a case the method cannot resolve.  IterationCapExhausted
    carries a best-effort feasible solution in ``partial``.
    """
    bodies = instance.bodies
    pack = BodyPack(bodies)
    eps = instance.epsilon
    e_bound, _ = crude_radius_bound(bodies)
    r_floor = max(1e-12, 1e-9 * e_bound)
    if e_bound <= r_floor:
        raise DegenerateInstance(
            "all body representatives coincide; the optimal radius is ~0"
        )

    raw = _HardOracle(pack)
    packed = _kernels.PackedArrays(bodies) if _kernels.AVAILABLE else None

    rho = 2.0 * e_bound
    r_guess = e_bound / 2.0
    doublings = 0
    halvings = 0
    total = 0

    while True:
        eps_add = eps * r_guess / SQRT2
        while eps_add > 2.0 * rho:
            rho *= 2.0
            doublings += 1
        remaining = max_iterations - total
        if remaining < 1:
            raise IterationCapExhausted("iteration budget exhausted before convergence")
        config = GameConfig(epsilon=eps_add, rho=rho, max_iterations_cap=remaining)
        t_run, eta, capped = schedule(config, pack.n)
        if packed is not None:
            outcome = _run_hard_fast(packed, raw, eps, t_run, eta, rho)
        else:
            outcome = _run_hard_generic(pack, raw, eps, config)
        total += outcome.iterations

        if outcome.status == "breach":
            rho *= 2.0
            doublings += 1
            continue
        if outcome.status == "accept":
            return _extract(bodies, outcome, doublings, halvings, total)

        # completed horizon: duality test on the final averages
        passed, nu_x, nu_y = _accept_test(raw, eps, outcome.z, outcome.v, outcome.y_bar)
        outcome.nu_x, outcome.nu_y = nu_x, nu_y
        if capped:
            partial = _extract(bodies, outcome, doublings, halvings, total)
            raise IterationCapExhausted(
                "iteration budget exhausted before convergence", partial=partial
            )
        if passed:
            return _extract(bodies, outcome, doublings, halvings, total)

        r_guess *= 0.5
        halvings += 1
        if r_guess < r_floor:
            raise DegenerateInstance(
                "radius guess collapsed below the resolution floor; "
                "the bodies likely share a common point"
            )
