"""Multiplicative-weights solver for zero-sum games over a product of cones.

The max player plays on the spectraplex of C = Q^{d+1} x ... x Q^{d+1}
(trace-one cone elements); the min player answers through a best-response
oracle over an arbitrary compact convex set.  The bilinear payoff is
``f(x) . y`` in the trace inner product.  The iteration keeps one pair of
accumulators per block,

    alpha_i <- alpha_i + gbar_i(x_t)      (vector part of the payoff)
    beta_i  <- beta_i  + h_i(x_t)         (head part of the payoff)

and maps them through the closed-form block exponential

    mu_i     = exp(c*(beta_i + ||alpha_i||)) + exp(c*(beta_i - ||alpha_i||))
    lam_i    = exp(c*(beta_i + ||alpha_i||)) - exp(c*(beta_i - ||alpha_i||))
    y_i      = ( lam_i/(sqrt(2)*S) * alpha_i/||alpha_i||,  mu_i/(sqrt(2)*S) )

with c = eta/(sqrt(2)*rho) and S = sum_i mu_i.  Exponents are shifted by
their running maximum before exponentiating so that the accumulators can
grow without overflow; the shift cancels in every ratio.

With T = ceil(4 rho^2 ln(2n) / eps^2) iterations and eta = sqrt(ln(2n)/T)
the averaged iterates form an eps-additive equilibrium; a delta-inexact
best response degrades the guarantee additively to eps + delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .eja import SQRT2, ProductElement, spectral_norm
from .errors import IterationCapExhausted, WidthBreach

DEFAULT_ITERATION_CAP = 50_000_000


@dataclass
class GameConfig:
    """Run parameters for one solve.

    epsilon : additive equilibrium error target (> 0)
    rho     : declared bound on the payoff spectral norm (> 0); the
              schedule requires epsilon <= 2*rho
    max_iterations_cap : hard ceiling on the scheduled horizon
    delta   : additive inexactness budget of the oracle (>= 0); only
              widens the reported gap bound
    """

    epsilon: float
    rho: float
    max_iterations_cap: int = DEFAULT_ITERATION_CAP
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if int(self.max_iterations_cap) < 1:
            raise ValueError("max_iterations_cap must be a positive integer")
        self.max_iterations_cap = int(self.max_iterations_cap)
        if self.epsilon > 2.0 * self.rho:
            raise ValueError(
                f"epsilon={self.epsilon:.6g} exceeds 2*rho={2 * self.rho:.6g}; "
                "the step-size schedule is only valid for epsilon <= 2*rho"
            )


class Schedule(NamedTuple):
    iterations: int
    eta: float
    capped: bool


def schedule(config: GameConfig, n: int) -> Schedule:
    """Iteration count and step size for an n-block game.

    T = ceil(4 rho^2 ln(2n) / eps^2), clipped at the configured cap (the
    ``capped`` flag lets callers distinguish exhausted budgets from
    converged runs); eta = sqrt(ln(2n)/T) for the T actually run.
    """
    if n < 1:
        raise ValueError("need at least one block")
    log2n = math.log(2 * n)
    t_formula = math.ceil(4.0 * config.rho**2 * log2n / config.epsilon**2)
    capped = t_formula > config.max_iterations_cap
    t = min(t_formula, config.max_iterations_cap)
    return Schedule(t, math.sqrt(log2n / t), capped)


@dataclass
class MaxPlayerState:
    """Accumulators and current spectraplex iterate of the max player."""

    alpha: np.ndarray  # (n, d) running sum of payoff bar parts
    beta: np.ndarray  # (n,)  running sum of payoff heads
    y: ProductElement


def initial_state(n: int, d: int) -> MaxPlayerState:
    """Zero accumulators; y uniform with heads 1/(sqrt(2) n)."""
    return MaxPlayerState(
        alpha=np.zeros((n, d)),
        beta=np.zeros(n),
        y=ProductElement(np.zeros((n, d)), np.full(n, 1.0 / (SQRT2 * n))),
    )


def mwu_update(state: MaxPlayerState, payoff: ProductElement, eta: float, rho: float) -> MaxPlayerState:
    """One multiplicative-weights step; pure, returns the new state."""
    alpha = state.alpha + payoff.bars
    beta = state.beta + payoff.heads
    anorm = np.sqrt(np.einsum("ij,ij->i", alpha, alpha))
    c = eta / (SQRT2 * rho)
    up = c * (beta + anorm)
    dn = c * (beta - anorm)
    shift = up.max()  # keeps every exponent <= 0; cancels in the ratios
    eu = np.exp(up - shift)
    ed = np.exp(dn - shift)
    mu = eu + ed
    lam = eu - ed
    denom = SQRT2 * mu.sum()
    heads = mu / denom
    # ybar_i = lam_i/(sqrt(2) S) * alpha_i/||alpha_i||.  When a row of
    # alpha vanishes lam_i = 0 as well, so the denormal-guarded divisor
    # yields exactly zero without a masked divide.
    scale = lam / (denom * np.maximum(anorm, 1e-300))
    bars = scale[:, None] * alpha
    return MaxPlayerState(alpha, beta, ProductElement._wrap(bars, heads))


@dataclass
class OracleResponse:
    """Best response of the min player to one max-player iterate.

    ``x`` is owned by the caller's domain; the solver only requires it to
    be a tuple of float arrays/scalars so running means stay well defined
    (valid because the min player's feasible set is convex).
    """

    x: tuple
    payoff: ProductElement
    oracle_value: float


@dataclass
class GameProblem:
    """Min-player description: best-response oracle plus the payoff map."""

    oracle: Callable[[ProductElement], OracleResponse]
    payoff_map: Callable[[tuple], ProductElement]
    n: int
    d: int


@dataclass
class NashCertificate:
    x_bar: tuple
    y_bar: ProductElement
    iterations_run: int
    gap_upper_bound: float


@dataclass
class EarlyTermination:
    """Returned when the per-iteration monitor requested a stop."""

    reason: object
    x_bar: tuple
    y_bar: ProductElement
    iterations_run: int


class _RunningMean:
    """Component-wise running sums over tuples of arrays/scalars."""

    def __init__(self):
        self._sums = None
        self._count = 0

    def add(self, x: tuple):
        if self._sums is None:
            self._sums = [np.array(c, dtype=np.float64) for c in x]
        else:
            for s, c in zip(self._sums, x):
                s += c
        self._count += 1

    def mean(self) -> tuple:
        out = []
        for s in self._sums:
            m = s / self._count
            out.append(float(m) if m.ndim == 0 else m)
        return tuple(out)


def solve_game(
    problem: GameProblem,
    config: GameConfig,
    monitor: Optional[Callable[[int, float, ProductElement], object]] = None,
):
    """Run the scheduled horizon and return the averaged equilibrium pair.

    Parameters
    ----------
    problem : GameProblem
        Oracle and payoff map.  Every oracle response must keep the payoff
        spectral norm within ``config.rho``; a strict breach aborts the run
        with WidthBreach (the width-doubling restart owns any slack).
    config : GameConfig
    monitor : callable, optional
        Called as ``monitor(t, oracle_value, payoff)`` after the averages
        include iteration t.  A truthy return value stops the run and is
        handed back inside an EarlyTermination.

    Returns
    -------
    NashCertificate, or EarlyTermination if the monitor fired.

    Raises
    ------
    WidthBreach
        Payoff spectral norm strictly exceeded ``config.rho``.
    IterationCapExhausted
        The scheduled horizon was clipped by the cap.  The exception
        carries the partial certificate for the iterations actually run.

    Identical inputs produce bit-identical outputs: there is no
    randomness and no reduction-order nondeterminism anywhere.
    """
    t_run, eta, capped = schedule(config, problem.n)
    state = initial_state(problem.n, problem.d)
    x_mean = _RunningMean()
    ybar_sum = np.zeros((problem.n, problem.d))
    yhead_sum = np.zeros(problem.n)

    for t in range(1, t_run + 1):
        y = state.y
        resp = problem.oracle(y)
        observed = spectral_norm(resp.payoff)
        if observed > config.rho:
            raise WidthBreach(observed, config.rho)
        x_mean.add(resp.x)
        ybar_sum += y.bars
        yhead_sum += y.heads
        if monitor is not None:
            flag = monitor(t, resp.oracle_value, resp.payoff)
            if flag:
                return EarlyTermination(
                    reason=flag,
                    x_bar=x_mean.mean(),
                    y_bar=ProductElement(ybar_sum / t, yhead_sum / t),
                    iterations_run=t,
                )
        state = mwu_update(state, resp.payoff, eta, config.rho)

    certificate = NashCertificate(
        x_bar=x_mean.mean(),
        y_bar=ProductElement(ybar_sum / t_run, yhead_sum / t_run),
        iterations_run=t_run,
        gap_upper_bound=config.epsilon + config.delta,
    )
    if capped:
        raise IterationCapExhausted(
            f"scheduled horizon exceeds cap {config.max_iterations_cap}",
            partial=certificate,
        )
    return certificate
