"""Compiled chunk kernels against the generic numpy iteration."""

import numpy as np
import pytest

import sibsolve._kernels as K
from sibsolve import BodyPack, SibInstance, SoftSibInstance
from sibsolve.eja import SQRT2
from sibsolve.mwu import initial_state, mwu_update
from sibsolve.sib import _HardOracle, solve_sib
from sibsolve.soft import _SoftOracle, solve_soft_sib
from conftest import BODY_KINDS, make_body, shell_anchors

pytestmark = pytest.mark.skipif(not K.AVAILABLE, reason="numba unavailable")


def _mixed_bodies(rng, d=3):
    anchors = shell_anchors(rng, len(BODY_KINDS), d)
    return [
        make_body(kind, rng, anchors[i], m=int(rng.integers(1, 6)), extent=0.5)
        for i, kind in enumerate(BODY_KINDS)
    ]


def _generic_hard_averages(bodies, t_run, eta, rho):
    pack = BodyPack(bodies)
    raw = _HardOracle(pack)
    n, d = pack.n, pack.d
    state = initial_state(n, d)
    z_sum = np.zeros(d)
    v_sum = np.zeros((n, d))
    ybar_sum = np.zeros((n, d))
    yhead_sum = np.zeros(n)
    for _ in range(t_run):
        resp = raw(state.y)
        z_sum += resp.x[0]
        v_sum += resp.x[1]
        ybar_sum += state.y.bars
        yhead_sum += state.y.heads
        state = mwu_update(state, resp.payoff, eta, rho)
    return z_sum / t_run, v_sum / t_run, ybar_sum / t_run, yhead_sum / t_run


def _fast_hard_averages(bodies, t_run, eta, rho):
    packed = K.PackedArrays(bodies)
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
    status, done, _ = K.hard_chunk(
        *packed.args(), alpha, beta_zero, ybar, yhead,
        z_sum, v_sum, q_sum, ybar_sum, yhead_sum,
        c, rho, t_run, packed.track_q,
    )
    assert status == 0 and done == t_run
    return z_sum / t_run, v_sum / t_run, ybar_sum / t_run, yhead_sum / t_run


def test_hard_chunk_matches_generic_loop(rng):
    bodies = _mixed_bodies(rng)
    t_run, eta, rho = 600, 0.05, 12.0
    fast = _fast_hard_averages(bodies, t_run, eta, rho)
    slow = _generic_hard_averages(bodies, t_run, eta, rho)
    for a, b in zip(fast, slow):
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_soft_chunk_matches_generic_loop(rng):
    bodies = _mixed_bodies(rng)
    pack = BodyPack(bodies)
    # budget comfortably above the optimum so the game value is <= 0 and
    # the run never stops on the infeasibility signal
    C, alpha_hat, box = 0.6, 4.0, 5.0
    t_run, eta, rho = 400, 0.05, 3.0 * box / SQRT2
    oracle = _SoftOracle(pack, C, alpha_hat, box)

    n, d = pack.n, pack.d
    state = initial_state(n, d)
    sums = {
        "z": np.zeros(d), "v": np.zeros((n, d)), "xi": np.zeros(n), "r": 0.0,
        "yb": np.zeros((n, d)), "yh": np.zeros(n),
    }
    for _ in range(t_run):
        resp = oracle(state.y)
        sums["z"] += resp.x[0]
        sums["v"] += resp.x[1]
        sums["xi"] += resp.x[-2]
        sums["r"] += resp.x[-1]
        sums["yb"] += state.y.bars
        sums["yh"] += state.y.heads
        assert resp.oracle_value <= 0.0  # instance is feasible at this budget
        state = mwu_update(state, resp.payoff, eta, rho)

    packed = K.PackedArrays(bodies)
    import math

    beta_cap = min(box, alpha_hat / C)
    k_sub = math.ceil(alpha_hat / (C * beta_cap))
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
    status, done, _ = K.soft_chunk(
        *packed.args(), alpha, beta_acc, ybar, yhead,
        z_sum, v_sum, q_sum, xi_sum, r_sum, ybar_sum, yhead_sum,
        eta / (SQRT2 * rho), rho, t_run, packed.track_q,
        C, alpha_hat, beta_cap, k_sub, C / SQRT2,
    )
    assert status == 0 and done == t_run
    np.testing.assert_allclose(z_sum / t_run, sums["z"] / t_run, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(v_sum / t_run, sums["v"] / t_run, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(xi_sum / t_run, sums["xi"] / t_run, rtol=1e-9, atol=1e-12)
    assert r_sum[0] / t_run == pytest.approx(sums["r"] / t_run, rel=1e-9, abs=1e-12)
    np.testing.assert_allclose(ybar_sum / t_run, sums["yb"] / t_run, rtol=1e-9, atol=1e-12)


def test_full_solvers_agree_across_paths(rng, monkeypatch):
    bodies = _mixed_bodies(rng)
    fast = solve_sib(SibInstance(bodies, 0.1))
    import sibsolve.sib as sib_mod

    monkeypatch.setattr(sib_mod._kernels, "AVAILABLE", False)
    slow = solve_sib(SibInstance(bodies, 0.1))
    assert fast.radius == pytest.approx(slow.radius, rel=1e-8)
    np.testing.assert_allclose(fast.center, slow.center, atol=1e-7)
    assert fast.total_iterations == slow.total_iterations
    assert fast.radius_halvings == slow.radius_halvings


def test_soft_solvers_agree_across_paths(rng, monkeypatch):
    pts = shell_anchors(rng, 4, 2)
    bodies = [make_body("polytope", rng, pts[i], m=1) for i in range(4)]
    fast = solve_soft_sib(SoftSibInstance(bodies, 0.5, 0.1))
    import sibsolve.soft as soft_mod

    monkeypatch.setattr(soft_mod._kernels, "AVAILABLE", False)
    slow = solve_soft_sib(SoftSibInstance(bodies, 0.5, 0.1))
    assert fast.objective == pytest.approx(slow.objective, rel=1e-8)
    assert fast.bracket_steps == slow.bracket_steps
    assert fast.total_iterations == slow.total_iterations
