"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as
they complete.
"""

import json
import math
import time

import numpy as np
from sibsolve import (
    Ball,
    BodyPack,
    GameConfig,
    GameProblem,
    Polytope,
    ProductElement,
    SibInstance,
    SocElement,
    SoftSibInstance,
    contains,
    crude_radius_bound,
    in_cone,
    schedule,
    sib_oracle,
    soc_exp,
    soc_jordan,
    solve_game,
    solve_sib,
    solve_soft_sib,
    spectral_decompose,
    trace_inner,
    xi_r_suboracle,
)
from sibsolve.cli import main
from sibsolve.eja import SQRT2, soc_reconstruct
from sibsolve.reference import ref_lmo, ref_sib, ref_soft_sib
from sibsolve import lmo
from conftest import BODY_KINDS, make_body, shell_anchors, shell_instance
from test_soft import brute_force_best, _suboracle_objective


def _report(num, name, ok, detail=""):
    line = f"[criterion {num:2d}] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def test_criterion_01_algebra_suite():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    bad = 0
    total = 10_000
    dims = (1, 2, 8, 64)
    per_dim = total // len(dims)
    for d in dims:
        for _ in range(per_dim):
            x = SocElement(rng.normal(size=d) * 3.0, float(rng.normal() * 3.0))
            s = spectral_decompose(x)
            scale = max(1.0, abs(s.lambda1), abs(s.lambda2))
            # idempotent system
            q1 = SocElement(s.u / SQRT2, 1.0 / SQRT2)
            q2 = SocElement(-s.u / SQRT2, 1.0 / SQRT2)
            orth = soc_jordan(q1, q2)
            sq = soc_jordan(q1, q1)
            if np.linalg.norm(orth.bar) > 1e-10 or abs(orth.head) > 1e-10:
                bad += 1
            if np.linalg.norm(sq.bar - q1.bar) > 1e-10 or abs(sq.head - q1.head) > 1e-10:
                bad += 1
            # reconstruction
            back = soc_reconstruct(s)
            if (
                np.linalg.norm(back.bar - x.bar) > 1e-10 * scale
                or abs(back.head - x.head) > 1e-10 * scale
            ):
                bad += 1
            # exp-eigenvalue commutation, 1e-10 relative to the result's
            # spectral scale (the small eigenvalue cannot carry its own
            # relative accuracy through the float64 (bar, head) carrier
            # once exp(l1)/exp(l2) exceeds 1/eps_machine)
            e = soc_exp(x)
            se = spectral_decompose(e)
            exp_scale = max(1.0, math.exp(s.lambda1))
            if abs(se.lambda1 - math.exp(s.lambda1)) > 1e-10 * exp_scale:
                bad += 1
            if abs(se.lambda2 - math.exp(s.lambda2)) > 1e-10 * exp_scale:
                bad += 1
            if not in_cone(ProductElement.from_blocks([e]), 0.0):
                bad += 1
    # self-duality on random cone pairs
    for _ in range(2000):
        d = int(rng.choice(dims))
        bar1, bar2 = rng.normal(size=d), rng.normal(size=d)
        x = ProductElement.from_blocks(
            [SocElement(bar1, float(np.linalg.norm(bar1) + abs(rng.normal())))]
        )
        y = ProductElement.from_blocks(
            [SocElement(bar2, float(np.linalg.norm(bar2) + abs(rng.normal())))]
        )
        if trace_inner(x, y) < -1e-10 * max(1.0, float(np.linalg.norm(bar1) * np.linalg.norm(bar2))):
            bad += 1
    elapsed = time.perf_counter() - t0
    _report(1, "algebra identities on 1e4 elements", bad == 0 and elapsed < 5.0,
            f"{bad} violations, {elapsed:.2f}s")


def test_criterion_02_lmo_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    coeff_bad = 0
    for kind in BODY_KINDS:
        for _ in range(200):
            d = int(rng.integers(1, 5))
            m = int(rng.integers(1, 8))
            body = make_body(kind, rng, rng.normal(size=d), m=m, extent=1.0)
            h = rng.normal(size=d)
            mine = lmo(body, h)
            ref = ref_lmo(body, h)
            scale = max(1.0, abs(ref.value))
            worst = max(worst, abs(mine.value - ref.value) / scale)
            if kind == "reduced_polytope":
                q = mine.coefficients
                if (
                    np.any(q < -1e-12)
                    or np.any(q > body.nu + 1e-12)
                    or abs(float(q.sum()) - 1.0) > 1e-12
                ):
                    coeff_bad += 1
    _report(2, "per-class LMO equals brute force (1000 cases)",
            worst <= 1e-7 and coeff_bad == 0, f"worst rel err {worst:.2e}")


def test_criterion_03_nash_gap_at_schedule():
    pack = BodyPack([Polytope([[0.0, 0.0]]), Polytope([[2.0, 0.0]])])
    eps_rel, r_hat = 0.1, 1.0
    rho = 2.0 / SQRT2  # exact payoff width for this instance (diameter 2)
    eps_add = eps_rel * r_hat / SQRT2
    config = GameConfig(epsilon=eps_add, rho=rho)
    expected_t = math.ceil(4.0 * rho**2 * math.log(4.0) / eps_add**2)
    sched = schedule(config, 2)
    problem = GameProblem(
        oracle=lambda y: sib_oracle(pack, y),
        payoff_map=lambda x: ProductElement(x[1] - x[0], np.zeros(2)),
        n=2, d=2,
    )
    cert = solve_game(problem, config)
    nu_x = float(np.linalg.norm(cert.x_bar[1] - cert.x_bar[0], axis=1).max()) / SQRT2
    nu_y = sib_oracle(pack, cert.y_bar).oracle_value
    gap = nu_x - nu_y
    ok = (
        sched.iterations == expected_t
        and cert.iterations_run == expected_t
        and gap <= SQRT2 * eps_rel * r_hat
    )
    _report(3, "duality gap within sqrt(2)*eps*r at the scheduled horizon", ok,
            f"T={sched.iterations} (formula {expected_t}), gap={gap:.4f} <= {SQRT2 * eps_rel:.4f}")


def test_criterion_04_hard_optimality_per_class():
    rng = np.random.default_rng(99)
    t0 = time.perf_counter()
    worst_excess = -1.0
    worst_resid = 0.0
    count = 0
    for kind in BODY_KINDS:
        for i in range(50):
            n = 2 + (i % 7)  # spans 2..8
            d = 2 + (i % 2)  # spans 2..3
            m = int(rng.integers(1, 8))
            bodies = shell_instance(kind, rng, n, d, m=m)
            sol = solve_sib(SibInstance(bodies, 0.05))
            ref = ref_sib(bodies, tol=1e-6)
            worst_excess = max(worst_excess, sol.radius - (1.05 * ref.value + 1e-6))
            dists = np.linalg.norm(sol.witnesses - sol.center, axis=1)
            worst_resid = max(worst_resid, float(dists.max()) - sol.radius)
            for j, body in enumerate(bodies):
                coeffs = sol.witness_coefficients[j] if sol.witness_coefficients else None
                assert contains(body, sol.witnesses[j], 1e-9, coefficients=coeffs)
            count += 1
    elapsed = time.perf_counter() - t0
    ok = worst_excess <= 0.0 and worst_resid <= 1e-9 and elapsed < 300.0
    _report(4, f"hard solver within 1.05x reference on {count} instances", ok,
            f"max excess {worst_excess:.2e}, max residual {worst_resid:.2e}, {elapsed:.1f}s")


def test_criterion_05_known_optima():
    singles = solve_sib(
        SibInstance([Polytope([[0.0, 0.0]]), Polytope([[2.0, 0.0]])], 0.05)
    )
    segments = solve_sib(
        SibInstance(
            [Polytope([[0.0, 0.0], [1.0, 0.0]]), Polytope([[0.0, 1.0], [1.0, 1.0]])], 0.05
        )
    )
    balls = solve_sib(
        SibInstance([Ball([0.0, 0.0], 0.5), Ball([4.0, 0.0], 0.5)], 0.05)
    )
    ok = (
        1.0 - 1e-9 <= singles.radius <= 1.05
        and 0.5 - 1e-9 <= segments.radius <= 0.525
        and 1.5 - 1e-9 <= balls.radius <= 1.575
    )
    _report(5, "known optima (points 1.0, segments 0.5, balls 1.5)", ok,
            f"got {singles.radius:.4f}, {segments.radius:.4f}, {balls.radius:.4f}")


def test_criterion_06_soft_regimes():
    rng = np.random.default_rng(17)
    bodies = shell_instance("ball", rng, 4, 2)
    e_bound, _ = crude_radius_bound(bodies)
    hard = solve_sib(SibInstance(bodies, 0.05))

    stiff = solve_soft_sib(SoftSibInstance(bodies, 2.0, 0.05))
    ok_stiff = (
        float(stiff.slacks.sum()) <= 1e-6 * e_bound
        and abs(stiff.radius - hard.radius) <= 0.05 * hard.radius
    )

    c_small = 1.0 / (2 * len(bodies))
    loose = solve_soft_sib(SoftSibInstance(bodies, c_small, 0.05))
    ref = ref_soft_sib(bodies, c_small, tol=1e-6)
    ok_loose = (
        loose.radius <= 1e-6 * e_bound
        and abs(loose.objective - ref.value) <= 0.05 * ref.value + 1e-6
    )
    _report(6, "soft regimes (C=2 slack-free, C=1/(2n) radius-free)",
            ok_stiff and ok_loose,
            f"sum(xi)={float(stiff.slacks.sum()):.1e}, r={loose.radius:.1e}, "
            f"obj={loose.objective:.4f} vs ref {ref.value:.4f}")


def test_criterion_07_soft_optimality_svdd():
    rng = np.random.default_rng(23)
    t0 = time.perf_counter()
    worst_excess = -1.0
    shrink_ok = True
    for i in range(30):
        n = int(rng.integers(4, 9))
        d = int(rng.integers(2, 4))
        pts = shell_anchors(rng, n, d)
        bodies = [Polytope(pts[j : j + 1]) for j in range(n)]
        c_val = float(rng.uniform(1.0 / n, 1.0))
        sol = solve_soft_sib(SoftSibInstance(bodies, c_val, 0.05))
        ref = ref_soft_sib(bodies, c_val, tol=1e-6)
        worst_excess = max(worst_excess, sol.objective - (1.05 * ref.value + 1e-6))
        for a, b in zip(sol.bracket_widths, sol.bracket_widths[1:]):
            if b != a * (2.0 / 3.0):
                shrink_ok = False
    elapsed = time.perf_counter() - t0
    ok = worst_excess <= 0.0 and shrink_ok
    _report(7, "soft solver within 1.05x reference on 30 point instances", ok,
            f"max excess {worst_excess:.2e}, bracket factor exact: {shrink_ok}, {elapsed:.1f}s")


def test_criterion_08_suboracle_vertex_enumeration():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 5))
        c_val = float(rng.uniform(0.2, 1.2))
        box = float(rng.uniform(0.5, 3.0))
        alpha_hat = float(rng.uniform(0.05, 1.0) * box)
        y = rng.uniform(0.0, 1.0 / SQRT2, size=n)
        xi, r = xi_r_suboracle(y, c_val, alpha_hat, box)
        best = brute_force_best(y, c_val, alpha_hat, box)
        worst = max(worst, abs(_suboracle_objective(y, xi, r) - best))
    _report(8, "slack/radius sub-oracle equals vertex enumeration (500 cases)",
            worst <= 1e-9, f"worst abs err {worst:.2e}")


def test_criterion_09_width_doubling_robustness():
    # first vertices mutually close, hulls ~3.6x wider than the crude
    # bound; the vertical gap fixes the optimum at 0.5 per construction
    cases = []
    for rot in (0.0, 0.7, 2.1):
        cmat = np.array([[math.cos(rot), -math.sin(rot)], [math.sin(rot), math.cos(rot)]])
        shift = np.array([rot, -2.0 * rot])
        a = Polytope((np.array([[0.0, 0.0], [1.75, 0.0]]) @ cmat.T) + shift)
        b = Polytope((np.array([[0.0, 1.0], [-1.75, 1.0]]) @ cmat.T) + shift)
        cases.append([a, b])
    ok = True
    details = []
    for bodies in cases:
        e_bound, _ = crude_radius_bound(bodies)
        sol = solve_sib(SibInstance(bodies, 0.05))
        good = sol.width_doublings <= 3 and 0.5 - 1e-9 <= sol.radius <= 0.5 * 1.05 + 1e-9
        ok = ok and good
        details.append(f"r={sol.radius:.4f} dbl={sol.width_doublings}")
    _report(9, "width doubling converges when E hides the diameter", ok, "; ".join(details))


def test_criterion_10_cli_end_to_end(tmp_path, capsys):
    # exit codes and determinism on a tiny instance
    doc = {
        "dimension": 2, "mode": "hard", "epsilon": 0.05,
        "bodies": [
            {"type": "polytope", "points": [[0.0, 0.0]]},
            {"type": "polytope", "points": [[2.0, 0.0]]},
        ],
    }
    inst = tmp_path / "inst.json"
    inst.write_text(json.dumps(doc))
    ok = main(["solve", str(inst)]) == 0
    first = json.loads(capsys.readouterr().out)
    ok = ok and 1.0 - 1e-9 <= first["radius"] <= 1.05
    main(["solve", str(inst)])
    second = json.loads(capsys.readouterr().out)
    first.pop("wall_time_ms"), second.pop("wall_time_ms")
    ok = ok and first == second

    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    ok = ok and main(["solve", str(bad)]) == 1
    capsys.readouterr()

    doc_deg = dict(doc)
    doc_deg["bodies"] = [
        {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
        {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
    ]
    deg = tmp_path / "deg.json"
    deg.write_text(json.dumps(doc_deg))
    ok = ok and main(["solve", str(deg)]) == 2
    capsys.readouterr()

    # generated n=100, d=10 ball instance at eps=0.1 under the time box
    big = tmp_path / "big.json"
    out = tmp_path / "big_result.json"
    ok = ok and main(["gen", "ball", "--n", "100", "--d", "10", "--seed", "3",
                      "--out", str(big)]) == 0
    t0 = time.perf_counter()
    ok = ok and main(["solve", str(big), "--epsilon", "0.1", "--output", str(out)]) == 0
    elapsed = time.perf_counter() - t0
    result = json.loads(out.read_text())
    ok = ok and elapsed < 60.0 and result["converged"] and result["radius"] > 0
    _report(10, "CLI determinism, exit codes, n=100 d=10 end-to-end", ok,
            f"big solve {elapsed:.1f}s, radius {result['radius']:.3f}")
