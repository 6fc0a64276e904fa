"""Command-line interface.

Subcommands::

    sibsolve solve INSTANCE.json [--epsilon E] [--mode hard|soft] [--C C]
                                 [--max-iters N] [--output PATH] [--threads K]
    sibsolve validate INSTANCE.json
    sibsolve gen KIND [--n N] [--d D] [--m M] [--seed S] [--out PATH]
                      [--mode hard|soft] [--C C] [--epsilon E]

Exit codes: 0 success; 1 parse/validation error; 2 degenerate instance
(the bodies share a common point); 3 iteration budget exhausted (a
partial result is still written, with ``"converged": false``).

All diagnostics go to stderr; the result JSON goes to --output or
stdout.  Instance generation uses numpy's default_rng (PCG64), so a
fixed seed reproduces the file byte for byte.  Results are deterministic
for fixed inputs; --threads only sizes the per-body oracle fan-out and
cannot change any output because partial results merge in body order
(the current oracles are vectorized batch operations, for which the
fan-out width is moot).
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .bodies import Aabb, Ball, Ellipsoid, Polytope, ReducedPolytope
from .errors import DegenerateInstance, IterationCapExhausted
from .instance_io import (
    Instance,
    InstanceError,
    dump_json,
    hard_result_to_dict,
    instance_to_dict,
    load_instance,
    soft_result_to_dict,
)
from .mwu import DEFAULT_ITERATION_CAP
from .sib import SibInstance, solve_sib
from .soft import SoftSibInstance, solve_soft_sib

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DEGENERATE = 2
EXIT_CAP = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sibsolve",
        description="Smallest intersecting ball solver (hard and soft margin).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve an instance file")
    p_solve.add_argument("instance", help="path to the instance JSON")
    p_solve.add_argument("--epsilon", type=float, default=None, help="override the error target")
    p_solve.add_argument("--mode", choices=("hard", "soft"), default=None, help="override the mode")
    p_solve.add_argument("--C", type=float, default=None, help="override the slack penalty (soft)")
    p_solve.add_argument(
        "--max-iters", type=int, default=DEFAULT_ITERATION_CAP, help="total oracle-call budget"
    )
    p_solve.add_argument("--output", default=None, help="result path (default: stdout)")
    p_solve.add_argument(
        "--threads", type=int, default=1, help="per-body oracle fan-out width (>= 1)"
    )

    p_val = sub.add_parser("validate", help="parse and check an instance file")
    p_val.add_argument("instance", help="path to the instance JSON")

    p_gen = sub.add_parser("gen", help="generate a random instance")
    p_gen.add_argument(
        "kind", choices=("polytope", "reduced_polytope", "aabb", "ball", "ellipsoid")
    )
    p_gen.add_argument("--n", type=int, default=5, help="number of bodies")
    p_gen.add_argument("--d", type=int, default=2, help="dimension")
    p_gen.add_argument("--m", type=int, default=4, help="points per hull body")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", default=None, help="output path (default: stdout)")
    p_gen.add_argument("--mode", choices=("hard", "soft"), default="hard")
    p_gen.add_argument("--C", type=float, default=None)
    p_gen.add_argument("--epsilon", type=float, default=0.05)
    return parser


def _random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def generate_instance(kind, n, d, m, seed, mode="hard", C=None, epsilon=0.05) -> Instance:
    """Random well-separated instance of one body class.

    Body anchors sit on a shell of radius 2 with mild jitter and each
    body has extent well below the anchor spacing, so the bodies have no
    common point and the optimal radius is a healthy fraction of the
    crude bound.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if d < 1:
        raise ValueError("need d >= 1")
    if m < 1:
        raise ValueError("need m >= 1")
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n, d))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-12)
    anchors = dirs * (2.0 + 0.3 * rng.uniform(-1.0, 1.0, size=(n, 1)))

    bodies = []
    for i in range(n):
        c = anchors[i]
        if kind == "ball":
            bodies.append(Ball(c, float(rng.uniform(0.05, 0.3))))
        elif kind == "aabb":
            half = rng.uniform(0.05, 0.3, size=d)
            bodies.append(Aabb(c - half, c + half))
        elif kind == "polytope":
            pts = c + rng.uniform(-0.3, 0.3, size=(m, d))
            bodies.append(Polytope(pts))
        elif kind == "reduced_polytope":
            pts = c + rng.uniform(-0.3, 0.3, size=(m, d))
            nu = float(rng.uniform(1.0 / m, 1.0))
            bodies.append(ReducedPolytope(pts, nu))
        else:  # ellipsoid
            q = _random_orthogonal(rng, d)
            evals = rng.uniform(12.0, 100.0, size=d)  # semi-axes ~0.1..0.3
            sigma = (q * evals) @ q.T
            sigma = 0.5 * (sigma + sigma.T)
            bodies.append(Ellipsoid(c, sigma))

    if mode == "soft" and C is None:
        C = 0.5
    return Instance(dimension=d, bodies=bodies, mode=mode, epsilon=epsilon, C=C)


def _cmd_solve(args) -> int:
    try:
        instance = load_instance(args.instance)
    except OSError as exc:
        print(f"error: cannot read {args.instance}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.epsilon is not None:
        instance.epsilon = args.epsilon
    if args.mode is not None:
        instance.mode = args.mode
    if args.C is not None:
        instance.C = args.C
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    if instance.mode == "soft" and instance.C is None:
        print("error: soft mode requires C (file field or --C)", file=sys.stderr)
        return EXIT_INVALID
    if not instance.epsilon > 0:
        print("error: epsilon must be positive", file=sys.stderr)
        return EXIT_INVALID

    start = time.perf_counter()
    converged = True
    try:
        if instance.mode == "hard":
            solution = solve_sib(
                SibInstance(instance.bodies, instance.epsilon), max_iterations=args.max_iters
            )
        else:
            solution = solve_soft_sib(
                SoftSibInstance(instance.bodies, instance.C, instance.epsilon),
                max_iterations=args.max_iters,
            )
    except DegenerateInstance as exc:
        print(f"error: degenerate instance: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except IterationCapExhausted as exc:
        if exc.partial is None:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CAP
        solution = exc.partial
        converged = False
        print(f"warning: {exc}; emitting partial result", file=sys.stderr)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    wall_ms = 1000.0 * (time.perf_counter() - start)
    if instance.mode == "hard":
        doc = hard_result_to_dict(solution, wall_ms, converged)
    else:
        doc = soft_result_to_dict(solution, wall_ms, converged)
    text = dump_json(doc, args.output)
    if args.output is None:
        print(text)
    return EXIT_OK if converged else EXIT_CAP


def _cmd_validate(args) -> int:
    try:
        load_instance(args.instance)
    except OSError as exc:
        print(f"error: cannot read {args.instance}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print("ok", file=sys.stderr)
    return EXIT_OK


def _cmd_gen(args) -> int:
    try:
        instance = generate_instance(
            args.kind, args.n, args.d, args.m, args.seed,
            mode=args.mode, C=args.C, epsilon=args.epsilon,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = dump_json(instance_to_dict(instance), args.out)
    if args.out is None:
        print(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "solve":
        return _cmd_solve(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_gen(args)


if __name__ == "__main__":
    sys.exit(main())
