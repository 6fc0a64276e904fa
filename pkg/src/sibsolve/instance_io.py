"""JSON instance and result files.

Instance schema::

    {
      "dimension": 2,
      "mode": "hard" | "soft",
      "epsilon": 0.05,
      "C": 0.5,                      # soft mode only
      "bodies": [
        {"type": "polytope", "points": [[...], ...]},
        {"type": "reduced_polytope", "points": [[...], ...], "nu": 0.5},
        {"type": "aabb", "lo": [...], "hi": [...]},
        {"type": "ball", "center": [...], "radius": 1.0},
        {"type": "ellipsoid", "center": [...], "sigma": [[...], ...]}
      ]
    }

Matrices are row-major nested lists.  Numbers are emitted with Python's
shortest round-trip repr, so parse(emit(x)) is the identity bit for bit.
Every body invariant is re-validated on load and violations name the
offending field (e.g. ``bodies[3].nu``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .bodies import Aabb, Ball, ConvexBody, Ellipsoid, Polytope, ReducedPolytope

BODY_TYPES = ("polytope", "reduced_polytope", "aabb", "ball", "ellipsoid")
MODES = ("hard", "soft")


class InstanceError(ValueError):
    """Malformed or invariant-violating instance data."""


@dataclass
class Instance:
    dimension: int
    bodies: List[ConvexBody]
    mode: str = "hard"
    epsilon: float = 0.05
    C: Optional[float] = None


def _vector(obj, length, where):
    if not isinstance(obj, list) or len(obj) != length:
        raise InstanceError(f"{where}: expected a list of {length} numbers")
    try:
        vec = np.asarray(obj, dtype=np.float64)
    except (TypeError, ValueError):
        raise InstanceError(f"{where}: entries must be numbers") from None
    if vec.shape != (length,) or not np.all(np.isfinite(vec)):
        raise InstanceError(f"{where}: entries must be finite numbers")
    return vec


def _matrix(obj, cols, where):
    if not isinstance(obj, list) or not obj:
        raise InstanceError(f"{where}: expected a non-empty list of rows")
    return np.stack([_vector(row, cols, f"{where}[{i}]") for i, row in enumerate(obj)])


def body_from_spec(spec, dimension, index) -> ConvexBody:
    where = f"bodies[{index}]"
    if not isinstance(spec, dict):
        raise InstanceError(f"{where}: expected an object")
    kind = spec.get("type")
    if kind not in BODY_TYPES:
        raise InstanceError(f"{where}.type: expected one of {BODY_TYPES}, got {kind!r}")
    try:
        if kind == "polytope":
            return Polytope(_matrix(spec.get("points"), dimension, f"{where}.points"))
        if kind == "reduced_polytope":
            points = _matrix(spec.get("points"), dimension, f"{where}.points")
            nu = spec.get("nu")
            if not isinstance(nu, (int, float)):
                raise InstanceError(f"{where}.nu: expected a number")
            return ReducedPolytope(points, float(nu))
        if kind == "aabb":
            return Aabb(
                _vector(spec.get("lo"), dimension, f"{where}.lo"),
                _vector(spec.get("hi"), dimension, f"{where}.hi"),
            )
        if kind == "ball":
            radius = spec.get("radius")
            if not isinstance(radius, (int, float)):
                raise InstanceError(f"{where}.radius: expected a number")
            return Ball(_vector(spec.get("center"), dimension, f"{where}.center"), float(radius))
        # ellipsoid
        center = _vector(spec.get("center"), dimension, f"{where}.center")
        sigma = _matrix(spec.get("sigma"), dimension, f"{where}.sigma")
        if sigma.shape[0] != dimension:
            raise InstanceError(f"{where}.sigma: expected a {dimension}x{dimension} matrix")
        return Ellipsoid(center, sigma)
    except InstanceError:
        raise
    except ValueError as exc:
        raise InstanceError(f"{where}: {exc}") from None


def body_to_spec(body: ConvexBody) -> dict:
    if isinstance(body, Polytope):
        return {"type": "polytope", "points": body.points.tolist()}
    if isinstance(body, ReducedPolytope):
        return {"type": "reduced_polytope", "points": body.points.tolist(), "nu": body.nu}
    if isinstance(body, Aabb):
        return {"type": "aabb", "lo": body.lo.tolist(), "hi": body.hi.tolist()}
    if isinstance(body, Ball):
        return {"type": "ball", "center": body.center.tolist(), "radius": body.radius}
    if isinstance(body, Ellipsoid):
        return {"type": "ellipsoid", "center": body.center.tolist(), "sigma": body.sigma.tolist()}
    raise TypeError(f"unsupported body type {type(body).__name__}")


def instance_from_dict(doc) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceError("top level: expected an object")
    dimension = doc.get("dimension")
    if not isinstance(dimension, int) or dimension < 1:
        raise InstanceError("dimension: expected a positive integer")
    mode = doc.get("mode", "hard")
    if mode not in MODES:
        raise InstanceError(f"mode: expected one of {MODES}, got {mode!r}")
    epsilon = doc.get("epsilon", 0.05)
    if not isinstance(epsilon, (int, float)) or not (0 < float(epsilon) < math.inf):
        raise InstanceError("epsilon: expected a positive number")
    c_value = doc.get("C")
    if mode == "soft":
        if not isinstance(c_value, (int, float)) or not float(c_value) > 0:
            raise InstanceError("C: soft mode requires a positive number")
        c_value = float(c_value)
    elif c_value is not None:
        if not isinstance(c_value, (int, float)):
            raise InstanceError("C: expected a number")
        c_value = float(c_value)
    raw_bodies = doc.get("bodies")
    if not isinstance(raw_bodies, list) or len(raw_bodies) < 2:
        raise InstanceError("bodies: expected a list with at least two entries")
    bodies = [body_from_spec(spec, dimension, i) for i, spec in enumerate(raw_bodies)]
    return Instance(dimension=dimension, bodies=bodies, mode=mode, epsilon=float(epsilon), C=c_value)


def instance_to_dict(instance: Instance) -> dict:
    doc = {
        "dimension": instance.dimension,
        "mode": instance.mode,
        "epsilon": instance.epsilon,
    }
    if instance.C is not None:
        doc["C"] = instance.C
    doc["bodies"] = [body_to_spec(b) for b in instance.bodies]
    return doc


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"invalid JSON: {exc}") from None
    return instance_from_dict(doc)


def dump_json(doc, path=None) -> str:
    text = json.dumps(doc, indent=2)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


def hard_result_to_dict(solution, wall_time_ms, converged=True) -> dict:
    return {
        "radius": solution.radius,
        "center": solution.center.tolist(),
        "witnesses": solution.witnesses.tolist(),
        "nu_x": solution.nu_x,
        "nu_y": solution.nu_y,
        "iterations": solution.total_iterations,
        "width_doublings": solution.width_doublings,
        "radius_halvings": solution.radius_halvings,
        "converged": converged,
        "wall_time_ms": wall_time_ms,
    }


def soft_result_to_dict(solution, wall_time_ms, converged=True) -> dict:
    return {
        "radius": solution.radius,
        "center": solution.center.tolist(),
        "witnesses": solution.witnesses.tolist(),
        "slacks": solution.slacks.tolist(),
        "objective": solution.objective,
        "iterations": solution.total_iterations,
        "width_doublings": solution.width_doublings,
        "bracket_steps": solution.bracket_steps,
        "converged": converged,
        "wall_time_ms": wall_time_ms,
    }
