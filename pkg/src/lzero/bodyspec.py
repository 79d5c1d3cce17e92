"""JSON body specifications.

A spec is an object with a ``kind`` and its parameters; combinations nest::

    {"kind": "mult_sum",
     "left": {"kind": "ball", "dim": 3},
     "right": {"kind": "directional_ellipsoid", "axis": [0, 0, 1], "a": 2, "b": 1}}

A bare list of ``{"xi", "a", "b", "weight"}`` objects is read as a product
of directional ellipsoids (a log-blend body).  Errors carry the JSON path of
the offending value, e.g. ``$.left.q``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bodies import (
    DirectionalEllipsoid,
    Ellipsoid,
    EuclideanBall,
    LinearImage,
    LogBlend,
    LqBall,
    MultSum,
    PSum,
    StarBody,
    Tabulated,
    poly_power_profile,
    revolution_body,
)
from .numerics import sphere_grid

__all__ = ["BodySpecError", "KINDS", "parse_body", "load_body", "body_from_spec", "dump_body"]

KINDS = (
    "ball",
    "lq",
    "directional_ellipsoid",
    "ellipsoid",
    "linear_image",
    "mult_sum",
    "p_sum",
    "log_blend",
    "ellipsoid_product",
    "revolution",
    "counterexample",
    "tabulated",
)


class BodySpecError(ValueError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(spec: dict, key: str, path: str):
    if key not in spec:
        raise BodySpecError(f"missing field {key!r}", path)
    return spec[key]


def _number(spec: dict, key: str, path: str) -> float:
    v = _get(spec, key, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise BodySpecError(f"expected a number, got {v!r}", f"{path}.{key}")
    return float(v)


def _int(spec: dict, key: str, path: str) -> int:
    v = _get(spec, key, path)
    if isinstance(v, bool) or not isinstance(v, int):
        raise BodySpecError(f"expected an integer, got {v!r}", f"{path}.{key}")
    return v


def _vector(spec: dict, key: str, path: str) -> np.ndarray:
    v = _get(spec, key, path)
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise BodySpecError("expected a list of numbers", f"{path}.{key}") from None
    if arr.ndim != 1:
        raise BodySpecError("expected a list of numbers", f"{path}.{key}")
    return arr


def _matrix(spec: dict, key: str, path: str) -> np.ndarray:
    v = _get(spec, key, path)
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise BodySpecError("expected a square matrix", f"{path}.{key}") from None
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise BodySpecError("expected a square matrix", f"{path}.{key}")
    return arr


def _product(items: list, path: str) -> LogBlend:
    parts, weights = [], []
    for i, item in enumerate(items):
        p = f"{path}[{i}]"
        if not isinstance(item, dict):
            raise BodySpecError("expected an object", p)
        parts.append(DirectionalEllipsoid(_vector(item, "xi", p), _number(item, "a", p), _number(item, "b", p)))
        weights.append(_number(item, "weight", p))
    if not parts:
        raise BodySpecError("empty product", path)
    return LogBlend(tuple(parts), np.array(weights))


def body_from_spec(spec, path: str = "$", dim: int | None = None) -> StarBody:
    """Build a body from a parsed spec; ``dim`` fills in a missing ``dim``."""
    if isinstance(spec, list):
        try:
            return _product(spec, path)
        except BodySpecError:
            raise
        except ValueError as exc:
            raise BodySpecError(str(exc), path) from None
    if not isinstance(spec, dict):
        raise BodySpecError(f"expected an object, got {type(spec).__name__}", path)
    kind = _get(spec, "kind", path)
    if kind not in KINDS:
        raise BodySpecError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", f"{path}.kind")
    try:
        body = _build(kind, spec, path, dim)
    except BodySpecError:
        raise
    except ValueError as exc:
        raise BodySpecError(str(exc), path) from None
    if "dim" in spec and body.dim != spec["dim"]:
        raise BodySpecError(f"dim {spec['dim']} does not match the body's dimension {body.dim}", f"{path}.dim")
    return body


def _dim(spec, path, dim):
    if "dim" in spec:
        return _int(spec, "dim", path)
    if dim is None:
        raise BodySpecError("missing field 'dim'", path)
    return dim


def _build(kind: str, spec: dict, path: str, dim: int | None) -> StarBody:
    if kind == "ball":
        return EuclideanBall(_dim(spec, path, dim))
    if kind == "lq":
        return LqBall(_dim(spec, path, dim), _number(spec, "q", path))
    if kind == "directional_ellipsoid":
        return DirectionalEllipsoid(_vector(spec, "axis", path), _number(spec, "a", path), _number(spec, "b", path))
    if kind == "ellipsoid":
        return Ellipsoid(_matrix(spec, "matrix", path))
    if kind == "linear_image":
        base = body_from_spec(_get(spec, "base", path), f"{path}.base", dim)
        return LinearImage(_matrix(spec, "matrix", path), base)
    if kind == "mult_sum":
        return MultSum(
            body_from_spec(_get(spec, "left", path), f"{path}.left", dim),
            body_from_spec(_get(spec, "right", path), f"{path}.right", dim),
        )
    if kind == "p_sum":
        return PSum(
            _number(spec, "p", path),
            body_from_spec(_get(spec, "left", path), f"{path}.left", dim),
            body_from_spec(_get(spec, "right", path), f"{path}.right", dim),
        )
    if kind == "log_blend":
        items = _get(spec, "parts", path)
        if not isinstance(items, list) or not items:
            raise BodySpecError("expected a non-empty list", f"{path}.parts")
        parts, weights = [], []
        for i, item in enumerate(items):
            p = f"{path}.parts[{i}]"
            if not isinstance(item, dict):
                raise BodySpecError("expected an object", p)
            weights.append(_number(item, "weight", p))
            parts.append(body_from_spec(_get(item, "body", p), f"{p}.body", dim))
        return LogBlend(tuple(parts), np.array(weights))
    if kind == "ellipsoid_product":
        items = _get(spec, "parts", path)
        if not isinstance(items, list):
            raise BodySpecError("expected a list", f"{path}.parts")
        return _product(items, f"{path}.parts")
    if kind == "revolution":
        n = _dim(spec, path, dim)
        coeffs = _vector(spec, "coeffs", path)
        power = _number(spec, "power", path)
        a_max = spec.get("a_max")
        descriptor = {"kind": "revolution", "dim": n, "coeffs": coeffs.tolist(), "power": power}
        if a_max is not None:
            descriptor["a_max"] = float(a_max)
        return revolution_body(poly_power_profile(coeffs, power), n, a_max, descriptor)
    if kind == "counterexample":
        from .experiments import counterexample_body

        N = _number(spec, "N", path)
        if N < 0:
            raise BodySpecError("N must be non-negative", f"{path}.N")
        return counterexample_body(N)
    if kind == "tabulated":
        n = _dim(spec, path, dim)
        res = _int(spec, "resolution", path)
        grid = sphere_grid(n, res)
        radii = _vector(spec, "radii", path)
        if len(radii) != len(grid):
            raise BodySpecError(f"expected {len(grid)} radii for this grid, got {len(radii)}", f"{path}.radii")
        return Tabulated(grid, radii)
    raise BodySpecError(f"unknown kind {kind!r}", f"{path}.kind")  # pragma: no cover


def parse_body(text: str, dim: int | None = None) -> StarBody:
    """Parse JSON text; syntax errors report line and column."""
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BodySpecError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from None
    return body_from_spec(spec, dim=dim)


def load_body(source: str, dim: int | None = None) -> StarBody:
    """Body from inline JSON, a file path, or a bare kind name such as ``ball``."""
    s = source.strip()
    if s.startswith("{") or s.startswith("["):
        return parse_body(s, dim)
    p = Path(s)
    if p.suffix == ".json" or p.is_file():
        try:
            text = p.read_text()
        except OSError as exc:
            raise BodySpecError(f"cannot read {s}: {exc.strerror}") from None
        return parse_body(text, dim)
    if s in KINDS:
        return body_from_spec({"kind": s}, dim=dim)
    raise BodySpecError(f"{s!r} is neither JSON, a readable file, nor a body kind")


def dump_body(K: StarBody) -> str:
    return json.dumps(K.to_spec(), sort_keys=True)
