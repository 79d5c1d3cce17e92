"""Origin-symmetric star bodies given by their Minkowski functionals.

Every body evaluates its gauge on arrays of points of shape ``(..., n)``.
Bodies are immutable; combinations (multiplicative and p-sums, linear
images, log-blends) hold references to their operands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .numerics import (
    DEFAULT_TOL,
    SphereGrid,
    Tolerances,
    bracket_root,
    sphere_grid,
)

__all__ = [
    "StarBody",
    "EuclideanBall",
    "LqBall",
    "DirectionalEllipsoid",
    "Ellipsoid",
    "LinearImage",
    "MultSum",
    "LogBlend",
    "PSum",
    "Revolution",
    "Tabulated",
    "gauge",
    "radial",
    "mult_sum",
    "p_sum",
    "log_blend",
    "linear_image",
    "radial_distance",
    "revolution_body",
    "poly_power_profile",
]


def _rows(x: np.ndarray, n: int) -> tuple[np.ndarray, tuple]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"expected points in R^{n}, got shape {x.shape}")
    return x.reshape(-1, n), x.shape[:-1]


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("zero vector has no direction")
    return v / norm


class StarBody:
    """Base class: subclasses implement ``_gauge`` on an (m, n) array."""

    dim: int

    def gauge(self, x) -> np.ndarray | float:
        rows, shape = _rows(x, self.dim)
        out = np.zeros(len(rows))
        nz = np.any(rows != 0, axis=1)
        if nz.any():
            out[nz] = self._gauge(rows[nz])
        if shape == ():
            return float(out[0])
        return out.reshape(shape)

    def radial(self, u) -> np.ndarray | float:
        g = self.gauge(u)
        return 1.0 / g

    def contains(self, x) -> np.ndarray:
        return np.asarray(self.gauge(x)) <= 1.0

    def level(self, rows: np.ndarray) -> np.ndarray:
        """Continuous function of (m, n) points, <= 0 exactly on the body."""
        norm = np.linalg.norm(rows, axis=1)
        out = np.full(len(rows), -1.0)
        nz = norm > 0
        if nz.any():
            out[nz] = self._gauge(rows[nz]) - 1.0
        return out

    def axes(self) -> list[np.ndarray]:
        """Distinguished directions (symmetry axes), if any."""
        return []

    def _gauge(self, rows: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def enclosing_radius(self) -> float:
        """An upper bound for the radial function."""
        g = sphere_grid(self.dim, {2: 64, 3: 16, 4: 8}.get(self.dim, 4))
        return 1.5 * float(np.max(1.0 / self._gauge(g.nodes)))

    def support(self, xi) -> tuple[float, np.ndarray]:
        """``(h, x)`` with ``x`` a boundary point maximizing ``(x, xi)``.

        The generic version maximizes ``rho(u) (u, xi)`` over the sphere.
        """
        xi = _unit(xi)
        g = sphere_grid(self.dim, {2: 64, 3: 16, 4: 8}.get(self.dim, 4))
        vals = (g.nodes @ xi) / self._gauge(g.nodes)
        start = g.nodes[int(np.argmax(vals))]

        def neg(v):
            nv = np.linalg.norm(v)
            if nv == 0:
                return 0.0
            u = v / nv
            return -float(u @ xi) / float(self._gauge(u[None])[0])

        res = optimize.minimize(neg, start, method="Nelder-Mead",
                                options=dict(xatol=1e-12, fatol=1e-15, maxiter=4000))
        u = _unit(res.x if -res.fun >= vals.max() else start)
        x = u / float(self._gauge(u[None])[0])
        return float(x @ xi), x

    def to_spec(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} has no body-spec form")


@dataclass(frozen=True, eq=False)
class EuclideanBall(StarBody):
    dim: int

    def _gauge(self, rows):
        return np.linalg.norm(rows, axis=1)

    def enclosing_radius(self):
        return 1.0

    def support(self, xi):
        xi = _unit(xi)
        return 1.0, xi

    def to_spec(self):
        return {"kind": "ball", "dim": self.dim}


@dataclass(frozen=True, eq=False)
class LqBall(StarBody):
    """Unit ball of the l_q quasi-norm, q > 0."""

    dim: int
    q: float

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError("q must be positive")

    def _gauge(self, rows):
        a = np.abs(rows)
        m = a.max(axis=1)
        return m * np.sum((a / m[:, None]) ** self.q, axis=1) ** (1.0 / self.q)

    def enclosing_radius(self):
        return self.dim ** max(0.0, 0.5 - 1.0 / self.q)

    def support(self, xi):
        if self.q < 1:
            return super().support(xi)
        xi = _unit(xi)
        if self.q == 1:
            i = int(np.argmax(np.abs(xi)))
            x = np.zeros(self.dim)
            x[i] = np.sign(xi[i])
            return float(abs(xi[i])), x
        # dual exponent; the maximizer is sign(xi)|xi|^{q'-1} normalised
        qd = self.q / (self.q - 1.0)
        x = np.sign(xi) * np.abs(xi) ** (qd - 1.0)
        x = x / float(self._gauge(x[None])[0])
        return float(x @ xi), x

    def to_spec(self):
        return {"kind": "lq", "dim": self.dim, "q": self.q}


@dataclass(frozen=True, eq=False)
class DirectionalEllipsoid(StarBody):
    """Ellipsoid with semi-axis ``a`` along the unit vector ``axis`` and ``b`` across."""

    axis: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit(self.axis))
        if not (self.a > 0 and self.b > 0):
            raise ValueError("semi-axes must be positive")

    @property
    def dim(self) -> int:
        return len(self.axis)

    def _gauge(self, rows):
        along = rows @ self.axis
        perp = rows - along[:, None] * self.axis[None, :]
        return np.sqrt((along / self.a) ** 2 + np.sum(perp**2, axis=1) / self.b**2)

    def axes(self):
        return [self.axis.copy()]

    def matrix(self) -> np.ndarray:
        u = self.axis
        return np.outer(u, u) / self.a**2 + (np.eye(self.dim) - np.outer(u, u)) / self.b**2

    def enclosing_radius(self):
        return max(self.a, self.b)

    def support(self, xi):
        xi = _unit(xi)
        along = xi @ self.axis
        inv = self.a**2 * along * self.axis + self.b**2 * (xi - along * self.axis)
        h = math.sqrt(float(xi @ inv))
        return h, inv / h

    def scaled(self, c: float) -> "DirectionalEllipsoid":
        return DirectionalEllipsoid(self.axis, c * self.a, c * self.b)

    def to_spec(self):
        return {"kind": "directional_ellipsoid", "axis": self.axis.tolist(), "a": self.a, "b": self.b}


@dataclass(frozen=True, eq=False)
class Ellipsoid(StarBody):
    """{x : x^T M x <= 1} for symmetric positive definite ``matrix``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.allclose(m, m.T, rtol=0, atol=1e-12 * np.abs(m).max()):
            raise ValueError("ellipsoid matrix must be square and symmetric")
        if np.linalg.eigvalsh(m).min() <= 0:
            raise ValueError("ellipsoid matrix must be positive definite")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def _gauge(self, rows):
        return np.sqrt(np.einsum("ij,jk,ik->i", rows, self.matrix, rows))

    def enclosing_radius(self):
        return float(1.0 / math.sqrt(np.linalg.eigvalsh(self.matrix).min()))

    def support(self, xi):
        xi = _unit(xi)
        inv = np.linalg.solve(self.matrix, xi)
        h = math.sqrt(float(xi @ inv))
        return h, inv / h

    def to_spec(self):
        return {"kind": "ellipsoid", "matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class LinearImage(StarBody):
    """Body with gauge ``x -> gauge_base(T x)``, i.e. the set T^{-1} K."""

    T: np.ndarray
    base: StarBody

    def __post_init__(self):
        t = np.asarray(self.T, dtype=float)
        if t.shape != (self.base.dim, self.base.dim):
            raise ValueError(f"matrix shape {t.shape} does not match dimension {self.base.dim}")
        if not np.isfinite(np.linalg.cond(t)) or np.linalg.cond(t) > 1e12:
            raise ValueError("linear map is singular (condition number > 1e12)")
        object.__setattr__(self, "T", t)

    @property
    def dim(self) -> int:
        return self.base.dim

    def _gauge(self, rows):
        return self.base._gauge(rows @ self.T.T)

    def enclosing_radius(self):
        return float(np.linalg.norm(np.linalg.inv(self.T), 2) * self.base.enclosing_radius())

    def support(self, xi):
        xi = _unit(xi)
        w = np.linalg.solve(self.T.T, xi)
        nw = np.linalg.norm(w)
        h, y = self.base.support(w / nw)
        x = np.linalg.solve(self.T, y)
        return float(x @ xi), x

    def to_spec(self):
        return {"kind": "linear_image", "matrix": self.T.tolist(), "base": self.base.to_spec()}


def _check_dims(*bodies: StarBody) -> int:
    dims = {b.dim for b in bodies}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


@dataclass(frozen=True, eq=False)
class MultSum(StarBody):
    """Multiplicative sum: gauge sqrt(gauge_left * gauge_right)."""

    left: StarBody
    right: StarBody

    def __post_init__(self):
        _check_dims(self.left, self.right)

    @property
    def dim(self) -> int:
        return self.left.dim

    def _gauge(self, rows):
        return np.sqrt(self.left._gauge(rows) * self.right._gauge(rows))

    def enclosing_radius(self):
        return math.sqrt(self.left.enclosing_radius() * self.right.enclosing_radius())

    def to_spec(self):
        return {"kind": "mult_sum", "left": self.left.to_spec(), "right": self.right.to_spec()}


@dataclass(frozen=True, eq=False)
class LogBlend(StarBody):
    """Gauge prod_i gauge_i ** w_i with positive weights summing to one."""

    parts: tuple
    weights: np.ndarray

    def __post_init__(self):
        if not self.parts:
            raise ValueError("log-blend needs at least one part")
        _check_dims(*self.parts)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.parts),) or np.any(w <= 0):
            raise ValueError("weights must be positive, one per part")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {math.fsum(w)!r})")
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def _stack(self):
        # all-directional-ellipsoid blends are evaluated as one matrix product
        if not hasattr(self, "_stacked"):
            stacked = None
            if all(isinstance(p, DirectionalEllipsoid) for p in self.parts):
                axes = np.array([p.axis for p in self.parts])
                ia2 = np.array([1.0 / p.a**2 for p in self.parts])
                ib2 = np.array([1.0 / p.b**2 for p in self.parts])
                stacked = (axes, ia2 - ib2, ib2)
            object.__setattr__(self, "_stacked", stacked)
        return self._stacked

    def log_gauge(self, rows: np.ndarray) -> np.ndarray:
        stacked = self._stack()
        if stacked is not None:
            axes, da, ib2 = stacked
            out = np.empty(len(rows))
            sq = np.sum(rows**2, axis=1)
            for start in range(0, len(rows), 4096):
                blk = slice(start, start + 4096)
                proj = (rows[blk] @ axes.T) ** 2
                out[blk] = 0.5 * np.log(proj * da + sq[blk, None] * ib2) @ self.weights
            return out
        acc = np.zeros(len(rows))
        for w, part in zip(self.weights, self.parts):
            acc += w * np.log(part._gauge(rows))
        return acc

    def _gauge(self, rows):
        return np.exp(self.log_gauge(rows))

    def enclosing_radius(self):
        return float(np.exp(sum(w * math.log(p.enclosing_radius()) for w, p in zip(self.weights, self.parts))))

    def to_spec(self):
        return {
            "kind": "log_blend",
            "parts": [{"weight": float(w), "body": p.to_spec()} for w, p in zip(self.weights, self.parts)],
        }


@dataclass(frozen=True, eq=False)
class PSum(StarBody):
    """p-sum: gauge (gauge_left**p + gauge_right**p) ** (1/p), p in [-1, 1] minus 0."""

    p: float
    left: StarBody
    right: StarBody

    def __post_init__(self):
        _check_dims(self.left, self.right)
        if self.p == 0:
            raise ValueError("p = 0 is the multiplicative sum; use mult_sum")
        if not -1.0 <= self.p <= 1.0:
            raise ValueError("p-sums are supported for p in [-1, 1]")

    @property
    def dim(self) -> int:
        return self.left.dim

    def _gauge(self, rows):
        p = self.p
        return (self.left._gauge(rows) ** p + self.right._gauge(rows) ** p) ** (1.0 / p)

    def enclosing_radius(self):
        r1, r2 = self.left.enclosing_radius(), self.right.enclosing_radius()
        if self.p > 0:
            return min(r1, r2)
        return (r1 ** (-self.p) + r2 ** (-self.p)) ** (-1.0 / self.p)

    def to_spec(self):
        return {"kind": "p_sum", "p": self.p, "left": self.left.to_spec(), "right": self.right.to_spec()}


def poly_power_profile(coeffs: Sequence[float], power: float) -> Callable[[np.ndarray], np.ndarray]:
    """t -> (sum_k coeffs[k] t^k) ** power, clipped to 0 where the base is negative."""
    c = np.asarray(coeffs, dtype=float)

    def profile(t):
        t = np.asarray(t, dtype=float)
        base = np.polynomial.polynomial.polyval(t, c)
        return np.where(base > 0, np.abs(base) ** power, 0.0)

    return profile


@dataclass(frozen=True, eq=False)
class Revolution(StarBody):
    """{(y, s) : |s| <= a_max, |y| <= profile(s)} with ``s`` the last coordinate."""

    profile: Callable[[np.ndarray], np.ndarray]
    dim: int
    a_max: float
    descriptor: dict | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def contains(self, x):
        rows, shape = _rows(x, self.dim)
        return (self.level(rows) <= 0).reshape(shape)

    def level(self, rows):
        s = rows[:, -1]
        r = np.linalg.norm(rows[:, :-1], axis=1)
        f = self.profile(np.clip(s, -self.a_max, self.a_max))
        return np.maximum(np.abs(s) - self.a_max, r - f)

    def axes(self):
        e = np.zeros(self.dim)
        e[-1] = 1.0
        return [e]

    def _radii(self) -> tuple[float, float]:
        if "radii" not in self._cache:
            s = np.linspace(-self.a_max, self.a_max, 4001)
            f = self.profile(s)
            outer = math.sqrt(float(np.max(f)) ** 2 + self.a_max**2)
            self._cache["radii"] = outer
        return self._cache["radii"]

    def _gauge(self, rows):
        norm = np.linalg.norm(rows, axis=1)
        u = rows / norm[:, None]
        rho = ray_exit(self, np.zeros_like(u), u, 1.01 * self._radii())
        return norm / rho

    def enclosing_radius(self):
        return self._radii() * 1.01

    def support(self, xi):
        xi = _unit(xi)
        side = float(np.linalg.norm(xi[:-1]))
        s = np.linspace(-self.a_max, self.a_max, 4001)
        vals = s * xi[-1] + self.profile(s) * side
        k = int(np.argmax(vals))
        lo, hi = s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)]
        res = optimize.minimize_scalar(
            lambda t: -(t * xi[-1] + float(self.profile(np.array([t]))[0]) * side),
            bounds=(lo, hi), method="bounded", options=dict(xatol=1e-13),
        )
        s_best = float(res.x) if -res.fun >= vals[k] else float(s[k])
        radius = float(self.profile(np.array([s_best]))[0])
        x = np.zeros(self.dim)
        if side > 0:
            x[:-1] = radius * xi[:-1] / side
        x[-1] = s_best
        return float(x @ xi), x

    def to_spec(self):
        if self.descriptor is None:
            raise NotImplementedError("revolution body built from a bare callable has no body-spec form")
        return dict(self.descriptor)


@dataclass(frozen=True, eq=False)
class Tabulated(StarBody):
    """Radial function sampled on a sphere grid, interpolated between nodes."""

    grid: SphereGrid
    radii: np.ndarray
    interpolate: bool = True
    _tree: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.shape != (len(self.grid),) or not np.all(r > 0) or not np.all(np.isfinite(r)):
            raise ValueError("tabulated radii must be positive and finite, one per grid node")
        object.__setattr__(self, "radii", r)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def _radial_at(self, u):
        from scipy.spatial import cKDTree

        if not self._tree:
            self._tree.append(cKDTree(self.grid.nodes))
        tree = self._tree[0]
        k = min(2 * self.dim, len(self.grid))
        dist, idx = tree.query(u, k=k)
        exact = dist[:, 0] < 1e-12
        if not self.interpolate and not exact.all():
            bad = int(np.argmin(exact))
            raise ValueError(f"point {u[bad].tolist()} is not a grid node and interpolation is disabled")
        # chord -> angle; inverse-angle weights over the nearest nodes
        ang = 2.0 * np.arcsin(np.clip(dist / 2.0, 0.0, 1.0))
        w = 1.0 / np.maximum(ang, 1e-300)
        w /= w.sum(axis=1, keepdims=True)
        out = np.sum(w * self.radii[idx], axis=1)
        out[exact] = self.radii[idx[exact, 0]]
        return out

    def _gauge(self, rows):
        norm = np.linalg.norm(rows, axis=1)
        return norm / self._radial_at(rows / norm[:, None])

    def enclosing_radius(self):
        return float(self.radii.max())

    def to_spec(self):
        if self.grid.stochastic:
            raise NotImplementedError("tabulated bodies on stochastic grids have no body-spec form")
        return {"kind": "tabulated", "dim": self.dim, "resolution": self.grid.resolution, "radii": self.radii.tolist()}


def ray_exit(K: StarBody, origins: np.ndarray, dirs: np.ndarray, r_hi: float, max_iter: int = 200) -> np.ndarray:
    """Distance r at which ``origins + r * dirs`` leaves ``K``.

    Every origin must lie inside ``K`` and ``origins + r_hi * dirs`` outside.
    Uses the Illinois variant of regula falsi on ``K.level`` per ray, which
    keeps the bracket and converges superlinearly for smooth boundaries.
    """
    origins = np.asarray(origins, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    m = len(dirs)
    lo = np.zeros(m)
    hi = np.full(m, float(r_hi))
    flo = K.level(origins)
    fhi = K.level(origins + r_hi * dirs)
    if np.any(flo > 0):
        i = int(np.argmax(flo > 0))
        raise ValueError(f"ray origin {origins[i].tolist()} is outside the body")
    if np.any(fhi <= 0):
        raise ValueError(f"body extends beyond radius {r_hi}; bracket does not enclose the boundary")
    root = np.where(flo == 0, 0.0, np.nan)
    active = np.flatnonzero(flo < 0)
    side = np.zeros(m, dtype=int)
    scale = max(float(r_hi), 1.0)
    for _ in range(max_iter):
        if not len(active):
            break
        a, b, fa, fb = lo[active], hi[active], flo[active], fhi[active]
        x = (a * fb - b * fa) / (fb - fa)
        # fall back to bisection where the secant leaves the bracket
        bad = ~((x > a) & (x < b))
        x[bad] = 0.5 * (a[bad] + b[bad])
        fx = K.level(origins[active] + x[:, None] * dirs[active])
        left = fx <= 0
        prev = side[active]
        lo[active] = np.where(left, x, a)
        flo[active] = np.where(left, fx, np.where(prev == -1, 0.5 * fa, fa))
        hi[active] = np.where(left, b, x)
        fhi[active] = np.where(left, np.where(prev == 1, 0.5 * fb, fb), fx)
        side[active] = np.where(left, 1, -1)
        done = (np.abs(fx) <= 4 * np.finfo(float).eps) | (hi[active] - lo[active] <= 4 * np.finfo(float).eps * scale)
        root[active[done]] = x[done]
        active = active[~done]
    if len(active):
        root[active] = 0.5 * (lo[active] + hi[active])
    return root


# operations -----------------------------------------------------------------


def gauge(K: StarBody, x) -> np.ndarray | float:
    """Minkowski functional of ``K`` at ``x`` (vectorized over leading axes)."""
    return K.gauge(x)


def radial(K: StarBody, u) -> np.ndarray | float:
    return K.radial(u)


def mult_sum(K: StarBody, L: StarBody) -> MultSum:
    return MultSum(K, L)


def p_sum(p: float, K: StarBody, L: StarBody) -> PSum:
    return PSum(p, K, L)


def log_blend(parts: Sequence[StarBody], weights: Sequence[float]) -> LogBlend:
    return LogBlend(tuple(parts), np.asarray(weights, dtype=float))


def linear_image(T, K: StarBody) -> LinearImage:
    """Body whose gauge is ``gauge_K(T x)``."""
    return LinearImage(np.asarray(T, dtype=float), K)


def radial_distance(K: StarBody, L: StarBody, grid: SphereGrid | None = None) -> float:
    """max over grid nodes of |rho_K - rho_L|."""
    n = _check_dims(K, L)
    grid = grid or sphere_grid(n)
    return float(np.max(np.abs(1.0 / K._gauge(grid.nodes) - 1.0 / L._gauge(grid.nodes))))


def revolution_body(
    profile: Callable[[np.ndarray], np.ndarray],
    dim: int,
    a_max: float | None = None,
    descriptor: dict | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> Revolution:
    """Body of revolution about the last axis with an even, positive profile.

    ``a_max`` (the first zero of the profile) is located by bisection when
    not given.
    """
    if dim < 2:
        raise ValueError("revolution bodies need dim >= 2")
    f0 = float(profile(np.array([0.0]))[0])
    if not f0 > 0:
        raise ValueError("profile must be positive at 0")
    if a_max is None:
        hi = 1.0
        while float(profile(np.array([hi]))[0]) > 0:
            hi *= 2.0
            if hi > 1e8:
                raise ValueError("profile has no zero; body would be unbounded")
        a_max = bracket_root(lambda t: 1.0 if float(profile(np.array([t]))[0]) > 0 else -1.0, 0.0, hi, tol)
    s = np.linspace(0.0, a_max, 257)[1:-1]
    fp, fm = profile(s), profile(-s)
    if not np.all(fp > 0):
        raise ValueError("profile must be positive on (-a_max, a_max)")
    if not np.allclose(fp, fm, rtol=1e-12, atol=0):
        raise ValueError("profile must be even")
    return Revolution(profile, dim, float(a_max), descriptor)
