"""Approximation of L0-embeddable bodies by products of ellipsoid norms.

Pipeline: the spectral density of K is computed on a grid, its mass is
lumped into atoms by a greedy covering with spherical caps of chord radius
sigma, every atom xi_i with mass w_i becomes the factor
``||x||_{E_{a,b}(xi_i)}^{w_i}``, and one common scale absorbs the additive
constant.  Dyadic weights are produced by error diffusion along a
nearest-neighbour ordering of the atoms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize

from .bodies import DirectionalEllipsoid, LogBlend, StarBody
from .embedding import SpectralDensity, neg_p_embed_test, spectral_measure_density
from .numerics import DEFAULT_TOL, SphereGrid, Tolerances, polar_grid, sphere_area, sphere_grid

__all__ = [
    "EllipsoidProduct",
    "FitResult",
    "PSumFit",
    "FIT_RESOLUTION",
    "product_gauge",
    "kernel_mass",
    "smoothed_log_norm",
    "discretize_sphere_measure",
    "fit_ellipsoid_product",
    "sup_log_error",
    "dyadicize_weights",
    "fit_psum",
]

# direction grids for the density used by the fitter
FIT_RESOLUTION = {3: 36, 4: 6, 5: 4, 6: 3}
MAX_PARTS = 10_000


@dataclass(frozen=True, eq=False)
class EllipsoidProduct:
    """gauge(x) = prod_i ||x||_{E_i}^{w_i} with positive weights summing to 1."""

    parts: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(self.parts) or not len(w):
            raise ValueError("need one positive weight per part")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {math.fsum(w)!r})")
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def as_body(self) -> LogBlend:
        if not hasattr(self, "_body"):
            object.__setattr__(self, "_body", LogBlend(self.parts, self.weights))
        return self._body

    def log_gauge(self, x) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(x, dtype=float))
        return self.as_body().log_gauge(rows)

    def gauge(self, x):
        return self.as_body().gauge(x)

    def to_list(self) -> list[dict]:
        return [
            {"xi": p.axis.tolist(), "a": p.a, "b": p.b, "weight": float(w)}
            for p, w in zip(self.parts, self.weights)
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    @classmethod
    def from_list(cls, items) -> "EllipsoidProduct":
        parts = [DirectionalEllipsoid(np.asarray(d["xi"], dtype=float), float(d["a"]), float(d["b"])) for d in items]
        return cls(tuple(parts), np.array([float(d["weight"]) for d in items]))


def product_gauge(P: EllipsoidProduct, x) -> np.ndarray | float:
    """prod ||x||_{E_i}^{w_i}, evaluated through logarithms."""
    return P.gauge(x)


def _kernel_grid(x: np.ndarray, a: float, b: float, resolution: int) -> SphereGrid:
    return polar_grid(x, resolution, resolution, grading="pole", concentration=a / b)


def _kernel(x: np.ndarray, a: float, b: float, nodes: np.ndarray) -> np.ndarray:
    n = len(x)
    dual = DirectionalEllipsoid(x, b, a)
    return dual.gauge(nodes) ** (-n) / (sphere_area(n) * a ** (n - 1) * b)


def kernel_mass(x, a: float, b: float, resolution: int = 48) -> float:
    """Integral of the smoothing kernel at x on its pole-graded grid (exactly 1)."""
    x = np.asarray(x, dtype=float) / np.linalg.norm(x)
    g = _kernel_grid(x, a, b, resolution)
    return float(g.weights @ _kernel(x, a, b, g.nodes))


def smoothed_log_norm(K: StarBody, x, a: float, b: float = 1.0, resolution: int = 48) -> float:
    """f_{a,b}(x) = (1/(|S| a^{n-1} b)) int ln||theta||_K ||theta||_{E_{b,a}(x)}^{-n} dtheta.

    The kernel concentrates at +-x with angular width a/b; the integral is
    taken on a polar grid about x graded toward the poles.  The grid is
    refined until the kernel mass is within 1e-3 of one.
    """
    if not 0 < a <= b:
        raise ValueError("need 0 < a <= b")
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    res = resolution
    for _ in range(4):
        g = _kernel_grid(x, a, b, res)
        k = _kernel(x, a, b, g.nodes)
        mass = float(g.weights @ k)
        if abs(mass - 1.0) <= 1e-3:
            break
        res *= 2
    if abs(mass - 1.0) > 1e-2:
        raise ValueError(f"kernel too peaked for resolution {res}: mass {mass:.6g}")
    return float(g.weights @ (k * np.log(K.gauge(g.nodes))))


def _fold(grid: SphereGrid, masses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # one node per antipodal pair, carrying the pair's combined mass
    rep, owner = grid.representatives()
    folded = np.zeros(len(rep))
    np.add.at(folded, owner, masses)
    return grid.nodes[rep], folded


def discretize_sphere_measure(
    measure: SpectralDensity | tuple[SphereGrid, np.ndarray],
    sigma: float,
    atom: str = "center",
) -> list[tuple[np.ndarray, float]]:
    """Lump an even probability measure on the sphere into cap atoms.

    ``measure`` is a spectral density, or a pair ``(grid, node_masses)``.
    Caps of chord radius ``sigma`` (about +-center) are placed greedily at the
    heaviest unassigned node (ties by index) and take every unassigned node
    they contain, so the caps are disjoint and mass is conserved.  Atoms sit
    at cap centers, or at the folded mass centroid with ``atom="centroid"``.
    """
    if not 0 < sigma < 2:
        raise ValueError("sigma must lie in (0, 2)")
    if isinstance(measure, SpectralDensity):
        grid, masses = measure.grid, measure.grid.weights * measure.values
    else:
        grid, masses = measure
        masses = np.asarray(masses, dtype=float)
    if np.any(masses < 0):
        raise ValueError("measure has negative mass")
    total = math.fsum(masses)
    if not total > 0:
        raise ValueError("measure has no mass")
    nodes, mass = _fold(grid, masses / total)
    order = sorted(range(len(mass)), key=lambda i: (-mass[i], i))
    free = np.ones(len(mass), dtype=bool)
    atoms = []
    for c in order:
        if not free[c]:
            continue
        dots = nodes @ nodes[c]
        chord = np.sqrt(np.maximum(2.0 - 2.0 * np.abs(dots), 0.0))
        member = free & (chord < sigma)
        member[c] = True
        free &= ~member
        w = math.fsum(mass[member])
        if w <= 0:
            continue
        if atom == "centroid":
            signs = np.where(dots[member] < 0, -1.0, 1.0)
            v = (mass[member] * signs) @ nodes[member]
            center = v / np.linalg.norm(v)
        else:
            center = nodes[c].copy()
        atoms.append((center, w))
    weights = np.array([w for _, w in atoms])
    weights /= math.fsum(weights)
    # put the rounding residue on the heaviest atom so the sum is 1 to the last bit
    k = int(np.argmax(weights))
    weights[k] += 1.0 - math.fsum(weights)
    return [(c, float(w)) for (c, _), w in zip(atoms, weights)]


def sup_log_error(P: EllipsoidProduct, K: StarBody, grid: SphereGrid) -> tuple[float, float]:
    """(half-width, midpoint) of ln gauge_P - ln gauge_K over the grid."""
    r = P.log_gauge(grid.nodes) - np.log(K.gauge(grid.nodes))
    return 0.5 * float(r.max() - r.min()), 0.5 * float(r.max() + r.min())


@dataclass
class FitResult:
    product: EllipsoidProduct
    error: float
    shift: float
    atoms: int
    a: float
    b: float
    sigma: float


def fit_ellipsoid_product(
    K: StarBody,
    a: float,
    b: float = 1.0,
    sigma: float = 0.2,
    grid: SphereGrid | None = None,
    eval_grid: SphereGrid | None = None,
    density: SpectralDensity | None = None,
    atom: str = "centroid",
    tolerances: Tolerances = DEFAULT_TOL,
) -> FitResult:
    """Product of E_{a,b}(xi_i)^{w_i} approximating K in the radial sense.

    The spectral density of K (computed on ``grid`` unless given) is lumped
    into atoms, and the optimal constant is absorbed by scaling every factor
    by the same amount, which centres the log residual on ``eval_grid``.
    Rejects bodies that fail the L0 sign test.
    """
    if not 0 < a <= b:
        raise ValueError("need 0 < a <= b")
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    n = K.dim
    if density is None:
        density = spectral_measure_density(K, grid or sphere_grid(n, FIT_RESOLUTION[n]), tolerances=tolerances)
    atoms = discretize_sphere_measure(density, sigma, atom)
    parts = tuple(DirectionalEllipsoid(c, a, b) for c, _ in atoms)
    P = EllipsoidProduct(parts, np.array([w for _, w in atoms]))
    eval_grid = eval_grid or sphere_grid(n)
    _, mid = sup_log_error(P, K, eval_grid)
    s = math.exp(mid)
    P = EllipsoidProduct(tuple(DirectionalEllipsoid(p.axis, a * s, b * s) for p in parts), P.weights)
    err, shift = sup_log_error(P, K, eval_grid)
    return FitResult(P, err, mid, len(parts), a, b, sigma)


def _nearest_neighbour_order(axes: np.ndarray, start: int) -> list[int]:
    left = np.ones(len(axes), dtype=bool)
    order = [start]
    left[start] = False
    cur = start
    for _ in range(len(axes) - 1):
        d = np.abs(axes @ axes[cur])
        d[~left] = -np.inf
        cur = int(np.argmax(d))
        order.append(cur)
        left[cur] = False
    return order


def dyadicize_weights(P: EllipsoidProduct, depth: int, spatial: bool = True) -> EllipsoidProduct:
    """Replace weights by sums of powers 2^{-i}, i <= depth.

    Weights are rounded to multiples of 2^{-depth} by error diffusion (the
    rounding error of each part is carried to the next one), along a
    nearest-neighbour ordering of the ellipsoid axes when ``spatial``.  The
    final residue goes to the heaviest part, so the rounded weights sum to
    exactly one.  Each rounded weight is then expanded into its binary
    digits, one duplicated ellipsoid per digit.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    m = len(P.parts)
    axes = np.array([p.axis for p in P.parts])
    heavy = int(np.argmax(P.weights))
    order = _nearest_neighbour_order(axes, heavy) if spatial else list(range(m))
    unit = 2**depth
    counts = np.zeros(m, dtype=np.int64)
    carry = Fraction(0)
    for i in order:
        target = Fraction(float(P.weights[i])) + carry
        k = max(int(round(target * unit)), 0)
        counts[i] = k
        carry = target - Fraction(k, unit)
    counts[heavy] += unit - int(counts.sum())
    if counts[heavy] < 0:
        raise ValueError("weights cannot be dyadicized at this depth")
    parts, weights = [], []
    for i in range(m):
        k = int(counts[i])
        bit = 0
        while k:
            if k & 1:
                parts.append(P.parts[i])
                weights.append(2.0 ** (bit - depth))
            k >>= 1
            bit += 1
    if len(parts) > MAX_PARTS:
        raise ValueError(f"dyadic expansion has {len(parts)} parts (cap {MAX_PARTS})")
    return EllipsoidProduct(tuple(parts), np.array(weights))


@dataclass
class PSumFit:
    parts: list
    error: float
    p: float

    def gauge_power(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return sum(np.asarray(E.gauge(x)) ** self.p for E in self.parts)


def fit_psum(
    K: StarBody,
    p: float,
    a: float = 0.5,
    b: float = 1.0,
    grid: SphereGrid | None = None,
    eval_grid: SphereGrid | None = None,
    candidates=None,
    check: bool = True,
    tolerances: Tolerances = DEFAULT_TOL,
) -> PSumFit:
    """Ellipsoids E_i with sum ||x||_{E_i}^p close to ||x||_K^p in sup norm.

    The dictionary is E_{a,b}(xi) over one node per antipodal pair of
    ``grid`` plus any ``candidates``; non-negative coefficients c_j are found
    by a linear program minimizing the sup error on ``eval_grid`` and then
    absorbed as scalings (c ||x||_E^p = ||x||_{c^{-1/p} E}^p).  For p < 0 the
    body is first checked for L_{-p} embedding when ``check`` is set.
    """
    if p == 0:
        raise ValueError("p = 0 is the multiplicative case; use fit_ellipsoid_product")
    if not -1 < p < 1:
        raise ValueError("p must lie in (-1, 1)")
    n = K.dim
    if check and p < 0:
        rep = neg_p_embed_test(K, -p, sphere_grid(n, 4), tolerances=tolerances)
        if rep.verdict != "embeds":
            raise ValueError(f"body does not embed in L_{p:g}")
    grid = grid or sphere_grid(n, 8)
    rep, _ = grid.representatives()
    dictionary = [DirectionalEllipsoid(grid.nodes[i], a, b) for i in rep]
    dictionary += list(candidates or [])
    eval_grid = eval_grid or sphere_grid(n, 16)
    X = eval_grid.nodes
    y = np.asarray(K.gauge(X)) ** p
    G = np.column_stack([np.asarray(E.gauge(X)) ** p for E in dictionary])
    m = G.shape[1]
    # variables (c, s): minimize s subject to |G c - y| <= s, c >= 0
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    ones = np.ones((len(X), 1))
    A = np.vstack([np.hstack([G, -ones]), np.hstack([-G, -ones])])
    rhs = np.concatenate([y, -y])
    res = optimize.linprog(cost, A_ub=A, b_ub=rhs, bounds=[(0, None)] * (m + 1), method="highs")
    if not res.success:
        raise RuntimeError(f"linear program failed: {res.message}")
    c = res.x[:m]
    parts = []
    for E, cj in zip(dictionary, c):
        if cj <= 1e-12 * c.max():
            continue
        s = cj ** (-1.0 / p)
        if isinstance(E, DirectionalEllipsoid):
            parts.append(DirectionalEllipsoid(E.axis, E.a * s, E.b * s))
        else:
            from .bodies import linear_image

            parts.append(linear_image(np.eye(n) / s, E))
    fit = PSumFit(parts, 0.0, p)
    fit.error = float(np.max(np.abs(fit.gauge_power(X) - y)))
    return fit
