"""Shared numerical kernels.

Spherical product quadrature and 1-D integration, plus the scalar helpers
the other modules share (Richardson-extrapolated derivatives at the
origin, root bracketing, digamma).  Everything here is a pure function of its arguments; the only
state is the explicit seed of stochastic grids.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "ConvergenceError",
    "NoisyDerivativeWarning",
    "Tolerances",
    "SphereGrid",
    "DerivativeEstimate",
    "sphere_area",
    "ball_volume",
    "sphere_grid",
    "polar_grid",
    "orthonormal_complement",
    "antipodal_index",
    "integrate_sphere",
    "integrate_1d",
    "derivative_at_zero",
    "richardson_derivative",
    "bracket_root",
    "bisect_vectorized",
    "digamma",
]

MAX_DIM = 8
MAX_NODES = 20_000_000

# default deterministic resolutions per sphere dimension (n = ambient dimension)
DEFAULT_RESOLUTION = {2: 64, 3: 48, 4: 16, 5: 10, 6: 7, 7: 5, 8: 4}


class ConvergenceError(RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    ``partial`` carries the best estimate available at the point of failure.
    """

    def __init__(self, message: str, partial: float | None = None):
        super().__init__(message)
        self.partial = partial


class NoisyDerivativeWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Algorithm parameters that the underlying mathematics leaves open."""

    quad_rel: float = 1e-10
    quad_abs: float = 1e-12
    deriv_step: float = 1e-2
    richardson_levels: int = 2
    root_tol: float = 1e-14
    sphere_resolution: int | None = None
    slice_resolution: int | None = None

    def __post_init__(self):
        for name in ("quad_rel", "quad_abs", "deriv_step", "root_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.richardson_levels < 1:
            raise ValueError("richardson_levels must be >= 1")
        for name in ("sphere_resolution", "slice_resolution"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be positive")

    def resolution_for(self, n: int) -> int:
        return self.sphere_resolution or DEFAULT_RESOLUTION[n]

    def slice_resolution_for(self, n: int) -> int:
        """Resolution of the S^{n-2} grid used inside hyperplane sections of R^n."""
        if self.slice_resolution is not None:
            return self.slice_resolution
        return {3: 32, 4: 16, 5: 14, 6: 8, 7: 5, 8: 4}[n]


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Quadrature nodes and surface-measure weights on S^{dim-1}."""

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    stochastic: bool = False
    resolution: int = 0
    seed: int | None = None
    _pairs: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    def antipodes(self) -> np.ndarray:
        """Index of the antipode of every node (``-1`` where none exists)."""
        if not self._pairs:
            self._pairs.append(antipodal_index(self.nodes))
        return self._pairs[0]

    def representatives(self) -> tuple[np.ndarray, np.ndarray]:
        """One node per antipodal pair, and the pair index of every node.

        Returns ``(rep, owner)``: ``rep`` lists node indices to evaluate, and
        ``owner[i]`` is the position in ``rep`` whose value node ``i`` shares.
        Nodes without an antipode are their own representative.
        """
        anti = self.antipodes()
        owner = np.full(len(self), -1, dtype=int)
        rep = []
        for i in range(len(self)):
            if owner[i] >= 0:
                continue
            owner[i] = len(rep)
            j = anti[i]
            if j >= 0 and owner[j] < 0:
                owner[j] = len(rep)
            rep.append(i)
        return np.asarray(rep, dtype=int), owner


def sphere_area(n: int) -> float:
    """Surface area of S^{n-1}."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(m: int) -> float:
    """Volume of the unit ball in R^m."""
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def _circle(count: int) -> tuple[np.ndarray, np.ndarray]:
    half = count // 2
    ang = (np.arange(half) + 0.5) * (2.0 * math.pi / count)
    first = np.column_stack([np.cos(ang), np.sin(ang)])
    nodes = np.vstack([first, -first])
    return nodes, np.full(count, 2.0 * math.pi / count)


def _symmetric_jacobi(count: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    t, w = special.roots_jacobi(count, alpha, alpha)
    t = 0.5 * (t - t[::-1])
    w = 0.5 * (w + w[::-1])
    return t, w


def _product_sphere(n: int, res: int) -> tuple[np.ndarray, np.ndarray]:
    if n == 2:
        return _circle(4 * res)
    t, wt = _symmetric_jacobi(res, (n - 3) / 2.0)
    sub, subw = _product_sphere(n - 1, res)
    s = np.sqrt(1.0 - t * t)
    nodes = np.empty((len(t), len(sub), n))
    nodes[:, :, : n - 1] = s[:, None, None] * sub[None, :, :]
    nodes[:, :, n - 1] = t[:, None]
    weights = wt[:, None] * subw[None, :]
    return nodes.reshape(-1, n), weights.reshape(-1)


def _node_count(n: int, res: int) -> int:
    return 4 * res ** (n - 1)


def sphere_grid(
    n: int,
    resolution: int | None = None,
    kind: str = "deterministic",
    seed: int | None = None,
) -> SphereGrid:
    """Build a quadrature grid on S^{n-1}.

    The deterministic grid is a recursive product: Gauss-Jacobi nodes in the
    last coordinate with weight (1 - t^2)^{(n-3)/2} times a grid on S^{n-2},
    bottoming out in ``4 * resolution`` equispaced points on the circle.  It is
    antipodally symmetric and its weights sum to the exact surface area.

    ``kind="stochastic"`` draws ``2 * resolution**(n-1)`` uniform points (with
    their antipodes) from ``numpy.random.default_rng(seed)``.
    """
    if not 2 <= n <= MAX_DIM:
        raise ValueError(f"unsupported dimension n={n}; need 2 <= n <= {MAX_DIM}")
    if resolution is None:
        resolution = DEFAULT_RESOLUTION[n]
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if _node_count(n, resolution) > MAX_NODES:
        raise ValueError(
            f"resolution {resolution} gives {_node_count(n, resolution)} nodes "
            f"in dimension {n} (limit {MAX_NODES})"
        )
    if kind == "deterministic":
        nodes, weights = _product_sphere(n, resolution)
        return SphereGrid(n, nodes, weights, resolution=resolution)
    if kind == "stochastic":
        if seed is None:
            raise ValueError("stochastic grids need a seed")
        rng = np.random.default_rng(seed)
        half = _node_count(n, resolution) // 2
        pts = rng.standard_normal((half, n))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        nodes = np.vstack([pts, -pts])
        weights = np.full(2 * half, sphere_area(n) / (2 * half))
        return SphereGrid(n, nodes, weights, stochastic=True, resolution=resolution, seed=seed)
    raise ValueError(f"unknown grid kind {kind!r}")


def orthonormal_complement(v: np.ndarray) -> np.ndarray:
    """Columns form an orthonormal basis of the hyperplane orthogonal to ``v``."""
    v = np.asarray(v, dtype=float)
    n = len(v)
    q, _ = np.linalg.qr(np.column_stack([v / np.linalg.norm(v), np.eye(n)]))
    return q[:, 1:n]


def _polar_angles(count: int, grading: str, concentration: float):
    """Nodes/weights for the polar angle on [0, pi/2], graded as requested."""
    s, w = special.roots_legendre(count)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    if grading == "none":
        phi = 0.5 * math.pi * s
        dphi = np.full_like(s, 0.5 * math.pi)
    elif grading == "pole":
        # phi = arctan(c tan psi) spreads a peak of angular width c near phi = 0
        c = concentration
        psi = 0.5 * math.pi * s
        phi = np.arctan2(c * np.sin(psi), np.cos(psi))
        dphi = 0.5 * math.pi * c / (np.cos(psi) ** 2 + (c * np.sin(psi)) ** 2)
    elif grading == "equator":
        # cos(phi) ~ (1 - s)^3 near the equator tames log|cos(phi)|
        u = 1.0 - s
        phi = 0.5 * math.pi * (1.0 - u**3)
        dphi = 1.5 * math.pi * u**2
    else:
        raise ValueError(f"unknown grading {grading!r}")
    return phi, w * dphi


def polar_grid(
    axis: np.ndarray,
    resolution: int,
    azimuth_resolution: int | None = None,
    grading: str = "none",
    concentration: float = 1.0,
) -> SphereGrid:
    """Grid on S^{n-1} built in polar coordinates about ``axis``.

    The polar angle is integrated separately on each hemisphere, so functions
    of ``(axis, theta)`` with a kink or log singularity at the equator are
    handled, and ``grading`` concentrates nodes near the poles (kernels peaked
    at +-axis, width ``concentration``) or near the equator.
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    n = len(axis)
    phi, wphi = _polar_angles(resolution, grading, concentration)
    phi = np.concatenate([phi, math.pi - phi[::-1]])
    wphi = np.concatenate([wphi, wphi[::-1]])
    wphi = wphi * np.sin(phi) ** (n - 2)
    sub = sphere_grid(n - 1, azimuth_resolution or (resolution if n == 3 else max(4, resolution // 2)))
    basis = orthonormal_complement(axis)
    ring = sub.nodes @ basis.T
    nodes = (
        np.cos(phi)[:, None, None] * axis[None, None, :]
        + np.sin(phi)[:, None, None] * ring[None, :, :]
    ).reshape(-1, n)
    weights = (wphi[:, None] * sub.weights[None, :]).reshape(-1)
    return SphereGrid(n, nodes, weights, resolution=resolution)


def antipodal_index(nodes: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    from scipy.spatial import cKDTree

    tree = cKDTree(nodes)
    dist, idx = tree.query(-nodes)
    idx = np.where(dist <= atol, idx, -1)
    return idx.astype(int)


def integrate_sphere(f: Callable, grid: SphereGrid, singular_axis: np.ndarray | None = None) -> float:
    """Weighted node sum of ``f`` over ``grid``.

    ``f`` is called once with the (N, n) node array; a function that does not
    vectorize is evaluated node by node instead.

    ``singular_axis=x`` declares a kink or log singularity of ``f`` on the
    great sphere ``(x, theta) = 0``; the sum is then taken over an
    equator-graded polar grid about ``x`` of comparable size instead.
    """
    if singular_axis is not None:
        res = max(16, int(math.sqrt(len(grid) / 8)))
        grid = polar_grid(singular_axis, res, res, grading="equator")
    values = _eval_nodes(f, grid.nodes)
    return float(np.dot(grid.weights, values))


def _eval_nodes(f: Callable, nodes: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(f(nodes), dtype=float)
    except Exception:
        values = None
    if values is None or values.shape != (len(nodes),):
        values = np.array([float(f(x)) for x in nodes])
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(f"non-finite integrand value {values[i]} at node {i}: {nodes[i].tolist()}")
    return values


def integrate_1d(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: Tolerances = DEFAULT_TOL,
    singularity: float | None = None,
    limit: int = 200,
) -> float:
    """Adaptive integral of ``f`` over (a, b); ``b`` may be ``inf``.

    ``singularity=alpha`` declares ``f(t) ~ (t - a)**alpha`` at the left end;
    the power is then integrated exactly by an algebraic-weight rule.
    Raises ``ConvergenceError`` (carrying the partial estimate) when the
    adaptive scheme gives up.
    """
    opts = dict(epsabs=tol.quad_abs, epsrel=tol.quad_rel, limit=limit, full_output=1)
    if singularity is None or singularity == 0:
        return _quad(f, a, b, opts)
    alpha = float(singularity)
    if alpha <= -1:
        raise ValueError("power singularity must be integrable (alpha > -1)")
    right = b if math.isfinite(b) else a + 1.0
    nudge = 1e-12 * (right - a)

    def regular(t):
        # the rule may sample the endpoint itself; take the one-sided limit there
        t = max(t, a + nudge)
        return f(t) / (t - a) ** alpha

    value = _quad(regular, a, right, dict(opts, weight="alg", wvar=(alpha, 0.0)))
    if not math.isfinite(b):
        value += _quad(f, right, b, opts)
    return value


def _quad(f, a, b, opts) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, **opts)
    value, err = out[0], out[1]
    flagged = len(out) > 3
    if flagged and err > max(opts["epsabs"], opts["epsrel"] * abs(value)) * 100:
        raise ConvergenceError(
            f"quadrature on ({a}, {b}) did not converge (error estimate {err:.3g})", partial=value
        )
    return float(value)


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    error: float
    noisy: bool
    diagonal: tuple[float, ...] = ()


_STENCILS = {
    2: np.array([1.0, -2.0, 1.0]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
    6: np.array([1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0]),
}


def default_step(order: int, tol: Tolerances = DEFAULT_TOL, scale: float = 1.0) -> float:
    """Base step for an ``order``-th central difference.

    ``deriv_step`` is the step for second derivatives; higher orders use
    ``deriv_step**(2/order)`` so roundoff amplification stays comparable.
    """
    return scale * tol.deriv_step ** (2.0 / order)


def richardson_derivative(
    f: Callable[[np.ndarray], np.ndarray],
    order: int,
    step: float,
    levels: int = 2,
    even: bool = True,
) -> DerivativeEstimate:
    """d^order f / dt^order at 0 by binomial central differences + Richardson.

    Steps ``step, step/2, ..., step/2**levels``.  With ``even=True`` only
    ``t >= 0`` is sampled and mirrored.
    """
    if order not in _STENCILS:
        raise ValueError(f"derivative order must be one of {sorted(_STENCILS)}")
    if step <= 0 or step < 1e-150:
        raise ValueError("step underflow")
    coeffs = _STENCILS[order]
    half = order // 2
    offsets = np.arange(-half, half + 1)
    steps = step / 2.0 ** np.arange(levels + 1)
    pts = np.abs(np.outer(steps, offsets)) if even else np.outer(steps, offsets)
    uniq, inv = np.unique(pts.ravel(), return_inverse=True)
    vals = np.asarray(f(uniq), dtype=float)[inv].reshape(pts.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite function value in finite-difference stencil")
    table = [list((vals @ coeffs) / steps**order)]
    d = table[0]
    rows = [[d[0]]]
    for j in range(1, levels + 1):
        row = [d[j]]
        for m in range(1, j + 1):
            row.append(row[m - 1] + (row[m - 1] - rows[j - 1][m - 1]) / (4.0**m - 1.0))
        rows.append(row)
    diag = tuple(r[-1] for r in rows)
    value = diag[-1]
    err = abs(diag[-1] - diag[-2])
    scale = np.max(np.abs(vals)) / steps[-1] ** order
    floor = 1e3 * np.finfo(float).eps * scale * np.abs(coeffs).sum()
    noisy = False
    if len(diag) >= 3:
        prev = abs(diag[-2] - diag[-3])
        noisy = err > prev and err > floor
    return DerivativeEstimate(float(value), float(max(err, floor / 1e3)), bool(noisy), diag)


def derivative_at_zero(
    f: Callable[[np.ndarray], np.ndarray],
    order: int,
    tol: Tolerances = DEFAULT_TOL,
    scale: float = 1.0,
) -> float:
    """d^order f / dt^order at t = 0 for an even function ``f``.

    ``order`` must be 2, 4 or 6.  Warns with ``NoisyDerivativeWarning`` when
    the extrapolation tail stops contracting.
    """
    est = richardson_derivative(f, order, default_step(order, tol, scale), tol.richardson_levels)
    if est.noisy:
        warnings.warn(
            f"finite-difference extrapolation for order {order} is not contracting "
            f"(last correction {est.error:.3g})",
            NoisyDerivativeWarning,
            stacklevel=2,
        )
    return est.value


def bracket_root(
    f: Callable[[float], float], lo: float, hi: float, tol: Tolerances = DEFAULT_TOL
) -> float:
    """Root of ``f`` inside a sign-changing bracket ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise ValueError(f"no sign change on [{lo}, {hi}]: f(lo)={flo:.6g}, f(hi)={fhi:.6g}")
    return float(optimize.brentq(f, lo, hi, xtol=tol.root_tol, rtol=4 * np.finfo(float).eps, maxiter=500))


def bisect_vectorized(
    inside: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    iterations: int = 60,
) -> np.ndarray:
    """Elementwise bisection for the switch of a monotone predicate.

    ``inside(x)`` must hold at ``lo`` and fail at ``hi`` for every entry.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        ok = inside(mid)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return 0.5 * (lo + hi)


def digamma(x: float) -> float:
    """psi(x) = Gamma'(x)/Gamma(x) for x > 0."""
    if not x > 0:
        raise ValueError(f"digamma is only provided for x > 0, got {x}")
    return float(special.digamma(x))


def gauss_legendre(count: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_legendre(count)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_jacobi_left(count: int, a: float, b: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Rule for ``int_a^b (t - a)**beta g(t) dt``; returns nodes and weights for g."""
    x, w = special.roots_jacobi(count, 0.0, beta)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), w * half ** (beta + 1.0)


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Order-preserving map; fans out to threads when LZERO_THREADS > 1."""
    import os

    threads = int(os.environ.get("LZERO_THREADS", "1") or 1)
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
