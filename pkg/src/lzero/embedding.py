"""Fourier transform of ln||x||_K on the sphere and the L0 classifier.

The transform at a unit direction xi comes from the section function of K
along xi: for odd n it is ``(-1)^{(n+1)/2} pi A^{(n-1)}(0)``; for even n it is
``a_n I(xi)`` with ``a_n = 2 (-1)^{n/2+1} (n-1)!`` and ``I`` the regularized
integral from :mod:`lzero.sections`.  K embeds in L0 exactly when this is
non-positive everywhere on the sphere, and then ``-(2 pi)^{-n}`` times it is
the density of the representing probability measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bodies import DirectionalEllipsoid, EuclideanBall, LogBlend, MultSum, StarBody
from .numerics import (
    DEFAULT_TOL,
    ConvergenceError,
    SphereGrid,
    Tolerances,
    digamma,
    integrate_sphere,
    parallel_map,
    polar_grid,
    sphere_grid,
)
from .sections import (
    fractional_derivative,
    regularized_integral,
    section_profile,
)

__all__ = [
    "EMBED_RESOLUTION",
    "LogFtResult",
    "EmbeddingReport",
    "SpectralDensity",
    "RepresentationReport",
    "NegPReport",
    "even_dim_factor",
    "log_ft",
    "log_ft_detail",
    "log_ft_ellipsoid_closed_form",
    "ellipsoid_density",
    "closed_form_density",
    "transform_density",
    "embeds_in_L0",
    "spectral_measure_density",
    "embedding_constant",
    "verify_log_representation",
    "neg_p_transform",
    "neg_p_embed_test",
]

# default direction grids for the classifier, per ambient dimension
EMBED_RESOLUTION = {3: 12, 4: 5, 5: 4, 6: 3}
INCONCLUSIVE_FRACTION = 0.05


def even_dim_factor(n: int) -> float:
    """a_n = 2 (-1)^{n/2+1} (n-1)! for even n."""
    if n % 2:
        raise ValueError("a_n is defined for even n")
    return 2.0 * (-1) ** (n // 2 + 1) * math.factorial(n - 1)


@dataclass(frozen=True)
class LogFtResult:
    value: float
    noisy: bool
    method: str
    error: float = 0.0

    @property
    def sign_uncertain(self) -> bool:
        """Noisy and with an error estimate as large as the value itself."""
        return self.noisy and self.error >= abs(self.value)


def _check_dim(n: int) -> None:
    if not 3 <= n <= 6:
        raise ValueError(f"transform formulas are provided for 3 <= n <= 6, got n={n}")


def log_ft_detail(K: StarBody, xi, method: str | None = None, tol: Tolerances = DEFAULT_TOL) -> LogFtResult:
    """Transform of ln||x||_K at the unit direction ``xi`` with a noise flag."""
    n = K.dim
    _check_dim(n)
    xi = np.asarray(xi, dtype=float)
    norm = float(np.linalg.norm(xi))
    profile = section_profile(K, xi / norm, method, tol)
    if n % 2:
        k = n - 1
        if profile._closed is not None and profile._closed.taylor is not None:
            deriv, noisy, err = profile._closed.taylor(k), False, 0.0
        else:
            est = profile.derivative_estimate(k)
            deriv, noisy, err = est.value, est.noisy, est.error
        value = (-1) ** ((n + 1) // 2) * math.pi * deriv
        err *= math.pi
    else:
        res = regularized_integral(profile, n - 1.0, n - 2)
        value, noisy = even_dim_factor(n) * res.value, res.noisy
        err = abs(even_dim_factor(n)) * res.error
    scale = norm ** (-n)
    return LogFtResult(value * scale, bool(noisy), profile.method, err * scale)


def log_ft(K: StarBody, xi, method: str | None = None, tol: Tolerances = DEFAULT_TOL) -> float:
    """(ln||x||_K)^(xi), extended to non-unit xi with degree -n."""
    return log_ft_detail(K, xi, method, tol).value


def log_ft_ellipsoid_closed_form(x, a: float, b: float, theta, n: int | None = None) -> float:
    """Exact transform of ln||.|| for the directional ellipsoid E_{a,b}(x) at theta."""
    x = np.asarray(x, dtype=float)
    n = len(x) if n is None else n
    dual = DirectionalEllipsoid(x, b, a)
    g = float(dual.gauge(np.asarray(theta, dtype=float)))
    return -(2.0 ** (n - 1)) * math.pi ** (n / 2) * math.gamma(n / 2) / (a ** (n - 1) * b) * g ** (-n)


def ellipsoid_density(x, a: float, b: float) -> Callable[[np.ndarray], np.ndarray]:
    """Spectral density of E_{a,b}(x) as a vectorized function of unit vectors."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    dual = DirectionalEllipsoid(x, b, a)
    const = (2.0 ** (n - 1)) * math.pi ** (n / 2) * math.gamma(n / 2) / (a ** (n - 1) * b) / (2 * math.pi) ** n

    def density(theta):
        return const * np.asarray(dual.gauge(theta)) ** (-n)

    return density


def closed_form_density(K: StarBody) -> Callable[[np.ndarray], np.ndarray] | None:
    """Exact spectral density when K is built from balls and directional
    ellipsoids by multiplicative combination; ``None`` otherwise."""
    n = K.dim
    if isinstance(K, EuclideanBall):
        c = 1.0 / (2.0 * math.pi ** (n / 2) / math.gamma(n / 2))
        return lambda theta: np.full(np.atleast_2d(theta).shape[0], c)
    if isinstance(K, DirectionalEllipsoid):
        return ellipsoid_density(K.axis, K.a, K.b)
    if isinstance(K, (LogBlend, MultSum)):
        parts, weights = (K.parts, K.weights) if isinstance(K, LogBlend) else ((K.left, K.right), (0.5, 0.5))
        dens = [closed_form_density(p) for p in parts]
        if any(d is None for d in dens):
            return None
        return lambda theta: sum(w * d(theta) for w, d in zip(weights, dens))
    return None


def transform_density(K: StarBody, method: str | None = None, tol: Tolerances = DEFAULT_TOL):
    """Spectral density evaluated through the section formulas at each point."""
    n = K.dim

    def density(theta):
        theta = np.atleast_2d(theta)
        vals = parallel_map(lambda xi: log_ft(K, xi, method, tol), list(theta))
        return -np.asarray(vals) / (2 * math.pi) ** n

    return density


@dataclass
class SpectralDensity:
    """Density of the representing measure at grid nodes."""

    grid: SphereGrid
    values: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.grid.weights @ self.values)

    def pairs(self) -> list[tuple[np.ndarray, float]]:
        return list(zip(self.grid.nodes, self.values.tolist()))

    def __iter__(self):
        return iter(self.pairs())

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class EmbeddingReport:
    body: StarBody
    verdict: str
    min_margin: float
    constant_C: float
    tol: float
    scale: float
    witness: tuple[np.ndarray, float] | None = None
    density: SpectralDensity | None = None
    directions: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)), repr=False)
    values: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool), repr=False)

    @property
    def mass(self) -> float | None:
        return None if self.density is None else self.density.mass

    def to_dict(self) -> dict:
        n = self.body.dim
        per = [
            {"xi": d.tolist(), "log_ft": float(v), "density": float(-v / (2 * math.pi) ** n), "flagged": bool(f)}
            for d, v, f in zip(self.directions, self.values, self.flagged)
        ]
        return {
            "verdict": self.verdict,
            "witness": None if self.witness is None else {"xi": self.witness[0].tolist(), "value": self.witness[1]},
            "min_margin": self.min_margin,
            "constant_C": self.constant_C,
            "mass": self.mass,
            "tol": self.tol,
            "per_direction": per,
        }


def _evaluate_directions(K, dirs, method, tol):
    def one(xi):
        try:
            return log_ft_detail(K, xi, method, tol)
        except (ConvergenceError, ValueError, FloatingPointError):
            return None

    return parallel_map(one, list(dirs))


def embeds_in_L0(
    K: StarBody,
    grid: SphereGrid | None = None,
    tol: float | None = None,
    method: str | None = None,
    tolerances: Tolerances = DEFAULT_TOL,
    extra_directions: Sequence | None = None,
) -> EmbeddingReport:
    """Sign test of the transform of ln||x||_K over grid directions.

    The margin at a direction is minus the transform; the body embeds when
    every margin is at least ``-tol`` (default ``1e-6`` times the median
    absolute transform value).  Symmetry axes of the body and
    ``extra_directions`` are tested in addition to the grid; one value per
    antipodal pair is computed.
    """
    n = K.dim
    _check_dim(n)
    grid = grid or sphere_grid(n, EMBED_RESOLUTION[n])
    rep, owner = grid.representatives()
    extra = [np.asarray(d, dtype=float) / np.linalg.norm(d) for d in (list(K.axes()) + list(extra_directions or []))]
    dirs = np.vstack([grid.nodes[rep]] + ([np.array(extra)] if extra else []))
    results = _evaluate_directions(K, dirs, method, tolerances)
    failed = np.array([r is None for r in results])
    values = np.array([np.nan if r is None else r.value for r in results])
    flagged = failed | np.array([r is not None and r.sign_uncertain for r in results])
    ok = ~failed
    scale = float(np.median(np.abs(values[ok]))) if ok.any() else 1.0
    tol_abs = 1e-6 * scale if tol is None else float(tol)
    margins = -values
    constant = embedding_constant(K)
    if not ok.any():
        return EmbeddingReport(K, "inconclusive", float("nan"), constant, tol_abs, scale,
                               directions=dirs, values=values, flagged=flagged)
    i = int(np.nanargmin(np.where(ok, margins, np.inf)))
    min_margin = float(margins[i])
    if min_margin < -tol_abs and not flagged[i]:
        verdict = "fails"
    elif np.mean(flagged) > INCONCLUSIVE_FRACTION or (min_margin < -tol_abs and flagged[i]):
        verdict = "inconclusive"
    else:
        verdict = "embeds"
    report = EmbeddingReport(K, verdict, min_margin, constant, tol_abs, scale,
                             directions=dirs, values=values, flagged=flagged)
    if verdict == "fails":
        report.witness = (dirs[i].copy(), float(values[i]))
    elif not failed[: len(rep)].any():
        dens = -values[: len(rep)][owner] / (2 * math.pi) ** n
        report.density = SpectralDensity(grid, np.maximum(dens, 0.0) if verdict == "embeds" else dens)
    return report


def spectral_measure_density(
    K: StarBody,
    grid: SphereGrid | None = None,
    method: str | None = None,
    tolerances: Tolerances = DEFAULT_TOL,
) -> SpectralDensity:
    """Density -(2 pi)^{-n} (ln||x||_K)^ on the grid; raises if K fails the sign test."""
    report = embeds_in_L0(K, grid, method=method, tolerances=tolerances)
    if report.verdict == "fails":
        xi, v = report.witness
        raise ValueError(f"body does not embed in L0: transform {v:.6g} > 0 at xi={xi.tolist()}")
    if report.density is None:
        raise ConvergenceError("density could not be evaluated at every grid direction")
    return report.density


def embedding_constant(K: StarBody, grid: SphereGrid | None = None) -> float:
    """C = mean of ln||x||_K over the sphere + (psi(n/2) - psi(1/2)) / 2."""
    n = K.dim
    grid = grid or sphere_grid(n)
    mean = integrate_sphere(lambda P: np.log(K.gauge(P)), grid) / grid.area
    return mean + 0.5 * (digamma(n / 2) - digamma(0.5))


@dataclass
class RepresentationReport:
    points: np.ndarray
    residuals: np.ndarray
    tol: float

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def verify_log_representation(
    K: StarBody,
    density: Callable[[np.ndarray], np.ndarray],
    C: float,
    sample_points,
    tol: float = 5e-3,
    resolution: int = 40,
) -> RepresentationReport:
    """Residuals ln||x|| - int ln|(x, xi)| density(xi) dxi - C at sample points.

    ``density`` is a vectorized function on unit vectors.  The integral is
    taken on an equator-graded polar grid about each x, which resolves the
    logarithmic singularity on the great sphere orthogonal to x.
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    res = []
    for x in pts:
        grid = polar_grid(x, resolution, resolution, grading="equator")
        integral = integrate_sphere(lambda P: np.log(np.abs(P @ x)) * density(P), grid)
        res.append(float(np.log(K.gauge(x))) - integral - C)
    return RepresentationReport(pts, np.array(res), tol)


def neg_p_transform(K: StarBody, xi, p: float, method: str | None = None, tol: Tolerances = DEFAULT_TOL) -> float:
    """(||x||_K^{-p})^(xi) = pi p / cos(q pi / 2) A^{(q)}(0), q = n - 1 - p."""
    n = K.dim
    q = n - 1.0 - p
    if not 0 < p < n - 1:
        raise ValueError(f"p must lie in (0, {n - 1})")
    c = math.cos(q * math.pi / 2)
    if abs(c) < 1e-12:
        raise ValueError(f"q = {q} is an odd integer; evaluate at q +- 1e-3 instead")
    profile = section_profile(K, xi, method, tol)
    if abs(q - round(q)) < 1e-12:
        deriv = profile.derivative(int(round(q)))
    else:
        deriv = fractional_derivative(profile, q)
    return math.pi * p / c * deriv


@dataclass
class NegPReport:
    p: float
    q: float
    verdict: str
    min_value: float
    tol: float
    flagged: bool
    witness: tuple[np.ndarray, float] | None
    directions: np.ndarray
    values: np.ndarray

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "verdict": self.verdict,
            "min_value": self.min_value,
            "tol": self.tol,
            "flagged": self.flagged,
            "witness": None if self.witness is None else {"xi": self.witness[0].tolist(), "value": self.witness[1]},
        }


def neg_p_embed_test(
    K: StarBody,
    p: float,
    grid: SphereGrid | None = None,
    tol: float | None = None,
    method: str | None = None,
    tolerances: Tolerances = DEFAULT_TOL,
) -> NegPReport:
    """Does K embed in L_{-p}?  Positivity of (||x||^{-p})^ over directions.

    When q = n - 1 - p is an odd integer the formula degenerates; the test is
    then run at p -+ 1e-3 and the report is flagged.
    """
    n = K.dim
    _check_dim(n)
    grid = grid or sphere_grid(n, EMBED_RESOLUTION[n])
    rep, _ = grid.representatives()
    dirs = np.vstack([grid.nodes[rep]] + [np.array(K.axes())] if K.axes() else [grid.nodes[rep]])
    q = n - 1.0 - p
    flagged = abs(math.cos(q * math.pi / 2)) < 1e-12
    ps = [p - 1e-3, p + 1e-3] if flagged else [p]

    def one(xi):
        return min(neg_p_transform(K, xi, pp, method, tolerances) for pp in ps)

    values = np.array(parallel_map(one, list(dirs)))
    scale = float(np.median(np.abs(values)))
    tol_abs = 1e-6 * scale if tol is None else float(tol)
    i = int(np.argmin(values))
    verdict = "embeds" if values[i] >= -tol_abs else "fails"
    witness = None if verdict == "embeds" else (dirs[i].copy(), float(values[i]))
    return NegPReport(p, q, verdict, float(values[i]), tol_abs, flagged, witness, dirs, values)
