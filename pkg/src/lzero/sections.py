"""Parallel section functions and their derivatives at the origin.

``A(t)`` is the (n-1)-volume of the slice of a body by the hyperplane
``(x, xi) = t``.  Exact formulas cover balls, and ellipsoids or bodies of
revolution sliced along their axis.  Other cases use a radial integral over
the slice, with hit-or-miss Monte Carlo as an independent check.

The regularized integrals behind fractional derivatives and the even
dimensional transform formula share one routine (``regularized_integral``):
a near-zero band handled through an even polynomial fit of ``A``, a middle
range done by Gauss-Legendre in ``u = sqrt(t_max - t)``, and a closed-form
power tail beyond ``t_max``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .bodies import (
    DirectionalEllipsoid,
    EuclideanBall,
    Revolution,
    StarBody,
    ray_exit,
)
from .numerics import (
    DEFAULT_TOL,
    ConvergenceError,
    SphereGrid,
    Tolerances,
    ball_volume,
    default_step,
    gauss_legendre,
    orthonormal_complement,
    richardson_derivative,
    sphere_grid,
)

__all__ = [
    "SectionProfile",
    "SLICE_METHODS",
    "section_profile",
    "section_value",
    "montecarlo_slice",
    "section_derivative_at_zero",
    "fractional_derivative",
    "regularized_integral",
    "regularized_section_integral",
    "export_profile_csv",
]

SLICE_METHODS = ("closed_form", "radial_slice", "montecarlo_slice")

# near-zero band as a fraction of t_max, and the even-polynomial fit used there
NEAR_BAND = 0.25
FIT_DEGREE = 10
FIT_NODES = 24


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    return v / norm


@dataclass
class _ClosedForm:
    value: Callable[[np.ndarray], np.ndarray]
    t_max: float
    taylor: Callable[[int], float] | None = None


def _binomial_taylor(scale: float, m: float, width: float) -> Callable[[int], float]:
    # d^k/dt^k of scale * (1 - t^2/width^2)^m at 0
    def taylor(k: int) -> float:
        if k % 2:
            return 0.0
        j = k // 2
        return scale * math.factorial(k) * float(special.binom(m, j)) * (-1) ** j / width**k

    return taylor


def closed_form_section(K: StarBody, xi: np.ndarray) -> _ClosedForm | None:
    """Exact section function of ``K`` along ``xi`` when one is known."""
    n = K.dim
    kappa = ball_volume(n - 1)
    m = (n - 1) / 2.0
    if isinstance(K, EuclideanBall):
        return _ClosedForm(
            lambda t: kappa * np.clip(1.0 - t * t, 0.0, None) ** m, 1.0, _binomial_taylor(kappa, m, 1.0)
        )
    if isinstance(K, DirectionalEllipsoid) and abs(abs(float(xi @ K.axis)) - 1.0) < 1e-12:
        a, b = K.a, K.b
        scale = kappa * b ** (n - 1)
        return _ClosedForm(
            lambda t: scale * np.clip(1.0 - (t / a) ** 2, 0.0, None) ** m, a, _binomial_taylor(scale, m, a)
        )
    if isinstance(K, Revolution) and abs(abs(float(xi[-1])) - 1.0) < 1e-12:
        f, amax = K.profile, K.a_max

        def value(t):
            t = np.asarray(t, dtype=float)
            inside = np.abs(t) < amax
            return np.where(inside, kappa * f(np.clip(t, -amax, amax)) ** (n - 1), 0.0)

        return _ClosedForm(value, amax, None)
    return None


@dataclass(eq=False)
class SectionProfile:
    """Section function ``A(t)`` of ``body`` along ``xi`` with cached samples."""

    body: StarBody
    xi: np.ndarray
    t_max: float
    method: str
    support_point: np.ndarray
    tol: Tolerances = DEFAULT_TOL
    seed: int | None = None
    mc_samples: int = 200_000
    samples: dict = field(default_factory=dict, repr=False)
    _closed: _ClosedForm | None = field(default=None, repr=False)
    _slice_grid: SphereGrid | None = field(default=None, repr=False)
    _fit: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.body.dim

    def __call__(self, t) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        flat = np.abs(t.reshape(-1))
        out = np.zeros(len(flat))
        todo = flat < self.t_max
        if todo.any():
            out[todo] = self._evaluate(flat[todo])
        for ti, ai in zip(flat, out):
            self.samples.setdefault(float(ti), float(ai))
        if t.ndim == 0:
            return float(out[0])
        return out.reshape(t.shape)

    def _evaluate(self, t: np.ndarray) -> np.ndarray:
        if self.method == "closed_form":
            return np.asarray(self._closed.value(t), dtype=float)
        if self.method == "radial_slice":
            return self._radial(t)
        return np.array([self._montecarlo(ti)[0] for ti in t])

    def _radial(self, t: np.ndarray) -> np.ndarray:
        K, n = self.body, self.dim
        if self._slice_grid is None:
            self._slice_grid = sphere_grid(n - 1, self.tol.slice_resolution_for(n))
        grid = self._slice_grid
        dirs = grid.nodes @ orthonormal_complement(self.xi).T
        centers = (t / self.t_max)[:, None] * self.support_point[None, :]
        inside = K.level(centers)
        if np.any(inside > 0):
            i = int(np.argmax(inside > 0))
            raise ValueError(
                f"slice at t={t[i]:.6g} is not star-shaped about its center; use method='montecarlo_slice'"
            )
        r_hi = 2.5 * K.enclosing_radius()
        origins = np.repeat(centers, len(dirs), axis=0)
        rays = np.tile(dirs, (len(t), 1))
        r = ray_exit(K, origins, rays, r_hi).reshape(len(t), len(dirs))
        return (r ** (n - 1) @ grid.weights) / (n - 1)

    def _montecarlo(self, t: float) -> tuple[float, float]:
        if self.seed is None:
            raise ValueError("montecarlo_slice needs a seed")
        seed = np.random.SeedSequence([self.seed, int(np.float64(t).view(np.int64) & 0x7FFFFFFF)])
        return _hit_or_miss(self.body, self.xi, t, self.mc_samples, np.random.default_rng(seed))

    def derivative(self, k: int) -> float:
        """A^{(k)}(0) for even k (closed form when available)."""
        if k % 2:
            return 0.0
        if k == 0:
            return float(self(0.0))
        if self._closed is not None and self._closed.taylor is not None:
            return self._closed.taylor(k)
        return self.derivative_estimate(k).value

    def derivative_estimate(self, k: int):
        step = default_step(k, self.tol, self.t_max)
        return richardson_derivative(lambda t: self(t), k, step, self.tol.richardson_levels)

    def even_fit(self) -> tuple[np.ndarray, float, float]:
        """Even polynomial fit of A on the near-zero band.

        Returns ``(d, z0, residual)`` with ``A(t) ~ sum_k d[k] (t/z0)^(2k)`` on
        ``[0, z0]``.  Nodes are Chebyshev points in ``u = t^2``.
        """
        if not self._fit:
            z0 = NEAR_BAND * self.t_max
            j = np.arange(FIT_NODES)
            v = 0.5 * (1.0 - np.cos((j + 0.5) * math.pi / FIT_NODES))
            vals = self(z0 * np.sqrt(v))
            cheb = np.polynomial.Chebyshev.fit(v, vals, FIT_DEGREE, domain=[0.0, 1.0])
            resid = float(np.max(np.abs(cheb(v) - vals)))
            d = cheb.convert(kind=np.polynomial.Polynomial, domain=[0.0, 1.0], window=[0.0, 1.0]).coef
            self._fit.update(d=d, z0=z0, residual=resid)
        return self._fit["d"], self._fit["z0"], self._fit["residual"]

    def table(self) -> list[tuple[float, float]]:
        return sorted(self.samples.items())


def _hit_or_miss(K: StarBody, xi: np.ndarray, t: float, samples: int, rng) -> tuple[float, float]:
    n = K.dim
    R = K.enclosing_radius()
    if abs(t) >= R:
        return 0.0, 0.0
    radius = math.sqrt(R * R - t * t)
    g = rng.standard_normal((samples, n - 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= radius * rng.random(samples)[:, None] ** (1.0 / (n - 1))
    pts = t * xi[None, :] + g @ orthonormal_complement(xi).T
    hits = K.contains(pts)
    frac = float(np.mean(hits))
    vol = ball_volume(n - 1) * radius ** (n - 1)
    return frac * vol, vol * math.sqrt(frac * (1.0 - frac) / samples)


def section_profile(
    K: StarBody,
    xi,
    method: str | None = None,
    tol: Tolerances = DEFAULT_TOL,
    seed: int | None = None,
    mc_samples: int = 200_000,
) -> SectionProfile:
    """Build the section profile of ``K`` along ``xi``.

    The default method is the exact formula when one applies and the radial
    slice otherwise.  The radial slice integrates ``r^{n-1}/(n-1)`` over the
    directions of the hyperplane, measured from the point of the slice on the
    segment to the support point; it assumes slices are star-shaped about
    that point, which holds for convex bodies.
    """
    xi = _unit(xi)
    if len(xi) != K.dim:
        raise ValueError(f"direction has dimension {len(xi)}, body has {K.dim}")
    closed = closed_form_section(K, xi)
    if method is None:
        method = "closed_form" if closed is not None else "radial_slice"
    if method not in SLICE_METHODS:
        raise ValueError(f"unknown slice method {method!r}; choose from {SLICE_METHODS}")
    if method == "closed_form" and closed is None:
        raise ValueError(f"no closed-form section for {type(K).__name__} along this direction")
    if closed is not None:
        h, x_star = closed.t_max, closed.t_max * xi
    else:
        h, x_star = K.support(xi)
    return SectionProfile(
        K, xi, float(h), method, np.asarray(x_star, dtype=float), tol, seed, mc_samples,
        _closed=closed if method == "closed_form" else None,
    )


def section_value(K: StarBody, xi, t: float, method: str | None = None, **kwargs) -> float:
    """A(t) of ``K`` along ``xi``; zero beyond the support value."""
    return float(section_profile(K, xi, method, **kwargs)(float(t)))


def montecarlo_slice(K: StarBody, xi, t: float, samples: int, seed: int) -> tuple[float, float]:
    """Hit-or-miss estimate of A(t) and its standard error."""
    xi = _unit(xi)
    return _hit_or_miss(K, xi, float(t), int(samples), np.random.default_rng(seed))


def section_derivative_at_zero(K: StarBody, xi, k: int, method: str | None = None, tol: Tolerances = DEFAULT_TOL) -> float:
    """A^{(k)}(0) for even ``k`` in {2, 4, 6}."""
    if k not in (2, 4, 6):
        raise ValueError("k must be 2, 4 or 6")
    return section_profile(K, xi, method, tol).derivative(k)


@dataclass(frozen=True)
class RegularizedIntegral:
    value: float
    near: float
    middle: float
    tail: float
    taylor: tuple[float, ...]
    nodes: int
    noisy: bool
    error: float = 0.0


def regularized_integral(
    profile: SectionProfile, s: float, jmax: int, max_nodes: int = 1024, upper: float | None = None
) -> RegularizedIntegral:
    """int_0^inf t^{-1-s} (A(t) - sum_{j <= jmax} A^{(j)}(0) t^j / j!) dt.

    Requires ``jmax < s < jmax + 2`` (only even Taylor terms appear).  With
    ``upper > t_max`` the range (t_max, upper), where A vanishes, is
    integrated numerically and the closed-form tail starts at ``upper``.
    """
    if not (jmax < s < jmax + 2):
        raise ValueError(f"need jmax < s < jmax + 2, got s={s}, jmax={jmax}")
    d, z0, resid = profile.even_fit()
    h = profile.t_max
    top = h if upper is None else max(float(upper), h)
    keep = [k for k in range(len(d)) if 2 * k <= jmax]
    # Taylor coefficients in t, taken from the fit so that all pieces agree
    c = [d[k] / z0 ** (2 * k) for k in keep]
    near = sum(d[k] / (2 * k - s) for k in range(len(d)) if 2 * k > jmax) * z0 ** (-s)
    tail = -sum(ck * top ** (2 * k - s) / (s - 2 * k) for k, ck in zip(keep, c))

    def poly(t):
        return sum(ck * t ** (2 * k) for k, ck in zip(keep, c))

    if top > h:
        u, w = gauss_legendre(64, h, top)
        tail += float(np.sum(w * u ** (-1.0 - s) * (profile(u) - poly(u))))

    umax = math.sqrt(h - z0)

    def middle(count):
        u, w = gauss_legendre(count, 0.0, umax)
        t = h - u * u
        return float(np.sum(w * 2.0 * u * t ** (-1.0 - s) * (profile(t) - poly(t))))

    count = 48
    prev = middle(count)
    noisy = False
    while True:
        count *= 2
        cur = middle(count)
        scale = max(abs(cur), abs(near), abs(tail), 1e-300)
        if abs(cur - prev) <= 1e-9 * scale:
            break
        if count >= max_nodes:
            if abs(cur - prev) > 1e-5 * scale:
                raise ConvergenceError(
                    f"middle-range quadrature not converging (last change {abs(cur - prev):.3g})",
                    partial=near + cur + tail,
                )
            noisy = True
            break
        prev = cur
    a0 = abs(d[0]) if len(d) else 1.0
    noisy = noisy or resid > 1e-7 * max(a0, 1e-300)
    taylor = tuple(ck * math.factorial(2 * k) for k, ck in zip(keep, c))
    # fit residual propagated through the near band, plus the last quadrature change
    error = abs(cur - prev) + resid * z0 ** (-s) * len(d)
    return RegularizedIntegral(near + cur + tail, near, cur, tail, taylor, count, noisy, error)


def fractional_derivative(profile: SectionProfile, q: float) -> float:
    """Fractional derivative of order ``q`` of the profile at 0.

    (1/Gamma(-q)) int_0^inf t^{-1-q} (A(t) - Taylor_{m-1}(t)) dt, m = ceil(q).
    """
    q = float(q)
    if q <= 0:
        raise ValueError("fractional order must be positive")
    if abs(q - round(q)) < 1e-12:
        raise ValueError("integer order; use section_derivative_at_zero")
    m = math.ceil(q)
    return regularized_integral(profile, q, m - 1).value / math.gamma(-q)


def regularized_section_integral(K: StarBody, xi, method: str | None = None, tol: Tolerances = DEFAULT_TOL) -> float:
    """I(xi) = int_0^inf [A(z) - sum_{k <= n-2} A^{(k)}(0) z^k/k!] / z^n dz, n even."""
    n = K.dim
    if n % 2:
        raise ValueError("the regularized integral is defined for even dimensions")
    profile = section_profile(K, xi, method, tol)
    return regularized_integral(profile, n - 1.0, n - 2).value


def export_profile_csv(profile: SectionProfile, path, ts=None) -> None:
    """Write ``t,A`` rows (cached samples, or ``ts`` if given)."""
    if ts is not None:
        rows = [(float(t), float(profile(float(t)))) for t in ts]
    else:
        rows = profile.table()
    with open(path, "w", newline="") as fh:
        fh.write(f"# section function; dim={profile.dim} xi={','.join(f'{v:.12g}' for v in profile.xi)}\n")
        w = csv.writer(fh)
        w.writerow(["t", "A"])
        for t, a in rows:
            w.writerow([f"{t:.12g}", f"{a:.12g}"])
