"""Acceptance suite: thirteen criteria at their stated tolerances.

Each test prints one ``criterion N PASS|FAIL`` line; the lines are collected
again in the pytest terminal summary.  Run alone with
``pytest tests/test_acceptance.py -v``.
"""

import math

import numpy as np
import pytest

from lzero.approximation import FIT_RESOLUTION, dyadicize_weights, fit_ellipsoid_product
from lzero.bodies import DirectionalEllipsoid, Ellipsoid, EuclideanBall, LinearImage, LqBall, mult_sum
from lzero.embedding import (
    ellipsoid_density,
    embedding_constant,
    embeds_in_L0,
    even_dim_factor,
    log_ft,
    log_ft_ellipsoid_closed_form,
    neg_p_embed_test,
    neg_p_transform,
    spectral_measure_density,
    verify_log_representation,
)
from lzero.experiments import (
    cauchy_log_integral,
    cauchy_log_moment_mc,
    counterexample_body,
    counterexample_root,
    counterexample_value,
    find_counterexample_threshold,
)
from lzero.numerics import integrate_sphere, sphere_area, sphere_grid
from lzero.sections import (
    fractional_derivative,
    regularized_section_integral,
    section_derivative_at_zero,
    section_profile,
)

from conftest import random_unit


def rel_err(got, want):
    return abs(got - want) / abs(want)


def check(name, value, ok):
    return (f"{name}={value:.3g}", bool(ok))


def random_rotation(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_spd(rng, n=3):
    Q = random_rotation(rng, n)
    return Q @ np.diag(rng.uniform(0.5, 2.0, n)) @ Q.T


def test_criterion_01_ball_transform_odd(acceptance):
    rng = np.random.default_rng(101)
    xi3, xi5 = random_unit(rng, 3), random_unit(rng, 5)
    c3 = log_ft(EuclideanBall(3), xi3, method="closed_form")
    r3 = log_ft(EuclideanBall(3), xi3, method="radial_slice")
    b5 = log_ft(EuclideanBall(5), xi5)
    b5r = log_ft(EuclideanBall(5), xi5, method="radial_slice")
    acceptance(1, "ball transform, odd n", [
        check("B3 closed rel", rel_err(c3, -2 * math.pi**2), rel_err(c3, -2 * math.pi**2) <= 1e-6),
        check("B3 radial rel", rel_err(r3, -2 * math.pi**2), rel_err(r3, -2 * math.pi**2) <= 1e-3),
        check("B5 rel", rel_err(b5, -12 * math.pi**3), rel_err(b5, -12 * math.pi**3) <= 1e-4),
        check("B5 radial rel", rel_err(b5r, -12 * math.pi**3), rel_err(b5r, -12 * math.pi**3) <= 1e-4),
    ])


def test_criterion_02_ball_transform_even(acceptance):
    rng = np.random.default_rng(102)
    xi = random_unit(rng, 4)
    target = 2 * math.pi**2 / 3
    I = regularized_section_integral(EuclideanBall(4), xi)
    Ir = regularized_section_integral(EuclideanBall(4), xi, method="radial_slice")
    exact = log_ft_ellipsoid_closed_form(xi, 1.0, 1.0, xi)
    acceptance(2, "ball transform, even n", [
        check("I rel", rel_err(I, target), rel_err(I, target) <= 1e-4),
        check("I radial rel", rel_err(Ir, target), rel_err(Ir, target) <= 1e-4),
        check("a4*I vs closed form rel", rel_err(even_dim_factor(4) * I, exact),
              rel_err(even_dim_factor(4) * I, exact) <= 1e-4 and abs(exact + 8 * math.pi**2) < 1e-9),
    ])


def test_criterion_03_ellipsoid_closed_form(acceptance):
    rng = np.random.default_rng(103)
    worst = {3: 0.0, 5: 0.0}
    for n in (3, 5):
        for _ in range(10):
            x, theta = random_unit(rng, n), random_unit(rng, n)
            a, b = rng.uniform(0.5, 2.0, 2)
            got = log_ft(DirectionalEllipsoid(x, a, b), theta)
            worst[n] = max(worst[n], rel_err(got, log_ft_ellipsoid_closed_form(x, a, b, theta)))
    x = random_unit(rng, 3)
    spot = log_ft(DirectionalEllipsoid(x, 2.0, 1.0), x)
    acceptance(3, "ellipsoid transforms vs closed form", [
        check("n=3 worst rel", worst[3], worst[3] <= 1e-3),
        check("n=5 worst rel", worst[5], worst[5] <= 1e-3),
        check("spot rel", rel_err(spot, -math.pi**2 / 2), rel_err(spot, -math.pi**2 / 2) <= 1e-3),
    ])


def test_criterion_04_constant(acceptance):
    rng = np.random.default_rng(104)
    C = embedding_constant(EuclideanBall(3))
    # oracle: C = mean ln||x|| - mean ln|(x, xi)|, the second mean by singular-axis quadrature
    means = []
    for x in random_unit(rng, 3, 3):
        val = integrate_sphere(lambda P: np.log(np.abs(P @ x)), sphere_grid(3), singular_axis=x)
        means.append(val / sphere_area(3))
    oracle = 0.0 - float(np.mean(means))
    acceptance(4, "constant C for B3", [
        check("digamma path err", abs(C - 1), abs(C - 1) <= 1e-8),
        check("quadrature oracle err", abs(oracle - 1), abs(oracle - 1) <= 1e-3 and abs(C - oracle) <= 1e-3),
    ])


def test_criterion_05_probability_measure(acceptance):
    rng = np.random.default_rng(105)
    bodies = [("B3", EuclideanBall(3)), ("B4", EuclideanBall(4))]
    bodies += [(f"E{i}", Ellipsoid(random_spd(rng))) for i in range(10)]
    bodies += [(f"M{i}", mult_sum(Ellipsoid(random_spd(rng)), Ellipsoid(random_spd(rng)))) for i in range(5)]
    worst, name = 0.0, ""
    for label, K in bodies:
        mass = spectral_measure_density(K).mass
        if abs(mass - 1) >= worst:
            worst, name = abs(mass - 1), label
    acceptance(5, "spectral measure is a probability measure", [
        check(f"worst |mass-1| ({name}, {len(bodies)} bodies)", worst, worst <= 1e-3),
    ])


def test_criterion_06_three_dim_normed(acceptance):
    checks = []
    for q in (1.5, 2.0, 3.0, 6.0):
        rep = embeds_in_L0(LqBall(3, q))
        checks.append(check(f"q={q:g} {rep.verdict} margin", rep.min_margin,
                            rep.verdict == "embeds" and rep.min_margin >= -1e-6 * rep.scale))
    acceptance(6, "l_q balls in R^3 embed", checks)


def test_criterion_07_counterexample(acceptance):
    rec = counterexample_value(1.0)
    rec0 = counterexample_value(0.0)
    grid_rep = embeds_in_L0(counterexample_body(1.0), sphere_grid(4, 2))
    e4 = np.array([0.0, 0.0, 0.0, 1.0])
    Nstar = find_counterexample_threshold(0.0, 1.0)
    N = 1e8
    asym = abs(N**0.25 * counterexample_root(N) - 1)
    acceptance(7, "four-dimensional counterexample", [
        check("value(1)", rec.closed_form_value, abs(rec.closed_form_value + 0.838) <= 1e-3),
        check("numeric rel", rel_err(rec.numeric_I, rec.closed_form_value),
              rel_err(rec.numeric_I, rec.closed_form_value) <= 1e-3),
        (f"verdict {rec.verdict}, witness e4", rec.verdict == "fails" and np.allclose(rec.witness, e4)),
        (f"grid classifier {grid_rep.verdict} at e4",
         grid_rep.verdict == "fails" and np.allclose(np.abs(grid_rep.witness[0]), e4)),
        check("value(0) - 8pi/9", rec0.closed_form_value - 8 * math.pi / 9,
              abs(rec0.closed_form_value - 8 * math.pi / 9) < 1e-12 and rec0.numeric_I > 0),
        check("N*", Nstar, 0 < Nstar < 1),
        check("|N^1/4 a_N - 1|", asym, asym < 0.01),
    ])


def test_criterion_08_representation(acceptance):
    rng = np.random.default_rng(108)
    B = EuclideanBall(3)
    ball = verify_log_representation(B, lambda P: np.full(len(P), 1 / (4 * math.pi)), 1.0,
                                     random_unit(rng, 3, 5), tol=5e-3)
    worst = 0.0
    for _ in range(10):
        x = random_unit(rng, 3)
        a, b = rng.uniform(0.5, 2.0, 2)
        K = DirectionalEllipsoid(x, a, b)
        rep = verify_log_representation(K, ellipsoid_density(x, a, b), embedding_constant(K),
                                        random_unit(rng, 3, 5), tol=5e-3)
        worst = max(worst, rep.max_residual)
    acceptance(8, "log representation identity", [
        check("B3 residual", ball.max_residual, ball.max_residual < 5e-3),
        check("ellipsoid worst residual", worst, worst < 5e-3),
    ])


def test_criterion_09_approximation(acceptance):
    K = LqBall(3, 4.0)
    density = spectral_measure_density(K, sphere_grid(3, FIT_RESOLUTION[3]))
    fits = [fit_ellipsoid_product(K, a, 1.0, s, density=density) for a, s in ((0.4, 0.4), (0.2, 0.2), (0.1, 0.1))]
    errs = [f.error for f in fits]
    P = fits[-1].product
    D = dyadicize_weights(P, 10)
    g = sphere_grid(3)
    pert = float(np.max(np.abs(D.log_gauge(g.nodes) - P.log_gauge(g.nodes))))
    rep = embeds_in_L0(P.as_body())
    acceptance(9, "ellipsoid-product approximation of l_4", [
        ("errors " + ", ".join(f"{e:.4g}" for e in errs), errs[0] > errs[1] > errs[2]),
        check("final error", errs[-1], errs[-1] < 0.05),
        check("|sum w - 1|", abs(math.fsum(P.weights) - 1), abs(math.fsum(P.weights) - 1) <= 1e-12),
        check("dyadic perturbation", pert, pert < 1e-2 and math.fsum(D.weights) == 1.0),
        (f"fitted product {rep.verdict}", rep.verdict == "embeds"),
    ])


def test_criterion_10_linear_covariance(acceptance):
    rng = np.random.default_rng(110)
    worst = 0.0
    for _ in range(5):
        T = np.diag(rng.uniform(0.5, 2.0, 3))
        K = DirectionalEllipsoid(random_unit(rng, 3), *rng.uniform(0.5, 2.0, 2))
        y = random_unit(rng, 3)
        lhs = log_ft(LinearImage(T, K), y)
        rhs = log_ft(K, np.linalg.solve(T.T, y)) / abs(np.linalg.det(T))
        worst = max(worst, rel_err(lhs, rhs))
    acceptance(10, "linear covariance of the transform", [check("worst rel", worst, worst <= 1e-3)])


def test_criterion_11_negative_p(acceptance):
    xi = np.array([0.0, 0.6, 0.8])
    got = neg_p_transform(EuclideanBall(3), xi, 0.5)
    oracle = 2**2.5 * math.pi**1.5 * math.gamma(1.25) / math.gamma(0.25)
    K = counterexample_body(1.0)
    verdicts = {p: neg_p_embed_test(K, p, sphere_grid(4, 1)).verdict for p in (0.5, 0.25, 0.1)}
    acceptance(11, "L_{-p} test", [
        check("ball p=0.5 value", got, rel_err(got, oracle) <= 1e-3 and abs(oracle - 7.875) < 1e-3),
        (" ".join(f"p={p:g}:{v}" for p, v in verdicts.items()), "fails" in verdicts.values()),
    ])


def test_criterion_12_cauchy(acceptance):
    r = cauchy_log_moment_mc(1.0, [1.0], 10**6, seed=12)
    dev = abs(r.estimate - 0.5 * math.log(2))
    integral = cauchy_log_integral()
    acceptance(12, "Cauchy log-moment", [
        check("|z|", dev / r.stderr, dev <= 3 * r.stderr),
        check("log integral", integral, abs(integral) <= 1e-6),
    ])


def test_criterion_13_fractional_derivative(acceptance):
    xi = np.array([0.0, 0.0, 1.0])
    checks = []
    for method in ("closed_form", "radial_slice"):
        prof = section_profile(EuclideanBall(3), xi, method)
        d15 = fractional_derivative(prof, 1.5)
        gap = abs(fractional_derivative(prof, 1.999) - section_derivative_at_zero(EuclideanBall(3), xi, 2, method))
        checks.append(check(f"{method} q=1.5 rel", rel_err(d15, -2 * math.sqrt(math.pi)),
                            rel_err(d15, -2 * math.sqrt(math.pi)) <= 1e-4))
        checks.append(check(f"{method} q->2 gap", gap, gap <= 1e-2))
    acceptance(13, "fractional derivative", checks)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
