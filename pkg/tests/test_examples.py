"""Worked examples attached to the module operations."""

import math
from fractions import Fraction

import numpy as np
import pytest

from lzero.approximation import (
    EllipsoidProduct,
    discretize_sphere_measure,
    dyadicize_weights,
    fit_ellipsoid_product,
    fit_psum,
    product_gauge,
    smoothed_log_norm,
)
from lzero.bodies import (
    DirectionalEllipsoid,
    Ellipsoid,
    EuclideanBall,
    LqBall,
    linear_image,
    mult_sum,
    p_sum,
    poly_power_profile,
    radial_distance,
    revolution_body,
)
from lzero.embedding import (
    closed_form_density,
    embedding_constant,
    embeds_in_L0,
    log_ft,
    neg_p_embed_test,
    verify_log_representation,
)
from lzero.experiments import (
    counterexample_body,
    counterexample_closed_form,
    counterexample_root,
    counterexample_value,
    find_counterexample_threshold,
    cauchy_log_moment_mc,
)
from lzero.numerics import (
    bracket_root,
    derivative_at_zero,
    digamma,
    integrate_1d,
    integrate_sphere,
    sphere_grid,
)
from lzero.sections import (
    montecarlo_slice,
    regularized_integral,
    section_derivative_at_zero,
    section_profile,
)

from conftest import random_unit

EULER_GAMMA = 0.5772156649015329


# numerics


def test_moment_of_square():
    g = sphere_grid(3)
    e = np.array([0.0, 0.6, 0.8])
    assert integrate_sphere(lambda P: (P @ e) ** 2, g) == pytest.approx(4 * math.pi / 3, rel=1e-10)


def test_constant_and_odd_integrands():
    g = sphere_grid(3)
    assert integrate_sphere(lambda P: np.ones(len(P)), g) == pytest.approx(4 * math.pi)
    x = np.array([0.2, -0.3, 0.9])
    assert abs(integrate_sphere(lambda P: P @ x, g)) < 1e-12


def test_log_abs_integral_default_resolution(rng):
    for x in random_unit(rng, 3, 5):
        val = integrate_sphere(lambda P: np.log(np.abs(P @ x)), sphere_grid(3), singular_axis=x)
        assert val == pytest.approx(-4 * math.pi, abs=4 * math.pi * 1e-3)


def test_integrate_1d_examples():
    assert integrate_1d(math.log, 0.0, 1.0) == pytest.approx(-1.0, abs=1e-8)
    assert integrate_1d(lambda t: t**-0.5, 0.0, 1.0, singularity=-0.5) == pytest.approx(2.0, abs=1e-8)


def test_derivative_examples():
    assert derivative_at_zero(lambda t: math.pi * (1 - np.asarray(t) ** 2), 2) == pytest.approx(-2 * math.pi, abs=1e-8)
    f = lambda t: math.pi**2 / 2 * (1 - np.asarray(t) ** 2) ** 2
    assert derivative_at_zero(f, 4) == pytest.approx(12 * math.pi**2, abs=1e-6)
    assert derivative_at_zero(np.cos, 2) == pytest.approx(-1.0, abs=1e-8)


def test_bracket_root_examples():
    assert bracket_root(lambda x: 1 - x * x - x**4, 0, 1) == pytest.approx(math.sqrt((math.sqrt(5) - 1) / 2), abs=1e-14)
    assert bracket_root(lambda x: x - 0.5, 0, 1) == pytest.approx(0.5)
    assert bracket_root(lambda x: 1 - x * x, 0, 2) == pytest.approx(1.0)


def test_digamma_examples():
    # independent oracle: gamma as a partial sum of 1/k - ln
    assert digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-10)
    assert digamma(0.5) == pytest.approx(-EULER_GAMMA - 2 * math.log(2), abs=1e-10)
    assert digamma(1.5) - digamma(0.5) == pytest.approx(2.0, abs=1e-12)


# bodies


def test_gauge_examples():
    assert EuclideanBall(3).gauge(np.array([3.0, 4.0, 0.0])) == pytest.approx(5.0)
    assert LqBall(3, 1.0).gauge(np.ones(3)) == pytest.approx(3.0)
    x = np.array([0.0, 0.6, 0.8])
    assert DirectionalEllipsoid(x, 2.5, 0.7).gauge(x) == pytest.approx(1 / 2.5)


def test_mult_sum_examples(rng):
    B = EuclideanBall(3)
    twoB = linear_image(np.eye(3) / 2, B)
    X = rng.standard_normal((100, 3))
    assert np.allclose(mult_sum(B, twoB).gauge(X), np.linalg.norm(X, axis=1) / math.sqrt(2))
    K, L = LqBall(3, 3.0), DirectionalEllipsoid(np.array([1.0, 0, 0]), 2.0, 1.0)
    lhs = np.log(mult_sum(K, L).gauge(X))
    rhs = (np.log(K.gauge(X)) + np.log(L.gauge(X))) / 2
    assert np.max(np.abs(lhs - rhs)) <= 1e-15 * np.max(np.abs(rhs)) + 1e-15


def test_p_sum_examples(rng):
    B, K = EuclideanBall(3), LqBall(3, 3.0)
    X = rng.standard_normal((20, 3))
    r = np.linalg.norm(X, axis=1)
    assert np.allclose(p_sum(1.0, B, B).gauge(X), 2 * r)
    assert np.allclose(p_sum(0.3, K, K).gauge(X), 2 ** (1 / 0.3) * K.gauge(X))
    assert np.allclose(p_sum(-1.0, B, B).gauge(X), r / 2)


def test_linear_image_examples(rng):
    B = EuclideanBall(3)
    X = rng.standard_normal((50, 3))
    assert np.allclose(linear_image(np.eye(3), B).gauge(X), B.gauge(X))
    a, b = 2.0, 0.5
    K = linear_image(np.diag([1 / a, 1 / b, 1 / b]), B)
    E = DirectionalEllipsoid(np.array([1.0, 0, 0]), a, b)
    assert np.allclose(K.gauge(X), E.gauge(X), rtol=1e-12)
    assert np.allclose(K.gauge(3 * X), 3 * K.gauge(X))


def test_radial_distance_triangle(rng):
    g = sphere_grid(3, 8)
    for _ in range(5):
        bodies = [Ellipsoid(np.diag(rng.uniform(0.5, 2, 3))) for _ in range(3)]
        K, L, M = bodies
        assert radial_distance(K, M, g) <= radial_distance(K, L, g) + radial_distance(L, M, g) + 1e-15


def test_revolution_examples(rng):
    K = revolution_body(poly_power_profile([1.0, 0.0, -1.0], 0.5), 3)
    X = rng.standard_normal((100, 3))
    assert np.allclose(K.gauge(X), np.linalg.norm(X, axis=1), rtol=1e-8)
    C = counterexample_body(1.0)
    assert C.gauge(np.array([0, 0, 0, 1.0])) == pytest.approx(1 / 0.786151377757, rel=1e-9)
    y = np.array([0.3, -0.2, 0.5, 0.0])
    assert C.gauge(y) == pytest.approx(np.linalg.norm(y), rel=1e-10)


# sections


def test_counterexample_section_along_axis():
    N = 1.0
    prof = section_profile(counterexample_body(N), np.eye(4)[3])
    for z in (0.0, 0.3, 0.7):
        assert prof(z) == pytest.approx(4 * math.pi / 3 * (1 - z * z - N * z**4), rel=1e-12)
    assert prof(0.8) == 0.0


def test_section_invariants(rng):
    K = LqBall(3, 3.0)
    prof = section_profile(K, random_unit(rng, 3))
    ts = np.linspace(0, prof.t_max, 9)
    a, b = prof(ts), prof(-ts)
    assert np.all(a >= 0) and np.allclose(a, b) and a[0] > 0


def test_closed_form_availability():
    x = np.array([0.0, 0.6, 0.8])
    assert section_profile(EuclideanBall(3), x).method == "closed_form"
    assert section_profile(DirectionalEllipsoid(x, 2, 1), x).method == "closed_form"
    assert section_profile(counterexample_body(0.5), np.eye(4)[3]).method == "closed_form"


def test_section_derivative_examples():
    x = np.array([0.0, 0.0, 1.0])
    a, b = 2.0, 0.7
    got = section_derivative_at_zero(DirectionalEllipsoid(x, a, b), x, 2)
    assert got == pytest.approx(-2 * math.pi * b * b / a / a, rel=1e-10)
    assert section_derivative_at_zero(EuclideanBall(5), np.eye(5)[0], 4) == pytest.approx(12 * math.pi**2, rel=1e-8)


def test_radial_slice_vs_montecarlo(rng):
    for _ in range(3):
        A = rng.standard_normal((3, 3))
        K = Ellipsoid(A @ A.T + np.eye(3))
        xi = random_unit(rng, 3)
        prof = section_profile(K, xi, "radial_slice")
        t = 0.4 * prof.t_max
        val, err = montecarlo_slice(K, xi, t, 200_000, seed=int(rng.integers(1 << 30)))
        assert abs(val - prof(t)) <= 3 * err


def test_ball4_integral_padding_invariant():
    for method in ("closed_form", "radial_slice"):
        prof = section_profile(EuclideanBall(4), np.eye(4)[0], method)
        base = regularized_integral(prof, 3.0, 2).value
        padded = regularized_integral(prof, 3.0, 2, upper=2 * prof.t_max).value
        assert padded == pytest.approx(base, abs=1e-10)


def test_counterexample_regularized_integral():
    for N in (0.0, 1.0, 3.0):
        prof = section_profile(counterexample_body(N), np.eye(4)[3])
        got = regularized_integral(prof, 3.0, 2).value
        assert got == pytest.approx(counterexample_closed_form(N), rel=1e-8)


# embedding


def test_ball_density_constant():
    rep = embeds_in_L0(EuclideanBall(3), sphere_grid(3, 6))
    assert np.allclose(rep.density.values, 1 / (4 * math.pi), rtol=1e-9)
    assert rep.mass == pytest.approx(1.0, abs=1e-9)


def test_mult_sum_density_is_average(rng):
    E1 = DirectionalEllipsoid(random_unit(rng, 3), 1.4, 0.8)
    E2 = DirectionalEllipsoid(random_unit(rng, 3), 0.7, 1.1)
    M = mult_sum(E1, E2)
    for xi in random_unit(rng, 3, 4):
        avg = 0.5 * (log_ft(E1, xi) + log_ft(E2, xi))
        assert log_ft(M, xi) == pytest.approx(avg, rel=1e-3)


@pytest.mark.parametrize("n", [3, 4])
def test_directional_ellipsoids_embed(n, rng):
    K = DirectionalEllipsoid(random_unit(rng, n), 1.6, 0.9)
    rep = embeds_in_L0(K, sphere_grid(n, 6 if n == 3 else 2))
    assert rep.verdict == "embeds"
    assert rep.min_margin >= -rep.tol


def test_constant_examples():
    K = LqBall(3, 3.0)
    assert embedding_constant(linear_image(np.eye(3) / 3.0, K)) == pytest.approx(embedding_constant(K) - math.log(3.0))
    assert embedding_constant(EuclideanBall(5)) == pytest.approx(4 / 3, abs=1e-12)


def test_verify_scaled_ball(rng):
    twoB = linear_image(np.eye(3) / 2, EuclideanBall(3))
    dens = closed_form_density(EuclideanBall(3))
    rep = verify_log_representation(twoB, dens, 1 - math.log(2), random_unit(rng, 3, 3), tol=1e-3)
    assert rep.passed
    rep = verify_log_representation(EuclideanBall(3), dens, 1.0, random_unit(rng, 3, 3), tol=1e-3)
    assert rep.passed


def test_neg_p_mult_sum_of_ellipsoids_embeds():
    E1 = DirectionalEllipsoid(np.array([1.0, 0, 0]), 1.0, 0.5)
    E2 = DirectionalEllipsoid(np.array([0, 0, 1.0]), 1.0, 0.6)
    assert neg_p_embed_test(mult_sum(E1, E2), 0.5, sphere_grid(3, 4)).verdict == "embeds"


# approximation


def test_smoothed_log_norm_examples():
    x = np.array([0.0, 0.6, 0.8])
    for a, b in ((0.1, 1.0), (0.5, 2.0)):
        assert smoothed_log_norm(EuclideanBall(3), x, a, b) == pytest.approx(0.0, abs=1e-9)
    twoB = linear_image(np.eye(3) / 2, EuclideanBall(3))
    assert smoothed_log_norm(twoB, x, 0.2) == pytest.approx(-math.log(2), abs=1e-6)


def test_smoothed_log_norm_converges_for_lq4():
    K = LqBall(3, 4.0)
    nodes = sphere_grid(3, 6).nodes
    sups = []
    for a in (0.4, 0.2, 0.1):
        f = np.array([smoothed_log_norm(K, u, a) for u in nodes])
        r = f - np.log(K.gauge(nodes))
        sups.append(0.5 * (r.max() - r.min()))
    assert sups[0] > sups[1] > sups[2]


def test_discretize_examples():
    g = sphere_grid(3, 8)
    atoms = discretize_sphere_measure((g, g.weights), 0.5)
    assert math.fsum(w for _, w in atoms) == pytest.approx(1.0, abs=1e-15)
    m = np.zeros(len(g))
    m[17] = 1.0
    atoms = discretize_sphere_measure((g, m), 0.3)
    assert len(atoms) == 1
    assert np.allclose(np.abs(atoms[0][0] @ g.nodes[17]), 1.0) and atoms[0][1] == 1.0


def test_halving_sigma_does_not_increase_error():
    K = LqBall(3, 4.0)
    from lzero.approximation import FIT_RESOLUTION
    from lzero.embedding import spectral_measure_density

    dens = spectral_measure_density(K, sphere_grid(3, FIT_RESOLUTION[3]))
    errs = [fit_ellipsoid_product(K, 0.1, 1.0, s, density=dens).error for s in (0.8, 0.4, 0.2, 0.1)]
    assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errs, errs[1:]))


def test_fit_ball_error_shrinks():
    errs = [fit_ellipsoid_product(EuclideanBall(3), a, 1.0, a, grid=sphere_grid(3, 12)).error for a in (0.4, 0.2)]
    assert errs[1] < errs[0] < 0.05


def test_fit_directional_ellipsoid():
    K = DirectionalEllipsoid(np.array([1.0, 2.0, 2.0]) / 3, 1.2, 1.0)
    assert fit_ellipsoid_product(K, 0.1, 1.0, 0.2).error < 0.05


def test_product_gauge_examples(rng):
    E = DirectionalEllipsoid(np.array([1.0, 0, 0]), 2.0, 1.0)
    F = DirectionalEllipsoid(np.array([0, 1.0, 0]), 0.5, 1.0)
    X = rng.standard_normal((10, 3))
    assert np.allclose(product_gauge(EllipsoidProduct((E,), np.array([1.0])), X), E.gauge(X))
    P = EllipsoidProduct((E, F), np.array([0.5, 0.5]))
    assert np.allclose(product_gauge(P, X), mult_sum(E, F).gauge(X))
    assert np.allclose(product_gauge(P, 2.5 * X), 2.5 * product_gauge(P, X))


def test_dyadic_examples():
    E = [DirectionalEllipsoid(np.eye(3)[i], 1.0, 0.5) for i in range(3)]
    P = EllipsoidProduct(tuple(E), np.array([0.5, 0.25, 0.25]))
    D = dyadicize_weights(P, 6)
    assert len(D.parts) == 3 and np.array_equal(D.weights, P.weights)
    P = EllipsoidProduct(tuple(E[:2]), np.array([1 / 3, 2 / 3]))
    D = dyadicize_weights(P, 4)
    assert math.fsum(D.weights) == 1.0
    per_part = {}
    for part, w in zip(D.parts, D.weights):
        per_part[id(part)] = per_part.get(id(part), Fraction(0)) + Fraction(w)
    assert per_part[id(E[0])] == Fraction(5, 16)


def test_dyadic_perturbation_shrinks_with_depth(rng):
    parts = tuple(DirectionalEllipsoid(u, 0.4, 1.0) for u in random_unit(rng, 3, 7))
    P = EllipsoidProduct(parts, rng.dirichlet(np.ones(7)))
    g = sphere_grid(3, 16)
    pert = [np.max(np.abs(dyadicize_weights(P, d).log_gauge(g.nodes) - P.log_gauge(g.nodes))) for d in (4, 8, 12)]
    assert pert[0] > pert[1] > pert[2]


def test_fit_psum_examples():
    ball_fit = fit_psum(EuclideanBall(3), -0.5, 1.0, 1.0)
    assert ball_fit.error < 1e-9
    E1 = DirectionalEllipsoid(np.array([1.0, 0, 0]), 1.0, 0.5)
    E2 = DirectionalEllipsoid(np.array([0, 0.6, 0.8]), 0.7, 1.2)
    K = p_sum(0.5, E1, E2)
    fit = fit_psum(K, 0.5, candidates=[E1, E2])
    assert fit.error < 1e-6


def test_fit_psum_lq4_refinement():
    K = LqBall(3, 4.0)
    errs = [fit_psum(K, -0.5, 0.5, grid=sphere_grid(3, r), check=False).error for r in (4, 8, 16)]
    assert errs[0] > errs[1] > errs[2]


# experiments


def test_counterexample_body_examples():
    assert counterexample_body(0.0).gauge(np.eye(4)[3]) == pytest.approx(1.0)
    assert counterexample_body(1.0).gauge(np.eye(4)[3]) == pytest.approx(1.27202, abs=1e-5)


@pytest.mark.parametrize("N", [0.0, 1.0, 10.0, 100.0])
def test_profile_concavity(N):
    a = counterexample_root(N)
    f = poly_power_profile([1.0, 0.0, -1.0, 0.0, -N], 1 / 3)
    s = np.linspace(-a, a, 41)
    mid = 0.5 * (s[:-2] + s[2:])
    assert np.all(f(mid) >= 0.5 * (f(s[:-2]) + f(s[2:])) - 1e-12)


def test_counterexample_value_examples():
    assert counterexample_value(0.0).closed_form_value == pytest.approx(8 * math.pi / 9)
    assert counterexample_value(0.0).verdict == "embeds"
    rec = counterexample_value(1.0)
    assert rec.closed_form_value == pytest.approx(-0.838, abs=1e-3)
    assert rec.verdict == "fails"


def test_threshold_examples():
    assert counterexample_closed_form(0.0) > 0 > counterexample_closed_form(1.0)
    vals = [counterexample_closed_form(N) for N in np.linspace(0, 10, 41)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    Ns = find_counterexample_threshold(0.0, 1.0)
    assert counterexample_value(Ns - 0.1).verdict == "embeds"
    assert counterexample_value(Ns + 0.1).verdict == "fails"


def test_cauchy_examples():
    r = cauchy_log_moment_mc(0.0, [1.0], 10_000, seed=0)
    assert r.target == 0.0
    r = cauchy_log_moment_mc(1.0, [], 10_000, seed=0)
    assert r.target == 0.0 and r.estimate == 0.0
