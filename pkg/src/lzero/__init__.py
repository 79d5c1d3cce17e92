"""Fourier transforms of log-norms of star bodies, with tests for embedding in L0."""

from .approximation import (
    EllipsoidProduct,
    discretize_sphere_measure,
    dyadicize_weights,
    fit_ellipsoid_product,
    fit_psum,
    product_gauge,
    smoothed_log_norm,
)
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
    gauge,
    linear_image,
    log_blend,
    mult_sum,
    p_sum,
    radial,
    radial_distance,
    revolution_body,
)
from .bodyspec import BodySpecError, dump_body, load_body, parse_body
from .embedding import (
    embedding_constant,
    embeds_in_L0,
    log_ft,
    log_ft_ellipsoid_closed_form,
    neg_p_embed_test,
    spectral_measure_density,
    verify_log_representation,
)
from .experiments import (
    cauchy_log_moment_mc,
    counterexample_body,
    counterexample_value,
    find_counterexample_threshold,
)
from .numerics import ConvergenceError, SphereGrid, Tolerances, sphere_grid
from .sections import (
    fractional_derivative,
    regularized_section_integral,
    section_value,
    section_profile,
)

__version__ = "0.1.0"
