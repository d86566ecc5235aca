"""Kernel pair, covariance, isometry guard, and the generalized family.

Frozen constants come from tests/oracles.py, where each kernel integral is
evaluated through two independent high-precision routes before freezing.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracsde.errors import (
    BoundarySingularityError,
    KernelDegenerateError,
    QuadFailureError,
)
from fracsde.kernels import (
    QuadratureSpec,
    covariance_R,
    fbm_mishura_instance,
    fbm_spec,
    isometry_residual,
    kernel_K,
    kernel_L,
    mishura_L,
    mishura_spec,
    normalization_constant,
    sonine_residual,
)
from fracsde.special import gamma_fn

C_H = {
    0.25: 0.645998003740752,
    0.3: 0.730282934079923,
    0.7: 0.218361826176783,
    0.75: 0.267411158757998,
}

KERNEL_K = {
    (0.3, 1.0, 0.5): 0.873014114338668,
    (0.7, 1.0, 0.5): 0.977140497393617,
    (0.3, 1.0, 0.99): 1.83531176806186,
    (0.3, 1.0, 0.01): 1.17774921168592,
}

KERNEL_L = {
    (0.3, 1.0, 0.5): 4.24000996070876,
    (0.7, 1.0, 0.5): 1.09882323683909,
}


def test_normalization_constant_matches_references():
    for h, want in C_H.items():
        assert normalization_constant(h) == pytest.approx(want, rel=1e-12)


def test_normalization_constant_rejects_half():
    with pytest.raises(KernelDegenerateError):
        normalization_constant(0.5)


def test_normalization_constant_one_sided_limits():
    """The two branch formulas behave differently at the junction.

    From below the constant tends to 1; from above it vanishes linearly
    (the 2H - 1 factor wins against the blowing-up Beta), and the kernel
    itself stays continuous because the inner integral diverges at the
    matching rate. Both facts are worth pinning so nobody "fixes" the
    apparent discontinuity.
    """
    assert normalization_constant(0.499) == pytest.approx(1.0, abs=2e-3)
    assert normalization_constant(0.501) == pytest.approx(1e-3, rel=2e-2)


def test_kernel_point_values_match_references():
    for (h, t, s), want in KERNEL_K.items():
        assert kernel_K(fbm_spec(h), t, s) == pytest.approx(want, rel=1e-8)
    for (h, t, s), want in KERNEL_L.items():
        assert kernel_L(fbm_spec(h), t, s) == pytest.approx(want, rel=1e-8)


def test_kernel_continuity_across_half():
    for h in (0.499, 0.501):
        assert kernel_K(fbm_spec(h), 1.0, 0.5) == pytest.approx(1.0, abs=5e-4)
    assert kernel_K(fbm_spec(0.5), 1.0, 0.5) == 1.0
    assert kernel_L(fbm_spec(0.5), 1.0, 0.5) == 1.0


def test_kernel_volterra_support():
    spec = fbm_spec(0.3)
    assert kernel_K(spec, 0.5, 0.7) == 0.0
    assert kernel_K(spec, 0.5, 0.5) == 0.0
    assert kernel_L(spec, 0.5, 0.7) == 0.0


def test_kernel_boundary_singularity():
    spec = fbm_spec(0.3)
    with pytest.raises(BoundarySingularityError):
        kernel_K(spec, 0.5, 0.0)
    with pytest.raises(BoundarySingularityError):
        kernel_L(spec, 0.5, 0.0)


def test_kernel_domain_check():
    spec = fbm_spec(0.3, horizon=1.0)
    with pytest.raises(ValueError):
        kernel_K(spec, 1.5, 0.5)


# ----------------------------------------------------------------------
# Covariance
# ----------------------------------------------------------------------


def test_covariance_closed_form_and_symmetry():
    spec = fbm_spec(0.3)
    assert covariance_R(spec, 1.0, 1.0) == pytest.approx(1.0, rel=1e-14)
    assert covariance_R(spec, 0.7, 0.7) == pytest.approx(0.7 ** 0.6, rel=1e-14)
    assert covariance_R(spec, 0.9, 0.4) == covariance_R(spec, 0.4, 0.9)


def test_covariance_brownian_is_minimum():
    spec = fbm_spec(0.5)
    assert covariance_R(spec, 0.8, 0.3) == pytest.approx(0.3, rel=1e-15)


def test_covariance_broadcasts_arrays():
    spec = fbm_spec(0.7)
    t = np.array([0.5, 1.0])
    out = covariance_R(spec, t[:, None], t[None, :])
    assert out.shape == (2, 2)
    assert out[0, 1] == pytest.approx(covariance_R(spec, 0.5, 1.0), rel=1e-15)


def test_covariance_rejects_points_outside_horizon():
    with pytest.raises(ValueError):
        covariance_R(fbm_spec(0.3), 1.5, 0.5)


def test_covariance_matrix_is_positive_semidefinite():
    spec = fbm_spec(0.3)
    t = np.linspace(0.2, 1.0, 5)
    mat = covariance_R(spec, t[:, None], t[None, :])
    assert np.linalg.eigvalsh(mat).min() > -1e-12


@settings(max_examples=60, deadline=None)
@given(
    h=st.floats(0.05, 0.95).filter(lambda x: abs(x - 0.5) > 0.01),
    t=st.floats(0.01, 1.0),
    s=st.floats(0.01, 1.0),
)
def test_covariance_cauchy_schwarz(h, t, s):
    spec = fbm_spec(h)
    r = covariance_R(spec, t, s)
    bound = np.sqrt(covariance_R(spec, t, t) * covariance_R(spec, s, s))
    assert abs(r) <= bound + 1e-12


# ----------------------------------------------------------------------
# Isometry guard
# ----------------------------------------------------------------------


def test_isometry_residual_at_probe_points():
    quad = QuadratureSpec(panels=64)
    assert isometry_residual(fbm_spec(0.3), 1.0, 0.5, quad) < 2e-6
    assert isometry_residual(fbm_spec(0.7), 1.0, 0.5, quad) < 1e-12


def test_isometry_residual_brownian_fast_path():
    assert isometry_residual(fbm_spec(0.5), 1.0, 0.5) == 0.0


def test_isometry_residual_guard_trips_at_default_resolution():
    """The default 8-panel budget cannot certify the rough H < 1/2 product.

    The refinement doubling detects its own inaccuracy and refuses to
    return a number rather than returning a wrong one.
    """
    with pytest.raises(QuadFailureError):
        isometry_residual(fbm_spec(0.3), 1.0, 0.5)


def test_isometry_residual_rejects_nonpositive_times():
    with pytest.raises(ValueError):
        isometry_residual(fbm_spec(0.7), 0.0, 0.5)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(panels=7)
    with pytest.raises(ValueError):
        QuadratureSpec(panels=8, abs_tol=0.0)
    assert QuadratureSpec(panels=8).abs_tol > 0


# ----------------------------------------------------------------------
# Generalized kernel pair
# ----------------------------------------------------------------------


def test_sonine_residual_of_exact_pair():
    """c ~ u^(-1/4), h ~ u^(-3/4) with Gamma normalization convolve to 1."""
    alpha = 0.25
    c = lambda u: np.asarray(u) ** (-alpha) / gamma_fn(1.0 - alpha)
    h = lambda u: np.asarray(u) ** (alpha - 1.0) / gamma_fn(alpha)
    quad = QuadratureSpec(panels=16)
    assert sonine_residual(c, h, 1.0, quad, c_order=1.0 - alpha, h_order=alpha) < 1e-10
    assert sonine_residual(c, h, 0.37, quad, c_order=1.0 - alpha, h_order=alpha) < 1e-10


def test_sonine_residual_needs_positive_time():
    c = lambda u: np.ones_like(np.asarray(u, dtype=float))
    with pytest.raises(ValueError):
        sonine_residual(c, c, 0.0)


def test_mishura_spec_rejects_non_sonine_pair():
    one = lambda u: np.ones_like(np.asarray(u, dtype=float))
    with pytest.raises(KernelDegenerateError):
        mishura_spec(one, lambda u: np.zeros_like(np.asarray(u, dtype=float)),
                     one, one, lambda u: 2.0 * np.ones_like(np.asarray(u, dtype=float)))


def test_mishura_spec_rejects_bad_integrability_exponents():
    one = lambda u: np.ones_like(np.asarray(u, dtype=float))
    zero = lambda u: np.zeros_like(np.asarray(u, dtype=float))
    with pytest.raises(ValueError, match="integrability"):
        mishura_spec(one, zero, one, one, one, p=1.9, q=1.9, r=1.9)


def test_mishura_instance_matches_fractional_companion_kernel():
    """Same object in two coordinate systems.

    The generalized inversion formula, fed the fractional factor functions,
    must land on the directly evaluated companion kernel. This is the
    cross-representation check that pins the Sonine scale rho.
    """
    inst = fbm_mishura_instance(0.7)
    direct = fbm_spec(0.7)
    for (t, s) in ((1.0, 0.5), (0.8, 0.3), (0.9, 0.85)):
        assert kernel_L(inst, t, s) == pytest.approx(kernel_L(direct, t, s), abs=1e-8)


def test_mishura_instance_requires_upper_branch():
    with pytest.raises(ValueError):
        fbm_mishura_instance(0.3)


def test_mishura_l_support_and_degeneracy():
    one = lambda u: np.ones_like(np.asarray(u, dtype=float))
    zero = lambda u: np.zeros_like(np.asarray(u, dtype=float))
    assert mishura_L(one, zero, one, one, 0.5, 0.7) == 0.0
    with pytest.raises(KernelDegenerateError):
        mishura_L(zero, zero, one, one, 0.7, 0.5)
