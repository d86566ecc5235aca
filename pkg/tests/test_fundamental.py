"""Toeplitz increment covariance, bordered inverse, and the weight vector.

The recursion is checked against a dense numpy inverse (different algorithm,
same matrix) and against constants frozen from the mpmath route in
tests/oracles.py, which builds the matrix and inverts it at 30 digits.
"""

import numpy as np
import pytest

from fracsde.errors import LocalDeterminismError
from fracsde.fundamental import (
    InverseState,
    autocovariance_row,
    build_covariance,
    fundamental_weights,
    gershgorin_margin,
    increment_autocovariance,
    martingale_orthogonality_stat,
    recursive_inverse,
    schur_extend_inverse,
)

WEIGHTS_03_5 = [
    6.7570447608942,
    8.30350862465984,
    8.66621037231992,
    8.30350862465984,
    6.7570447608942,
]

COVDIFF_07_3 = {
    (0, 0): 0.214798004992418,
    (1, 0): 0.0686296618133132,
    (2, 0): 0.0405436688847464,
}


def test_autocovariance_reference_values():
    assert increment_autocovariance(0.3, 0) == pytest.approx(1.0, rel=1e-15)
    assert increment_autocovariance(0.3, 1) == pytest.approx(-0.242141716744801, rel=1e-12)
    assert increment_autocovariance(0.7, 1) == pytest.approx(0.319507910772894, rel=1e-12)


def test_autocovariance_sign_pattern():
    # negatively correlated increments below 1/2, positively above
    for k in range(1, 8):
        assert increment_autocovariance(0.3, k) < 0
        assert increment_autocovariance(0.7, k) > 0
        assert increment_autocovariance(0.5, k) == 0.0


def test_autocovariance_row_matches_scalar():
    row = autocovariance_row(0.7, 6)
    for k in range(6):
        assert row[k] == pytest.approx(increment_autocovariance(0.7, k), rel=1e-15)


def test_autocovariance_rejects_negative_lag():
    with pytest.raises(ValueError):
        increment_autocovariance(0.3, -1)


def test_build_covariance_entries():
    cov = build_covariance(0.7, 3)
    for (i, j), want in COVDIFF_07_3.items():
        assert cov.matrix[i, j] == pytest.approx(want, rel=1e-12)
        assert cov.matrix[j, i] == pytest.approx(want, rel=1e-12)
    # Toeplitz structure: constant diagonals
    assert cov.matrix[1, 1] == cov.matrix[0, 0]
    assert cov.matrix[2, 1] == cov.matrix[1, 0]


# ----------------------------------------------------------------------
# Bordered recursion
# ----------------------------------------------------------------------


@pytest.mark.parametrize("hurst", [0.3, 0.7])
@pytest.mark.parametrize("n", [1, 2, 8, 64])
def test_recursive_inverse_matches_dense_route(hurst, n):
    state, lams = recursive_inverse(hurst, n)
    cov = build_covariance(hurst, n)
    dense = np.linalg.inv(cov.matrix)
    assert np.allclose(state.inv, dense, rtol=1e-8, atol=1e-8)
    assert len(lams) == n
    assert min(lams) > 0.0


def test_recursive_inverse_is_an_actual_inverse():
    state, _ = recursive_inverse(0.3, 32)
    cov = build_covariance(0.3, 32)
    eye = state.inv @ cov.matrix
    assert np.max(np.abs(eye - np.eye(32))) < 1e-9


def test_brownian_increments_are_white():
    state, lams = recursive_inverse(0.5, 8)
    assert np.allclose(state.inv, 8.0 * np.eye(8), atol=1e-12)
    assert lams == pytest.approx([1.0 / 8.0] * 8, rel=1e-14)


def test_schur_extension_rejects_determined_increment():
    state = InverseState(np.array([[1.0]]), 1.0)
    with pytest.raises(LocalDeterminismError):
        schur_extend_inverse(state, np.array([1.0]), 1.0)


def test_schur_extension_checks_border_shape():
    state = InverseState(np.eye(2), 1.0)
    with pytest.raises(ValueError):
        schur_extend_inverse(state, np.array([1.0]), 1.0)


def test_conditional_variances_shrink_with_history():
    """Each extra observed increment can only sharpen the prediction."""
    _, lams = recursive_inverse(0.3, 24, scale=1.0)
    assert all(b <= a + 1e-12 for a, b in zip(lams, lams[1:]))


# ----------------------------------------------------------------------
# Weight vector
# ----------------------------------------------------------------------


def test_fundamental_weights_reference_vector():
    fw = fundamental_weights(0.3, 5, scale=0.1)
    assert fw.scaled == pytest.approx(WEIGHTS_03_5, rel=1e-10)


def test_fundamental_weights_are_palindromic():
    # persymmetry of the Toeplitz inverse reflects the weight vector
    fw = fundamental_weights(0.7, 9)
    assert fw.scaled == pytest.approx(fw.scaled[::-1], rel=1e-10)


def test_fundamental_weights_solve_the_ones_system():
    fw = fundamental_weights(0.3, 12, scale=0.25)
    row = autocovariance_row(0.3, 12) * 0.25 ** 0.6
    idx = np.abs(np.subtract.outer(np.arange(12), np.arange(12)))
    assert fw.scaled @ row[idx] == pytest.approx(np.ones(12), abs=1e-8)


def test_fundamental_weights_scale_relation():
    fw = fundamental_weights(0.7, 6, scale=0.5)
    assert fw.scaled == pytest.approx(fw.unscaled / 0.5 ** 1.4, rel=1e-12)


def test_brownian_weights_counteract_the_step():
    fw = fundamental_weights(0.5, 10)
    assert fw.unscaled == pytest.approx(np.ones(10), rel=1e-12)
    assert fw.scaled == pytest.approx(10.0 * np.ones(10), rel=1e-12)


# ----------------------------------------------------------------------
# Gershgorin margin and martingale check
# ----------------------------------------------------------------------


def test_gershgorin_margin_reference_values():
    assert gershgorin_margin(0.3, 10) == pytest.approx(0.62193944334421, rel=1e-12)
    assert gershgorin_margin(0.7, 10) == pytest.approx(-0.222421073784786, rel=1e-12)


def test_gershgorin_margin_signs():
    """Diagonal dominance certifies positivity below 1/2 but not above.

    Above 1/2 the slowly decaying positive autocovariances overwhelm the
    diagonal; positivity there must come from the recursion itself, which
    is exactly why the lambda trace is surfaced.
    """
    assert gershgorin_margin(0.3, 50) > 0
    assert gershgorin_margin(0.7, 50) < 0
    _, lams = recursive_inverse(0.7, 50)
    assert min(lams) > 0


def test_martingale_orthogonality_within_monte_carlo_error():
    est, stderr = martingale_orthogonality_stat(0.3, 8, 20000, seed=7)
    assert stderr > 0
    assert abs(est) < 4.0 * stderr


def test_martingale_orthogonality_rejects_tiny_samples():
    with pytest.raises(ValueError):
        martingale_orthogonality_stat(0.3, 8, 10, seed=0)
