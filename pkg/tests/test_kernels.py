from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from preampdet.kernels import (
    ConvergenceError,
    DetectionChainParams,
    DetectionRows,
    KernelError,
    TransitionKernel,
    TruncationError,
    amplifier_kernel,
    amplifier_tail_bound,
    attenuator_kernel,
    compose,
    compound_entries,
    compound_kernel,
    dark_count_kernel,
    detection_kernel,
    log_binomial,
)


def exact_compound(eta, gain, n, m):
    """Direct sum with exact rational terms, stopped once terms fall below 1e-22."""
    eta, gain = Fraction(eta), Fraction(gain)
    total = 0.0
    q = max(n, m)
    while True:
        term = float(
            comb(q, n) * eta**n * (1 - eta) ** (q - n)
            * comb(q, m) * (gain - 1) ** (q - m) / gain ** (q + 1)
        )
        total += term
        if q > max(n, m) + 10 and term < 1e-22 * max(total, 1e-300):
            return total
        q += 1


# --- validation of inputs -------------------------------------------------

@pytest.mark.parametrize(
    "kwargs",
    [dict(gain=0.5), dict(efficiency=-0.1), dict(efficiency=1.5), dict(dark_mean=-1.0),
     dict(gain=float("nan"))],
)
def test_params_reject_out_of_range(kwargs):
    with pytest.raises(KernelError):
        DetectionChainParams(**kwargs)


def test_kernel_rejects_non_stochastic_columns():
    with pytest.raises(KernelError, match="stochastic"):
        TransitionKernel(np.array([[0.5], [0.4]]), np.array([0.0]))


def test_kernel_arrays_are_read_only():
    k = TransitionKernel.identity(3)
    with pytest.raises(ValueError):
        k.entries[0, 0] = 0.5


def test_restrict_moves_mass_into_deficit():
    k = attenuator_kernel(0.5, 3).restrict(output_dim=2)
    np.testing.assert_allclose(k.column_deficit, [0.0, 0.0, 0.25], atol=1e-15)


# --- attenuator -----------------------------------------------------------

def test_attenuator_binomial_values():
    k = attenuator_kernel(0.3, 5)
    for m in range(5):
        for n in range(5):
            expected = comb(m, n) * 0.3**n * 0.7 ** (m - n) if n <= m else 0.0
            assert k.entries[n, m] == pytest.approx(expected, abs=1e-15)
    assert k.column_deficit.max() == 0.0


@pytest.mark.parametrize("eta", [0.0, 1.0])
def test_attenuator_limits(eta):
    k = attenuator_kernel(eta, 4)
    expected = np.eye(4)
    if eta == 0.0:
        expected = np.zeros((4, 4))
        expected[0] = 1.0
    np.testing.assert_array_equal(k.entries, expected)


def test_attenuator_large_columns_stay_stochastic():
    k = attenuator_kernel(0.37, 1500)
    assert np.abs(k.entries.sum(axis=0) - 1.0).max() <= 1e-12


# --- amplifier ------------------------------------------------------------

def test_amplifier_gain_one_is_identity():
    np.testing.assert_array_equal(amplifier_kernel(1.0, 5).entries, np.eye(5))


def test_amplifier_matches_negative_binomial():
    k = amplifier_kernel(4.0, 6)
    for m in range(6):
        for q in range(m, m + 20):
            exact = comb(q, m) * Fraction(3) ** (q - m) / Fraction(4) ** (q + 1)
            assert k.entries[q, m] == pytest.approx(float(exact), rel=1e-12)


@pytest.mark.parametrize("gain", [1.5, 4.0, 16.0])
def test_amplifier_deficit_within_tolerance(gain):
    for tol in (1e-6, 1e-12):
        k = amplifier_kernel(gain, 10, tol)
        assert k.column_deficit.max() <= tol * (1 + 1e-9)


@pytest.mark.parametrize("gain,m", [(2.0, 0), (4.0, 3), (16.0, 10)])
def test_tail_bound_overestimates_true_tail(gain, m):
    # true tail from a four-times longer column
    q = np.arange(4 * 400)
    column = np.exp(
        log_binomial(q, m) + np.maximum(q - m, 0) * np.log(gain - 1) - (q + 1) * np.log(gain)
    )
    column[q < m] = 0.0
    for q_last in (60, 120, 300):
        true_tail = column[q_last + 1:].sum()
        bound = float(amplifier_tail_bound(gain, m, q_last))
        # at m = 0 the majorant is exact, so allow rounding
        assert bound >= true_tail * (1 - 1e-12)
        assert bound <= 1.0


def test_tail_bound_is_one_before_ratio_drops():
    assert float(amplifier_tail_bound(16.0, 10, 12)) == 1.0


def test_amplifier_truncation_error_reports_required_dim():
    with pytest.raises(TruncationError) as info:
        amplifier_kernel(16.0, 50, 1e-12, output_dim_cap=100)
    assert info.value.required_dim > 100


# --- compound kernel ------------------------------------------------------

@pytest.mark.parametrize("eta,gain", [("1/2", 2), ("3/10", "3/2"), ("4/5", 4)])
def test_compound_matches_exact_rational_sum(eta, gain):
    values = compound_entries(float(Fraction(eta)), float(Fraction(gain)), range(8), range(6))
    for n in range(8):
        for m in range(6):
            assert values[n, m] == pytest.approx(exact_compound(eta, gain, n, m),
                                                 rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("eta,gain", [(0.5, 16.0), (0.8, 10.0), (0.1, 2.0)])
def test_compound_row_zero_closed_form(eta, gain):
    d = 1.0 + eta * (gain - 1.0)
    m = np.arange(40)
    expected = (1.0 - eta) ** m / d ** (m + 1)
    # stopping tolerance 1e-12 relative, plus rounding
    np.testing.assert_allclose(compound_entries(eta, gain, [0], m)[0], expected, rtol=3e-12)


@pytest.mark.parametrize("eta,gain", [(0.0, 4.0), (1.0, 4.0), (0.6, 1.0)])
def test_compound_single_term_cases(eta, gain):
    direct = compound_kernel(DetectionChainParams(gain, eta), 8, 40).entries
    amp = amplifier_kernel(gain, 8)
    att = attenuator_kernel(eta, amp.output_dim, max(40, amp.output_dim))
    composed = compose(att, amp).restrict(output_dim=40).entries
    np.testing.assert_allclose(direct, composed, atol=1e-13)


def test_compound_adaptive_output_is_stochastic():
    k = compound_kernel(DetectionChainParams(8.0, 0.4), 12)
    assert k.column_deficit.max() <= 1e-12 * (1 + 1e-9)
    # the mean is eta((m+1)G-1)
    np.testing.assert_allclose(k.column_means(), 0.4 * ((np.arange(12) + 1) * 8.0 - 1), rtol=1e-9)


def test_compound_q_cap_raises_convergence_error():
    with pytest.raises(ConvergenceError):
        compound_entries(0.01, 16.0, [0], [0], q_cap=50)


@settings(max_examples=25, deadline=None)
@given(
    eta=st.floats(0.05, 0.95),
    gain=st.floats(1.0, 12.0),
    m=st.integers(0, 12),
)
def test_compound_equals_composition_property(eta, gain, m):
    direct = compound_kernel(DetectionChainParams(gain, eta), m + 1, 30).entries[:, m]
    amp = amplifier_kernel(gain, m + 1)
    att = attenuator_kernel(eta, amp.output_dim, max(30, amp.output_dim))
    composed = compose(att, amp).entries[:30, m]
    np.testing.assert_allclose(direct, composed, atol=1e-10)


# --- composition, dark counts and detection rows --------------------------

def test_compose_tracks_deficit():
    inner = amplifier_kernel(4.0, 5, 1e-8)
    outer = attenuator_kernel(0.5, inner.output_dim).restrict(output_dim=10)
    k = compose(outer, inner)
    np.testing.assert_allclose(k.entries.sum(axis=0) + k.column_deficit, 1.0, atol=1e-12)
    assert k.truncation_tolerance == pytest.approx(1e-8)


def test_compose_shape_mismatch():
    with pytest.raises(KernelError, match="compose"):
        compose(TransitionKernel.identity(3), TransitionKernel.identity(4))


def test_dark_count_kernel_is_shifted_poisson():
    k = dark_count_kernel(0.5, 4)
    from scipy.stats import poisson

    for n in range(4):
        for c in range(n, k.output_dim):
            assert k.entries[c, n] == pytest.approx(poisson.pmf(c - n, 0.5), rel=1e-12)
    assert k.column_deficit.max() <= 1e-12


def test_detection_rows_grow_consistently():
    params = DetectionChainParams(10.0, 0.8, 0.3)
    rows = DetectionRows(params, 3)
    small = rows.kernel(20).entries.copy()
    large = rows.kernel(50).entries
    np.testing.assert_array_equal(large[:, :20], small)
    np.testing.assert_allclose(large, detection_kernel(params, 50, 3).entries, atol=1e-14)
