import numpy as np
import pytest

from preampdet import DetectionChainParams, two_photon_generator_prior
from preampdet.mc_oracle import (
    PARTITION_SIZE,
    SampleConfig,
    SamplingError,
    amplify,
    partition_rng,
    sample_chain,
    sample_retrodiction,
)
from preampdet.validation import (
    VALIDATION_CELLS,
    analytic_column,
    total_variation,
    validate,
)


def test_same_seed_same_tallies():
    config = SampleConfig(50_000, 7, DetectionChainParams(4.0, 0.5), input_photons=2)
    a = sample_chain(config)
    b = sample_chain(config)
    np.testing.assert_array_equal(a.tallies, b.tallies)
    c = sample_chain(SampleConfig(50_000, 8, DetectionChainParams(4.0, 0.5), input_photons=2))
    assert not np.array_equal(a.tallies, c.tallies)


def test_worker_count_does_not_change_tallies():
    config = SampleConfig(2 * PARTITION_SIZE + 17, 3, DetectionChainParams(2.0, 0.7), input_photons=1)
    np.testing.assert_array_equal(sample_chain(config).tallies, sample_chain(config, workers=3).tallies)


@pytest.mark.parametrize("gain,m", [(2.0, 0), (4.0, 3), (16.0, 1)])
def test_amplifier_sampler_moments(gain, m):
    out = amplify(partition_rng(11, 0), np.full(200_000, m), gain)
    n = out.size
    mean = (m + 1) * gain - 1
    var = (m + 1) * gain * (gain - 1)
    assert abs(out.mean() - mean) < 5 * np.sqrt(var / n)
    assert out.var() == pytest.approx(var, rel=0.05)
    assert out.min() >= m


def test_dark_counts_raise_mean():
    params = DetectionChainParams(1.0, 0.5, 0.8)
    hist = sample_chain(SampleConfig(100_000, 1, params, input_photons=4))
    assert hist.mean == pytest.approx(2.0 + 0.8, abs=0.02)


def test_histogram_csv(tmp_path):
    hist = sample_chain(SampleConfig(1000, 5, DetectionChainParams(), input_photons=3))
    text = hist.to_csv(tmp_path / "h.csv")
    assert "count,tally,frequency\n" in text
    assert "3,1000,1\n" in text


def test_config_validation():
    params = DetectionChainParams()
    with pytest.raises(SamplingError):
        SampleConfig(10, 1, params)
    with pytest.raises(SamplingError):
        SampleConfig(10, 1, params, input_photons=1, prior=two_photon_generator_prior())
    with pytest.raises(SamplingError):
        SampleConfig(0, 1, params, input_photons=1)


def test_retrodiction_sampling_matches_analytic():
    params = DetectionChainParams(4.0, 0.5)
    sample = sample_retrodiction(
        SampleConfig(200_000, 2, params, prior=two_photon_generator_prior()), 0
    )
    d = 1.0 + 0.5 * 3.0
    analytic = d**2 / (d**2 + 0.25)
    assert abs(sample.fidelity - analytic) < 4 * sample.fidelity_standard_error(analytic)
    assert sample.acceptance_rate == pytest.approx(0.5 / d + 0.5 * 0.25 / d**3, abs=0.005)


def test_retrodiction_sampling_unreachable_outcome():
    config = SampleConfig(1000, 2, DetectionChainParams(), prior=two_photon_generator_prior())
    with pytest.raises(SamplingError, match="below"):
        sample_retrodiction(config, 1)


def test_total_variation():
    assert total_variation([0.5, 0.5], [0.5, 0.25, 0.25]) == pytest.approx(0.25)


def test_analytic_columns_are_stochastic():
    for eta, gain, m in VALIDATION_CELLS:
        column, deficit = analytic_column(DetectionChainParams(gain, eta), m)
        assert abs(column.sum() + deficit - 1.0) <= 1e-12


def test_validation_passes_at_reduced_trials():
    report = validate(seed=20070101, trials=100_000)
    assert report.passed, report.table()


def test_injected_fault_is_detected_and_named():
    report = validate(seed=20070101, trials=100_000, fault=(4, 1, 0.05))
    assert not report.passed
    names = [cell.name for cell in report.failures]
    assert names and all(name.startswith("cell 4:") for name in names)


def test_validation_rejects_too_few_trials():
    with pytest.raises(ValueError, match="trials"):
        validate(trials=10)
