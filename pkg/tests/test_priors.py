import warnings

import numpy as np
import pytest

from preampdet.priors import (
    PriorDistribution,
    PriorError,
    flat_prior,
    load_prior,
    nonzero_flat_prior,
    prior_from_values,
    resolve_prior,
    two_photon_generator_prior,
)


def test_flat_prior():
    p = flat_prior(4)
    np.testing.assert_allclose(p.probabilities, 0.2)
    assert p.cutoff == 4 and p.label == "flat(4)"
    assert p.mean == pytest.approx(2.0)


def test_two_photon_prior():
    np.testing.assert_array_equal(two_photon_generator_prior().probabilities, [0.5, 0.0, 0.5])


def test_nonzero_flat_has_no_vacuum():
    p = nonzero_flat_prior(5)
    assert p.probabilities[0] == 0.0
    assert p.probabilities[1:].sum() == pytest.approx(1.0)
    with pytest.raises(PriorError):
        nonzero_flat_prior(0)


@pytest.mark.parametrize("values", [[], [0.0, 0.0], [0.5, -0.1, 0.6], [1.0, float("inf")]])
def test_bad_values_rejected(values):
    with pytest.raises(PriorError):
        prior_from_values(values)


def test_renormalization_warns():
    with pytest.warns(RuntimeWarning, match="renormalized"):
        p = prior_from_values([1.0, 1.0, 2.0])
    assert p.renormalized
    np.testing.assert_allclose(p.probabilities, [0.25, 0.25, 0.5])


def test_tiny_rescale_is_silent():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p = prior_from_values([0.5, 0.5 + 1e-12])
    assert not p.renormalized


def test_unnormalized_distribution_rejected():
    with pytest.raises(PriorError, match="sum"):
        PriorDistribution(np.array([0.5, 0.6]))


def test_load_prior(tmp_path):
    path = tmp_path / "prior.txt"
    path.write_text("# photon-number prior\n0.25\n0.25  # one photon\n\n0.5\n")
    p = load_prior(path)
    np.testing.assert_array_equal(p.probabilities, [0.25, 0.25, 0.5])
    assert p.label == "prior.txt"


def test_load_prior_reports_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0.5\nhalf\n")
    with pytest.raises(PriorError, match=":2:"):
        load_prior(path)


def test_resolve_prior(tmp_path):
    assert resolve_prior("flat") is flat_prior
    assert resolve_prior("nonzero-flat") is nonzero_flat_prior
    assert resolve_prior("flat:10").cutoff == 10
    assert resolve_prior("nonzero-flat", cutoff=7).cutoff == 7
    assert resolve_prior("two-photon").label == "two-photon"
    path = tmp_path / "p.txt"
    path.write_text("1\n")
    assert resolve_prior(str(path)).cutoff == 0
    with pytest.raises(PriorError, match="unknown prior"):
        resolve_prior("poisson")
