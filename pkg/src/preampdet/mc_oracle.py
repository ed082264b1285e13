"""Monte Carlo simulation of the detection chain.

This module is the independent check on the analytic kernels, so it never
calls them: each trial is simulated photon by photon.

* amplifier: the output is the input ``m`` plus a negative-binomial number of
  added photons, ``NB(m + 1, 1/G)``, drawn with numpy's sampler;
* detector: each photon is counted with probability ``eta`` (binomial);
* dark counts: an independent Poisson number with mean ``dark_mean``.

Random numbers come from numpy's Philox4x64 counter-based generator. Trials
are split into fixed partitions of ``PARTITION_SIZE``; partition ``i`` of a
run with seed ``s`` draws from ``Philox(SeedSequence(s, spawn_key=(i,)))``, so
results depend only on ``(seed, trials)``, not on how partitions are
scheduled. Tallies from partitions are merged by addition.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kernels import DetectionChainParams
from .priors import PriorDistribution
from .sweep import SweepResult

__all__ = [
    "RNG_ALGORITHM",
    "PARTITION_SIZE",
    "SamplingError",
    "SampleConfig",
    "CountHistogram",
    "RetrodictionSample",
    "partition_rng",
    "amplify",
    "sample_chain",
    "sample_retrodiction",
]

RNG_ALGORITHM = "Philox4x64-10 (numpy.random.Philox), SeedSequence(seed, spawn_key=(partition,))"
PARTITION_SIZE = 1 << 17


class SamplingError(ValueError):
    """A sampling run could not produce the requested estimate."""


@dataclass(frozen=True)
class SampleConfig:
    """One sampling run.

    Exactly one of ``input_photons`` (a fixed photon number) and ``prior``
    (photon numbers drawn per trial) must be given.
    """

    trials: int
    seed: int
    params: DetectionChainParams
    input_photons: int | None = None
    prior: PriorDistribution | None = None

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise SamplingError(f"trials must be a positive integer, got {self.trials!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise SamplingError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if (self.input_photons is None) == (self.prior is None):
            raise SamplingError("give exactly one of input_photons and prior")
        if self.input_photons is not None and (
            int(self.input_photons) != self.input_photons or self.input_photons < 0
        ):
            raise SamplingError(f"input_photons must be >= 0, got {self.input_photons!r}")


@dataclass(frozen=True, eq=False)
class CountHistogram:
    """Raw count tallies and their empirical frequencies."""

    tallies: np.ndarray
    trials: int

    @property
    def frequencies(self):
        return self.tallies / self.trials

    @property
    def mean(self):
        return float(np.arange(self.tallies.size) @ self.tallies) / self.trials

    def to_sweep(self):
        rows = [[c, int(t), float(t) / self.trials] for c, t in enumerate(self.tallies)]
        return SweepResult(["count", "tally", "frequency"], rows, {"trials": self.trials})

    def to_csv(self, path=None):
        """CSV with columns ``count, tally, frequency``."""
        return self.to_sweep().to_csv(path)


@dataclass(frozen=True, eq=False)
class RetrodictionSample:
    """Photon numbers of the trials that produced the chosen count."""

    outcome: int
    tallies: np.ndarray
    accepted: int
    trials: int

    @property
    def posterior(self):
        return self.tallies / self.accepted

    @property
    def acceptance_rate(self):
        return self.accepted / self.trials

    @property
    def fidelity(self):
        return float(self.posterior[self.outcome]) if self.outcome < self.tallies.size else 0.0

    def fidelity_standard_error(self, fidelity=None):
        """Binomial standard error of the empirical fidelity.

        Pass the analytic fidelity to get the error of a test against it.
        """
        f = self.fidelity if fidelity is None else fidelity
        return math.sqrt(max(f * (1.0 - f), 0.0) / self.accepted)


def partition_rng(seed, partition):
    """Generator for one partition of a seeded run."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(partition),))
    return np.random.Generator(np.random.Philox(sequence))


def amplify(rng, photons, gain):
    """Photons leaving an ideal amplifier of gain ``G`` for each input number.

    Each of the ``m + 1`` "seeds" (input photons plus vacuum) keeps emitting
    photons with probability ``(G - 1) / G`` and stops with probability
    ``1 / G``, so the number added is negative binomial with mean
    ``(m + 1)(G - 1)`` and variance ``(m + 1)(G - 1) G``.
    """
    photons = np.asarray(photons, dtype=np.int64)
    if gain == 1.0:
        return photons.copy()
    return photons + rng.negative_binomial(photons + 1, 1.0 / gain)


def _simulate(rng, photons, params):
    amplified = amplify(rng, photons, params.gain)
    counts = rng.binomial(amplified, params.efficiency)
    if params.dark_mean > 0.0:
        counts = counts + rng.poisson(params.dark_mean, size=counts.shape)
    return counts


def _partitions(trials):
    full, rest = divmod(int(trials), PARTITION_SIZE)
    return [PARTITION_SIZE] * full + ([rest] if rest else [])


def _run_partitions(config, job, workers):
    sizes = _partitions(config.trials)
    tasks = list(enumerate(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, tasks))
    return [job(task) for task in tasks]


def _draw_photons(rng, config, size):
    if config.prior is None:
        return np.full(size, int(config.input_photons), dtype=np.int64)
    return rng.choice(config.prior.probabilities.size, size=size, p=config.prior.probabilities)


def _merge(parts):
    size = max(part.size for part in parts)
    total = np.zeros(size, dtype=np.int64)
    for part in parts:
        total[: part.size] += part
    return total


def sample_chain(config, workers=1):
    """Histogram of recorded counts over ``config.trials`` simulated trials."""

    def job(task):
        index, size = task
        rng = partition_rng(config.seed, index)
        counts = _simulate(rng, _draw_photons(rng, config, size), config.params)
        return np.bincount(counts)

    tallies = _merge(_run_partitions(config, job, workers))
    return CountHistogram(tallies, int(config.trials))


def sample_retrodiction(config, outcome, workers=1):
    """Empirical posterior over photon numbers given ``outcome`` counts.

    Photon numbers are drawn from ``config.prior``, pushed through the chain,
    and kept only when the simulated count equals ``outcome``.

    Raises
    ------
    SamplingError
        If no trial produced the outcome.
    """
    if config.prior is None:
        raise SamplingError("retrodiction sampling needs a prior")
    outcome = int(outcome)
    support = config.prior.probabilities.size

    def job(task):
        index, size = task
        rng = partition_rng(config.seed, index)
        photons = _draw_photons(rng, config, size)
        counts = _simulate(rng, photons, config.params)
        return np.bincount(photons[counts == outcome], minlength=support)

    tallies = _merge(_run_partitions(config, job, workers))
    accepted = int(tallies.sum())
    if accepted == 0:
        raise SamplingError(
            f"no trial out of {config.trials} recorded {outcome} counts; "
            f"its probability is likely below {1.0 / config.trials:.3g}"
        )
    return RetrodictionSample(outcome, tallies, accepted, int(config.trials))
