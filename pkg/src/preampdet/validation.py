"""Monte Carlo cross-validation of the analytic chain.

Each designated ``(eta, G, m)`` cell is simulated and compared with the
analytic kernel column on three counts: the analytic column must be
stochastic, the total-variation distance must be at most ``TV_LIMIT``, and no
well-populated count may sit more than ``Z_LIMIT`` binomial standard errors
from its analytic probability. A final check compares the empirical
zero-count fidelity of the two-photon generator with the analytic value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import DEFAULT_TOLERANCE, DetectionChainParams, compound_kernel, dark_count_kernel, compose
from .mc_oracle import SampleConfig, sample_chain, sample_retrodiction
from .priors import two_photon_generator_prior
from .retrodict import chain_report

__all__ = [
    "DEFAULT_SEED",
    "DEFAULT_TRIALS",
    "MIN_TRIALS",
    "TV_LIMIT",
    "Z_LIMIT",
    "FIDELITY_SIGMAS",
    "VALIDATION_CELLS",
    "FIDELITY_CHECK",
    "CellResult",
    "ValidationReport",
    "analytic_column",
    "total_variation",
    "validate",
]

DEFAULT_SEED = 20070101
DEFAULT_TRIALS = 1_000_000
MIN_TRIALS = 10_000
TV_LIMIT = 0.01
Z_LIMIT = 5.0
FIDELITY_SIGMAS = 3.0
# counts expected fewer than this many times are left out of the z-test
_Z_MIN_EXPECTED = 10.0

# (eta, gain, input photons)
VALIDATION_CELLS = [
    (0.5, 1.0, 2),
    (0.8, 1.0, 5),
    (0.3, 2.0, 0),
    (0.8, 2.0, 1),
    (0.5, 4.0, 1),
    (1.0, 4.0, 1),
    (0.9, 4.0, 3),
    (0.2, 8.0, 2),
    (0.8, 10.0, 0),
    (0.8, 10.0, 2),
    (0.5, 16.0, 0),
    (0.1, 16.0, 1),
]

# two-photon generator, zero counts
FIDELITY_CHECK = (0.5, 16.0, 0)


@dataclass
class CellResult:
    name: str
    passed: bool
    statistic: float
    limit: float
    detail: str = ""


@dataclass
class ValidationReport:
    seed: int
    trials: int
    cells: list = field(default_factory=list)

    @property
    def passed(self):
        return all(cell.passed for cell in self.cells)

    @property
    def failures(self):
        return [cell for cell in self.cells if not cell.passed]

    def table(self):
        lines = [f"validation: seed={self.seed} trials={self.trials}"]
        for cell in self.cells:
            mark = "PASS" if cell.passed else "FAIL"
            lines.append(
                f"{mark}  {cell.name:<38} {cell.statistic:.4g} (limit {cell.limit:.4g})"
                + (f"  {cell.detail}" if cell.detail else "")
            )
        lines.append("all checks passed" if self.passed else f"{len(self.failures)} check(s) failed")
        return "\n".join(lines)


def analytic_column(params, photons, tolerance=DEFAULT_TOLERANCE):
    """``(P(c | photons) for c = 0..C, deficit)`` from the analytic chain."""
    kernel = compound_kernel(params, photons + 1, None, tolerance)
    if params.dark_mean > 0.0:
        kernel = compose(dark_count_kernel(params.dark_mean, kernel.output_dim, tolerance), kernel)
    return np.array(kernel.entries[:, photons]), float(kernel.column_deficit[photons])


def total_variation(p, q):
    """Total-variation distance between two count distributions (zero-padded)."""
    size = max(len(p), len(q))
    a = np.zeros(size)
    b = np.zeros(size)
    a[: len(p)] = p
    b[: len(q)] = q
    return 0.5 * float(np.abs(a - b).sum())


def _check_cell(index, eta, gain, photons, seed, trials, tolerance, fault):
    params = DetectionChainParams(gain, eta)
    name = f"cell {index}: eta={eta:g} G={gain:g} m={photons}"
    column, deficit = analytic_column(params, photons, tolerance)
    if fault is not None and fault[0] == index:
        column = column.copy()
        column[fault[1]] += fault[2]
    results = []

    violation = abs(math.fsum(column) + deficit - 1.0)
    results.append(CellResult(f"{name} normalization", violation <= 1e-12, violation, 1e-12))

    histogram = sample_chain(SampleConfig(trials, seed + index, params, input_photons=photons))
    empirical = histogram.frequencies
    tv = total_variation(empirical, column) + deficit
    results.append(CellResult(f"{name} TV distance", tv <= TV_LIMIT, tv, TV_LIMIT))

    size = max(column.size, empirical.size)
    p = np.zeros(size)
    e = np.zeros(size)
    p[: column.size] = column
    e[: empirical.size] = empirical
    populated = p * trials >= _Z_MIN_EXPECTED
    se = np.sqrt(p * (1.0 - p) / trials)
    z = np.zeros(size)
    z[populated] = np.abs(e[populated] - p[populated]) / se[populated]
    worst = int(np.argmax(z))
    results.append(
        CellResult(
            f"{name} max z-score",
            z[worst] <= Z_LIMIT,
            float(z[worst]),
            Z_LIMIT,
            f"at count {worst}",
        )
    )
    return results


def validate(seed=DEFAULT_SEED, trials=DEFAULT_TRIALS, tolerance=DEFAULT_TOLERANCE, fault=None):
    """Run every oracle comparison and collect pass/fail results.

    ``fault`` is a test hook ``(cell_index, count, delta)`` that perturbs one
    analytic probability before comparison.
    """
    if int(trials) != trials or trials < MIN_TRIALS:
        raise ValueError(f"trials must be an integer >= {MIN_TRIALS}, got {trials!r}")
    trials = int(trials)
    report = ValidationReport(seed=int(seed), trials=trials)
    for index, (eta, gain, photons) in enumerate(VALIDATION_CELLS):
        report.cells.extend(
            _check_cell(index, eta, gain, photons, int(seed), trials, tolerance, fault)
        )

    eta, gain, outcome = FIDELITY_CHECK
    params = DetectionChainParams(gain, eta)
    prior = two_photon_generator_prior()
    analytic = chain_report(prior, params, outcome, tolerance).fidelity
    sample = sample_retrodiction(
        SampleConfig(trials, int(seed) + len(VALIDATION_CELLS), params, prior=prior), outcome
    )
    se = sample.fidelity_standard_error(analytic)
    deviation = abs(sample.fidelity - analytic) / se
    report.cells.append(
        CellResult(
            f"two-photon F_r(0) eta={eta:g} G={gain:g}",
            deviation <= FIDELITY_SIGMAS,
            deviation,
            FIDELITY_SIGMAS,
            f"empirical {sample.fidelity:.6f} vs analytic {analytic:.6f}",
        )
    )
    return report
