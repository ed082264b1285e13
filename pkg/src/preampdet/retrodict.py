"""Bayesian retrodiction through a preamplified detection chain.

Given a prior ``p_m`` over photon numbers in the measurement arm and a chain
kernel ``P(n | m)``, recording ``n`` counts implies the posterior

    P(m | n) = p_m P(n | m) / sum_m' p_m' P(n | m')

and the retrodictive fidelity is the posterior weight on the photon number
the detector indicated, ``F_r(n) = P(m = n | n)``.

Priors may be given either as a :class:`PriorDistribution` or as a prior
family, a callable ``cutoff -> PriorDistribution`` such as
:func:`~preampdet.priors.flat_prior`. Families are evaluated at doubling
cutoffs until the result stops changing, which is how the improper
"every photon number equally likely" prior is made concrete.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from . import __version__
from .kernels import (
    DEFAULT_TOLERANCE,
    DetectionChainParams,
    DetectionRows,
    KernelError,
    detection_kernel,
)
from .priors import PriorDistribution, flat_prior
from .sweep import SweepResult

__all__ = [
    "CONVERGENCE_START",
    "CONVERGENCE_CAP",
    "CONVERGENCE_ATOL",
    "ImpossibleOutcomeError",
    "NoSignChangeError",
    "NotConvergedWarning",
    "RetrodictionReport",
    "retrodict",
    "chain_report",
    "count_probability",
    "fidelity_surface",
    "relative_count_probability",
    "posterior_mean_scaling_check",
    "one_count_threshold",
    "dark_count_invariance_check",
    "LOG_FLOOR",
    "log10_infidelity",
    "prior_label",
]

CONVERGENCE_START = 200
CONVERGENCE_CAP = 6400
CONVERGENCE_ATOL = 1e-9
LOG_FLOOR = -16.0


class ImpossibleOutcomeError(ValueError):
    """The outcome has zero probability under the prior and kernel."""

    def __init__(self, outcome, message=None):
        super().__init__(
            message or f"outcome {outcome} has zero probability under this prior and chain"
        )
        self.outcome = outcome


class NoSignChangeError(ValueError):
    """A threshold search found no sign change on its grid."""

    def __init__(self, message, signs):
        super().__init__(message)
        self.signs = signs


class NotConvergedWarning(RuntimeWarning):
    """Cutoff doubling hit its cap before the result settled."""


@dataclass(frozen=True, eq=False)
class RetrodictionReport:
    """What ``outcome`` counts say about the photon number that caused them.

    Attributes
    ----------
    outcome : int
        Recorded count ``n``.
    fidelity : float
        ``F_r(n)``, the posterior probability that exactly ``n`` photons were
        present (0 when ``n`` lies beyond the prior's support).
    count_probability : float
        ``P(n) = sum_m p_m P(n | m)``.
    posterior : ndarray
        ``P(m | n)`` for ``m = 0 .. cutoff``.
    posterior_mean : float
        Mean photon number given the outcome.
    cutoff : int
        Largest photon number in the prior that was used.
    """

    outcome: int
    fidelity: float
    count_probability: float
    posterior: np.ndarray
    posterior_mean: float
    cutoff: int


def retrodict(prior, kernel, outcome):
    """Invert ``kernel`` for one count outcome under ``prior``.

    Raises
    ------
    ImpossibleOutcomeError
        If ``P(outcome) == 0``.
    """
    outcome = int(outcome)
    if outcome < 0 or outcome >= kernel.output_dim:
        raise KernelError(
            f"outcome {outcome} outside the kernel output range 0..{kernel.output_dim - 1}"
        )
    p = prior.probabilities
    if kernel.input_dim < p.size:
        raise KernelError(
            f"kernel has {kernel.input_dim} input columns but the prior has {p.size} entries"
        )
    joint = p * kernel.entries[outcome, : p.size]
    total = math.fsum(joint)
    if not total > 0.0:
        raise ImpossibleOutcomeError(outcome)
    posterior = joint / total
    posterior /= math.fsum(posterior)
    posterior.setflags(write=False)
    fidelity = float(posterior[outcome]) if outcome < p.size else 0.0
    mean = math.fsum(np.arange(p.size) * posterior)
    return RetrodictionReport(
        outcome=outcome,
        fidelity=min(max(fidelity, 0.0), 1.0),
        count_probability=min(total, 1.0),
        posterior=posterior,
        posterior_mean=mean,
        cutoff=p.size - 1,
    )


def _fixed_report(prior, params, outcome, tolerance):
    kernel = detection_kernel(params, len(prior), int(outcome) + 1, tolerance)
    return retrodict(prior, kernel, outcome)


def _converge(family, evaluate, key, start=CONVERGENCE_START, cap=CONVERGENCE_CAP):
    """Evaluate ``family(cutoff)`` at doubling cutoffs until ``key`` settles.

    ``key`` maps a result to a tuple of floats; convergence means every
    component changed by less than ``CONVERGENCE_ATOL`` (relative to its
    size once it exceeds one).
    """
    cutoff = start
    previous = evaluate(family(cutoff))
    while True:
        cutoff *= 2
        if cutoff > cap:
            warnings.warn(
                f"prior family did not converge by cutoff {cutoff // 2}",
                NotConvergedWarning,
                stacklevel=3,
            )
            return previous
        current = evaluate(family(cutoff))
        if all(
            abs(a - b) < CONVERGENCE_ATOL * max(1.0, abs(a))
            for a, b in zip(key(current), key(previous))
        ):
            return current
        previous = current


def chain_report(prior, params, outcome, tolerance=DEFAULT_TOLERANCE):
    """Retrodiction report for ``outcome`` counts through the chain ``params``.

    ``prior`` is a :class:`PriorDistribution` or a prior family; families are
    converged on both the fidelity and the posterior mean.
    """
    if isinstance(prior, PriorDistribution):
        return _fixed_report(prior, params, outcome, tolerance)
    rows = DetectionRows(params, int(outcome) + 1, tolerance)
    return _converge(
        prior,
        lambda p: retrodict(p, rows.kernel(len(p)), outcome),
        key=lambda r: (r.fidelity, r.posterior_mean),
    )


def count_probability(prior, params, outcome, tolerance=DEFAULT_TOLERANCE):
    """``P(outcome)`` for a fixed prior (zero is allowed here).

    ``params`` may also be a :class:`DetectionRows` cache covering the outcome.
    """
    if isinstance(params, DetectionRows):
        kernel = params.kernel(len(prior))
    else:
        kernel = detection_kernel(params, len(prior), int(outcome) + 1, tolerance)
    return math.fsum(prior.probabilities * kernel.entries[int(outcome), : len(prior)])


def relative_count_probability(prior, params, outcome=0, tolerance=DEFAULT_TOLERANCE):
    """``P(outcome; eta, G) / P(outcome; eta=1, G=1)`` under the same prior.

    The reference is a perfect detector with no amplifier (and no dark
    counts), computed with the same prior and truncation policy.
    """
    reference = DetectionChainParams(gain=1.0, efficiency=1.0)
    if not isinstance(prior, PriorDistribution):
        reference = DetectionRows(reference, int(outcome) + 1, tolerance)
        params = DetectionRows(params, int(outcome) + 1, tolerance)

    def ratio(p):
        ref = count_probability(p, reference, outcome, tolerance)
        if not ref > 0.0:
            raise ImpossibleOutcomeError(
                outcome,
                f"reference probability of outcome {outcome} is zero under prior {p.label}",
            )
        return count_probability(p, params, outcome, tolerance) / ref

    if isinstance(prior, PriorDistribution):
        return ratio(prior)
    return _converge(prior, ratio, key=lambda r: (r,))


def posterior_mean_scaling_check(efficiency, gain, tolerance=DEFAULT_TOLERANCE):
    """Posterior mean photon number after zero counts, with and without gain.

    Uses the converged flat prior. Returns ``(mean_with_gain, mean_without)``;
    the amplifier should shrink the mean by exactly ``1 / gain``.
    """
    with_gain = chain_report(flat_prior, DetectionChainParams(gain, efficiency), 0, tolerance)
    without = chain_report(flat_prior, DetectionChainParams(1.0, efficiency), 0, tolerance)
    return with_gain.posterior_mean, without.posterior_mean


def dark_count_invariance_check(params, prior, outcome=0, tolerance=DEFAULT_TOLERANCE):
    """``(F_r(outcome) with params.dark_mean, F_r(outcome) with no dark counts)``."""
    dark = chain_report(prior, params, outcome, tolerance).fidelity
    clean = DetectionChainParams(params.gain, params.efficiency, 0.0)
    return dark, chain_report(prior, clean, outcome, tolerance).fidelity


def one_count_threshold(
    gain_step=1e-3,
    efficiency_grid=None,
    prior=flat_prior,
    outcome=1,
    tolerance=DEFAULT_TOLERANCE,
    xtol=1e-6,
):
    """Efficiency at which a small gain increase stops improving ``F_r(outcome)``.

    Evaluates ``F_r(outcome; G = 1 + gain_step) - F_r(outcome; G = 1)`` on the
    grid, then bisects inside the first bracket where it changes sign.

    Raises
    ------
    NoSignChangeError
        If the difference keeps one sign over the whole grid.
    """
    if efficiency_grid is None:
        efficiency_grid = np.round(np.arange(0.05, 0.951, 0.05), 10)
    grid = np.asarray(efficiency_grid, dtype=float)
    if grid.size < 2:
        raise ValueError("efficiency grid needs at least two points")

    def improvement(eta):
        step = chain_report(prior, DetectionChainParams(1.0 + gain_step, eta), outcome, tolerance)
        base = chain_report(prior, DetectionChainParams(1.0, eta), outcome, tolerance)
        return step.fidelity - base.fidelity

    values = [improvement(eta) for eta in grid]
    signs = np.sign(values)
    for i in range(grid.size - 1):
        if signs[i] == 0.0:
            return float(grid[i])
        if signs[i] * signs[i + 1] < 0.0:
            return float(bisect(improvement, grid[i], grid[i + 1], xtol=xtol))
    if signs[-1] == 0.0:
        return float(grid[-1])
    if np.all(signs > 0):
        summary = "no sign change, always positive"
    elif np.all(signs < 0):
        summary = "no sign change, always negative"
    else:
        summary = "no sign change"
    raise NoSignChangeError(
        f"{summary} over efficiencies {grid[0]:g}..{grid[-1]:g} "
        f"(endpoint signs {int(signs[0]):+d}, {int(signs[-1]):+d})",
        signs=(int(signs[0]), int(signs[-1])),
    )


SURFACE_COLUMNS = [
    "eta",
    "gain",
    "dark_mean",
    "fidelity",
    "log10_one_minus_fidelity",
    "count_probability",
    "posterior_mean",
    "cutoff",
    "status",
]


def log10_infidelity(fidelity):
    """``(log10(1 - F), clamped)`` with the log floored at ``LOG_FLOOR``."""
    gap = 1.0 - fidelity
    if gap <= 10.0**LOG_FLOOR:
        return LOG_FLOOR, True
    return math.log10(gap), False


def _surface_cell(prior, outcome, eta, gain, dark_mean, tolerance):
    try:
        params = DetectionChainParams(gain, eta, dark_mean)
        report = chain_report(prior, params, outcome, tolerance)
    except ImpossibleOutcomeError:
        return [eta, gain, dark_mean, None, None, 0.0, None, None, "impossible"]
    except (KernelError, ValueError, ArithmeticError) as exc:
        return [eta, gain, dark_mean, None, None, None, None, None,
                f"error: eta={eta:g} gain={gain:g}: {exc}"]
    log_gap, clamped = log10_infidelity(report.fidelity)
    return [
        eta,
        gain,
        dark_mean,
        report.fidelity,
        log_gap,
        report.count_probability,
        report.posterior_mean,
        report.cutoff,
        "clamped" if clamped else "ok",
    ]


def fidelity_surface(
    prior,
    outcome,
    efficiency_grid,
    gain_grid,
    tolerance=DEFAULT_TOLERANCE,
    dark_mean=0.0,
    workers=1,
):
    """``F_r(outcome)`` over an efficiency x gain grid, efficiency-major.

    A cell whose computation fails gets a ``status`` of ``error: ...`` (or
    ``impossible``) and blank numeric columns instead of aborting the sweep.
    Rows come out in grid order whatever ``workers`` is.
    """
    etas = [float(x) for x in np.atleast_1d(efficiency_grid)]
    gains = [float(x) for x in np.atleast_1d(gain_grid)]
    if not etas or not gains:
        raise ValueError("efficiency and gain grids must be non-empty")
    cells = [(eta, gain) for eta in etas for gain in gains]

    def run(cell):
        return _surface_cell(prior, outcome, cell[0], cell[1], dark_mean, tolerance)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(cell) for cell in cells]
    cutoffs = [row[7] for row in rows if row[7] is not None]
    return SweepResult(
        columns=list(SURFACE_COLUMNS),
        rows=rows,
        metadata={
            "quantity": f"retrodictive fidelity for {outcome} counts",
            "prior": prior_label(prior),
            "cutoff": max(cutoffs) if cutoffs else None,
            "tolerance": tolerance,
            "version": __version__,
        },
    )


def prior_label(prior):
    """Human-readable name of a prior or prior family."""
    if isinstance(prior, PriorDistribution):
        return prior.label
    name = getattr(prior, "__name__", "prior")
    return f"{name.removesuffix('_prior').replace('_', '-')} (converged)"
