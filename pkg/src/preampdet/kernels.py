"""Truncated photon-number transition kernels.

Every kernel is column-stochastic with ``entries[n, m] = P(n | m)``: column
``m`` holds the output distribution for ``m`` input photons and row ``n``
indexes the output photon number (or count). Probability that lands beyond
the represented output range is carried per column in ``column_deficit``,
so ``entries[:, m].sum() + column_deficit[m] == 1`` always holds.

The amplifier here is the ideal (minimum added noise) phase-insensitive
amplifier, whose number-state transition law is negative binomial::

    P(q | m) = C(q, m) (G - 1)**(q - m) / G**(q + 1),   q >= m

and the detector is a binomial-loss attenuator of transmission ``eta``
followed by a perfect photon counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, nbdtrc, pdtrc

__all__ = [
    "DEFAULT_TOLERANCE",
    "Q_CAP",
    "OUTPUT_DIM_CAP",
    "KernelError",
    "TruncationError",
    "ConvergenceError",
    "DetectionChainParams",
    "TransitionKernel",
    "attenuator_kernel",
    "amplifier_kernel",
    "amplifier_tail_bound",
    "compound_kernel",
    "compound_entries",
    "compose",
    "dark_count_kernel",
    "detection_kernel",
    "log_binomial",
]

DEFAULT_TOLERANCE = 1e-12
Q_CAP = 100_000
OUTPUT_DIM_CAP = 100_000

# 1 - sum(column) is itself rounded; allow this much above the requested tail
# bound before declaring a truncation failure.
_ROUNDING_SLACK = 1e-13
_STOCHASTIC_ATOL = 1e-12


class KernelError(ValueError):
    """Invalid kernel parameters or incompatible kernel shapes."""


class TruncationError(KernelError):
    """The requested truncation tolerance needs more than the dimension cap."""

    def __init__(self, message, required_dim=None):
        super().__init__(message)
        self.required_dim = required_dim


class ConvergenceError(KernelError):
    """A photon-number sum did not converge before the summation cap."""

    def __init__(self, message, cap, last_term):
        super().__init__(message)
        self.cap = cap
        self.last_term = last_term


@dataclass(frozen=True)
class DetectionChainParams:
    """Physical parameters of an amplifier + detector chain.

    Parameters
    ----------
    gain : float
        Photon-number gain ``G >= 1`` of the preamplifier.
    efficiency : float
        Detector quantum efficiency ``eta`` in ``[0, 1]``.
    dark_mean : float
        Mean number of Poisson dark counts per detection window.
    """

    gain: float = 1.0
    efficiency: float = 1.0
    dark_mean: float = 0.0

    def __post_init__(self):
        for name in ("gain", "efficiency", "dark_mean"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise KernelError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        _check_gain(self.gain)
        _check_efficiency(self.efficiency)
        _check_dark_mean(self.dark_mean)


def _check_gain(gain):
    if not (math.isfinite(gain) and gain >= 1.0):
        raise KernelError(f"gain must be a finite real >= 1, got {gain!r}")


def _check_efficiency(efficiency):
    if not (math.isfinite(efficiency) and 0.0 <= efficiency <= 1.0):
        raise KernelError(f"efficiency must lie in [0, 1], got {efficiency!r}")


def _check_dark_mean(dark_mean):
    if not (math.isfinite(dark_mean) and dark_mean >= 0.0):
        raise KernelError(f"dark_mean must be a finite real >= 0, got {dark_mean!r}")


def _check_dim(name, dim):
    if int(dim) != dim or dim < 1:
        raise KernelError(f"{name} must be a positive integer, got {dim!r}")
    return int(dim)


def _check_tolerance(tolerance):
    if not (math.isfinite(tolerance) and tolerance > 0.0):
        raise KernelError(f"truncation tolerance must be > 0, got {tolerance!r}")


def _readonly(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Column-stochastic kernel ``entries[n, m] = P(n | m)``.

    ``column_deficit[m]`` is the probability mass of column ``m`` lying
    beyond the last represented output ``n = output_dim - 1``. For kernels
    whose output range was chosen adaptively it is bounded by
    ``truncation_tolerance``; kernels built with an explicit (short) output
    range may carry larger deficits, which is how single-row kernels for
    retrodiction are represented. ``truncation_tolerance`` always bounds the
    error from tails neglected inside the construction itself.

    Instances are immutable; the arrays are flagged read-only.
    """

    entries: np.ndarray
    column_deficit: np.ndarray
    truncation_tolerance: float = 0.0

    def __post_init__(self):
        entries = _readonly(self.entries)
        deficit = _readonly(self.column_deficit)
        if entries.ndim != 2 or 0 in entries.shape:
            raise KernelError(f"entries must be a non-empty matrix, got shape {entries.shape}")
        if deficit.shape != (entries.shape[1],):
            raise KernelError(
                f"column_deficit must have one value per input column "
                f"({entries.shape[1]}), got shape {deficit.shape}"
            )
        if not (np.all(np.isfinite(entries)) and np.all(np.isfinite(deficit))):
            raise KernelError("kernel entries and deficits must be finite")
        if entries.min() < 0.0 or entries.max() > 1.0:
            raise KernelError("kernel entries must lie in [0, 1]")
        if deficit.min() < 0.0:
            raise KernelError("column deficits must be non-negative")
        violation = np.abs(entries.sum(axis=0) + deficit - 1.0).max()
        if violation > _STOCHASTIC_ATOL:
            raise KernelError(
                f"columns are not stochastic: |sum + deficit - 1| reaches {violation:.3g}"
            )
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "column_deficit", deficit)
        object.__setattr__(self, "truncation_tolerance", float(self.truncation_tolerance))

    @property
    def output_dim(self):
        return self.entries.shape[0]

    @property
    def input_dim(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    @classmethod
    def identity(cls, dim):
        dim = _check_dim("dim", dim)
        return cls(np.eye(dim), np.zeros(dim), 0.0)

    def restrict(self, output_dim=None, input_dim=None):
        """Keep the first ``output_dim`` rows and ``input_dim`` columns.

        Mass of the dropped rows moves into the column deficits.
        """
        n_out = self.output_dim if output_dim is None else _check_dim("output_dim", output_dim)
        n_in = self.input_dim if input_dim is None else _check_dim("input_dim", input_dim)
        if n_out > self.output_dim or n_in > self.input_dim:
            raise KernelError(
                f"cannot restrict a {self.shape} kernel to ({n_out}, {n_in})"
            )
        kept = self.entries[:n_out, :n_in]
        dropped = self.entries[n_out:, :n_in].sum(axis=0)
        return TransitionKernel(
            kept, self.column_deficit[:n_in] + dropped, self.truncation_tolerance
        )

    def column_means(self):
        """Mean output photon number of each column over the represented range."""
        n = np.arange(self.output_dim, dtype=float)
        return n @ self.entries / self.entries.sum(axis=0)


# --------------------------------------------------------------------------
# log-domain combinatorics

_log_factorial_table = gammaln(np.arange(4096, dtype=float) + 1.0)


def _log_factorial(k):
    global _log_factorial_table
    table = _log_factorial_table
    top = int(np.max(k)) if np.size(k) else 0
    if top >= table.size:
        size = max(2 * table.size, top + 1)
        table = gammaln(np.arange(size, dtype=float) + 1.0)
        _log_factorial_table = table
    return table[k]


def log_binomial(q, k):
    """``log C(q, k)`` for integer arrays with ``0 <= k <= q``; ``-inf`` elsewhere."""
    q = np.asarray(q, dtype=np.int64)
    k = np.asarray(k, dtype=np.int64)
    q, k = np.broadcast_arrays(q, k)
    valid = (k >= 0) & (k <= q)
    qs = np.where(valid, q, 0)
    ks = np.where(valid, k, 0)
    out = _log_factorial(qs) - _log_factorial(ks) - _log_factorial(qs - ks)
    return np.where(valid, out, -np.inf)


def _xlog(count, log_base):
    """``count * log_base`` with the convention ``0 * log(0) = 0``."""
    count = np.asarray(count)
    if np.isfinite(log_base):
        return count * log_base
    return np.where(count == 0, 0.0, -np.inf)


def _log(x):
    return math.log(x) if x > 0.0 else -math.inf


def _settle_columns(entries, tail=None):
    """Return ``(entries, deficit)`` with every column summing to exactly one.

    Log-gamma evaluation leaves a relative rounding error growing roughly
    like ``q * eps``. Where the mass beyond the kept rows is known (``tail``)
    the kept entries are rescaled to ``1 - tail``; otherwise the deficit is
    ``1 - sum`` and columns that overshoot one are rescaled to one.
    """
    sums = np.array([math.fsum(col) for col in entries.T])
    if tail is None:
        deficit = np.maximum(1.0 - sums, 0.0)
    else:
        deficit = np.clip(np.asarray(tail, dtype=float), 0.0, 1.0)
    target = 1.0 - deficit
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(sums > 0.0, target / sums, 1.0)
    rescale = (tail is not None) | (sums > 1.0)
    entries = np.where(rescale, entries * scale, entries)
    return np.clip(entries, 0.0, 1.0), deficit


# --------------------------------------------------------------------------
# attenuator


def attenuator_kernel(efficiency, input_dim, output_dim=None):
    """Binomial-loss kernel ``P(n | q) = C(q, n) eta**n (1 - eta)**(q - n)``.

    ``output_dim`` defaults to ``input_dim`` and may not be smaller, since
    loss never increases the photon number; the kernel is then exact with
    zero deficit.
    """
    _check_efficiency(efficiency)
    input_dim = _check_dim("input_dim", input_dim)
    output_dim = input_dim if output_dim is None else _check_dim("output_dim", output_dim)
    if output_dim < input_dim:
        raise KernelError(
            f"attenuator output_dim ({output_dim}) must be >= input_dim ({input_dim})"
        )
    n = np.arange(output_dim)[:, None]
    q = np.arange(input_dim)[None, :]
    logp = (
        log_binomial(q, n)
        + _xlog(n, _log(efficiency))
        + _xlog(np.maximum(q - n, 0), _log1m(efficiency))
    )
    entries = np.where(n <= q, np.exp(logp), 0.0)
    entries, deficit = _settle_columns(entries, tail=np.zeros(input_dim))
    return TransitionKernel(entries, deficit, 0.0)


# --------------------------------------------------------------------------
# amplifier


def _amplifier_log_terms(gain, q, m):
    # log P(q|m) = log C(q, m) + (q - m) log(G - 1) - (q + 1) log G
    return (
        log_binomial(q, m)
        + _xlog(np.maximum(q - m, 0), _log(gain - 1.0))
        - (q + 1) * math.log(gain)
    )


def amplifier_tail_bound(gain, m, q_last):
    """Geometric-majorant bound on ``sum_{q > q_last} P(q | m)``.

    Successive amplifier terms have ratio ``r (q + 1) / (q + 1 - m)`` with
    ``r = (G - 1) / G``, which decreases in ``q``; once that ratio at
    ``q_last`` is below one the tail is bounded by the geometric series
    ``P(q_last | m) rho / (1 - rho)``. Returns 1 where no bound applies.
    """
    _check_gain(gain)
    m = np.asarray(m, dtype=np.int64)
    q_last = np.asarray(q_last, dtype=np.int64)
    m, q_last = np.broadcast_arrays(m, q_last)
    if gain == 1.0:
        return np.where(q_last >= m, 0.0, 1.0)
    r = (gain - 1.0) / gain
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = r * (q_last + 1.0) / (q_last + 1.0 - m)
        log_bound = (
            _amplifier_log_terms(gain, q_last, m) + np.log(rho) - np.log1p(-rho)
        )
    bound = np.where((q_last >= m) & (rho < 1.0), np.exp(np.minimum(log_bound, 0.0)), 1.0)
    return bound


def _adaptive_amplifier_last(gain, input_dim, tolerance, output_dim_cap):
    """Smallest last-kept output ``Q`` whose tail bound is within tolerance."""
    m = np.arange(input_dim)

    def worst(q_last):
        return float(np.max(amplifier_tail_bound(gain, m, q_last)))

    if gain == 1.0:
        return input_dim - 1
    hi = max(input_dim - 1, int(math.ceil(input_dim * gain)))
    while worst(hi) > tolerance:
        if hi >= output_dim_cap - 1:
            raise TruncationError(
                f"amplifier kernel with gain {gain} needs more than {output_dim_cap} "
                f"outputs for tolerance {tolerance:g} "
                f"(estimated {_required_dim_estimate(gain, input_dim, tolerance)})",
                required_dim=_required_dim_estimate(gain, input_dim, tolerance),
            )
        hi = min(2 * hi + 1, output_dim_cap - 1)
    lo = input_dim - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if worst(mid) <= tolerance:
            hi = mid
        else:
            lo = mid + 1
    return hi


def _required_dim_estimate(gain, input_dim, tolerance):
    # Mean plus enough geometric e-foldings of the asymptotic ratio (G-1)/G.
    m = input_dim - 1
    mean = (m + 1) * gain - 1
    sd = math.sqrt((m + 1) * (gain - 1) * gain)
    decay = -1.0 / math.log((gain - 1.0) / gain)
    return int(math.ceil(mean + 6 * sd + decay * math.log(1.0 / tolerance))) + 1


def amplifier_kernel(
    gain, input_dim, truncation_tolerance=DEFAULT_TOLERANCE, output_dim_cap=OUTPUT_DIM_CAP
):
    """Ideal phase-insensitive amplifier kernel with adaptive output range.

    The output dimension is the smallest one for which the geometric tail
    bound of every column is at most ``truncation_tolerance``.
    """
    _check_gain(gain)
    input_dim = _check_dim("input_dim", input_dim)
    _check_tolerance(truncation_tolerance)
    if gain == 1.0:
        return TransitionKernel.identity(input_dim)
    q_last = _adaptive_amplifier_last(gain, input_dim, truncation_tolerance, output_dim_cap)
    q = np.arange(q_last + 1)[:, None]
    m = np.arange(input_dim)[None, :]
    entries = np.where(q >= m, np.exp(_amplifier_log_terms(gain, q, m)), 0.0)
    # exact upper tail of the negative binomial: P(q > q_last | m)
    tail = nbdtrc(q_last - m.ravel(), m.ravel() + 1, 1.0 / gain)
    entries, deficit = _settle_columns(entries, tail)
    if deficit.max() > truncation_tolerance + _ROUNDING_SLACK:
        raise TruncationError(
            f"amplifier column deficit {deficit.max():.3g} exceeds tolerance "
            f"{truncation_tolerance:g}",
            required_dim=_required_dim_estimate(gain, input_dim, truncation_tolerance),
        )
    return TransitionKernel(entries, deficit, truncation_tolerance)


# --------------------------------------------------------------------------
# compound amplifier + attenuator, summed directly


def _compound_sums(efficiency, gain, n, m, tolerance, q_cap):
    """Direct evaluation of ``sum_q C(q,n) eta^n (1-eta)^(q-n) C(q,m) (G-1)^(q-m) / G^(q+1)``.

    ``n`` and ``m`` are flat integer arrays of equal length; one sum per pair.
    Needs ``0 < eta < 1`` and ``G > 1`` so every logarithm is finite.

    Each sum runs upward from ``q = max(n, m)`` and stops at the first ``q``
    where both the current term and the geometric-majorant bound on the rest
    are below ``tolerance`` times the running sum. Successive terms have ratio
    ``s (q+1)/(q+1-n) (q+1)/(q+1-m)`` with ``s = (1-eta)(G-1)/G``, which
    decreases in ``q``, so once it is below one the rest of the series is
    dominated by a geometric series.
    """
    log_eta = math.log(efficiency)
    log_loss = math.log1p(-efficiency)
    log_excess = math.log(gain - 1.0)
    log_gain = math.log(gain)
    s = (1.0 - efficiency) * (gain - 1.0) / gain
    log_s = log_loss + log_excess - log_gain
    # log term = row_const + 2 lf(q) - lf(q-n) - lf(q-m) + q log_s
    row_const = (
        -_log_factorial(n)
        - _log_factorial(m)
        + n * (log_eta - log_loss)
        - m * log_excess
        - log_gain
    )

    start = np.maximum(n, m)
    total = np.zeros(n.size)
    compensation = np.zeros(n.size)
    active = np.arange(n.size)
    offset = 0
    width = 32
    steps = np.arange(4096)
    last_term = 0.0
    while active.size:
        na = n[active][:, None]
        ma = m[active][:, None]
        q = start[active][:, None] + (offset + steps[:width])[None, :]
        first = int(q[:, 0].max())
        if first > q_cap:
            raise ConvergenceError(
                f"compound sum did not converge below q = {q_cap} "
                f"(last term magnitude {last_term:.3g})",
                cap=q_cap,
                last_term=last_term,
            )
        _log_factorial(q[:, -1])
        lf = _log_factorial_table
        log_terms = (
            row_const[active][:, None]
            + 2.0 * lf[q]
            - lf[q - na]
            - lf[q - ma]
            + q * log_s
        )
        terms = np.exp(log_terms)
        running = total[active][:, None] + np.cumsum(terms, axis=1)
        q1 = q + 1.0
        rho = s * (q1 / (q1 - na)) * (q1 / (q1 - ma))
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(rho < 1.0, terms * rho / (1.0 - rho), np.inf)
        limit = tolerance * running
        done_at = (terms <= limit) & (tail <= limit)
        finished = done_at.any(axis=1)
        stop = np.where(finished, done_at.argmax(axis=1), width - 1)
        chunk = np.where(steps[:width][None, :] <= stop[:, None], terms, 0.0).sum(axis=1)
        # Neumaier compensated accumulation across chunks
        acc = total[active]
        new = acc + chunk
        compensation[active] += np.where(
            np.abs(acc) >= np.abs(chunk), (acc - new) + chunk, (chunk - new) + acc
        )
        total[active] = new
        last_term = float(terms[:, -1].max())
        active = active[~finished]
        offset += width
        width = min(2 * width, steps.size)
    return total + compensation


def compound_entries(
    efficiency, gain, rows, cols, truncation_tolerance=DEFAULT_TOLERANCE, q_cap=Q_CAP
):
    """``P(n | m)`` of amplifier + lossy detection for ``n`` in rows, ``m`` in cols.

    Returns a ``(len(rows), len(cols))`` array. At ``G = 1`` only ``q = m``
    contributes, at ``eta = 1`` only ``q = n``, and at ``eta = 0`` every
    photon is lost; those single-term cases are evaluated directly.
    """
    _check_efficiency(efficiency)
    _check_gain(gain)
    n = np.asarray(rows, dtype=np.int64)[:, None]
    m = np.asarray(cols, dtype=np.int64)[None, :]
    n, m = np.broadcast_arrays(n, m)
    if efficiency == 0.0:
        return np.where(n == 0, 1.0, 0.0)
    if gain == 1.0:
        logp = (
            log_binomial(m, n)
            + _xlog(n, math.log(efficiency))
            + _xlog(np.maximum(m - n, 0), _log1m(efficiency))
        )
        return np.where(n <= m, np.exp(logp), 0.0)
    if efficiency == 1.0:
        return np.where(n >= m, np.exp(_amplifier_log_terms(gain, n, m)), 0.0)
    values = _compound_sums(
        efficiency, gain, n.ravel(), m.ravel(), truncation_tolerance, q_cap
    )
    return np.clip(values.reshape(n.shape), 0.0, 1.0)


def _log1m(x):
    return math.log1p(-x) if x < 1.0 else -math.inf


def compound_kernel(
    params,
    input_dim,
    output_dim=None,
    truncation_tolerance=DEFAULT_TOLERANCE,
    q_cap=Q_CAP,
    output_dim_cap=OUTPUT_DIM_CAP,
):
    """Amplifier followed by lossy detection, each entry summed directly.

    With ``output_dim=None`` the output range is chosen so that every column
    deficit is within ``truncation_tolerance`` (counts never exceed the
    amplified photon number, so the amplifier tail bound applies). An
    explicit ``output_dim`` keeps only counts ``0 .. output_dim - 1`` and
    reports the rest as deficit. Dark counts are not applied here.
    """
    input_dim = _check_dim("input_dim", input_dim)
    _check_tolerance(truncation_tolerance)
    eta, gain = params.efficiency, params.gain
    adaptive = output_dim is None
    if adaptive:
        output_dim = _adaptive_amplifier_last(gain, input_dim, truncation_tolerance, output_dim_cap) + 1
    else:
        output_dim = _check_dim("output_dim", output_dim)
    values = compound_entries(
        eta, gain, np.arange(output_dim), np.arange(input_dim), truncation_tolerance, q_cap
    )
    entries, deficit = _settle_columns(values)
    if adaptive and deficit.max() > truncation_tolerance + _ROUNDING_SLACK:
        raise TruncationError(
            f"compound column deficit {deficit.max():.3g} exceeds tolerance "
            f"{truncation_tolerance:g}",
            required_dim=_required_dim_estimate(gain, input_dim, truncation_tolerance),
        )
    return TransitionKernel(entries, deficit, truncation_tolerance)


# --------------------------------------------------------------------------
# composition and dark counts


def compose(outer, inner):
    """Kernel of ``inner`` followed by ``outer`` (the matrix product).

    The result's deficit is the inner deficit plus the outer deficits mapped
    through the inner kernel, so every column still sums to one.
    """
    if inner.output_dim != outer.input_dim:
        raise KernelError(
            f"cannot compose: inner output_dim {inner.output_dim} != "
            f"outer input_dim {outer.input_dim}"
        )
    entries = np.clip(outer.entries @ inner.entries, 0.0, 1.0)
    deficit = inner.column_deficit + outer.column_deficit @ inner.entries
    return TransitionKernel(
        entries, deficit, outer.truncation_tolerance + inner.truncation_tolerance
    )


def dark_count_kernel(
    dark_mean, input_dim, truncation_tolerance=DEFAULT_TOLERANCE, output_dim_cap=OUTPUT_DIM_CAP
):
    """Additive Poisson dark counts: ``P(c | n) = exp(-lam) lam**(c-n) / (c-n)!``.

    The output range extends ``K`` past the last input, where ``K`` is the
    smallest number of dark counts whose Poisson upper tail is within
    tolerance.
    """
    _check_dark_mean(dark_mean)
    input_dim = _check_dim("input_dim", input_dim)
    _check_tolerance(truncation_tolerance)
    if dark_mean == 0.0:
        return TransitionKernel.identity(input_dim)
    extra = int(dark_mean)
    while pdtrc(extra, dark_mean) > truncation_tolerance:
        extra = 2 * extra + 1
        if input_dim + extra > output_dim_cap:
            raise TruncationError(
                f"dark-count kernel with mean {dark_mean} needs more than "
                f"{output_dim_cap} outputs",
                required_dim=input_dim + extra,
            )
    lo = 0
    while lo < extra:
        mid = (lo + extra) // 2
        if pdtrc(mid, dark_mean) <= truncation_tolerance:
            extra = mid
        else:
            lo = mid + 1
    output_dim = input_dim + extra
    c = np.arange(output_dim)[:, None]
    n = np.arange(input_dim)[None, :]
    d = np.maximum(c - n, 0)
    log_pmf = -dark_mean + d * math.log(dark_mean) - _log_factorial(d)
    entries = np.where(c >= n, np.exp(log_pmf), 0.0)
    # dark counts beyond the last output row of each column
    entries, deficit = _settle_columns(entries, pdtrc(output_dim - 1 - n.ravel(), dark_mean))
    return TransitionKernel(entries, deficit, truncation_tolerance)


class DetectionRows:
    """Leading rows of the detection kernel, grown column by column on demand.

    Holds counts ``0 .. output_dim - 1`` for inputs ``0 .. M``; asking for a
    wider kernel computes only the new columns. This is what makes doubling
    a prior's cutoff cheap. Not safe to share between threads while growing.
    """

    def __init__(self, params, output_dim, truncation_tolerance=DEFAULT_TOLERANCE):
        self.params = params
        self.output_dim = _check_dim("output_dim", output_dim)
        self.truncation_tolerance = truncation_tolerance
        _check_tolerance(truncation_tolerance)
        self._entries = np.zeros((self.output_dim, 0))
        self._dark = None
        if params.dark_mean > 0.0:
            self._dark = dark_count_kernel(
                params.dark_mean, self.output_dim, truncation_tolerance
            ).restrict(output_dim=self.output_dim).entries

    def kernel(self, input_dim):
        input_dim = _check_dim("input_dim", input_dim)
        have = self._entries.shape[1]
        if input_dim > have:
            block = compound_entries(
                self.params.efficiency,
                self.params.gain,
                np.arange(self.output_dim),
                np.arange(have, input_dim),
                self.truncation_tolerance,
            )
            if self._dark is not None:
                block = np.clip(self._dark @ block, 0.0, 1.0)
            self._entries = np.hstack([self._entries, block])
        entries, deficit = _settle_columns(self._entries[:, :input_dim])
        return TransitionKernel(entries, deficit, 2 * self.truncation_tolerance)


def detection_kernel(params, input_dim, output_dim, truncation_tolerance=DEFAULT_TOLERANCE):
    """Full chain kernel: compound kernel, then dark counts if ``dark_mean > 0``.

    Only counts ``0 .. output_dim - 1`` are represented. Dark counts only
    ever raise the count, so those rows need no compound rows beyond them.
    """
    kernel = compound_kernel(params, input_dim, output_dim, truncation_tolerance)
    if params.dark_mean == 0.0:
        return kernel
    dark = dark_count_kernel(params.dark_mean, kernel.output_dim, truncation_tolerance)
    return compose(dark, kernel).restrict(output_dim=kernel.output_dim)
