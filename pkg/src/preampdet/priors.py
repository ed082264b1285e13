"""Prior photon-number distributions for the measurement arm."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DEFAULT_FLAT_CUTOFF",
    "PriorError",
    "PriorDistribution",
    "flat_prior",
    "two_photon_generator_prior",
    "nonzero_flat_prior",
    "prior_from_values",
    "load_prior",
    "PRIOR_NAMES",
    "resolve_prior",
]

DEFAULT_FLAT_CUTOFF = 200

_RENORMALIZATION_WARN = 1e-9
_NORMALIZATION_ATOL = 1e-12


class PriorError(ValueError):
    """Invalid prior probabilities."""


@dataclass(frozen=True, eq=False)
class PriorDistribution:
    """Normalized probabilities ``p_m`` of ``m = 0 .. len - 1`` photons.

    ``renormalized`` records whether the values given had to be rescaled by
    more than 1e-9 to sum to one.
    """

    probabilities: np.ndarray
    label: str = "custom"
    renormalized: bool = False

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise PriorError("a prior needs at least one probability")
        if not np.all(np.isfinite(p)):
            raise PriorError("prior probabilities must be finite")
        if p.min() < 0.0:
            raise PriorError("prior probabilities must be non-negative")
        if abs(math.fsum(p) - 1.0) > _NORMALIZATION_ATOL:
            raise PriorError(f"prior probabilities sum to {math.fsum(p)!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def __len__(self):
        return self.probabilities.size

    @property
    def cutoff(self):
        """Largest photon number represented."""
        return self.probabilities.size - 1

    @property
    def mean(self):
        return float(np.arange(len(self)) @ self.probabilities)


def flat_prior(cutoff=DEFAULT_FLAT_CUTOFF):
    """Equal probability ``1 / (cutoff + 1)`` for each of ``0 .. cutoff`` photons."""
    if int(cutoff) != cutoff or cutoff < 0:
        raise PriorError(f"cutoff must be a non-negative integer, got {cutoff!r}")
    cutoff = int(cutoff)
    return PriorDistribution(np.full(cutoff + 1, 1.0 / (cutoff + 1)), f"flat({cutoff})")


def two_photon_generator_prior():
    """Measurement arm of a 50/50 beam splitter fed one photon in each input.

    Hong-Ou-Mandel interference leaves both photons in one arm, so the arm
    holds 0 or 2 photons with equal probability.
    """
    return PriorDistribution(np.array([0.5, 0.0, 0.5]), "two-photon")


def nonzero_flat_prior(cutoff=DEFAULT_FLAT_CUTOFF):
    """Flat over ``1 .. cutoff`` photons with no vacuum component."""
    if int(cutoff) != cutoff or cutoff < 1:
        raise PriorError(f"cutoff must be an integer >= 1, got {cutoff!r}")
    cutoff = int(cutoff)
    p = np.full(cutoff + 1, 1.0 / cutoff)
    p[0] = 0.0
    return PriorDistribution(p, f"nonzero-flat({cutoff})")


def prior_from_values(values, label="custom"):
    """Normalize non-negative weights into a prior.

    Warns when the weights had to be rescaled by more than 1e-9.
    """
    v = np.array(values, dtype=float).ravel()
    if v.size == 0:
        raise PriorError("a prior needs at least one value")
    if not np.all(np.isfinite(v)):
        raise PriorError("prior values must be finite")
    if v.min() < 0.0:
        bad = int(np.argmax(v < 0.0))
        raise PriorError(f"negative entry {v[bad]!r} at photon number {bad}")
    total = math.fsum(v)
    if total <= 0.0:
        raise PriorError("prior values are all zero")
    renormalized = abs(total - 1.0) > _RENORMALIZATION_WARN
    if renormalized:
        warnings.warn(
            f"prior values summed to {total!r}; renormalized", RuntimeWarning, stacklevel=2
        )
    p = v / total
    # absorb the last rounding residue so the sum is 1 to working precision
    p /= math.fsum(p)
    return PriorDistribution(p, label, renormalized)


def load_prior(path):
    """Read a one-column text file of probabilities, ``#`` starting a comment."""
    path = Path(path)
    values = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            raise PriorError(f"{path}:{lineno}: not a number: {text!r}") from None
    return prior_from_values(values, label=path.name)


PRIOR_NAMES = ("flat", "nonzero-flat", "two-photon")


def resolve_prior(source, cutoff=None):
    """Turn a prior name or file path into a prior or prior family.

    ``flat`` and ``nonzero-flat`` give the converged families unless a cutoff
    is supplied (``flat:400`` or ``cutoff=400``), in which case that fixed
    prior is returned. ``two-photon`` is the beam-splitter generator. Any
    other string is read as a prior file.
    """
    if isinstance(source, PriorDistribution) or callable(source):
        return source
    name, _, arg = str(source).partition(":")
    if arg:
        try:
            cutoff = int(arg)
        except ValueError:
            raise PriorError(f"bad cutoff in prior {source!r}") from None
    if name == "flat":
        return flat_prior if cutoff is None else flat_prior(cutoff)
    if name == "nonzero-flat":
        return nonzero_flat_prior if cutoff is None else nonzero_flat_prior(cutoff)
    if name == "two-photon":
        return two_photon_generator_prior()
    path = Path(source)
    if path.is_file():
        return load_prior(path)
    raise PriorError(
        f"unknown prior {source!r}: expected one of {', '.join(PRIOR_NAMES)} or a file path"
    )
