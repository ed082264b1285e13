"""Named figure-data scenarios, kernel dumps and their CSV formats.

Scenario defaults (all overridable):

======  =================  =======  ==============================  =====================
name    prior              outcome  efficiency grid                 gain grid
======  =================  =======  ==============================  =====================
fig3    flat (converged)   0        0.05 .. 1.0 step 0.05           1 .. 16 step 0.5
fig4    two-photon         0        0.05 .. 0.95 step 0.01          1, 2, 4, 8, 16
fig5    nonzero-flat       1        0.05 .. 0.95 step 0.01          1, 2, 4, 8, 16
fig6    flat (converged)   0        0.5                             1, 10
fig7    flat (converged)   0        0.8                             1 .. 16 step 0.25
======  =================  =======  ==============================  =====================

``fig6`` emits posterior histograms over ``0 .. max_photons`` photons; ``fig7``
emits the zero-count probability relative to a perfect detector alongside
the fidelity. ``custom`` needs explicit grids and a prior.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .kernels import (
    DEFAULT_TOLERANCE,
    DetectionChainParams,
    KernelError,
    TransitionKernel,
    compose,
    compound_kernel,
    dark_count_kernel,
)
from .priors import resolve_prior
from .retrodict import (
    ImpossibleOutcomeError,
    chain_report,
    fidelity_surface,
    prior_label,
    relative_count_probability,
)
from .sweep import SweepResult, format_value

__all__ = [
    "SCENARIOS",
    "ScenarioError",
    "ScenarioConfig",
    "scenario_defaults",
    "parse_grid",
    "run_scenario",
    "dump_kernel",
    "kernel_to_csv",
    "read_kernel_csv",
]

SCENARIOS = ("fig3", "fig4", "fig5", "fig6", "fig7", "custom")


class ScenarioError(ValueError):
    """Unknown scenario or incomplete scenario configuration."""


def _arange(start, stop, step):
    count = int(round((stop - start) / step)) + 1
    return [round(start + i * step, 10) for i in range(count)]


_DEFAULTS = {
    "fig3": dict(
        prior="flat", outcome=0,
        efficiency_grid=_arange(0.05, 1.0, 0.05), gain_grid=_arange(1.0, 16.0, 0.5),
    ),
    "fig4": dict(
        prior="two-photon", outcome=0,
        efficiency_grid=_arange(0.05, 0.95, 0.01), gain_grid=[1.0, 2.0, 4.0, 8.0, 16.0],
    ),
    "fig5": dict(
        prior="nonzero-flat", outcome=1,
        efficiency_grid=_arange(0.05, 0.95, 0.01), gain_grid=[1.0, 2.0, 4.0, 8.0, 16.0],
    ),
    "fig6": dict(prior="flat", outcome=0, efficiency_grid=[0.5], gain_grid=[1.0, 10.0]),
    "fig7": dict(
        prior="flat", outcome=0, efficiency_grid=[0.8], gain_grid=_arange(1.0, 16.0, 0.25),
    ),
}


@dataclass
class ScenarioConfig:
    """Everything needed to regenerate one data table.

    Fields left as ``None`` take the named scenario's default.
    """

    scenario: str
    efficiency_grid: list | None = None
    gain_grid: list | None = None
    dark_mean: float = 0.0
    prior: str | None = None
    cutoff: int | None = None
    outcome: int | None = None
    tolerance: float = DEFAULT_TOLERANCE
    max_photons: int = 20
    output: str | None = None
    workers: int = 1

    @classmethod
    def from_file(cls, path, **overrides):
        """Load a JSON config; non-``None`` keyword overrides win."""
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown config keys: {', '.join(sorted(unknown))}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        if "scenario" not in data:
            raise ScenarioError("config file does not name a scenario")
        return cls(**data)

    def resolved(self):
        """Copy with every default filled in."""
        if self.scenario not in SCENARIOS:
            raise ScenarioError(
                f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}"
            )
        if self.scenario == "custom":
            missing = [
                name for name in ("efficiency_grid", "gain_grid", "prior")
                if getattr(self, name) is None
            ]
            if missing:
                raise ScenarioError(f"custom scenario needs {', '.join(missing)}")
            return replace(self, outcome=0 if self.outcome is None else self.outcome)
        defaults = scenario_defaults(self.scenario)
        return replace(
            self,
            **{k: v for k, v in defaults.items() if getattr(self, k) is None},
        )


def scenario_defaults(name):
    """Default prior, outcome and grids of a named scenario."""
    if name not in _DEFAULTS:
        raise ScenarioError(f"no defaults for scenario {name!r}")
    return {k: (list(v) if isinstance(v, list) else v) for k, v in _DEFAULTS[name].items()}


def parse_grid(text):
    """Parse ``0.5``, ``0.1,0.2,0.4`` or ``start:stop:step`` (stop inclusive)."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ValueError
            return _arange(*parts)
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ScenarioError(f"cannot parse grid {text!r}") from None


def run_scenario(config):
    """Compute a scenario's table and write it to ``config.output`` if set."""
    config = config.resolved()
    prior = resolve_prior(config.prior, config.cutoff)
    if config.scenario == "fig6":
        result = _posterior_histograms(config, prior)
    elif config.scenario == "fig7":
        result = _relative_probability(config, prior)
    else:
        result = fidelity_surface(
            prior,
            config.outcome,
            config.efficiency_grid,
            config.gain_grid,
            tolerance=config.tolerance,
            dark_mean=config.dark_mean,
            workers=config.workers,
        )
    result.metadata = {"scenario": config.scenario, **result.metadata}
    result.metadata["dark_mean"] = config.dark_mean
    if config.output:
        result.to_csv(config.output)
    return result


def _posterior_histograms(config, prior):
    rows = []
    means = {}
    cutoff = None
    for eta in config.efficiency_grid:
        for gain in config.gain_grid:
            try:
                params = DetectionChainParams(gain, eta, config.dark_mean)
                report = chain_report(prior, params, config.outcome, config.tolerance)
            except (KernelError, ValueError) as exc:
                status = "impossible" if isinstance(exc, ImpossibleOutcomeError) else f"error: {exc}"
                rows.extend([eta, gain, m, None, status] for m in range(config.max_photons + 1))
                continue
            means[f"posterior_mean(eta={eta:g},gain={gain:g})"] = report.posterior_mean
            cutoff = report.cutoff if cutoff is None else max(cutoff, report.cutoff)
            for m in range(config.max_photons + 1):
                p = float(report.posterior[m]) if m < report.posterior.size else 0.0
                rows.append([eta, gain, m, p, "ok"])
    metadata = {
        "quantity": f"posterior photon-number distribution after {config.outcome} counts",
        "prior": prior_label(prior),
        "cutoff": cutoff,
        "tolerance": config.tolerance,
        "version": __version__,
        **means,
    }
    return SweepResult(["eta", "gain", "m", "posterior", "status"], rows, metadata)


def _relative_probability(config, prior):
    rows = []
    cutoff = None
    for eta in config.efficiency_grid:
        for gain in config.gain_grid:
            try:
                params = DetectionChainParams(gain, eta, config.dark_mean)
                ratio = relative_count_probability(prior, params, config.outcome, config.tolerance)
                report = chain_report(prior, params, config.outcome, config.tolerance)
            except (KernelError, ValueError) as exc:
                status = "impossible" if isinstance(exc, ImpossibleOutcomeError) else f"error: {exc}"
                rows.append([eta, gain, None, None, None, status])
                continue
            cutoff = report.cutoff if cutoff is None else max(cutoff, report.cutoff)
            rows.append([eta, gain, ratio, report.fidelity, report.count_probability, "ok"])
    metadata = {
        "quantity": f"P({config.outcome}) relative to a perfect detector, and fidelity",
        "prior": prior_label(prior),
        "cutoff": cutoff,
        "tolerance": config.tolerance,
        "version": __version__,
    }
    columns = ["eta", "gain", "relative_probability", "fidelity", "count_probability", "status"]
    return SweepResult(columns, rows, metadata)


# --------------------------------------------------------------------------
# kernel dumps


def dump_kernel(params, input_dim, output_dim=None, tolerance=DEFAULT_TOLERANCE, path=None):
    """Compound kernel (composed with dark counts when ``dark_mean > 0``) as CSV.

    Returns ``(kernel, csv_text)`` and writes the text to ``path`` if given.
    """
    kernel = compound_kernel(params, input_dim, output_dim, tolerance)
    if params.dark_mean > 0.0:
        dark = dark_count_kernel(params.dark_mean, kernel.output_dim, tolerance)
        kernel = compose(dark, kernel)
        if output_dim is not None:
            kernel = kernel.restrict(output_dim=output_dim)
    metadata = {
        "eta": params.efficiency,
        "gain": params.gain,
        "dark_mean": params.dark_mean,
        "tolerance": tolerance,
        "version": __version__,
    }
    text = kernel_to_csv(kernel, metadata)
    if path is not None:
        Path(path).write_text(text)
    return kernel, text


def kernel_to_csv(kernel, metadata=None):
    r"""CSV text of a kernel.

    The header is ``n\m`` followed by the input photon numbers; each row starts
    with the output count ``n``; a final ``deficit`` row holds the per-column
    mass beyond the last output.
    """
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}: {format_value(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n\\m", *range(kernel.input_dim)])
    for n in range(kernel.output_dim):
        writer.writerow([n, *(format_value(float(x)) for x in kernel.entries[n])])
    writer.writerow(["deficit", *(format_value(float(x)) for x in kernel.column_deficit)])
    return buf.getvalue()


def read_kernel_csv(path_or_text, truncation_tolerance=0.0):
    """Parse a kernel written by :func:`kernel_to_csv` back into a kernel."""
    text = path_or_text
    if isinstance(path_or_text, Path) or "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text()
    lines = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    if header[0] != "n\\m":
        raise KernelError(f"not a kernel CSV: header starts with {header[0]!r}")
    if not body or body[-1][0] != "deficit":
        raise KernelError("kernel CSV lacks its final deficit row")
    entries = np.array([[float(x) for x in row[1:]] for row in body[:-1]])
    deficit = np.array([float(x) for x in body[-1][1:]])
    return TransitionKernel(entries, deficit, truncation_tolerance)
