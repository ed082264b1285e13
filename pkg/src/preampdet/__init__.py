"""Retrodictive fidelity of preamplified photon-counting detectors."""

__version__ = "0.1.0"

from .kernels import (  # noqa: E402
    DetectionChainParams,
    TransitionKernel,
    amplifier_kernel,
    attenuator_kernel,
    compose,
    compound_kernel,
    dark_count_kernel,
    detection_kernel,
)
from .priors import (  # noqa: E402
    PriorDistribution,
    flat_prior,
    load_prior,
    nonzero_flat_prior,
    prior_from_values,
    two_photon_generator_prior,
)
from .retrodict import (  # noqa: E402
    RetrodictionReport,
    chain_report,
    fidelity_surface,
    relative_count_probability,
    retrodict,
)

__all__ = [
    "__version__",
    "DetectionChainParams",
    "TransitionKernel",
    "amplifier_kernel",
    "attenuator_kernel",
    "compose",
    "compound_kernel",
    "dark_count_kernel",
    "detection_kernel",
    "PriorDistribution",
    "flat_prior",
    "load_prior",
    "nonzero_flat_prior",
    "prior_from_values",
    "two_photon_generator_prior",
    "RetrodictionReport",
    "chain_report",
    "fidelity_surface",
    "relative_count_probability",
    "retrodict",
]
