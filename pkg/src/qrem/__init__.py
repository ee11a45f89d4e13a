"""Scalable mitigation of correlated qubit readout errors.

The package covers the full pipeline: parallel detector calibration driven
by perfect hash families, maximum-likelihood POVM reconstruction, readout
correlation coefficients and noise clustering, measurement simulation under
configurable noise channels, and mitigated observable extraction on
connected noise clusters.
"""

from .linalg import (
    DensityMatrix,
    Povm,
    basis_rotation,
    fidelity,
    haar_random_state,
    partial_trace,
    tensor_product,
)
from .hashfamily import HashFamily, generate_phf_random, phf_2local, verify_phf

__all__ = [
    "DensityMatrix",
    "Povm",
    "basis_rotation",
    "fidelity",
    "haar_random_state",
    "partial_trace",
    "tensor_product",
    "HashFamily",
    "generate_phf_random",
    "phf_2local",
    "verify_phf",
]
