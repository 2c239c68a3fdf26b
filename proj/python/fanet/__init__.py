"""Desk-scale building extraction from aerial imagery.

Thin wrapper around the native core. The heavy lifting (network, autodiff,
training) lives in C++; this module exposes inference, dataset synthesis,
gradient checking, metrics, and the tensor file format.
"""

from fanet._core import (
    FanetError,
    Model,
    evaluate_masks,
    generate_synthetic,
    gradcheck,
    read_ftns,
    train,
    write_ftns,
)

__all__ = [
    "FanetError",
    "Model",
    "evaluate_masks",
    "generate_synthetic",
    "gradcheck",
    "read_ftns",
    "train",
    "write_ftns",
]
