"""Parameter-shift explanations of additive AI corrections to interpretable base models."""

from bapc.core import (
    BapcResult,
    BaseModelFit,
    LabeledDataset,
    NeighborhoodSpec,
    fit_base,
    modified_labels,
    refit_base,
    residuals,
    run_bapc,
    surrogate_delta_f,
)

__version__ = "0.1.0"

__all__ = [
    "BapcResult",
    "BaseModelFit",
    "LabeledDataset",
    "NeighborhoodSpec",
    "fit_base",
    "modified_labels",
    "refit_base",
    "residuals",
    "run_bapc",
    "surrogate_delta_f",
]
