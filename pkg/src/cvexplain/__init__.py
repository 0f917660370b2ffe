"""Inference and explanation methods for complex-valued neural networks."""

__version__ = "0.1.0"

from .backprop import BackwardState, backward
from .deepcshap import (
    ContributionMap,
    MultiplierState,
    PartialContrib,
    chain_step,
    explain_deepcshap,
    layer_partials_linear,
    layer_partials_pointwise,
    partial_multipliers,
    reconstruct_contributions,
)
from .gradients import (
    explain_gradient,
    explain_grad_times_input,
    explain_guided,
    explain_integrated_gradients,
)
from .layers import (
    CReLU,
    ComplexConv2d,
    ComplexLinear,
    Flatten,
    Magnitude,
    MagnitudeMaxPool,
    RealPart,
    ZReLU,
    cmaxpool_window,
)
from .maxshap import maxpool_partials, maxpool_total, precompute_M
from .model import ForwardTrace, Model, load_model, save_model
from .oracle import exact_partial_shap, exact_shap, finite_diff_wirtinger
from .tensor import WirtingerPair, as_ctensor, reduce_saliency, wirtinger_from_real_parts

__all__ = [
    "BackwardState",
    "backward",
    "ContributionMap",
    "MultiplierState",
    "PartialContrib",
    "chain_step",
    "explain_deepcshap",
    "layer_partials_linear",
    "layer_partials_pointwise",
    "partial_multipliers",
    "reconstruct_contributions",
    "explain_gradient",
    "explain_grad_times_input",
    "explain_guided",
    "explain_integrated_gradients",
    "CReLU",
    "ComplexConv2d",
    "ComplexLinear",
    "Flatten",
    "Magnitude",
    "MagnitudeMaxPool",
    "RealPart",
    "ZReLU",
    "cmaxpool_window",
    "maxpool_partials",
    "maxpool_total",
    "precompute_M",
    "ForwardTrace",
    "Model",
    "load_model",
    "save_model",
    "exact_partial_shap",
    "exact_shap",
    "finite_diff_wirtinger",
    "WirtingerPair",
    "as_ctensor",
    "reduce_saliency",
    "wirtinger_from_real_parts",
]
