"""Stacked Gaussian processes with analytical uncertain-input moments."""

from .gp import GaussianBelief, GPNode, TrainingSet, TrainOptions, train
from .kernels import Kernel, PolynomialKernel, RbfKernel, SumKernel
from .moments import (
    MomentResult,
    multinomial_indices,
    noncentral_moment,
    poly_uncertain_mean,
    poly_uncertain_variance,
    rbf_uncertain_mean,
    rbf_uncertain_variance,
    sum_kernel_uncertain_moments,
    uncertain_moments,
)
from .network import (
    NetworkSpec,
    NodeSpec,
    PropagationTrace,
    StackedNetwork,
    build_and_train,
    propagate,
    propagate_recurrent,
)
from .oracle import McResult, mc_propagate, mc_propagate_recurrent

__version__ = "0.1.0"

__all__ = [
    "GaussianBelief",
    "GPNode",
    "TrainingSet",
    "TrainOptions",
    "train",
    "Kernel",
    "RbfKernel",
    "PolynomialKernel",
    "SumKernel",
    "MomentResult",
    "noncentral_moment",
    "multinomial_indices",
    "rbf_uncertain_mean",
    "rbf_uncertain_variance",
    "poly_uncertain_mean",
    "poly_uncertain_variance",
    "sum_kernel_uncertain_moments",
    "uncertain_moments",
    "NetworkSpec",
    "NodeSpec",
    "StackedNetwork",
    "PropagationTrace",
    "build_and_train",
    "propagate",
    "propagate_recurrent",
    "McResult",
    "mc_propagate",
    "mc_propagate_recurrent",
    "__version__",
]
