"""Neural tangent kernel analysis of attractor formation in sigmoid autoencoders."""

from .activations import ERF_SIGMOID, SIGMOID, Activation, activation_eval, linear
from .attractor import BasinReport, IterationDiverged, IterationTrace, basin_probe, is_attractor, iterate
from .kernels import (CovPair, Dataset, IllConditionedKernel, KernelSystem, closed_form_ntk_2layer,
                      gradient_components, gram_and_kvec, kernel_system, ntk_gradient, ntk_recursion,
                      random_dataset, t_operator)
from .network import NetworkParams, TrainConfig, TrainingDiverged, forward, jacobian, train
from .quadrature import DEFAULT_QUADRATURE, Quadrature
from .regression import InitSurrogate, SpectrumReport, f_infinity, jacobian_infinity, spectrum

__version__ = "0.1.0"
