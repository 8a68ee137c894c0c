"""Numerical building blocks: special functions, sampling, gradients, Adam."""
from ._backend import BACKEND
from .autograd import Tensor
from .optim import NonFiniteGradientError, ParamStore, adam_step, grad_check
from .random import RngState, sample_gamma, sample_log_gamma
from .special import (
    DomainError,
    digamma,
    gamma_cdf,
    gamma_cdf_shape_derivative,
    gamma_log_sample_grad,
    log_gamma,
    log_gamma_cdf,
    trigamma,
)

__all__ = [
    "BACKEND",
    "DomainError",
    "NonFiniteGradientError",
    "ParamStore",
    "RngState",
    "Tensor",
    "adam_step",
    "digamma",
    "gamma_cdf",
    "gamma_cdf_shape_derivative",
    "gamma_log_sample_grad",
    "grad_check",
    "log_gamma",
    "log_gamma_cdf",
    "sample_gamma",
    "sample_log_gamma",
    "trigamma",
]
