from dsre.core.rng import Rng
from dsre.core.tensor import InitSpec, Parameter, Tensor, glorot_bound, zero_grads
from dsre.core.optim import sgd_step
from dsre.core.gradcheck import grad_check
from dsre.core import ops

__all__ = [
    "Rng",
    "InitSpec",
    "Parameter",
    "Tensor",
    "glorot_bound",
    "zero_grads",
    "sgd_step",
    "grad_check",
    "ops",
]
