"""
Verificação de gradiente por diferença central.
Oráculo de teste para todo backward do pacote.
"""
import logging
from typing import Callable, Iterable, Optional, Union

import numpy as np

from dsre.core.rng import Rng
from dsre.core.tensor import Parameter, Tensor, zero_grads
from dsre.errors import ContractError

logger = logging.getLogger(__name__)


def _scalar(loss: Tensor) -> float:
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        shape = getattr(loss, "shape", type(loss).__name__)
        raise ContractError(f"grad_check exige perda escalar; recebeu {shape}")
    return loss.item()


def grad_check(
    forward: Callable[[], Tensor],
    params: Union[Parameter, Iterable[Parameter]],
    eps: float = 1e-5,
    max_coords: Optional[int] = 40,
    rng: Optional[Rng] = None,
    atol: float = 1e-9,
) -> float:
    """
    Maior erro relativo |analítico - diferença central| / max(|analítico|, |dc|, 1e-8)
    sobre coordenadas amostradas de cada parâmetro.
    Coordenadas com |analítico - dc| <= atol contam como exatas: abaixo disso a diferença central
    só mede arredondamento (ex.: gradiente analítico nulo por invariância a deslocamento do softmax).
    `forward` precisa ser determinístico (modo eval ou Rng recriado a cada chamada).
    """
    if eps <= 0:
        raise ContractError(f"eps deve ser positivo: {eps}")
    params = [params] if isinstance(params, Parameter) else list(params)
    rng = rng or Rng(0)

    zero_grads(params)
    loss = forward()
    _scalar(loss)
    loss.backward()
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.generator.choice(flat.size, size=max_coords, replace=False))
        for i in coords:
            original = flat[i]
            flat[i] = original + eps
            up = _scalar(forward())
            flat[i] = original - eps
            down = _scalar(forward())
            flat[i] = original
            numeric = (up - down) / (2.0 * eps)
            a = grad.reshape(-1)[i]
            if abs(a - numeric) <= atol:
                continue
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    zero_grads(params)
    logger.debug("grad_check: %d parâmetros, erro relativo máximo %.3e", len(params), worst)
    return worst
