from typing import Iterable

from dsre.core.tensor import Parameter


def sgd_step(params: Iterable[Parameter], lr: float) -> None:
    """value <- value - lr * grad. Não zera os gradientes (fica a cargo de quem chama)."""
    for p in params:
        p.data -= lr * p.grad
