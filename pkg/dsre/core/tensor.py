"""
Tensor denso em float64 com gradiente reverso.
Cada operação de dsre.core.ops registra os pais e uma função de backward;
Tensor.backward percorre o grafo em ordem topológica reversa.
"""
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from dsre.errors import ContractError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[object]]]


@dataclass(frozen=True)
class InitSpec:
    kind: str  # "uniform" | "zeros" | "pretrained"
    lo: float = 0.0
    hi: float = 0.0
    name: Optional[str] = None

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "InitSpec":
        return cls("uniform", lo, hi)

    @classmethod
    def zeros(cls) -> "InitSpec":
        return cls("zeros")

    @classmethod
    def pretrained(cls, name: str) -> "InitSpec":
        return cls("pretrained", name=name)


class RowGrad:
    """Gradiente esparso por linhas (lookup de embedding): evita materializar a tabela inteira."""

    def __init__(self, ids: np.ndarray, values: np.ndarray, shape: Tuple[int, ...]):
        self.ids = ids
        self.values = values
        self.shape = shape

    def dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, self.ids, self.values)
        return out


def _dense(g) -> np.ndarray:
    return g.dense() if isinstance(g, RowGrad) else g


def _merge(existing, new):
    if existing is None:
        return new
    return _dense(existing) + _dense(new)


class Tensor:
    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        op: str = "",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents = parents
        self._backward = backward_fn
        self.op = op

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() exige tensor escalar, shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'})"

    def _topo(self) -> List["Tensor"]:
        order: List[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        return order

    def backward(self, grad=None) -> None:
        """Propaga dL/d(self) até as folhas; acumula em .grad (não zera antes)."""
        if grad is None:
            if self.data.size != 1:
                raise ContractError(f"backward sem gradiente exige saída escalar, shape {self.shape}")
            grad = np.ones_like(self.data)
        else:
            grad = np.broadcast_to(np.asarray(grad, dtype=np.float64), self.shape).copy()
        if not self.requires_grad:
            return

        grads = {id(self): grad}
        for node in reversed(self._topo()):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(_dense(g))):
                if pg is None or not parent.requires_grad:
                    continue
                grads[id(parent)] = _merge(grads.get(id(parent)), pg)

    def _accumulate(self, g) -> None:
        if self.grad is None:
            self.grad = _dense(g).copy()
        elif isinstance(g, RowGrad):
            np.add.at(self.grad, g.ids, g.values)
        else:
            self.grad += g


class Parameter(Tensor):
    """Tensor aprendido: value e grad sempre com o mesmo shape."""

    def __init__(self, value, init_spec: Optional[InitSpec] = None, name: str = ""):
        super().__init__(np.array(value, dtype=np.float64), requires_grad=True)
        self.grad = np.zeros_like(self.data)
        self.init_spec = init_spec or InitSpec.zeros()
        self.name = name

    @property
    def value(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Parameter({self.name or '?'}, shape={self.shape}, init={self.init_spec.kind})"


def zero_grads(params: Iterable[Parameter]) -> None:
    for p in params:
        p.grad[...] = 0.0


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))
