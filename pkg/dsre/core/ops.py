"""
Operações diferenciáveis usadas pelos três codificadores.
Só o que PCNN, BGWA e EA precisam; cada função devolve um Tensor cujo
backward implementa a derivada analítica.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from dsre.core.rng import Rng
from dsre.core.tensor import RowGrad, Tensor
from dsre.errors import DimensionError, DomainError, EmbeddingLookupError, PoolingIndexError


def _make(data: np.ndarray, parents: Tuple[Tensor, ...], backward, op: str) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward, op=op)
    return Tensor(data, op=op)


def constant(data) -> Tensor:
    return Tensor(data)


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(op, a.shape, b.shape)


# ---------- Álgebra linear ----------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Produto matricial; aceita matriz×matriz, matriz×vetor e vetor×matriz."""
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2) or (a.data.ndim == 1 and b.data.ndim == 1):
        raise DimensionError("matmul", a.shape, b.shape)
    if a.shape[-1] != b.shape[0]:
        raise DimensionError("matmul", a.shape, b.shape)
    A, B = a.data, b.data
    out = A @ B

    def backward(g):
        if A.ndim == 2 and B.ndim == 2:
            return g @ B.T, A.T @ g
        if A.ndim == 2:
            return np.outer(g, B), A.T @ g
        return B @ g, np.outer(A, g)

    return _make(out, (a, b), backward, "matmul")


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError("transpose", x.shape)
    return _make(x.data.T.copy(), (x,), lambda g: (g.T,), "transpose")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return _make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    A, B = a.data, b.data
    return _make(A * B, (a, b), lambda g: (g * B, g * A), "mul")


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """x[..., c] + bias[c], somando o bias em cada linha."""
    if bias.data.ndim != 1 or x.shape[-1] != bias.shape[0]:
        raise DimensionError("add_bias", x.shape, bias.shape)

    def backward(g):
        return g, g.reshape(-1, bias.shape[0]).sum(axis=0)

    return _make(x.data + bias.data, (x, bias), backward, "add_bias")


def one_minus(x: Tensor) -> Tensor:
    return _make(1.0 - x.data, (x,), lambda g: (-g,), "one_minus")


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _make(np.array(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),), "sum")


# ---------- Não linearidades ----------
def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _make(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")


def sigmoid(x: Tensor) -> Tensor:
    # forma via tanh: estável para |x| grande e exata em 0
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _make(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


_ELEMENTWISE = {"tanh": tanh, "sigmoid": sigmoid, "add": add, "mul": mul}


def elementwise(op: str, *operands: Tensor) -> Tensor:
    if op not in _ELEMENTWISE:
        raise DomainError(f"operação elementwise desconhecida: {op}. Use: {sorted(_ELEMENTWISE)}")
    return _ELEMENTWISE[op](*operands)


def softmax(v: Tensor) -> Tensor:
    if v.data.ndim != 1:
        raise DimensionError("softmax", v.shape)
    if v.shape[0] == 0:
        raise DomainError("softmax de vetor vazio")
    e = np.exp(v.data - v.data.max())
    s = e / e.sum()

    def backward(g):
        return (s * (g - np.dot(g, s)),)

    return _make(s, (v,), backward, "softmax")


def nll_loss(logits: Tensor, label: int) -> Tensor:
    """-log softmax(logits)[label], calculado por log-sum-exp."""
    if logits.data.ndim != 1:
        raise DimensionError("nll_loss", logits.shape)
    z = logits.data
    m = z.max()
    e = np.exp(z - m)
    total = e.sum()
    loss = (m + math.log(total)) - z[label]
    probs = e / total

    def backward(g):
        grad = probs.copy()
        grad[label] -= 1.0
        return (float(g) * grad,)

    return _make(np.array(loss), (logits,), backward, "nll_loss")


# ---------- Pooling e dropout ----------
def segment_bounds(length: int, p1: int, p2: int) -> List[Tuple[int, int]]:
    """Segmentos fechados [0..p1], [p1..p2], [p2..L-1]; as entidades entram em dois segmentos."""
    if not (0 <= p1 <= p2 < length):
        raise PoolingIndexError(f"índices de pooling inválidos: p1={p1}, p2={p2}, L={length}")
    return [(0, p1), (p1, p2), (p2, length - 1)]


def piecewise_max_pool(features: Tensor, p1: int, p2: int) -> Tuple[Tensor, np.ndarray]:
    """Max-pooling por segmento; devolve Tensor[3c] e os argmax (3×c) usados no backward."""
    if features.data.ndim != 2:
        raise DimensionError("piecewise_max_pool", features.shape)
    L, c = features.shape
    F = features.data
    cols = np.arange(c)
    winners = np.empty((3, c), dtype=np.int64)
    for k, (lo, hi) in enumerate(segment_bounds(L, p1, p2)):
        # argmax devolve o primeiro máximo em caso de empate
        winners[k] = lo + np.argmax(F[lo:hi + 1], axis=0)
    out = np.concatenate([F[winners[k], cols] for k in range(3)])

    def backward(g):
        grad = np.zeros_like(F)
        for k in range(3):
            np.add.at(grad, (winners[k], cols), g[k * c:(k + 1) * c])
        return (grad,)

    return _make(out, (features,), backward, "piecewise_max_pool"), winners


def dropout(x: Tensor, rate: float, train: bool, rng: Optional[Rng]) -> Tensor:
    """Dropout invertido: escala no treino, identidade na avaliação."""
    if not 0.0 <= rate < 1.0:
        raise DomainError(f"taxa de dropout deve estar em [0, 1): {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise DomainError("dropout em modo treino exige um Rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _make(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


# ---------- Reorganização ----------
def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    rows = {p.shape[0] for p in parts}
    if any(p.data.ndim != 2 for p in parts) or len(rows) != 1:
        raise DimensionError("concat_cols", *[p.shape for p in parts])
    cuts = np.cumsum([p.shape[1] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=1))

    return _make(np.concatenate([p.data for p in parts], axis=1), tuple(parts), backward, "concat_cols")


def stack_rows(rows: Sequence[Tensor]) -> Tensor:
    if len({r.shape for r in rows}) != 1 or rows[0].data.ndim != 1:
        raise DimensionError("stack_rows", *[r.shape for r in rows])

    def backward(g):
        return tuple(g[i] for i in range(len(rows)))

    return _make(np.stack([r.data for r in rows]), tuple(rows), backward, "stack_rows")


def take_row(x: Tensor, t: int) -> Tensor:
    shape = x.shape

    def backward(g):
        grad = np.zeros(shape)
        grad[t] = g
        return (grad,)

    return _make(x.data[t].copy(), (x,), backward, "take_row")


def take_rows(table: Tensor, ids: Sequence[int], pad_index: Optional[int] = None) -> Tensor:
    """Lookup de embedding; a linha de PAD sai zerada e não recebe gradiente."""
    idx = np.asarray(ids, dtype=np.int64)
    n_rows = table.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n_rows):
        raise EmbeddingLookupError(f"id fora da tabela de {n_rows} linhas: {idx.min()}..{idx.max()}")
    out = table.data[idx].copy()
    keep = np.ones(idx.shape, dtype=bool) if pad_index is None else idx != pad_index
    out[~keep] = 0.0

    def backward(g):
        return (RowGrad(idx[keep], g[keep], table.shape),)

    return _make(out, (table,), backward, "take_rows")


def tile_rows(v: Tensor, n: int) -> Tensor:
    if v.data.ndim != 1:
        raise DimensionError("tile_rows", v.shape)
    return _make(np.tile(v.data, (n, 1)), (v,), lambda g: (g.sum(axis=0),), "tile_rows")


def mean_rows(x: Tensor) -> Tensor:
    n = x.shape[0]
    return _make(x.data.mean(axis=0), (x,), lambda g: (np.tile(g / n, (n, 1)),), "mean_rows")


def scale_rows(x: Tensor, weights: Tensor) -> Tensor:
    """Linha j de x multiplicada por weights[j]."""
    if x.data.ndim != 2 or weights.shape != (x.shape[0],):
        raise DimensionError("scale_rows", x.shape, weights.shape)
    X, a = x.data, weights.data

    def backward(g):
        return g * a[:, None], (g * X).sum(axis=1)

    return _make(X * a[:, None], (x, weights), backward, "scale_rows")


def unfold_rows(x: Tensor, window: int) -> Tensor:
    """Janelas de `window` linhas com padding zero: saída [M × window·d], uma por token."""
    if x.data.ndim != 2 or window < 1:
        raise DimensionError("unfold_rows", x.shape)
    M, d = x.shape
    left = (window - 1) // 2
    padded = np.zeros((M + window - 1, d))
    padded[left:left + M] = x.data
    idx = np.arange(M)[:, None] + np.arange(window)[None, :]
    out = padded[idx].reshape(M, window * d)

    def backward(g):
        grad = np.zeros_like(padded)
        np.add.at(grad, idx, g.reshape(M, window, d))
        return (grad[left:left + M],)

    return _make(out, (x,), backward, "unfold_rows")
