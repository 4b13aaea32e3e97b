"""
Codificadores de sentença: PCNN, BGWA (Bi-GRU + atenção por palavra) e EA (atenção por entidade).
Cada forward recebe a sentença já embutida (Tensor[M×d]) e devolve probabilidades por relação.
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from dsre.core import ops
from dsre.core.rng import Rng
from dsre.core.tensor import InitSpec, Parameter, Tensor, glorot_bound
from dsre.errors import DimensionError

TRAIN, EVAL = "train", "eval"


@dataclass
class ModelOutput:
    probs: Tensor  # softmax sobre relações (ou score por relação, no nível da bag)
    logits: Optional[Tensor] = None
    attention: Dict[str, np.ndarray] = field(default_factory=dict)  # "word" | "entity1" | "entity2"


def _uniform(rng: Rng, shape, fan_in: int, fan_out: int, scale: Optional[float], name: str) -> Parameter:
    b = scale if scale is not None else glorot_bound(fan_in, fan_out)
    return Parameter(rng.uniform(-b, b, shape), InitSpec.uniform(-b, b), name=name)


def _zeros(shape, name: str) -> Parameter:
    return Parameter(np.zeros(shape), InitSpec.zeros(), name=name)


def _classify(features: Tensor, out_linear: Parameter, out_bias: Parameter) -> Tuple[Tensor, Tensor]:
    logits = ops.add_bias(ops.matmul(out_linear, features), out_bias)
    return logits, ops.softmax(logits)


# ---------- PCNN ----------
@dataclass
class PcnnParams:
    filters: Parameter  # [c × w·d]
    filter_bias: Parameter  # [c]
    out_linear: Parameter  # [rl × 3c]
    out_bias: Parameter  # [rl]
    window: int

    @classmethod
    def init(cls, d: int, c: int, window: int, rl: int, rng: Rng, scale: Optional[float] = None) -> "PcnnParams":
        return cls(
            filters=_uniform(rng, (c, window * d), window * d, c, scale, "filters"),
            filter_bias=_zeros((c,), "filter_bias"),
            out_linear=_uniform(rng, (rl, 3 * c), 3 * c, rl, scale, "out_linear"),
            out_bias=_zeros((rl,), "out_bias"),
            window=window,
        )

    def parameters(self) -> Dict[str, Parameter]:
        return {
            "filters": self.filters,
            "filter_bias": self.filter_bias,
            "out_linear": self.out_linear,
            "out_bias": self.out_bias,
        }


def convolve(x: Tensor, params: PcnnParams) -> Tensor:
    """Convolução 1-D com padding zero: saída [M × c], alinhada aos tokens."""
    windows = ops.unfold_rows(x, params.window)
    if windows.shape[1] != params.filters.shape[1]:
        raise DimensionError("convolve", x.shape, params.filters.shape)
    return ops.add_bias(ops.matmul(windows, ops.transpose(params.filters)), params.filter_bias)


def pcnn_features(x: Tensor, p1: int, p2: int, params: PcnnParams) -> Tensor:
    pooled, _ = ops.piecewise_max_pool(convolve(x, params), p1, p2)
    return ops.tanh(pooled)


def pcnn_forward(
    x: Tensor, p1: int, p2: int, params: PcnnParams, mode: str = EVAL, rate: float = 0.5, rng: Optional[Rng] = None
) -> ModelOutput:
    feats = ops.dropout(pcnn_features(x, p1, p2, params), rate, mode == TRAIN, rng)
    logits, probs = _classify(feats, params.out_linear, params.out_bias)
    return ModelOutput(probs=probs, logits=logits)


# ---------- Bi-GRU ----------
@dataclass
class GruParams:
    W_z: Parameter  # [h × d]
    W_r: Parameter
    W_h: Parameter
    U_z: Parameter  # [h × h]
    U_r: Parameter
    U_h: Parameter
    b_z: Parameter  # [h]
    b_r: Parameter
    b_h: Parameter

    @classmethod
    def init(cls, d: int, h: int, rng: Rng, scale: Optional[float] = None) -> "GruParams":
        return cls(
            W_z=_uniform(rng, (h, d), d, h, scale, "W_z"),
            W_r=_uniform(rng, (h, d), d, h, scale, "W_r"),
            W_h=_uniform(rng, (h, d), d, h, scale, "W_h"),
            U_z=_uniform(rng, (h, h), h, h, scale, "U_z"),
            U_r=_uniform(rng, (h, h), h, h, scale, "U_r"),
            U_h=_uniform(rng, (h, h), h, h, scale, "U_h"),
            b_z=_zeros((h,), "b_z"),
            b_r=_zeros((h,), "b_r"),
            b_h=_zeros((h,), "b_h"),
        )

    @property
    def hidden(self) -> int:
        return self.U_z.shape[0]

    def parameters(self) -> Dict[str, Parameter]:
        return {k: getattr(self, k) for k in ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")}


def _gru_cell(xz: Tensor, xr: Tensor, xh: Tensor, h_prev: Tensor, p: GruParams) -> Tensor:
    z = ops.sigmoid(ops.add(xz, ops.matmul(p.U_z, h_prev)))
    r = ops.sigmoid(ops.add(xr, ops.matmul(p.U_r, h_prev)))
    candidate = ops.tanh(ops.add(xh, ops.matmul(p.U_h, ops.mul(r, h_prev))))
    return ops.add(ops.mul(ops.one_minus(z), h_prev), ops.mul(z, candidate))


def gru_step(x_t: Tensor, h_prev: Tensor, p: GruParams) -> Tensor:
    """Um passo da GRU: h_t = (1 - z) ⊙ h_{t-1} + z ⊙ h̃_t."""
    def project(W, b):
        return ops.add_bias(ops.matmul(W, x_t), b)

    return _gru_cell(project(p.W_z, p.b_z), project(p.W_r, p.b_r), project(p.W_h, p.b_h), h_prev, p)


def _run_direction(x: Tensor, p: GruParams, reverse: bool) -> Tensor:
    M = x.shape[0]
    # projeções de entrada de todos os passos de uma vez
    xz = ops.add_bias(ops.matmul(x, ops.transpose(p.W_z)), p.b_z)
    xr = ops.add_bias(ops.matmul(x, ops.transpose(p.W_r)), p.b_r)
    xh = ops.add_bias(ops.matmul(x, ops.transpose(p.W_h)), p.b_h)
    h = ops.constant(np.zeros(p.hidden))
    states = [None] * M
    for t in (range(M - 1, -1, -1) if reverse else range(M)):
        h = _gru_cell(ops.take_row(xz, t), ops.take_row(xr, t), ops.take_row(xh, t), h, p)
        states[t] = h
    return ops.stack_rows(states)


@dataclass
class BgwaParams:
    forward: GruParams
    backward: GruParams
    A: Parameter  # [g × g]
    r: Parameter  # [g]
    out_linear: Parameter  # [rl × 3g]
    out_bias: Parameter  # [rl]

    @classmethod
    def init(cls, d: int, h: int, rl: int, rng: Rng, scale: Optional[float] = None) -> "BgwaParams":
        g = 2 * h
        return cls(
            forward=GruParams.init(d, h, rng, scale),
            backward=GruParams.init(d, h, rng, scale),
            A=_uniform(rng, (g, g), g, g, scale, "A"),
            r=_uniform(rng, (g,), g, 1, scale, "r"),
            out_linear=_uniform(rng, (rl, 3 * g), 3 * g, rl, scale, "out_linear"),
            out_bias=_zeros((rl,), "out_bias"),
        )

    def parameters(self) -> Dict[str, Parameter]:
        params = {f"gru_f.{k}": v for k, v in self.forward.parameters().items()}
        params.update({f"gru_b.{k}": v for k, v in self.backward.parameters().items()})
        params.update({"A": self.A, "r": self.r, "out_linear": self.out_linear, "out_bias": self.out_bias})
        return params


def bigru_forward(x: Tensor, params: BgwaParams) -> Tensor:
    """Linha j = [h^f_j | h^b_j], largura g = 2h."""
    if x.data.ndim != 2 or x.shape[0] < 1:
        raise DimensionError("bigru_forward", x.shape)
    return ops.concat_cols([_run_direction(x, params.forward, False), _run_direction(x, params.backward, True)])


def _bilinear_attention(rows: Tensor, A: Tensor, r: Tensor, op: str) -> Tensor:
    width = rows.shape[1]
    if A.shape != (width, width) or r.shape != (width,):
        raise DimensionError(op, rows.shape, A.shape, r.shape)
    # u_j = rows_j^T A r
    return ops.softmax(ops.matmul(rows, ops.matmul(A, r)))


def word_attention(w: Tensor, A: Tensor, r: Tensor) -> Tensor:
    return _bilinear_attention(w, A, r, "word_attention")


def bgwa_forward(
    x: Tensor, p1: int, p2: int, params: BgwaParams, mode: str = EVAL, rate: float = 0.5, rng: Optional[Rng] = None
) -> ModelOutput:
    w = bigru_forward(x, params)
    a = word_attention(w, params.A, params.r)
    pooled, _ = ops.piecewise_max_pool(ops.scale_rows(w, a), p1, p2)
    feats = ops.dropout(ops.tanh(pooled), rate, mode == TRAIN, rng)
    logits, probs = _classify(feats, params.out_linear, params.out_bias)
    return ModelOutput(probs=probs, logits=logits, attention={"word": a.data.copy()})


# ---------- EA ----------
@dataclass
class EaParams:
    pcnn: PcnnParams  # ramo PCNN; out_linear dele cobre as colunas PCNN da camada final e out_bias é o bias final
    A1: Parameter  # [(d+d_w) × (d+d_w)]
    r1: Parameter  # [d+d_w]
    A2: Parameter
    r2: Parameter
    out_entity1: Parameter  # [rl × 3d]
    out_entity2: Parameter  # [rl × 3d]

    @classmethod
    def init(
        cls, d: int, d_w: int, c: int, window: int, rl: int, rng: Rng, scale: Optional[float] = None
    ) -> "EaParams":
        k = d + d_w
        return cls(
            pcnn=PcnnParams.init(d, c, window, rl, rng, scale),
            A1=_uniform(rng, (k, k), k, k, scale, "A1"),
            r1=_uniform(rng, (k,), k, 1, scale, "r1"),
            A2=_uniform(rng, (k, k), k, k, scale, "A2"),
            r2=_uniform(rng, (k,), k, 1, scale, "r2"),
            out_entity1=_uniform(rng, (rl, 3 * d), 3 * d, rl, scale, "out_entity1"),
            out_entity2=_uniform(rng, (rl, 3 * d), 3 * d, rl, scale, "out_entity2"),
        )

    @property
    def out_bias(self) -> Parameter:
        return self.pcnn.out_bias

    def parameters(self) -> Dict[str, Parameter]:
        params = {f"pcnn.{k}": v for k, v in self.pcnn.parameters().items()}
        params.update({
            "A1": self.A1, "r1": self.r1, "A2": self.A2, "r2": self.r2,
            "out_entity1": self.out_entity1, "out_entity2": self.out_entity2,
        })
        return params


def entity_attention(x: Tensor, e_emb: Tensor, A_k: Tensor, r_k: Tensor) -> Tensor:
    """u_j = [x_j, e]^T A_k r_k; a = softmax(u)."""
    if x.data.ndim != 2 or e_emb.data.ndim != 1:
        raise DimensionError("entity_attention", x.shape, e_emb.shape)
    rows = ops.concat_cols([x, ops.tile_rows(e_emb, x.shape[0])])
    return _bilinear_attention(rows, A_k, r_k, "entity_attention")


def ea_forward(
    x: Tensor,
    p1: int,
    p2: int,
    e1_emb: Tensor,
    e2_emb: Tensor,
    params: EaParams,
    mode: str = EVAL,
    rate: float = 0.5,
    rng: Optional[Rng] = None,
) -> ModelOutput:
    train = mode == TRAIN
    pc = ops.dropout(pcnn_features(x, p1, p2, params.pcnn), rate, train, rng)
    attention = {}
    branches = []
    for name, e_emb, A_k, r_k, out in (
        ("entity1", e1_emb, params.A1, params.r1, params.out_entity1),
        ("entity2", e2_emb, params.A2, params.r2, params.out_entity2),
    ):
        a = entity_attention(x, e_emb, A_k, r_k)
        pooled, _ = ops.piecewise_max_pool(ops.scale_rows(x, a), p1, p2)
        branches.append(ops.matmul(out, ops.dropout(pooled, rate, train, rng)))
        attention[name] = a.data.copy()
    # soma por bloco de colunas: com os blocos de entidade zerados, os logits são os da PCNN
    logits = ops.matmul(params.pcnn.out_linear, pc)
    for contribution in branches:
        logits = ops.add(logits, contribution)
    logits = ops.add_bias(logits, params.pcnn.out_bias)
    return ModelOutput(probs=ops.softmax(logits), logits=logits, attention=attention)
