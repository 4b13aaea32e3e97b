"""
RelationModel: tabelas de embedding + parâmetros de um codificador (pcnn, bgwa ou ea).
"""
import logging
from typing import Dict, Iterable, Optional

import numpy as np

from dsre.config import TrainConfig
from dsre.core.rng import Rng
from dsre.core.tensor import InitSpec, Parameter, glorot_bound
from dsre.corpus import (
    PAD,
    EmbeddingTables,
    EncodedInstance,
    RelationSchema,
    Vocabulary,
    embed_instance,
    entity_embedding,
)
from dsre.encoders import (
    EVAL,
    BgwaParams,
    EaParams,
    ModelOutput,
    PcnnParams,
    bgwa_forward,
    ea_forward,
    pcnn_forward,
)

logger = logging.getLogger(__name__)


class RelationModel:
    def __init__(self, cfg: TrainConfig, schema: RelationSchema, vocab: Vocabulary, tables: EmbeddingTables, encoder):
        self.cfg = cfg
        self.kind = cfg.model
        self.schema = schema
        self.vocab = vocab
        self.tables = tables
        self.encoder = encoder

    @property
    def num_relations(self) -> int:
        return len(self.schema)

    @property
    def has_attention(self) -> bool:
        return self.kind in ("bgwa", "ea")

    def parameters(self) -> Dict[str, Parameter]:
        params = dict(self.tables.parameters())
        params.update({f"{self.kind}.{k}": v for k, v in self.encoder.parameters().items()})
        return params

    def forward(self, inst: EncodedInstance, mode: str = EVAL, rng: Optional[Rng] = None) -> ModelOutput:
        x = embed_instance(inst, self.tables)
        p1, p2 = inst.pool_bounds
        rate = self.cfg.dropout
        if self.kind == "pcnn":
            return pcnn_forward(x, p1, p2, self.encoder, mode, rate, rng)
        if self.kind == "bgwa":
            return bgwa_forward(x, p1, p2, self.encoder, mode, rate, rng)
        e1 = entity_embedding(inst, self.tables, 1)
        e2 = entity_embedding(inst, self.tables, 2)
        return ea_forward(x, p1, p2, e1, e2, self.encoder, mode, rate, rng)

    def probs(self, inst: EncodedInstance) -> np.ndarray:
        return self.forward(inst, EVAL).probs.data


def _embedding_table(rng: Rng, rows: int, dim: int, scale: Optional[float], name: str) -> Parameter:
    # cada linha é usada sozinha no lookup: fan_in 1
    b = scale if scale is not None else glorot_bound(1, dim)
    return Parameter(rng.uniform(-b, b, (rows, dim)), InitSpec.uniform(-b, b), name=name)


def build_model(cfg: TrainConfig, schema: RelationSchema, vocab: Vocabulary, rng: Rng) -> RelationModel:
    """Inicialização semeada: Glorot uniforme nas matrizes, zeros nos biases, linha PAD zerada."""
    scale = cfg.init_scale
    n_pos = 2 * cfg.max_position + 1
    word = _embedding_table(rng, len(vocab), cfg.d_w, scale, "word_emb")
    word.data[PAD] = 0.0
    tables = EmbeddingTables(
        word=word,
        pos1=_embedding_table(rng, n_pos, cfg.d_p, scale, "pos1_emb"),
        pos2=_embedding_table(rng, n_pos, cfg.d_p, scale, "pos2_emb"),
        max_position=cfg.max_position,
    )
    d, rl = cfg.input_dim, len(schema)
    if cfg.model == "pcnn":
        encoder = PcnnParams.init(d, cfg.c, cfg.w, rl, rng, scale)
    elif cfg.model == "bgwa":
        encoder = BgwaParams.init(d, cfg.h, rl, rng, scale)
    else:
        encoder = EaParams.init(d, cfg.d_w, cfg.c, cfg.w, rl, rng, scale)
    model = RelationModel(cfg, schema, vocab, tables, encoder)
    n_values = sum(p.data.size for p in model.parameters().values())
    logger.info("modelo %s: %d relações, vocabulário %d, %d parâmetros", cfg.model, rl, len(vocab), n_values)
    return model


def all_parameters(model: RelationModel) -> Iterable[Parameter]:
    return list(model.parameters().values())
