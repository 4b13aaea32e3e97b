"""
Checkpoint em um único ZIP: meta.json + um .npy por parâmetro.
As entradas têm data fixa, então dois saves do mesmo modelo geram bytes idênticos.
"""
import io
import json
import logging
import zipfile
from typing import Dict, Optional

import numpy as np

from dsre.config import TrainConfig
from dsre.core.rng import Rng
from dsre.corpus import RelationSchema, Vocabulary
from dsre.errors import CheckpointMismatchError
from dsre.fingerprint import zip_entry
from dsre.model import RelationModel, build_model
from dsre.schemas import CheckpointMeta

logger = logging.getLogger(__name__)

Snapshot = Dict[str, np.ndarray]


def snapshot(model: RelationModel) -> Snapshot:
    return {name: p.data.copy() for name, p in model.parameters().items()}


def restore(model: RelationModel, snap: Snapshot) -> None:
    for name, p in model.parameters().items():
        p.data[...] = snap[name]


def save_checkpoint(model: RelationModel, path: str, values: Optional[Snapshot] = None) -> None:
    """Grava o modelo (ou `values`, um snapshot dele) em `path`."""
    values = values or snapshot(model)
    meta = CheckpointMeta(
        model=model.kind,
        config=model.cfg.model_dump(),
        relations=list(model.schema.names),
        vocab=model.vocab.words,
        vocab_hash=model.vocab.hash(),
        params={name: list(arr.shape) for name, arr in values.items()},
    )
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr(zip_entry("meta.json"), json.dumps(meta.model_dump(), sort_keys=True))
        for name, arr in values.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            zf.writestr(zip_entry(f"{name}.npy"), buf.getvalue())
    logger.info("checkpoint gravado em %s (%s, %d tensores)", path, model.kind, len(values))


def read_meta(path: str) -> CheckpointMeta:
    with zipfile.ZipFile(path, "r") as zf:
        return CheckpointMeta.model_validate_json(zf.read("meta.json"))


def load_checkpoint(
    path: str,
    expect_config: Optional[TrainConfig] = None,
    expect_schema: Optional[RelationSchema] = None,
    expect_vocab_hash: Optional[str] = None,
) -> RelationModel:
    meta = read_meta(path)
    cfg = TrainConfig.model_validate(meta.config)
    schema = RelationSchema(meta.relations)
    vocab = Vocabulary(meta.vocab[2:], embedding_dim=cfg.d_w).freeze()

    if expect_config is not None and expect_config.architecture() != cfg.architecture():
        raise CheckpointMismatchError(
            f"{path}: config do checkpoint {cfg.architecture()} difere da atual {expect_config.architecture()}"
        )
    if expect_schema is not None and expect_schema != schema:
        raise CheckpointMismatchError(f"{path}: esquema {list(schema.names)} difere de {list(expect_schema.names)}")
    if vocab.hash() != meta.vocab_hash or (expect_vocab_hash is not None and expect_vocab_hash != meta.vocab_hash):
        raise CheckpointMismatchError(f"{path}: hash do vocabulário não confere")

    model = build_model(cfg, schema, vocab, Rng(cfg.seed))
    params = model.parameters()
    if sorted(params) != sorted(meta.params):
        raise CheckpointMismatchError(f"{path}: parâmetros {sorted(meta.params)} não batem com o modelo {cfg.model}")
    with zipfile.ZipFile(path, "r") as zf:
        for name, p in params.items():
            arr = np.lib.format.read_array(io.BytesIO(zf.read(f"{name}.npy")), allow_pickle=False)
            if arr.shape != p.shape:
                raise CheckpointMismatchError(f"{path}: {name} tem shape {arr.shape}, esperado {p.shape}")
            p.data[...] = arr
    return model
