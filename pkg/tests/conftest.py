import os

import hypothesis
import numpy as np
import pytest

from dsre.config import TrainConfig
from dsre.core.rng import Rng
from dsre.corpus import RelationSchema, Vocabulary, encode_bag
from dsre.model import build_model
from dsre.synthetic import relation_names, trigger_corpus

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ci"))

TINY = dict(d_w=4, d_p=2, c=3, w=3, h=2, max_position=10, dropout=0.0, batch_size=10, max_epochs=5, patience=3)


@pytest.fixture
def tiny_config():
    def make(**overrides) -> TrainConfig:
        return TrainConfig(**{**TINY, **overrides})

    return make


@pytest.fixture
def rng() -> Rng:
    return Rng(7)


@pytest.fixture
def synthetic_schema() -> RelationSchema:
    return RelationSchema(relation_names())


@pytest.fixture
def synthetic_records():
    return trigger_corpus(30, Rng(3))


@pytest.fixture
def encode():
    """records -> (bags, vocab) com o vocabulário congelado no fim."""
    def run(records, cfg: TrainConfig, schema: RelationSchema, vocab: Vocabulary = None):
        vocab = vocab or Vocabulary(embedding_dim=cfg.d_w)
        bags = [encode_bag(r, vocab, schema, cfg.max_position, cfg.max_length) for r in records]
        vocab.freeze()
        return bags, vocab

    return run


@pytest.fixture
def tiny_model(tiny_config, synthetic_records, synthetic_schema, encode):
    def make(kind: str = "pcnn", seed: int = 0, **overrides):
        cfg = tiny_config(model=kind, seed=seed, **overrides)
        bags, vocab = encode(synthetic_records, cfg, synthetic_schema)
        return build_model(cfg, synthetic_schema, vocab, Rng(seed)), bags

    return make
