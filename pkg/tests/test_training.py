import csv
import math

import numpy as np
import pytest

from dsre.checkpoint import restore, snapshot
from dsre.config import TrainConfig
from dsre.core import Rng, Tensor, grad_check, ops
from dsre.core.optim import sgd_step
from dsre.core.tensor import zero_grads
from dsre.corpus import NA, InstanceBag, RelationSchema, Vocabulary, encode_bag
from dsre.encoders import EVAL, ModelOutput
from dsre.errors import ConfigError
from dsre.model import all_parameters, build_model
from dsre.schemas import BagRecord, EntityRecord
from dsre.synthetic import TRIGGERS, relation_names, trigger_corpus
from dsre.training import (
    dev_auc,
    expand_examples,
    fit,
    predict_bag,
    repartition,
    select_instance,
    train_epoch,
    train_example,
)


class FixedModel:
    """Probabilidades fixas por instância (as instâncias são só chaves)."""

    def __init__(self, table):
        self.table = table

    def forward(self, inst, mode=EVAL, rng=None):
        return ModelOutput(probs=Tensor(self.table[inst]))


def fixed_bag(*keys, labels=(1,)) -> InstanceBag:
    e1, e2 = EntityRecord(id="a", surface="a"), EntityRecord(id="b", surface="b")
    return InstanceBag("a#b", e1, e2, frozenset(labels), tuple(keys))


# ---------- seleção e predição ----------
def test_select_instance_argmax():
    model = FixedModel({"i0": [0.8, 0.2], "i1": [0.3, 0.7]})
    assert select_instance(fixed_bag("i0", "i1"), 1, model) == 1


def test_select_instance_single():
    assert select_instance(fixed_bag("i0"), 1, FixedModel({"i0": [0.9, 0.1]})) == 0


def test_select_instance_tie_takes_first():
    model = FixedModel({"i0": [0.5, 0.5], "i1": [0.5, 0.5]})
    assert select_instance(fixed_bag("i0", "i1"), 1, model) == 0


def test_predict_bag_is_per_relation_max():
    model = FixedModel({"i0": [0.9, 0.1], "i1": [0.2, 0.8]})
    assert predict_bag(fixed_bag("i0", "i1"), model).probs.data.tolist() == [0.9, 0.8]
    assert predict_bag(fixed_bag("i0"), model).probs.data.tolist() == [0.9, 0.1]


def test_predict_bag_matches_instance_enumeration(tiny_model):
    model, bags = tiny_model("bgwa")
    for bag in bags[:5]:
        expected = np.max([model.forward(inst, EVAL).probs.data for inst in bag.instances], axis=0)
        scores = predict_bag(bag, model).probs.data
        assert np.array_equal(scores, expected)
        assert np.all((scores >= 0) & (scores <= 1))


# ---------- perda e épocas ----------
def five_relation_model(tiny_config, **cfg):
    schema = RelationSchema([NA, "a", "b", "c", "d"])
    record = trigger_corpus(1, Rng(0), na_fraction=0.0, triggers={"a": ["x"]})[0]
    config = tiny_config(**cfg)
    vocab = Vocabulary(embedding_dim=config.d_w)
    bag = encode_bag(record, vocab, schema, config.max_position, config.max_length)
    return build_model(config, schema, vocab.freeze(), Rng(0)), bag


def test_uniform_output_loss_is_log_rl(tiny_config):
    model, bag = five_relation_model(tiny_config)
    model.encoder.out_linear.data[...] = 0.0
    loss = train_example(bag, 1, model, Rng(0))
    assert loss == pytest.approx(math.log(5), abs=1e-12)


def test_certain_output_loss_is_zero(tiny_config):
    model, bag = five_relation_model(tiny_config)
    model.encoder.out_linear.data[...] = 0.0
    model.encoder.out_bias.data[...] = [1000.0, 0.0, 0.0, 0.0, 0.0]
    assert train_example(bag, 0, model, Rng(0)) == 0.0


def test_training_loss_gradient(tiny_config):
    model, bag = five_relation_model(tiny_config, model="ea")
    inst = bag.instances[0]

    def loss():
        return ops.nll_loss(model.forward(inst, EVAL).logits, 1)

    assert grad_check(loss, model.parameters().values()) < 1e-4


def test_multi_label_bag_is_replicated():
    multi, single = fixed_bag("i0", labels=(1, 2)), fixed_bag("i1")
    examples = expand_examples([multi, single])
    assert [(b is multi, label) for b, label in examples] == [(True, 1), (True, 2), (False, 1)]


def test_empty_epoch_changes_nothing(tiny_model):
    model, _ = tiny_model()
    before = snapshot(model)
    assert train_epoch([], model, model.cfg, Rng(0)) == 0.0
    assert all(np.array_equal(before[k], v) for k, v in snapshot(model).items())


def test_same_seed_same_parameters(tiny_model):
    results = []
    for _ in range(2):
        model, bags = tiny_model("bgwa", dropout=0.5)
        train_epoch(bags, model, model.cfg, Rng(5))
        results.append(snapshot(model))
    assert all(np.array_equal(results[0][k], results[1][k]) for k in results[0])


def test_batch_takes_one_step_on_summed_gradients(tiny_model):
    model, bags = tiny_model("bgwa")
    batch = bags[:2]
    params = all_parameters(model)
    before = snapshot(model)
    zero_grads(params)
    for bag in batch:
        for label in sorted(bag.labels):
            train_example(bag, label, model, Rng(0))
    sgd_step(params, model.cfg.lr)
    expected = snapshot(model)
    restore(model, before)
    train_epoch(batch, model, model.cfg.model_copy(update={"batch_size": 50}), Rng(1))
    assert all(np.allclose(v, expected[k], atol=1e-12) for k, v in snapshot(model).items())


def test_loss_decreases_on_separable_bags(tiny_config, encode, synthetic_schema):
    cfg = tiny_config(d_w=8, c=8, batch_size=50, lr=0.01)
    records = trigger_corpus(50, Rng(21), max_sentences=1, na_fraction=0.2)
    bags, vocab = encode(records, cfg, synthetic_schema)
    model = build_model(cfg, synthetic_schema, vocab, Rng(1))
    rng = Rng(2)
    losses = [train_epoch(bags, model, cfg, rng) for _ in range(5)]
    assert all(b < a for a, b in zip(losses, losses[1:]))


# ---------- fit ----------
def scripted_scorer(values, seen):
    it = iter(values)

    def score(model):
        seen.append(snapshot(model))
        return next(it)

    return score


def test_fit_stops_after_patience(tiny_model, tiny_config, tmp_path):
    model, bags = tiny_model()
    cfg = tiny_config(patience=1, max_epochs=10)
    seen = []
    log = tmp_path / "epochs.csv"
    best, state = fit(bags, bags[:3], model, cfg, Rng(0), epoch_log=str(log),
                      dev_scorer=scripted_scorer([0.4, 0.5, 0.6, 0.55], seen))
    assert state.epoch == 3
    assert state.best_epoch == 2
    assert state.best_dev_auc == 0.6
    assert all(np.array_equal(best[k], seen[2][k]) for k in best)
    assert all(np.array_equal(p.data, best[k]) for k, p in model.parameters().items())
    rows = list(csv.reader(log.open(encoding="utf-8")))
    assert rows[0] == ["epoch", "mean_loss", "dev_auc"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3"]


def test_fit_without_epochs_returns_initialization(tiny_model, tiny_config):
    model, bags = tiny_model()
    init = snapshot(model)
    best, state = fit(bags, bags[:5], model, tiny_config(max_epochs=0), Rng(0))
    assert state.best_epoch == 0 and state.epoch == 0
    assert state.best_dev_auc == dev_auc(model, bags[:5])
    assert all(np.array_equal(best[k], init[k]) for k in init)


def test_fit_keeps_the_best_logged_auc(tiny_model, tiny_config):
    model, bags = tiny_model()
    _, state = fit(bags[:20], bags[20:], model, tiny_config(max_epochs=4, patience=4), Rng(0))
    assert state.best_dev_auc >= max(state.dev_aucs)
    assert len(state.losses) == state.epoch


def test_fit_rejects_empty_train(tiny_model):
    model, bags = tiny_model()
    with pytest.raises(ConfigError):
        fit([], bags, model)


@pytest.mark.slow
def test_training_improves_ranking_of_trained_facts(tiny_config, encode, synthetic_schema):
    cfg = tiny_config(d_w=8, c=8, batch_size=10, lr=0.02, max_epochs=30, patience=30)
    records = trigger_corpus(40, Rng(8), max_sentences=2, na_fraction=0.25)
    bags, vocab = encode(records, cfg, synthetic_schema)
    model = build_model(cfg, synthetic_schema, vocab, Rng(3))
    before = dev_auc(model, bags)
    fit(bags, bags, model, cfg, Rng(4))
    assert dev_auc(model, bags) > before


# ---------- repartição ----------
def pair_record(i, j, relation="born_in"):
    base = trigger_corpus(1, Rng(i * 31 + j), na_fraction=0.0)[0]
    return BagRecord(bag_id=f"e{i}#e{j}", e1=EntityRecord(id=f"e{i}", surface=base.e1.surface),
                     e2=EntityRecord(id=f"e{j}", surface=base.e2.surface),
                     relations=[relation], sentences=base.sentences)


def test_repartition_keeps_pairs_together():
    records = [pair_record(i, i + 100) for i in range(20)] + [pair_record(105, 5)]
    train, dev = repartition(records, 0.2, Rng(1))
    train_pairs = {tuple(sorted((r.e1.id, r.e2.id))) for r in train}
    dev_pairs = {tuple(sorted((r.e1.id, r.e2.id))) for r in dev}
    assert not train_pairs & dev_pairs
    assert len(dev_pairs) == 4
    assert len(train) + len(dev) == len(records)


def test_repartition_rejects_bad_fraction():
    with pytest.raises(ConfigError):
        repartition([], 1.0, Rng(0))


FOUR_TRIGGERS = {**TRIGGERS, "lives_in": ("resides", "lives", "resident")}


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["pcnn", "bgwa", "ea"])
def test_model_fits_the_training_bags_at_default_settings(kind, encode):
    # lr 0.1, batch 50 e dropout 0.5 são os padrões do TrainConfig
    cfg = TrainConfig(model=kind, c=64, h=16)
    schema = RelationSchema(relation_names(FOUR_TRIGGERS))
    records = trigger_corpus(50, Rng(11), triggers=FOUR_TRIGGERS, na_fraction=0.2)
    bags, vocab = encode(records, cfg, schema)
    model = build_model(cfg, schema, vocab, Rng(12))
    rng = Rng(13)

    def accuracy():
        hits = sum(int(np.argmax(predict_bag(b, model).probs.data)) in b.labels for b in bags)
        return hits / len(bags)

    for epoch in range(1, 201):
        train_epoch(bags, model, cfg, rng)
        if epoch % 5 == 0 and accuracy() >= 0.95:
            break
    assert accuracy() >= 0.95
