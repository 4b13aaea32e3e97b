import logging

import numpy as np
import pytest
from pydantic import ValidationError

from dsre.config import TrainConfig
from dsre.core import Rng
from dsre.ensemble import ROLES, collect_probs, ensemble_predict, ensemble_scorer, fit_weights, read_weights, write_weights
from dsre.errors import ConfigError, DimensionError, InsufficientDataError
from dsre.evaluation import gold_facts, pr_curve, score_corpus
from dsre.inference import bag_scorer, predict_bag
from dsre.model import build_model
from dsre.schemas import EnsembleWeights
from dsre.synthetic import trigger_corpus
from dsre.training import fit


def random_probs(seed, shape=(20, 4)):
    rng = Rng(seed)
    return [rng.uniform(0, 1, shape) for _ in range(3)]


@pytest.fixture
def role_models(tiny_model):
    models = {}
    for seed, kind in enumerate(("pcnn", "ea", "bgwa")):
        models[kind], bags = tiny_model(kind, seed=seed)
    return models, bags


# ---------- ajuste dos pesos ----------
def test_exact_fit_recovers_single_model():
    p1, p2, p3 = random_probs(1)
    w = fit_weights(p1, p2, p3, p1)
    assert (w.alpha, w.beta, w.gamma) == pytest.approx((1.0, 0.0, 0.0), abs=1e-9)


def test_exact_mixture_is_recovered():
    p1, p2, p3 = random_probs(2)
    y = 0.5 * p1 + 0.3 * p2 + 0.2 * p3
    w = fit_weights(p1, p2, p3, y)
    assert (w.alpha, w.beta, w.gamma) == pytest.approx((0.5, 0.3, 0.2), abs=1e-6)


def test_identical_models_get_equal_weights():
    p, _, _ = random_probs(3)
    y = (Rng(4).uniform(0, 1, p.shape) > 0.7).astype(float)
    w = fit_weights(p, p, p, y)
    assert w.alpha == pytest.approx(w.beta, abs=1e-9)
    assert w.beta == pytest.approx(w.gamma, abs=1e-9)


def test_residual_is_not_worse_than_any_single_model():
    p1, p2, p3 = random_probs(5)
    y = (Rng(6).uniform(0, 1, p1.shape) > 0.5).astype(float)
    w = fit_weights(p1, p2, p3, y)
    fitted = np.sum((ensemble_predict((p1, p2, p3), w) - y) ** 2)
    for p in (p1, p2, p3):
        best_scale = np.sum(p * y) / np.sum(p * p)
        assert fitted <= np.sum((best_scale * p - y) ** 2) + 1e-9


def test_too_few_observations():
    p = np.zeros((1, 2))
    with pytest.raises(InsufficientDataError):
        fit_weights(p, p, p, p)


def test_shape_mismatch():
    p1, p2, p3 = random_probs(7)
    with pytest.raises(DimensionError):
        fit_weights(p1, p2, p3[:5], p1)


def test_scaling_inputs_scales_weights_inversely():
    p1, p2, p3 = random_probs(8)
    y = (Rng(9).uniform(0, 1, p1.shape) > 0.6).astype(float)
    w = fit_weights(p1, p2, p3, y)
    w2 = fit_weights(2 * p1, 2 * p2, 2 * p3, y)
    assert (w2.alpha, w2.beta, w2.gamma) == pytest.approx((w.alpha / 2, w.beta / 2, w.gamma / 2), abs=1e-9)
    a = ensemble_predict((p1, p2, p3), w)
    b = ensemble_predict((2 * p1, 2 * p2, 2 * p3), w2)
    assert np.allclose(a, b, atol=1e-9)


# ---------- combinação ----------
def test_unit_weight_returns_that_model():
    p1, p2, p3 = random_probs(10)
    out = ensemble_predict((p1, p2, p3), EnsembleWeights(alpha=1.0, beta=0.0, gamma=0.0))
    assert np.array_equal(out, p1)


def test_equal_weights_on_identical_models():
    p, _, _ = random_probs(11)
    third = 1 / 3
    out = ensemble_predict((p, p, p), EnsembleWeights(alpha=third, beta=third, gamma=third))
    assert np.allclose(out, p, atol=1e-12)


def test_combination_matches_loop():
    p1, p2, p3 = random_probs(12, shape=(3, 3))
    w = EnsembleWeights(alpha=0.7, beta=-0.2, gamma=0.4)
    out = ensemble_predict((p1, p2, p3), w)
    for i in range(3):
        for r in range(3):
            assert out[i, r] == pytest.approx(0.7 * p1[i, r] - 0.2 * p2[i, r] + 0.4 * p3[i, r], abs=1e-12)


def test_non_finite_weight_is_rejected():
    with pytest.raises(ValidationError):
        EnsembleWeights(alpha=float("nan"), beta=0.0, gamma=0.0)


# ---------- com modelos ----------
def test_collect_probs_rows_and_targets(role_models):
    models, bags = role_models
    p_pcnn, p_ea, p_bgwa, targets = collect_probs(models, bags[:6])
    assert p_pcnn.shape == p_ea.shape == p_bgwa.shape == targets.shape == (6, 4)
    for i, bag in enumerate(bags[:6]):
        assert np.array_equal(p_ea[i], predict_bag(bag, models["ea"]).probs.data)
        expected = np.zeros(4)
        expected[sorted(bag.labels)] = 1.0
        assert np.array_equal(targets[i], expected)


def test_collect_probs_needs_every_role(role_models):
    models, bags = role_models
    del models["bgwa"]
    with pytest.raises(ConfigError):
        collect_probs(models, bags)


def test_ensemble_scorer_uses_fitted_weights(role_models):
    models, bags = role_models
    weights = fit_weights(*collect_probs(models, bags))
    score = ensemble_scorer(models, weights)
    p = tuple(predict_bag(bags[0], models[r]).probs.data for r in ("pcnn", "ea", "bgwa"))
    assert np.array_equal(score(bags[0]), ensemble_predict(p, weights))


# ---------- arquivo de pesos ----------
def test_weights_file_keeps_values_and_hashes(tmp_path):
    path = tmp_path / "weights.txt"
    weights = EnsembleWeights(alpha=0.1 + 0.2, beta=-1e-17, gamma=2.5, checkpoints={"pcnn": "abc"})
    write_weights(str(path), weights)
    assert read_weights(str(path)) == weights


def test_weights_from_other_checkpoint_warn(tmp_path, caplog):
    path = tmp_path / "weights.txt"
    write_weights(str(path), EnsembleWeights(alpha=1.0, beta=0.0, gamma=0.0, checkpoints={"ea": "abc"}))
    with caplog.at_level(logging.WARNING, logger="dsre.ensemble"):
        read_weights(str(path), checkpoints={"ea": "def"})
    assert "ea" in caplog.text


def test_broken_weights_file(tmp_path):
    path = tmp_path / "weights.txt"
    path.write_text("alpha=1.0\nbeta=nan\ngamma=0\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_weights(str(path))


def test_weights_file_uses_the_config_file_format(tmp_path):
    path = tmp_path / "weights.txt"
    path.write_text("# ajustado no dev\nalpha=0.5\nbeta=\"0.25\"\ngamma = 0.25\n", encoding="utf-8")
    weights = read_weights(str(path))
    assert (weights.alpha, weights.beta, weights.gamma) == (0.5, 0.25, 0.25)


@pytest.mark.parametrize("content", ["alpha=1.0\nbeta=0.0\n", None])
def test_incomplete_or_missing_weights_file(tmp_path, content):
    path = tmp_path / "weights.txt"
    if content is not None:
        path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        read_weights(str(path))


def test_unit_weight_ensemble_has_the_pcnn_curve(role_models):
    models, bags = role_models
    gold = gold_facts(bags)
    alone = pr_curve(score_corpus(bag_scorer(models["pcnn"]), bags), gold)
    weights = EnsembleWeights(alpha=1.0, beta=0.0, gamma=0.0)
    combined = pr_curve(score_corpus(ensemble_scorer(models, weights), bags), gold)
    assert combined == alone


@pytest.mark.slow
def test_ensemble_is_not_worse_than_its_best_model(encode, synthetic_schema):
    train_records = trigger_corpus(600, Rng(41), id_prefix="t")
    dev_records = trigger_corpus(100, Rng(42), id_prefix="d")
    test_records = trigger_corpus(300, Rng(43), id_prefix="x")
    base = TrainConfig(c=64, h=16, max_epochs=15, patience=5)
    train, vocab = encode(train_records, base, synthetic_schema)
    dev, _ = encode(dev_records, base, synthetic_schema, vocab)
    test, _ = encode(test_records, base, synthetic_schema, vocab)
    models, test_aucs = {}, {}
    for seed, kind in enumerate(ROLES):
        cfg = base.model_copy(update={"model": kind, "seed": seed})
        models[kind] = build_model(cfg, synthetic_schema, vocab, Rng(seed))
        _, state = fit(train, dev, models[kind], cfg, Rng(100 + seed))
        assert state.best_dev_auc >= 0.90, kind
        test_aucs[kind] = pr_curve(score_corpus(bag_scorer(models[kind]), test), gold_facts(test)).auc

    weights = fit_weights(*collect_probs(models, dev))
    combined = pr_curve(score_corpus(ensemble_scorer(models, weights), test), gold_facts(test)).auc
    assert combined >= max(test_aucs.values()) - 0.01
