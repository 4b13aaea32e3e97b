import numpy as np
import pytest

from dsre.checkpoint import load_checkpoint, read_meta, restore, save_checkpoint, snapshot
from dsre.core import Rng
from dsre.corpus import NA, PAD, RelationSchema
from dsre.errors import CheckpointMismatchError
from dsre.fingerprint import file_sha256
from dsre.model import build_model
from dsre.training import train_epoch


@pytest.mark.parametrize("kind", ["pcnn", "bgwa", "ea"])
def test_parameter_names_and_pad_row(tiny_model, kind):
    model, _ = tiny_model(kind)
    names = list(model.parameters())
    assert names[:3] == ["word_emb", "pos1_emb", "pos2_emb"]
    assert all(n.startswith(f"{kind}.") for n in names[3:])
    assert np.all(model.tables.word.data[PAD] == 0.0)


def test_same_seed_same_initialization(tiny_model):
    a, _ = tiny_model("ea", seed=3)
    b, _ = tiny_model("ea", seed=3)
    assert all(np.array_equal(a.parameters()[k].data, p.data) for k, p in b.parameters().items())


def test_saves_are_byte_identical(tiny_model, tmp_path):
    model, _ = tiny_model("bgwa")
    save_checkpoint(model, str(tmp_path / "a.ckpt"))
    save_checkpoint(model, str(tmp_path / "b.ckpt"))
    assert file_sha256(str(tmp_path / "a.ckpt")) == file_sha256(str(tmp_path / "b.ckpt"))


@pytest.mark.parametrize("kind", ["pcnn", "bgwa", "ea"])
def test_loaded_model_predicts_the_same(tiny_model, tmp_path, kind):
    model, bags = tiny_model(kind)
    train_epoch(bags, model, model.cfg, Rng(1))
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(model, path)
    loaded = load_checkpoint(path, expect_config=model.cfg, expect_schema=model.schema,
                             expect_vocab_hash=model.vocab.hash())
    assert loaded.kind == kind and loaded.vocab.words == model.vocab.words
    for inst in bags[0].instances:
        assert np.array_equal(loaded.probs(inst), model.probs(inst))


def test_checkpoint_of_a_snapshot(tiny_model, tmp_path):
    model, bags = tiny_model()
    before = snapshot(model)
    train_epoch(bags, model, model.cfg, Rng(2))
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(model, path, values=before)
    loaded = load_checkpoint(path)
    assert all(np.array_equal(loaded.parameters()[k].data, v) for k, v in before.items())
    assert read_meta(path).params["word_emb"] == list(before["word_emb"].shape)


def test_restore_undoes_training(tiny_model):
    model, bags = tiny_model("bgwa")
    before = snapshot(model)
    train_epoch(bags, model, model.cfg, Rng(3))
    restore(model, before)
    assert all(np.array_equal(p.data, before[k]) for k, p in model.parameters().items())


def test_mismatched_architecture(tiny_model, tiny_config, tmp_path):
    model, _ = tiny_model()
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(model, path)
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path, expect_config=tiny_config(c=7))


def test_mismatched_schema_and_vocabulary(tiny_model, tmp_path):
    model, _ = tiny_model("ea")
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(model, path)
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path, expect_schema=RelationSchema([NA, "born_in"]))
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path, expect_vocab_hash="0" * 64)


def test_training_hyperparameters_do_not_block_loading(tiny_model, tiny_config, tmp_path):
    model, _ = tiny_model()
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(model, path)
    loaded = load_checkpoint(path, expect_config=tiny_config(lr=0.5, max_epochs=1))
    assert loaded.cfg == model.cfg


def test_loading_into_other_kind_fails(tiny_model, tiny_config, tmp_path):
    model, _ = tiny_model("pcnn")
    path = str(tmp_path / "model.ckpt")
    save_checkpoint(model, path)
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path, expect_config=tiny_config(model="bgwa"))
    other = build_model(tiny_config(model="bgwa"), model.schema, model.vocab, Rng(0))
    assert set(other.parameters()) != set(model.parameters())
