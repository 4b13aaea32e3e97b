import json

import numpy as np
import pytest

from dsre.core import Parameter, Rng, grad_check, ops
from dsre.corpus import (
    NA,
    PAD,
    UNK,
    EmbeddingTables,
    RelationSchema,
    Vocabulary,
    convert_sentence_tsv,
    embed_instance,
    encode_sentence,
    entity_embedding,
    entity_head,
    load_bags,
    load_pretrained_embeddings,
    position_features,
    read_bag_records,
    save_bags,
    tokenize,
    truncate_tokens,
    write_bag_records,
)
from dsre.errors import (
    BagParseError,
    BagValidationError,
    EmbeddingFormatError,
    EmptySentenceError,
    PositionIndexError,
)
from dsre.schemas import BagRecord, EntityRecord, SentenceRecord
from dsre.synthetic import trigger_corpus


def one_bag(e1_span=(0, 1), e2_span=(4, 5), sentences=2) -> BagRecord:
    tokens = ["Obama", "was", "born", "in", "Honolulu"]
    return BagRecord(
        bag_id="m.obama#m.honolulu",
        e1=EntityRecord(id="m.obama", surface="Obama"),
        e2=EntityRecord(id="m.honolulu", surface="Honolulu"),
        relations=["born_in"],
        sentences=[SentenceRecord(tokens=tokens, e1_span=e1_span, e2_span=e2_span)] * sentences,
    )


def tables(d_w=50, d_p=5, max_position=30, vocab_size=10, seed=0) -> EmbeddingTables:
    rng = Rng(seed)
    n_pos = 2 * max_position + 1
    word = Parameter(rng.uniform(-0.5, 0.5, (vocab_size, d_w)))
    word.data[PAD] = 0.0
    return EmbeddingTables(
        word=word,
        pos1=Parameter(rng.uniform(-0.5, 0.5, (n_pos, d_p))),
        pos2=Parameter(rng.uniform(-0.5, 0.5, (n_pos, d_p))),
        max_position=max_position,
    )


# ---------- tokenização e posições ----------
def test_tokenize_examples():
    assert tokenize("Obama was born in Honolulu") == ["obama", "was", "born", "in", "honolulu"]
    assert tokenize("a  b") == ["a", "b"]
    assert tokenize("U.S. state") == ["u.s.", "state"]


def test_tokenize_empty():
    with pytest.raises(EmptySentenceError):
        tokenize("   ")


def test_position_features_examples():
    pos1, pos2 = position_features(5, 0, 4, 30)
    assert pos1.tolist() == [0, 1, 2, 3, 4]
    assert pos2.tolist() == [-4, -3, -2, -1, 0]
    pos1, _ = position_features(100, 0, 0, 30)
    assert pos1[99] == 30
    pos1, pos2 = position_features(3, 2, 2, 30)
    assert pos1.tolist() == pos2.tolist() == [-2, -1, 0]


def test_position_features_rejects_out_of_range_index():
    with pytest.raises(PositionIndexError):
        position_features(3, 0, 3, 30)


def test_entity_head_is_last_token():
    assert entity_head((2, 5)) == 4
    assert entity_head((0, 1)) == 0


# ---------- truncamento ----------
def test_short_sentence_is_untouched():
    tokens = list("abcdef")
    assert truncate_tokens(tokens, (0, 1), (4, 5), 120) == (tokens, (0, 1), (4, 5))


def test_truncation_cuts_right_when_entities_fit():
    tokens = [f"t{i}" for i in range(200)]
    kept, s1, s2 = truncate_tokens(tokens, (3, 4), (10, 12), 120)
    assert len(kept) == 120 and kept[0] == "t0"
    assert (s1, s2) == ((3, 4), (10, 12))


def test_truncation_slides_to_entities():
    tokens = [f"t{i}" for i in range(200)]
    kept, s1, s2 = truncate_tokens(tokens, (150, 151), (160, 161), 120)
    assert len(kept) == 120
    assert kept[s1[0]] == "t150" and kept[s2[0]] == "t160"


def test_truncation_drops_the_middle_of_far_apart_entities():
    tokens = [f"t{i}" for i in range(200)]
    kept, s1, s2 = truncate_tokens(tokens, (0, 1), (199, 200), 120)
    assert len(kept) == 120
    assert kept[s1[0]] == "t0" and kept[s2[0]] == "t199"


def test_encoded_instance_invariants():
    for record in trigger_corpus(20, Rng(1)):
        for sentence in record.sentences:
            inst = encode_sentence(sentence, Vocabulary(), max_position=3)
            assert inst.pos1[inst.e1_idx] == 0 and inst.pos2[inst.e2_idx] == 0
            assert np.abs(inst.pos1).max() <= 3 and np.abs(inst.pos2).max() <= 3
            assert len(inst.word_ids) == len(inst.pos1) == len(inst.pos2) == len(inst.raw_tokens)


# ---------- vocabulário e esquema ----------
def test_vocabulary_ids_are_stable_and_frozen_maps_to_unk():
    a, b = Vocabulary(["x", "y", "z"]), Vocabulary(["x", "y", "z"])
    assert a.words == b.words and a.hash() == b.hash()
    assert a.id("x") == 2
    a.freeze()
    assert a.encode(["x", "novo"]) == [2, UNK]
    assert len(a) == 5


def test_schema_requires_na_first():
    with pytest.raises(BagValidationError):
        RelationSchema(["born_in", NA])
    assert RelationSchema.infer(["b", "a", "b"]).names == (NA, "b", "a")


# ---------- arquivos de bags ----------
def test_load_one_bag(tmp_path):
    path = tmp_path / "bags.jsonl"
    write_bag_records(str(path), [one_bag()])
    bags, schema = load_bags(str(path), Vocabulary())
    assert len(bags) == 1
    assert len(bags[0].instances) == 2
    assert schema.names == (NA, "born_in")
    assert bags[0].labels == frozenset({1})


def test_span_outside_sentence_names_the_bag(tmp_path):
    path = tmp_path / "bags.jsonl"
    write_bag_records(str(path), [one_bag(e2_span=(4, 9))])
    with pytest.raises(BagValidationError) as err:
        load_bags(str(path), Vocabulary())
    assert "m.obama#m.honolulu" in str(err.value)


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bags.jsonl"
    good = json.dumps(one_bag().model_dump(mode="json"))
    path.write_text(good + "\n" + '{"bag_id": "x"}\n', encoding="utf-8")
    with pytest.raises(BagParseError) as err:
        read_bag_records(str(path))
    assert err.value.line_no == 2


def test_save_then_load_is_identity(tmp_path):
    records = trigger_corpus(50, Rng(2))
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_bag_records(str(first), records)
    bags, schema = load_bags(str(first), Vocabulary())
    save_bags(str(second), bags, schema)
    assert read_bag_records(str(second)) == records
    again, schema_again = load_bags(str(second), Vocabulary())
    assert schema_again == schema
    for a, b in zip(bags, again):
        assert a.bag_id == b.bag_id and a.labels == b.labels
        assert all(np.array_equal(x.word_ids, y.word_ids) for x, y in zip(a.instances, b.instances))


def test_bag_lines_are_the_record_json(tmp_path):
    record = one_bag().model_copy(update={"e2": EntityRecord(id="m.sp", surface="São Paulo")})
    path = tmp_path / "bags.jsonl"
    write_bag_records(str(path), [record])
    line = path.read_text(encoding="utf-8").splitlines()[0]
    assert "São Paulo" in line
    assert json.loads(line) == record.model_dump(mode="json")
    assert read_bag_records(str(path)) == [record]


def test_convert_sentence_tsv_groups_and_drops_na(tmp_path):
    path = tmp_path / "sentences.tsv"
    path.write_text(
        "m.1\tm.2\tObama\tHonolulu\tborn_in\tObama was born in Honolulu\n"
        "m.1\tm.2\tObama\tHonolulu\tNA\tObama visited Honolulu\n"
        "m.3\tm.4\tAda\tLondon\tNA\tAda lived in London\n"
        "m.5\tm.6\tX\tY\tNA\tnothing here\n",
        encoding="utf-8",
    )
    records = convert_sentence_tsv(str(path))
    assert [r.bag_id for r in records] == ["m.1#m.2", "m.3#m.4"]
    assert records[0].relations == ["born_in"]
    assert len(records[0].sentences) == 2
    assert records[1].relations == [NA]
    assert records[0].sentences[0].e2_span == (4, 5)


# ---------- embeddings ----------
def test_embedding_rows_are_sixty_wide_with_defaults():
    inst = encode_sentence(one_bag().sentences[0], Vocabulary())
    assert embed_instance(inst, tables()).shape == (5, 60)


def test_pad_row_is_zero_and_gets_no_gradient():
    table = Parameter(np.ones((4, 3)))
    out = ops.take_rows(table, [PAD, 2], pad_index=PAD)
    assert out.data[0].tolist() == [0.0, 0.0, 0.0]
    ops.sum_all(out).backward()
    assert table.grad[PAD].tolist() == [0.0, 0.0, 0.0]
    assert table.grad[2].tolist() == [1.0, 1.0, 1.0]


def test_embedding_gradient_reaches_all_tables():
    t = tables(d_w=4, d_p=2, max_position=5, vocab_size=8)
    vocab = Vocabulary()
    inst = encode_sentence(one_bag().sentences[0], vocab)

    def loss():
        x = embed_instance(inst, t)
        return ops.sum_all(ops.mul(x, x))

    params = list(t.parameters().values())
    assert grad_check(loss, params, max_coords=None) < 1e-5
    loss().backward()
    assert all(np.any(p.grad != 0) for p in params)


def test_entity_embedding_averages_span_tokens():
    t = tables(d_w=4, d_p=2, vocab_size=8)
    sentence = SentenceRecord(tokens=["new", "york", "is", "big"], e1_span=(0, 2), e2_span=(3, 4))
    inst = encode_sentence(sentence, Vocabulary())
    e1 = entity_embedding(inst, t, 1).data
    assert np.allclose(e1, t.word.data[inst.word_ids[:2]].mean(axis=0))


def test_pretrained_coverage_and_copy(tmp_path):
    vocab = Vocabulary(["a", "b", "c", "d", "e"])
    table = Parameter(np.zeros((len(vocab), 2)))
    path = tmp_path / "vec.txt"
    path.write_text("3 2\na 0.5 -1.25\nc 1 2\nzzz 9 9\ne 3 4\n", encoding="utf-8")
    assert load_pretrained_embeddings(str(path), vocab, table) == pytest.approx(0.6)
    assert table.data[vocab.id("a")].tolist() == [0.5, -1.25]
    assert table.data[vocab.id("b")].tolist() == [0.0, 0.0]


def test_pretrained_empty_file(tmp_path):
    vocab = Vocabulary(["a", "b"])
    table = Parameter(np.ones((len(vocab), 2)))
    path = tmp_path / "empty.txt"
    path.write_text("", encoding="utf-8")
    assert load_pretrained_embeddings(str(path), vocab, table) == 0.0
    assert np.all(table.data == 1.0)


def test_pretrained_wrong_dimension(tmp_path):
    vocab = Vocabulary(["a"])
    table = Parameter(np.zeros((len(vocab), 3)))
    path = tmp_path / "bad.txt"
    path.write_text("a 1 2\n", encoding="utf-8")
    with pytest.raises(EmbeddingFormatError):
        load_pretrained_embeddings(str(path), vocab, table)
