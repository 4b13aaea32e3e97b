"""
Modelo de dados do corpus: esquema de relações, vocabulário, instâncias codificadas e bags.
Formatos em disco: bags em JSON Lines, TSV de sentenças (conversor) e embeddings em texto.
"""
import csv
import hashlib
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from dsre.core import ops
from dsre.core.tensor import InitSpec, Parameter, Tensor
from dsre.errors import (
    BagParseError,
    BagValidationError,
    EmbeddingFormatError,
    EmbeddingLookupError,
    EmptySentenceError,
    PositionIndexError,
)
from dsre.schemas import BagRecord, EntityRecord, SentenceRecord

logger = logging.getLogger(__name__)

NA = "NA"
PAD, UNK = 0, 1
PAD_TOKEN, UNK_TOKEN = "<pad>", "<unk>"
Span = Tuple[int, int]


# ---------- Esquema de relações ----------
class RelationSchema:
    def __init__(self, names: Sequence[str]):
        names = tuple(names)
        if not names or names[0] != NA:
            raise BagValidationError(None, f"o esquema precisa de '{NA}' no índice 0: {list(names)[:3]}")
        if len(set(names)) != len(names):
            raise BagValidationError(None, f"relações repetidas no esquema: {list(names)}")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, RelationSchema) and self.names == other.names

    def __repr__(self) -> str:
        return f"RelationSchema({list(self.names)})"

    def id_of(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @classmethod
    def infer(cls, relation_names: Iterable[str]) -> "RelationSchema":
        """NA primeiro, depois as relações na ordem em que aparecem."""
        names = [NA]
        for name in relation_names:
            if name not in names:
                names.append(name)
        return cls(names)


# ---------- Vocabulário ----------
class Vocabulary:
    def __init__(self, words: Optional[Sequence[str]] = None, embedding_dim: int = 50):
        self.embedding_dim = embedding_dim
        self._words: List[str] = [PAD_TOKEN, UNK_TOKEN]
        self._ids: Dict[str, int] = {PAD_TOKEN: PAD, UNK_TOKEN: UNK}
        self.frozen = False
        for w in words or ():
            self.add(w)

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    @property
    def words(self) -> List[str]:
        return list(self._words)

    def add(self, word: str) -> int:
        if word in self._ids:
            return self._ids[word]
        if self.frozen:
            return UNK
        self._ids[word] = len(self._words)
        self._words.append(word)
        return self._ids[word]

    def id(self, word: str) -> int:
        return self._ids.get(word, UNK)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.id(t) if self.frozen else self.add(t) for t in tokens]

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self

    def hash(self) -> str:
        return hashlib.sha256("\n".join(self._words).encode("utf-8")).hexdigest()


# ---------- Instâncias e bags ----------
@dataclass(frozen=True, eq=False)
class EncodedInstance:
    word_ids: np.ndarray
    pos1: np.ndarray  # deslocamentos com sinal, já recortados em ±max_position
    pos2: np.ndarray
    e1_idx: int
    e2_idx: int
    e1_span: Span
    e2_span: Span
    raw_tokens: Tuple[str, ...]

    def __len__(self) -> int:
        return len(self.word_ids)

    @property
    def pool_bounds(self) -> Tuple[int, int]:
        # a ordem semântica das entidades não importa para os limites do pooling
        return min(self.e1_idx, self.e2_idx), max(self.e1_idx, self.e2_idx)


@dataclass(frozen=True, eq=False)
class InstanceBag:
    bag_id: str
    e1: EntityRecord
    e2: EntityRecord
    labels: frozenset
    instances: Tuple[EncodedInstance, ...]

    @property
    def pair(self) -> Tuple[str, str]:
        return self.e1.id, self.e2.id

    @property
    def unordered_pair(self) -> Tuple[str, str]:
        return tuple(sorted((self.e1.id, self.e2.id)))


def tokenize(sentence: str) -> List[str]:
    """Minúsculas e split por espaço; pontuação fica como veio (texto já tokenizado)."""
    tokens = sentence.lower().split()
    if not tokens:
        raise EmptySentenceError("sentença vazia")
    return tokens


def entity_head(span: Span) -> int:
    """Entidades com vários tokens usam o último token como âncora."""
    return span[1] - 1


def position_features(m: int, e1_idx: int, e2_idx: int, max_position: int) -> Tuple[np.ndarray, np.ndarray]:
    if not (0 <= e1_idx < m and 0 <= e2_idx < m):
        raise PositionIndexError(f"índices de entidade ({e1_idx}, {e2_idx}) fora de [0, {m})")
    j = np.arange(m)
    pos1 = np.clip(j - e1_idx, -max_position, max_position)
    pos2 = np.clip(j - e2_idx, -max_position, max_position)
    return pos1, pos2


def _map_span(span: Span, kept: List[int]) -> Span:
    inside = [k for k, old in enumerate(kept) if span[0] <= old < span[1]]
    return (inside[0], inside[-1] + 1)


def truncate_tokens(tokens: Sequence[str], e1_span: Span, e2_span: Span, max_length: int):
    """
    Limita a sentença a max_length tokens sem perder entidade.
    Corta à direita; se as entidades estão além do limite, desliza a janela até elas.
    Se o trecho entre as entidades não cabe, mantém o entorno de cada uma e descarta o meio.
    """
    n = len(tokens)
    if n <= max_length:
        return list(tokens), e1_span, e2_span
    lo = min(e1_span[0], e2_span[0])
    hi = max(e1_span[1], e2_span[1])
    if hi - lo <= max_length:
        start = 0 if hi <= max_length else hi - max_length
        kept = list(range(start, start + max_length))
    else:
        left = max_length // 2
        kept = list(range(lo, lo + left)) + list(range(hi - (max_length - left), hi))
        for head in (entity_head(e1_span), entity_head(e2_span)):
            if head not in kept:
                kept[-1 if head >= hi - (max_length - left) else left - 1] = head
        kept = sorted(set(kept))
    return [tokens[k] for k in kept], _map_span(e1_span, kept), _map_span(e2_span, kept)


def _check_span(bag_id: str, span: Span, n: int, which: str) -> None:
    if not (0 <= span[0] < span[1] <= n):
        raise BagValidationError(bag_id, f"{which}_span {list(span)} fora dos {n} tokens")


def encode_sentence(
    sentence: SentenceRecord,
    vocab: Vocabulary,
    max_position: int = 30,
    max_length: int = 120,
    bag_id: Optional[str] = None,
) -> EncodedInstance:
    n = len(sentence.tokens)
    if n == 0:
        raise BagValidationError(bag_id, "sentença sem tokens")
    _check_span(bag_id, sentence.e1_span, n, "e1")
    _check_span(bag_id, sentence.e2_span, n, "e2")
    tokens, s1, s2 = truncate_tokens(sentence.tokens, tuple(sentence.e1_span), tuple(sentence.e2_span), max_length)
    e1_idx, e2_idx = entity_head(s1), entity_head(s2)
    pos1, pos2 = position_features(len(tokens), e1_idx, e2_idx, max_position)
    word_ids = np.asarray(vocab.encode([t.lower() for t in tokens]), dtype=np.int64)
    for arr in (word_ids, pos1, pos2):
        arr.setflags(write=False)
    return EncodedInstance(word_ids, pos1, pos2, e1_idx, e2_idx, s1, s2, tuple(tokens))


def encode_bag(
    record: BagRecord,
    vocab: Vocabulary,
    schema: RelationSchema,
    max_position: int = 30,
    max_length: int = 120,
) -> InstanceBag:
    if not record.sentences:
        raise BagValidationError(record.bag_id, "bag sem sentenças")
    if not record.relations:
        raise BagValidationError(record.bag_id, f"bag sem relações (use '{NA}')")
    unknown = [r for r in record.relations if r not in schema]
    if unknown:
        raise BagValidationError(record.bag_id, f"relações fora do esquema: {unknown}")
    instances = tuple(
        encode_sentence(s, vocab, max_position, max_length, bag_id=record.bag_id) for s in record.sentences
    )
    labels = frozenset(schema.id_of(r) for r in record.relations)
    return InstanceBag(record.bag_id, record.e1, record.e2, labels, instances)


def bag_to_record(bag: InstanceBag, schema: RelationSchema) -> BagRecord:
    return BagRecord(
        bag_id=bag.bag_id,
        e1=bag.e1,
        e2=bag.e2,
        relations=[schema.names[r] for r in sorted(bag.labels)],
        sentences=[
            SentenceRecord(tokens=list(i.raw_tokens), e1_span=i.e1_span, e2_span=i.e2_span)
            for i in bag.instances
        ],
    )


# ---------- Leitura e escrita ----------
def read_bag_records(path: str) -> List[BagRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(BagRecord.model_validate_json(line))
            except ValidationError as e:
                raise BagParseError(line_no, str(e).splitlines()[0]) from e
    return records


def write_bag_records(path: str, records: Iterable[BagRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.model_dump_json() + "\n")
            count += 1
    return count


def load_bags(
    path: str,
    vocab: Vocabulary,
    schema: Optional[RelationSchema] = None,
    max_position: int = 30,
    max_length: int = 120,
) -> Tuple[List[InstanceBag], RelationSchema]:
    """
    Lê e valida um arquivo de bags (ordem do arquivo).
    Sem esquema, ele é inferido do próprio arquivo; vocabulário congelado mapeia palavras novas para UNK.
    """
    records = read_bag_records(path)
    if schema is None:
        schema = RelationSchema.infer(r for rec in records for r in rec.relations)
    bags = [encode_bag(rec, vocab, schema, max_position, max_length) for rec in records]
    seen = set()
    for bag in bags:
        if bag.bag_id in seen:
            logger.warning("%s: bag_id repetido '%s'", path, bag.bag_id)
        seen.add(bag.bag_id)
    logger.info("%s: %d bags, %d sentenças", path, len(bags), sum(len(b.instances) for b in bags))
    return bags, schema


def save_bags(path: str, bags: Iterable[InstanceBag], schema: RelationSchema) -> int:
    return write_bag_records(path, (bag_to_record(b, schema) for b in bags))


def _find_tokens(tokens: List[str], needle: List[str]) -> Optional[Span]:
    k = len(needle)
    for i in range(len(tokens) - k + 1):
        if tokens[i:i + k] == needle:
            return (i, i + k)
    return None


def convert_sentence_tsv(path: str) -> List[BagRecord]:
    """
    Converte TSV de sentenças (e1_id, e2_id, e1_surface, e2_surface, relação, sentença)
    em bags agrupadas por (e1_id, e2_id), unindo os rótulos.
    """
    groups: Dict[Tuple[str, str], dict] = {}
    skipped = 0
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), start=1):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 6:
                raise BagParseError(line_no, f"esperadas 6 colunas, vieram {len(row)}")
            e1_id, e2_id, e1_surface, e2_surface, relation, sentence = (c.strip() for c in row)
            try:
                tokens = tokenize(sentence)
                s1 = _find_tokens(tokens, tokenize(e1_surface))
                s2 = _find_tokens(tokens, tokenize(e2_surface))
            except EmptySentenceError:
                s1 = s2 = None
            if s1 is None or s2 is None:
                skipped += 1
                logger.debug("%s:%d: entidade não encontrada na sentença", path, line_no)
                continue
            group = groups.setdefault((e1_id, e2_id), {
                "e1": EntityRecord(id=e1_id, surface=e1_surface),
                "e2": EntityRecord(id=e2_id, surface=e2_surface),
                "relations": [],
                "sentences": [],
            })
            if relation not in group["relations"]:
                group["relations"].append(relation)
            group["sentences"].append(SentenceRecord(tokens=tokens, e1_span=s1, e2_span=s2))

    records = []
    for (e1_id, e2_id), group in groups.items():
        relations = group["relations"]
        if len(relations) > 1 and NA in relations:
            relations = [r for r in relations if r != NA]
        records.append(BagRecord(bag_id=f"{e1_id}#{e2_id}", e1=group["e1"], e2=group["e2"],
                                 relations=relations, sentences=group["sentences"]))
    if skipped:
        logger.warning("%s: %d linhas ignoradas (entidade ausente da sentença)", path, skipped)
    return records


# ---------- Embeddings ----------
@dataclass
class EmbeddingTables:
    word: Parameter  # [V × d_w], linha PAD sempre zero
    pos1: Parameter  # [2·max_position+1 × d_p]
    pos2: Parameter
    max_position: int

    def parameters(self) -> Dict[str, Parameter]:
        return {"word_emb": self.word, "pos1_emb": self.pos1, "pos2_emb": self.pos2}


def embed_instance(inst: EncodedInstance, tables: EmbeddingTables) -> Tensor:
    """Linha j = [word_emb[w_j] | pos1_emb[p1_j] | pos2_emb[p2_j]], largura d_w + 2·d_p."""
    shift = tables.max_position
    if np.abs(inst.pos1).max() > shift or np.abs(inst.pos2).max() > shift:
        raise EmbeddingLookupError(f"posição além de ±{shift}")
    return ops.concat_cols([
        ops.take_rows(tables.word, inst.word_ids, pad_index=PAD),
        ops.take_rows(tables.pos1, inst.pos1 + shift),
        ops.take_rows(tables.pos2, inst.pos2 + shift),
    ])


def entity_embedding(inst: EncodedInstance, tables: EmbeddingTables, which: int) -> Tensor:
    """Embedding de palavra da entidade: média dos tokens do span (d_w)."""
    lo, hi = inst.e1_span if which == 1 else inst.e2_span
    return ops.mean_rows(ops.take_rows(tables.word, inst.word_ids[lo:hi], pad_index=PAD))


def load_pretrained_embeddings(path: str, vocab: Vocabulary, table: Parameter) -> float:
    """
    Sobrescreve as linhas de `table` das palavras presentes no arquivo ("palavra v1 ... v_dw").
    Devolve a fração do vocabulário (sem PAD/UNK) coberta.
    """
    d_w = table.shape[1]
    covered = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            # cabeçalho do formato texto do word2vec: "<n_palavras> <dim>"
            if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            if len(parts) - 1 != d_w:
                raise EmbeddingFormatError(f"{path}:{line_no}: vetor com {len(parts) - 1} dimensões, esperado {d_w}")
            word = parts[0].lower()
            idx = vocab.id(word)
            if idx in (PAD, UNK) or word not in vocab or idx in covered:
                continue
            table.data[idx] = np.asarray(parts[1:], dtype=np.float64)
            covered.add(idx)
    real_words = len(vocab) - 2
    coverage = len(covered) / real_words if real_words > 0 else 0.0
    if covered:
        table.init_spec = InitSpec.pretrained(path)
    logger.info("%s: %d/%d palavras com vetor pré-treinado (%.1f%%)", path, len(covered), real_words, 100 * coverage)
    return coverage
