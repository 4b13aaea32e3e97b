"""
Construção de um dataset de supervisão distante a partir de fatos semente julgados por humanos.
Para cada semente: busca documentos locais com as duas entidades, extrai trechos (<= 500 tokens)
e monta a bag semente + trechos, o que garante ao menos uma sentença expressando a relação.
Depois divide em treino/dev/teste sem repetir par de entidades entre as partes.
"""
import io
import logging
import zipfile
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple, Type, TypeVar

from openpyxl import Workbook
from openpyxl.xml.constants import ARC_CORE
from openpyxl.xml.functions import tostring
from pydantic import BaseModel, ValidationError

from dsre.core.rng import Rng
from dsre.corpus import RelationSchema
from dsre.errors import BagParseError, BagValidationError, SplitError
from dsre.fingerprint import zip_entry
from dsre.gds_config import (
    DEFAULT_MAX_SNIPPETS,
    DEFAULT_RATIOS,
    DEFAULT_WINDOW,
    MAX_SNIPPET_TOKENS,
    SPLIT_NAMES,
    SPLIT_UNITS,
)
from dsre.schemas import BagRecord, DocRecord, EntityRecord, SeedFactRecord, SentenceRecord

logger = logging.getLogger(__name__)

XLSX_DATE = datetime(2000, 1, 1)

Span = Tuple[int, int]
PairKey = Tuple[str, str]


@dataclass(frozen=True)
class Cooccurrence:
    doc_id: str
    e1_span: Span
    e2_span: Span

    @property
    def offset(self) -> int:
        return min(self.e1_span[0], self.e2_span[0])


@dataclass(frozen=True)
class Snippet:
    tokens: Tuple[str, ...]
    doc_id: str
    e1_span: Span
    e2_span: Span


class SnippetSource(Protocol):
    """Interface de busca; o índice local é uma implementação (uma busca web seria outra)."""

    def cooccurrences(self, e1: EntityRecord, e2: EntityRecord) -> List[Cooccurrence]:
        ...

    def document(self, doc_id: str) -> Sequence[str]:
        ...


# ---------- Arquivos ----------
Record = TypeVar("Record", bound=BaseModel)


def read_jsonl(path: str, model: Type[Record]) -> List[Record]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(model.model_validate_json(line))
            except ValidationError as e:
                raise BagParseError(line_no, f"{path}: {str(e).splitlines()[0]}") from e
    return records


def write_jsonl(path: str, records: Iterable[BaseModel]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.model_dump_json() + "\n")
            count += 1
    return count


def read_seeds(path: str) -> List[SeedFactRecord]:
    return read_jsonl(path, SeedFactRecord)


def read_documents(path: str) -> List[DocRecord]:
    return read_jsonl(path, DocRecord)


# ---------- Índice invertido ----------
def _surface_tokens(entity: EntityRecord) -> Tuple[str, ...]:
    return tuple(entity.surface.lower().split())


class EntityPairIndex:
    def __init__(self, documents: Sequence[DocRecord], window: int = DEFAULT_WINDOW):
        self.window = window
        self._docs: Dict[str, List[str]] = {}
        self._postings: Dict[str, List[Tuple[str, int]]] = defaultdict(list)
        for doc in documents:
            tokens = [t.lower() for t in doc.tokens]
            self._docs[doc.doc_id] = tokens
            for pos, token in enumerate(tokens):
                self._postings[token].append((doc.doc_id, pos))
        self._hits: Dict[PairKey, List[Cooccurrence]] = {}
        self._mention_cache: Dict[Tuple[str, ...], Dict[str, List[Span]]] = {}

    def __len__(self) -> int:
        return len(self._hits)

    def __contains__(self, pair: PairKey) -> bool:
        return pair in self._hits

    def document(self, doc_id: str) -> List[str]:
        return self._docs[doc_id]

    def mentions(self, surface: Tuple[str, ...]) -> Dict[str, List[Span]]:
        """doc_id -> spans onde a forma de superfície aparece (match exato em minúsculas)."""
        if surface in self._mention_cache:
            return self._mention_cache[surface]
        found: Dict[str, List[Span]] = defaultdict(list)
        k = len(surface)
        for doc_id, pos in self._postings.get(surface[0], []) if surface else []:
            if tuple(self._docs[doc_id][pos:pos + k]) == surface:
                found[doc_id].append((pos, pos + k))
        self._mention_cache[surface] = dict(found)
        return self._mention_cache[surface]

    def add_pair(self, e1: EntityRecord, e2: EntityRecord) -> List[Cooccurrence]:
        key = (e1.id, e2.id)
        if key in self._hits:
            return self._hits[key]
        m1, m2 = self.mentions(_surface_tokens(e1)), self.mentions(_surface_tokens(e2))
        hits = []
        for doc_id in sorted(set(m1) & set(m2)):
            for s1 in m1[doc_id]:
                best = None
                for s2 in m2[doc_id]:
                    if s1[0] < s2[1] and s2[0] < s1[1]:
                        continue  # menções sobrepostas
                    extent = max(s1[1], s2[1]) - min(s1[0], s2[0])
                    if extent <= self.window and (best is None or extent < best[0]):
                        best = (extent, s2)
                if best is not None:
                    hits.append(Cooccurrence(doc_id, s1, best[1]))
        if hits:
            self._hits[key] = hits
        return hits

    def cooccurrences(self, e1: EntityRecord, e2: EntityRecord) -> List[Cooccurrence]:
        return list(self._hits.get((e1.id, e2.id), []))

    def pairs(self) -> List[PairKey]:
        return sorted(self._hits)


def index_corpus(
    documents: Sequence[DocRecord],
    pairs: Iterable[Tuple[EntityRecord, EntityRecord]],
    window: int = DEFAULT_WINDOW,
) -> EntityPairIndex:
    """(e1_id, e2_id) -> coocorrências das duas formas de superfície dentro de `window` tokens."""
    index = EntityPairIndex(documents, window)
    for e1, e2 in pairs:
        index.add_pair(e1, e2)
    logger.info("índice: %d documentos, %d pares com coocorrência", len(documents), len(index))
    return index


# ---------- Trechos ----------
def extract_snippet(tokens: Sequence[str], hit: Cooccurrence, max_tokens: int = MAX_SNIPPET_TOKENS) -> Optional[Snippet]:
    """Janela centrada entre as duas menções; empate puxa para o início do documento."""
    lo = min(hit.e1_span[0], hit.e2_span[0])
    hi = max(hit.e1_span[1], hit.e2_span[1])
    size = min(max_tokens, len(tokens))
    if hi - lo > size:
        return None
    start = lo - (size - (hi - lo)) // 2
    start = max(0, min(start, len(tokens) - size))

    def shift(span: Span) -> Span:
        return (span[0] - start, span[1] - start)

    return Snippet(tuple(tokens[start:start + size]), hit.doc_id, shift(hit.e1_span), shift(hit.e2_span))


def retrieve_snippets(
    source: SnippetSource, e1: EntityRecord, e2: EntityRecord, max_snippets: int = DEFAULT_MAX_SNIPPETS
) -> List[Snippet]:
    hits = sorted(source.cooccurrences(e1, e2), key=lambda h: (h.doc_id, h.offset))
    snippets = []
    for hit in hits:
        snippet = extract_snippet(source.document(hit.doc_id), hit)
        if snippet is not None:
            snippets.append(snippet)
        if len(snippets) >= max_snippets:
            break
    return snippets


# ---------- Bags ----------
def validate_seed(seed: SeedFactRecord, schema: Optional[RelationSchema] = None) -> None:
    n = len(seed.tokens)
    for which, span in (("e1", seed.e1_span), ("e2", seed.e2_span)):
        if not (0 <= span[0] < span[1] <= n):
            raise BagValidationError(f"{seed.e1.id}#{seed.e2.id}", f"semente com {which}_span {list(span)} fora dos {n} tokens")
    if schema is not None and seed.relation not in schema:
        raise BagValidationError(f"{seed.e1.id}#{seed.e2.id}", f"relação '{seed.relation}' fora do esquema")


def _seed_sentence(seed: SeedFactRecord) -> SentenceRecord:
    return SentenceRecord(tokens=list(seed.tokens), e1_span=seed.e1_span, e2_span=seed.e2_span)


def _snippet_sentence(snippet: Snippet) -> SentenceRecord:
    return SentenceRecord(tokens=list(snippet.tokens), e1_span=snippet.e1_span, e2_span=snippet.e2_span)


def build_bag(seed: SeedFactRecord, snippets: Sequence[Snippet]) -> BagRecord:
    """Semente na posição 0, depois os trechos; rótulo = relação da semente."""
    return BagRecord(
        bag_id=f"{seed.e1.id}#{seed.e2.id}",
        e1=seed.e1,
        e2=seed.e2,
        relations=[seed.relation],
        sentences=[_seed_sentence(seed)] + [_snippet_sentence(s) for s in snippets],
    )


def merge_seeds(seeds: Sequence[SeedFactRecord], snippets: Sequence[Snippet]) -> BagRecord:
    """Várias sementes do mesmo par viram uma bag só: sementes primeiro, rótulos unidos."""
    first = seeds[0]
    relations: List[str] = []
    for seed in seeds:
        if seed.relation not in relations:
            relations.append(seed.relation)
    return BagRecord(
        bag_id=f"{first.e1.id}#{first.e2.id}",
        e1=first.e1,
        e2=first.e2,
        relations=relations,
        sentences=[_seed_sentence(s) for s in seeds] + [_snippet_sentence(s) for s in snippets],
    )


# ---------- Divisão ----------
def _group_by_pair(bags: Sequence[BagRecord]) -> Dict[PairKey, List[int]]:
    groups: Dict[PairKey, List[int]] = defaultdict(list)
    for i, bag in enumerate(bags):
        groups[tuple(sorted((bag.e1.id, bag.e2.id)))].append(i)
    return groups


def split_dataset(
    bags: Sequence[BagRecord],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    rng: Optional[Rng] = None,
    unit: str = "sentences",
) -> Tuple[List[BagRecord], List[BagRecord], List[BagRecord]]:
    """
    Agrupa por par não ordenado, embaralha os grupos e atribui cada grupo inteiro à parte
    com maior déficit em relação à meta (em sentenças ou em pares).
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise SplitError(f"proporções devem ser 3 valores somando 1: {list(ratios)}")
    if unit not in SPLIT_UNITS:
        raise SplitError(f"unidade inválida: {unit}. Use: {list(SPLIT_UNITS)}")
    groups = _group_by_pair(bags)
    if len(groups) < 3:
        raise SplitError(f"são necessários pelo menos 3 pares de entidades, há {len(groups)}")
    rng = rng or Rng(0)
    keys = sorted(groups)
    keys = [keys[int(i)] for i in rng.permutation(len(keys))]

    def size(key: PairKey) -> int:
        return sum(len(bags[i].sentences) for i in groups[key]) if unit == "sentences" else 1

    total = sum(size(k) for k in keys)
    targets = [r * total for r in ratios]
    filled = [0.0, 0.0, 0.0]
    assigned: List[List[int]] = [[], [], []]
    for key in keys:
        deficits = [targets[s] - filled[s] for s in range(3)]
        part = deficits.index(max(deficits))
        filled[part] += size(key)
        assigned[part].extend(groups[key])
    splits = tuple([bags[i] for i in sorted(idx)] for idx in assigned)
    for name, part in zip(SPLIT_NAMES, splits):
        logger.info("%s: %d bags, %d sentenças", name, len(part), sum(len(b.sentences) for b in part))
    return splits


# ---------- Estatísticas ----------
def dataset_stats(bags: Iterable[BagRecord]) -> Dict[str, Tuple[int, int]]:
    """relação -> (nº de sentenças, nº de pares); linha 'total' no fim."""
    sentences: Dict[str, int] = defaultdict(int)
    pairs: Dict[str, set] = defaultdict(set)
    total_sentences = 0
    all_pairs = set()
    for bag in bags:
        pair = tuple(sorted((bag.e1.id, bag.e2.id)))
        total_sentences += len(bag.sentences)
        all_pairs.add(pair)
        for relation in bag.relations:
            sentences[relation] += len(bag.sentences)
            pairs[relation].add(pair)
    stats = {r: (sentences[r], len(pairs[r])) for r in sorted(sentences)}
    stats["total"] = (total_sentences, len(all_pairs))
    return stats


def format_stats(stats: Dict[str, Tuple[int, int]]) -> str:
    width = max([len(r) for r in stats] + [8])
    lines = [f"{'relation':<{width}}\tsentences\tentity_pairs"]
    for relation, (n_sent, n_pairs) in stats.items():
        lines.append(f"{relation:<{width}}\t{n_sent}\t{n_pairs}")
    return "\n".join(lines) + "\n"


def write_stats(path: str, sheets: Dict[str, Dict[str, Tuple[int, int]]]) -> None:
    """Um bloco "[nome]" por parte, na ordem recebida."""
    with open(path, "w", encoding="utf-8") as fh:
        for name, stats in sheets.items():
            fh.write(f"[{name}]\n")
            fh.write(format_stats(stats))
            fh.write("\n")


def write_stats_xlsx(path: str, sheets: Dict[str, Dict[str, Tuple[int, int]]]) -> None:
    """Uma aba por parte (train/dev/test ou o arquivo inteiro), mesmas colunas do stats.txt."""
    wb = Workbook()
    wb.remove(wb.active)
    for name, stats in sheets.items():
        ws = wb.create_sheet(title=name[:31])
        ws.append(["relation", "sentences", "entity_pairs"])
        for relation, (n_sent, n_pairs) in stats.items():
            ws.append([relation, n_sent, n_pairs])
    # o save do openpyxl carimba "modified" e as entradas do ZIP com a hora atual
    wb.properties.created = XLSX_DATE
    buf = io.BytesIO()
    wb.save(buf)
    wb.properties.modified = XLSX_DATE
    with zipfile.ZipFile(buf) as src, zipfile.ZipFile(path, "w") as dst:
        for name in src.namelist():
            data = tostring(wb.properties.to_tree()) if name == ARC_CORE else src.read(name)
            dst.writestr(zip_entry(name), data)


# ---------- Pipeline ----------
def build_gds(
    seeds: Sequence[SeedFactRecord],
    documents: Sequence[DocRecord],
    rng: Rng,
    schema: Optional[RelationSchema] = None,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    window: int = DEFAULT_WINDOW,
    max_snippets: int = DEFAULT_MAX_SNIPPETS,
    unit: str = "sentences",
    threads: int = 1,
) -> Dict[str, List[BagRecord]]:
    for seed in seeds:
        validate_seed(seed, schema)
    by_pair: Dict[PairKey, List[SeedFactRecord]] = {}
    for seed in seeds:
        by_pair.setdefault((seed.e1.id, seed.e2.id), []).append(seed)

    index = index_corpus(documents, [(g[0].e1, g[0].e2) for g in by_pair.values()], window)

    def bag_for(group: List[SeedFactRecord]) -> BagRecord:
        snippets = retrieve_snippets(index, group[0].e1, group[0].e2, max_snippets)
        return build_bag(group[0], snippets) if len(group) == 1 else merge_seeds(group, snippets)

    groups = list(by_pair.values())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            bags = list(pool.map(bag_for, groups))
    else:
        bags = [bag_for(g) for g in groups]
    train, dev, test = split_dataset(bags, ratios, rng, unit)
    return dict(zip(SPLIT_NAMES, (train, dev, test)))
