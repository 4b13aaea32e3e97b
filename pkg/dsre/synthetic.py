"""
Corpus sintético com frases-gatilho por relação.
Bags positivas têm ao menos uma sentença com o gatilho da relação entre as entidades;
as demais sentenças (e as bags NA) só têm palavras de enchimento.
Também gera sementes + documentos para o construtor GDS.
"""
from typing import Dict, List, Optional, Sequence, Tuple

from dsre.core.rng import Rng
from dsre.corpus import NA
from dsre.gds_config import GDS_RELATIONS
from dsre.schemas import BagRecord, DocRecord, EntityRecord, SeedFactRecord, SentenceRecord

TRIGGERS: Dict[str, Tuple[str, ...]] = {
    "founded_by": ("founded", "established", "started"),
    "born_in": ("born", "native", "birthplace"),
    "works_for": ("employed", "works", "hired"),
}

GDS_TRIGGERS: Dict[str, Tuple[str, ...]] = {
    "perGraduatedInstitution": ("graduated", "alumnus"),
    "perHasDegree": ("degree", "diploma"),
    "perPlaceOfBirth": ("born", "native"),
    "perPlaceOfDeath": ("died", "buried"),
}

FILLER = (
    "the", "a", "of", "and", "in", "on", "with", "for", "to", "at",
    "was", "is", "by", "from", "that", "this", "year", "city", "report", "team",
    "group", "public", "new", "local", "said", "after", "before", "during", "which", "about",
)


def _filler(rng: Rng, n: int) -> List[str]:
    return [FILLER[int(i)] for i in rng.integers(0, len(FILLER), size=n)] if n > 0 else []


def _sentence(rng: Rng, e1: EntityRecord, e2: EntityRecord, trigger: Optional[str]) -> SentenceRecord:
    """prefixo + e1 + meio (com gatilho opcional) + e2 + sufixo, com as spans corretas."""
    s1, s2 = e1.surface.split(), e2.surface.split()
    prefix = _filler(rng, int(rng.integers(0, 4)))
    middle = _filler(rng, int(rng.integers(1, 4)))
    if trigger is not None:
        middle.insert(int(rng.integers(0, len(middle) + 1)), trigger)
    suffix = _filler(rng, int(rng.integers(0, 4)))
    tokens = prefix + s1 + middle + s2 + suffix
    a = len(prefix)
    b = a + len(s1) + len(middle)
    return SentenceRecord(tokens=tokens, e1_span=(a, a + len(s1)), e2_span=(b, b + len(s2)))


def trigger_corpus(
    n_bags: int,
    rng: Rng,
    triggers: Dict[str, Sequence[str]] = TRIGGERS,
    max_sentences: int = 3,
    na_fraction: float = 0.3,
    id_prefix: str = "s",
) -> List[BagRecord]:
    """
    `n_bags` bags, cada uma com um par novo de entidades e 1..max_sentences sentenças.
    Uma fração `na_fraction` fica NA; as outras recebem uma relação sorteada.
    """
    relations = list(triggers)
    bags = []
    for k in range(n_bags):
        e1 = EntityRecord(id=f"{id_prefix}{k}a", surface=f"ent{id_prefix}{k}a")
        e2 = EntityRecord(id=f"{id_prefix}{k}b", surface=f"ent{id_prefix}{k}b")
        n_sent = int(rng.integers(1, max_sentences + 1))
        if float(rng.random((1,))[0]) < na_fraction:
            relation = NA
            sentences = [_sentence(rng, e1, e2, None) for _ in range(n_sent)]
        else:
            relation = relations[int(rng.integers(0, len(relations)))]
            words = triggers[relation]
            hit = int(rng.integers(0, n_sent))
            sentences = [
                _sentence(rng, e1, e2, words[int(rng.integers(0, len(words)))] if j == hit else None)
                for j in range(n_sent)
            ]
        bags.append(BagRecord(bag_id=f"{e1.id}#{e2.id}", e1=e1, e2=e2, relations=[relation], sentences=sentences))
    return bags


def relation_names(triggers: Dict[str, Sequence[str]] = TRIGGERS) -> List[str]:
    return [NA] + list(triggers)


def gds_inputs(
    n_pairs: int,
    rng: Rng,
    docs_per_pair: int = 2,
    unrelated_docs: int = 3,
    doc_length: int = 40,
) -> Tuple[List[SeedFactRecord], List[DocRecord]]:
    """Uma semente por par (relações do GDS) e documentos onde o par coocorre, mais documentos sem par."""
    relations = [r for r in GDS_RELATIONS if r != NA]
    seeds, docs = [], []
    for k in range(n_pairs):
        e1 = EntityRecord(id=f"p{k}", surface=f"person{k} smith")
        e2 = EntityRecord(id=f"o{k}", surface=f"place{k}")
        relation = relations[k % len(relations)]
        words = GDS_TRIGGERS[relation]
        sent = _sentence(rng, e1, e2, words[int(rng.integers(0, len(words)))])
        seeds.append(SeedFactRecord(tokens=sent.tokens, e1_span=sent.e1_span, e2_span=sent.e2_span,
                                    e1=e1, e2=e2, relation=relation))
        for j in range(docs_per_pair):
            inner = _sentence(rng, e1, e2, None).tokens
            pad = max(0, doc_length - len(inner))
            before = int(rng.integers(0, pad + 1))
            tokens = _filler(rng, before) + inner + _filler(rng, pad - before)
            docs.append(DocRecord(doc_id=f"d{k:04d}_{j}", tokens=tokens))
    for j in range(unrelated_docs):
        docs.append(DocRecord(doc_id=f"u{j:04d}", tokens=_filler(rng, doc_length)))
    return seeds, docs
