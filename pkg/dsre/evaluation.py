"""
Avaliação held-out: ranking de fatos (bag, relação), curva precisão-revocação, AUC e P@N.
NA nunca entra como predição nem como gold.
Também exporta mapas de atenção e a tabela de confiança por modelo nos rótulos verdadeiros.
"""
import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np

from dsre.core.rng import Rng
from dsre.corpus import InstanceBag, RelationSchema
from dsre.errors import BagParseError, DomainError, UnsupportedMechanismError
from dsre.inference import BagScorer, predict_bag
from dsre.model import RelationModel

logger = logging.getLogger(__name__)

Fact = Tuple[str, int]


@dataclass(frozen=True)
class PredictionRecord:
    bag_id: str
    relation: int
    score: float


@dataclass
class PrCurve:
    points: List[Tuple[float, float]]  # (revocação, precisão) por posição do ranking
    auc: float


class PrecisionAtN(NamedTuple):
    n: int
    precision: float
    truncated: bool  # n maior que o número de predições


def gold_facts(bags: Iterable[InstanceBag]) -> Set[Fact]:
    return {(b.bag_id, r) for b in bags for r in b.labels if r != 0}


def score_corpus(scorer: BagScorer, bags: Sequence[InstanceBag], threads: int = 1) -> List[PredictionRecord]:
    """Um registro por (bag, relação não-NA)."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_scores = list(pool.map(scorer, bags))
    else:
        all_scores = [scorer(b) for b in bags]
    records = []
    for bag, scores in zip(bags, all_scores):
        for r in range(1, len(scores)):
            records.append(PredictionRecord(bag.bag_id, r, float(scores[r])))
    return records


def rank(preds: Iterable[PredictionRecord]) -> List[PredictionRecord]:
    """Score decrescente; empates por bag_id e depois relação."""
    return sorted(preds, key=lambda p: (-p.score, p.bag_id, p.relation))


def pr_curve(
    preds: Sequence[PredictionRecord], gold: Set[Fact], auc_max_recall: Optional[float] = None
) -> PrCurve:
    """
    Um ponto por posição k: precisão = acertos/k, revocação = acertos/|gold|.
    AUC pela regra do trapézio sobre a revocação; com `auc_max_recall`, só até esse limite.
    """
    if not gold:
        raise DomainError("conjunto gold vazio")
    for p in preds:
        if p.relation < 1 or not math.isfinite(p.score):
            raise DomainError(f"predição inválida: {p}")
    n_gold = len(gold)
    points = []
    hits = 0
    area = 0.0
    prev_precision = None
    for k, p in enumerate(rank(preds), start=1):
        hit = (p.bag_id, p.relation) in gold
        hits += hit
        precision = hits / k
        recall = hits / n_gold
        if hit and (auc_max_recall is None or recall <= auc_max_recall):
            # o primeiro degrau usa a própria precisão como altura inicial
            left = precision if prev_precision is None else prev_precision
            area += (left + precision) / 2.0
        prev_precision = precision
        points.append((recall, precision))
    return PrCurve(points=points, auc=min(1.0, area / n_gold))


def p_at_n(preds: Sequence[PredictionRecord], gold: Set[Fact], n: int) -> PrecisionAtN:
    if n < 1:
        raise DomainError(f"n deve ser >= 1: {n}")
    ranked = rank(preds)
    truncated = n > len(ranked)
    if truncated:
        logger.warning("P@%d pedido com só %d predições; usando todas", n, len(ranked))
    top = ranked[:n]
    if not top:
        return PrecisionAtN(n, 0.0, truncated)
    hits = sum((p.bag_id, p.relation) in gold for p in top)
    return PrecisionAtN(n, hits / len(top), truncated)


# ---------- Atenção ----------
@dataclass
class AttentionTable:
    tokens: List[str]
    columns: Dict[str, np.ndarray] = field(default_factory=dict)
    instance_index: int = 0


ATTENTION_COLUMNS = {"word": "word_attention", "entity1": "entity1_attention", "entity2": "entity2_attention"}


def export_attention(model: RelationModel, bag: InstanceBag, relation: int) -> AttentionTable:
    """Atenção normalizada (softmax) da instância vencedora da relação, uma linha por token."""
    if not model.has_attention:
        raise UnsupportedMechanismError(f"modelo {model.kind} não tem atenção (use bgwa ou ea)")
    out = predict_bag(bag, model, attention_for=relation)
    idx = int(out.attention.pop("instance")[0])
    table = AttentionTable(tokens=list(bag.instances[idx].raw_tokens), instance_index=idx)
    for key, column in ATTENTION_COLUMNS.items():
        if key in out.attention:
            table.columns[column] = out.attention[key]
    return table


def write_attention_csv(table: AttentionTable, path: str) -> None:
    names = list(table.columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token"] + names)
        for j, token in enumerate(table.tokens):
            writer.writerow([token] + [repr(float(table.columns[n][j])) for n in names])


# ---------- Complementaridade dos modelos ----------
def true_label_confidence(
    scorers: Dict[str, BagScorer], bags: Sequence[InstanceBag], n: int, rng: Rng
) -> List[Tuple[str, int, Dict[str, float]]]:
    """Confiança de cada modelo no rótulo verdadeiro de até `n` bags sorteadas (só rótulos não-NA)."""
    labelled = [b for b in bags if any(r != 0 for r in b.labels)]
    chosen = sorted(rng.permutation(len(labelled))[:n])
    rows = []
    for i in chosen:
        bag = labelled[int(i)]
        scores = {name: scorer(bag) for name, scorer in scorers.items()}
        for r in sorted(bag.labels):
            if r != 0:
                rows.append((bag.bag_id, r, {name: float(s[r]) for name, s in scores.items()}))
    return rows


def write_confidence_csv(rows, schema: RelationSchema, path: str) -> None:
    models = list(rows[0][2]) if rows else []
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bag_id", "relation"] + models)
        for bag_id, r, scores in rows:
            writer.writerow([bag_id, schema.names[r]] + [repr(scores[m]) for m in models])


# ---------- Arquivos ----------
def write_predictions(path: str, preds: Iterable[PredictionRecord], schema: RelationSchema) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        for p in preds:
            writer.writerow([p.bag_id, schema.names[p.relation], repr(p.score)])


def read_predictions(path: str, schema: RelationSchema) -> List[PredictionRecord]:
    preds = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row:
                continue
            if len(row) != 3 or row[1] not in schema:
                raise BagParseError(line_no, f"predição inválida: {row}")
            preds.append(PredictionRecord(row[0], schema.id_of(row[1]), float(row[2])))
    return preds


def write_pr_csv(path: str, curve: PrCurve, max_recall: Optional[float] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["recall", "precision"])
        for recall, precision in curve.points:
            if max_recall is not None and recall > max_recall:
                break
            writer.writerow([repr(recall), repr(precision)])


def write_report(path: str, curve: PrCurve, precisions: Sequence[PrecisionAtN]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"AUC\t{curve.auc!r}\n")
        for p in precisions:
            suffix = "\t(truncado)" if p.truncated else ""
            fh.write(f"P@{p.n}\t{p.precision!r}{suffix}\n")
