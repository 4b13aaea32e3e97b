"""
Treino MIML no nível da bag.
A cada exemplo (bag, rótulo) treina-se só a instância com maior probabilidade do rótulo;
o gradiente é acumulado no batch e aplicado num único passo de SGD.
A seleção de modelo usa a AUC da curva PR no conjunto de desenvolvimento.
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from dsre.checkpoint import Snapshot, restore, snapshot
from dsre.config import TrainConfig
from dsre.core import ops
from dsre.core.optim import sgd_step
from dsre.core.rng import Rng
from dsre.core.tensor import zero_grads
from dsre.corpus import InstanceBag
from dsre.encoders import TRAIN
from dsre.errors import ConfigError
from dsre.evaluation import gold_facts, pr_curve, score_corpus
from dsre.inference import bag_scorer, predict_bag, select_instance
from dsre.model import RelationModel, all_parameters

logger = logging.getLogger(__name__)

__all__ = [
    "TrainState",
    "select_instance",
    "predict_bag",
    "train_example",
    "train_epoch",
    "expand_examples",
    "dev_auc",
    "fit",
    "repartition",
]

DevScorer = Callable[[RelationModel], float]


@dataclass
class TrainState:
    epoch: int = 0
    best_epoch: int = 0
    best_dev_auc: float = -math.inf
    best: Optional[Snapshot] = None
    losses: List[float] = field(default_factory=list)
    dev_aucs: List[float] = field(default_factory=list)


def train_example(
    bag: InstanceBag, label: int, model: RelationModel, rng: Rng, weight: float = 1.0
) -> float:
    """
    Seleciona a instância (forward eval), roda forward de treino nela e faz backward de
    weight * (-log p[label]). Os gradientes são acumulados, não zerados.
    """
    idx = select_instance(bag, label, model)
    out = model.forward(bag.instances[idx], TRAIN, rng)
    loss = ops.nll_loss(out.logits, label)
    loss.backward(weight)
    return loss.item()


def expand_examples(bags: Sequence[InstanceBag]) -> List[Tuple[InstanceBag, int]]:
    """Replicação MIML: um exemplo por rótulo da bag."""
    return [(bag, label) for bag in bags for label in sorted(bag.labels)]


def train_epoch(bags: Sequence[InstanceBag], model: RelationModel, cfg: TrainConfig, rng: Rng) -> float:
    if not bags:
        return 0.0
    order = rng.permutation(len(bags))
    examples = expand_examples([bags[int(i)] for i in order])
    params = all_parameters(model)
    total = 0.0
    for start in range(0, len(examples), cfg.batch_size):
        batch = examples[start:start + cfg.batch_size]
        zero_grads(params)
        # soma dos gradientes do lote, um único passo
        for bag, label in batch:
            total += train_example(bag, label, model, rng)
        sgd_step(params, cfg.lr)
    zero_grads(params)
    return total / len(examples)


def dev_auc(model: RelationModel, dev_bags: Sequence[InstanceBag], max_recall: Optional[float] = None, threads: int = 1) -> float:
    gold = gold_facts(dev_bags)
    if not gold:
        logger.warning("dev sem fatos não-NA; AUC considerada 0")
        return 0.0
    preds = score_corpus(bag_scorer(model), dev_bags, threads=threads)
    return pr_curve(preds, gold, auc_max_recall=max_recall).auc


def _check_disjoint(train_bags: Sequence[InstanceBag], dev_bags: Sequence[InstanceBag]) -> None:
    overlap = {b.unordered_pair for b in train_bags} & {b.unordered_pair for b in dev_bags}
    if overlap:
        logger.warning("%d pares de entidades aparecem em treino e dev", len(overlap))


def _write_epoch_row(path: Optional[str], epoch: int, loss: float, auc: float, header: bool = False) -> None:
    if not path:
        return
    with open(path, "w" if header else "a", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow(["epoch", "mean_loss", "dev_auc"])
        writer.writerow([epoch, repr(loss), repr(auc)])


def fit(
    train_bags: Sequence[InstanceBag],
    dev_bags: Sequence[InstanceBag],
    model: RelationModel,
    cfg: Optional[TrainConfig] = None,
    rng: Optional[Rng] = None,
    epoch_log: Optional[str] = None,
    dev_scorer: Optional[DevScorer] = None,
    threads: int = 1,
) -> Tuple[Snapshot, TrainState]:
    """
    Treina até max_epochs ou até `patience` épocas sem melhorar a AUC de dev.
    Devolve o snapshot da melhor época (a época 0 é a inicialização) e o estado do treino.
    O modelo termina com os parâmetros do melhor snapshot.
    """
    cfg = cfg or model.cfg
    rng = rng or Rng(cfg.seed)
    if not train_bags:
        raise ConfigError("conjunto de treino vazio")
    _check_disjoint(train_bags, dev_bags)
    score = dev_scorer or (lambda m: dev_auc(m, dev_bags, cfg.auc_max_recall, threads))

    state = TrainState()
    state.best_dev_auc = score(model)
    state.best = snapshot(model)
    state.dev_aucs.append(state.best_dev_auc)
    _write_epoch_row(epoch_log, 0, math.nan, state.best_dev_auc, header=True)
    logger.info("época 0: AUC dev %.4f (inicialização)", state.best_dev_auc)

    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        loss = train_epoch(train_bags, model, cfg, rng)
        auc = score(model)
        state.epoch = epoch
        state.losses.append(loss)
        state.dev_aucs.append(auc)
        _write_epoch_row(epoch_log, epoch, loss, auc)
        if auc > state.best_dev_auc:
            state.best_dev_auc, state.best_epoch, state.best = auc, epoch, snapshot(model)
            stale = 0
        else:
            stale += 1
        logger.info("época %d: perda %.5f, AUC dev %.4f (melhor %.4f na época %d)",
                    epoch, loss, auc, state.best_dev_auc, state.best_epoch)
        if stale >= cfg.patience:
            logger.info("parada antecipada: %d épocas sem melhora", stale)
            break

    restore(model, state.best)
    return state.best, state


def _pair_key(bag) -> Tuple[str, str]:
    return tuple(sorted((bag.e1.id, bag.e2.id)))


def repartition(bags: Sequence, dev_fraction: float, rng: Rng) -> Tuple[List, List]:
    """
    Divide um treino em treino/dev por par de entidades (dev_fraction dos pares vai para dev).
    Aceita bags codificadas ou registros do arquivo.
    """
    if not 0.0 < dev_fraction < 1.0:
        raise ConfigError(f"dev_fraction deve estar em (0, 1): {dev_fraction}")
    pairs = sorted({_pair_key(b) for b in bags})
    order = rng.permutation(len(pairs))
    n_dev = int(round(dev_fraction * len(pairs)))
    dev_pairs = {pairs[int(i)] for i in order[:n_dev]}
    train = [b for b in bags if _pair_key(b) not in dev_pairs]
    dev = [b for b in bags if _pair_key(b) in dev_pairs]
    logger.info("repartição: %d bags de treino, %d de dev (%d pares em dev)", len(train), len(dev), len(dev_pairs))
    return train, dev
