"""
Inferência no nível da bag (modo eval, sem ruído de dropout).
"""
from typing import Callable, Optional

import numpy as np

from dsre.core.tensor import Tensor
from dsre.corpus import InstanceBag
from dsre.encoders import EVAL, ModelOutput
from dsre.model import RelationModel

BagScorer = Callable[[InstanceBag], np.ndarray]


def instance_probs(bag: InstanceBag, model: RelationModel) -> np.ndarray:
    """Matriz [n_instâncias × rl] de probabilidades por instância."""
    return np.stack([model.forward(inst, EVAL).probs.data for inst in bag.instances])


def select_instance(bag: InstanceBag, label: int, model: RelationModel) -> int:
    """Instância com maior probabilidade para `label`; empate fica com a primeira."""
    if len(bag.instances) == 1:
        return 0
    return int(np.argmax(instance_probs(bag, model)[:, label]))


def predict_bag(bag: InstanceBag, model: RelationModel, attention_for: Optional[int] = None) -> ModelOutput:
    """
    Score da bag = máximo por relação sobre as instâncias (não soma 1).
    Com `attention_for`, devolve os mapas de atenção da instância vencedora dessa relação.
    """
    probs = instance_probs(bag, model)
    out = ModelOutput(probs=Tensor(probs.max(axis=0)))
    if attention_for is not None:
        winner = int(np.argmax(probs[:, attention_for]))
        out.attention = model.forward(bag.instances[winner], EVAL).attention
        out.attention["instance"] = np.array([winner])
    return out


def bag_scorer(model: RelationModel) -> BagScorer:
    return lambda bag: predict_bag(bag, model).probs.data
