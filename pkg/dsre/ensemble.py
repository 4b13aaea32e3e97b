"""
Ensemble por voto ponderado: alpha·PCNN + beta·EA + gamma·BGWA.
Os pesos saem de mínimos quadrados (equações normais, solução de norma mínima) no dev.
"""
import logging
import os
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from dotenv import dotenv_values

from dsre.corpus import InstanceBag
from dsre.errors import ConfigError, DimensionError, InsufficientDataError
from dsre.inference import predict_bag
from dsre.model import RelationModel
from dsre.schemas import EnsembleWeights

logger = logging.getLogger(__name__)

ROLES = ("pcnn", "ea", "bgwa")
PINV_RCOND = 1e-10


def collect_probs(
    models: Dict[str, RelationModel], bags: Sequence[InstanceBag]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Matrizes [n_bags × rl] de PCNN, EA e BGWA e a matriz multi-hot dos rótulos."""
    missing = [r for r in ROLES if r not in models]
    if missing:
        raise ConfigError(f"faltam modelos para o ensemble: {missing}")
    schema = models["pcnn"].schema
    for role in ROLES:
        if models[role].schema != schema:
            raise ConfigError(f"modelo {role} usa esquema {list(models[role].schema.names)}, esperado {list(schema.names)}")
    rl = len(schema)
    mats = [np.zeros((len(bags), rl)) for _ in ROLES]
    targets = np.zeros((len(bags), rl))
    for i, bag in enumerate(bags):
        for mat, role in zip(mats, ROLES):
            mat[i] = predict_bag(bag, models[role]).probs.data
        targets[i, sorted(bag.labels)] = 1.0
    return mats[0], mats[1], mats[2], targets


def fit_weights(
    p_pcnn: np.ndarray, p_ea: np.ndarray, p_bgwa: np.ndarray, targets: np.ndarray
) -> EnsembleWeights:
    """min ||alpha p1 + beta p2 + gamma p3 - y||², sem intercepto e sem restrição de simplex."""
    shapes = {p_pcnn.shape, p_ea.shape, p_bgwa.shape, targets.shape}
    if len(shapes) != 1:
        raise DimensionError("fit_weights", p_pcnn.shape, p_ea.shape, p_bgwa.shape, targets.shape)
    if targets.size < 3:
        raise InsufficientDataError(f"fit_weights precisa de pelo menos 3 observações, recebeu {targets.size}")
    X = np.column_stack([p_pcnn.ravel(), p_ea.ravel(), p_bgwa.ravel()])
    y = targets.ravel()
    gram = X.T @ X
    # pseudo-inversa: sistemas sem posto completo ficam com a solução de norma mínima
    coef = np.linalg.pinv(gram, rcond=PINV_RCOND, hermitian=True) @ (X.T @ y)
    weights = EnsembleWeights(alpha=float(coef[0]), beta=float(coef[1]), gamma=float(coef[2]))
    logger.info("pesos do ensemble: alpha=%.6f beta=%.6f gamma=%.6f", weights.alpha, weights.beta, weights.gamma)
    return weights


def ensemble_predict(
    probs: Tuple[np.ndarray, np.ndarray, np.ndarray], weights: EnsembleWeights
) -> np.ndarray:
    p_pcnn, p_ea, p_bgwa = probs
    if not (p_pcnn.shape == p_ea.shape == p_bgwa.shape):
        raise DimensionError("ensemble_predict", p_pcnn.shape, p_ea.shape, p_bgwa.shape)
    return weights.alpha * p_pcnn + weights.beta * p_ea + weights.gamma * p_bgwa


def ensemble_scorer(models: Dict[str, RelationModel], weights: EnsembleWeights):
    def score(bag: InstanceBag) -> np.ndarray:
        p = tuple(predict_bag(bag, models[role]).probs.data for role in ROLES)
        return ensemble_predict(p, weights)

    return score


# ---------- Arquivo de pesos ----------
def write_weights(path: str, weights: EnsembleWeights) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"alpha={weights.alpha!r}\n")
        fh.write(f"beta={weights.beta!r}\n")
        fh.write(f"gamma={weights.gamma!r}\n")
        for role, digest in sorted(weights.checkpoints.items()):
            fh.write(f"{role}_checkpoint={digest}\n")


def read_weights(path: str, checkpoints: Optional[Dict[str, str]] = None) -> EnsembleWeights:
    if not os.path.isfile(path):
        raise ConfigError(f"arquivo de pesos não encontrado: {path}")
    # mesmo formato plano key=value do arquivo de config
    values = {k: v for k, v in dotenv_values(path).items() if v is not None}
    try:
        weights = EnsembleWeights(
            alpha=values["alpha"],
            beta=values["beta"],
            gamma=values["gamma"],
            checkpoints={k[: -len("_checkpoint")]: v for k, v in values.items() if k.endswith("_checkpoint")},
        )
    except (KeyError, ValueError) as e:
        raise ConfigError(f"{path}: arquivo de pesos inválido ({e})") from e
    for role, digest in (checkpoints or {}).items():
        stored = weights.checkpoints.get(role)
        if stored and stored != digest:
            logger.warning("pesos de %s foram ajustados com outro checkpoint de %s", path, role)
    return weights
