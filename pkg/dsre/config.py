"""
Configuração de treino.
Precedência: defaults < arquivo key=value < flags do CLI.
Os defaults seguem a tabela de parâmetros do modelo (d_w=50, d_p=5, batch 50, lr 0.1, dropout 0.5).
"""
import logging
from typing import Any, Dict, Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from dsre.errors import ConfigError

logger = logging.getLogger(__name__)

ModelKind = Literal["pcnn", "bgwa", "ea"]
MODEL_KINDS = ("pcnn", "bgwa", "ea")


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    model: ModelKind = "pcnn"
    lr: float = Field(0.1, gt=0)
    batch_size: int = Field(50, gt=0)
    dropout: float = Field(0.5, ge=0, lt=1)
    d_w: int = Field(50, gt=0)
    d_p: int = Field(5, gt=0)
    max_epochs: int = Field(200, ge=0)
    patience: int = Field(10, gt=0)
    seed: int = Field(0, ge=0)
    max_position: int = Field(30, gt=0)
    max_length: int = Field(120, gt=0)
    c: int = Field(230, gt=0)  # filtros da convolução
    w: int = Field(3, gt=0)  # janela da convolução
    h: int = Field(115, gt=0)  # estado oculto de cada direção da GRU (g = 2h)
    init_scale: Optional[float] = Field(None, gt=0)  # None => limite de Glorot
    auc_max_recall: Optional[float] = Field(None, gt=0, le=1)

    @property
    def input_dim(self) -> int:
        return self.d_w + 2 * self.d_p

    @property
    def g(self) -> int:
        return 2 * self.h

    def architecture(self) -> Dict[str, Any]:
        """Campos que definem os shapes dos parâmetros (checados ao carregar checkpoint)."""
        return {k: getattr(self, k) for k in ("model", "d_w", "d_p", "max_position", "c", "w", "h")}


def load_config_file(path: str) -> Dict[str, str]:
    """Lê um arquivo plano key=value (mesmo formato de um .env)."""
    values = dotenv_values(path)
    unknown = sorted(set(values) - set(TrainConfig.model_fields))
    if unknown:
        raise ConfigError(f"{path}: chaves desconhecidas {unknown}. Permitidas: {sorted(TrainConfig.model_fields)}")
    return {k: v for k, v in values.items() if v not in (None, "")}


def resolve_config(
    file_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    base: Optional[TrainConfig] = None,
) -> TrainConfig:
    merged: Dict[str, Any] = dict(base.model_dump()) if base else {}
    if file_path:
        merged.update(load_config_file(file_path))
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = TrainConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"configuração inválida: {e}") from e
    logger.debug("config resolvida: %s", cfg.model_dump())
    return cfg


def write_config_file(cfg: TrainConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in cfg.model_dump().items():
            if value is not None:
                fh.write(f"{key}={value}\n")
