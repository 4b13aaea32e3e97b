from pydantic import BaseModel, ConfigDict, Field
from typing import Dict, List, Optional, Tuple


# ---------- Registros dos arquivos JSONL ----------
class EntityRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    surface: str


class SentenceRecord(BaseModel):
    tokens: List[str]
    e1_span: Tuple[int, int]  # [início, fim exclusivo)
    e2_span: Tuple[int, int]


class BagRecord(BaseModel):
    bag_id: str
    e1: EntityRecord
    e2: EntityRecord
    relations: List[str]
    sentences: List[SentenceRecord]


class SeedFactRecord(SentenceRecord):
    e1: EntityRecord
    e2: EntityRecord
    relation: str


class DocRecord(BaseModel):
    doc_id: str
    tokens: List[str]


# ---------- Artefatos ----------
class EnsembleWeights(BaseModel):
    """Coeficientes (alpha, beta, gamma) de PCNN, EA e BGWA, nessa ordem."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(allow_inf_nan=False)
    beta: float = Field(allow_inf_nan=False)
    gamma: float = Field(allow_inf_nan=False)
    # hash dos checkpoints usados no ajuste, por papel (pcnn/ea/bgwa)
    checkpoints: Dict[str, str] = Field(default_factory=dict)


class CheckpointMeta(BaseModel):
    model: str
    config: Dict[str, object]
    relations: List[str]
    vocab: List[str]
    vocab_hash: str
    params: Dict[str, List[int]]


class RunManifest(BaseModel):
    subcommand: str
    argv: List[str]
    config: Dict[str, object] = Field(default_factory=dict)
    seed: Optional[int] = None
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    timestamp: str
