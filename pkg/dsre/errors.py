"""
Hierarquia de erros do pacote.
Cada classe carrega um exit_code, que o CLI usa como status do processo
(do mesmo jeito que as rotas devolviam status HTTP).
"""
from typing import Optional, Sequence


class DsreError(Exception):
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# ---------- Núcleo numérico ----------
class DimensionError(DsreError, ValueError):
    def __init__(self, op: str, *shapes: Sequence[int]):
        formatted = " e ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: dimensões incompatíveis {formatted}")
        self.shapes = tuple(tuple(s) for s in shapes)


class DomainError(DsreError, ValueError):
    pass


class PoolingIndexError(DsreError, IndexError):
    pass


class ContractError(DsreError):
    pass


# ---------- Corpus ----------
class EmptySentenceError(DsreError, ValueError):
    pass


class PositionIndexError(DsreError, IndexError):
    pass


class EmbeddingLookupError(DsreError, LookupError):
    pass


class EmbeddingFormatError(DsreError):
    pass


class BagParseError(DsreError):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"linha {line_no}: {detail}")
        self.line_no = line_no


class BagValidationError(DsreError):
    def __init__(self, bag_id: Optional[str], detail: str):
        super().__init__(f"bag '{bag_id}': {detail}")
        self.bag_id = bag_id


# ---------- Treino, modelos e pipeline ----------
class ConfigError(DsreError):
    pass


class CheckpointMismatchError(DsreError):
    pass


class InsufficientDataError(DsreError):
    pass


class SplitError(DsreError):
    pass


class UnsupportedMechanismError(DsreError):
    pass


class UsageError(DsreError):
    exit_code = 2
