"""
Gerador determinístico usado em todo o pacote.
Algoritmo fixo: PCG64 do numpy (mesma semente => mesma sequência em qualquer plataforma).
"""
from typing import Sequence

import numpy as np

ALGORITHM = "numpy.random.PCG64"


class Rng:
    def __init__(self, seed: int):
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError(f"seed fora do intervalo de 64 bits: {seed}")
        self.seed = int(seed)
        self.algorithm = ALGORITHM
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, lo: float, hi: float, shape: Sequence[int]) -> np.ndarray:
        return self._gen.uniform(lo, hi, size=tuple(shape))

    def random(self, shape: Sequence[int]) -> np.ndarray:
        return self._gen.random(size=tuple(shape))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, lo: int, hi: int, size=None):
        return self._gen.integers(lo, hi, size=size)
