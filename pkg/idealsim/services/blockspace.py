from abc import ABC, abstractmethod

import numpy as np

from idealsim.exceptions import ShapeMismatchError
from idealsim.models.blocks import BlockVector
from idealsim.models.graphs import MixingMatrix, SpectralSummary
from idealsim.services.topology import spectrum


def _require_rows(w: MixingMatrix, x: BlockVector):
    if x.n != w.n:
        raise ShapeMismatchError(
            f"{w.n}x{w.n} mixing matrix cannot act on {x.n} rows"
        )


def mix(w: MixingMatrix, x: BlockVector) -> BlockVector:
    """(W kron I_d) X, computed as the n x n matrix acting on rows"""
    _require_rows(w, x)
    return BlockVector(w.entries @ x.data)


def seminorm_sq(w: MixingMatrix, x: BlockVector) -> float:
    _require_rows(w, x)
    value = float(np.sum(x.data * (w.entries @ x.data)))
    return max(value, 0.0)


def consensus_mean(x: BlockVector) -> np.ndarray:
    return x.data.mean(axis=0)


def consensus_gap(x: BlockVector) -> float:
    """Largest distance of an agent's vector to the network average"""
    deviations = x.data - consensus_mean(x)
    return float(np.max(np.linalg.norm(deviations, axis=1)))


def project_zero_mean(x: BlockVector) -> BlockVector:
    """Remove the consensus component so every column sums to zero"""
    return BlockVector(x.data - consensus_mean(x))


class MetricOperator(ABC):
    """Regularization metric M applied through gossip rounds"""

    label: str = "M"

    def __init__(self, mixing: MixingMatrix):
        self.mixing = mixing

    @property
    @abstractmethod
    def summary(self) -> SpectralSummary: ...

    @property
    @abstractmethod
    def rounds(self) -> int:
        """Communication rounds per application"""

    @abstractmethod
    def apply(self, x: np.ndarray) -> np.ndarray: ...

    def apply_block(self, x: BlockVector) -> BlockVector:
        _require_rows(self.mixing, x)
        return BlockVector(self.apply(x.data))

    @property
    def lambda_max(self) -> float:
        return self.summary.lambda_max

    @property
    def lambda_min_plus(self) -> float:
        return self.summary.lambda_min_plus

    @property
    def n(self) -> int:
        return self.mixing.n


class MixingOperator(MetricOperator):
    """M = W, one round per application"""

    label = "W"

    def __init__(self, mixing: MixingMatrix):
        super().__init__(mixing)
        self._summary = spectrum(mixing)

    @property
    def summary(self) -> SpectralSummary:
        return self._summary

    @property
    def rounds(self) -> int:
        return 1

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.mixing.entries @ x
