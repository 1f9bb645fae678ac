from typing import Sequence, Union

import numpy as np

from idealsim.exceptions import ShapeMismatchError

Scalar = Union[int, float]


class BlockVector:
    """Stacked per-agent vectors, row i belonging to agent i.

    Values are immutable: arithmetic returns new instances and the wrapped
    array is flagged read-only.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        array = np.array(data, dtype=float)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        if array.ndim != 2:
            raise ShapeMismatchError(
                f"block vector needs an n x d array, got ndim={array.ndim}"
            )
        array.setflags(write=False)
        self._data = array

    @classmethod
    def zeros(cls, n: int, d: int) -> "BlockVector":
        return cls(np.zeros((n, d)))

    @classmethod
    def consensus(cls, n: int, value: Sequence[float]) -> "BlockVector":
        return cls(np.tile(np.asarray(value, dtype=float), (n, 1)))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def d(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self):
        return self._data.shape

    def require_shape(self, n: int, d: int) -> "BlockVector":
        if self._data.shape != (n, d):
            raise ShapeMismatchError(
                f"expected a {n}x{d} block vector, got "
                f"{self._data.shape[0]}x{self._data.shape[1]}"
            )
        return self

    def _other(self, other: "BlockVector") -> np.ndarray:
        if not isinstance(other, BlockVector):
            return NotImplemented
        if other.shape != self.shape:
            raise ShapeMismatchError(
                f"block shapes differ: {self.shape} vs {other.shape}"
            )
        return other._data

    def __add__(self, other: "BlockVector") -> "BlockVector":
        data = self._other(other)
        if data is NotImplemented:
            return NotImplemented
        return BlockVector(self._data + data)

    def __sub__(self, other: "BlockVector") -> "BlockVector":
        data = self._other(other)
        if data is NotImplemented:
            return NotImplemented
        return BlockVector(self._data - data)

    def __mul__(self, scale: Scalar) -> "BlockVector":
        if not isinstance(scale, (int, float, np.floating)):
            return NotImplemented
        return BlockVector(self._data * scale)

    __rmul__ = __mul__

    def __neg__(self) -> "BlockVector":
        return BlockVector(-self._data)

    def inner(self, other: "BlockVector") -> float:
        """Frobenius inner product"""
        return float(np.sum(self._data * self._other(other)))

    def norm(self) -> float:
        return float(np.linalg.norm(self._data))

    def column_sums(self) -> np.ndarray:
        return self._data.sum(axis=0)

    def row(self, i: int) -> np.ndarray:
        return self._data[i]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"BlockVector(n={self.n}, d={self.d})"
