from abc import ABC, abstractmethod
from typing import List, Sequence

import numpy as np
from scipy.linalg import eigvalsh
from scipy.special import expit

from idealsim.exceptions import ObjectiveError, ShapeMismatchError


class LocalObjective(ABC):
    """Loss oracle held by a single agent"""

    kind: str = ""

    @property
    @abstractmethod
    def d(self) -> int: ...

    @property
    @abstractmethod
    def smoothness(self) -> float: ...

    @property
    @abstractmethod
    def strong_convexity(self) -> float: ...

    @property
    def n_samples(self) -> int:
        return 1

    @abstractmethod
    def value(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def grad(self, x: np.ndarray) -> np.ndarray: ...

    def sample_grad(self, x: np.ndarray, index: int) -> np.ndarray:
        """Unbiased estimate of grad(x) from one data point"""
        return self.grad(x)

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ShapeMismatchError(
                f"{self.kind} objective expects a vector of size {self.d}, "
                f"got shape {x.shape}"
            )
        return x


class LogisticObjective(LocalObjective):
    """Sum of logistic losses over a shard plus (mu/2)||x||^2.

    Smoothness is reported as ||A||_2^2 / 4 + mu, which bounds the Hessian of
    the sum and reduces to the per-row bound for single-row shards.
    """

    kind = "logistic-l2"

    def __init__(self, features, labels, mu: float):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float).ravel()
        if features.ndim != 2:
            raise ObjectiveError("features must be a 2-d array")
        if features.shape[0] == 0:
            raise ObjectiveError("logistic shard has no samples")
        if labels.shape[0] != features.shape[0]:
            raise ObjectiveError(
                f"{features.shape[0]} feature rows but "
                f"{labels.shape[0]} labels"
            )
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(labels))):
            raise ObjectiveError("logistic data contains non-finite values")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ObjectiveError("logistic labels must be in {-1, +1}")
        if mu <= 0:
            raise ObjectiveError(f"regularizer mu must be positive, got {mu}")
        self.features = features
        self.labels = labels
        self.mu = float(mu)
        self._signed = features * labels[:, None]
        spectral = np.linalg.norm(features, 2) if features.size else 0.0
        self._smoothness = 0.25 * spectral**2 + self.mu

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def smoothness(self) -> float:
        return self._smoothness

    @property
    def strong_convexity(self) -> float:
        return self.mu

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    def value(self, x: np.ndarray) -> float:
        x = self._check(x)
        margins = self._signed @ x
        loss = np.sum(np.logaddexp(0.0, -margins))
        return float(loss + 0.5 * self.mu * (x @ x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        weights = expit(-(self._signed @ x))
        return self.mu * x - self._signed.T @ weights

    def sample_grad(self, x: np.ndarray, index: int) -> np.ndarray:
        x = self._check(x)
        row = self._signed[index]
        weight = expit(-(row @ x))
        return self.mu * x - self.n_samples * weight * row


class QuadraticObjective(LocalObjective):
    """f(x) = x^T H x / 2 - b^T x with H symmetric positive definite"""

    kind = "quadratic"

    def __init__(self, hessian, linear):
        hessian = np.asarray(hessian, dtype=float)
        linear = np.asarray(linear, dtype=float).ravel()
        if hessian.ndim != 2 or hessian.shape[0] != hessian.shape[1]:
            raise ObjectiveError(f"H must be square, got {hessian.shape}")
        if linear.shape[0] != hessian.shape[0]:
            raise ObjectiveError(
                f"b has size {linear.shape[0]}, H is {hessian.shape[0]}-dim"
            )
        if not (np.all(np.isfinite(hessian)) and np.all(np.isfinite(linear))):
            raise ObjectiveError("quadratic data contains non-finite values")
        if not np.allclose(hessian, hessian.T, rtol=0.0, atol=1e-12):
            raise ObjectiveError("H must be symmetric")
        eigenvalues = eigvalsh(hessian)
        if eigenvalues[0] <= 0:
            raise ObjectiveError(
                f"H must be positive definite, smallest eigenvalue "
                f"{eigenvalues[0]:.3e}"
            )
        self.hessian = hessian
        self.linear = linear
        self._mu = float(eigenvalues[0])
        self._L = float(eigenvalues[-1])

    @property
    def d(self) -> int:
        return self.hessian.shape[0]

    @property
    def smoothness(self) -> float:
        return self._L

    @property
    def strong_convexity(self) -> float:
        return self._mu

    def value(self, x: np.ndarray) -> float:
        x = self._check(x)
        return float(0.5 * (x @ (self.hessian @ x)) - self.linear @ x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        return self.hessian @ x - self.linear

    def minimum(self) -> float:
        """min_x f(x) = -b^T H^{-1} b / 2"""
        solution = np.linalg.solve(self.hessian, self.linear)
        return float(-0.5 * self.linear @ solution)

    def conjugate(self, g: np.ndarray) -> float:
        """f*(g) = (g + b)^T H^{-1} (g + b) / 2"""
        shifted = np.asarray(g, dtype=float) + self.linear
        return float(0.5 * shifted @ np.linalg.solve(self.hessian, shifted))


class GlobalObjective:
    """Separable F(X) = sum_i f_i(x_i) over the rows of X"""

    def __init__(self, locals_: Sequence[LocalObjective]):
        locals_ = list(locals_)
        if not locals_:
            raise ObjectiveError("a global objective needs at least one agent")
        dims = {f.d for f in locals_}
        if len(dims) != 1:
            raise ObjectiveError(f"local objectives disagree on d: {dims}")
        self.locals: List[LocalObjective] = locals_
        self.L = max(f.smoothness for f in locals_)
        self.mu = min(f.strong_convexity for f in locals_)

    @property
    def n(self) -> int:
        return len(self.locals)

    @property
    def d(self) -> int:
        return self.locals[0].d

    @property
    def kappa_f(self) -> float:
        return self.L / self.mu

    @property
    def is_quadratic(self) -> bool:
        return all(isinstance(f, QuadraticObjective) for f in self.locals)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n, self.d):
            raise ShapeMismatchError(
                f"expected {self.n}x{self.d} iterate, got {X.shape}"
            )
        return X

    def value(self, X: np.ndarray) -> float:
        X = self._check(X)
        return float(sum(f.value(x) for f, x in zip(self.locals, X)))

    def grad(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        return np.stack([f.grad(x) for f, x in zip(self.locals, X)])

    def centralized_value(self, x: np.ndarray) -> float:
        """f(x) = sum_i f_i(x), the objective at consensus"""
        return float(sum(f.value(x) for f in self.locals))

    def centralized_grad(self, x: np.ndarray) -> np.ndarray:
        return np.sum([f.grad(x) for f in self.locals], axis=0)
