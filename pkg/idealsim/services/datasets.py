import logging
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pandas as pd
from sklearn.datasets import load_svmlight_file

from idealsim.exceptions import DatasetError
from idealsim.models.objectives import LogisticObjective, QuadraticObjective

logger = logging.getLogger(__name__)

Dataset = Tuple[np.ndarray, np.ndarray]

FORMATS = ("csv", "libsvm")
SCHEMES = ("contiguous", "round-robin")


def normalize_rows(features: np.ndarray) -> np.ndarray:
    """Scale rows to at most unit Euclidean norm; zero rows stay zero"""
    norms = np.linalg.norm(features, axis=1)
    return features / np.maximum(norms, 1.0)[:, None]


def _binary_labels(labels: np.ndarray, source: str) -> np.ndarray:
    values = set(np.unique(labels).tolist())
    if values <= {-1.0, 1.0}:
        return labels.astype(float)
    if values <= {0.0, 1.0}:
        return np.where(labels > 0, 1.0, -1.0)
    raise DatasetError(
        f"{source}: labels must be binary ({{-1,+1}} or {{0,1}}), "
        f"found {sorted(values)[:5]}"
    )


def _read_csv(path: Path) -> Dataset:
    try:
        frame = pd.read_csv(path, header=None, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(f"malformed CSV {path}: {e}") from e
    first = pd.to_numeric(frame.iloc[0], errors="coerce")
    if first.isna().any():
        frame = frame.iloc[1:]
    if frame.shape[1] < 2 or frame.empty:
        raise DatasetError(f"{path} needs feature columns and a label column")
    try:
        values = frame.astype(float).to_numpy()
    except ValueError as e:
        raise DatasetError(f"non-numeric entry in {path}: {e}") from e
    return values[:, :-1], values[:, -1]


def _read_libsvm(path: Path) -> Dataset:
    try:
        features, labels = load_svmlight_file(str(path), zero_based=False)
    except ValueError as e:
        raise DatasetError(f"malformed LibSVM file {path}: {e}") from e
    return np.asarray(features.todense()), np.asarray(labels)


def load_dataset(path, fmt: str = "csv") -> Dataset:
    """Read binary classification data with rows rescaled to norm <= 1"""
    path = Path(path)
    if fmt not in FORMATS:
        raise DatasetError(f"unknown dataset format {fmt!r}")
    if not path.exists():
        raise DatasetError(f"dataset {path} does not exist")
    features, labels = _read_csv(path) if fmt == "csv" else _read_libsvm(path)
    if not np.all(np.isfinite(features)):
        raise DatasetError(f"{path} contains non-finite features")
    labels = _binary_labels(labels, str(path))
    logger.info(
        "Loaded %d samples with %d features from %s",
        features.shape[0],
        features.shape[1],
        path,
    )
    return normalize_rows(features), labels


def synthesize_dataset(
    seed: int, m: int, d: int, separation: float = 1.0
) -> Dataset:
    """Two Gaussian classes at +/- separation along a random direction"""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    labels = rng.choice(np.array([-1.0, 1.0]), size=m)
    noise = rng.standard_normal((m, d))
    features = labels[:, None] * separation * direction + noise
    return normalize_rows(features), labels


def partition(
    dataset: Dataset, n: int, scheme: str = "contiguous", mu: float = 1e-3
) -> List[LogisticObjective]:
    """Split samples over n agents, each shard becoming a logistic loss"""
    features, labels = dataset
    if scheme not in SCHEMES:
        raise DatasetError(f"unknown partition scheme {scheme!r}")
    indices = np.arange(features.shape[0])
    if scheme == "contiguous":
        shards = np.array_split(indices, n)
    else:
        shards = [indices[i::n] for i in range(n)]
    empty = [i for i, shard in enumerate(shards) if shard.size == 0]
    if empty:
        raise DatasetError(
            f"{features.shape[0]} samples cannot fill {n} shards; "
            f"agents {empty} would be empty"
        )
    return [
        LogisticObjective(features[shard], labels[shard], mu)
        for shard in shards
    ]


def synthesize_quadratics(
    seed: int, n: int, d: int, kappa: float = 10.0
) -> List[QuadraticObjective]:
    """Per-agent quadratics with spectrum spanning [1, kappa]"""
    rng = np.random.default_rng(seed)
    spectrum = np.linspace(1.0, kappa, d) if d > 1 else np.ones(1)
    objectives = []
    for _ in range(n):
        basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
        hessian = (basis * spectrum) @ basis.T
        hessian = 0.5 * (hessian + hessian.T)
        objectives.append(
            QuadraticObjective(hessian, rng.standard_normal(d))
        )
    return objectives
