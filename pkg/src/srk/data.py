"""Sparse classification datasets and synthetic logistic problems."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EmptyDataset, ParseError
from .objectives import LogisticProblem


@dataclass
class Dataset:
    features: sp.csr_matrix
    labels: np.ndarray

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.features.nnz)

    def problem(self, gamma: float, sc_m: float = 1.0) -> LogisticProblem:
        return LogisticProblem(self.features, self.labels, gamma, sc_m=sc_m)


def _normalize_labels(raw: np.ndarray) -> np.ndarray:
    classes = np.unique(raw)
    if classes.size > 2:
        raise ParseError(f"expected a binary problem, found labels {classes.tolist()}")
    if np.all(np.isin(classes, (-1.0, 1.0))):
        return raw.copy()
    if np.all(np.isin(classes, (0.0, 1.0))):
        return np.where(raw > 0, 1.0, -1.0)
    if classes.size == 1:
        raise ParseError(f"cannot map single label {classes[0]:g} to +/-1")
    return np.where(raw == classes[1], 1.0, -1.0)


def parse_lines(lines, n_features: int | None = None) -> Dataset:
    """Parse ``label index:value ...`` lines with 1-based indices.

    Blank lines and ``#`` comments are skipped.
    """
    rows, cols, vals, labels = [], [], [], []
    max_index = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        row = len(labels)
        labels.append(label)
        for tok in tokens[1:]:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"expected index:value, got {tok!r}", lineno)
            try:
                j = int(idx)
                v = float(val)
            except ValueError:
                raise ParseError(f"bad feature token {tok!r}", lineno) from None
            if j < 1:
                raise ParseError(f"feature index {j} is not 1-based", lineno)
            if not np.isfinite(v):
                raise ParseError(f"non-finite value in {tok!r}", lineno)
            rows.append(row)
            cols.append(j - 1)
            vals.append(v)
            max_index = max(max_index, j)
    if not labels:
        raise EmptyDataset("no samples found")
    d = max_index if n_features is None else n_features
    if max_index > d:
        raise ParseError(f"feature index {max_index} exceeds n_features={d}")
    x = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), max(d, 1)))
    x.sum_duplicates()
    return Dataset(x, _normalize_labels(np.asarray(labels)))


def load_dataset(path: str | os.PathLike, n_features: int | None = None) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_lines(fh, n_features)


def synth_logistic(n: int, d: int, seed: int, gamma: float, flip: float = 0.1, sc_m: float = 1.0) -> LogisticProblem:
    """Unit-norm Gaussian rows, labels from a planted vector with a fraction flipped."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    w = rng.standard_normal(d)
    y = np.where(x @ w >= 0, 1.0, -1.0)
    y[rng.random(n) < flip] *= -1.0
    return LogisticProblem(sp.csr_matrix(x), y, gamma, sc_m=sc_m)
