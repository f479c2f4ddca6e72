# models/training_set.py
"""
Shared containers for zero-shot training and evaluation data

Matrix conventions:
- x: d x N feature matrix, one column per example
- y: N x C one-hot label indicator
- z: DocMatrix, d_hat x C class descriptions
"""

from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from utils.errors import DimensionMismatch
from utils.textpipe import DocMatrix


def one_hot(labels: Sequence[int], num_classes: int) -> np.ndarray:
    """N x C indicator with a single 1 per row"""
    labels = np.asarray(labels, dtype=np.int64)
    y = np.zeros((labels.shape[0], num_classes), dtype=np.float64)
    y[np.arange(labels.shape[0]), labels] = 1.0
    return y


class TrainingSet(BaseModel):
    """Seen-class features, labels and class descriptions"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray
    y: np.ndarray
    z: DocMatrix

    @model_validator(mode="after")
    def _check_shapes(self) -> "TrainingSet":
        x, y = self.x, self.y
        if x.ndim != 2 or y.ndim != 2:
            raise ValueError("x and y must be 2-D")
        if x.shape[1] != y.shape[0]:
            raise ValueError(f"x has {x.shape[1]} examples but y has {y.shape[0]} rows")
        if y.shape[1] != self.z.num_classes:
            raise ValueError(f"y has {y.shape[1]} classes but z has {self.z.num_classes}")
        if not np.all((y == 0) | (y == 1)) or not np.all(y.sum(axis=1) == 1):
            raise ValueError("every row of y must contain exactly one 1")
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite")
        return self

    @property
    def feat_dim(self) -> int:
        return self.x.shape[0]

    @property
    def num_examples(self) -> int:
        return self.x.shape[1]

    @property
    def num_classes(self) -> int:
        return self.y.shape[1]

    @property
    def doc_dim(self) -> int:
        return self.z.vocab_size

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.y, axis=1)

    @property
    def class_ids(self) -> Tuple[str, ...]:
        return self.z.class_ids


class LabeledSet(BaseModel):
    """Test examples with integer labels indexing the columns of z"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray
    labels: np.ndarray
    z: DocMatrix

    @model_validator(mode="after")
    def _check_shapes(self) -> "LabeledSet":
        if self.x.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("x must be 2-D and labels 1-D")
        if self.x.shape[1] != self.labels.shape[0]:
            raise ValueError(f"x has {self.x.shape[1]} examples but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.z.num_classes):
            raise ValueError("labels must index the columns of z")
        return self

    @property
    def num_examples(self) -> int:
        return self.x.shape[1]


def check_features(x: np.ndarray, feat_dim: int, name: str = "x"):
    if x.shape[0] != feat_dim:
        raise DimensionMismatch(f"{name} has dimension {x.shape[0]}, model expects {feat_dim}")


def check_docs(z: DocMatrix, doc_dim: int):
    if z.vocab_size != doc_dim:
        raise DimensionMismatch(
            f"document matrix has {z.vocab_size} words, model expects {doc_dim}"
        )
