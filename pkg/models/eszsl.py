# models/eszsl.py
"""
Single closed-form bilinear baseline (no noise suppression)

    min_V ||X^T V S - Y||_F^2 + lam ||V S||_F^2 + gamma ||X^T V||_F^2 + lam gamma ||V||_F^2

with the class-description matrix S = Z. Setting the gradient to zero gives

    (X X^T + lam I) V (Z Z^T + gamma I) = X Y Z^T,

solved with one SPD solve on each side. Y uses the 0/1 indicator encoding
of the training sets here (not +-1).
"""

import time
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.training_set import TrainingSet, check_docs, check_features
from utils import linsolve
from utils.errors import DimensionMismatch
from utils.logger import zsl_logger
from utils.textpipe import DocMatrix


class EszslConfig(BaseModel):
    """lam (JSON key "lambda") ridges the feature side, gamma the description side"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    gamma: float = Field(1.0, gt=0)
    lam: float = Field(1.0, gt=0, alias="lambda")


class EszslModel(BaseModel):
    """Learned compatibility V (d x d_hat)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["eszsl"] = "eszsl"
    v: np.ndarray
    config: EszslConfig
    vocab_hash: Optional[str] = None

    @property
    def feat_dim(self) -> int:
        return self.v.shape[0]

    @property
    def doc_dim(self) -> int:
        return self.v.shape[1]

    def scores(self, x: np.ndarray, z: DocMatrix) -> np.ndarray:
        """N x C_hat score matrix x^T V z_c"""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        check_features(x, self.feat_dim)
        check_docs(z, self.doc_dim)
        return x.T @ (self.v @ z.entries)


def eszsl_objective(train: TrainingSet, v: np.ndarray, config: EszslConfig) -> float:
    """
    Evaluate the baseline objective at V.

    Raises:
        DimensionMismatch: V does not match the data
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (train.feat_dim, train.doc_dim):
        raise DimensionMismatch(f"V has shape {v.shape}, expected {(train.feat_dim, train.doc_dim)}")
    x, y, s = train.x, train.y, train.z.entries
    vs = v @ s
    loss = np.sum((x.T @ vs - y) ** 2)
    return float(
        loss
        + config.lam * np.sum(vs ** 2)
        + config.gamma * np.sum((x.T @ v) ** 2)
        + config.lam * config.gamma * np.sum(v ** 2)
    )


def eszsl_gradient(train: TrainingSet, v: np.ndarray, config: EszslConfig) -> np.ndarray:
    """Gradient of eszsl_objective with respect to V"""
    x, y, s = train.x, train.y, train.z.entries
    left = x @ x.T + config.lam * np.eye(train.feat_dim)
    right = s @ s.T + config.gamma * np.eye(train.doc_dim)
    return 2.0 * (left @ v @ right - x @ y @ s.T)


def eszsl_fit(train: TrainingSet, config: EszslConfig, vocab_hash: Optional[str] = None) -> EszslModel:
    """Closed-form minimizer V = (XX^T + lam I)^{-1} X Y Z^T (ZZ^T + gamma I)^{-1}"""
    start_time = time.time()
    zsl_logger.log_component_start("eszsl.fit", gamma=config.gamma, lam=config.lam)

    x, y, s = train.x, train.y, train.z.entries
    left = linsolve.ridge_lstsq(x, config.lam, x @ (y @ s.T))  # d x d_hat
    v = linsolve.ridge_lstsq(s, config.gamma, left.T).T  # right solve, ZZ^T symmetric

    zsl_logger.log_component_complete("eszsl.fit", time.time() - start_time)
    return EszslModel(v=v, config=config, vocab_hash=vocab_hash)


def eszsl_predict(model: EszslModel, x: np.ndarray, unseen_z: DocMatrix) -> Tuple[int, np.ndarray]:
    """(best class index, score vector) for one feature vector; ties go to the lowest index"""
    x = np.asarray(x, dtype=np.float64).ravel()
    scores = model.scores(x.reshape(-1, 1), unseen_z)[0]
    return int(np.argmax(scores)), scores
