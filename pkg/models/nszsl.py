# models/nszsl.py
"""
Noise-suppressed zero-shot learning model

Learns a bilinear compatibility V = Wx^T Wz between image features x and
class descriptions z:

    min  ||X^T Wx^T Wz Z - Y||_F^2 + lambda1 ||Wx^T Wz Z||_F^2 + lambda2 ||Wz^T||_{2,1}

||Wz^T||_{2,1} is the sum of column l2 norms of Wz (one column per word), so
the regularizer shrinks whole word dimensions. Optimization alternates:

- Wz step: reweighted least squares. With D = diag(1 / (2 sqrt(||w_i||^2 + sigma)))
  the l2,1 term is majorized by lambda2 tr(Wz D Wz^T); each reweighted
  problem is a Sylvester equation, solved in the symmetric variable
  W~ = Wz D^{1/2}.
- Wx step: closed-form ridge solution.

Prediction scores a feature vector against each candidate class
description, x^T Wx^T Wz z_c, and picks the best.

The "frobenius" regularizer swaps the l2,1 term for lambda2 ||Wz||_F^2 and
serves as the ablation without noise suppression.
"""

import time
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.training_set import TrainingSet, check_docs, check_features
from utils import linsolve
from utils.errors import DimensionMismatch, NotPositiveDefinite, SingularGram
from utils.logger import zsl_logger
from utils.textpipe import DocMatrix, Vocabulary

SYLVESTER_RESIDUAL_TOL = 1e-8


class SolverConfig(BaseModel):
    """Hyperparameters and stopping rules for the alternating solver"""
    model_config = ConfigDict(frozen=True)

    lambda1: float = Field(1.0, gt=0)
    lambda2: float = Field(1.0, gt=0)
    sigma: float = Field(1e-6, gt=0)
    max_outer: int = Field(100, ge=1)
    max_inner: int = Field(50, ge=1)
    rel_tol: float = Field(1e-5, gt=0)
    seed: int = 0
    regularizer: Literal["l21", "frobenius"] = "l21"
    epsilon_ridge: float = Field(1e-8, gt=0)
    # Number of rows of Wx / Wz; None means the number of seen classes
    rank: Optional[int] = Field(None, ge=1)
    sylvester_path: Literal["auto", "eigen", "lowrank"] = "auto"
    check_residuals: bool = False


class ObjectiveTerms(BaseModel):
    """Exact objective value and its parts"""
    total: float
    loss: float
    reg_match: float
    reg_l21: float
    reg_frobenius: float


class TraceEntry(BaseModel):
    """Objective after one half-step of the alternation"""
    iteration: int
    half_step: Literal["wz", "wx"]
    total: float
    loss: float
    reg_match: float
    reg_l21: float
    reg_frobenius: float


class ModelWeights(BaseModel):
    """Learned factors Wx (m x d), Wz (m x d_hat) and run metadata"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["nszsl"] = "nszsl"
    wx: np.ndarray
    wz: np.ndarray
    config: SolverConfig
    trace: Tuple[TraceEntry, ...] = ()
    converged: bool = True
    rank_matches_classes: bool = True
    vocab_hash: Optional[str] = None

    @property
    def m(self) -> int:
        return self.wx.shape[0]

    @property
    def feat_dim(self) -> int:
        return self.wx.shape[1]

    @property
    def doc_dim(self) -> int:
        return self.wz.shape[1]

    def compatibility(self) -> np.ndarray:
        """V = Wx^T Wz (d x d_hat)"""
        return self.wx.T @ self.wz

    def scores(self, x: np.ndarray, z: DocMatrix) -> np.ndarray:
        """N x C_hat score matrix for feature columns x against classes z"""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        check_features(x, self.feat_dim)
        check_docs(z, self.doc_dim)
        class_embed = self.wz @ z.entries
        feat_embed = self.wx @ x
        return feat_embed.T @ class_embed


class ImportanceWeights(BaseModel):
    """Per-word relevance: l2 norm of each column of Wz"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    vocab: Optional[Vocabulary] = None


class ImportanceSummary(BaseModel):
    num_words: int
    near_zero: int
    zero_tol: float
    gini: float
    top_decile_share: float


# ----------------------------------------------------------------------------
# norms and objective
# ----------------------------------------------------------------------------

def column_norms(w: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(w, dtype=np.float64), axis=0)


def l21_norm(w: np.ndarray) -> float:
    """Sum of column l2 norms"""
    return float(column_norms(w).sum())


def smoothed_l21(w: np.ndarray, sigma: float) -> float:
    """sum_i sqrt(||w_i||^2 + sigma); within d_hat * sqrt(sigma) of l21_norm"""
    norms = column_norms(w)
    return float(np.sqrt(norms ** 2 + sigma).sum())


def update_d(wz: np.ndarray, sigma: float) -> np.ndarray:
    """Reweighting diagonal d_i = 1 / (2 sqrt(||w_i||^2 + sigma))"""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    norms = column_norms(wz)
    return 1.0 / (2.0 * np.sqrt(norms ** 2 + sigma))


def _check_dims(train: TrainingSet, wx: np.ndarray, wz: np.ndarray):
    if wx.ndim != 2 or wz.ndim != 2 or wx.shape[0] != wz.shape[0]:
        raise DimensionMismatch(f"Wx {wx.shape} and Wz {wz.shape} must share their row count")
    if wx.shape[1] != train.feat_dim:
        raise DimensionMismatch(f"Wx has {wx.shape[1]} columns, features have dimension {train.feat_dim}")
    if wz.shape[1] != train.doc_dim:
        raise DimensionMismatch(f"Wz has {wz.shape[1]} columns, documents have dimension {train.doc_dim}")


def objective_terms(
    train: TrainingSet,
    wx: np.ndarray,
    wz: np.ndarray,
    config: SolverConfig
) -> ObjectiveTerms:
    """Exact objective for explicit factors; total uses the configured regularizer"""
    _check_dims(train, wx, wz)
    class_embed = wz @ train.z.entries            # m x C
    fitted = (wx @ train.x).T @ class_embed       # N x C
    loss = float(np.sum((fitted - train.y) ** 2))
    reg_match = float(np.sum((wx.T @ class_embed) ** 2))
    reg_l21 = l21_norm(wz)
    reg_frobenius = float(np.sum(wz ** 2))
    reg = reg_l21 if config.regularizer == "l21" else reg_frobenius
    return ObjectiveTerms(
        total=loss + config.lambda1 * reg_match + config.lambda2 * reg,
        loss=loss,
        reg_match=reg_match,
        reg_l21=reg_l21,
        reg_frobenius=reg_frobenius,
    )


def objective(train: TrainingSet, w: ModelWeights) -> ObjectiveTerms:
    """
    Evaluate the training objective at a model.

    reg_l21 is the true l2,1 norm, not the smoothed surrogate.

    Raises:
        DimensionMismatch: model and data disagree
    """
    return objective_terms(train, w.wx, w.wz, w.config)


def smoothed_objective(
    train: TrainingSet,
    wx: np.ndarray,
    wz: np.ndarray,
    config: SolverConfig
) -> float:
    """The objective the solver descends: l2,1 replaced by its sigma-smoothed form"""
    terms = objective_terms(train, wx, wz, config)
    if config.regularizer == "l21":
        reg = smoothed_l21(wz, config.sigma)
    else:
        reg = terms.reg_frobenius
    return terms.loss + config.lambda1 * terms.reg_match + config.lambda2 * reg


def _relative_change(previous: float, current: float) -> float:
    return abs(previous - current) / max(abs(previous), np.finfo(float).tiny)


# ----------------------------------------------------------------------------
# Wz step
# ----------------------------------------------------------------------------

def _ridge_repair(gram: np.ndarray, epsilon_ridge: float) -> float:
    scale = float(np.trace(gram)) / gram.shape[0]
    return epsilon_ridge * (scale if scale > 0 else 1.0)


def _feature_gram_eig(
    train: TrainingSet,
    wx: np.ndarray,
    config: SolverConfig
) -> Tuple[np.ndarray, linsolve.SpdFactorization]:
    """P = Wx X and the eigendecomposition of G = P P^T + lambda1 Wx Wx^T"""
    p = wx @ train.x
    gram = p @ p.T + config.lambda1 * (wx @ wx.T)
    gram = 0.5 * (gram + gram.T)
    eig = linsolve.sym_eig(gram)
    if not eig.is_positive_definite():
        repaired = gram + _ridge_repair(gram, config.epsilon_ridge) * np.eye(gram.shape[0])
        eig = linsolve.sym_eig(repaired).require_positive_definite(NotPositiveDefinite)
        zsl_logger.logger.warning(
            "⚠️ Wx X X^T Wx^T + lambda1 Wx Wx^T was singular; ridge repair applied",
            extra={"epsilon_ridge": config.epsilon_ridge}
        )
    return p, eig


def _use_lowrank(config: SolverConfig, doc_dim: int, num_classes: int) -> bool:
    if config.sylvester_path == "auto":
        return doc_dim > num_classes
    return config.sylvester_path == "lowrank"


def solve_wz_with_trace(
    train: TrainingSet,
    wx: np.ndarray,
    config: SolverConfig,
    wz_init: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, List[float], bool]:
    """
    Minimize the objective over Wz with Wx fixed by iterative reweighting.

    Each iteration solves the Sylvester system with the current D, then
    refreshes D from the new Wz. D starts at the identity, or at the
    reweighting of wz_init when a previous Wz is supplied.

    Returns:
        (Wz, smoothed objective after every solve, converged flag)
    """
    wx = np.asarray(wx, dtype=np.float64)
    z = train.z.entries
    doc_dim, num_classes = z.shape
    if wx.shape[1] != train.feat_dim:
        raise DimensionMismatch(f"Wx has {wx.shape[1]} columns, features have dimension {train.feat_dim}")

    p, g_eig = _feature_gram_eig(train, wx, config)
    u, g = g_eig.eigenvectors, g_eig.eigenvalues
    a = (u * (config.lambda2 / g)) @ u.T
    a = 0.5 * (a + a.T)
    # G^{-1} P Y, m x C
    ginv_py = (u / g) @ (u.T @ (p @ train.y))

    frobenius = config.regularizer == "frobenius"
    if frobenius:
        d = np.ones(doc_dim)
    elif wz_init is not None:
        d = update_d(wz_init, config.sigma)
    else:
        d = np.ones(doc_dim)

    lowrank = _use_lowrank(config, doc_dim, num_classes)
    max_inner = 1 if frobenius else config.max_inner

    surrogate: List[float] = []
    wz = None
    converged = False
    for t in range(1, max_inner + 1):
        d_inv_half = 1.0 / np.sqrt(d)
        f = z * d_inv_half[:, None]               # D^{-1/2} Z, d_hat x C
        c_sym = ginv_py @ f.T                     # G^{-1} P Y Z^T D^{-1/2}

        if lowrank:
            w_sym = linsolve.solve_sylvester_lowrank(a, f, c_sym)
        else:
            w_sym = linsolve.solve_sylvester_spd(a, f @ f.T, c_sym)

        if config.check_residuals:
            residual = linsolve.sylvester_residual(a, f @ f.T, c_sym, w_sym)
            if residual > SYLVESTER_RESIDUAL_TOL:
                zsl_logger.logger.warning(
                    f"⚠️ Sylvester residual {residual:.3e} above {SYLVESTER_RESIDUAL_TOL:.0e}",
                    extra={"inner_iteration": t, "residual": residual}
                )

        wz = w_sym * d_inv_half[None, :]
        value = smoothed_objective(train, wx, wz, config)
        surrogate.append(value)
        zsl_logger.log_iteration("solve_wz", t, value)

        if frobenius:
            converged = True
            break
        if t >= 2 and _relative_change(surrogate[-2], value) < config.rel_tol:
            converged = True
            break
        d = update_d(wz, config.sigma)

    if not converged:
        zsl_logger.logger.warning(
            f"⚠️ solve_wz hit max_inner={config.max_inner} without converging",
            extra={"max_inner": config.max_inner, "last_objective": surrogate[-1]}
        )
    return wz, surrogate, converged


def solve_wz(
    train: TrainingSet,
    wx: np.ndarray,
    config: SolverConfig,
    wz_init: Optional[np.ndarray] = None
) -> np.ndarray:
    """Wz minimizing the objective for fixed Wx (see solve_wz_with_trace)"""
    wz, _, _ = solve_wz_with_trace(train, wx, config, wz_init)
    return wz


# ----------------------------------------------------------------------------
# Wx step
# ----------------------------------------------------------------------------

def solve_wx(train: TrainingSet, wz: np.ndarray, config: SolverConfig) -> np.ndarray:
    """
    Closed-form Wx for fixed Wz:

        Wx^T = (X X^T + lambda1 I)^{-1} X Y Z^T Wz^T (Wz Z Z^T Wz^T)^{-1}

    Raises:
        SingularGram: Wz Z Z^T Wz^T singular even after ridge repair
    """
    wz = np.asarray(wz, dtype=np.float64)
    if wz.shape[1] != train.doc_dim:
        raise DimensionMismatch(f"Wz has {wz.shape[1]} columns, documents have dimension {train.doc_dim}")

    class_embed = wz @ train.z.entries                      # m x C
    left = linsolve.ridge_lstsq(train.x, config.lambda1, train.x @ (train.y @ class_embed.T))  # d x m

    gram = class_embed @ class_embed.T
    try:
        return linsolve.solve_spd(gram, left.T)
    except NotPositiveDefinite:
        pass

    if not np.trace(gram) > 0:
        raise SingularGram("Wz Z Z^T Wz^T is zero; every class embedding vanished")
    repaired = gram + _ridge_repair(gram, config.epsilon_ridge) * np.eye(gram.shape[0])
    try:
        wx = linsolve.solve_spd(repaired, left.T)
    except NotPositiveDefinite as e:
        raise SingularGram(f"Wz Z Z^T Wz^T is singular beyond ridge repair: {e}") from e
    zsl_logger.logger.warning(
        "⚠️ Wz Z Z^T Wz^T was singular; ridge repair applied",
        extra={"epsilon_ridge": config.epsilon_ridge}
    )
    return wx


# ----------------------------------------------------------------------------
# alternation
# ----------------------------------------------------------------------------

def init_wx(rank: int, feat_dim: int, seed: int) -> np.ndarray:
    """Gaussian Wx with standard deviation 1 / sqrt(d)"""
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, 1.0 / np.sqrt(feat_dim), size=(rank, feat_dim))


def _trace_entry(
    train: TrainingSet,
    wx: np.ndarray,
    wz: np.ndarray,
    config: SolverConfig,
    iteration: int,
    half_step: str
) -> TraceEntry:
    terms = objective_terms(train, wx, wz, config)
    return TraceEntry(
        iteration=iteration,
        half_step=half_step,
        total=smoothed_objective(train, wx, wz, config),
        loss=terms.loss,
        reg_match=terms.reg_match,
        reg_l21=terms.reg_l21,
        reg_frobenius=terms.reg_frobenius,
    )


def fit(
    train: TrainingSet,
    config: SolverConfig,
    vocab_hash: Optional[str] = None
) -> ModelWeights:
    """
    Alternate Wz and Wx steps until the smoothed objective settles.

    The trace holds the smoothed objective after every half-step. Two
    runs with the same config (seed included) give identical weights.

    Args:
        train: Seen-class training data
        config: Solver hyperparameters
        vocab_hash: Optional hash of the vocabulary behind train.z

    Returns:
        ModelWeights; converged is False if max_outer was reached
    """
    start_time = time.time()
    rank = config.rank or train.num_classes
    zsl_logger.log_component_start(
        "nszsl.fit",
        lambda1=config.lambda1,
        lambda2=config.lambda2,
        regularizer=config.regularizer,
        rank=rank,
        feat_dim=train.feat_dim,
        doc_dim=train.doc_dim,
        num_classes=train.num_classes,
        num_examples=train.num_examples,
    )

    wx = init_wx(rank, train.feat_dim, config.seed)
    wz = None
    trace: List[TraceEntry] = []
    converged = False
    previous = None

    for t in range(1, config.max_outer + 1):
        wz, _, _ = solve_wz_with_trace(train, wx, config, wz_init=wz)
        trace.append(_trace_entry(train, wx, wz, config, t, "wz"))

        wx = solve_wx(train, wz, config)
        entry = _trace_entry(train, wx, wz, config, t, "wx")
        trace.append(entry)
        zsl_logger.log_iteration("nszsl.fit", t, entry.total, loss=entry.loss)

        if previous is not None and _relative_change(previous, entry.total) < config.rel_tol:
            converged = True
            break
        previous = entry.total

    if not converged:
        zsl_logger.logger.warning(
            f"⚠️ nszsl.fit hit max_outer={config.max_outer} without converging",
            extra={"max_outer": config.max_outer}
        )

    model = ModelWeights(
        wx=wx,
        wz=wz,
        config=config,
        trace=tuple(trace),
        converged=converged,
        rank_matches_classes=rank == train.num_classes,
        vocab_hash=vocab_hash,
    )
    zsl_logger.log_component_complete(
        "nszsl.fit",
        time.time() - start_time,
        iterations=trace[-1].iteration,
        objective=trace[-1].total,
        converged=converged,
    )
    return model


# ----------------------------------------------------------------------------
# prediction
# ----------------------------------------------------------------------------

def _rank_scores(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score, lowest index first among ties"""
    return np.argsort(-scores, kind="stable")


def predict(model: ModelWeights, x: np.ndarray, unseen_z: DocMatrix) -> Tuple[int, np.ndarray]:
    """
    Best candidate class for one feature vector.

    Returns:
        (class index into unseen_z, score vector of length C_hat)
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    scores = model.scores(x.reshape(-1, 1), unseen_z)[0]
    return int(np.argmax(scores)), scores


def predict_topk(model: ModelWeights, x: np.ndarray, unseen_z: DocMatrix, k: int) -> List[int]:
    """The k highest-scoring classes, best first"""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _, scores = predict(model, x, unseen_z)
    return [int(i) for i in _rank_scores(scores)[:k]]


# ----------------------------------------------------------------------------
# analysis
# ----------------------------------------------------------------------------

def importance_weights(model: ModelWeights, vocab: Optional[Vocabulary] = None) -> ImportanceWeights:
    """Column l2 norms of Wz, one per vocabulary word"""
    if vocab is not None and vocab.size != model.doc_dim:
        raise DimensionMismatch(f"vocabulary has {vocab.size} words, model expects {model.doc_dim}")
    return ImportanceWeights(values=column_norms(model.wz), vocab=vocab)


def gini_coefficient(values: np.ndarray) -> float:
    """Gini coefficient of non-negative values; 0 = uniform, -> 1 = concentrated"""
    x = np.sort(np.asarray(values, dtype=np.float64).ravel())
    n = x.size
    total = x.sum()
    if n == 0 or total <= 0:
        return 0.0
    ranks = np.arange(1, n + 1)
    return float((2.0 * np.sum(ranks * x)) / (n * total) - (n + 1.0) / n)


def importance_summary(weights: ImportanceWeights, zero_tol: float = 1e-6) -> ImportanceSummary:
    """How concentrated the importance weights are"""
    values = weights.values
    top = float(values.max()) if values.size else 0.0
    near_zero = int(np.sum(values <= zero_tol * top)) if top > 0 else int(values.size)
    total = float(values.sum())
    decile = max(1, int(np.ceil(0.1 * values.size))) if values.size else 0
    top_share = float(np.sort(values)[::-1][:decile].sum() / total) if total > 0 else 0.0
    return ImportanceSummary(
        num_words=int(values.size),
        near_zero=near_zero,
        zero_tol=zero_tol,
        gini=gini_coefficient(values),
        top_decile_share=top_share,
    )


def top_words_per_class(
    model: ModelWeights,
    vocab: Vocabulary,
    z: DocMatrix,
    k: int = 15
) -> Dict[str, List[Tuple[str, float]]]:
    """
    Rank the words present in each class description by importance weight.

    Returns:
        class_id -> up to k (word, weight) pairs, heaviest first, ties by
        vocabulary order
    """
    weights = importance_weights(model, vocab).values
    check_docs(z, model.doc_dim)
    table: Dict[str, List[Tuple[str, float]]] = {}
    for c, class_id in enumerate(z.class_ids):
        present = np.flatnonzero(z.entries[:, c] != 0)
        order = present[np.lexsort((present, -weights[present]))]
        table[class_id] = [(vocab.terms[i], float(weights[i])) for i in order[:k]]
    return table
