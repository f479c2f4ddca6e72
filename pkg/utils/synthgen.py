# utils/synthgen.py
"""
Planted-signal synthetic zero-shot benchmark

Each class owns a distinct binary pattern over k informative description
dimensions, published unchanged in its description. The remaining
d_hat - k dimensions are noise words, each present independently with
probability doc_flip_prob. Features are generated from the informative
rows of the description alone,

    x = M z_c[informative] + noise,      M: d x k Gaussian, shared by all classes,

so informative words determine the features and noise words do not.
"""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.training_set import LabeledSet, TrainingSet, one_hot
from utils.logger import zsl_logger
from utils.textpipe import DocMatrix

MAX_PATTERN_DRAWS = 1000


class SynthSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_seen: int = Field(40, ge=2)
    num_unseen: int = Field(10, ge=1)
    feat_dim: int = Field(64, ge=1)
    doc_dim: int = Field(300, ge=1)
    informative_dims: int = Field(50, ge=1)
    samples_per_class: int = Field(30, ge=1)
    doc_flip_prob: float = Field(0.05, ge=0.0, lt=1.0)
    feature_noise_std: float = Field(0.1, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_dims(self) -> "SynthSpec":
        if self.informative_dims > self.doc_dim:
            raise ValueError("informative_dims must not exceed doc_dim")
        if 2 ** min(self.informative_dims, 62) - 1 < self.num_seen + self.num_unseen:
            raise ValueError("too few informative dims for distinct non-empty class patterns")
        return self


class SynthDataset(BaseModel):
    """Generated benchmark plus its ground truth"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    seen: TrainingSet
    unseen: LabeledSet
    informative_mask: np.ndarray
    spec: SynthSpec


def class_name(index: int) -> str:
    return f"class{_letters(index)}"


def word_name(index: int) -> str:
    """Alphabetic pseudo-word for description dimension `index` ("zqaaa", "zqaab", ...)"""
    return f"zq{_letters(index)}"


def _letters(index: int, width: int = 3) -> str:
    chars = []
    for _ in range(width):
        chars.append(chr(ord("a") + index % 26))
        index //= 26
    if index:
        raise ValueError("index too large for pseudo-word width")
    return "".join(reversed(chars))


def _distinct_patterns(rng: np.random.Generator, count: int, k: int) -> np.ndarray:
    patterns: List[np.ndarray] = []
    seen = set()
    draws = 0
    while len(patterns) < count:
        draws += 1
        if draws > MAX_PATTERN_DRAWS * count:
            raise RuntimeError("could not draw distinct class patterns")
        p = rng.integers(0, 2, size=k).astype(np.float64)
        key = p.tobytes()
        if not p.any() or key in seen:
            continue
        seen.add(key)
        patterns.append(p)
    return np.stack(patterns, axis=1)   # k x count


def generate(spec: SynthSpec) -> SynthDataset:
    """
    Draw a seen training set, an unseen test set and the informative mask.

    Deterministic given spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    num_classes = spec.num_seen + spec.num_unseen
    k, d_hat = spec.informative_dims, spec.doc_dim

    informative = np.sort(rng.choice(d_hat, size=k, replace=False))
    mask = np.zeros(d_hat, dtype=bool)
    mask[informative] = True

    patterns = _distinct_patterns(rng, num_classes, k)                  # k x (C + C_hat)

    docs = np.zeros((d_hat, num_classes))
    docs[informative] = patterns
    docs[~mask] = rng.random((d_hat - k, num_classes)) < spec.doc_flip_prob
    # every description needs at least one word
    for c in np.flatnonzero(~docs.any(axis=0)):
        docs[informative[0], c] = 1.0

    mixing = rng.normal(0.0, 1.0 / np.sqrt(k), size=(spec.feat_dim, k))
    labels = np.repeat(np.arange(num_classes), spec.samples_per_class)
    clean = mixing @ docs[informative][:, labels]
    x = clean + spec.feature_noise_std * rng.normal(size=clean.shape)

    names = tuple(class_name(c) for c in range(num_classes))
    seen_cols = np.arange(spec.num_seen)
    seen_rows = labels < spec.num_seen

    seen = TrainingSet(
        x=x[:, seen_rows],
        y=one_hot(labels[seen_rows], spec.num_seen),
        z=DocMatrix(entries=docs[:, seen_cols], class_ids=names[:spec.num_seen]),
    )
    unseen = LabeledSet(
        x=x[:, ~seen_rows],
        labels=labels[~seen_rows] - spec.num_seen,
        z=DocMatrix(entries=docs[:, spec.num_seen:], class_ids=names[spec.num_seen:]),
    )

    zsl_logger.logger.info(
        f"🧪 Generated synthetic benchmark: {spec.num_seen} seen / {spec.num_unseen} unseen classes",
        extra={"seed": spec.seed, "doc_dim": d_hat, "informative_dims": k}
    )
    return SynthDataset(seen=seen, unseen=unseen, informative_mask=mask, spec=spec)


def documents_for(dataset: SynthDataset) -> Tuple[List[Tuple[str, str]], List[str]]:
    """
    Text documents reproducing the description matrices word for word.

    Returns:
        ((class_id, text) for seen then unseen classes, words by dimension)
    """
    words = [word_name(i) for i in range(dataset.spec.doc_dim)]
    docs = []
    for z in (dataset.seen.z, dataset.unseen.z):
        for c, class_id in enumerate(z.class_ids):
            present = np.flatnonzero(z.entries[:, c])
            docs.append((class_id, " ".join(words[i] for i in present)))
    return docs, words
