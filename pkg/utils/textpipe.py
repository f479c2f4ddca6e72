# utils/textpipe.py
"""
Text pipeline: per-class documents -> bag-of-words class-description matrix

Documents are tokenized (lowercase, alphabetic runs of length >= 2, stop
words removed), the vocabulary is built from seen-class documents only,
and each class becomes one column of a d_hat x C matrix, either the
binarized word histogram or a TF-IDF weighting kept for comparison.

Tokenization and counting go through scikit-learn's CountVectorizer with a
pinned token pattern and stop list, so the same analyzer is used for the
vocabulary and for featurization.
"""

import hashlib
from functools import cached_property, lru_cache
from typing import Callable, FrozenSet, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from sklearn.feature_extraction.text import CountVectorizer

from resources.stopwords import DEFAULT_STOPWORDS
from utils.errors import AllZeroColumn, DimensionMismatch, EmptyVocabulary
from utils.logger import zsl_logger

# Unicode letters only: digits, underscore and punctuation act as separators
TOKEN_PATTERN = r"(?u)[^\W\d_]{2,}"

Weighting = Literal["binary", "tfidf"]
Document = Tuple[str, str]


class Vocabulary(BaseModel):
    """Ordered, immutable term list built from seen-class documents"""
    model_config = ConfigDict(frozen=True)

    terms: Tuple[str, ...]
    source: Tuple[str, ...] = ()

    @field_validator("terms")
    @classmethod
    def _check_terms(cls, terms: Tuple[str, ...]) -> Tuple[str, ...]:
        if len(set(terms)) != len(terms):
            raise ValueError("vocabulary terms must be unique")
        for term in terms:
            if not term or term != term.lower():
                raise ValueError(f"vocabulary term {term!r} must be non-empty lowercase")
        return terms

    @cached_property
    def index(self) -> dict:
        return {term: i for i, term in enumerate(self.terms)}

    @property
    def size(self) -> int:
        return len(self.terms)

    def content_hash(self) -> str:
        """sha256 over the newline-joined terms; ties models to their vocabulary"""
        return hashlib.sha256("\n".join(self.terms).encode("utf-8")).hexdigest()


class DocMatrix(BaseModel):
    """d_hat x C class-description matrix, one column per class"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray
    weighting: Weighting = "binary"
    class_ids: Tuple[str, ...]

    @model_validator(mode="after")
    def _check_entries(self) -> "DocMatrix":
        entries = self.entries
        if entries.ndim != 2:
            raise ValueError(f"entries must be 2-D, got shape {entries.shape}")
        if entries.shape[1] != len(self.class_ids):
            raise ValueError(
                f"entries have {entries.shape[1]} columns but {len(self.class_ids)} class ids"
            )
        if not np.all(np.isfinite(entries)):
            raise ValueError("entries must be finite")
        if self.weighting == "binary" and not np.all((entries == 0) | (entries == 1)):
            raise ValueError("binary weighting requires 0/1 entries")
        if self.weighting == "tfidf" and np.any(entries < 0):
            raise ValueError("tfidf weighting requires non-negative entries")
        return self

    @property
    def vocab_size(self) -> int:
        return self.entries.shape[0]

    @property
    def num_classes(self) -> int:
        return self.entries.shape[1]

    def select(self, class_ids: Sequence[str]) -> "DocMatrix":
        """Columns for the given classes, in the given order"""
        position = {cid: i for i, cid in enumerate(self.class_ids)}
        missing = [cid for cid in class_ids if cid not in position]
        if missing:
            raise DimensionMismatch(f"classes not in document matrix: {missing}")
        cols = [position[cid] for cid in class_ids]
        return DocMatrix(
            entries=self.entries[:, cols],
            weighting=self.weighting,
            class_ids=tuple(class_ids),
        )


@lru_cache(maxsize=8)
def _analyzer(stopwords: FrozenSet[str]) -> Callable[[str], List[str]]:
    vectorizer = CountVectorizer(
        lowercase=True,
        token_pattern=TOKEN_PATTERN,
        stop_words=sorted(stopwords),
    )
    return vectorizer.build_analyzer()


def tokenize(document: str, stopwords: Optional[Iterable[str]] = None) -> List[str]:
    """
    Split a document into lowercase word tokens.

    Args:
        document: Raw text, possibly empty
        stopwords: Stop list; the embedded default when None

    Returns:
        Tokens in document order, repetitions kept
    """
    stops = DEFAULT_STOPWORDS if stopwords is None else frozenset(w.lower() for w in stopwords)
    return _analyzer(stops)(document)


def build_vocabulary(
    seen_docs: Sequence[Document],
    stopwords: Optional[Iterable[str]] = None
) -> Vocabulary:
    """
    Build the lexicographically sorted vocabulary of seen-class documents.

    Args:
        seen_docs: (class_id, text) pairs of seen classes only
        stopwords: Stop list; the embedded default when None

    Raises:
        EmptyVocabulary: no token survives tokenization
        ValueError: no documents or duplicate class ids
    """
    if not seen_docs:
        raise ValueError("at least one seen-class document is required")
    class_ids = [cid for cid, _ in seen_docs]
    if len(set(class_ids)) != len(class_ids):
        raise ValueError("seen-class document ids must be unique")

    terms = set()
    for _, text in seen_docs:
        terms.update(tokenize(text, stopwords))

    if not terms:
        raise EmptyVocabulary(
            f"no tokens survive tokenization in {len(seen_docs)} seen-class document(s)"
        )

    vocab = Vocabulary(terms=tuple(sorted(terms)), source=tuple(class_ids))
    zsl_logger.logger.info(
        f"📚 Built vocabulary: {vocab.size} terms from {len(seen_docs)} seen classes",
        extra={"vocab_size": vocab.size, "num_docs": len(seen_docs)}
    )
    return vocab


def count_matrix(
    docs: Sequence[Document],
    vocab: Vocabulary,
    stopwords: Optional[Iterable[str]] = None
) -> np.ndarray:
    """Raw d_hat x C term counts; out-of-vocabulary tokens are dropped"""
    stops = DEFAULT_STOPWORDS if stopwords is None else frozenset(w.lower() for w in stopwords)
    vectorizer = CountVectorizer(analyzer=_analyzer(stops), vocabulary=vocab.index)
    counts = vectorizer.transform([text for _, text in docs])
    return np.asarray(counts.toarray().T, dtype=np.float64)


def featurize(
    docs: Sequence[Document],
    vocab: Vocabulary,
    weighting: Weighting = "binary",
    stopwords: Optional[Iterable[str]] = None
) -> DocMatrix:
    """
    Represent each class document over a fixed vocabulary.

    binary: entry (w, c) = 1 iff word w occurs in class c's document.
    tfidf:  count(w, c) * log(C / df(w)), df over the featurized set, then
            each column scaled to unit l2 norm.

    Raises:
        AllZeroColumn: a document has no (non-zero weighted) vocabulary word
    """
    if vocab.size == 0:
        raise EmptyVocabulary("vocabulary is empty")
    if not docs:
        raise ValueError("at least one document is required")

    class_ids = tuple(cid for cid, _ in docs)
    counts = count_matrix(docs, vocab, stopwords)

    if weighting == "binary":
        entries = (counts > 0).astype(np.float64)
    elif weighting == "tfidf":
        num_docs = counts.shape[1]
        df = (counts > 0).sum(axis=1)
        idf = np.zeros(counts.shape[0])
        present = df > 0
        idf[present] = np.log(num_docs / df[present])
        entries = counts * idf[:, None]
        norms = np.linalg.norm(entries, axis=0)
        nonzero = norms > 0
        entries[:, nonzero] = entries[:, nonzero] / norms[nonzero]
    else:
        raise ValueError(f"unknown weighting {weighting!r}")

    empty = np.flatnonzero(~np.any(entries != 0, axis=0))
    if empty.size:
        raise AllZeroColumn(class_ids[int(empty[0])])

    return DocMatrix(entries=entries, weighting=weighting, class_ids=class_ids)
