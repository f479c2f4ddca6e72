# utils/dataio.py
"""
Ingestion and persistence for features, labels, documents, models and results

Formats (documented byte-for-byte in docs/FORMATS.md):
- feature matrices: CSV with a "#dims d=<rows> n=<cols>" header, or the
  little-endian binary "NZSL" container (magic, u32 version, u64 rows,
  u64 cols, raw float64 row-major)
- labels: one class name per line
- documents: a directory of UTF-8 text files, file stem = class id
- models, vocabularies, document matrices, manifests: JSON with a
  format_version key

Writers never add timestamps, so identical inputs give identical bytes.
"""

import csv
import io
import json
import math
import re
import struct
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from models.eszsl import EszslConfig, EszslModel
from models.nszsl import ModelWeights, SolverConfig, TraceEntry
from models.training_set import one_hot
from utils.errors import (
    MissingFile,
    NonFiniteValue,
    ParseError,
    SchemaVersionMismatch,
    UnknownClass,
)
from utils.logger import zsl_logger
from utils.textpipe import DocMatrix, Vocabulary

if TYPE_CHECKING:
    from orchestrator.cv_orchestrator import CvResult

FORMAT_VERSION = 1
BINARY_MAGIC = b"NZSL"
BINARY_HEADER = struct.Struct("<4sIQQ")
CSV_HEADER = re.compile(r"^#dims d=(\d+) n=(\d+)\s*$")

Model = Union[ModelWeights, EszslModel]
PathLike = Union[str, Path]


class OutputDirectory:
    """Writes run artifacts into one output directory"""

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)

    def file(self, filename: str) -> Path:
        return self.path / filename

    def save_file(self, filename: str, content, auto_serialize: bool = True) -> str:
        """
        Save a file with automatic JSON serialization

        Args:
            filename: Name of file to save (e.g., "cv_result.json")
            content: Content to write (string, dict, or list)
            auto_serialize: If True, serialize dicts/lists to indented JSON

        Returns:
            str: Full path to saved file
        """
        filepath = self.path / filename

        if auto_serialize and isinstance(content, (dict, list)):
            file_content = dumps_json(content)
        elif isinstance(content, str):
            file_content = content
        else:
            file_content = str(content)

        with open(filepath, 'w', encoding='utf-8', newline='') as f:
            f.write(file_content)

        zsl_logger.logger.info(
            f"💾 Saved file: {filename}",
            extra={
                "filename": str(filepath),
                "size": len(file_content),
                "type": type(content).__name__
            }
        )
        return str(filepath)


def dumps_json(content: Any) -> str:
    """Indented JSON; floats use the shortest round-trip repr"""
    return json.dumps(content, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _read_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path=str(path), line=e.lineno) from e
    except UnicodeDecodeError as e:
        raise ParseError(f"not UTF-8: {e}", path=str(path)) from e


def _check_version(data: Any, path: PathLike, kind: Optional[str] = None):
    if not isinstance(data, dict):
        raise ParseError("expected a JSON object", path=str(path))
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: format_version {version!r}, this build reads {FORMAT_VERSION}"
        )
    if kind is not None and data.get("kind") != kind:
        raise SchemaVersionMismatch(f"{path}: kind {data.get('kind')!r}, expected {kind!r}")


def _matrix(rows: Any, path: PathLike, name: str) -> np.ndarray:
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2:
        raise ParseError(f"{name} must be a nested row array", path=str(path))
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{path}: {name} contains non-finite entries")
    return arr


# ----------------------------------------------------------------------------
# feature matrices
# ----------------------------------------------------------------------------

def save_features(path: PathLike, x: np.ndarray, fmt: Literal["csv", "binary"] = "csv") -> str:
    """Write a d x N matrix as CSV (17 significant digits) or binary (bit-exact)"""
    x = np.asarray(x, dtype=np.float64)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = x.shape
    if fmt == "binary":
        with open(path, 'wb') as f:
            f.write(BINARY_HEADER.pack(BINARY_MAGIC, FORMAT_VERSION, rows, cols))
            f.write(np.ascontiguousarray(x, dtype='<f8').tobytes())
    elif fmt == "csv":
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(f"#dims d={rows} n={cols}\n")
            for row in x:
                f.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    else:
        raise ValueError(f"unknown feature format {fmt!r}")
    return str(path)


def _load_binary_features(path: Path, raw: bytes) -> np.ndarray:
    if len(raw) < BINARY_HEADER.size:
        raise ParseError("truncated binary header", path=str(path))
    magic, version, rows, cols = BINARY_HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise SchemaVersionMismatch(f"{path}: binary version {version}, expected {FORMAT_VERSION}")
    if rows < 1 or cols < 1:
        raise ParseError(f"invalid dimensions {rows}x{cols}", path=str(path))
    expected = BINARY_HEADER.size + 8 * rows * cols
    if len(raw) != expected:
        raise ParseError(f"payload has {len(raw)} bytes, expected {expected}", path=str(path))
    x = np.frombuffer(raw, dtype='<f8', offset=BINARY_HEADER.size).reshape(rows, cols)
    x = x.astype(np.float64)
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x.ravel()))[0])
        raise NonFiniteValue(f"{path}: non-finite value at entry ({bad // cols}, {bad % cols})")
    return x


def _load_csv_features(path: Path, text: str) -> np.ndarray:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("empty feature file", path=str(path), line=1)
    header = CSV_HEADER.match(lines[0].strip())
    if not header:
        raise ParseError("expected header '#dims d=<rows> n=<cols>'", path=str(path), line=1)
    rows, cols = int(header.group(1)), int(header.group(2))
    if rows < 1 or cols < 1:
        raise ParseError(f"invalid dimensions {rows}x{cols}", path=str(path), line=1)

    body = [(i + 1, line) for i, line in enumerate(lines) if i > 0 and line.strip()]
    if len(body) != rows:
        raise ParseError(f"expected {rows} data rows, found {len(body)}", path=str(path))

    x = np.empty((rows, cols), dtype=np.float64)
    for r, (lineno, line) in enumerate(body):
        fields = line.split(",")
        if len(fields) != cols:
            raise ParseError(f"expected {cols} values, found {len(fields)}", path=str(path), line=lineno)
        for c, field in enumerate(fields):
            try:
                value = float(field)
            except ValueError:
                raise ParseError(f"bad number {field.strip()!r} in column {c + 1}", path=str(path), line=lineno)
            if not math.isfinite(value):
                raise NonFiniteValue(f"{path}:{lineno}: non-finite value in column {c + 1}")
            x[r, c] = value
    return x


def load_features(path: PathLike) -> np.ndarray:
    """
    Read a d x N feature matrix, detecting the format from the magic bytes.

    Raises:
        ParseError: malformed file (with line number for CSV)
        NonFiniteValue: NaN or infinity present
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist")
    raw = path.read_bytes()
    if raw.startswith(BINARY_MAGIC):
        return _load_binary_features(path, raw)
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as e:
        raise ParseError(f"not UTF-8 text and no binary magic: {e}", path=str(path)) from e
    return _load_csv_features(path, text)


# ----------------------------------------------------------------------------
# labels
# ----------------------------------------------------------------------------

def read_label_names(path: PathLike) -> List[Tuple[int, str]]:
    """(line number, class name) for every non-blank line"""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist")
    with open(path, 'r', encoding='utf-8') as f:
        return [(i, line.strip()) for i, line in enumerate(f, start=1) if line.strip()]


def save_labels(path: PathLike, names: Iterable[str]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        for name in names:
            f.write(f"{name}\n")
    return str(path)


def label_indices(entries: Sequence[Tuple[int, str]], class_list: Sequence[str]) -> np.ndarray:
    position = {name: i for i, name in enumerate(class_list)}
    indices = []
    for lineno, name in entries:
        if name not in position:
            raise UnknownClass(name, lineno)
        indices.append(position[name])
    return np.asarray(indices, dtype=np.int64)


def load_labels(path: PathLike, class_list: Sequence[str]) -> np.ndarray:
    """
    One-hot N x C indicator for a label file.

    Raises:
        UnknownClass: a label is not in class_list
    """
    return one_hot(label_indices(read_label_names(path), class_list), len(class_list))


# ----------------------------------------------------------------------------
# documents and stop words
# ----------------------------------------------------------------------------

def load_documents(docs_dir: PathLike, class_ids: Optional[Sequence[str]] = None) -> List[Tuple[str, str]]:
    """
    Read one UTF-8 document per class from a directory.

    Args:
        docs_dir: Directory holding <class_id>.<ext> files
        class_ids: Classes to load, in this order; all files sorted by name when None
    """
    docs_dir = Path(docs_dir)
    if not docs_dir.is_dir():
        raise MissingFile(f"{docs_dir} is not a directory")
    files = {p.stem: p for p in sorted(docs_dir.iterdir()) if p.is_file() and not p.name.startswith(".")}
    wanted = sorted(files) if class_ids is None else list(class_ids)
    docs = []
    for class_id in wanted:
        if class_id not in files:
            raise MissingFile(f"no document for class '{class_id}' in {docs_dir}")
        try:
            docs.append((class_id, files[class_id].read_text(encoding='utf-8')))
        except UnicodeDecodeError as e:
            raise ParseError(f"not UTF-8: {e}", path=str(files[class_id])) from e
    return docs


def save_documents(docs_dir: PathLike, docs: Iterable[Tuple[str, str]]) -> str:
    docs_dir = Path(docs_dir)
    docs_dir.mkdir(parents=True, exist_ok=True)
    for class_id, text in docs:
        with open(docs_dir / f"{class_id}.txt", 'w', encoding='utf-8', newline='') as f:
            f.write(text + "\n")
    return str(docs_dir)


def load_stopwords(path: PathLike) -> frozenset:
    """One word per line; '#' starts a comment"""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist")
    words = set()
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            word = line.partition("#")[0].strip().lower()
            if word:
                words.add(word)
    return frozenset(words)


# ----------------------------------------------------------------------------
# vocabulary and document matrices
# ----------------------------------------------------------------------------

def vocabulary_document(vocab: Vocabulary, stopwords: str = "default") -> Dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "vocabulary",
        "hash": vocab.content_hash(),
        "stopwords": stopwords,
        "source": list(vocab.source),
        "terms": list(vocab.terms),
    }


def load_vocabulary(path: PathLike) -> Vocabulary:
    data = _read_json(path)
    _check_version(data, path, "vocabulary")
    try:
        return Vocabulary(terms=tuple(data["terms"]), source=tuple(data.get("source", ())))
    except (KeyError, TypeError, ValidationError) as e:
        raise ParseError(f"invalid vocabulary: {e}", path=str(path)) from e


def doc_matrix_document(z: DocMatrix, vocab_hash: Optional[str] = None) -> Dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "doc_matrix",
        "weighting": z.weighting,
        "vocab_hash": vocab_hash,
        "class_ids": list(z.class_ids),
        "entries": z.entries.tolist(),
    }


def load_doc_matrix(path: PathLike) -> Tuple[DocMatrix, Optional[str]]:
    """(DocMatrix, vocabulary hash it was built with)"""
    data = _read_json(path)
    _check_version(data, path, "doc_matrix")
    try:
        z = DocMatrix(
            entries=_matrix(data["entries"], path, "entries"),
            weighting=data["weighting"],
            class_ids=tuple(data["class_ids"]),
        )
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise ParseError(f"invalid document matrix: {e}", path=str(path)) from e
    return z, data.get("vocab_hash")


# ----------------------------------------------------------------------------
# models
# ----------------------------------------------------------------------------

class _NszslDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int
    kind: Literal["nszsl"]
    dims: Dict[str, int]
    config: SolverConfig
    wx: List[List[float]]
    wz: List[List[float]]
    trace: List[TraceEntry]
    converged: bool
    rank_matches_classes: bool
    vocab_hash: Optional[str] = None


class _EszslDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int
    kind: Literal["eszsl"]
    dims: Dict[str, int]
    config: EszslConfig
    v: List[List[float]]
    vocab_hash: Optional[str] = None


def model_document(model: Model) -> Dict[str, Any]:
    if isinstance(model, ModelWeights):
        return {
            "format_version": FORMAT_VERSION,
            "kind": "nszsl",
            "dims": {"m": model.m, "d": model.feat_dim, "d_hat": model.doc_dim},
            "config": model.config.model_dump(mode="json"),
            "wx": model.wx.tolist(),
            "wz": model.wz.tolist(),
            "trace": [entry.model_dump(mode="json") for entry in model.trace],
            "converged": model.converged,
            "rank_matches_classes": model.rank_matches_classes,
            "vocab_hash": model.vocab_hash,
        }
    return {
        "format_version": FORMAT_VERSION,
        "kind": "eszsl",
        "dims": {"d": model.feat_dim, "d_hat": model.doc_dim},
        "config": model.config.model_dump(mode="json", by_alias=True),
        "v": model.v.tolist(),
        "vocab_hash": model.vocab_hash,
    }


def save_model(path: PathLike, model: Model) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(dumps_json(model_document(model)))
    return str(path)


def load_model(path: PathLike) -> Model:
    """
    Read a model saved by save_model; predictions reproduce bit-exactly.

    Raises:
        ParseError: unreadable or structurally invalid JSON
        SchemaVersionMismatch: unknown format_version or kind
    """
    data = _read_json(path)
    _check_version(data, path)
    kind = data.get("kind")
    try:
        if kind == "nszsl":
            doc = _NszslDocument.model_validate(data)
            wx = _matrix(doc.wx, path, "wx")
            wz = _matrix(doc.wz, path, "wz")
            if wx.shape[0] != wz.shape[0]:
                raise ParseError("wx and wz row counts differ", path=str(path))
            return ModelWeights(
                wx=wx,
                wz=wz,
                config=doc.config,
                trace=tuple(doc.trace),
                converged=doc.converged,
                rank_matches_classes=doc.rank_matches_classes,
                vocab_hash=doc.vocab_hash,
            )
        if kind == "eszsl":
            doc = _EszslDocument.model_validate(data)
            return EszslModel(v=_matrix(doc.v, path, "v"), config=doc.config, vocab_hash=doc.vocab_hash)
    except ValidationError as e:
        raise ParseError(f"invalid model document: {e.errors()[0].get('msg', e)}", path=str(path)) from e
    raise SchemaVersionMismatch(f"{path}: unknown model kind {kind!r}")


# ----------------------------------------------------------------------------
# manifests
# ----------------------------------------------------------------------------

class DatasetManifest(BaseModel):
    """Where a dataset lives and how its classes split into seen / unseen"""
    model_config = ConfigDict(frozen=True)

    format_version: int = FORMAT_VERSION
    features: str
    labels: str
    documents: str
    seen_classes: Tuple[str, ...] = Field(min_length=2)
    unseen_classes: Tuple[str, ...] = Field(min_length=1)
    stopwords: Optional[str] = None
    weighting: Literal["binary", "tfidf"] = "binary"
    base_dir: str = "."

    @model_validator(mode="after")
    def _check_classes(self) -> "DatasetManifest":
        overlap = set(self.seen_classes) & set(self.unseen_classes)
        if overlap:
            raise ValueError(f"seen and unseen classes overlap: {sorted(overlap)}")
        if len(set(self.seen_classes)) != len(self.seen_classes):
            raise ValueError("duplicate seen class")
        if len(set(self.unseen_classes)) != len(self.unseen_classes):
            raise ValueError("duplicate unseen class")
        return self

    def resolve(self, relative: str) -> Path:
        p = Path(relative)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def check_files(self):
        for name, rel in (("features", self.features), ("labels", self.labels)):
            if not self.resolve(rel).is_file():
                raise MissingFile(f"manifest {name} file {self.resolve(rel)} does not exist")
        if not self.resolve(self.documents).is_dir():
            raise MissingFile(f"manifest documents directory {self.resolve(self.documents)} does not exist")
        if self.stopwords and not self.resolve(self.stopwords).is_file():
            raise MissingFile(f"manifest stopwords file {self.resolve(self.stopwords)} does not exist")


def load_manifest(path: PathLike) -> DatasetManifest:
    data = _read_json(path)
    _check_version(data, path)
    data = {k: v for k, v in data.items() if k != "base_dir"}
    try:
        manifest = DatasetManifest(**data, base_dir=str(Path(path).parent))
    except (TypeError, ValidationError) as e:
        raise ParseError(f"invalid manifest: {e}", path=str(path)) from e
    manifest.check_files()
    return manifest


def manifest_document(manifest: DatasetManifest) -> Dict[str, Any]:
    return manifest.model_dump(mode="json", exclude={"base_dir"})


# ----------------------------------------------------------------------------
# tables
# ----------------------------------------------------------------------------

def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]], delimiter: str = ",") -> str:
    """CSV/TSV text with '\\n' line endings and repr-exact floats"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def trace_csv(model: ModelWeights) -> str:
    return csv_text(
        ["iteration", "half_step", "total", "loss", "reg_match", "reg_l21", "reg_frobenius"],
        (
            [e.iteration, e.half_step, e.total, e.loss, e.reg_match, e.reg_l21, e.reg_frobenius]
            for e in model.trace
        ),
    )


# ----------------------------------------------------------------------------
# file writers
# ----------------------------------------------------------------------------

def _write_text(path: PathLike, text: str) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    return str(path)


def save_vocabulary(path: PathLike, vocab: Vocabulary, stopwords: str = "default") -> str:
    return _write_text(path, dumps_json(vocabulary_document(vocab, stopwords)))


def save_doc_matrix(path: PathLike, z: DocMatrix, vocab_hash: Optional[str] = None) -> str:
    return _write_text(path, dumps_json(doc_matrix_document(z, vocab_hash)))


def save_manifest(path: PathLike, manifest: DatasetManifest) -> str:
    return _write_text(path, dumps_json(manifest_document(manifest)))


def save_trace_csv(path: PathLike, model: ModelWeights) -> str:
    return _write_text(path, trace_csv(model))


def save_cv_result(json_path: PathLike, csv_path: PathLike, result: "CvResult") -> Tuple[str, str]:
    """CvResult as JSON (chosen cell, full table, failures) plus the cell table as CSV"""
    header = [result.param_names[0], result.param_names[1], "mean_accuracy", "status"]
    rows = [[c.param1, c.param2, c.mean_accuracy, c.status] for c in result.cells]
    return (
        _write_text(json_path, dumps_json(result.to_document())),
        _write_text(csv_path, csv_text(header, rows)),
    )
