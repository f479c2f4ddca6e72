# orchestrator/pipeline_orchestrator.py
"""
Pipeline Orchestrator
Runs every CLI subcommand from loaded inputs to written artifacts

Pipeline (train / cv / eval):
1. Load the dataset manifest and verify its files exist
2. Read features and labels; split examples into seen / unseen classes
3. Build the vocabulary from seen-class documents only
4. Featurize seen and unseen class documents over that vocabulary
5. Fit, search or evaluate
6. Write the artifacts plus resolved_config.json into the output directory

Each writer is deterministic: the same inputs and seeds give byte-identical
files.
"""

import time
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from models.nszsl import (
    ModelWeights,
    importance_summary,
    importance_weights,
    top_words_per_class,
)
from models.training_set import LabeledSet, TrainingSet, one_hot
from orchestrator.cv_orchestrator import (
    CvPlan,
    Method,
    Metric,
    MethodConfig,
    evaluate,
    fit_method,
    grid_search,
    mean_and_std,
    run_trials,
)
from utils import dataio
from utils.dataio import DatasetManifest, OutputDirectory
from utils.errors import DimensionMismatch, EmptyTestSet, InvalidConfig
from utils.logger import zsl_logger
from utils.synthgen import SynthSpec, documents_for, generate
from utils.textpipe import DocMatrix, Vocabulary, build_vocabulary, featurize

RESOLVED_CONFIG = "resolved_config.json"


class LoadedDataset(BaseModel):
    """Manifest contents turned into seen / unseen matrices"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    manifest: DatasetManifest
    vocab: Vocabulary
    seen: TrainingSet
    unseen: LabeledSet


class PipelineOrchestrator:
    """
    Coordinates data loading, model fitting and artifact export

    One instance serves one CLI invocation; jobs sets the thread count
    for cross-validation.
    """

    def __init__(self, jobs: int = 1):
        self.jobs = max(1, int(jobs))
        zsl_logger.log_component_start("PipelineOrchestrator", jobs=self.jobs)

    # ------------------------------------------------------------------
    # loading
    # ------------------------------------------------------------------

    def load_dataset(self, manifest_path: str) -> LoadedDataset:
        """
        Read a manifest and everything it references.

        Raises:
            MissingFile, ParseError, UnknownClass, DimensionMismatch
        """
        manifest = dataio.load_manifest(manifest_path)
        seen_ids = list(manifest.seen_classes)
        unseen_ids = list(manifest.unseen_classes)

        x = dataio.load_features(manifest.resolve(manifest.features))
        entries = dataio.read_label_names(manifest.resolve(manifest.labels))
        indices = dataio.label_indices(entries, seen_ids + unseen_ids)
        if x.shape[1] != indices.size:
            raise DimensionMismatch(
                f"features have {x.shape[1]} columns but the label file has {indices.size} labels"
            )

        stopwords = None
        if manifest.stopwords:
            stopwords = dataio.load_stopwords(manifest.resolve(manifest.stopwords))

        docs = dataio.load_documents(manifest.resolve(manifest.documents), seen_ids + unseen_ids)
        vocab = build_vocabulary(docs[:len(seen_ids)], stopwords)
        z_all = featurize(docs, vocab, manifest.weighting, stopwords)

        seen_rows = indices < len(seen_ids)
        seen = TrainingSet(
            x=x[:, seen_rows],
            y=one_hot(indices[seen_rows], len(seen_ids)),
            z=z_all.select(seen_ids),
        )
        unseen = LabeledSet(
            x=x[:, ~seen_rows],
            labels=indices[~seen_rows] - len(seen_ids),
            z=z_all.select(unseen_ids),
        )
        zsl_logger.logger.info(
            f"📂 Loaded dataset: {seen.num_examples} seen / {unseen.num_examples} unseen examples",
            extra={
                "feat_dim": x.shape[0],
                "vocab_size": vocab.size,
                "seen_classes": len(seen_ids),
                "unseen_classes": len(unseen_ids),
            }
        )
        return LoadedDataset(manifest=manifest, vocab=vocab, seen=seen, unseen=unseen)

    @staticmethod
    def _check_vocab(model, vocab: Vocabulary):
        if model.vocab_hash is not None and model.vocab_hash != vocab.content_hash():
            raise DimensionMismatch("model was trained with a different vocabulary")

    @staticmethod
    def _write_resolved(out: OutputDirectory, command: str, settings: Dict[str, Any]) -> str:
        return out.save_file(RESOLVED_CONFIG, {"format_version": 1, "command": command, **settings})

    # ------------------------------------------------------------------
    # text side
    # ------------------------------------------------------------------

    def build_vocab(
        self,
        docs_dir: str,
        out_dir: str,
        stopwords_path: Optional[str] = None,
        class_ids: Optional[Sequence[str]] = None
    ) -> Vocabulary:
        """Vocabulary of the given (seen-class) documents -> vocabulary.json"""
        stopwords = dataio.load_stopwords(stopwords_path) if stopwords_path else None
        docs = dataio.load_documents(docs_dir, class_ids)
        vocab = build_vocabulary(docs, stopwords)

        out = OutputDirectory(out_dir)
        out.save_file(
            "vocabulary.json",
            dataio.vocabulary_document(vocab, stopwords_path or "default"),
        )
        self._write_resolved(out, "vocab", {
            "docs": str(docs_dir),
            "stopwords": stopwords_path,
            "classes": list(class_ids) if class_ids else None,
        })
        return vocab

    def featurize_docs(
        self,
        docs_dir: str,
        vocab_path: str,
        out_dir: str,
        weighting: Literal["binary", "tfidf"] = "binary",
        stopwords_path: Optional[str] = None,
        class_ids: Optional[Sequence[str]] = None
    ) -> DocMatrix:
        """Description matrix of the given documents -> doc_matrix.json"""
        vocab = dataio.load_vocabulary(vocab_path)
        stopwords = dataio.load_stopwords(stopwords_path) if stopwords_path else None
        docs = dataio.load_documents(docs_dir, class_ids)
        z = featurize(docs, vocab, weighting, stopwords)

        out = OutputDirectory(out_dir)
        out.save_file("doc_matrix.json", dataio.doc_matrix_document(z, vocab.content_hash()))
        self._write_resolved(out, "featurize", {
            "docs": str(docs_dir),
            "vocab": str(vocab_path),
            "weighting": weighting,
            "stopwords": stopwords_path,
            "classes": list(class_ids) if class_ids else None,
        })
        return z

    # ------------------------------------------------------------------
    # training and search
    # ------------------------------------------------------------------

    def _save_model(self, out: OutputDirectory, model, filename: str = "model.json"):
        out.save_file(filename, dataio.model_document(model))
        if isinstance(model, ModelWeights):
            dataio.save_trace_csv(out.file(filename.replace("model", "trace").replace(".json", ".csv")), model)

    def train(self, manifest_path: str, method: Method, config: MethodConfig, out_dir: str):
        """Fit on all seen classes -> model.json (+ trace.csv for nszsl)"""
        start_time = time.time()
        data = self.load_dataset(manifest_path)
        model = fit_method(method, data.seen, config, vocab_hash=data.vocab.content_hash())

        out = OutputDirectory(out_dir)
        self._save_model(out, model)
        out.save_file("vocabulary.json", dataio.vocabulary_document(data.vocab, data.manifest.stopwords or "default"))
        self._write_resolved(out, "train", {
            "manifest": str(manifest_path),
            "method": method,
            "config": config.model_dump(mode="json", by_alias=True),
        })
        zsl_logger.log_component_complete("train", time.time() - start_time, method=method)
        return model

    def cross_validate(
        self,
        manifest_path: str,
        method: Method,
        plan: CvPlan,
        base_config: MethodConfig,
        out_dir: str,
        trials: int = 1
    ):
        """
        Grid search on the seen classes, then retrain at the best cell.

        Writes cv_result.json, cv_cells.csv and model.json (+ trace.csv).
        With trials > 1 the whole protocol repeats with shifted seeds; each
        trial's model is written as model_trialNN.json and the unseen-class
        scores go to trial_report.json.
        """
        start_time = time.time()
        data = self.load_dataset(manifest_path)
        vocab_hash = data.vocab.content_hash()
        out = OutputDirectory(out_dir)

        if trials > 1:
            report = run_trials(
                data.seen,
                data.unseen,
                plan.model_copy(update={"num_trials": trials}),
                method,
                base_config,
                self.jobs,
                vocab_hash,
            )
            results = report.trials
            for t, result in enumerate(results):
                self._save_model(out, result.final_model, f"model_trial{t:02d}.json")
            out.save_file("trial_report.json", report.to_document())
        else:
            results = [grid_search(data.seen, plan, method, base_config, self.jobs, vocab_hash)]

        dataio.save_cv_result(out.file("cv_result.json"), out.file("cv_cells.csv"), results[0])
        self._save_model(out, results[0].final_model)
        out.save_file("vocabulary.json", dataio.vocabulary_document(data.vocab, data.manifest.stopwords or "default"))
        self._write_resolved(out, "cv", {
            "manifest": str(manifest_path),
            "method": method,
            "plan": plan.model_dump(mode="json"),
            "trials": trials,
            "base_config": base_config.model_dump(mode="json", by_alias=True),
        })
        zsl_logger.log_component_complete("cross_validate", time.time() - start_time, method=method)
        return results

    # ------------------------------------------------------------------
    # evaluation and analysis
    # ------------------------------------------------------------------

    def evaluate_models(
        self,
        model_paths: Sequence[str],
        manifest_path: str,
        metric: Metric = "top1",
        out_dir: Optional[str] = None
    ) -> Dict[str, Any]:
        """
        Score one or more models on the unseen classes.

        Returns:
            {"metric", "scores", "mean", "std"}; std is the sample std over models
        """
        data = self.load_dataset(manifest_path)
        if data.unseen.num_examples == 0:
            raise EmptyTestSet("manifest has no examples of unseen classes")

        scores: List[float] = []
        for path in model_paths:
            model = dataio.load_model(path)
            self._check_vocab(model, data.vocab)
            scores.append(evaluate(model, data.unseen.x, data.unseen.labels, data.unseen.z, metric))

        mean, std = mean_and_std(scores)
        report = {
            "format_version": 1,
            "kind": "evaluation",
            "metric": metric,
            "manifest": str(manifest_path),
            "models": [str(p) for p in model_paths],
            "scores": scores,
            "mean": mean,
            "std": std,
        }
        out = OutputDirectory(out_dir if out_dir else Path(model_paths[0]).parent)
        # eval_<metric>.json records its own inputs; resolved_config.json stays the training one
        out.save_file(f"eval_{metric}.json", report)
        return report

    def analyze(
        self,
        model_path: str,
        vocab_path: str,
        z_path: str,
        out_dir: str,
        k: int = 15
    ) -> Dict[str, Any]:
        """
        Importance weights -> importance.csv (index, word, weight),
        top words per class -> top_words.tsv, plus importance_summary.json
        """
        model = dataio.load_model(model_path)
        if not isinstance(model, ModelWeights):
            raise InvalidConfig("analyze needs an nszsl model; eszsl has no per-word factor")
        vocab = dataio.load_vocabulary(vocab_path)
        self._check_vocab(model, vocab)
        z, _ = dataio.load_doc_matrix(z_path)

        weights = importance_weights(model, vocab)
        table = top_words_per_class(model, vocab, z, k)
        summary = importance_summary(weights)

        out = OutputDirectory(out_dir)
        out.save_file("importance.csv", dataio.csv_text(
            ["index", "word", "weight"],
            ([i, word, float(w)] for i, (word, w) in enumerate(zip(vocab.terms, weights.values))),
        ))
        out.save_file("top_words.tsv", dataio.csv_text(
            ["class_id", "rank", "word", "weight"],
            ([class_id, r + 1, word, w] for class_id, pairs in table.items() for r, (word, w) in enumerate(pairs)),
            delimiter="\t",
        ))
        out.save_file("importance_summary.json", summary.model_dump(mode="json"))
        self._write_resolved(out, "analyze", {
            "model": str(model_path),
            "vocab": str(vocab_path),
            "doc_matrix": str(z_path),
            "k": k,
        })
        return {"summary": summary, "top_words": table}

    # ------------------------------------------------------------------
    # synthetic data
    # ------------------------------------------------------------------

    def synth(self, spec: SynthSpec, out_dir: str, fmt: Literal["csv", "binary"] = "csv") -> DatasetManifest:
        """
        Generate a planted-signal dataset with its manifest and ground truth
        (truth.json lists the informative words).
        """
        dataset = generate(spec)
        docs, words = documents_for(dataset)

        out = OutputDirectory(out_dir)
        features_name = "features.csv" if fmt == "csv" else "features.bin"
        x = np.concatenate([dataset.seen.x, dataset.unseen.x], axis=1)
        dataio.save_features(out.file(features_name), x, fmt)

        seen_ids = list(dataset.seen.class_ids)
        unseen_ids = list(dataset.unseen.z.class_ids)
        names = [seen_ids[i] for i in dataset.seen.labels] + [unseen_ids[i] for i in dataset.unseen.labels]
        dataio.save_labels(out.file("labels.txt"), names)
        dataio.save_documents(out.file("docs"), docs)

        manifest = DatasetManifest(
            features=features_name,
            labels="labels.txt",
            documents="docs",
            seen_classes=tuple(seen_ids),
            unseen_classes=tuple(unseen_ids),
        )
        dataio.save_manifest(out.file("manifest.json"), manifest)
        out.save_file("truth.json", {
            "format_version": 1,
            "kind": "synth_truth",
            "informative_words": [words[i] for i in np.flatnonzero(dataset.informative_mask)],
            "noise_words": [words[i] for i in np.flatnonzero(~dataset.informative_mask)],
        })
        self._write_resolved(out, "synth", {"spec": spec.model_dump(mode="json"), "format": fmt})
        return manifest
