# app.py
"""
Command-line entry point for the zero-shot toolkit

Subcommands: vocab, featurize, train, cv, eval, analyze, synth.
Run `python app.py <command> --help` for flags; docs/MANUAL.md has the
full manual.

Exit codes: 0 when the requested artifacts were written, 1 on any error
(one line on stderr: "error: <Category>: <message>"), 2 on bad usage.
"""

import argparse
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from models.eszsl import EszslConfig
from models.nszsl import SolverConfig
from orchestrator.cv_orchestrator import CvPlan
from orchestrator.pipeline_orchestrator import PipelineOrchestrator
from utils.errors import ZslError
from utils.logger import zsl_logger
from utils.synthgen import SynthSpec
from utils.worker_pool import translate_error

NSZSL_ONLY = ("lambda1", "lambda2", "sigma", "max_outer", "max_inner", "tol", "regularizer", "rank", "sylvester_path")
ESZSL_ONLY = ("gamma", "lam")


# Load configuration
class Config:
    def __init__(self):
        self.log_level = os.getenv('ZSL_LOG_LEVEL', 'INFO').upper()
        self.log_dir = os.getenv('ZSL_LOG_DIR') or None
        try:
            self.jobs = int(os.getenv('ZSL_JOBS', '1'))
        except ValueError:
            zsl_logger.logger.warning("⚠️ ZSL_JOBS is not an integer, using 1")
            self.jobs = 1


def _add_method_flags(p: argparse.ArgumentParser):
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--method", choices=["nszsl", "eszsl"], default="nszsl")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    solver = p.add_argument_group("nszsl solver")
    solver.add_argument("--lambda1", type=float)
    solver.add_argument("--lambda2", type=float)
    solver.add_argument("--sigma", type=float)
    solver.add_argument("--max-outer", dest="max_outer", type=int)
    solver.add_argument("--max-inner", dest="max_inner", type=int)
    solver.add_argument("--tol", type=float, help="relative objective change that stops the solver")
    solver.add_argument("--regularizer", choices=["l21", "frobenius"])
    solver.add_argument("--rank", type=int, help="rows of Wx / Wz (default: number of seen classes)")
    solver.add_argument("--sylvester-path", dest="sylvester_path", choices=["auto", "eigen", "lowrank"])

    baseline = p.add_argument_group("eszsl baseline")
    baseline.add_argument("--gamma", type=float)
    baseline.add_argument("--lambda", dest="lam", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nszsl",
        description="Noise-suppressed zero-shot learning from class documents",
    )
    parser.add_argument("--log-level", dest="log_level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", help="build the vocabulary of seen-class documents")
    p.add_argument("--docs", required=True, help="directory of <class_id>.txt documents")
    p.add_argument("--stopwords", help="stop list file (default: embedded English list)")
    p.add_argument("--class", dest="classes", action="append", help="restrict to this class (repeatable)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("featurize", help="encode class documents over a vocabulary")
    p.add_argument("--docs", required=True)
    p.add_argument("--vocab", required=True, help="vocabulary.json")
    p.add_argument("--weighting", choices=["binary", "tfidf"], default="binary")
    p.add_argument("--stopwords")
    p.add_argument("--class", dest="classes", action="append")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit a model on all seen classes")
    _add_method_flags(p)

    p = sub.add_parser("cv", help="class-wise cross-validated grid search")
    _add_method_flags(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--holdout", type=float, default=0.2, help="fraction of seen classes held out per fold")
    p.add_argument("--grid-min", dest="grid_min", type=int, default=-2, help="smallest exponent b of 10^b")
    p.add_argument("--grid-max", dest="grid_max", type=int, default=6)
    p.add_argument("--metric", choices=["top1", "top5", "mean_per_class_accuracy"], default="top1")
    p.add_argument("--trials", type=int, default=1, help="repeat search + retrain with shifted seeds")
    p.add_argument("--jobs", type=int, help="worker threads (default: ZSL_JOBS or 1)")

    p = sub.add_parser("eval", help="score models on the unseen classes")
    p.add_argument("--model", dest="models", action="append", required=True, help="model JSON (repeatable)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--metric", choices=["top1", "top5", "mean_per_class_accuracy"], default="top1")
    p.add_argument("--out", help="output directory (default: next to the first model)")

    p = sub.add_parser("analyze", help="export word importance weights")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--doc-matrix", dest="doc_matrix", required=True, help="doc_matrix.json from featurize")
    p.add_argument("--k", type=int, default=15, help="top words per class")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate a planted-signal dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-seen", dest="num_seen", type=int, default=40)
    p.add_argument("--num-unseen", dest="num_unseen", type=int, default=10)
    p.add_argument("--feat-dim", dest="feat_dim", type=int, default=64)
    p.add_argument("--doc-dim", dest="doc_dim", type=int, default=300)
    p.add_argument("--informative-dims", dest="informative_dims", type=int, default=50)
    p.add_argument("--samples-per-class", dest="samples_per_class", type=int, default=30)
    p.add_argument("--flip-prob", dest="doc_flip_prob", type=float, default=0.05)
    p.add_argument("--noise-std", dest="feature_noise_std", type=float, default=0.1)
    p.add_argument("--format", dest="fmt", choices=["csv", "binary"], default="csv")

    return parser


def method_config(args: argparse.Namespace, parser: argparse.ArgumentParser):
    """SolverConfig or EszslConfig from flags; unset flags keep the defaults"""
    given = lambda names: {n: getattr(args, n) for n in names if getattr(args, n) is not None}
    if args.method == "nszsl":
        if given(ESZSL_ONLY):
            parser.error("--gamma / --lambda apply to --method eszsl only")
        values = given(NSZSL_ONLY)
        if "tol" in values:
            values["rel_tol"] = values.pop("tol")
        return SolverConfig(seed=args.seed, **values)
    if given(NSZSL_ONLY):
        parser.error(f"nszsl solver flags do not apply to --method eszsl: {sorted(given(NSZSL_ONLY))}")
    return EszslConfig(**given(ESZSL_ONLY))


def run(args: argparse.Namespace, parser: argparse.ArgumentParser, config: Config) -> int:
    if args.command == "cv":
        jobs = args.jobs if args.jobs is not None else config.jobs
    else:
        jobs = 1
    orchestrator = PipelineOrchestrator(jobs=jobs)

    if args.command == "vocab":
        vocab = orchestrator.build_vocab(args.docs, args.out, args.stopwords, args.classes)
        print(f"vocabulary: {vocab.size} terms")

    elif args.command == "featurize":
        z = orchestrator.featurize_docs(args.docs, args.vocab, args.out, args.weighting, args.stopwords, args.classes)
        print(f"doc matrix: {z.vocab_size} x {z.num_classes}")

    elif args.command == "train":
        model = orchestrator.train(args.manifest, args.method, method_config(args, parser), args.out)
        if args.method == "nszsl":
            print(f"objective: {model.trace[-1].total:.6g} after {model.trace[-1].iteration} iterations"
                  f"{'' if model.converged else ' (not converged)'}")
        else:
            print("eszsl model written")

    elif args.command == "cv":
        plan = CvPlan(
            num_folds=args.folds,
            holdout_fraction=args.holdout,
            grid_exponents=tuple(range(args.grid_min, args.grid_max + 1)),
            metric=args.metric,
            seed=args.seed,
        )
        if args.trials < 1:
            parser.error("--trials must be >= 1")
        results = orchestrator.cross_validate(
            args.manifest, args.method, plan, method_config(args, parser), args.out, args.trials
        )
        best = results[0]
        print(f"best {best.param_names[0]}={best.best_param1:g} {best.param_names[1]}={best.best_param2:g} "
              f"validation {plan.metric}={best.best_accuracy:.4f}")

    elif args.command == "eval":
        report = orchestrator.evaluate_models(args.models, args.manifest, args.metric, args.out)
        print(f"{args.metric}: {report['mean']:.4f} ± {report['std']:.4f}")

    elif args.command == "analyze":
        result = orchestrator.analyze(args.model, args.vocab, args.doc_matrix, args.out, args.k)
        summary = result["summary"]
        print(f"words: {summary.num_words}, near zero: {summary.near_zero}, gini: {summary.gini:.4f}")

    elif args.command == "synth":
        spec = SynthSpec(
            num_seen=args.num_seen,
            num_unseen=args.num_unseen,
            feat_dim=args.feat_dim,
            doc_dim=args.doc_dim,
            informative_dims=args.informative_dims,
            samples_per_class=args.samples_per_class,
            doc_flip_prob=args.doc_flip_prob,
            feature_noise_std=args.feature_noise_std,
            seed=args.seed,
        )
        orchestrator.synth(spec, args.out, args.fmt)
        print(f"dataset written to {args.out}")

    return 0


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    config = Config()
    parser = build_parser()
    args = parser.parse_args(argv)

    zsl_logger.configure(args.log_level or config.log_level, config.log_dir)

    try:
        return run(args, parser, config)
    except Exception as e:
        error = translate_error(e)
        if isinstance(error, ZslError):
            zsl_logger.logger.debug(error.cli_line())
            print(error.cli_line(), file=sys.stderr)
        else:
            zsl_logger.logger.opt(exception=e).debug("Unexpected failure in {}", args.command)
            message = " ".join(f"{type(e).__name__}: {e}".splitlines())
            print(f"error: Internal: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
