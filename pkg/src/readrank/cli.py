"""Command-line frontend for reproducible ranking experiments.

Exit codes: 0 on success, 1 on validation errors (bad flags, malformed
input files, contract violations), 2 on runtime failures such as training
divergence. All randomness flows from --seed, so any invocation repeated
with the same flags writes identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .corpus import featurize, load_corpus, load_embeddings, save_corpus, save_embeddings
from .errors import ReadrankError, ValidationError
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    attach_task_metrics,
    load_featurized,
    rankings_for,
    run_cross_corpus,
    run_cross_lingual,
    run_cv,
)
from .metrics import MetricReport, evaluate_corpus
from .models import (
    COMBINERS,
    MODEL_FAMILIES,
    ModelBundle,
    TrainConfig,
    load_model,
    save_model,
    train_classifier,
    train_nprm,
    train_ols,
    train_ranksvm,
    train_regressor_mlp,
)
from .pairs import build_pairset, dump_pairset
from .ranker import RankingInput, ScoredRanking, rank_by_scores, rank_nprm, rank_ranksvm
from .stats import RANK_METRICS, compare_models
from .synth import JITTER, LEVEL_GAP, TOPIC_SCALE, generate_corpus

log = logging.getLogger(__name__)

CONFIG_ENV_VAR = "READRANK_CONFIG"


class _Parser(argparse.ArgumentParser):
    """argparse that exits with code 1 (not 2) on bad flags."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(doc: dict) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False))


def _load_eval_corpus(args):
    corpus = load_corpus(args.corpus)
    table = load_embeddings(args.emb) if getattr(args, "emb", None) else None
    return featurize(corpus, table)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    if args.emb_out and args.vocab <= 0:
        raise ValidationError("--emb-out requires --vocab > 0")
    if args.vocab > 0 and not args.emb_out:
        raise ValidationError("--vocab requires --emb-out to receive the table")
    corpus, truth, table = generate_corpus(
        n_slugs=args.slugs,
        levels_per_slug=args.levels,
        dim=args.dim,
        noise=args.noise,
        seed=args.seed,
        space_seed=args.space_seed,
        rotation=args.rotation,
        lang=args.lang,
        slug_prefix=args.slug_prefix,
        topic_scale=args.topic_scale,
        level_gap=args.level_gap,
        jitter=args.jitter,
        slug_noise=args.slug_noise,
        vocab_size=args.vocab,
        tokens_per_doc=args.tokens_per_doc,
    )
    out = Path(args.output)
    save_corpus(corpus, out)
    truth_path = out.with_suffix(out.suffix + ".truth.json")
    truth_path.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written = {"corpus": str(out), "truth": str(truth_path),
               "documents": len(corpus.documents), "slugs": len(corpus.slugs)}
    if table is not None:
        save_embeddings(table, args.emb_out)
        written["embeddings"] = str(args.emb_out)
    _emit(written)
    return 0


def cmd_featurize(args) -> int:
    corpus = _load_eval_corpus(args)
    save_corpus(corpus, args.output)
    log.info("wrote %d featurized documents to %s", len(corpus.documents), args.output)
    return 0


def cmd_pairs(args) -> int:
    corpus = _load_eval_corpus(args)
    pairset = build_pairset(corpus, m=args.m, seed=args.seed)
    dump_pairset(pairset, corpus, args.output)
    log.info("wrote %d pairs from %d slugs to %s", len(pairset), len(pairset.source_slugs), args.output)
    return 0


def cmd_train(args) -> int:
    corpus = _load_eval_corpus(args)
    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        hidden=args.hidden,
        l2=args.l2,
        combiner=args.combiner,
    )
    history: list[float] = []
    if args.model in ("nprm", "ranksvm"):
        pairset = build_pairset(corpus, m=args.m, seed=args.seed)
        trainer = train_nprm if args.model == "nprm" else train_ranksvm
        params, history = trainer(pairset, corpus, cfg)
    elif args.model == "ols":
        params = train_ols(corpus, list(corpus.documents))
    elif args.model == "mlp-regressor":
        params, history = train_regressor_mlp(corpus, list(corpus.documents), cfg)
    else:
        params, history = train_classifier(corpus, list(corpus.documents), cfg)
    for epoch, loss in enumerate(history, start=1):
        log.info("epoch %d: mean loss %.6f", epoch, loss)
    bundle = ModelBundle(
        family=args.model,
        params=params,
        dim=corpus.dim,
        seed=args.seed,
        config={"train": cfg.to_dict(), "m": args.m},
        loss_history=history,
    )
    save_model(bundle, args.output)
    _emit({"model": args.model, "output": str(args.output), "dim": corpus.dim,
           "config": bundle.config})
    return 0


def _ranking_for_docs(bundle: ModelBundle, corpus, doc_ids: list[str]) -> ScoredRanking:
    rinput = RankingInput(doc_ids, corpus)
    if bundle.family == "nprm":
        return rank_nprm(bundle.params, rinput)
    if bundle.family == "ranksvm":
        return rank_ranksvm(bundle.params, rinput)
    from .harness import _doc_scores

    scores = _doc_scores(bundle.family, bundle.params, corpus, doc_ids)
    return rank_by_scores({d: float(v) for d, v in zip(doc_ids, scores)})


def cmd_rank(args) -> int:
    bundle = load_model(args.model)
    corpus = _load_eval_corpus(args)
    if bool(args.docs) == bool(args.slug):
        raise ValidationError("give exactly one of --docs or --slug")
    if args.docs:
        doc_ids = [d.strip() for d in args.docs.split(",") if d.strip()]
    else:
        slug = corpus.slugs.get(args.slug)
        if slug is None:
            raise ValidationError(f"unknown slug '{args.slug}'")
        doc_ids = list(slug.members)
    ranking = _ranking_for_docs(bundle, corpus, doc_ids)
    _emit({"input": doc_ids, "scores": ranking.scores, "order": ranking.order})
    return 0


def _rankings_from_file(path: str, corpus) -> dict[str, ScoredRanking]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid rankings JSON: {exc}") from exc
    entries = doc if isinstance(doc, list) else [doc]
    rankings: dict[str, ScoredRanking] = {}
    for entry in entries:
        if not isinstance(entry, dict) or "scores" not in entry:
            raise ValidationError("each ranking needs a 'scores' object")
        scores = {str(k): float(v) for k, v in entry["scores"].items()}
        slugs = {corpus.documents[d].slug_id for d in scores if d in corpus.documents}
        if len(slugs) != 1 or any(d not in corpus.documents for d in scores):
            raise ValidationError("a supplied ranking must cover documents of exactly one known slug")
        slug_id = slugs.pop()
        members = set(corpus.slugs[slug_id].members)
        if set(scores) != members:
            raise ValidationError(f"ranking for slug '{slug_id}' must cover all of its documents")
        rankings[slug_id] = rank_by_scores(scores)
    if not rankings:
        raise ValidationError("no rankings supplied")
    return rankings


def cmd_evaluate(args) -> int:
    if bool(args.model) == bool(args.rankings):
        raise ValidationError("give exactly one of --model or --rankings")
    corpus = _load_eval_corpus(args)
    config: dict = {"corpus": args.corpus, "gain": args.gain, "log_base": args.log_base}
    if args.model:
        bundle = load_model(args.model)
        if bundle.dim and corpus.dim and bundle.dim != corpus.dim:
            raise ValidationError(f"model dimension {bundle.dim} != corpus dimension {corpus.dim}")
        slug_ids = corpus.rankable_slugs()
        rankings = rankings_for(bundle.family, bundle.params, corpus, slug_ids)
        report = evaluate_corpus(rankings, corpus, gain=args.gain, log_base=args.log_base)
        attach_task_metrics(bundle.family, bundle.params, corpus, slug_ids, report)
        config.update({"model": args.model, "family": bundle.family})
    else:
        rankings = _rankings_from_file(args.rankings, corpus)
        report = evaluate_corpus(rankings, corpus, slugs=sorted(rankings),
                                 gain=args.gain, log_base=args.log_base)
        config.update({"rankings": args.rankings})
    exp = ExperimentReport(mode="evaluate", config=config, metrics=report)
    from .reporting import format_summary_table, write_bundle

    paths = write_bundle(exp, args.output, figures=not args.no_figures,
                         name=config.get("family", "supplied-rankings"))
    print(format_summary_table([(config.get("family", "rankings"), report.aggregates)]), end="")
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0


def _experiment_config(args, needs_test: bool) -> ExperimentConfig:
    base: dict = {}
    cfg_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    if cfg_path:
        try:
            base = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {cfg_path}: {exc}") from exc
        if not isinstance(base, dict):
            raise ValidationError(f"config {cfg_path} must hold a JSON object")
    train = dict(base.get("train", {}))
    for key in ("epochs", "learning_rate", "batch_size", "hidden", "l2", "combiner"):
        value = getattr(args, key, None)
        if value is not None:
            train[key] = value
    overrides = {
        "family": args.model,
        "corpus": args.corpus,
        "embeddings": args.emb,
        "test_corpus": getattr(args, "test_corpus", None),
        "test_embeddings": getattr(args, "test_emb", None),
        "k": getattr(args, "k", None),
        "m": args.m,
        "seed": args.seed,
        "gain": args.gain,
        "log_base": args.log_base,
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    if train:
        base["train"] = train
    cfg = ExperimentConfig.from_dict(base)
    if not cfg.corpus:
        raise ValidationError("a training corpus is required (--corpus or config)")
    if needs_test and not cfg.test_corpus:
        raise ValidationError("a test corpus is required (--test-corpus or config)")
    return cfg


def _finish_experiment(exp: ExperimentReport, args) -> int:
    from .reporting import format_summary_table, write_bundle

    paths = write_bundle(exp, args.output, figures=not args.no_figures,
                         name=f"{exp.config['family']} ({exp.mode})")
    print(format_summary_table([(exp.config["family"], exp.metrics.aggregates)]), end="")
    for warning in exp.warnings:
        print(f"warning: {warning}")
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_cv(args) -> int:
    cfg = _experiment_config(args, needs_test=False)
    return _finish_experiment(run_cv(cfg), args)


def cmd_cross(args) -> int:
    cfg = _experiment_config(args, needs_test=True)
    return _finish_experiment(run_cross_corpus(cfg), args)


def cmd_crossling(args) -> int:
    cfg = _experiment_config(args, needs_test=True)
    return _finish_experiment(run_cross_lingual(cfg), args)


def _report_from_file(path: str) -> MetricReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read report {path}: {exc}") from exc
    if isinstance(doc, dict) and "report" in doc:
        doc = doc["report"]
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: not a metric report")
    return MetricReport.from_dict(doc)


def cmd_compare(args) -> int:
    report_a = _report_from_file(args.report_a)
    report_b = _report_from_file(args.report_b)
    result = compare_models(report_a, report_b, args.metric)
    _emit({
        "metric": args.metric,
        "W": result.statistic,
        "n": result.n_effective,
        "p": result.p_two_sided,
        "method": result.method,
        "n_zero": result.n_zero,
        "n_dropped_undefined": result.n_dropped_undefined,
    })
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_corpus_flags(p, emb_required: bool = False) -> None:
    p.add_argument("--corpus", required=True, help="corpus JSONL file")
    p.add_argument("--emb", required=emb_required, help="embedding table file")


def _add_train_flags(p, with_defaults: bool) -> None:
    d = TrainConfig()
    get = (lambda v: v) if with_defaults else (lambda v: None)
    p.add_argument("--epochs", type=int, default=get(d.epochs))
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=get(d.learning_rate))
    p.add_argument("--batch-size", dest="batch_size", type=int, default=get(d.batch_size))
    p.add_argument("--hidden", type=int, default=get(d.hidden))
    p.add_argument("--l2", type=float, default=get(d.l2))
    p.add_argument("--combiner", choices=COMBINERS, default=get(d.combiner))


def _add_eval_flags(p, with_defaults: bool = True) -> None:
    get = (lambda v: v) if with_defaults else (lambda v: None)
    p.add_argument("--gain", choices=("linear", "exp"), default=get("linear"))
    p.add_argument("--log-base", dest="log_base", type=float, default=get(2.0))


def _add_experiment_flags(p, needs_test: bool) -> None:
    p.add_argument("--config", help=f"experiment config JSON (default: ${CONFIG_ENV_VAR})")
    p.add_argument("--model", choices=MODEL_FAMILIES, help="model family")
    p.add_argument("--corpus", help="training corpus JSONL")
    p.add_argument("--emb", help="embedding table for the training corpus")
    if needs_test:
        p.add_argument("--test-corpus", dest="test_corpus", help="held-out test corpus JSONL")
        p.add_argument("--test-emb", dest="test_emb", help="embedding table for the test corpus")
    else:
        p.add_argument("-k", type=int, help="number of folds")
    p.add_argument("-m", type=int, help="levels retained per slug for pair construction")
    p.add_argument("--seed", type=int, help="master experiment seed")
    _add_train_flags(p, with_defaults=False)
    _add_eval_flags(p, with_defaults=False)
    p.add_argument("-o", "--output", required=True, help="output directory for the report bundle")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="readrank",
                     description="pairwise learning-to-rank toolkit for readability")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic leveled corpus")
    p.add_argument("--slugs", type=int, required=True)
    p.add_argument("--levels", type=int, required=True, help="reading levels per slug")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.1, help="level noise sigma")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--space-seed", dest="space_seed", type=int, default=None,
                   help="seed of the shared latent space (default: --seed)")
    p.add_argument("--rotation", default=None,
                   help="degrees of latent-direction rotation, or 'random' for an unaligned space")
    p.add_argument("--lang", default="en")
    p.add_argument("--slug-prefix", dest="slug_prefix", default="slug")
    p.add_argument("--topic-scale", dest="topic_scale", type=float, default=TOPIC_SCALE)
    p.add_argument("--level-gap", dest="level_gap", type=float, default=LEVEL_GAP)
    p.add_argument("--jitter", type=float, default=JITTER)
    p.add_argument("--slug-noise", dest="slug_noise", type=float, default=0.0,
                   help="sigma of a shared per-slug level offset (annotator miscalibration)")
    p.add_argument("--vocab", type=int, default=0,
                   help="emit token texts + an embedding table of this size instead of vectors")
    p.add_argument("--tokens-per-doc", dest="tokens_per_doc", type=int, default=40)
    p.add_argument("-o", "--output", required=True, help="corpus JSONL to write")
    p.add_argument("--emb-out", dest="emb_out", help="embedding table to write (with --vocab)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", help="fill in document vectors by embedding averaging")
    _add_corpus_flags(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("pairs", help="dump the ordered training pairs for audit")
    _add_corpus_flags(p)
    p.add_argument("-m", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("train", help="train one model on a corpus")
    p.add_argument("--model", choices=MODEL_FAMILIES, required=True)
    _add_corpus_flags(p)
    p.add_argument("-m", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p, with_defaults=True)
    p.add_argument("-o", "--output", required=True, help="model JSON to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="rank a list of documents with a trained model")
    p.add_argument("--model", required=True, help="model JSON")
    _add_corpus_flags(p)
    p.add_argument("--docs", help="comma-separated doc_ids to rank")
    p.add_argument("--slug", help="rank the members of this slug")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("evaluate", help="score per-slug rankings against ground truth")
    p.add_argument("--model", help="model JSON (ranks every rankable slug)")
    p.add_argument("--rankings", help="rankings JSON from 'rank' ('-' for stdin)")
    _add_corpus_flags(p)
    _add_eval_flags(p)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="k-fold cross-validation over slugs")
    _add_experiment_flags(p, needs_test=False)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("cross", help="train on one corpus, evaluate on another")
    _add_experiment_flags(p, needs_test=True)
    p.set_defaults(func=cmd_cross)

    p = sub.add_parser("crossling", help="zero-shot transfer over aligned embedding spaces")
    _add_experiment_flags(p, needs_test=True)
    p.set_defaults(func=cmd_crossling)

    p = sub.add_parser("compare", help="Wilcoxon signed-rank test between two reports")
    p.add_argument("--report-a", dest="report_a", required=True)
    p.add_argument("--report-b", dest="report_b", required=True)
    p.add_argument("--metric", choices=RANK_METRICS, required=True)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ReadrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to exit 2
        log.exception("unexpected failure: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
