"""satdscan command line.

Subcommands: extract, train, evaluate, analyze, serve-check. Exit codes:
0 success, 1 fatal error, 2 completed with diagnostics. Every flag can
also be set from a key=value config file (--config); flags given on the
command line win over the file.

Environment overrides: SATDSCAN_ENDPOINT supplies the remote backend URL,
SATDSCAN_DATASET the default dataset path, SATDSCAN_KERNELS the numeric
kernel selection (auto/numba/numpy).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from satdscan.analyzer import (
    AnalyzeConfig,
    SelectionCriteria,
    analyze_repo,
    check_selection,
    cohort_report,
    compare_cohorts,
    metadata_from_file,
    render_csv,
    render_markdown,
    sarif_records,
)
from satdscan.classifier import (
    NgramModel,
    PatternRuleSet,
    TrainConfig,
    train_ngram,
)
from satdscan.classifier.patterns import DEFAULT_RULES
from satdscan.corpus import SplitSpec, load_dataset, split
from satdscan.evaluation import (
    GRID_LEARNING_RATES,
    GRID_WEIGHT_DECAYS,
    NgramTrainer,
    confusion,
    metrics,
    report_markdown,
    run_cross_project,
    run_intra_project,
)
from satdscan.extractor import ScanConfig, scan_repository
from satdscan.labels import UnknownLabel
from satdscan.preprocess import NO_STOP_WORDS, StopWordPolicy
from satdscan.remote import InferenceEndpoint, RemoteBackend, handshake

log = logging.getLogger("satdscan")

ENDPOINT_ENV = "SATDSCAN_ENDPOINT"
DATASET_ENV = "SATDSCAN_DATASET"

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_DIAGNOSTICS = 2


def _coerce(value: str):
    text = value.strip()
    low = text.lower()
    if low in ("true", "yes"):
        return True
    if low in ("false", "no"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def parse_config_file(path) -> dict:
    """key = value per line; '#' starts a comment; booleans are true/false."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = _coerce(value)
    return values


def make_backend(selector: str):
    """Backend selectors: patterns[:RULES.json], ngram:MODEL.json, remote[:URL]."""
    kind, _, arg = selector.partition(":")
    if kind == "patterns":
        return PatternRuleSet.from_file(arg) if arg else DEFAULT_RULES
    if kind == "ngram":
        if not arg:
            raise ValueError("ngram backend needs a model path: ngram:PATH")
        return NgramModel.load(arg)
    if kind == "remote":
        url = arg or os.environ.get(ENDPOINT_ENV, "")
        if not url:
            raise ValueError(f"remote backend needs a URL (or set {ENDPOINT_ENV})")
        return RemoteBackend.connect(InferenceEndpoint(base_url=url))
    raise ValueError(f"unknown backend selector {selector!r}")


def _open_out(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _emit(text: str, path):
    out = _open_out(path)
    try:
        out.write(text)
        if not text.endswith("\n"):
            out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()


def _dataset_path(opts) -> str:
    path = opts.get("dataset") or os.environ.get(DATASET_ENV, "")
    if not path:
        raise ValueError(f"no dataset given (use --dataset or {DATASET_ENV})")
    return path


def _train_config(opts) -> TrainConfig:
    return TrainConfig(
        learning_rate=opts["lr"],
        weight_decay=opts["weight_decay"],
        batch_size=opts["batch_size"],
        max_epochs=opts["epochs"],
        patience=opts["patience"],
        min_frequency=opts["min_freq"],
        seed=opts["seed"],
        require_all_labels=not opts["allow_missing_labels"],
    )


def cmd_extract(opts) -> int:
    langs = None
    if opts.get("langs"):
        langs = frozenset(name.strip().lower() for name in opts["langs"].split(","))
    config = ScanConfig(repo_name=opts.get("repo_name", ""),
                        languages=langs, jobs=opts["jobs"])
    diagnostics = []
    out = _open_out(opts.get("out"))
    try:
        for comment in scan_repository(opts["path"], config, diagnostics=diagnostics):
            out.write(json.dumps(comment.to_record()) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    for diag in diagnostics:
        print(f"warning: {diag.kind} {diag.file}:{diag.line} {diag.message}",
              file=sys.stderr)
    return EXIT_DIAGNOSTICS if diagnostics else EXIT_OK


def cmd_train(opts) -> int:
    examples = load_dataset(_dataset_path(opts))
    spec = SplitSpec(opts["train_fraction"], opts["validation_fraction"],
                     opts["test_fraction"], opts["seed"])
    train, validation, test = split(examples, spec)
    base = _train_config(opts)

    if opts["grid"]:
        import dataclasses

        best = None
        for lr in GRID_LEARNING_RATES:
            for wd in GRID_WEIGHT_DECAYS:
                config = dataclasses.replace(base, learning_rate=lr, weight_decay=wd)
                model = train_ngram(train, validation, config)
                preds = [c.label for c in model.classify_batch([ex.text for ex in validation])]
                score = metrics(confusion([ex.label for ex in validation], preds)).weighted_f1
                log.info("grid lr=%g wd=%g -> validation weighted F1 %.4f", lr, wd, score)
                if best is None or score > best[0]:
                    best = (score, model)
        model = best[1]
    else:
        model = train_ngram(train, validation, base)

    model.save(opts["model_out"])
    log.info("model saved to %s (meta: %s)", opts["model_out"], model.training_meta)
    preds = [c.label for c in model.classify_batch([ex.text for ex in test])]
    report = metrics(confusion([ex.label for ex in test], preds))
    if opts["format"] == "md":
        _emit(report_markdown(report), opts.get("report_out"))
    else:
        _emit(json.dumps(report.to_json(), indent=2), opts.get("report_out"))
    return EXIT_OK


def cmd_evaluate(opts) -> int:
    examples = load_dataset(_dataset_path(opts))
    selector = opts["backend"]
    backend = NgramTrainer(_train_config(opts)) if selector == "train" else make_backend(selector)

    if opts["mode"] == "intra":
        spec = SplitSpec(opts["train_fraction"], opts["validation_fraction"],
                         opts["test_fraction"], opts["seed"])
        report = run_intra_project(examples, spec, backend)
        payload = report.to_json()
        rendered = report_markdown(report)
    else:
        result = run_cross_project(examples, opts["k"], opts["seed"], backend,
                                   jobs=opts["jobs"])
        payload = result.to_json()
        rendered = report_markdown(result.averaged)

    if opts["format"] == "md":
        _emit(rendered, opts.get("out"))
    else:
        _emit(json.dumps(payload, indent=2), opts.get("out"))
    return EXIT_OK


def _stop_word_policy(value: str) -> StopWordPolicy:
    if value == "none":
        return NO_STOP_WORDS
    if value.startswith("file:"):
        return StopWordPolicy.from_file(value[len("file:"):])
    raise ValueError(f"--stop-words wants 'none' or 'file:PATH', got {value!r}")


def cmd_analyze(opts) -> int:
    backend = make_backend(opts["backend"])
    stop_words = _stop_word_policy(opts["stop_words"])
    domains = opts.get("domain") or []
    criteria = None
    if opts.get("criteria"):
        raw = json.loads(open(opts["criteria"], encoding="utf-8").read())
        kwargs = {k: raw[k] for k in ("min_stars", "min_contributors") if k in raw}
        if "updated_after" in raw:
            import datetime

            kwargs["updated_after"] = datetime.date.fromisoformat(raw["updated_after"])
        criteria = SelectionCriteria(**kwargs)

    warnings = 0
    reports = []
    diagnostics = []
    for i, path in enumerate(opts["paths"]):
        name = os.path.basename(os.path.abspath(path))
        if criteria is not None:
            record = metadata_from_file(opts["metadata"], name) if opts.get("metadata") else None
            if record is None:
                print(f"warning: no metadata for {name}, criteria not checked",
                      file=sys.stderr)
                warnings += 1
            else:
                result = check_selection(record, criteria)
                if not result.passed:
                    print(f"warning: {name} fails selection criteria: "
                          f"{', '.join(result.failures)}", file=sys.stderr)
                    warnings += 1
                    if opts["enforce_criteria"]:
                        continue
        domain = domains[i] if i < len(domains) else ""
        config = AnalyzeConfig(repo_name=name, domain_tag=domain,
                               scan=ScanConfig(jobs=opts["jobs"]),
                               stop_words=stop_words)
        reports.append(analyze_repo(path, backend, config, diagnostics=diagnostics))

    if not reports:
        raise ValueError("no repositories analyzed")
    for diag in diagnostics:
        print(f"warning: {diag.kind} {diag.file}:{diag.line} {diag.message}",
              file=sys.stderr)

    cohort = cohort_report(reports)
    if opts["compare"]:
        if len(reports) != 2:
            raise ValueError("--compare needs exactly two repositories")
        comparison = compare_cohorts(cohort_report([reports[0]]),
                                     cohort_report([reports[1]]))
        payload = {"reports": [r.to_json() for r in reports],
                   "comparison": comparison.to_json()}
        _emit(json.dumps(payload, indent=2), opts.get("out"))
    elif opts["format"] == "md":
        _emit(render_markdown(cohort), opts.get("out"))
    elif opts["format"] == "csv":
        _emit(render_csv(cohort), opts.get("out"))
    elif len(reports) == 1:
        _emit(json.dumps(reports[0].to_json(), indent=2), opts.get("out"))
    else:
        _emit(json.dumps(cohort.to_json(), indent=2), opts.get("out"))

    if opts.get("sarif_out"):
        records = []
        for report in reports:
            records.extend(sarif_records(report))
        _emit(json.dumps({"records": records}, indent=2), opts["sarif_out"])

    return EXIT_DIAGNOSTICS if (diagnostics or warnings) else EXIT_OK


def cmd_serve_check(opts) -> int:
    url = opts.get("endpoint") or os.environ.get(ENDPOINT_ENV, "")
    if not url:
        raise ValueError(f"no endpoint given (use --endpoint or {ENDPOINT_ENV})")
    endpoint = InferenceEndpoint(base_url=url, timeout=opts["timeout"],
                                 retries=opts["retries"])
    info = handshake(endpoint)
    _emit(json.dumps({"model_name": info.model_name,
                      "labels": list(info.labels),
                      "max_length": info.max_length}, indent=2), opts.get("out"))
    return EXIT_OK


_COMMON_DEFAULTS = {"seed": 0, "jobs": os.cpu_count() or 1, "format": "json",
                    "out": None, "config": None, "verbose": False}
_TRAIN_DEFAULTS = {
    "dataset": None, "lr": 0.5, "weight_decay": 0.0, "batch_size": 32,
    "epochs": 60, "patience": 2, "min_freq": 2, "allow_missing_labels": False,
    "train_fraction": 0.8, "validation_fraction": 0.1, "test_fraction": 0.1,
}

HARD_DEFAULTS = {
    "extract": {**_COMMON_DEFAULTS, "langs": None, "repo_name": ""},
    "train": {**_COMMON_DEFAULTS, **_TRAIN_DEFAULTS,
              "grid": False, "model_out": "model.json", "report_out": None},
    "evaluate": {**_COMMON_DEFAULTS, **_TRAIN_DEFAULTS,
                 "mode": "intra", "k": 5, "backend": "train"},
    "analyze": {**_COMMON_DEFAULTS, "backend": "patterns", "domain": None,
                "criteria": None, "metadata": None, "enforce_criteria": False,
                "compare": False, "sarif_out": None, "stop_words": "none"},
    "serve-check": {**_COMMON_DEFAULTS, "endpoint": None, "timeout": 10.0,
                    "retries": 2},
}


def build_parser() -> argparse.ArgumentParser:
    sup = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=sup, help="key=value config file")
    common.add_argument("--seed", type=int, default=sup)
    common.add_argument("--jobs", type=int, default=sup)
    common.add_argument("--out", default=sup, help="output file (default stdout)")
    common.add_argument("--verbose", action="store_true", default=sup)

    parser = argparse.ArgumentParser(prog="satdscan",
                                     description="SATD mining and classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common],
                       help="scan a source tree and emit comments as JSONL")
    p.add_argument("path")
    p.add_argument("--langs", default=sup, help="comma-separated language filter")
    p.add_argument("--repo-name", dest="repo_name", default=sup)

    def add_train_flags(p):
        p.add_argument("--dataset", default=sup)
        p.add_argument("--lr", type=float, default=sup)
        p.add_argument("--weight-decay", dest="weight_decay", type=float, default=sup)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=sup)
        p.add_argument("--epochs", type=int, default=sup)
        p.add_argument("--patience", type=int, default=sup)
        p.add_argument("--min-freq", dest="min_freq", type=int, default=sup)
        p.add_argument("--allow-missing-labels", dest="allow_missing_labels",
                       action="store_true", default=sup)
        p.add_argument("--train-fraction", dest="train_fraction", type=float, default=sup)
        p.add_argument("--validation-fraction", dest="validation_fraction",
                       type=float, default=sup)
        p.add_argument("--test-fraction", dest="test_fraction", type=float, default=sup)

    p = sub.add_parser("train", parents=[common], help="train and persist an n-gram model")
    add_train_flags(p)
    p.add_argument("--grid", action="store_true", default=sup,
                   help="3x3 learning-rate/weight-decay grid search")
    p.add_argument("--model-out", dest="model_out", default=sup)
    p.add_argument("--report-out", dest="report_out", default=sup)
    p.add_argument("--format", choices=("json", "md"), default=sup)

    p = sub.add_parser("evaluate", parents=[common],
                       help="intra-project or cross-project evaluation")
    add_train_flags(p)
    p.add_argument("--mode", choices=("intra", "cross"), default=sup)
    p.add_argument("--k", type=int, default=sup)
    p.add_argument("--backend", default=sup,
                   help="train | ngram:PATH | patterns[:PATH] | remote[:URL]")
    p.add_argument("--format", choices=("json", "md"), default=sup)

    p = sub.add_parser("analyze", parents=[common], help="analyze repositories for SATD")
    p.add_argument("paths", nargs="+")
    p.add_argument("--backend", default=sup)
    p.add_argument("--domain", action="append", default=sup,
                   help="domain tag per repo, in path order")
    p.add_argument("--criteria", default=sup, help="selection criteria JSON file")
    p.add_argument("--metadata", default=sup, help="repo metadata JSON file")
    p.add_argument("--enforce-criteria", dest="enforce_criteria",
                   action="store_true", default=sup)
    p.add_argument("--compare", action="store_true", default=sup)
    p.add_argument("--format", choices=("json", "md", "csv"), default=sup)
    p.add_argument("--sarif-out", dest="sarif_out", default=sup)
    p.add_argument("--stop-words", dest="stop_words", default=sup,
                   help="none (default) or file:PATH with one stop word per line")

    p = sub.add_parser("serve-check", parents=[common],
                       help="handshake against a remote model server")
    p.add_argument("--endpoint", default=sup)
    p.add_argument("--timeout", type=float, default=sup)
    p.add_argument("--retries", type=int, default=sup)

    return parser


HANDLERS = {
    "extract": cmd_extract,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "serve-check": cmd_serve_check,
}


def resolve_options(args: argparse.Namespace) -> dict:
    given = {k: v for k, v in vars(args).items() if k != "command"}
    defaults = dict(HARD_DEFAULTS[args.command])
    config_path = given.get("config")
    if config_path:
        for key, value in parse_config_file(config_path).items():
            if key in defaults:
                defaults[key] = value
            else:
                print(f"warning: config key {key!r} not used by {args.command}",
                      file=sys.stderr)
    defaults.update(given)
    return defaults


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve_options(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    logging.basicConfig(
        level=logging.DEBUG if opts.get("verbose") else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return HANDLERS[args.command](opts)
    except UnknownLabel as exc:
        print(f"error: unknown label {exc.value!r}", file=sys.stderr)
        return EXIT_FATAL
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        if opts.get("verbose"):
            raise
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
