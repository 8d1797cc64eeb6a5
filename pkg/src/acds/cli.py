"""Unified command line: synth, describe, train, evaluate, recommend,
serve and registry management. Exit code 0 on success, 1 with a
single-line diagnostic on failure, 2 on usage errors."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import AcdsError
from .evaluation import SelectorSpec, compare_models, cross_validate, make_folds
from .bundle import load_model, save_model
from .models import Dataset, ModelSpec, train
from .preprocess import BIN_TARGET, CAIM
from .records import describe, load_cohort, save_cohort
from .registry import ModelRegistry
from .service import ServiceConfig, recommendation_payload, round10, serve
from .packages import load_catalog, score_packages
from .synth import make_reference_fixture, parse_generator_spec, preset, synthesize_cohort

_METHOD_CHOICES = (
    "naive_bayes",
    "aode",
    "bayes_net_k2",
    "decision_tree",
    "random_forest",
    "log_regression",
    "knn",
    "mlp",
    "linear_reg_classifier",
    "ensemble",
    "vote",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acds",
        description="Outcome models and service-package recommendations "
        "from EHR-style records.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset",
                     choices=("table123", "table3", "fixture423"),
                     default="table123")
    src.add_argument("--spec", help="generator spec file (INI grammar)")
    p.add_argument("--n", type=int, default=423)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    p = sub.add_parser("describe", help="descriptive stats for one field")
    p.add_argument("--data", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    p = sub.add_parser("evaluate", help="cross-validated model comparison")
    p.add_argument("--data", required=True)
    p.add_argument("--methods", required=True,
                   help="comma-separated method names")
    p.add_argument("--binning", choices=("bin-target", "caim", "both"),
                   default="caim")
    p.add_argument("--selector", default=None,
                   help="chi2:K | gain_ratio:K | relief_f:K | cfs | "
                        "consistency | rank_search_chi2 | rank_search_gain_ratio")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metric-mode", choices=("pooled", "fold-averaged"),
                   default="pooled")
    p.add_argument("--leak-diagnostic", action="store_true",
                   help="deliberately fit the selector outside folds")
    p.add_argument("--unstratified", action="store_true")
    p.add_argument("--out", default=None, help="report/figure directory")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    p = sub.add_parser("train", help="train one model and save its bundle")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, choices=_METHOD_CHOICES)
    p.add_argument("--binning", choices=("bin-target", "caim"), default="caim")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--hyper", action="append", default=[],
                   help="hyperparameter override key=value (repeatable)")

    p = sub.add_parser("recommend", help="rank service packages for a patient")
    p.add_argument("--model", help="model bundle path")
    p.add_argument("--registry", help="registry dir (uses the active model)")
    p.add_argument("--patient", required=True, help="patient JSON file")
    p.add_argument("--packages", required=True, help="catalog JSON file")
    p.add_argument("--ids", default=None, help="comma-separated package ids")
    p.add_argument("--json", action="store_true", dest="as_json")

    p = sub.add_parser("serve", help="run the HTTP scoring service")
    p.add_argument("--registry", required=True)
    p.add_argument("--packages", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8330)

    p = sub.add_parser("registry", help="manage the model registry")
    rsub = p.add_subparsers(dest="registry_command", required=True)
    rp = rsub.add_parser("put", help="store a bundle as a new version")
    rp.add_argument("--dir", required=True)
    rp.add_argument("--name", required=True)
    rp.add_argument("--bundle", required=True)
    rp = rsub.add_parser("activate")
    rp.add_argument("--dir", required=True)
    rp.add_argument("--name", required=True)
    rp.add_argument("--version", type=int, required=True)
    rp = rsub.add_parser("list")
    rp.add_argument("--dir", required=True)
    return parser


def cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except AcdsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


def _dispatch(args) -> int:
    if args.command == "synth":
        return _cmd_synth(args)
    if args.command == "describe":
        return _cmd_describe(args)
    if args.command == "evaluate":
        return _cmd_evaluate(args)
    if args.command == "train":
        return _cmd_train(args)
    if args.command == "recommend":
        return _cmd_recommend(args)
    if args.command == "serve":
        return _cmd_serve(args)
    if args.command == "registry":
        return _cmd_registry(args)
    raise AcdsError(f"unknown command {args.command}")


def _cmd_synth(args) -> int:
    if args.spec:
        spec = parse_generator_spec(Path(args.spec).read_text(encoding="utf-8"))
        cohort = synthesize_cohort(spec, seed=args.seed)
    elif args.preset == "fixture423":
        cohort = make_reference_fixture()
    else:
        cohort = synthesize_cohort(preset(args.preset, n=args.n), seed=args.seed)
    Path(args.out).write_bytes(save_cohort(cohort, format=args.format))
    print(f"wrote {len(cohort)} records to {args.out}")
    return 0


def _cmd_describe(args) -> int:
    cohort = load_cohort(args.data, format=args.format)
    stats = describe(cohort, args.field)
    print(f"field: {args.field}")
    print(f"n: {stats.n}")
    print(f"min: {round10(stats.min)}")
    print(f"max: {round10(stats.max)}")
    print(f"mean: {round10(stats.mean)}")
    print(f"sd: {round10(stats.sd)}")
    return 0


def _parse_selector(text: str | None) -> SelectorSpec | None:
    if not text:
        return None
    name, _, k = text.partition(":")
    return SelectorSpec(method=name, top_k=int(k) if k else None)


def _cmd_evaluate(args) -> int:
    from .evaluation import IN_FOLD, LEAKY_FULL_DATA

    cohort = load_cohort(args.data, format=args.format)
    dataset = Dataset.from_cohort(cohort)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    binnings = [args.binning] if args.binning != "both" else [BIN_TARGET, CAIM]
    selector = _parse_selector(args.selector)
    entries = []
    for method in methods:
        for binning in binnings:
            try:
                entries.append(
                    (ModelSpec(method=method, binning=binning, seed=args.seed),
                     selector)
                )
            except AcdsError:
                continue  # e.g. aode with bin-target
    if not entries:
        raise AcdsError("no valid (method, binning) combinations")
    binarizer_labels = (dataset.deltas >= dataset.deltas.mean()).astype(int)
    plan = make_folds(
        n=dataset.n,
        k=args.folds,
        labels=binarizer_labels,
        seed=args.seed,
        stratified=not args.unstratified,
    )
    mode = LEAKY_FULL_DATA if args.leak_diagnostic else IN_FOLD
    if len(entries) == 1:
        result = cross_validate(
            dataset, entries[0][0], plan, selector=entries[0][1],
            selection_mode=mode, metric_mode=args.metric_mode,
        )
        print(result.row.format_table4())
        results = [result]
        from .evaluation import ComparisonTable

        table = ComparisonTable(rows=(result.row,), spearman_auc_vs_h=None)
    else:
        if mode == LEAKY_FULL_DATA:
            results = []
            for spec, sel in entries:
                results.append(
                    cross_validate(dataset, spec, plan, selector=sel,
                                   selection_mode=mode,
                                   metric_mode=args.metric_mode)
                )
            results.sort(key=lambda r: (-r.row.auc, r.row.method))
            from .evaluation import ComparisonTable

            rows = tuple(r.row for r in results)
            table = ComparisonTable(rows=rows, spearman_auc_vs_h=None)
        else:
            table, results = compare_models(
                dataset, entries, plan, metric_mode=args.metric_mode
            )
        for line in table.format_lines():
            print(line)
        if table.spearman_auc_vs_h is not None:
            print(f"spearman(auc, h) = {table.spearman_auc_vs_h:.3f}")
    if args.out:
        from .report import write_report

        paths = write_report(table, results, args.out, args.seed, args.folds)
        for path in paths:
            print(f"wrote {path}")
    return 0


def _cmd_train(args) -> int:
    cohort = load_cohort(args.data, format=args.format)
    dataset = Dataset.from_cohort(cohort)
    hyper = {}
    for item in args.hyper:
        key, sep, value = item.partition("=")
        if not sep:
            raise AcdsError(f"--hyper expects key=value, got {item!r}")
        hyper[key] = _coerce(value)
    spec = ModelSpec(
        method=args.method, binning=args.binning,
        hyperparameters=hyper, seed=args.seed,
    )
    model = train(spec, dataset)
    Path(args.out).write_bytes(save_model(model))
    print(
        f"trained {args.method} ({args.binning}) on {dataset.n} records "
        f"-> {args.out}"
    )
    return 0


def _coerce(value: str):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            continue
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    return value


def _cmd_recommend(args) -> int:
    if bool(args.model) == bool(args.registry):
        raise AcdsError("recommend needs exactly one of --model or --registry")
    if args.model:
        model = load_model(Path(args.model).read_bytes())
        name, version = Path(args.model).name, 0
    else:
        registry = ModelRegistry(args.registry)
        model = registry.get_active()
        name, version = registry.active_info()
    patient = json.loads(Path(args.patient).read_text(encoding="utf-8"))
    catalog = load_catalog(args.packages)
    ids = [s.strip() for s in args.ids.split(",")] if args.ids else None
    recs = score_packages(model, patient, catalog, package_ids=ids)
    if args.as_json:
        print(json.dumps(recommendation_payload(name, version, recs),
                         separators=(",", ":")))
    else:
        for rec in recs:
            print(f"{rec.rank}\t{rec.package_id}\t{round10(rec.p_above)}")
    return 0


def _cmd_serve(args) -> int:
    config = ServiceConfig(
        registry_dir=args.registry,
        catalog_path=args.packages,
        host=args.host,
        port=args.port,
    )
    server = serve(config)
    print(f"serving on http://{args.host}:{args.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def _cmd_registry(args) -> int:
    registry = ModelRegistry(args.dir)
    if args.registry_command == "put":
        version = registry.put(args.name, Path(args.bundle).read_bytes())
        print(f"stored {args.name} version {version}")
        return 0
    if args.registry_command == "activate":
        registry.activate(args.name, args.version)
        print(f"activated {args.name} version {args.version}")
        return 0
    if args.registry_command == "list":
        print(json.dumps(registry.listing(), indent=2))
        return 0
    raise AcdsError(f"unknown registry command {args.registry_command}")
