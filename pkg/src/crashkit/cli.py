"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 domain error (reported to stderr with a stable error
code), 2 usage error. Every output file gets a sidecar ``.manifest.json``
recording version, seed, argument values, and input content hashes;
re-running a subcommand with identical inputs and seeds is byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .baselines import ModelSpec, encode_apply, encode_fit, load_model, predict, save_model, train
from .dictionary import FeatureDictionary, load_dictionary
from .errors import CrashKitError, OutOfRange
from .evaluation import (
    METRIC_KEYS,
    TASK_ORDER,
    confusion,
    metrics,
    rank_table,
    rank_table_to_dict,
    render_rank_table,
    report_to_dict,
)
from .geo import WASHINGTON_SOUTH, lcc_inverse, tile_url
from .ingest import SourceBundle, clean_features, completeness_filter, join_records
from .llm_client import (
    HttpTransport,
    MockTransport,
    PredictRequest,
    predict_batch,
)
from .manifest import build_manifest, write_manifest
from .model import Task, task_class
from .recordio import read_records, write_records
from .sampler import (
    DEFAULT_SEED,
    DEFAULT_TEST_MONTHS,
    SyntheticSpec,
    generate_synthetic,
    resample_uniform,
    split_by_month,
)
from .textualize import (
    build_prompt,
    budget_warnings,
    default_templates_path,
    export_sft,
    load_templates,
    read_bundles,
    render_paragraphs,
    write_bundles,
)
from .whatif import ALL, adverse_count, apply_plan, get_factor, plan, shift_report

API_KEY_ENV = "CRASHKIT_MAPS_API_KEY"
LLM_TOKEN_ENV = "CRASHKIT_LLM_TOKEN"


def _dictionary(args) -> FeatureDictionary:
    return load_dictionary(args.dictionary) if args.dictionary else load_dictionary()


def _templates(args, dictionary: FeatureDictionary):
    return load_templates(args.templates, dictionary)


def _templates_file(args) -> str:
    return args.templates if args.templates else default_templates_path()


def _task(name: str) -> Task:
    try:
        return Task(name)
    except ValueError:
        raise OutOfRange("unknown task", task=name,
                         known=[t.value for t in Task]) from None


def _write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# subcommands -----------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = SyntheticSpec(n_records=args.n, seed=args.seed)
    records = generate_synthetic(spec)
    write_records(args.out, records)
    write_manifest(args.out, build_manifest(
        "synth", {"n": args.n, "out": args.out}, seed=args.seed))
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    dictionary = _dictionary(args)
    bundle = SourceBundle(
        crash_table=args.crash, road_table=args.road, unit_table=args.unit,
        person_table=args.person, delimiter=args.delimiter,
    )
    records, report = join_records(bundle, dictionary)
    records, clean_rep = clean_features(records, dictionary)
    kept, dropped = completeness_filter(records, dictionary, args.min_completeness)
    for _ in dropped:
        report.drop("below_completeness")
    write_records(args.out, kept)
    doc = {"ingest": report.as_dict(), "clean": clean_rep.as_dict(),
           "kept": len(kept)}
    _write_json(args.report, doc)
    inputs = {"crash": args.crash, "road": args.road, "unit": args.unit}
    if args.person:
        inputs["person"] = args.person
    write_manifest(args.out, build_manifest(
        "ingest",
        {"delimiter": args.delimiter, "min_completeness": args.min_completeness,
         "out": args.out, "report": args.report},
        inputs=inputs,
    ))
    print(f"built {len(kept)} records ({report.records_dropped} dropped) -> {args.out}")
    return 0


def cmd_textualize(args) -> int:
    dictionary = _dictionary(args)
    templates = _templates(args, dictionary)
    records = read_records(args.records)
    task = _task(args.task)
    bundles = []
    warning_count = 0
    for record in records:
        paragraphs = render_paragraphs(record, templates, dictionary)
        warning_count += len(budget_warnings(paragraphs))
        bundles.append(build_prompt(record, task, templates, dictionary, paragraphs=paragraphs))
    write_bundles(args.out, bundles)
    write_manifest(args.out, build_manifest(
        "textualize", {"task": args.task, "out": args.out},
        inputs={"records": args.records, "templates": _templates_file(args)},
        template_sha256=templates.sha256,
    ))
    note = f" ({warning_count} word-budget warnings)" if warning_count else ""
    print(f"wrote {len(bundles)} prompts to {args.out}{note}")
    return 0


def cmd_split(args) -> int:
    records = read_records(args.records)
    months = tuple(int(m) for m in args.test_months.split(","))
    result = split_by_month(records, months)
    by_id = {r.case_id: r for r in records}
    write_records(args.out_train, [by_id[c] for c in result.train])
    write_records(args.out_test, [by_id[c] for c in result.test])
    manifest_args = {
        "test_months": list(months), "out_train": args.out_train,
        "out_test": args.out_test, "out_unassigned": args.out_unassigned,
    }
    if args.out_unassigned:
        write_records(args.out_unassigned, [by_id[c] for c in result.unassigned])
        write_manifest(args.out_unassigned, build_manifest(
            "split", manifest_args, inputs={"records": args.records}))
    for out in (args.out_train, args.out_test):
        write_manifest(out, build_manifest(
            "split", manifest_args, inputs={"records": args.records}))
    print(f"split: train {len(result.train)}, test {len(result.test)}, "
          f"unassigned {len(result.unassigned)}")
    return 0


def _parse_hyper(pairs: list[str]) -> dict:
    hyper = {}
    for pair in pairs:
        if "=" not in pair:
            raise OutOfRange("hyperparameters must be key=value", given=pair)
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except ValueError:
            value = raw
        hyper[key] = value
    return hyper


def cmd_train_baseline(args) -> int:
    dictionary = _dictionary(args)
    records = read_records(args.records)
    task = _task(args.task)
    if args.resample:
        by_id = {r.case_id: r for r in records}
        ids = resample_uniform(records, task, seed=args.seed)
        train_records = [by_id[c] for c in ids]
    else:
        train_records = records
    dataset = encode_fit(train_records, dictionary, task)
    spec = ModelSpec(kind=args.kind, task=task, seed=args.seed,
                     hyperparams=_parse_hyper(args.hyper))
    model = train(spec, dataset)
    save_model(model, args.out)
    inputs = {"records": args.records}
    manifest_args = {
        "task": args.task, "kind": args.kind, "resample": args.resample,
        "hyper": args.hyper, "out": args.out, "test": args.test,
        "out_predictions": args.out_predictions,
    }
    write_manifest(args.out, build_manifest(
        "train-baseline", manifest_args, inputs=inputs, seed=args.seed))
    message = (f"trained {args.kind} on {len(train_records)} records "
               f"({task.value}) -> {args.out}")
    if args.test:
        if not args.out_predictions:
            raise OutOfRange("--test requires --out-predictions")
        test_records = read_records(args.test)
        encoded = encode_apply(test_records, model.state, dictionary, task)
        labels = predict(model, encoded.X)
        with open(args.out_predictions, "w", encoding="utf-8") as handle:
            for record, label in zip(test_records, labels):
                handle.write(json.dumps(
                    {"case_id": record.case_id, "task": task.value, "label": label},
                    separators=(",", ":")) + "\n")
        inputs["test"] = args.test
        write_manifest(args.out_predictions, build_manifest(
            "train-baseline", manifest_args, inputs=inputs, seed=args.seed))
        message += f", predictions -> {args.out_predictions}"
    print(message)
    return 0


def cmd_predict_llm(args) -> int:
    if bool(args.endpoint) == bool(args.mock):
        raise OutOfRange("exactly one of --endpoint or --mock is required")
    bundles = read_bundles(args.prompts)
    requests_in = [
        PredictRequest(task=b.task, system_text=b.system_text,
                       user_text=b.user_text, case_id=b.case_id)
        for b in bundles
    ]
    if args.mock:
        transport = MockTransport.from_file(args.mock)
    else:
        transport = HttpTransport(args.endpoint, timeout_s=args.timeout,
                                  bearer_token=os.environ.get(LLM_TOKEN_ENV))
    outcomes, report = predict_batch(
        transport, requests_in, max_in_flight=args.max_in_flight,
        retries=args.retries, lenient=args.lenient,
    )
    with open(args.out, "w", encoding="utf-8") as handle:
        for bundle, outcome in zip(bundles, outcomes):
            handle.write(json.dumps({
                "case_id": outcome.case_id, "task": bundle.task.value,
                "label": outcome.label, "token": outcome.token,
                "retries": outcome.retries, "error": outcome.error,
            }, separators=(",", ":")) + "\n")
    _write_json(args.report, report.as_dict())
    inputs = {"prompts": args.prompts}
    if args.mock:
        inputs["mock"] = args.mock
    write_manifest(args.out, build_manifest(
        "predict-llm",
        {"endpoint": args.endpoint, "max_in_flight": args.max_in_flight,
         "retries": args.retries, "lenient": args.lenient, "timeout": args.timeout,
         "out": args.out, "report": args.report},
        inputs=inputs,
    ))
    print(f"predicted {report.succeeded}/{report.total} cases -> {args.out}")
    return 0


def _read_predictions(path: str) -> dict[str, dict[str, str]]:
    """Prediction lines -> {task: {case_id: label}}; failed cases keep None."""
    out: dict[str, dict[str, str]] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            out.setdefault(doc["task"], {})[doc["case_id"]] = doc["label"]
    return out


def cmd_eval(args) -> int:
    if args.cells:
        cells = json.loads(Path(args.cells).read_text(encoding="utf-8"))
        rows = rank_table(cells)
        doc = rank_table_to_dict(rows)
        _write_json(args.out, doc)
        write_manifest(args.out, build_manifest(
            "eval", {"cells": args.cells, "out": args.out},
            inputs={"cells": args.cells}))
        print(render_rank_table(rows))
        return 0
    if not args.records or not args.predictions:
        raise OutOfRange("score mode needs --records and at least one --predictions")
    records = read_records(args.records)
    truth_by_task = {
        task: {r.case_id: task_class(task, r.labels) for r in records}
        for task in Task
    }
    models: dict[str, dict[str, dict[str, str]]] = {}
    inputs = {"records": args.records}
    for item in args.predictions:
        if "=" not in item:
            raise OutOfRange("--predictions must be name=path", given=item)
        name, path = item.split("=", 1)
        per_task = models.setdefault(name, {})
        for task_name, labels in _read_predictions(path).items():
            per_task.setdefault(task_name, {}).update(labels)
        inputs[f"predictions:{name}:{Path(path).name}"] = path
    doc: dict = {"tasks": {}, "models": sorted(models)}
    cells: dict[str, dict[str, dict[str, float]]] = {}
    for name, per_task in sorted(models.items()):
        for task_name, labels in sorted(per_task.items()):
            task = _task(task_name)
            truth_map = truth_by_task[task]
            pairs = []
            for case_id, label in labels.items():
                if case_id not in truth_map:
                    raise OutOfRange("prediction for unknown case",
                                     case_id=case_id, task=task_name)
                if label is None:
                    if args.skip_failed:
                        continue
                    raise OutOfRange(
                        "failed prediction in input; rerun or pass --skip-failed",
                        case_id=case_id, model=name)
                pairs.append((truth_map[case_id], label))
            truth = [t for t, _ in pairs]
            predicted = [p for _, p in pairs]
            cm = confusion(truth, predicted, list(task.class_names))
            report = metrics(cm)
            doc["tasks"].setdefault(task_name, {})[name] = report_to_dict(
                task_name, name, report, cm)
            cells.setdefault(name, {})[task_name] = {
                key: report.cell(key) for key in METRIC_KEYS}
    complete = models and all(
        set(cells.get(name, {})) == set(TASK_ORDER) for name in models)
    if complete:
        rows = rank_table(cells)
        doc["ranks"] = rank_table_to_dict(rows)
        print(render_rank_table(rows))
    _write_json(args.out, doc)
    write_manifest(args.out, build_manifest(
        "eval",
        {"predictions": sorted(args.predictions), "skip_failed": args.skip_failed,
         "out": args.out},
        inputs=inputs,
    ))
    print(f"scored {len(models)} model(s) -> {args.out}")
    return 0


def cmd_whatif(args) -> int:
    dictionary = _dictionary(args)
    templates = _templates(args, dictionary)
    records = read_records(args.records)
    task = _task(args.task)
    model = load_model(args.model)
    if model.spec.task != task:
        raise OutOfRange("model was trained for a different task",
                         model_task=model.spec.task.value, requested=task.value)
    factor = get_factor(args.factor)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    encoded_before = encode_apply(records, model.state, dictionary, task)
    pred_before = predict(model, encoded_before.X)

    rates: list[float | str] = []
    for word in args.rates.split(","):
        word = word.strip()
        rates.append(ALL if word.upper() == "ALL" else float(word))

    summary = {
        "factor": factor.name, "task": task.value, "seed": args.seed,
        "base_count": adverse_count(records, factor),
        "test_size": len(records), "rates": {},
    }
    for rate in rates:
        rate_name = "all" if rate == ALL else f"{rate:g}"
        plan_ = plan(records, factor, rate, seed=args.seed)
        cases = apply_plan(records, plan_, templates, dictionary, task)
        perturbed = [case.record for case in cases]
        encoded_after = encode_apply(perturbed, model.state, dictionary, task)
        pred_after = predict(model, encoded_after.X)
        report = shift_report(pred_before, pred_after, list(task.class_names))
        stem = f"{factor.name}_{rate_name}"
        _write_json(out_dir / f"plan_{stem}.json", plan_.as_dict())
        _write_json(out_dir / f"shift_{stem}.json", report.as_dict())
        _write_json(out_dir / f"plot_{stem}.json", report.plot_data())
        summary["rates"][rate_name] = {
            "selected": len(plan_.selected_case_ids),
            "adverse_after": adverse_count(perturbed, factor),
            "deltas": {s.class_name: s.delta for s in report.shifts},
        }
    _write_json(out_dir / "summary.json", summary)
    write_manifest(out_dir / "summary.json", build_manifest(
        "whatif",
        {"factor": args.factor, "rates": args.rates, "task": args.task,
         "out_dir": str(out_dir)},
        inputs={"records": args.records, "model": args.model,
                "templates": _templates_file(args)},
        seed=args.seed, template_sha256=templates.sha256,
    ))
    print(f"what-if {factor.name} at rates {args.rates} -> {out_dir}")
    return 0


def cmd_geo(args) -> int:
    lat, lon = lcc_inverse(args.easting, args.northing, WASHINGTON_SOUTH)
    doc = {"easting": args.easting, "northing": args.northing,
           "latitude": lat, "longitude": lon}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        doc["tile_url"] = tile_url(lat, lon, api_key, size=args.size, zoom=args.zoom)
    else:
        doc["tile_url"] = None
        doc["note"] = f"set {API_KEY_ENV} to emit a tile URL"
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.out:
        _write_json(args.out, doc)
        write_manifest(args.out, build_manifest(
            "geo", {"easting": args.easting, "northing": args.northing,
                    "zoom": args.zoom, "size": args.size, "out": args.out}))
    return 0


def cmd_export_sft(args) -> int:
    dictionary = _dictionary(args)
    templates = _templates(args, dictionary)
    records = read_records(args.records)
    task = _task(args.task)
    count = export_sft(records, task, templates, dictionary, args.out)
    write_manifest(args.out, build_manifest(
        "export-sft", {"task": args.task, "out": args.out},
        inputs={"records": args.records, "templates": _templates_file(args)},
        template_sha256=templates.sha256,
    ))
    print(f"exported {count} SFT examples to {args.out}")
    return 0


# parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crashkit",
        description="Crash-record textualization, baseline evaluation, and "
                    "what-if analysis toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"crashkit {__version__}")
    parser.add_argument("--dictionary", help="feature dictionary YAML (default: packaged)")
    parser.add_argument("--jobs", type=int, default=4,
                        help="worker cap for parallel stages (default 4)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse, join, clean, and filter source tables")
    p.add_argument("--crash", required=True)
    p.add_argument("--road", required=True)
    p.add_argument("--unit", required=True)
    p.add_argument("--person")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--min-completeness", type=float, default=0.6)
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("textualize", help="render records into prompt bundles")
    p.add_argument("--records", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--templates")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_textualize)

    p = sub.add_parser("split", help="month-based train/test split")
    p.add_argument("--records", required=True)
    p.add_argument("--test-months", default=",".join(str(m) for m in DEFAULT_TEST_MONTHS))
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.add_argument("--out-unassigned")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train-baseline", help="fit one baseline model")
    p.add_argument("--records", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--resample", action=argparse.BooleanOptionalAction, default=True,
                   help="downsample training records to a class-uniform subset")
    p.add_argument("--hyper", nargs="*", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.add_argument("--test", help="records to predict after training")
    p.add_argument("--out-predictions")
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("predict-llm", help="query an external predictor service")
    p.add_argument("--prompts", required=True)
    p.add_argument("--endpoint")
    p.add_argument("--mock", help="transcript file for the offline mock transport")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--max-in-flight", type=int, default=None)
    p.add_argument("--lenient", action="store_true",
                   help="accept responses that wrap the token in prose")
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_predict_llm)

    p = sub.add_parser("eval", help="score predictions or rank metric cells")
    p.add_argument("--records")
    p.add_argument("--predictions", nargs="*", default=[], metavar="NAME=PATH")
    p.add_argument("--cells", help="metric-cell fixture for rank aggregation")
    p.add_argument("--skip-failed", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("whatif", help="counterfactual perturbation analysis")
    p.add_argument("--records", required=True)
    p.add_argument("--factor", required=True)
    p.add_argument("--rates", default="1.0,2.0,all")
    p.add_argument("--task", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--templates")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("geo", help="invert state-plane coordinates, emit tile URL")
    p.add_argument("--easting", type=float, required=True)
    p.add_argument("--northing", type=float, required=True)
    p.add_argument("--zoom", type=int, default=19)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--out")
    p.set_defaults(func=cmd_geo)

    p = sub.add_parser("export-sft", help="write prompt/target SFT examples")
    p.add_argument("--records", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--templates")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_sft)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "max_in_flight", None) is None and hasattr(args, "max_in_flight"):
        args.max_in_flight = args.jobs
    try:
        return args.func(args)
    except CrashKitError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io_error]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
