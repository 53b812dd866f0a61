"""Command-line pipeline: stats, synth, train, prestudy, explain, evaluate.

Every command resolves its configuration from an optional JSON config
file plus flag overrides, echoes the resolved config into the output
directory, and writes deterministic artifacts (no timestamps), so a
rerun from the resolved config reproduces its outputs byte for byte.

Exit codes: 0 success, 2 usage, 3 I/O, 4 parse/schema, 5 numerical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import metrics, prestudy, synthlog
from .errors import (
    AttnExplainError,
    CheckpointError,
    DivergenceError,
    EmptyLogError,
    LogParseError,
    SchemaError,
    SynthSpecError,
    TrainingDataError,
)
from .eventlog import EventLog, extract_prefixes, parse_csv, parse_xes, split, write_csv
from .explain import (
    Thresholds,
    attention_exploration_explain,
    backward_explain,
    to_dot,
    to_json,
)
from .transformer import ModelConfig, TransformerModel, train, weighted_f1

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_NUMERIC = 5

_PARSE_ERRORS = (LogParseError, SchemaError, EmptyLogError, SynthSpecError, CheckpointError)
_NUMERIC_ERRORS = (DivergenceError, TrainingDataError)


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise LogParseError(f"invalid JSON config {path}: {e}", position=f"line {e.lineno}") from e


def _resolve(args, keys) -> dict:
    """File values overridden by explicitly given CLI flags."""
    resolved = dict(_load_config_file(args.config)) if getattr(args, "config", None) else {}
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _write_resolved(out_dir: Path, resolved: dict, command: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **resolved}
    (out_dir / "resolved_config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _read_log(resolved) -> EventLog:
    path = resolved["log"]
    fmt = resolved.get("format", "csv")
    if fmt == "xes":
        return parse_xes(path,
                         activity_prefix=resolved.get("activity_prefix"),
                         lifecycle=resolved.get("lifecycle"))
    if fmt == "csv":
        return parse_csv(path,
                         case_col=resolved.get("case_col", "case"),
                         activity_col=resolved.get("activity_col", "activity"),
                         time_col=resolved.get("time_col", "time"))
    raise SchemaError(f"unknown log format {fmt!r}")


def _model_config(resolved) -> ModelConfig:
    cfg = ModelConfig()
    fields = {k: resolved[k] for k in (
        "d_k", "h", "max_len", "ff_dim", "epochs", "batch_size",
        "learning_rate", "seed", "attention_mode", "pad_dropout",
    ) if resolved.get(k) is not None}
    return replace(cfg, **fields)


def _thresholds(resolved) -> Thresholds:
    fields = {k: resolved[k] for k in (
        "delta_sim", "delta_attr", "delta_pred", "delta_edge", "sim_eps",
    ) if resolved.get(k) is not None}
    return Thresholds(**fields)


def _add_log_flags(p):
    p.add_argument("--log", help="event log file")
    p.add_argument("--format", choices=["csv", "xes"], help="log file format")
    p.add_argument("--case-col", dest="case_col")
    p.add_argument("--activity-col", dest="activity_col")
    p.add_argument("--time-col", dest="time_col")
    p.add_argument("--activity-prefix", dest="activity_prefix",
                   help="keep only XES events whose activity starts with this prefix")
    p.add_argument("--lifecycle", help="keep only XES events with this lifecycle:transition")


def _add_model_flags(p):
    p.add_argument("--d-k", dest="d_k", type=int)
    p.add_argument("--heads", dest="h", type=int)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--ff-dim", dest="ff_dim", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--attention-mode", dest="attention_mode",
                   choices=["learned", "frozen_uniform"])


def _add_threshold_flags(p):
    p.add_argument("--delta-sim", dest="delta_sim", type=float)
    p.add_argument("--delta-attr", dest="delta_attr", type=float)
    p.add_argument("--delta-pred", dest="delta_pred", type=float)
    p.add_argument("--delta-edge", dest="delta_edge", type=float)
    p.add_argument("--sim-eps", dest="sim_eps", type=float)
    p.add_argument("--n-mods", dest="n_mods", type=int)
    p.add_argument("--subset-cap", dest="subset_cap", type=int)


_LOG_KEYS = ("log", "format", "case_col", "activity_col", "time_col",
             "activity_prefix", "lifecycle")
_MODEL_KEYS = ("d_k", "h", "max_len", "ff_dim", "epochs", "batch_size",
               "learning_rate", "seed", "attention_mode")
_THRESHOLD_KEYS = ("delta_sim", "delta_attr", "delta_pred", "delta_edge",
                   "sim_eps", "n_mods", "subset_cap")


def cmd_stats(args) -> int:
    resolved = _resolve(args, _LOG_KEYS + ("out_dir",))
    logobj = _read_log(resolved)
    s = logobj.stats
    table = (
        f"cases      {s.num_cases}\n"
        f"activities {s.num_activities}\n"
        f"events     {s.num_events}\n"
        f"avg_len    {s.avg_len:.2f}\n"
        f"max_len    {s.max_len}\n"
        f"variants   {s.num_variants}\n"
    )
    sys.stdout.write(table)
    if resolved.get("out_dir"):
        out = Path(resolved["out_dir"])
        _write_resolved(out, resolved, "stats")
        (out / "stats.json").write_text(
            json.dumps(asdict(s), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_synth(args) -> int:
    resolved = _resolve(args, ("spec", "n_traces", "seed", "out_dir"))
    spec = synthlog.parse_spec_file(resolved["spec"])
    logobj, truth = synthlog.synth_log(spec, int(resolved.get("n_traces", 1000)),
                                       int(resolved.get("seed", 0)))
    out = Path(resolved["out_dir"])
    _write_resolved(out, resolved, "synth")
    write_csv(logobj, out / "log.csv")
    (out / "ground_truth_edges.json").write_text(
        json.dumps(sorted([list(e) for e in truth]), indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(f"wrote {len(logobj.traces)} traces to {out / 'log.csv'}\n")
    return 0


def cmd_train(args) -> int:
    resolved = _resolve(args, _LOG_KEYS + _MODEL_KEYS + ("train_frac", "out_dir"))
    logobj = _read_log(resolved)
    train_log, test_log = split(logobj, float(resolved.get("train_frac", 0.7)),
                                seed=int(resolved.get("seed", 0)))
    config = _model_config(resolved)
    model = train(train_log, config)
    out = Path(resolved["out_dir"])
    _write_resolved(out, resolved, "train")
    model.save(out / "checkpoint.npz")
    test_prefixes = extract_prefixes(test_log, min_len=1)
    f1 = weighted_f1(model, test_prefixes)
    report = {"weighted_f1": f1, "n_test_prefixes": len(test_prefixes),
              "n_train_traces": len(train_log.traces), "n_test_traces": len(test_log.traces)}
    (out / "f1_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
    sys.stdout.write(f"weighted F1 on test prefixes: {f1:.4f}\n")
    return 0


def cmd_prestudy(args) -> int:
    resolved = _resolve(args, _LOG_KEYS + _MODEL_KEYS
                        + ("which", "repeats", "train_frac", "checkpoint", "out_dir", "scope"))
    out = Path(resolved["out_dir"])
    which = resolved["which"]
    if which == "exp1":
        logobj = _read_log(resolved)
        result = prestudy.experiment1(
            logobj,
            repeats=int(resolved.get("repeats", 5)),
            config=_model_config(resolved),
            train_frac=float(resolved.get("train_frac", 0.7)),
            scope=resolved.get("scope", "all_heads"),
        )
        _write_resolved(out, resolved, "prestudy")
        (out / "exp1.csv").write_text(result.to_csv(), encoding="utf-8")
        (out / "exp1.json").write_text(result.to_json(), encoding="utf-8")
        sys.stdout.write(f"wrote {len(result.points)} comparison points\n")
    elif which == "exp2":
        if not resolved.get("checkpoint"):
            raise CheckpointError("experiment 2 needs --checkpoint of a trained model")
        model = TransformerModel.load(resolved["checkpoint"])
        logobj = _read_log(resolved)
        _, test_log = split(logobj, float(resolved.get("train_frac", 0.7)),
                            seed=int(resolved.get("seed", 0)))
        prefixes = extract_prefixes(test_log, min_len=1)
        result = prestudy.experiment2(model, prefixes)
        _write_resolved(out, resolved, "prestudy")
        (out / "exp2.csv").write_text(result.to_csv(), encoding="utf-8")
        (out / "exp2.json").write_text(result.to_json(), encoding="utf-8")
        sys.stdout.write(f"wrote {len(result.tvd_values)} TVD values\n")
    else:
        raise SchemaError(f"unknown experiment {which!r}")
    return 0


def _explainer_handle(resolved):
    method = resolved["method"]
    thresholds = _thresholds(resolved)
    n_mods = int(resolved.get("n_mods", 20))
    subset_cap = int(resolved.get("subset_cap", 256))
    seed = int(resolved.get("seed", 0))
    if method == "backward":
        def handle(model, prefixes):
            return backward_explain(model, prefixes, thresholds, n_mods=n_mods, seed=seed)
    elif method == "attention-exploration":
        def handle(model, prefixes):
            return attention_exploration_explain(model, prefixes, thresholds,
                                                 subset_cap=subset_cap, seed=seed,
                                                 n_mods=n_mods)
    else:
        raise SchemaError(f"unknown explainer method {method!r}")
    return handle, thresholds


def _explain_prefixes(resolved, model) -> list:
    logobj = _read_log(resolved)
    _, test_log = split(logobj, float(resolved.get("train_frac", 0.7)),
                        seed=int(resolved.get("seed", 0)))
    prefixes = extract_prefixes(test_log, min_len=1)
    if resolved.get("dedup", True):
        seen = set()
        unique = []
        for p in prefixes:
            if p.activities not in seen:
                seen.add(p.activities)
                unique.append(p)
        prefixes = unique
    return prefixes


def cmd_explain(args) -> int:
    resolved = _resolve(args, _LOG_KEYS + _THRESHOLD_KEYS
                        + ("method", "checkpoint", "train_frac", "seed", "out_dir", "dedup"))
    model = TransformerModel.load(resolved["checkpoint"])
    handle, thresholds = _explainer_handle(resolved)
    prefixes = _explain_prefixes(resolved, model)
    graph = handle(model, prefixes)
    out = Path(resolved["out_dir"])
    _write_resolved(out, resolved, "explain")
    (out / "graph.dot").write_text(to_dot(graph), encoding="utf-8")
    (out / "graph.json").write_text(to_json(graph), encoding="utf-8")
    provenance = {
        "method": resolved["method"],
        "thresholds": asdict(thresholds),
        "seed": int(resolved.get("seed", 0)),
        "n_prefixes": len(prefixes),
        "n_vertices": len(graph.vertices),
        "n_edges": len(graph.edges),
    }
    (out / "provenance.json").write_text(
        json.dumps(provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    sys.stdout.write(f"graph: {len(graph.vertices)} vertices, {len(graph.edges)} edges\n")
    return 0


def cmd_evaluate(args) -> int:
    resolved = _resolve(args, _LOG_KEYS + _THRESHOLD_KEYS
                        + ("method", "checkpoint", "train_frac", "seed",
                           "sample_frac", "out_dir", "dedup"))
    model = TransformerModel.load(resolved["checkpoint"])
    handle, thresholds = _explainer_handle(resolved)
    logobj = _read_log(resolved)
    _, test_log = split(logobj, float(resolved.get("train_frac", 0.7)),
                        seed=int(resolved.get("seed", 0)))
    report = metrics.evaluate_all(
        model, handle, test_log,
        sample_frac=float(resolved.get("sample_frac", 1.0)),
        thresholds=thresholds, seed=int(resolved.get("seed", 0)),
    )
    out = Path(resolved["out_dir"])
    _write_resolved(out, resolved, "evaluate")
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.to_table(), encoding="utf-8")
    sys.stdout.write(report.to_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnexplain",
        description="Train, probe, and explain a transformer next-activity predictor.",
    )
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int, help="root random seed")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory")
    parser.add_argument("--train-frac", dest="train_frac", type=float)
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap (1 guarantees determinism)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="print summary statistics for an event log")
    _add_log_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="generate a synthetic log from a structure spec")
    p.add_argument("--spec", required=True, help="structure spec file")
    p.add_argument("--n-traces", dest="n_traces", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and report weighted F1")
    _add_log_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prestudy", help="run reliability experiment 1 or 2")
    p.add_argument("--which", choices=["exp1", "exp2"], required=True)
    p.add_argument("--repeats", type=int)
    p.add_argument("--checkpoint")
    p.add_argument("--scope", choices=["all_heads", "per_head"])
    _add_log_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_prestudy)

    p = sub.add_parser("explain", help="build an explanation graph")
    p.add_argument("--method", choices=["backward", "attention-exploration"], required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--no-dedup", dest="dedup", action="store_false", default=None,
                   help="keep duplicate prefixes instead of unique variants")
    _add_log_flags(p)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="run the five explanation metrics")
    p.add_argument("--method", choices=["backward", "attention-exploration"], required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sample-frac", dest="sample_frac", type=float)
    _add_log_flags(p)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _PARSE_ERRORS as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_PARSE
    except _NUMERIC_ERRORS as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_NUMERIC
    except FileNotFoundError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_IO
    except KeyError as e:
        sys.stderr.write(f"error: missing required option {e}\n")
        return EXIT_USAGE
    except AttnExplainError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
