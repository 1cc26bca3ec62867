"""Experiment command line: gen, train, run, eval, compare.

Every stage reads and writes plain files (session JSONL, predictions JSONL,
npz checkpoints, JSON reports) so any stage can be swapped or inspected in
isolation. The resolved configuration is echoed into each output directory.

Exit codes: 0 success, 2 validation failure, 3 acceptance-band failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import os
import sys

import yaml

from .catalog import ExerciseCatalog, default_catalog
from .core import build_vocabulary, load_sessions, save_sessions
from .evaluation import evaluate, report_table
from .judge import judge_from_env
from .model import (
    ModelForcedGenerator,
    StreamingModelPolicy,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .policy import (
    FixedIntervalPolicy,
    OraclePolicy,
    SilentPolicy,
    TemplateSampler,
    load_predictions,
    run_policy,
    save_predictions,
)
from .synthgen import SynthConfig, corpus_stats, generate_session

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BANDS = 3

_TUPLE_FIELDS = {
    "exercises_per_session",
    "transition_ticks",
    "comply_delay_ticks",
    "chain_pause_ticks",
}


def default_config():
    return {
        "synth": dataclasses.asdict(SynthConfig()),
        "train": dataclasses.asdict(TrainConfig()),
        "gen": {
            "n_sessions": 100,
            "seed": 0,
            "check_bands": True,
            "bands": {
                "mean_silence_s": [4.7, 5.7],
                "mean_feedbacks_per_segment": [4.0, 6.0],
                "mean_feedback_length_words": [4.0, 9.0],
            },
        },
        "run": {"policy": "stream", "interval": 5.0, "seed": 0},
        "eval": {
            "window": 3.0,
            "similarity": "unigram_f",
            "matcher": "dp",
            "judge_concurrency": 4,
        },
        "catalog": None,  # path to a catalog YAML, or null for the built-in one
    }


def _deep_update(base, extra):
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def _apply_override(cfg, item):
    if "=" not in item:
        raise ValueError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = yaml.safe_load(raw)


def resolve_config(config_path=None, overrides=()):
    cfg = default_config()
    if config_path:
        with open(config_path) as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ValueError("config file must contain a mapping")
        _deep_update(cfg, loaded)
    for item in overrides:
        _apply_override(cfg, item)
    return cfg


def _synth_config(cfg):
    raw = dict(cfg["synth"])
    for name in _TUPLE_FIELDS:
        if name in raw and isinstance(raw[name], list):
            raw[name] = tuple(raw[name])
    return SynthConfig(**raw)


def _train_config(cfg):
    return TrainConfig(**cfg["train"])


def _catalog(cfg):
    path = cfg.get("catalog")
    if path:
        return ExerciseCatalog.load(path)
    return default_catalog()


def _ensure_outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _echo_config(cfg, outdir):
    with open(os.path.join(outdir, "config_resolved.yaml"), "w") as f:
        yaml.safe_dump(cfg, f, sort_keys=True)


def _vocabulary(catalog):
    return build_vocabulary(catalog.all_template_word_sequences())


# ---------------------------------------------------------------------------
# gen


def _gen_one(args):
    seed, catalog, synth_cfg = args
    return generate_session(seed, catalog, synth_cfg)


def _session_seeds(n, base_seed):
    import numpy as np

    root = np.random.SeedSequence(base_seed)
    return [int(s.generate_state(1)[0]) for s in root.spawn(n)]


def cmd_gen(cfg, outdir, jobs=1):
    synth_cfg = _synth_config(cfg)
    catalog = _catalog(cfg)
    gen_cfg = cfg["gen"]
    n = int(gen_cfg["n_sessions"])
    if n < 1:
        print("gen: n_sessions must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    _ensure_outdir(outdir)
    _echo_config(cfg, outdir)
    tasks = [(s, catalog, synth_cfg) for s in _session_seeds(n, int(gen_cfg["seed"]))]
    if jobs > 1 and n > 1:
        with multiprocessing.Pool(jobs) as pool:
            sessions = pool.map(_gen_one, tasks)
    else:
        sessions = [_gen_one(t) for t in tasks]
    save_sessions(sessions, os.path.join(outdir, "sessions.jsonl"))
    stats = corpus_stats(sessions)

    failures = []
    if gen_cfg.get("check_bands", True):
        for name, (lo, hi) in gen_cfg.get("bands", {}).items():
            value = stats[name]
            if not lo <= value <= hi:
                failures.append(f"{name}={value:.3f} outside [{lo}, {hi}]")
    stats["bands_ok"] = not failures
    stats["band_failures"] = failures
    with open(os.path.join(outdir, "stats.json"), "w") as f:
        json.dump(stats, f, indent=2)
        f.write("\n")
    print(
        f"gen: wrote {n} sessions to {outdir} "
        f"(silence {stats['mean_silence_s']:.2f} s, "
        f"{stats['mean_feedbacks_per_segment']:.2f} feedbacks/segment, "
        f"{stats['mean_feedback_length_words']:.2f} words/feedback)"
    )
    if failures:
        for msg in failures:
            print(f"gen: band failure: {msg}", file=sys.stderr)
        return EXIT_BANDS
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def cmd_train(cfg, sessions_path, outdir):
    train_cfg = _train_config(cfg)
    catalog = _catalog(cfg)
    vocab = _vocabulary(catalog)
    sessions = load_sessions(sessions_path)
    if not sessions:
        print("train: no sessions in input file", file=sys.stderr)
        return EXIT_VALIDATION
    _ensure_outdir(outdir)
    _echo_config(cfg, outdir)

    def progress(epoch, loss_value):
        print(f"train: epoch {epoch + 1}/{train_cfg.epochs} loss {loss_value:.4f}")

    params, curve = train(sessions, vocab, train_cfg, progress=progress)
    save_checkpoint(os.path.join(outdir, "checkpoint.npz"), params, vocab)
    with open(os.path.join(outdir, "loss_curve.csv"), "w") as f:
        f.write("epoch,loss\n")
        for i, value in enumerate(curve):
            f.write(f"{i},{value:.6f}\n")
    print(f"train: wrote checkpoint and loss curve to {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run


def _build_policy(name, session, cfg, catalog, params, vocab):
    run_cfg = cfg["run"]
    if name == "stream":
        if params is None:
            raise ValueError("the stream policy needs --checkpoint")
        return StreamingModelPolicy(params, vocab)
    if name == "fixed":
        if params is not None:
            generator = ModelForcedGenerator(params, vocab)
        else:
            generator = TemplateSampler(
                session, catalog, seed=(int(run_cfg["seed"]), session.seed)
            )
        return FixedIntervalPolicy(
            interval=float(run_cfg["interval"]),
            generator=generator,
            tick_len=session.tick_len,
        )
    if name == "oracle":
        return OraclePolicy(session)
    if name == "silent":
        return SilentPolicy()
    raise ValueError(f"unknown policy {name!r}")


def _run_one(args):
    session, name, cfg, catalog, params, vocab = args
    policy = _build_policy(name, session, cfg, catalog, params, vocab)
    feedbacks = run_policy(session, policy)
    return session.id, name, feedbacks


def cmd_run(cfg, sessions_path, outdir, checkpoint=None, policy=None, jobs=1):
    name = policy or cfg["run"]["policy"]
    catalog = _catalog(cfg)
    sessions = load_sessions(sessions_path)
    if not sessions:
        print("run: no sessions in input file", file=sys.stderr)
        return EXIT_VALIDATION
    params = vocab = None
    if checkpoint:
        params, vocab = load_checkpoint(checkpoint)
    try:
        tasks = [(s, name, cfg, catalog, params, vocab) for s in sessions]
        if jobs > 1 and len(tasks) > 1:
            with multiprocessing.Pool(jobs) as pool:
                records = pool.map(_run_one, tasks)
        else:
            records = [_run_one(t) for t in tasks]
    except ValueError as err:
        print(f"run: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    _ensure_outdir(outdir)
    _echo_config(cfg, outdir)
    save_predictions(records, os.path.join(outdir, "predictions.jsonl"))
    n_fb = sum(len(r[2]) for r in records)
    print(
        f"run: policy {name!r} produced {n_fb} feedbacks "
        f"over {len(records)} sessions -> {outdir}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval / compare


def _load_grouped_predictions(path):
    """Predictions JSONL grouped by policy name, insertion-ordered."""
    grouped = {}
    for session_id, policy_name, feedbacks in load_predictions(path):
        grouped.setdefault(policy_name, []).append((session_id, feedbacks))
    return grouped


def _evaluate_file(cfg, sessions, predictions_path, judge, jobs):
    eval_cfg = cfg["eval"]
    reports = []
    for policy_name, records in _load_grouped_predictions(predictions_path).items():
        reports.append(
            evaluate(
                sessions,
                records,
                window=float(eval_cfg["window"]),
                similarity=eval_cfg["similarity"],
                matcher=eval_cfg["matcher"],
                judge=judge,
                judge_concurrency=int(eval_cfg["judge_concurrency"]),
                policy_name=policy_name,
                jobs=jobs,
            )
        )
    return reports


def cmd_eval(cfg, sessions_path, predictions_path, outdir, use_judge=False, jobs=1):
    sessions = load_sessions(sessions_path)
    judge = None
    if use_judge:
        judge = judge_from_env()
        if judge is None:
            print(
                "eval: --judge given but no judge endpoint configured "
                "(set STREAMCOACH_JUDGE_URL)",
                file=sys.stderr,
            )
            return EXIT_VALIDATION
    try:
        reports = _evaluate_file(cfg, sessions, predictions_path, judge, jobs)
    except ValueError as err:
        print(f"eval: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    if not reports:
        print("eval: no predictions in input file", file=sys.stderr)
        return EXIT_VALIDATION
    _ensure_outdir(outdir)
    _echo_config(cfg, outdir)
    payload = [rep.to_dict() for rep in reports]
    with open(os.path.join(outdir, "report.json"), "w") as f:
        json.dump(payload[0] if len(payload) == 1 else payload, f, indent=2)
        f.write("\n")
    table = report_table(reports)
    with open(os.path.join(outdir, "report.txt"), "w") as f:
        f.write(table + "\n")
    print(table)
    return EXIT_OK


def cmd_compare(cfg, sessions_path, prediction_paths, outdir, use_judge=False, jobs=1):
    sessions = load_sessions(sessions_path)
    judge = None
    if use_judge:
        judge = judge_from_env()
        if judge is None:
            print(
                "compare: --judge given but no judge endpoint configured",
                file=sys.stderr,
            )
            return EXIT_VALIDATION
    reports = []
    try:
        for path in prediction_paths:
            reports.extend(_evaluate_file(cfg, sessions, path, judge, jobs))
    except ValueError as err:
        print(f"compare: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    if not reports:
        print("compare: no predictions found", file=sys.stderr)
        return EXIT_VALIDATION
    _ensure_outdir(outdir)
    _echo_config(cfg, outdir)
    with open(os.path.join(outdir, "report.json"), "w") as f:
        json.dump([rep.to_dict() for rep in reports], f, indent=2)
        f.write("\n")
    table = report_table(reports)
    with open(os.path.join(outdir, "report.txt"), "w") as f:
        f.write(table + "\n")
    print(table)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="streamcoach",
        description="Seeded coaching-session experiments: generate, train, "
        "run policies, evaluate.",
    )
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry, dotted keys (e.g. synth.tick_len=0.5)",
    )
    parser.add_argument(
        "--jobs", type=int, default=1, help="worker processes for per-session work"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a seeded session corpus")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the streaming model")
    p.add_argument("--sessions", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="replay sessions through a policy")
    p.add_argument("--sessions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--policy", choices=["stream", "fixed", "oracle", "silent"], default=None
    )
    p.add_argument("--checkpoint", default=None)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--sessions", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--judge", action="store_true", help="use the judge endpoint")

    p = sub.add_parser("compare", help="side-by-side table over prediction files")
    p.add_argument("--sessions", required=True)
    p.add_argument("--predictions", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--judge", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.config, args.overrides)
    except (OSError, ValueError, yaml.YAMLError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        if args.command == "gen":
            return cmd_gen(cfg, args.out, jobs=args.jobs)
        if args.command == "train":
            return cmd_train(cfg, args.sessions, args.out)
        if args.command == "run":
            return cmd_run(
                cfg,
                args.sessions,
                args.out,
                checkpoint=args.checkpoint,
                policy=args.policy,
                jobs=args.jobs,
            )
        if args.command == "eval":
            return cmd_eval(
                cfg,
                args.sessions,
                args.predictions,
                args.out,
                use_judge=args.judge,
                jobs=args.jobs,
            )
        if args.command == "compare":
            return cmd_compare(
                cfg,
                args.sessions,
                args.predictions,
                args.out,
                use_judge=args.judge,
                jobs=args.jobs,
            )
    except (OSError, ValueError, TypeError) as err:
        print(f"{args.command}: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
