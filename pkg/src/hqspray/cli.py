"""Command-line entry point: ``hqspray simulate|corpus|train|predict|compare|plot``."""
from __future__ import annotations

import argparse
import os
import sys
import warnings

from . import __version__
from . import pipeline as P
from .config import ConfigError, load_config, accident_scenario, scale_config, validate
from .engine import run_to_dir
from .features import LabelRule, ReportParseError
from .forest import ForestConfig, ModelFormatError

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read_config(path: str):
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())


def _scale(value: str) -> float:
    v = float(value)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("scale must be in (0, 1]")
    return v


def _positive_int(value: str) -> int:
    v = int(value)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _seeds(value: str) -> list[int]:
    try:
        return P.parse_seeds(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_simulate(a) -> int:
    cfg = _read_config(a.config) if a.config else accident_scenario(a.pedestrians, a.cars, name="scenario")
    changes = {}
    if a.seed is not None:
        changes["rng_seed"] = a.seed
    if a.end_time is not None:
        changes["end_time"] = a.end_time
    if a.hq_nodes is not None:
        changes["high_quality_nodes"] = frozenset(n.strip() for n in a.hq_nodes.split(",") if n.strip())
    if a.hq_multiplier is not None:
        changes["hq_multiplier"] = a.hq_multiplier
    if a.copies is not None:
        changes["nrof_copies"] = a.copies
    if changes:
        cfg = cfg.replace(**changes)
    cfg = scale_config(cfg, a.scale)
    validate(cfg)
    summary = run_to_dir(cfg, a.out, a.scenario or cfg.name)
    s = summary.stats
    print(f"{len(summary.hosts)} hosts, end {cfg.end_time:g} s: created {s.created}, delivered {s.delivered}, "
          f"delivery_prob {s.delivery_prob:.4f}")
    return EXIT_OK


def cmd_corpus(a) -> int:
    paths = P.generate_corpus(a.out, seed=a.seed, scale=a.scale, workers=a.workers)
    print(f"wrote {len(paths)} report files to {a.out}")
    return EXIT_OK


def _label_rule(a) -> LabelRule:
    return LabelRule(max_hopcount=a.max_hopcount, min_deliveries=a.min_deliveries,
                     sample_fraction=a.sample_fraction, rng_seed=a.label_seed)


def _forest_cfg(a) -> ForestConfig:
    return ForestConfig(n_trees=a.n_trees, max_depth=a.max_depth, max_features=a.max_features,
                        min_samples_split=a.min_samples_split, rng_seed=a.forest_seed)


def cmd_train(a) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = P.train(a.reports, a.out, days=a.days, rule=_label_rule(a), forest_cfg=_forest_cfg(a),
                      train_fraction=a.train_fraction, split_seed=a.split_seed, from_csv=a.from_csv)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"{res.n_rows} rows ({res.positives} high-quality), train {res.n_train}, test {res.n_test}")
    print(res.report, end="")
    return EXIT_OK


def cmd_predict(a) -> int:
    forest = P.load_model(a.model)
    with open(a.connectivity, encoding="utf-8") as fh:
        rows = P.predict_nodes(forest, fh.read())
    hq = [n for n, p, _ in rows if p == 1]
    os.makedirs(a.out, exist_ok=True)
    with open(os.path.join(a.out, "hq_nodes.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(P.hq_fragment(hq))
    with open(os.path.join(a.out, "predictions.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(P.predictions_csv(rows))
    print(P.hq_fragment(hq), end="")
    return EXIT_OK


def cmd_compare(a) -> int:
    base = _read_config(a.config) if a.config else None
    forest = P.load_model(a.model)
    plan = P.evaluation_plan(a.seeds, a.scale, base)
    rows = P.compare(plan, forest, a.out, workers=a.workers, charts=not a.no_charts)
    with open(os.path.join(a.out, "comparison_table.txt"), encoding="utf-8") as fh:
        print(fh.read(), end="")
    print(f"{len(rows)} per-seed rows written to {os.path.join(a.out, 'comparison.csv')}")
    return EXIT_OK


def cmd_plot(a) -> int:
    paths = P.plot(a.csv, a.out)
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hqspray", description="Spray-and-Wait DTN experiments with random-forest "
                                 "selected high-quality nodes.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run one scenario and write its three reports")
    sp.add_argument("config", nargs="?", help="settings file (default: built-in accident scenario)")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--scenario", help="report file prefix (default: Scenario.name)")
    sp.add_argument("--seed", type=int, help="Scenario.rngSeed override")
    sp.add_argument("--end-time", type=float, help="Scenario.endTime override (seconds)")
    sp.add_argument("--pedestrians", type=_positive_int, default=60, help="built-in scenario only")
    sp.add_argument("--cars", type=_positive_int, default=70, help="built-in scenario only")
    sp.add_argument("--hq-nodes", help="comma-separated Group.highQualityNodes override")
    sp.add_argument("--hq-multiplier", type=_positive_int)
    sp.add_argument("--copies", type=_positive_int, help="SprayAndWaitRouter.nrofCopies override")
    sp.add_argument("--scale", type=_scale, default=1.0, help="shrink node counts and duration (e.g. 0.33)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("corpus", help="simulate the ten training days")
    sp.add_argument("out")
    sp.add_argument("--seed", type=int, default=1000, help="base seed; day N uses seed+N")
    sp.add_argument("--scale", type=_scale, default=1.0)
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.set_defaults(func=cmd_corpus)

    sp = sub.add_parser("train", help="build the dataset from day reports and fit the forest")
    sp.add_argument("reports", help="directory with day{N}_*Report.txt files")
    sp.add_argument("out", help="output directory for CSVs, model.txt and classification_report.txt")
    sp.add_argument("--days", type=_positive_int, default=len(P.TRAINING_PAIRS))
    sp.add_argument("--from-csv", action="store_true", help="read features_dayN/labels_dayN CSVs instead")
    sp.add_argument("--max-hopcount", type=_positive_int, default=2)
    sp.add_argument("--min-deliveries", type=_positive_int, default=8)
    sp.add_argument("--sample-fraction", type=float, default=0.5)
    sp.add_argument("--label-seed", type=int, default=0)
    sp.add_argument("--n-trees", type=_positive_int, default=200)
    sp.add_argument("--max-depth", type=_positive_int, default=None)
    sp.add_argument("--max-features", type=_positive_int, default=2)
    sp.add_argument("--min-samples-split", type=_positive_int, default=2)
    sp.add_argument("--forest-seed", type=int, default=0)
    sp.add_argument("--train-fraction", type=float, default=0.7)
    sp.add_argument("--split-seed", type=int, default=0)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="predict high-quality nodes from a connectivity report")
    sp.add_argument("model")
    sp.add_argument("connectivity")
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("compare", help="original / hq / random arms over weekday and holiday scenarios")
    sp.add_argument("model")
    sp.add_argument("out")
    sp.add_argument("--config", help="base settings file; pedestrian and car counts are set per scenario")
    sp.add_argument("--seeds", type=_seeds, default=list(range(1, 11)), help="e.g. 1-10 or 1,4,7")
    sp.add_argument("--scale", type=_scale, default=1.0)
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.add_argument("--no-charts", action="store_true")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("plot", help="grouped-bar SVG charts from comparison.csv")
    sp.add_argument("csv")
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"hqspray: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (P.PipelineError, ReportParseError, ModelFormatError, ValueError, OSError, RuntimeError) as exc:
        print(f"hqspray: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
