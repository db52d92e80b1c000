"""End-to-end experiment: training corpus, forest training, HQ prediction, three-arm comparison, charts."""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import re
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .config import SimConfig, accident_scenario, scale_config
from .engine import run_reports
from .features import (
    LabelRule, build_dataset, compute_features, dataset_csv, features_csv, label_high_quality, labels_csv,
    parse_connectivity, parse_delivered, read_features_csv, read_labels_csv,
)
from .forest import (
    FEATURE_NAMES, ForestConfig, RandomForest, classification_report, evaluate, train_test_split,
)
from .reports import CONNECTIVITY, DELIVERED, MESSAGE_STATS, fmt_ratio

TRAINING_PAIRS = ((50, 60), (50, 65), (50, 70), (55, 65), (55, 60), (60, 70), (60, 80), (60, 60), (65, 75), (70, 80))
EVALUATION = {"weekday": (60, 70), "holiday": (75, 85)}
ARMS = ("original", "hq", "random")
METRICS = ("delivery_prob", "overhead_ratio", "latency_avg", "buffertime_avg")
METRIC_TITLES = {
    "delivery_prob": "Delivery prob", "overhead_ratio": "Overhead ratio",
    "latency_avg": "Latency avg", "buffertime_avg": "Buffertime avg",
}
CSV_HEADER = ["scenario", "seed", "arm", "hq_count", *METRICS]


class PipelineError(RuntimeError):
    pass


def day_report_path(directory: str, day: int, kind: str) -> str:
    return os.path.join(directory, f"day{day}_{kind}.txt")


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


# ---- training corpus -------------------------------------------------------

def training_config(day: int, pedestrians: int, cars: int, seed: int, scale: float = 1.0) -> SimConfig:
    cfg = accident_scenario(pedestrians, cars, seed=seed + day, name=f"day{day}")
    return scale_config(cfg, scale)


def generate_corpus(out_dir: str, *, pairs=TRAINING_PAIRS, seed: int = 1000, scale: float = 1.0,
                    workers: int = 1) -> list[str]:
    """Simulate one run per training pair and write ``day{N}_*`` reports; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    cfgs = [training_config(d, p, c, seed, scale) for d, (p, c) in enumerate(pairs, start=1)]
    results = _map(_corpus_day, cfgs, workers)
    written = []
    for day, reports in enumerate(results, start=1):
        for kind in (CONNECTIVITY, DELIVERED, MESSAGE_STATS):
            path = day_report_path(out_dir, day, kind)
            _write(path, reports[kind])
            written.append(path)
    return written


def _corpus_day(cfg: SimConfig) -> dict[str, str]:
    return run_reports(cfg)[1]


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


# ---- training ----------------------------------------------------------------

@dataclass
class TrainResult:
    forest: RandomForest
    metrics: object
    n_rows: int
    n_train: int
    n_test: int
    positives: int
    report: str


def extract_day(report_dir: str, day: int, rule: LabelRule, out_dir: str | None = None):
    conn = day_report_path(report_dir, day, CONNECTIVITY)
    deliv = day_report_path(report_dir, day, DELIVERED)
    feats = compute_features(parse_connectivity(_read(conn)))
    labels = label_high_quality(parse_delivered(_read(deliv)), rule)
    # unlabelled nodes without contacts would break the join; they carry no features anyway
    have = {f.node for f in feats}
    labels = [ln for ln in labels if ln.node in have]
    if out_dir is not None:
        _write(os.path.join(out_dir, f"features_day{day}.csv"), features_csv(feats))
        _write(os.path.join(out_dir, f"labels_day{day}.csv"), labels_csv(labels))
    return feats, labels


def missing_days(report_dir: str, days: int) -> list[int]:
    missing = []
    for d in range(1, days + 1):
        if not all(os.path.isfile(day_report_path(report_dir, d, k)) for k in (CONNECTIVITY, DELIVERED)):
            missing.append(d)
    return missing


def train(report_dir: str, out_dir: str, *, days: int = len(TRAINING_PAIRS), rule: LabelRule = LabelRule(),
          forest_cfg: ForestConfig = ForestConfig(), train_fraction: float = 0.7, split_seed: int = 0,
          from_csv: bool = False) -> TrainResult:
    """Build the labelled dataset from ``days`` report pairs, fit the forest and write its outputs.

    With ``from_csv`` the per-day ``features_dayN.csv`` / ``labels_dayN.csv``
    already in ``report_dir`` are used instead of re-parsing the reports.
    """
    os.makedirs(out_dir, exist_ok=True)
    feats_by_day, labels_by_day = [], []
    if from_csv:
        for d in range(1, days + 1):
            fp = os.path.join(report_dir, f"features_day{d}.csv")
            lp = os.path.join(report_dir, f"labels_day{d}.csv")
            if not (os.path.isfile(fp) and os.path.isfile(lp)):
                raise PipelineError(f"missing feature/label CSVs for day {d} in {report_dir}")
            feats_by_day.append(read_features_csv(_read(fp), fp))
            labels_by_day.append(read_labels_csv(_read(lp), lp))
    else:
        missing = missing_days(report_dir, days)
        if missing:
            raise PipelineError(f"missing reports for days {missing} in {report_dir}")
        for d in range(1, days + 1):
            f, lab = extract_day(report_dir, d, rule, out_dir)
            feats_by_day.append(f)
            labels_by_day.append(lab)
    data = build_dataset(feats_by_day, labels_by_day)
    _write(os.path.join(out_dir, "dataset.csv"), dataset_csv(data))
    tr, te = train_test_split(data, train_fraction, split_seed)
    forest = RandomForest.fit(tr, forest_cfg)
    metrics = evaluate(forest, te)
    report = classification_report(metrics)
    _write(os.path.join(out_dir, "model.txt"), forest.dumps())
    _write(os.path.join(out_dir, "classification_report.txt"), report)
    return TrainResult(forest, metrics, len(data), len(tr), len(te), int(data.y.sum()), report)


# ---- prediction --------------------------------------------------------------

def load_model(path: str) -> RandomForest:
    return RandomForest.loads(_read(path), FEATURE_NAMES)


def predict_nodes(forest: RandomForest, connectivity_text: str) -> list[tuple[str, int, int]]:
    """``(node, prediction, votes for class 1)`` for every node with contacts in the trace."""
    feats = compute_features(parse_connectivity(connectivity_text))
    if not feats:
        return []
    X = np.array([f.values() for f in feats], dtype=np.float64)
    votes = forest.vote_counts(X)
    preds = forest.predict_many(X)
    return [(f.node, int(p), int(v)) for f, p, v in zip(feats, preds, votes)]


def predict_hq(forest: RandomForest, connectivity_text: str) -> frozenset[str]:
    return frozenset(n for n, p, _ in predict_nodes(forest, connectivity_text) if p == 1)


def hq_fragment(nodes) -> str:
    return "Group.highQualityNodes = " + ",".join(sorted(nodes)) + "\n"


def predictions_csv(rows) -> str:
    return "node,prediction,votes\n" + "".join(f"{n},{p},{v}\n" for n, p, v in rows)


# ---- comparison --------------------------------------------------------------

def random_control(hosts, k: int, seed: int, scenario_index: int) -> frozenset[str]:
    hosts = sorted(hosts)
    if k > len(hosts):
        raise PipelineError(f"cannot pick {k} control nodes from {len(hosts)} hosts")
    g = rngmod.stream(seed, rngmod.CONTROL, scenario_index)
    return frozenset(hosts[i] for i in g.choice(len(hosts), size=k, replace=False))


@dataclass(frozen=True)
class ComparisonRow:
    scenario: str
    seed: int
    arm: str
    hq_count: int
    delivery_prob: float
    overhead_ratio: float
    latency_avg: float
    buffertime_avg: float


@dataclass
class CellResult:
    rows: list[ComparisonRow]
    conn_digests: dict[str, str]
    hq: frozenset[str]
    control: frozenset[str]


@dataclass
class ComparePlan:
    scenarios: dict[str, SimConfig]
    seeds: list[int] = field(default_factory=lambda: list(range(1, 11)))


def evaluation_plan(seeds=None, scale: float = 1.0, base: SimConfig | None = None) -> ComparePlan:
    """Weekday and holiday scenarios, optionally from a base config whose mobile groups are resized."""
    import dataclasses
    scen = {}
    for name, (ped, cars) in EVALUATION.items():
        if base is None:
            cfg = accident_scenario(ped, cars, name=name)
        else:
            sizes = {"p": ped, "c": cars}
            groups = tuple(dataclasses.replace(g, count=sizes.get(g.group_id, g.count)) for g in base.groups)
            cfg = base.replace(groups=groups, name=name, high_quality_nodes=frozenset())
        scen[name] = scale_config(cfg, scale)
    return ComparePlan(scen, list(seeds) if seeds is not None else list(range(1, 11)))


def _row(scenario: str, seed: int, arm: str, hq_count: int, stats) -> ComparisonRow:
    return ComparisonRow(scenario, seed, arm, hq_count, stats.delivery_prob, stats.overhead_ratio,
                         stats.latency_avg, stats.buffertime_avg)


def run_cell(task) -> CellResult:
    """All three arms for one (scenario, seed); HQ nodes are predicted from the original arm's trace."""
    scen_index, scenario, cfg, seed, model_text = task
    forest = RandomForest.loads(model_text)
    base = cfg.replace(rng_seed=seed, high_quality_nodes=frozenset())
    s0, rep0 = run_reports(base)
    hq = predict_hq(forest, rep0[CONNECTIVITY])
    control = random_control(base.node_names(), len(hq), seed, scen_index)
    s1, rep1 = run_reports(base.replace(high_quality_nodes=hq))
    s2, rep2 = run_reports(base.replace(high_quality_nodes=control))
    digests = {arm: hashlib.sha256(r[CONNECTIVITY].encode()).hexdigest()
               for arm, r in zip(ARMS, (rep0, rep1, rep2))}
    rows = [_row(scenario, seed, arm, len(hq) if arm != "original" else 0, s.stats)
            for arm, s in zip(ARMS, (s0, s1, s2))]
    return CellResult(rows, digests, hq, control)


def compare(plan: ComparePlan, forest: RandomForest, out_dir: str | None = None, *, workers: int = 1,
            charts: bool = True) -> list[ComparisonRow]:
    """Run every (scenario, seed) cell, check arm isolation, and write CSV, table and charts."""
    model_text = forest.dumps()
    tasks = [(i, name, cfg, seed, model_text)
             for i, (name, cfg) in enumerate(plan.scenarios.items()) for seed in plan.seeds]
    results = _map(run_cell, tasks, workers)
    merged: dict[tuple[str, int, str], ComparisonRow] = {}
    for (_, name, _, seed, _), res in zip(tasks, results):
        if len(set(res.conn_digests.values())) != 1:
            raise PipelineError(f"arm isolation violated for {name} seed {seed}: contact traces differ")
        for row in res.rows:
            merged[(row.scenario, row.seed, row.arm)] = row
    order = list(plan.scenarios)
    rows = sorted(merged.values(), key=lambda r: (order.index(r.scenario), r.seed, ARMS.index(r.arm)))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write(os.path.join(out_dir, "comparison.csv"), comparison_csv(rows))
        _write(os.path.join(out_dir, "comparison_table.txt"), comparison_table(rows))
        if charts:
            write_charts(rows, out_dir)
    return rows


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


def mean_rows(rows: list[ComparisonRow]) -> list[ComparisonRow]:
    groups: dict[tuple[str, str], list[ComparisonRow]] = {}
    for r in rows:
        groups.setdefault((r.scenario, r.arm), []).append(r)
    out = []
    for (scen, arm), rs in groups.items():
        vals = {m: _nanmean([getattr(r, m) for r in rs]) for m in METRICS}
        out.append(ComparisonRow(scen, -1, arm, round(statistics.fmean(r.hq_count for r in rs)), **vals))
    return out


def _nanmean(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return statistics.fmean(vals) if vals else math.nan


def comparison_csv(rows: list[ComparisonRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.scenario, r.seed, r.arm, r.hq_count, *(_fmt(getattr(r, m)) for m in METRICS)])
    for r in mean_rows(rows):
        w.writerow([r.scenario, "mean", r.arm, r.hq_count, *(_fmt(getattr(r, m)) for m in METRICS)])
    return buf.getvalue()


def read_comparison_csv(text: str, source: str = "<comparison>") -> list[ComparisonRow]:
    """Per-seed rows of a comparison CSV (mean rows are recomputed, not read)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise PipelineError(f"{source}: no rows")
    if header != CSV_HEADER:
        raise PipelineError(f"{source}:1: expected header {','.join(CSV_HEADER)}")
    rows = []
    for row in reader:
        if not row:
            continue
        no = reader.line_num
        if len(row) != len(CSV_HEADER):
            raise PipelineError(f"{source}:{no}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        if row[1] == "mean":
            continue
        try:
            rows.append(ComparisonRow(row[0], int(row[1]), row[2], int(row[3]), *(float(v) for v in row[4:])))
        except ValueError as exc:
            raise PipelineError(f"{source}:{no}: {exc}") from None
    if not rows:
        raise PipelineError(f"{source}: no rows")
    return rows


def comparison_table(rows: list[ComparisonRow]) -> str:
    """One block per scenario: metrics down, arms across, each cell ``mean [min, max]``."""
    scenarios = list(dict.fromkeys(r.scenario for r in rows))
    arms = [a for a in ARMS if any(r.arm == a for r in rows)]
    out = []
    for scen in scenarios:
        seeds = sorted({r.seed for r in rows if r.scenario == scen})
        cells = {}
        for m in METRICS:
            for a in arms:
                vals = [getattr(r, m) for r in rows if r.scenario == scen and r.arm == a]
                finite = [v for v in vals if not math.isnan(v)]
                if finite:
                    cells[m, a] = f"{statistics.fmean(finite):.4f} [{min(finite):.4f}, {max(finite):.4f}]"
                else:
                    cells[m, a] = "NaN"
        width = max([len(c) for c in cells.values()] + [len(a) for a in arms]) + 2
        out.append(f"{scen} ({len(seeds)} seeds)")
        out.append(f"{'':<16}" + "".join(f"{a:>{width}}" for a in arms))
        for m in METRICS:
            out.append(f"{METRIC_TITLES[m]:<16}" + "".join(f"{cells[m, a]:>{width}}" for a in arms))
        out.append("")
    return "\n".join(out)


# ---- charts ------------------------------------------------------------------

_COLOURS = {"original": "#4c72b0", "hq": "#dd8452", "random": "#55a868"}


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def bar_chart_svg(title: str, groups: list[str], series: list[str], values: dict[tuple[str, str], float]) -> str:
    """Grouped vertical bars: one group per scenario, one bar per arm."""
    W, H, left, bottom, top = 640, 400, 70, 50, 40
    plot_w, plot_h = W - left - 20, H - top - bottom
    finite = [v for v in values.values() if not math.isnan(v)]
    vmax = max(finite) if finite else 1.0
    vmax = vmax * 1.1 if vmax > 0 else 1.0
    gw = plot_w / max(1, len(groups))
    bw = gw * 0.7 / max(1, len(series))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{_esc(title)}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
    ]
    for k in range(5):
        v = vmax * k / 4
        y = top + plot_h - plot_h * k / 4
        parts.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{v:.4g}</text>')
    for gi, g in enumerate(groups):
        x0 = left + gi * gw + gw * 0.15
        for si, s in enumerate(series):
            v = values.get((g, s), math.nan)
            if math.isnan(v):
                continue
            h = plot_h * v / vmax
            x = x0 + si * bw
            parts.append(f'<rect x="{x:.1f}" y="{top + plot_h - h:.1f}" width="{bw * 0.9:.1f}" height="{h:.1f}" '
                         f'fill="{_COLOURS.get(s, "#888888")}"><title>{_esc(s)}: {v:.4f}</title></rect>')
        parts.append(f'<text x="{left + gi * gw + gw / 2:.1f}" y="{top + plot_h + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12">{_esc(g)}</text>')
    for si, s in enumerate(series):
        y = top + 14 * si
        parts.append(f'<rect x="{W - 110}" y="{y}" width="10" height="10" fill="{_COLOURS.get(s, "#888888")}"/>')
        parts.append(f'<text x="{W - 95}" y="{y + 9}" font-family="sans-serif" font-size="11">{_esc(s)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_charts(rows: list[ComparisonRow], out_dir: str) -> list[str]:
    if not rows:
        raise PipelineError("no rows")
    means = mean_rows(rows)
    groups = list(dict.fromkeys(r.scenario for r in rows))
    series = [a for a in ARMS if any(r.arm == a for r in rows)]
    series += sorted({r.arm for r in rows} - set(series))
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for m in METRICS:
        vals = {(r.scenario, r.arm): getattr(r, m) for r in means}
        path = os.path.join(out_dir, f"{m}.svg")
        _write(path, bar_chart_svg(f"{METRIC_TITLES[m]} comparison", groups, series, vals))
        paths.append(path)
    return paths


def plot(csv_path: str, out_dir: str) -> list[str]:
    return write_charts(read_comparison_csv(_read(csv_path), csv_path), out_dir)


_SEED_RANGE = re.compile(r"^(\d+)-(\d+)$")


def parse_seeds(text: str) -> list[int]:
    """``"1-10"`` or ``"1,5,9"`` (or a mix) to a list of seeds."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        m = _SEED_RANGE.match(part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    if any(s < 0 or s >= 2 ** 64 for s in seeds):
        raise ValueError("seeds must be 64-bit unsigned integers")
    return seeds


def fmt_summary(rows: list[ComparisonRow]) -> str:
    lines = []
    for r in mean_rows(rows):
        lines.append(f"{r.scenario:<8} {r.arm:<8} " + " ".join(f"{m}={fmt_ratio(getattr(r, m))}" for m in METRICS))
    return "\n".join(lines)
