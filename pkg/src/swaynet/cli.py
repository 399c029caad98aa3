"""Pipeline command line.

Stages: ingest|synth -> backbone -> align -> growth -> [simulate|fit] ->
report. Every stage reads its declared inputs from the artifacts directory,
writes its declared outputs there, and prints a one-line summary. All
randomness flows from --seed; outputs embed the seed and content hashes of
their inputs, and re-running a stage with identical inputs and seed yields
byte-identical files.

Exit codes: 0 ok, 1 validation error, 2 missing input, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, fields
from datetime import datetime, timezone

import numpy as np

from . import report as rep
from . import rng as rngmod
from .alignment import classify_all, coverage_curve, involvement_profiles, ternary_histogram
from .backbone import disparity_filter, edge_significance, global_threshold_backbone, strong_disorder_test
from .events import CONTENT_CLASSES, write_events_jsonl, write_flag_rates_csv, write_follower_logs_csv
from .graph import WeightedDigraph, load_binary, save_binary
from .growth import GrowthPoint, TimeWindow, sliding_windows, trend_line, window_growth_rate
from .sir import FitConfig, FollowerSnapshots, build_cascade_setup, fit_parameters, simulate_growth_rate
from .store import EventColumns, file_sha256, load_or_parse
from .synth import SynthConfig, synthesize

EVENTS_FILE = "events.jsonl"
CACHE_DIR = "events_cache"
LOGS_FILE = "follower_logs.csv"
FLAGS_FILE = "flag_rates.csv"
TRUTH_FILE = "truth.json"
PARSE_ERRORS_FILE = "parse_errors.csv"
BACKBONE_FILE = "backbone.bin"
BACKBONE_META = "backbone_meta.json"
LABELS_FILE = "alignment_labels.csv"
GROWTH_FILE = "growth.csv"
FIT_FILE = "fit.json"

DEFAULT_ALPHA_GRID = (0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 1 / np.e, 0.5, 1.0)
DEFAULT_THETA_GRID = tuple(round(0.5 + 0.05 * i, 2) for i in range(10)) + (0.99,)


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 1."""


class MissingInput(Exception):
    """Missing upstream artifact; maps to exit code 2."""


@dataclass
class PipelineConfig:
    out: str = ""
    seed: int = 0
    threads: int = 1
    events: str | None = None
    fmt: str | None = None
    range_start: int | None = None
    range_end: int | None = None
    window_days: int = 30
    step_days: int = 15
    alpha: float = 0.05
    alpha_grid: tuple[float, ...] | None = None
    theta: float = 0.95
    theta_grid: tuple[float, ...] = DEFAULT_THETA_GRID
    bins: int = 20
    min_involvement: int = 0
    unfiltered: bool = False
    min_obs: int = 2
    lookback: int = 1
    r0_min: float = 0.0
    r0_max: float = 5.0
    r0_step: float = 0.05
    runs: int = 100
    tolerance: float = 0.10
    delta: float | None = None
    r0: float | None = None
    single_pass: bool = False
    band_multiplier: float = 2.0
    fit_range: tuple[float, float] | None = None
    gtb_quantiles: tuple[float, ...] = (0.99, 0.999)
    emit_significance: bool = False
    strict: bool = False
    # synthetic generation
    synth_aligned_factual: int = 50
    synth_aligned_misleading: int = 50
    synth_aligned_uncertain: int = 50
    synth_swayable: int = 500
    synth_events_factual: int = 20000
    synth_events_misleading: int = 20000
    synth_events_uncertain: int = 20000
    synth_purity: float = 0.98
    synth_follower_mu: float = 5.0
    synth_follower_sigma: float = 1.2
    synth_bot_rate: float = 0.05
    synth_verified_rate: float = 0.10
    synth_rates_factual: tuple[float, ...] | None = None
    synth_rates_misleading: tuple[float, ...] | None = None
    synth_rates_uncertain: tuple[float, ...] | None = None
    synth_reach_factual: tuple[float, ...] | None = None
    synth_reach_misleading: tuple[float, ...] | None = None
    synth_reach_uncertain: tuple[float, ...] | None = None


def validate_config(config: PipelineConfig) -> list[str]:
    """Every violated invariant, named by its offending key; empty means ok."""
    v: list[str] = []
    if not config.out:
        v.append("out: output directory is required")
    if config.threads < 1:
        v.append(f"threads: must be >= 1, got {config.threads}")
    if config.window_days <= 0 or config.step_days <= 0:
        v.append("window_days/step_days: must be positive")
    elif config.step_days > config.window_days:
        v.append("step_days: window step exceeds length")
    if not (0.0 < config.alpha <= 1.0):
        v.append(f"alpha: must be in (0, 1], got {config.alpha}")
    if config.alpha_grid is not None:
        if any(not (0.0 < a <= 1.0) for a in config.alpha_grid):
            v.append("alpha_grid: levels must be in (0, 1]")
        if any(b < a for a, b in zip(config.alpha_grid, config.alpha_grid[1:])):
            v.append("alpha_grid: must be sorted ascending")
    if not (0.5 <= config.theta < 1.0):
        v.append(f"theta: must be in [0.5, 1), got {config.theta}")
    if any(not (0.5 <= t < 1.0) for t in config.theta_grid):
        v.append("theta_grid: thresholds must be in [0.5, 1)")
    if config.bins < 1:
        v.append(f"bins: must be >= 1, got {config.bins}")
    if config.min_involvement < 0:
        v.append("min_involvement: must be >= 0")
    if config.min_obs < 2:
        v.append(f"min_obs: must be >= 2, got {config.min_obs}")
    if config.lookback < 1:
        v.append(f"lookback: must be >= 1, got {config.lookback}")
    if config.r0_step <= 0 or config.r0_max < config.r0_min or config.r0_min < 0:
        v.append("r0_min/r0_max/r0_step: invalid grid")
    if config.runs < 1:
        v.append(f"runs: must be >= 1, got {config.runs}")
    if not (0.0 < config.tolerance <= 1.0):
        v.append(f"tolerance: must be in (0, 1], got {config.tolerance}")
    if config.delta is not None and not (0.0 <= config.delta <= 1.0):
        v.append(f"delta: must be in [0, 1], got {config.delta}")
    if config.r0 is not None and config.r0 < 0:
        v.append(f"r0: must be >= 0, got {config.r0}")
    if config.band_multiplier <= 0:
        v.append("band_multiplier: must be positive")
    if config.fit_range is not None and not (0 < config.fit_range[0] < config.fit_range[1]):
        v.append("fit_range: need 0 < lo < hi")
    if any(not (0.0 < q < 1.0) for q in config.gtb_quantiles):
        v.append("gtb_quantiles: must be in (0, 1)")
    if config.range_start is not None and config.range_end is not None and config.range_start >= config.range_end:
        v.append("range_start/range_end: empty range")
    for name in ("synth_purity",):
        val = getattr(config, name)
        if not (1 / 3 < val <= 1.0):
            v.append(f"{name}: must be in (1/3, 1], got {val}")
    for name in ("synth_bot_rate", "synth_verified_rate"):
        val = getattr(config, name)
        if not (0.0 <= val <= 1.0):
            v.append(f"{name}: must be in [0, 1], got {val}")
    for name in (
        "synth_aligned_factual",
        "synth_aligned_misleading",
        "synth_aligned_uncertain",
        "synth_swayable",
        "synth_events_factual",
        "synth_events_misleading",
        "synth_events_uncertain",
    ):
        if getattr(config, name) < 0:
            v.append(f"{name}: must be >= 0")
    return v


# -- config plumbing -----------------------------------------------------------


def parse_time(text: str) -> int:
    """Accept integer UTC seconds or a YYYY-MM-DD date (UTC midnight)."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        dt = datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    except ValueError:
        raise ConfigError(f"cannot parse time {text!r}; use seconds or YYYY-MM-DD") from None


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def load_config_file(path: str) -> dict[str, str]:
    """Flat key = value format; '#' starts a comment."""
    if not os.path.exists(path):
        raise MissingInput(f"config file not found: {path}")
    values: dict[str, str] = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


_TUPLE_FLOAT_KEYS = {
    "alpha_grid",
    "theta_grid",
    "gtb_quantiles",
    "synth_rates_factual",
    "synth_rates_misleading",
    "synth_rates_uncertain",
    "synth_reach_factual",
    "synth_reach_misleading",
    "synth_reach_uncertain",
}
_TIME_KEYS = {"range_start", "range_end"}
_BOOL_KEYS = {"unfiltered", "single_pass", "emit_significance", "strict"}


def _coerce_key(key: str, raw: str):
    if key in _TUPLE_FLOAT_KEYS:
        return _parse_floats(raw)
    if key in _TIME_KEYS:
        return parse_time(raw)
    if key in _BOOL_KEYS:
        return raw.strip().lower() in ("1", "true", "yes")
    if key == "fit_range":
        lo, _, hi = raw.partition(":")
        return (float(lo), float(hi))
    return raw


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """defaults < config file < explicit CLI flags."""
    config = PipelineConfig()
    known = {f.name: f.type for f in fields(PipelineConfig)}
    if getattr(args, "config", None):
        for key, raw in load_config_file(args.config).items():
            if key not in known:
                raise ConfigError(f"unknown config key: {key}")
            value = _coerce_key(key, raw)
            if isinstance(value, str):
                current = getattr(config, key)
                if isinstance(current, bool):
                    value = raw.strip().lower() in ("1", "true", "yes")
                elif isinstance(current, int):
                    value = int(raw)
                elif isinstance(current, float):
                    value = float(raw)
            setattr(config, key, value)
    for key in known:
        if hasattr(args, key) and getattr(args, key) is not None:
            setattr(config, key, getattr(args, key))
    return config


def _check(config: PipelineConfig) -> PipelineConfig:
    violations = validate_config(config)
    if violations:
        raise ConfigError("; ".join(violations))
    return config


# -- shared stage helpers --------------------------------------------------------


def _path(config: PipelineConfig, name: str) -> str:
    return os.path.join(config.out, name)


def _require(config: PipelineConfig, name: str, produced_by: str) -> str:
    path = _path(config, name)
    if not os.path.exists(path):
        raise MissingInput(f"{path} not found; run the `{produced_by}` stage first")
    return path


def _write_meta(config: PipelineConfig, stage: str, params: dict, inputs: list[str]) -> None:
    meta = {
        "stage": stage,
        "seed": config.seed,
        "params": params,
        "inputs": {os.path.basename(p): file_sha256(p) for p in inputs if os.path.isfile(p)},
    }
    with open(_path(config, f"{stage}_meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)


def _load_columns(config: PipelineConfig, stage_for_error: str = "ingest or synth") -> EventColumns:
    events_path = _require(config, EVENTS_FILE, stage_for_error)
    return load_or_parse(events_path, _path(config, CACHE_DIR))


def _dataset_range(config: PipelineConfig, columns: EventColumns) -> tuple[int, int]:
    start = config.range_start
    end = config.range_end
    if start is None or end is None:
        if len(columns) == 0:
            raise ConfigError("range_start/range_end: required for an empty event stream")
        if start is None:
            start = int(columns.ts.min())
        if end is None:
            end = int(columns.ts.max()) + 1
    return start, end


def _write_logs_and_rates(config: PipelineConfig, columns: EventColumns) -> None:
    logs = columns.follower_logs()
    with open(_path(config, LOGS_FILE), "w", newline="") as fh:
        write_follower_logs_csv(logs, fh)
    with open(_path(config, FLAGS_FILE), "w", newline="") as fh:
        write_flag_rates_csv(columns.flag_rates(), fh)


def _load_labels(config: PipelineConfig) -> tuple[dict[str, set[str]], float]:
    path = _require(config, LABELS_FILE, "align")
    by_class: dict[str, set[str]] = {cls: set() for cls in CONTENT_CLASSES}
    theta = config.theta
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            theta = float(row["theta"])
            if row["label"] in by_class:
                by_class[row["label"]].add(row["user"])
    return by_class, theta


def _backbone_pair_mask(columns: EventColumns, backbone: WeightedDigraph) -> np.ndarray:
    """Mask of events whose aggregated edge survived the filter."""
    index = {u: i for i, u in enumerate(columns.users)}
    n = len(columns.users)
    codes = set()
    for s, d, _ in backbone.edges():
        si = index.get(s)
        di = index.get(d)
        if si is not None and di is not None:
            codes.add(si * n + di)
    if not codes:
        return np.zeros(len(columns), dtype=bool)
    wanted = np.fromiter(codes, dtype=np.int64, count=len(codes))
    wanted.sort()
    pos = np.searchsorted(wanted, columns.pair_codes())
    pos = np.clip(pos, 0, len(wanted) - 1)
    return wanted[pos] == columns.pair_codes()


def _class_graphs(columns: EventColumns, retained: np.ndarray | None) -> dict[str, WeightedDigraph]:
    graphs = {}
    for cls in CONTENT_CLASSES:
        mask = columns.event_mask(content_class=cls)
        if retained is not None:
            mask &= retained
        graphs[cls] = columns.build_graph(mask=mask)
    return graphs


# -- stages ---------------------------------------------------------------------


def cmd_ingest(config: PipelineConfig) -> str:
    if not config.events:
        raise ConfigError("events: input path is required for ingest")
    if not os.path.exists(config.events):
        raise MissingInput(f"input events file not found: {config.events}")
    time_range = None
    if config.range_start is not None and config.range_end is not None:
        time_range = (config.range_start, config.range_end)
    if config.fmt == "csv" or (config.fmt is None and config.events.endswith(".csv")):
        with open(config.events, newline="") as fh:
            from .events import parse_events_csv

            events, errors = parse_events_csv(fh, time_range)
    else:
        with open(config.events) as fh:
            from .events import parse_events

            events, errors = parse_events(fh, time_range)
    if errors:
        with open(_path(config, PARSE_ERRORS_FILE), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["line_no", "message"])
            for err in errors:
                w.writerow([err.line_no, err.message])
        if config.strict:
            raise ValueError(f"{len(errors)} invalid lines (see {PARSE_ERRORS_FILE})")
    with open(_path(config, EVENTS_FILE), "w") as fh:
        write_events_jsonl(events, fh)
    columns = EventColumns.from_events(events)
    columns.save(_path(config, CACHE_DIR), file_sha256(_path(config, EVENTS_FILE)))
    _write_logs_and_rates(config, columns)
    _write_meta(
        config,
        "ingest",
        {
            "n_events": len(events),
            "n_users": len(columns.users),
            "n_errors": len(errors),
            "ts_min": int(columns.ts.min()) if len(columns) else None,
            "ts_max": int(columns.ts.max()) if len(columns) else None,
        },
        [config.events],
    )
    return f"ingest: {len(events)} events, {len(columns.users)} users, {len(errors)} invalid lines -> {config.out}"


def cmd_synth(config: PipelineConfig) -> str:
    if config.range_start is None or config.range_end is None:
        raise ConfigError("range_start/range_end: required for synth")
    synth_config = SynthConfig(
        start=config.range_start,
        end=config.range_end,
        aligned_users={
            "factual": config.synth_aligned_factual,
            "misleading": config.synth_aligned_misleading,
            "uncertain": config.synth_aligned_uncertain,
        },
        swayable_users=config.synth_swayable,
        events_per_class={
            "factual": config.synth_events_factual,
            "misleading": config.synth_events_misleading,
            "uncertain": config.synth_events_uncertain,
        },
        purity=config.synth_purity,
        follower_mu=config.synth_follower_mu,
        follower_sigma=config.synth_follower_sigma,
        planted_rates=_optional_class_table(config, "synth_rates"),
        swayable_reach=_optional_class_table(config, "synth_reach"),
        bot_rate=config.synth_bot_rate,
        verified_rate=config.synth_verified_rate,
    )
    try:
        result = synthesize(synth_config, config.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    with open(_path(config, EVENTS_FILE), "w") as fh:
        result.write_jsonl(fh)
    columns = _columns_from_synth(result)
    columns.save(_path(config, CACHE_DIR), file_sha256(_path(config, EVENTS_FILE)))
    _write_logs_and_rates(config, columns)
    with open(_path(config, TRUTH_FILE), "w") as fh:
        json.dump(result.truth(), fh, sort_keys=True, indent=1)
    _write_meta(
        config,
        "synth",
        {
            "n_events": len(result),
            "n_users": len(result.user_labels),
            "ts_min": int(columns.ts.min()) if len(columns) else None,
            "ts_max": int(columns.ts.max()) if len(columns) else None,
            "purity": synth_config.purity,
        },
        [],
    )
    return f"synth: {len(result)} events, {len(result.user_labels)} users, seed {config.seed} -> {config.out}"


def _optional_class_table(config: PipelineConfig, prefix: str) -> dict[str, tuple[float, ...]] | None:
    table = {}
    for cls in CONTENT_CLASSES:
        values = getattr(config, f"{prefix}_{cls}")
        if values is not None:
            table[cls] = tuple(values)
    return table or None


def _columns_from_synth(result) -> EventColumns:
    from .events import CATEGORY_TOKENS

    cat_index = {tok: i for i, tok in enumerate(CATEGORY_TOKENS)}
    class_to_cat = np.array(
        [cat_index[result._CAT_OF_CLASS[cls]] for cls in CONTENT_CLASSES], dtype=np.int8
    )
    src_bot = result.bot_flag[result.src]
    dst_bot = result.bot_flag[result.dst]
    src_ver = result.verified_flag[result.src]
    dst_ver = result.verified_flag[result.dst]
    flags = (
        src_bot.astype(np.uint8)
        | (dst_bot.astype(np.uint8) << 1)
        | (src_ver.astype(np.uint8) << 2)
        | (dst_ver.astype(np.uint8) << 3)
    )
    return EventColumns(
        users=list(result.user_labels),
        ts=result.ts.astype(np.int64),
        src=result.src.astype(np.int64),
        dst=result.dst.astype(np.int64),
        cat=class_to_cat[result.cat],
        src_followers=result.src_followers.astype(np.int64),
        dst_followers=result.dst_followers.astype(np.int64),
        flags=flags,
    )


def cmd_backbone(config: PipelineConfig) -> str:
    columns = _load_columns(config)
    time_range = None
    if config.range_start is not None and config.range_end is not None:
        time_range = (config.range_start, config.range_end)
    g = columns.build_graph(time_range=time_range)
    filtered = disparity_filter(g, config.alpha)
    save_binary(filtered, _path(config, BACKBONE_FILE))
    meta = {
        "alpha": config.alpha,
        "original": {"nodes": g.n_nodes, "edges": g.n_edges, "weight": g.total_weight},
        "filtered": {"nodes": filtered.n_nodes, "edges": filtered.n_edges, "weight": filtered.total_weight},
        "fractions": {
            "nodes": filtered.n_nodes / g.n_nodes if g.n_nodes else 0.0,
            "edges": filtered.n_edges / g.n_edges if g.n_edges else 0.0,
            "weight": filtered.total_weight / g.total_weight if g.total_weight else 0.0,
        },
    }
    with open(_path(config, BACKBONE_META), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
    if config.alpha_grid:
        rep.emit_size_curve(_path(config, "size_curve.csv"), g, config.alpha_grid)
    if config.emit_significance:
        with open(_path(config, "significance.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["src", "dst", "weight", "p_out", "p_in", "alpha_out", "alpha_in", "alpha"])
            for e in edge_significance(g):
                w.writerow(
                    [e.edge[0], e.edge[1], e.weight]
                    + [f"{x:.10g}" for x in (e.p_out, e.p_in, e.alpha_out, e.alpha_in, e.alpha)]
                )
    _write_meta(config, "backbone", meta, [_path(config, EVENTS_FILE)])
    return (
        f"backbone: alpha={config.alpha} kept {filtered.n_nodes}/{g.n_nodes} nodes, "
        f"{filtered.n_edges}/{g.n_edges} edges, {filtered.total_weight}/{g.total_weight} weight"
    )


def cmd_diagnose(config: PipelineConfig) -> str:
    columns = _load_columns(config)
    g = columns.build_graph()
    grid = config.alpha_grid or DEFAULT_ALPHA_GRID
    rep.emit_size_curve(_path(config, "size_curve.csv"), g, grid)
    disorder = strong_disorder_test(g, config.band_multiplier)
    with open(_path(config, "heterogeneity.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "direction", "k", "upsilon", "null_mean", "null_std", "flagged"])
        for row in disorder.rows:
            w.writerow(
                [row.node, row.direction, row.k, f"{row.upsilon:.8g}", f"{row.null_mean:.8g}", f"{row.null_std:.8g}", int(row.flagged)]
            )
    with open(_path(config, "heterogeneity_buckets.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["degree_bucket", "n", "flagged_fraction"])
        buckets: dict[int, list[int]] = {}
        for row in disorder.rows:
            b = 1 << (row.k.bit_length() - 1)
            cell = buckets.setdefault(b, [0, 0])
            cell[0] += 1
            cell[1] += int(row.flagged)
        for b in sorted(buckets):
            n, flagged = buckets[b]
            w.writerow([b, n, f"{flagged / n:.6f}"])
    rep.emit_topology(_path(config, "topology.json"), g, config.fit_range)
    with open(_path(config, "gtb_overlap.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "weight_quantile", "w_min", "gtb_edges", "overlap_fraction"])
        weights = g.edge_weight
        for alpha in grid:
            bb = disparity_filter(g, alpha)
            for q in config.gtb_quantiles:
                w_min = int(np.ceil(np.quantile(weights, q))) if len(weights) else 0
                gtb = global_threshold_backbone(g, w_min)
                if gtb.n_edges == 0 or bb.n_edges == 0:
                    overlap = 0.0
                else:
                    overlap = len(gtb.edge_set() & bb.edge_set()) / gtb.n_edges
                w.writerow([f"{alpha:.6f}", f"{q:.4f}", w_min, gtb.n_edges, f"{overlap:.6f}"])
    _write_meta(config, "diagnose", {"band_multiplier": config.band_multiplier, "alpha_grid": list(grid)}, [_path(config, EVENTS_FILE)])
    return f"diagnose: {len(disorder.rows)} node sides, flagged fraction {disorder.flagged_fraction:.3f}"


def cmd_align(config: PipelineConfig) -> str:
    columns = _load_columns(config)
    retained = None
    if not config.unfiltered:
        backbone = load_binary(_require(config, BACKBONE_FILE, "backbone"))
        retained = _backbone_pair_mask(columns, backbone)
    graphs = _class_graphs(columns, retained)
    profiles = involvement_profiles(graphs)
    labels = classify_all(profiles, config.theta, config.min_involvement)
    with open(_path(config, LABELS_FILE), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "label", "theta", "prop_factual", "prop_misleading", "prop_uncertain", "total"])
        for user in sorted(labels):
            profile = profiles[user]
            w.writerow(
                [user, labels[user].label, f"{config.theta:.4f}"]
                + [f"{profile.proportion(cls):.6f}" for cls in CONTENT_CLASSES]
                + [profile.total]
            )
    rep.emit_ternary(_path(config, "ternary.csv"), ternary_histogram(profiles.values(), config.bins))
    curves = {}
    for cls in CONTENT_CLASSES:
        if graphs[cls].total_weight > 0:
            curves[cls] = coverage_curve(profiles, graphs[cls], cls, config.theta_grid)
    rep.emit_coverage(_path(config, "coverage.csv"), curves)
    counts = {cls: sum(1 for l in labels.values() if l.label == cls) for cls in CONTENT_CLASSES}
    _write_meta(
        config,
        "align",
        {"theta": config.theta, "unfiltered": config.unfiltered, "bins": config.bins, "aligned_counts": counts},
        [_path(config, EVENTS_FILE)] + ([] if config.unfiltered else [_path(config, BACKBONE_FILE)]),
    )
    total_aligned = sum(counts.values())
    return f"align: theta={config.theta} -> {total_aligned} aligned users " + str(counts)


def cmd_growth(config: PipelineConfig) -> str:
    columns = _load_columns(config)
    by_class, theta = _load_labels(config)
    start, end = _dataset_range(config, columns)
    windows = sliding_windows(start, end, config.window_days * 86400, config.step_days * 86400)
    logs = columns.follower_logs()
    points_by_class: dict[str, list[GrowthPoint]] = {}
    for cls in CONTENT_CLASSES:
        points_by_class[cls] = [
            window_growth_rate(logs, by_class[cls], win, cls, config.min_obs) for win in windows
        ]
    with open(_path(config, GROWTH_FILE), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window_start", "window_end", "partial", "class", "rate", "n_active", "f_first", "f_last"])
        for cls in CONTENT_CLASSES:
            for p in points_by_class[cls]:
                w.writerow(
                    [
                        p.window.start,
                        p.window.end,
                        int(p.window.partial),
                        cls,
                        "" if p.rate is None else f"{p.rate:.8f}",
                        p.n_active,
                        p.f_first,
                        p.f_last,
                    ]
                )
    rep.emit_daily(_path(config, "daily_counts.csv"), columns.daily_counts_by_class(by_class))
    with open(_path(config, "trend.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window_start", "class", "trend", "polynomial_applied"])
        for cls in CONTENT_CLASSES:
            defined = [p for p in points_by_class[cls] if p.rate is not None]
            if not defined:
                continue
            smoothed = trend_line([p.rate for p in defined])
            for p, value in zip(defined, smoothed.values):
                w.writerow([p.window.start, cls, f"{value:.8f}", int(smoothed.polynomial_applied)])
    n_defined = sum(1 for ps in points_by_class.values() for p in ps if p.rate is not None)
    _write_meta(
        config,
        "growth",
        {"windows": len(windows), "theta": theta, "defined_points": n_defined},
        [_path(config, EVENTS_FILE), _path(config, LABELS_FILE)],
    )
    return f"growth: {len(windows)} windows x {len(CONTENT_CLASSES)} classes, {n_defined} defined points"


def _fit_windows(config: PipelineConfig, columns: EventColumns) -> list[TimeWindow]:
    start, end = _dataset_range(config, columns)
    lookback = config.lookback * 30 * 86400
    return [
        w
        for w in sliding_windows(start, end, config.window_days * 86400, config.step_days * 86400)
        if not w.partial and w.start - lookback >= start
    ]


def _build_setups(config: PipelineConfig, columns: EventColumns, by_class: dict[str, set[str]]):
    aligned_any = set().union(*by_class.values()) if by_class else set()
    snapshots = FollowerSnapshots(columns.follower_logs())
    lookback = config.lookback * 30 * 86400
    setups: dict[int, dict[str, object]] = {}
    for window in _fit_windows(config, columns):
        per_class = {}
        for cls in CONTENT_CLASSES:
            g = columns.build_graph(time_range=(window.start - lookback, window.start), content_class=cls)
            per_class[cls] = build_cascade_setup(g, window, cls, by_class[cls], aligned_any, snapshots)
        setups[window.start] = per_class
    return setups


def cmd_simulate(config: PipelineConfig) -> str:
    if config.delta is None or config.r0 is None:
        raise ConfigError("delta/r0: both are required for simulate")
    columns = _load_columns(config)
    by_class, _ = _load_labels(config)
    setups = _build_setups(config, columns, by_class)
    if not setups:
        raise ConfigError("lookback: no window has a fully covered lookback period")
    with open(_path(config, "simulate.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window_start", "class", "delta", "r0", "r_hat_mean", "r_hat_std", "n_aligned", "n_swayable"])
        for w_start in sorted(setups):
            for cls in CONTENT_CLASSES:
                setup = setups[w_start][cls]
                if not setup.simulable:
                    w.writerow([w_start, cls, config.delta, config.r0, "", "", len(setup.v_a), len(setup.v_sw)])
                    continue
                samples = []
                for rep_i in range(config.runs):
                    gen = rngmod.stream(config.seed, w_start, 0, rep_i, cls)
                    samples.append(simulate_growth_rate(setup, config.r0, config.delta, gen))
                arr = np.asarray(samples)
                w.writerow(
                    [
                        w_start,
                        cls,
                        config.delta,
                        config.r0,
                        f"{arr.mean():.8f}",
                        f"{arr.std():.8f}",
                        len(setup.v_a),
                        len(setup.v_sw),
                    ]
                )
    _write_meta(
        config,
        "simulate",
        {"delta": config.delta, "r0": config.r0, "runs": config.runs, "lookback": config.lookback},
        [_path(config, EVENTS_FILE), _path(config, LABELS_FILE)],
    )
    return f"simulate: delta={config.delta} r0={config.r0} over {len(setups)} windows"


def _load_empirical(config: PipelineConfig) -> dict[int, dict[str, float | None]]:
    path = _require(config, GROWTH_FILE, "growth")
    empirical: dict[int, dict[str, float | None]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if int(row["partial"]):
                continue
            start = int(row["window_start"])
            rate = float(row["rate"]) if row["rate"] != "" else None
            empirical.setdefault(start, {})[row["class"]] = rate
    return empirical


def cmd_fit(config: PipelineConfig) -> str:
    columns = _load_columns(config)
    by_class, _ = _load_labels(config)
    empirical = _load_empirical(config)
    setups = _build_setups(config, columns, by_class)
    if not setups:
        raise ConfigError("lookback: no window has a fully covered lookback period")
    fit_config = FitConfig(
        r0_min=config.r0_min,
        r0_max=config.r0_max,
        r0_step=config.r0_step,
        runs_per_point=config.runs,
        tolerance_pct=config.tolerance,
        lookback_months=config.lookback,
        seed=config.seed,
    )
    result = fit_parameters(
        setups,
        empirical,
        fit_config,
        recompute_acceptance=not config.single_pass,
        threads=config.threads,
    )
    doc = result.to_json_dict()
    with open(_path(config, FIT_FILE), "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
    rep.emit_fit_rates(_path(config, "fig4_rates.csv"), doc, empirical)
    rep.emit_fit_r0(_path(config, "fig4_r0.csv"), doc)
    _write_meta(
        config,
        "fit",
        {
            "delta": result.delta,
            "objective": result.objective,
            "n_windows": len(result.windows),
            "n_excluded": len(result.excluded),
            "tolerance": config.tolerance,
            "lookback": config.lookback,
        },
        [_path(config, EVENTS_FILE), _path(config, LABELS_FILE), _path(config, GROWTH_FILE)],
    )
    return (
        f"fit: delta={result.delta:.6f} objective={result.objective:.6g} "
        f"windows={len(result.windows)} excluded={len(result.excluded)}"
    )


def cmd_report(config: PipelineConfig) -> str:
    columns = _load_columns(config)
    backbone = load_binary(_require(config, BACKBONE_FILE, "backbone"))
    _require(config, LABELS_FILE, "align")
    _require(config, GROWTH_FILE, "growth")
    out_dir = _path(config, "report")
    os.makedirs(out_dir, exist_ok=True)
    schemas = rep.load_schemas()
    emitted: list[str] = []

    def out(name: str) -> str:
        path = os.path.join(out_dir, name)
        emitted.append(path)
        return path

    g = columns.build_graph()
    retained = _backbone_pair_mask(columns, backbone)
    rep.emit_components(out("fig1a_components.csv"), g, backbone)
    rep.emit_retention(out("fig1b_retention.csv"), columns, retained)
    rep.emit_temporal(out("fig1c_temporal.csv"), columns, retained)

    # Fig 2: copy the align stage's tables into the bundle layout.
    _copy_csv(_path(config, "ternary.csv"), out("fig2a_ternary.csv"))
    _copy_csv(_path(config, "coverage.csv"), out("fig2b_coverage.csv"))

    # Fig 3 from the growth stage.
    by_class, _ = _load_labels(config)
    points_by_class = _growth_points_from_csv(_path(config, GROWTH_FILE))
    rep.emit_daily(out("fig3a_daily.csv"), columns.daily_counts_by_class(by_class))
    rep.emit_growth_with_trend(out("fig3b_growth.csv"), points_by_class)

    # Fig 4 only when the fit stage ran.
    fit_path = _path(config, FIT_FILE)
    if os.path.exists(fit_path):
        with open(fit_path) as fh:
            fit_doc = json.load(fh)
        empirical = _load_empirical(config)
        rep.emit_fit_rates(out("fig4_rates.csv"), fit_doc, empirical)
        rep.emit_fit_r0(out("fig4_r0.csv"), fit_doc)

    grid = config.alpha_grid or DEFAULT_ALPHA_GRID
    rep.emit_size_curve(out("supp_size_curve.csv"), g, grid)
    rep.emit_heterogeneity_summary(out("supp_heterogeneity.csv"), g, config.band_multiplier)
    rep.emit_topology(os.path.join(out_dir, "supp_topology.json"), backbone, config.fit_range)
    rates = {u: (r.bot_rate, r.verification_rate) for u, r in columns.flag_rates().items()}
    rep.emit_flag_retention(out("supp_flag_retention.csv"), rates, set(g.labels), set(backbone.labels))

    for path in emitted:
        rep.validate_table(path, schemas)
    _write_meta(
        config,
        "report",
        {"n_tables": len(emitted) + 1, "fit_included": os.path.exists(fit_path)},
        [_path(config, EVENTS_FILE), _path(config, BACKBONE_FILE), _path(config, LABELS_FILE), _path(config, GROWTH_FILE)],
    )
    return f"report: {len(emitted) + 1} tables -> {out_dir}"


def _copy_csv(src: str, dst: str) -> None:
    if not os.path.exists(src):
        raise MissingInput(f"{src} not found; run the `align` stage first")
    with open(src) as fin, open(dst, "w") as fout:
        fout.write(fin.read())


def _growth_points_from_csv(path: str) -> dict[str, list[GrowthPoint]]:
    points: dict[str, list[GrowthPoint]] = {cls: [] for cls in CONTENT_CLASSES}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            window = TimeWindow(int(row["window_start"]), int(row["window_end"]), bool(int(row["partial"])))
            rate = float(row["rate"]) if row["rate"] != "" else None
            points[row["class"]].append(
                GrowthPoint(window, row["class"], rate, int(row["n_active"]), int(row["f_first"]), int(row["f_last"]))
            )
    return points


# -- entry point ------------------------------------------------------------------


_STAGES = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "backbone": cmd_backbone,
    "diagnose": cmd_diagnose,
    "align": cmd_align,
    "growth": cmd_growth,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "report": cmd_report,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="artifacts directory")
    p.add_argument("--config", help="flat key = value config file; flags override")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--range-start", dest="range_start", type=parse_time, default=None)
    p.add_argument("--range-end", dest="range_end", type=parse_time, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swaynet", description=__doc__)
    sub = parser.add_subparsers(dest="stage", required=True)

    p = sub.add_parser("ingest", help="parse, validate and label a raw event stream")
    _add_common(p)
    p.add_argument("--events", help="input .jsonl or .csv event file")
    p.add_argument("--format", dest="fmt", choices=["jsonl", "csv"], default=None)
    p.add_argument("--strict", action="store_const", const=True, default=None)

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted structure")
    _add_common(p)
    for name in (
        "synth-aligned-factual",
        "synth-aligned-misleading",
        "synth-aligned-uncertain",
        "synth-swayable",
        "synth-events-factual",
        "synth-events-misleading",
        "synth-events-uncertain",
    ):
        p.add_argument(f"--{name}", dest=name.replace("-", "_"), type=int, default=None)
    p.add_argument("--synth-purity", dest="synth_purity", type=float, default=None)

    p = sub.add_parser("backbone", help="extract the disparity-filter backbone")
    _add_common(p)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--alpha-grid", dest="alpha_grid", type=_parse_floats, default=None)
    p.add_argument("--emit-significance", dest="emit_significance", action="store_const", const=True, default=None)

    p = sub.add_parser("diagnose", help="heterogeneity, topology, and size-curve diagnostics")
    _add_common(p)
    p.add_argument("--alpha-grid", dest="alpha_grid", type=_parse_floats, default=None)
    p.add_argument("--band-multiplier", dest="band_multiplier", type=float, default=None)
    p.add_argument("--fit-range", dest="fit_range", type=lambda s: tuple(float(x) for x in s.split(":")), default=None)

    p = sub.add_parser("align", help="classify highly aligned users")
    _add_common(p)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--theta-grid", dest="theta_grid", type=_parse_floats, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--min-involvement", dest="min_involvement", type=int, default=None)
    p.add_argument("--unfiltered", action="store_const", const=True, default=None)

    p = sub.add_parser("growth", help="measure windowed follower growth")
    _add_common(p)
    p.add_argument("--min-obs", dest="min_obs", type=int, default=None)

    p = sub.add_parser("simulate", help="simulate growth rates at fixed delta and R0")
    _add_common(p)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--r0", type=float, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--lookback", "--n", dest="lookback", type=int, default=None)

    p = sub.add_parser("fit", help="fit delta and per-window R0 against empirical rates")
    _add_common(p)
    p.add_argument("--lookback", "--n", dest="lookback", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--r0-min", dest="r0_min", type=float, default=None)
    p.add_argument("--r0-max", dest="r0_max", type=float, default=None)
    p.add_argument("--r0-step", dest="r0_step", type=float, default=None)
    p.add_argument("--single-pass", dest="single_pass", action="store_const", const=True, default=None)

    p = sub.add_parser("report", help="consolidated plot-ready bundle")
    _add_common(p)
    p.add_argument("--alpha-grid", dest="alpha_grid", type=_parse_floats, default=None)
    p.add_argument("--band-multiplier", dest="band_multiplier", type=float, default=None)
    p.add_argument("--fit-range", dest="fit_range", type=lambda s: tuple(float(x) for x in s.split(":")), default=None)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _check(resolve_config(args))
        os.makedirs(config.out, exist_ok=True)
        summary = _STAGES[args.stage](config)
        print(summary)
        return 0
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 1
    except MissingInput as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
