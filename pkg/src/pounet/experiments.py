"""Experiment configuration, sweep orchestration, and result tables.

Configs are plain text, diff-friendly::

    [experiment]
    kind = tri_wave      # smooth_cross | tri_wave | quad_wave | theorem1 | custom
    seed = 0
    n_runs = 5

    [optimizer]
    scheme = two_phase
    lr = 0.05
    lam = 0.1

Only full-line comments (leading ``#``) are recognized. Every key is
validated against a per-kind schema before any training starts, and
errors carry the offending line number.

Run ``i`` of a sweep derives its seed as ``base_seed + i``; independent
random streams for data, model initialization, and the baseline are
spawned from that seed, so the baseline consumes byte-identical datasets
and the whole output tree is reproducible (wall-time fields aside).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bench
from .model import Dataset, PouModel, init_coeffs, save_checkpoint
from .optim import LsgdConfig, TrainingError, lsgd, two_phase_lsgd
from .poly import MonomialBasis
from .pou import init_rbf, init_resnet_box

KINDS = ("smooth_cross", "tri_wave", "quad_wave", "theorem1", "custom")
WAVE_KINDS = ("tri_wave", "quad_wave")
TRAINING_KINDS = ("smooth_cross", "tri_wave", "quad_wave", "custom")

#: columns identifying a sweep cell, per experiment kind, in table order
AXIS_COLUMNS = {
    "smooth_cross": ("n_part", "m_max"),
    "tri_wave": ("p", "n_part", "m_max"),
    "quad_wave": ("p", "n_part", "m_max"),
    "custom": ("n_part", "m_max"),
}

AGGREGATE_COLUMNS = ("median_rel_l2", "geomean_rel_l2", "lognorm_std", "n_runs", "n_failed")

#: epoch-budget ceilings applied by the fast profile
CI_EPOCH_CAP = 200


class ConfigError(ValueError):
    """An experiment configuration problem, located to a file line when possible."""


def _err(source: str, line: int | None, message: str) -> ConfigError:
    where = f"{source}:{line}: " if line is not None else f"{source}: "
    return ConfigError(where + message)


_SECTION_RE = re.compile(r"^\[([a-z_]+)\]$")
_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*$")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``[section]`` / ``key = value`` lines into a nested dict.

    Values stay as strings here; each maps to ``(value, line_number)``.
    Comments must occupy their own line — a ``#`` after a value would be
    kept as part of the value, so the grammar simply forbids mixing.
    """
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            m = _SECTION_RE.match(line)
            if m is None:
                raise _err(source, lineno, f"malformed section header {line!r}")
            current = m.group(1)
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise _err(source, lineno, f"expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise _err(source, lineno, f"malformed key {key!r}")
        if current is None:
            raise _err(source, lineno, f"key {key!r} appears before any [section] header")
        if key in sections[current]:
            first = sections[current][key][1]
            raise _err(source, lineno, f"duplicate key {key!r} in [{current}] (first set at line {first})")
        sections[current][key] = (value, lineno)
    return sections


# ---------------------------------------------------------------------------
# schema

def _cast_int(s: str) -> int:
    return int(s, 10)


def _cast_float(s: str) -> float:
    v = float(s)
    if not np.isfinite(v):
        raise ValueError("non-finite value")
    return v


def _cast_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _cast_int_list(s: str) -> tuple[int, ...]:
    items = [part.strip() for part in s.split(",")]
    if not items or any(not part for part in items):
        raise ValueError("expected a comma-separated integer list")
    return tuple(int(part, 10) for part in items)


def _cast_enum(*allowed: str):
    def cast(s: str) -> str:
        if s not in allowed:
            raise ValueError(f"must be one of {', '.join(allowed)}")
        return s

    return cast


_ALL = frozenset(KINDS)
_WAVES = frozenset(WAVE_KINDS)
_TRAIN = frozenset(TRAINING_KINDS)

# section -> key -> (caster, kinds the key applies to, config attribute)
SCHEMA = {
    "experiment": {
        "kind": (_cast_enum(*KINDS), _ALL, "kind"),
        "seed": (_cast_int, _ALL, "seed"),
        "n_runs": (_cast_int, _TRAIN, "n_runs"),
        "out": (str, _ALL, "out"),
    },
    "data": {
        "n_per_axis": (_cast_int, frozenset({"smooth_cross", "custom"}), "n_per_axis"),
        "sampling": (_cast_enum("grid", "uniform"), frozenset({"smooth_cross"}), "sampling"),
        "n_data": (_cast_int, _WAVES | {"custom"}, "n_data"),
        "n_grid": (_cast_int, frozenset({"theorem1"}), "n_grid"),
    },
    "sweep": {
        "n_part": (_cast_int_list, frozenset({"smooth_cross", "theorem1"}), "n_part_list"),
        "m_max": (_cast_int_list, frozenset({"smooth_cross"}), "m_max_list"),
        "p": (_cast_int_list, _WAVES, "p_list"),
        "degree": (_cast_int_list, frozenset({"theorem1"}), "degree_list"),
    },
    "model": {
        "architecture": (_cast_enum("rbf", "resnet"), _TRAIN, "architecture"),
        "m_max": (_cast_int, _WAVES | {"custom"}, "m_max"),
        "n_part": (_cast_int, frozenset({"custom"}), "n_part"),
        "width": (_cast_int, _WAVES | {"custom"}, "width"),
        "depth": (_cast_int, _WAVES | {"custom"}, "depth"),
        "target": (_cast_enum("tri_wave", "tri_wave_squared", "sine_cross"), frozenset({"custom"}), "target"),
        "p": (_cast_int, frozenset({"custom"}), "p"),
    },
    "optimizer": {
        "scheme": (_cast_enum("lsgd", "two_phase"), _TRAIN, "scheme"),
        "lr": (_cast_float, _TRAIN, "lr"),
        "lam": (_cast_float, _TRAIN, "lam"),
        "rho": (_cast_float, _TRAIN, "rho"),
        "n_stag": (_cast_int, _TRAIN, "n_stag"),
        "n_epoch": (_cast_int, _TRAIN, "n_epoch"),
        "lr_main": (_cast_float, _TRAIN, "lr_main"),
        "n_epoch_main": (_cast_int, _TRAIN, "n_epoch_main"),
    },
    "baseline": {
        "enabled": (_cast_bool, _WAVES | {"custom"}, "baseline"),
        "lr": (_cast_float, _WAVES | {"custom"}, "baseline_lr"),
        "n_epoch": (_cast_int, _WAVES | {"custom"}, "baseline_epochs"),
        "width": (_cast_int, _WAVES | {"custom"}, "baseline_width"),
        "depth": (_cast_int, _WAVES | {"custom"}, "baseline_depth"),
    },
}


@dataclass
class ExperimentConfig:
    """Fully resolved experiment settings (schema defaults filled in)."""

    kind: str
    seed: int = 0
    n_runs: int = 1
    out: str | None = None
    profile: str = "paper"
    # data
    n_per_axis: int = 501
    sampling: str = "grid"
    n_data: int = 2000
    n_grid: int = 2048
    # sweep axes
    n_part_list: tuple = ()
    m_max_list: tuple = ()
    p_list: tuple = ()
    degree_list: tuple = ()
    # single-cell model settings
    architecture: str = "rbf"
    m_max: int = 1
    n_part: int = 0
    width: int = 0
    depth: int = 8
    target: str | None = None
    p: int = 1
    # optimizer
    scheme: str = "lsgd"
    lr: float = 1e-3
    lam: float = 0.0
    rho: float = 0.9
    n_stag: int = 1000
    n_epoch: int = 100
    lr_main: float = 0.0
    n_epoch_main: int = 0
    # baseline
    baseline: bool = False
    baseline_lr: float = 1e-3
    baseline_epochs: int = 0
    baseline_width: int = 0
    baseline_depth: int = 0


_KIND_DEFAULTS = {
    "smooth_cross": dict(
        n_runs=10,
        n_part_list=(1, 2, 4, 8, 16),
        m_max_list=(0, 1, 2, 3, 4),
        architecture="rbf",
        n_epoch=100,
    ),
    "tri_wave": dict(
        n_runs=5,
        p_list=(1, 2, 3, 4, 5),
        architecture="resnet",
        m_max=1,
        n_epoch=2000,
        baseline=True,
        baseline_epochs=2000,
    ),
    "quad_wave": dict(
        n_runs=5,
        p_list=(1, 2, 3, 4, 5),
        architecture="resnet",
        m_max=2,
        n_epoch=2000,
        baseline=True,
        baseline_epochs=2000,
    ),
    "theorem1": dict(
        n_part_list=(4, 8, 16, 32),
        degree_list=(1, 2),
    ),
    "custom": dict(n_runs=1, n_epoch=100, width=8),
}


def resolve_config(sections: dict, source: str = "<config>", profile: str = "paper") -> ExperimentConfig:
    """Validate parsed sections against the schema and fill kind defaults."""
    if profile not in ("paper", "ci"):
        raise _err(source, None, f"unknown profile {profile!r}")
    for name in sections:
        if name not in SCHEMA:
            raise _err(source, None, f"unknown section [{name}]")
    exp = sections.get("experiment", {})
    if "kind" not in exp:
        raise _err(source, None, "missing required key 'kind' in [experiment]")
    kind_value, kind_line = exp["kind"]
    try:
        kind = SCHEMA["experiment"]["kind"][0](kind_value)
    except ValueError as exc:
        raise _err(source, kind_line, f"bad value for 'kind': {exc}") from None

    cfg = ExperimentConfig(kind=kind, profile=profile)
    for attr, value in _KIND_DEFAULTS[kind].items():
        setattr(cfg, attr, value)

    for section, entries in sections.items():
        schema = SCHEMA[section]
        for key, (value, lineno) in entries.items():
            if key not in schema:
                raise _err(source, lineno, f"unknown key {key!r} in [{section}]")
            caster, kinds, attr = schema[key]
            if kind not in kinds:
                raise _err(
                    source, lineno,
                    f"key {key!r} in [{section}] does not apply to experiment kind {kind!r}",
                )
            try:
                setattr(cfg, attr, caster(value))
            except ValueError as exc:
                raise _err(source, lineno, f"bad value for {key!r}: {exc}") from None

    _validate_resolved(cfg, source)
    if profile == "ci":
        cfg.n_epoch = min(cfg.n_epoch, CI_EPOCH_CAP)
        cfg.n_epoch_main = min(cfg.n_epoch_main, CI_EPOCH_CAP) if cfg.n_epoch_main else 0
        cfg.baseline_epochs = min(cfg.baseline_epochs, CI_EPOCH_CAP) if cfg.baseline_epochs else 0
    return cfg


def _validate_resolved(cfg: ExperimentConfig, source: str) -> None:
    def need(cond: bool, msg: str) -> None:
        if not cond:
            raise _err(source, None, msg)

    need(cfg.seed >= 0, "seed must be >= 0")
    need(cfg.n_runs >= 1, "n_runs must be >= 1")
    if cfg.kind in TRAINING_KINDS:
        need(cfg.n_epoch >= 1, "n_epoch must be >= 1")
        need(cfg.lr > 0, "lr must be > 0")
        need(cfg.lam >= 0, "lam must be >= 0")
        need(0 <= cfg.rho <= 1, "rho must lie in [0, 1]")
        need(cfg.n_stag >= 1, "n_stag must be >= 1")
        if cfg.scheme == "two_phase":
            if cfg.lr_main == 0.0:
                cfg.lr_main = cfg.lr
            if cfg.n_epoch_main == 0:
                cfg.n_epoch_main = cfg.n_epoch
            need(cfg.lr_main > 0, "lr_main must be > 0")
            need(cfg.n_epoch_main >= 1, "n_epoch_main must be >= 1")
    if cfg.kind == "smooth_cross":
        need(cfg.n_per_axis >= 2, "n_per_axis must be >= 2")
        need(len(cfg.n_part_list) > 0 and all(v >= 1 for v in cfg.n_part_list), "n_part sweep must be positive")
        need(len(cfg.m_max_list) > 0 and all(v >= 0 for v in cfg.m_max_list), "m_max sweep must be non-negative")
    if cfg.kind in WAVE_KINDS:
        need(cfg.n_data >= 1, "n_data must be >= 1")
        need(len(cfg.p_list) > 0 and all(v >= 1 for v in cfg.p_list), "p sweep must be positive")
        need(cfg.m_max >= 0, "m_max must be >= 0")
        need(cfg.depth >= 1, "depth must be >= 1")
    if cfg.kind == "theorem1":
        need(cfg.n_grid >= 2, "n_grid must be >= 2")
        need(len(cfg.n_part_list) > 0 and all(v >= 1 for v in cfg.n_part_list), "n_part list must be positive")
        need(len(cfg.degree_list) > 0 and all(v >= 0 for v in cfg.degree_list), "degree list must be non-negative")
    if cfg.kind == "custom":
        need(cfg.target is not None, "custom experiments must set 'target' in [model]")
        need(cfg.n_part >= 1, "custom experiments must set 'n_part' >= 1 in [model]")
        need(cfg.m_max >= 0, "m_max must be >= 0")
        need(cfg.p >= 1, "p must be >= 1")
        if cfg.architecture == "resnet":
            need(cfg.width >= 1, "resnet architecture needs width >= 1")
            need(cfg.depth >= 1, "depth must be >= 1")
    if cfg.baseline:
        need(cfg.baseline_lr > 0, "baseline lr must be > 0")
        if cfg.baseline_epochs == 0:
            cfg.baseline_epochs = cfg.n_epoch
        need(cfg.baseline_epochs >= 1, "baseline n_epoch must be >= 1")


def load_config(path, profile: str = "paper") -> ExperimentConfig:
    text = Path(path).read_text()
    return resolve_config(parse_config_text(text, str(path)), str(path), profile)


# ---------------------------------------------------------------------------
# sweep expansion and per-run execution

def expand_cells(cfg: ExperimentConfig) -> list[dict]:
    """The list of sweep cells; each dict carries that kind's axis columns."""
    if cfg.kind == "smooth_cross":
        return [
            {"n_part": n, "m_max": m}
            for n in cfg.n_part_list
            for m in cfg.m_max_list
        ]
    if cfg.kind in WAVE_KINDS:
        return [{"p": p, "n_part": 2 ** p, "m_max": cfg.m_max} for p in cfg.p_list]
    if cfg.kind == "custom":
        return [{"n_part": cfg.n_part, "m_max": cfg.m_max}]
    return []


def cell_name(kind: str, cell: dict) -> str:
    return "_".join(f"{axis}{cell[axis]}" for axis in AXIS_COLUMNS[kind])


def _cell_width(cfg: ExperimentConfig, cell: dict) -> int:
    if cfg.width:
        return cfg.width
    if "p" in cell:
        return 4 * 2 ** cell["p"]
    return 8


def _target_for(cfg: ExperimentConfig, cell: dict) -> bench.TargetFunction:
    if cfg.kind == "smooth_cross" or (cfg.kind == "custom" and cfg.target == "sine_cross"):
        return bench.TargetFunction("sine_cross")
    if cfg.kind == "tri_wave":
        kind = "tri_wave"
    elif cfg.kind == "quad_wave":
        kind = "tri_wave_squared"
    else:
        kind = cfg.target
    return bench.TargetFunction(kind, p=cell.get("p", cfg.p))


def _make_run_dataset(cfg: ExperimentConfig, cell: dict, seed_r: int) -> Dataset:
    rng = np.random.default_rng([seed_r, 0])
    target = _target_for(cfg, cell)
    if target.kind == "sine_cross":
        mode = cfg.sampling if cfg.kind == "smooth_cross" else "grid"
        return bench.make_cross_dataset(cfg.n_per_axis, mode=mode, rng=rng)
    return bench.make_wave_dataset(target.p, cfg.n_data, target.kind, rng)


def dataset_is_deterministic(cfg: ExperimentConfig) -> bool:
    """True when every run sees the same data regardless of seed."""
    if cfg.kind == "smooth_cross":
        return cfg.sampling == "grid"
    return cfg.kind == "custom" and cfg.target == "sine_cross"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _report_summary(report) -> dict:
    return {
        "n_data": report.n_data,
        "n_epochs": len(report.loss_trace),
        "best_epoch": report.best_epoch,
        "phase_boundary": report.phase_boundary,
        "final_rel_l2": report.final_rel_l2,
        "final_rms": report.final_rms,
        "wall_time": report.wall_time,
    }


def _train_pounet(cfg: ExperimentConfig, cell: dict, data: Dataset, seed_r: int):
    rng = np.random.default_rng([seed_r, 1])
    target = _target_for(cfg, cell)
    d = data.dim_input
    basis = MonomialBasis.for_box(d, cell["m_max"], target.domain)
    if cfg.architecture == "rbf":
        net = init_rbf(cell["n_part"], d, target.domain, rng)
        arch = {"architecture": "rbf"}
    else:
        width = _cell_width(cfg, cell)
        net = init_resnet_box(width, cfg.depth, cell["n_part"], d, target.domain, rng)
        arch = {"architecture": "resnet", "width": width, "depth": cfg.depth}
    model = PouModel(net, basis, init_coeffs(cell["n_part"], basis, rng))
    cfg_pre = LsgdConfig(cfg.n_epoch, lr=cfg.lr, lam=cfg.lam, rho=cfg.rho, n_stag=cfg.n_stag)
    if cfg.scheme == "two_phase":
        cfg_main = LsgdConfig(cfg.n_epoch_main, lr=cfg.lr_main)
        best, report = two_phase_lsgd(model, data, cfg_pre, cfg_main)
    else:
        best, report = lsgd(model, data, cfg_pre)
    return best, report, arch


def execute_run(cfg: ExperimentConfig, cell: dict, run_idx: int, out_root: str) -> list[dict]:
    """Train one sweep cell with seed ``cfg.seed + run_idx``; write artifacts.

    Returns one summary record per trained model (the POU net, plus the
    baseline when enabled). Training failures are recorded as records
    with status "failed" rather than raised.
    """
    seed_r = cfg.seed + run_idx
    run_dir = Path(out_root) / "runs" / cell_name(cfg.kind, cell) / f"run_{run_idx:03d}"
    run_dir.mkdir(parents=True, exist_ok=True)
    data = _make_run_dataset(cfg, cell, seed_r)
    if not dataset_is_deterministic(cfg):
        bench.save_dataset_csv(data, run_dir / "dataset.csv")

    records = []

    def finish(model_label: str, status: str, report, extra: dict) -> dict:
        record = {
            "kind": cfg.kind,
            "cell": dict(cell),
            "model": model_label,
            "seed": seed_r,
            "run": run_idx,
            "status": status,
            **extra,
        }
        if report is not None:
            record.update(_report_summary(report))
        prefix = "" if model_label == "pounet" else "baseline_"
        _write_json(run_dir / f"{prefix}report.json", record)
        if report is not None:
            report.write_trace_csv(run_dir / f"{prefix}trace.csv")
        records.append(record)
        return record

    try:
        best, report, arch = _train_pounet(cfg, cell, data, seed_r)
    except TrainingError as exc:
        finish("pounet", "failed", exc.report, {"error": str(exc)})
    else:
        save_checkpoint(best, run_dir / "checkpoint.json", seed=seed_r)
        finish("pounet", "ok", report, {"arch": arch})

    if cfg.baseline:
        width = cfg.baseline_width or _cell_width(cfg, cell)
        depth = cfg.baseline_depth or cfg.depth
        rng = np.random.default_rng([seed_r, 2])
        try:
            net, breport = bench.baseline_resnet_fit(
                data, width, depth, cfg.baseline_epochs, cfg.baseline_lr, rng,
            )
        except TrainingError as exc:
            finish("baseline", "failed", exc.report, {"error": str(exc)})
        else:
            _write_json(run_dir / "baseline_checkpoint.json", {
                "format": "pounet-baseline-v1",
                **net.manifest(),
                "seed": seed_r,
                "params": net.get_params().tolist(),
            })
            finish("baseline", "ok", breport, {"arch": net.manifest()})
    return records


# ---------------------------------------------------------------------------
# aggregation

_MODEL_ORDER = {"pounet": 0, "baseline": 1}


def aggregate_records(kind: str, records: list[dict]) -> list[dict]:
    """Group per-run records by (cell, model); summarize final rel l2 errors.

    Emits the median, the geometric mean (exp of the mean log), and the
    sample standard deviation of the log errors (0 for a single run),
    plus success/failure counts. Failed runs are excluded from the
    statistics but counted.
    """
    axes = AXIS_COLUMNS[kind]
    groups: dict[tuple, list[dict]] = {}
    for rec in records:
        key = (tuple(rec["cell"][a] for a in axes), rec["model"])
        groups.setdefault(key, []).append(rec)

    rows = []
    for (axis_values, model) in sorted(groups, key=lambda k: (k[0], _MODEL_ORDER.get(k[1], 9))):
        group = groups[(axis_values, model)]
        errs = np.array([r["final_rel_l2"] for r in group if r["status"] == "ok"])
        n_failed = sum(r["status"] != "ok" for r in group)
        row = dict(zip(axes, axis_values))
        row["model"] = model
        if errs.size:
            logs = np.log(np.maximum(errs, 1e-300))
            row["median_rel_l2"] = float(np.median(errs))
            row["geomean_rel_l2"] = float(np.exp(logs.mean()))
            row["lognorm_std"] = float(logs.std(ddof=1)) if errs.size > 1 else 0.0
        else:
            row["median_rel_l2"] = float("nan")
            row["geomean_rel_l2"] = float("nan")
            row["lognorm_std"] = float("nan")
        row["n_runs"] = int(errs.size)
        row["n_failed"] = int(n_failed)
        rows.append(row)
    return rows


def write_aggregate_csv(kind: str, rows: list[dict], path) -> None:
    columns = list(AXIS_COLUMNS[kind]) + ["model"] + list(AGGREGATE_COLUMNS)
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                value = row[col]
                cells.append(f"{value:.17g}" if isinstance(value, float) else str(value))
            fh.write(",".join(cells) + "\n")


def emit_convergence_table(run_dir) -> Path:
    """Re-aggregate the per-run reports under ``run_dir`` into a CSV table."""
    root = Path(run_dir)
    reports = sorted(root.glob("runs/*/run_*/report.json")) + sorted(
        root.glob("runs/*/run_*/baseline_report.json")
    )
    if not reports:
        raise ConfigError(f"{root}: no run reports found")
    records = [json.loads(p.read_text()) for p in reports]
    kind = records[0]["kind"]
    rows = aggregate_records(kind, records)
    out = root / "convergence_table.csv"
    write_aggregate_csv(kind, rows, out)
    return out


# ---------------------------------------------------------------------------
# top-level drivers

def _run_theorem1(cfg: ExperimentConfig, out_root: Path) -> int:
    rows = []
    slopes = []
    for m in cfg.degree_list:
        pairs = bench.theorem1_scaling_oracle(
            m, cfg.n_part_list, lambda x: np.sin(2.0 * np.pi * x), n_data=cfg.n_grid
        )
        rows.extend((m, n, v) for n, v in pairs)
        slopes.append((m, bench.fit_loglog_slope(pairs)))
    with open(out_root / "theorem1_table.csv", "w") as fh:
        fh.write("m,n_part,rms\n")
        for m, n, v in rows:
            fh.write(f"{m},{n},{v:.17g}\n")
    with open(out_root / "theorem1_slopes.csv", "w") as fh:
        fh.write("m,slope,expected\n")
        for m, slope in slopes:
            fh.write(f"{m},{slope:.17g},{-(m + 1)}\n")
    return 0


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> int:
    """Execute a configured experiment; returns the number of failed runs.

    The output tree: ``config_echo.json``; ``dataset.csv`` at the top
    level when the data is seed-independent (otherwise inside each run
    directory); ``runs/<cell>/run_<i>/`` with reports, traces, and
    checkpoints; ``aggregate.csv`` over all runs.
    """
    out_root = Path(out_dir if out_dir is not None else (cfg.out or "results"))
    out_root.mkdir(parents=True, exist_ok=True)
    echo = {"profile": cfg.profile, "config": dataclasses.asdict(cfg)}
    _write_json(out_root / "config_echo.json", echo)

    if cfg.kind == "theorem1":
        return _run_theorem1(cfg, out_root)

    cells = expand_cells(cfg)
    if dataset_is_deterministic(cfg):
        bench.save_dataset_csv(_make_run_dataset(cfg, cells[0], cfg.seed), out_root / "dataset.csv")

    tasks = [(cell, run_idx) for cell in cells for run_idx in range(cfg.n_runs)]
    records: list[dict] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(execute_run, cfg, cell, run_idx, str(out_root))
                for cell, run_idx in tasks
            ]
            for future in futures:
                records.extend(future.result())
    else:
        for cell, run_idx in tasks:
            records.extend(execute_run(cfg, cell, run_idx, str(out_root)))

    records.sort(key=lambda r: (
        tuple(r["cell"][a] for a in AXIS_COLUMNS[cfg.kind]),
        _MODEL_ORDER.get(r["model"], 9),
        r["run"],
    ))
    rows = aggregate_records(cfg.kind, records)
    write_aggregate_csv(cfg.kind, rows, out_root / "aggregate.csv")
    return sum(r["status"] != "ok" for r in records)


# ---------------------------------------------------------------------------
# reproducibility helper

def artifact_fingerprint(root) -> dict[str, str]:
    """Hash every artifact under ``root``, ignoring wall-time fields.

    JSON files are parsed, stripped of any key named ``wall_time``
    (recursively), and re-serialized before hashing; other files hash
    as raw bytes. The result maps relative paths to hex digests.
    """

    def strip(node):
        if isinstance(node, dict):
            return {k: strip(v) for k, v in node.items() if k != "wall_time"}
        if isinstance(node, list):
            return [strip(v) for v in node]
        return node

    out = {}
    root = Path(root)
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        if path.suffix == ".json":
            payload = json.dumps(strip(json.loads(path.read_text())), sort_keys=True)
            digest = hashlib.sha256(payload.encode()).hexdigest()
        else:
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
        out[str(path.relative_to(root))] = digest
    return out
