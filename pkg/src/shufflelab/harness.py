"""Experiment runner: config files, trial fan-out, grid selection, CSV/JSON output.

Seed derivation (fixed, bit-exact):

* init seed of trial (i, r)      = combine_seeds(base_seed, INIT_TAG, i)
* shuffle seed of (g, i, r)      = combine_seeds(base_seed, SHUFFLE_TAG, g, i, r)

where g indexes the step-size grid, i the initialisation and r the run.
Neither depends on the scheme, so every scheme sees the same initial points
and the same epoch seeds; their orders differ only through scheme logic.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .data import binarize_labels, load_dataset, map_binary_labels, standardize
from .errors import ConfigError, ParseError
from .optimize import OptimizerConfig, TrialRecord, run_trial
from .problems import ProblemSpec, make_problem, parse_problem_spec
from .rngcore import combine_seeds
from .shuffling import AprParams, make_scheme

DEFAULT_GAMMA_GRID = (0.5, 0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001)
INIT_TAG = 0x1417
SHUFFLE_TAG = 0x5A1E
SEED_ENV = "SHUFFLE_LAB_SEED"
CSV_COLUMNS = ("dataset", "task", "schedule", "scheme", "mean_best_loss", "std_best_loss",
               "selected_gamma0", "divergence_count")
DIVERGED = "diverged"

_TASKS = {"logreg": "classification", "mlp": "classification", "linreg": "regression"}


@dataclass
class ExperimentConfig:
    problem: str = "logreg n=2000 d=20 seed=0"
    dataset: Optional[str] = None
    dataset_format: Optional[str] = None
    label_column: str = "-1"
    has_header: bool = True
    standardize: bool = True
    binarize_threshold: Optional[float] = None
    dataset_name: str = ""
    task: str = ""
    schemes: tuple = ("apr", "rr", "so", "ig")
    optimizer: str = "sgd"
    schedules: tuple = ("constant",)
    alpha: float = 0.5
    gammas: tuple = DEFAULT_GAMMA_GRID
    batch_size: int = 64
    epochs: int = 100
    n_inits: int = 5
    n_runs: int = 5
    base_seed: int = 0
    output: Optional[str] = None
    format: str = "csv"
    workers: int = 1
    trace: bool = False
    apr: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.n_inits < 1 or self.n_runs < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.gammas:
            raise ConfigError("step-size grid is empty")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.format!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.schemes:
            raise ConfigError("no schemes given")
        if self.dataset and not Path(self.dataset).is_file():
            raise ConfigError(f"dataset not readable: {self.dataset}")
        params = self.apr_params()
        for name in self.schemes:
            try:
                make_scheme(name, 0, params)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        for sched in self.schedules:
            self.optimizer_config(self.gammas[0], sched)
        parse_problem_spec(self.problem)

    def apr_params(self) -> AprParams:
        try:
            return AprParams(**self.apr)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad APR parameters: {exc}") from None

    def optimizer_config(self, gamma0: float, schedule: str) -> OptimizerConfig:
        return OptimizerConfig(kind=self.optimizer, gamma0=gamma0, schedule=schedule, alpha=self.alpha,
                               batch_size=self.batch_size, epochs=self.epochs)

    @property
    def problem_spec(self) -> ProblemSpec:
        return parse_problem_spec(self.problem)

    def task_name(self) -> str:
        return self.task or _TASKS.get(self.problem_spec.kind, "synthetic")

    def dataset_label(self) -> str:
        if self.dataset_name:
            return self.dataset_name
        if self.dataset:
            return Path(self.dataset).stem
        return self.problem_spec.kind


_APR_FIELDS = {f.name: f.type for f in fields(AprParams)}
_INT_KEYS = {"batch_size", "epochs", "n_inits", "n_runs", "base_seed", "workers"}
_FLOAT_KEYS = {"alpha", "binarize_threshold"}
_BOOL_KEYS = {"has_header", "standardize", "trace"}
_LIST_KEYS = {"schemes", "schedules", "gammas"}


def _coerce(key: str, value: str):
    value = value.strip()
    try:
        if key in _INT_KEYS:
            return int(value, 0)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _BOOL_KEYS:
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if key == "gammas":
            return tuple(float(v) for v in value.split(",") if v.strip())
        if key in _LIST_KEYS:
            return tuple(v.strip() for v in value.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def config_from_mapping(items: dict) -> ExperimentConfig:
    """Build a config from string key/values (``apr.<param>`` keys allowed).

    ``base_seed`` falls back to the SHUFFLE_LAB_SEED environment variable.
    """
    kwargs, apr = {}, {}
    known = {f.name for f in fields(ExperimentConfig)} - {"apr"}
    for key, raw in items.items():
        key = key.strip()
        if key.startswith("apr."):
            name = key[4:]
            if name not in _APR_FIELDS:
                raise ConfigError(f"unknown APR parameter {name!r}")
            try:
                apr[name] = int(raw) if name in ("p_rev", "r_rev", "p_eo", "r_eo") else float(raw)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
        elif key in known:
            kwargs[key] = _coerce(key, str(raw))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if "base_seed" not in kwargs and os.environ.get(SEED_ENV):
        kwargs["base_seed"] = _coerce("base_seed", os.environ[SEED_ENV])
    cfg = ExperimentConfig(**kwargs, apr=apr)
    cfg.validate()
    return cfg


def parse_config_text(text: str) -> dict:
    items = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        items[key.strip()] = value.strip()
    return items


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    items = parse_config_text(Path(path).read_text())
    items.update(overrides or {})
    return config_from_mapping(items)


def build_problem(cfg: ExperimentConfig):
    ds = None
    if cfg.dataset:
        kind = cfg.problem_spec.kind
        label = cfg.label_column
        label = int(label) if label.lstrip("-").isdigit() else label
        fmt = cfg.dataset_format or ("csv" if cfg.dataset.lower().endswith(".csv") else "libsvm")
        if fmt == "csv":
            kwargs = {"label_column": label, "has_header": cfg.has_header}
        else:
            kwargs = {"label_mode": "raw"}
        ds = load_dataset(cfg.dataset, fmt, **kwargs)
        if cfg.binarize_threshold is not None:
            ds = binarize_labels(ds, cfg.binarize_threshold)
        elif kind == "logreg":
            ds = replace(ds, labels=map_binary_labels(ds.labels))
        if cfg.standardize:
            ds = standardize(ds)
    return make_problem(cfg.problem_spec, ds)


# --- running -------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    dataset: str
    task: str
    schedule: str
    scheme: str
    mean_best_loss: float
    std_best_loss: float
    selected_gamma0: float
    divergence_count: int


@dataclass(frozen=True)
class CellStats:
    scheme: str
    schedule: str
    gamma0: float
    mean: float
    std: float
    completed: int
    diverged: int


@dataclass
class ExperimentResult:
    rows: list
    cells: list
    records: dict
    gammas: tuple

    def best_records(self, scheme: str, schedule: str) -> list:
        """Trial records at the selected step size of one summary row."""
        row = next(r for r in self.rows if r.scheme == scheme and r.schedule == schedule)
        return [rec for (s, sch, g, _, _), rec in sorted(self.records.items())
                if s == scheme and sch == schedule and self.gammas[g] == row.selected_gamma0]


def trial_seeds(base_seed: int, g_index: int, init_index: int, run_index: int) -> tuple[int, int]:
    """(init_seed, shuffle_seed) of one trial."""
    return (combine_seeds(base_seed, INIT_TAG, init_index),
            combine_seeds(base_seed, SHUFFLE_TAG, g_index, init_index, run_index))


_WORKER_PROBLEM = None


def _init_worker(problem):
    global _WORKER_PROBLEM
    _WORKER_PROBLEM = problem


def _run_one(task):
    cfg, key = task
    return key, _execute(_WORKER_PROBLEM, cfg, key)


def _execute(problem, cfg: ExperimentConfig, key) -> TrialRecord:
    scheme_name, schedule, g, i, r = key
    init_seed, shuffle_seed = trial_seeds(cfg.base_seed, g, i, r)
    scheme = make_scheme(scheme_name, shuffle_seed, cfg.apr_params())
    return run_trial(problem, scheme, cfg.optimizer_config(cfg.gammas[g], schedule), init_seed)


def _summarise(values: list) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def select_gamma(cells: list) -> CellStats:
    """Lowest mean best-so-far loss; ties go to the smaller step size."""
    ok = [c for c in cells if math.isfinite(c.mean)]
    if not ok:
        return min(cells, key=lambda c: c.gamma0)
    return min(ok, key=lambda c: (c.mean, c.gamma0))


def run_experiment_detailed(cfg: ExperimentConfig, problem=None) -> ExperimentResult:
    cfg.validate()
    if problem is None:
        problem = build_problem(cfg)
    keys = [(s, sch, g, i, r)
            for s in cfg.schemes for sch in cfg.schedules for g in range(len(cfg.gammas))
            for i in range(cfg.n_inits) for r in range(cfg.n_runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=(problem,)) as pool:
            records = dict(pool.map(_run_one, [(cfg, k) for k in keys], chunksize=4))
    else:
        records = {k: _execute(problem, cfg, k) for k in keys}

    rows, cells = [], []
    for s in cfg.schemes:
        for sch in cfg.schedules:
            group = []
            for g, gamma0 in enumerate(cfg.gammas):
                recs = [records[(s, sch, g, i, r)] for i in range(cfg.n_inits) for r in range(cfg.n_runs)]
                good = [rec.best for rec in recs if not rec.diverged]
                mean, std = _summarise(good)
                group.append(CellStats(s, sch, gamma0, mean, std, len(good), len(recs) - len(good)))
            cells.extend(group)
            best = select_gamma(group)
            rows.append(SummaryRow(cfg.dataset_label(), cfg.task_name(), sch, s, best.mean, best.std,
                                   best.gamma0, best.diverged))
    return ExperimentResult(rows, cells, records, tuple(cfg.gammas))


def run_experiment(cfg: ExperimentConfig, problem=None) -> list:
    return run_experiment_detailed(cfg, problem).rows


# --- output --------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    return DIVERGED if not math.isfinite(x) else format(x, ".9g")


def render_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([row.dataset, row.task, row.schedule, row.scheme, _fmt_float(row.mean_best_loss),
                         _fmt_float(row.std_best_loss), _fmt_float(row.selected_gamma0), row.divergence_count])
    return buf.getvalue()


def render_json(rows) -> str:
    out = []
    for row in rows:
        d = asdict(row)
        for k in ("mean_best_loss", "std_best_loss", "selected_gamma0"):
            d[k] = float(_fmt_float(d[k])) if math.isfinite(d[k]) else DIVERGED
        out.append(d)
    return json.dumps(out, indent=2) + "\n"


def emit_results(rows, fmt: str, path) -> None:
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    text = render_csv(rows) if fmt == "csv" else render_json(rows)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _parse_float(x) -> float:
    return math.nan if x == DIVERGED else float(x)


def read_results(path, fmt: Optional[str] = None) -> list:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    text = path.read_text()
    if fmt == "json":
        items = json.loads(text)
    else:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ParseError(f"unexpected CSV header {reader.fieldnames}")
        items = list(reader)
    return [SummaryRow(d["dataset"], d["task"], d["schedule"], d["scheme"], _parse_float(d["mean_best_loss"]),
                       _parse_float(d["std_best_loss"]), _parse_float(d["selected_gamma0"]),
                       int(d["divergence_count"])) for d in items]


def dump_trace(result: ExperimentResult, path) -> None:
    """One JSON line per trial, in key order."""
    with open(path, "w") as fh:
        for (s, sch, g, i, r), rec in sorted(result.records.items()):
            entry = {"scheme": s, "schedule": sch, "gamma_index": g, "gamma0": result.gammas[g],
                     "init_index": i, "run_index": r, **rec.to_dict()}
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def load_trace(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
