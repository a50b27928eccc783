"""Experiment harness: config, metrics, report and summary emission.

A run generates feasible queries from the config seed, builds whatever
structure the chosen method needs, answers every query, and grades each
answer against the cached brute-force ground truth. The machine-readable
report (one JSON object per line, fixed key order, no wall-clock fields)
is byte-reproducible for a fixed dataset, config and seed; timings go to
the human-readable summary only.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from .baselines import build_sair, jir_answer, marginal_props, sair_answer
from .bitmaps import query_mask, relevant_partitions
from .core import Query
from .datasets import Dataset, query_to_dict
from .generators import gen_queries
from .index_io import FairIndex, build_index
from .lsh import DEFAULT_ELL_MAX, LshParams
from .pipeline import GroundTruth, MethodResult, answer_query

THREADS_ENV = "FAIRKNN_THREADS"
METHODS = ("pipeline", "brute", "sair", "jir")


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment knobs; every field is a config-file key."""

    k: int = 10
    queries: int = 100
    attrs: tuple[str, ...] = ()      # constrained attribute names; empty = all
    method: str = "pipeline"
    radius: float = 1.0
    cfactor: float = 2.0
    width: float = 4.0
    delta: float = 0.1
    max_near: int = 0                # 0: use k
    mu: int = 0                      # 0: derive per partition
    ell: int = 0                     # 0: derive per partition
    ell_max: int = DEFAULT_ELL_MAX
    family: str = "auto"
    seed: int = 0
    force_ilp: bool = False
    quota_boost: int = 1
    node_budget: int = 500_000
    query_noise: float = 0.25
    anchor: str = "data"             # perturb a random record, or 'origin'
    threads: int = 0                 # 0: env override or 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.queries < 1:
            raise ValueError("queries must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")

    def lsh_params(self) -> LshParams:
        return LshParams(radius=self.radius, cfactor=self.cfactor, width=self.width,
                         delta=self.delta, max_near=self.max_near or self.k,
                         mu=self.mu or None, ell=self.ell or None, ell_max=self.ell_max,
                         family=self.family, seed=self.seed)


def _coerce(name: str, kind, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {name}: expected a boolean, got {raw!r}")
    if kind == "tuple[str, ...]":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Flat `key = value` lines; # starts a comment; unknown keys are errors."""
    by_name = {f.name: f for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"config line {lineno}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in by_name:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, by_name[key].type, raw)
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def format_config(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ",".join(value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------------- metrics

@dataclass(eq=False)
class QueryMetrics:
    query_id: int
    query: Query
    status: str
    solver: str
    selected: tuple[int, ...]
    cost: float
    gt_status: str
    gt_cost: float
    daf: float | None
    recall: float | None
    scanned: int
    scanned_fraction: float
    violations: int
    verified: bool
    n_candidates: int
    search_time: float
    post_time: float
    gt_time: float

    @property
    def success(self) -> bool:
        return self.status == "feasible" and self.verified


@dataclass(eq=False)
class Metrics:
    method: str
    rows: list[QueryMetrics]
    build_time: float
    partitions: int
    clamped: int

    def _mean(self, picks: list[float]) -> float | None:
        return sum(picks) / len(picks) if picks else None

    @property
    def success_rate(self) -> float:
        return sum(1 for r in self.rows if r.success) / len(self.rows)

    @property
    def mean_daf(self) -> float | None:
        return self._mean([r.daf for r in self.rows if r.daf is not None])

    @property
    def mean_recall(self) -> float | None:
        return self._mean([r.recall for r in self.rows if r.recall is not None])

    @property
    def mean_scanned_fraction(self) -> float:
        return sum(r.scanned_fraction for r in self.rows) / len(self.rows)

    @property
    def search_time(self) -> float:
        return sum(r.search_time for r in self.rows)

    @property
    def post_time(self) -> float:
        return sum(r.post_time for r in self.rows)

    @property
    def gt_time(self) -> float:
        return sum(r.gt_time for r in self.rows)


def thread_count(config: ExperimentConfig) -> int:
    if config.threads > 0:
        return config.threads
    env = os.environ.get(THREADS_ENV, "").strip()
    return max(1, int(env)) if env else 1


def _constrained_indices(ds: Dataset, config: ExperimentConfig) -> tuple[int, ...]:
    if not config.attrs:
        return tuple(range(ds.schema.m))
    return tuple(sorted(ds.schema.attr_index(name) for name in config.attrs))


def _grade(qi: int, query: Query, res: MethodResult, gt_res: MethodResult,
           gt_time: float, denom: int) -> QueryMetrics:
    both = res.selection.feasible and gt_res.selection.feasible
    daf = recall = None
    if both:
        if gt_res.selection.cost == 0.0:
            daf = 1.0 if res.selection.cost <= 1e-12 else math.inf
        else:
            daf = res.selection.cost / gt_res.selection.cost
        overlap = len(set(res.selection.selected) & set(gt_res.selection.selected))
        recall = overlap / query.spec.k if query.spec.k else 1.0
    return QueryMetrics(
        query_id=qi, query=query,
        status=res.selection.status, solver=res.selection.solver,
        selected=res.selection.selected, cost=res.selection.cost,
        gt_status=gt_res.selection.status, gt_cost=gt_res.selection.cost,
        daf=daf, recall=recall,
        scanned=res.scanned,
        scanned_fraction=res.scanned / denom if denom else 0.0,
        violations=len(res.verification.violations),
        verified=res.verification.ok,
        n_candidates=res.n_candidates,
        search_time=res.search_time, post_time=res.post_time, gt_time=gt_time)


def run_experiment(ds: Dataset, config: ExperimentConfig,
                   report_path: str | Path | None = None,
                   summary_path: str | Path | None = None) -> Metrics:
    """Answer config.queries generated queries with config.method and grade them."""
    cons = _constrained_indices(ds, config)
    queries = gen_queries(ds, config.k, config.queries, config.seed, config.query_noise,
                          constrained=cons, anchor=config.anchor)
    params = config.lsh_params()

    build_t0 = time.perf_counter()
    index: FairIndex | None = None
    sair = None
    props = None
    if config.method in ("pipeline", "jir"):
        index = build_index(ds, params)
        if config.method == "jir":
            props = marginal_props(ds)
    elif config.method == "sair":
        sair = build_sair(ds, params)
    build_time = time.perf_counter() - build_t0

    gt = GroundTruth(ds, node_budget=config.node_budget)

    def run_one(query: Query) -> MethodResult:
        if config.method == "pipeline":
            return answer_query(ds, index, query, force_ilp=config.force_ilp,
                                quota_boost=config.quota_boost, node_budget=config.node_budget)
        if config.method == "sair":
            return sair_answer(ds, sair, query, force_ilp=config.force_ilp,
                               node_budget=config.node_budget)
        if config.method == "jir":
            return jir_answer(ds, index, query, props, force_ilp=config.force_ilp,
                              node_budget=config.node_budget)
        return gt.answer(query)

    workers = thread_count(config)
    if workers > 1 and config.method != "brute":
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, queries))
    else:
        results = [run_one(q) for q in queries]

    rows: list[QueryMetrics] = []
    for qi, (query, res) in enumerate(zip(queries, results)):
        t0 = time.perf_counter()
        gt_res = gt.answer(query)
        gt_time = time.perf_counter() - t0
        qm = query_mask(query.spec, gt.layout)
        rel = relevant_partitions(gt.groups.keys(), qm)
        denom = int(sum(gt.groups[bits].size for bits in rel))
        rows.append(_grade(qi, query, res, gt_res, gt_time, denom))

    partitions = len(index.partitions) if index is not None else (len(sair.groups) if sair else 0)
    clamped = 0
    if index is not None:
        clamped = sum(1 for p in index.partitions.values() if p.clamped)
    elif sair is not None:
        clamped = sum(1 for p in sair.groups.values() if p.clamped)
    metrics = Metrics(config.method, rows, build_time, partitions, clamped)

    if report_path is not None:
        write_report(metrics, ds, report_path)
    if summary_path is not None:
        Path(summary_path).write_text(format_summary(metrics, ds, config))
    return metrics


# -------------------------------------------------------------------- reports

def report_row(row: QueryMetrics, ds: Dataset) -> str:
    """One report line; key order is fixed and wall-clock free."""
    qd = query_to_dict(row.query, ds.schema)
    payload = {
        "query_id": row.query_id,
        "k": row.query.spec.k,
        "constraints": qd["constraints"],
        "vector": qd["vector"],
        "status": row.status,
        "solver": row.solver,
        "selected": list(row.selected),
        "cost": row.cost,
        "gt_status": row.gt_status,
        "gt_cost": row.gt_cost,
        "daf": row.daf,
        "recall": row.recall,
        "scanned": row.scanned,
        "scanned_fraction": row.scanned_fraction,
        "violations": row.violations,
        "verified": row.verified,
    }
    return json.dumps(payload, separators=(",", ":"))


def write_report(metrics: Metrics, ds: Dataset, path: str | Path) -> None:
    with open(path, "w") as fh:
        for row in metrics.rows:
            fh.write(report_row(row, ds) + "\n")


def format_summary(metrics: Metrics, ds: Dataset, config: ExperimentConfig) -> str:
    def show(x: float | None) -> str:
        return "n/a" if x is None else f"{x:.6f}"

    total_query = metrics.search_time + metrics.post_time
    lines = [
        f"dataset: n={ds.n} d={ds.d} m={ds.schema.m} distance={ds.kind}",
        f"method: {metrics.method}",
        f"queries: {len(metrics.rows)} (k={config.k}, seed={config.seed})",
        f"partitions: {metrics.partitions} (ell clamped in {metrics.clamped})",
        f"success_rate: {metrics.success_rate:.4f}",
        f"mean_daf: {show(metrics.mean_daf)}",
        f"mean_recall: {show(metrics.mean_recall)}",
        f"mean_scanned_fraction: {metrics.mean_scanned_fraction:.6f}",
        f"build_time_s: {metrics.build_time:.3f}",
        f"search_time_s: {metrics.search_time:.3f}",
        f"post_time_s: {metrics.post_time:.3f}",
        f"query_time_s: {total_query:.3f} (search + postprocess)",
        f"ground_truth_time_s: {metrics.gt_time:.3f}",
        "",
        "config:",
    ]
    lines += ["  " + ln for ln in format_config(config).strip().splitlines()]
    return "\n".join(lines) + "\n"
