"""Benchmark models A-C, the replication runner, and slope estimation.

Model A: two well-separated planar Gaussians with known equal scales.
Model B: three planar Gaussians with free covariances (printed weights
renormalized to sum to one).  Model C: a scalar location family whose
true atoms contract toward the two-atom limit measure as n grows.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .em import EmConfig, InitStrategy, fit, xi_log_n
from .errors import InsufficientData, UnsupportedModel
from .losses import loss_d, loss_dbar, loss_wtilde
from .measure import MixingMeasure, ParameterSpace, sample

CSV_HEADER = [
    "model",
    "k",
    "k0",
    "n",
    "replicate",
    "seed",
    "loss_name",
    "loss_value",
    "em_iters",
    "converged",
    "wall_ms",
]

DESK_N_GRID = [int(round(v)) for v in np.geomspace(1e2, 1e4, 10)]
DESK_REPLICATES = 10
PAPER_N_GRID = [int(round(v)) for v in np.geomspace(1e2, 1e5, 100)]
PAPER_REPLICATES = 20

SUPPORTED = {
    ("A", 2): (3, 4),
    ("B", 3): (4, 5),
    ("C", 3): (3,),
    ("C", 4): (4,),
}


@dataclass(frozen=True)
class ModelSpec:
    name: str
    k0: int
    k: int
    d: int
    scale_mode: str
    loss_name: str
    g_star: Optional[MixingMeasure] = None


@dataclass(frozen=True)
class ExperimentConfig:
    model_name: str
    k0: int
    k: int
    n_grid: Sequence[int]
    replicates: int
    base_seed: int = 0
    em_overrides: Dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        n_grid = tuple(int(n) for n in self.n_grid)
        if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        object.__setattr__(self, "n_grid", n_grid)


@dataclass(frozen=True)
class ExperimentRecord:
    model: str
    k: int
    k0: int
    n: int
    replicate: int
    seed: int
    loss_name: str
    loss_value: float
    em_iters: int
    converged: bool
    wall_ms: float


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    slope_stderr: float
    per_n_mean: Dict[int, float]
    per_n_std: Dict[int, float]


# -- model builders -----------------------------------------------------------


def epsilon_n(n: int, k0: int) -> float:
    """Contraction scale of Model C's true atoms."""
    return float(n) ** (-1.0 / (4 * k0 - 6))


def g_star_model_c() -> MixingMeasure:
    return MixingMeasure.from_points(
        [[0.0], [0.2]], [0.5, 0.5], fixed_covariance=[[0.01]]
    )


def build_model(name: str, k0: int, k: int, n: int):
    """True mixing measure and spec for one benchmark model at size n."""
    key = (name, k0)
    if key not in SUPPORTED or k not in SUPPORTED[key]:
        raise UnsupportedModel(f"model {name} with k0={k0}, k={k} is not supported")

    if name == "A":
        space = ParameterSpace(2, -1.0, 1.0, scale_mode="fixed")
        g0 = MixingMeasure.from_points(
            [[0.0, 0.0], [0.2, 0.2]],
            [0.5, 0.5],
            space=space,
            fixed_covariance=0.01 * np.eye(2),
            exact_order=True,
        )
        return g0, ModelSpec("A", k0, k, 2, "fixed", "d")

    if name == "B":
        space = ParameterSpace(2, -1.0, 1.0, eig_upper=0.5, scale_mode="free")
        means = [[0.0, 0.3], [0.1, -0.4], [0.5, 0.2]]
        covs = [
            [[0.042824, 0.017324], [0.017324, 0.081759]],
            [[0.0175, -0.0125], [-0.0125, 0.0175]],
            [[0.01, -0.0125], [-0.0125, 0.0175]],
        ]
        # Printed weights (1/3, 1/4, 1/3) sum to 11/12; renormalized.
        weights = np.array([1 / 3, 1 / 4, 1 / 3])
        weights = weights / weights.sum()
        g0 = MixingMeasure.from_points(
            means, weights, covariances=covs, space=space, exact_order=True
        )
        return g0, ModelSpec("B", k0, k, 2, "free", "dbar")

    # Model C: scalar location family, atoms depending on n.
    eps = epsilon_n(n, k0)
    atoms = [[0.0], [0.2 + eps], [0.2 + 4 * eps]]
    if k0 == 4:
        atoms.append([0.2 - 1.5 * eps])
    # Box wide enough for the largest contracted atom at the smallest n.
    space = ParameterSpace(1, -1.0, 3.0, scale_mode="fixed")
    g0 = MixingMeasure.from_points(
        atoms,
        np.full(k0, 1.0 / k0),
        space=space,
        fixed_covariance=[[0.01]],
        exact_order=True,
    )
    return g0, ModelSpec("C", k0, k, 1, "fixed", "wtilde", g_star=g_star_model_c())


def evaluate_loss(spec: ModelSpec, g_hat: MixingMeasure, g0: MixingMeasure) -> float:
    if spec.loss_name == "d":
        return loss_d(g_hat, g0)
    if spec.loss_name == "dbar":
        return loss_dbar(g_hat, g0)
    return loss_wtilde(g_hat, g0, spec.g_star)


# -- replication runner -------------------------------------------------------


def replicate_seed(base_seed: int, n_index: int, replicate: int) -> int:
    # Wide spacing keeps (n, replicate) seeds distinct across the grid.
    return base_seed + 1_000_003 * n_index + replicate


def _run_one(task) -> ExperimentRecord:
    cfg, n_index, n, rep = task
    seed = replicate_seed(cfg.base_seed, n_index, rep)
    g0, spec = build_model(cfg.model_name, cfg.k0, cfg.k, n)
    start = time.perf_counter()
    try:
        data = sample(g0, n, seed)
        em_cfg = EmConfig(
            k=cfg.k,
            xi=xi_log_n(n),
            scale_mode=spec.scale_mode,
            init=InitStrategy(variant="favorable", g_true=g0),
            **cfg.em_overrides,
        )
        result = fit(data, em_cfg, seed=seed)
        loss = evaluate_loss(spec, result.measure, g0)
        iters, converged = result.iterations, result.converged
    except Exception:
        # Failed replicates are recorded, never silently dropped.
        loss, iters, converged = float("nan"), 0, False
    wall_ms = 1000.0 * (time.perf_counter() - start)
    return ExperimentRecord(
        cfg.model_name, cfg.k, cfg.k0, n, rep, seed, spec.loss_name,
        loss, iters, converged, wall_ms,
    )


def run_experiment(cfg: ExperimentConfig) -> List[ExperimentRecord]:
    """One fitted replicate per (n, replicate), in deterministic order."""
    tasks = [
        (cfg, n_index, n, rep)
        for n_index, n in enumerate(cfg.n_grid)
        for rep in range(cfg.replicates)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_one, tasks))
    else:
        records = [_run_one(t) for t in tasks]
    records.sort(key=lambda r: (r.n, r.replicate))
    return records


# -- slope estimation ---------------------------------------------------------


def fit_slope(records: Sequence[ExperimentRecord]) -> SlopeFit:
    """OLS of log mean loss per n on log n, over converged records."""
    by_n: Dict[int, List[float]] = {}
    for r in records:
        if r.converged and np.isfinite(r.loss_value):
            by_n.setdefault(r.n, []).append(r.loss_value)
    if len(by_n) < 2:
        raise InsufficientData("need >= 2 distinct n values with converged records")

    ns = sorted(by_n)
    per_n_mean = {n: float(np.mean(by_n[n])) for n in ns}
    per_n_std = {n: float(np.std(by_n[n], ddof=1)) if len(by_n[n]) > 1 else 0.0
                 for n in ns}
    x = np.log(np.array(ns, dtype=float))
    y = np.log(np.array([per_n_mean[n] for n in ns]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    if len(ns) > 2:
        s2 = float(resid @ resid) / (len(ns) - 2)
        stderr = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    else:
        stderr = 0.0
    return SlopeFit(float(slope), float(intercept), stderr, per_n_mean, per_n_std)


# -- CSV emission -------------------------------------------------------------


def records_to_csv(records: Sequence[ExperimentRecord]) -> str:
    """UTF-8/LF CSV with round-trip exact floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(
            [
                r.model, r.k, r.k0, r.n, r.replicate, r.seed, r.loss_name,
                repr(float(r.loss_value)),
                r.em_iters,
                "true" if r.converged else "false",
                repr(float(r.wall_ms)),
            ]
        )
    return buf.getvalue()


def write_records(records: Sequence[ExperimentRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(records_to_csv(records))


def read_records(path: str) -> List[ExperimentRecord]:
    with open(path, "r", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header}")
        out = []
        for row in reader:
            out.append(
                ExperimentRecord(
                    row[0], int(row[1]), int(row[2]), int(row[3]), int(row[4]),
                    int(row[5]), row[6], float(row[7]), int(row[8]),
                    row[9] == "true", float(row[10]),
                )
            )
    return out
