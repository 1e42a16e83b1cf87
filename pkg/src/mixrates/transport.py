"""Exact optimal transport between finitely supported measures.

The solver is the exact LP route (scipy's HiGHS simplex), not an entropic
approximation: returned values are vertex-optimal and deterministic for
identical inputs.  Support sizes are capped at 64 per side, far above the
mixture orders used anywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, InfeasibleMarginals
from .measure import MEAN_ONLY, MixingMeasure, atom_distance

MAX_SUPPORT = 64

POWER_OF_DISTANCE = "power-of-distance"
CELL_DEPENDENT = "cell-dependent"
CUSTOM = "custom"


@dataclass(frozen=True)
class CostMatrix:
    """Nonnegative ground-cost matrix with a provenance tag."""

    values: np.ndarray
    provenance: str = CUSTOM

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("cost entries must be finite and nonnegative")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class Coupling:
    """Joint probability mass matrix with prescribed marginals."""

    plan: np.ndarray
    source_weights: np.ndarray
    target_weights: np.ndarray

    def marginal_errors(self) -> tuple:
        row = float(np.max(np.abs(self.plan.sum(axis=1) - self.source_weights)))
        col = float(np.max(np.abs(self.plan.sum(axis=0) - self.target_weights)))
        return row, col


def solve_ot(w_src, w_tgt, cost: CostMatrix):
    """Exact minimum-cost coupling of two discrete probability vectors.

    Returns (value, Coupling).  The value is the global LP optimum; the
    plan is whichever optimal vertex the simplex terminates at.
    """
    w_src = np.asarray(w_src, dtype=float)
    w_tgt = np.asarray(w_tgt, dtype=float)
    c = cost.values if isinstance(cost, CostMatrix) else CostMatrix(cost).values
    k, kp = c.shape
    if w_src.shape != (k,) or w_tgt.shape != (kp,):
        raise DimensionMismatch(
            f"cost is {k}x{kp} but marginals have sizes {w_src.size}, {w_tgt.size}"
        )
    if k > MAX_SUPPORT or kp > MAX_SUPPORT:
        raise DimensionMismatch(f"support sizes capped at {MAX_SUPPORT}")
    if abs(w_src.sum() - w_tgt.sum()) > 1e-6:
        raise InfeasibleMarginals(
            f"marginal masses differ: {w_src.sum()} vs {w_tgt.sum()}"
        )

    # Row-sum and column-sum constraints; the last column constraint is
    # implied by the others and dropped to keep the system full-rank.
    n_var = k * kp
    a_eq = np.zeros((k + kp - 1, n_var))
    b_eq = np.zeros(k + kp - 1)
    for i in range(k):
        a_eq[i, i * kp : (i + 1) * kp] = 1.0
        b_eq[i] = w_src[i]
    for j in range(kp - 1):
        a_eq[k + j, j::kp] = 1.0
        b_eq[k + j] = w_tgt[j]

    res = linprog(
        c.ravel(),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=(0.0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if not res.success:
        raise InfeasibleMarginals(f"LP solve failed: {res.message}")
    plan = np.clip(res.x.reshape(k, kp), 0.0, None)
    value = float(np.sum(plan * c))
    return value, Coupling(plan, w_src.copy(), w_tgt.copy())


def cost_matrix(
    g: MixingMeasure, g2: MixingMeasure, r: float = 1.0, metric_kind: str = MEAN_ONLY
) -> CostMatrix:
    """Pairwise atom distances raised to the power r."""
    vals = np.empty((g.order, g2.order))
    for i in range(g.order):
        for j in range(g2.order):
            vals[i, j] = atom_distance(g, i, g2, j, metric_kind) ** r
    return CostMatrix(vals, POWER_OF_DISTANCE)


def wasserstein(
    g: MixingMeasure,
    g2: MixingMeasure,
    r: float = 2.0,
    metric_kind: str = MEAN_ONLY,
) -> float:
    """Order-r Wasserstein distance between two mixing measures."""
    if r < 1:
        raise ValueError("order r must be >= 1")
    if g.dimension != g2.dimension:
        raise DimensionMismatch("measures live on different parameter dimensions")
    value, _ = solve_ot(g.weights, g2.weights, cost_matrix(g, g2, r, metric_kind))
    return max(value, 0.0) ** (1.0 / r)
