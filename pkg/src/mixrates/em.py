"""Penalized maximum-likelihood fitting via a modified EM algorithm.

The M-step weight update pi_j <- (sum_i w_ij + xi) / (n + k xi) maximizes
the complete-data objective augmented with the log-weight penalty
xi * sum_j log pi_j, keeping every weight above the algebraic floor
xi / (n + k xi).  With xi = 0 every update reduces to textbook EM.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

import math

from .errors import DegenerateData, NonpositiveWeight
from .measure import (
    Atom,
    MixingMeasure,
    ParameterSpace,
    log_component_densities,
    log_density,
    logsumexp_rows,
)


@dataclass(frozen=True)
class InitStrategy:
    """How to build the starting measure.

    favorable: randomly partition the k fitted indices into k0 nonempty
    groups, then jitter each index's parameters around its group's true
    component (uniform starting weights).
    """

    variant: str = "random_box"  # favorable | random_box | from_measure
    g_true: Optional[MixingMeasure] = None
    jitter_scale: float = 0.01
    g_init: Optional[MixingMeasure] = None
    space: Optional[ParameterSpace] = None

    def __post_init__(self):
        if self.variant == "favorable" and self.g_true is None:
            raise ValueError("favorable init requires the true measure")
        if self.variant == "from_measure" and self.g_init is None:
            raise ValueError("from_measure init requires a starting measure")
        if self.jitter_scale <= 0:
            raise ValueError("jitter_scale must be positive")


@dataclass(frozen=True)
class EmConfig:
    k: int
    xi: float = 0.0
    max_iters: int = 2000
    tol: float = 1e-8
    scale_mode: str = "fixed"
    cov_floor: float = 1e-6
    init: InitStrategy = field(default_factory=InitStrategy, repr=False)
    # Reproduces the literal covariance update that reuses the previous
    # iterate's mean instead of the freshly updated one.
    stale_mean_covariance: bool = False

    def __post_init__(self):
        if self.k < 1 or self.max_iters < 1:
            raise ValueError("k and max_iters must be >= 1")
        if self.tol <= 0 or self.cov_floor <= 0 or self.xi < 0:
            raise ValueError("tol and cov_floor must be > 0, xi >= 0")


@dataclass
class FitResult:
    measure: MixingMeasure
    iterations: int
    objective_trace: List[float]
    converged: bool
    responsibilities: Optional[np.ndarray] = None


def penalized_objective(g: MixingMeasure, data: np.ndarray, xi: float) -> float:
    """Log-likelihood plus xi times the sum of log mixing weights."""
    if np.any(g.weights <= 0.0):
        raise NonpositiveWeight("log-weight penalty is -inf at a zero weight")
    ll = float(np.sum(log_density(g, data)))
    return ll + xi * float(np.sum(np.log(g.weights)))


def responsibilities(g: MixingMeasure, data: np.ndarray) -> np.ndarray:
    """n x k posterior component probabilities, computed in log space."""
    log_joint = log_component_densities(g, data) + np.log(g.weights)
    return np.exp(log_joint - logsumexp_rows(log_joint)[:, None])


def _floor_eigenvalues(cov: np.ndarray, floor: float) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] >= floor:
        return cov
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def em_step(g: MixingMeasure, data: np.ndarray, cfg: EmConfig) -> MixingMeasure:
    """One E-step/M-step pass of the modified EM algorithm."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    return _m_step(g, data, responsibilities(g, data), cfg)


def _m_step(
    g: MixingMeasure, data: np.ndarray, resp: np.ndarray, cfg: EmConfig
) -> MixingMeasure:
    n, d = data.shape
    k = g.order
    nj = resp.sum(axis=0)

    weights = (nj + cfg.xi) / (n + k * cfg.xi)

    means = np.empty((k, d))
    for j in range(k):
        if nj[j] > 1e-300:
            means[j] = resp[:, j] @ data / nj[j]
        else:
            means[j] = g.atoms[j].mean

    if cfg.scale_mode == "free":
        covs = np.empty((k, d, d))
        for j in range(k):
            center = g.atoms[j].mean if cfg.stale_mean_covariance else means[j]
            diff = data - center
            if nj[j] > 1e-300:
                cov = (resp[:, j, None] * diff).T @ diff / nj[j]
            else:
                cov = g.covariance_of(j)
            covs[j] = _floor_eigenvalues(cov, cfg.cov_floor)
        atoms = [Atom(means[j], covs[j]) for j in range(k)]
        return MixingMeasure(atoms, weights, space=g.space, prune=False)

    # Fixed-scale mode: covariances are known and held at their values.
    atoms = [Atom(means[j]) for j in range(k)]
    return MixingMeasure(
        atoms, weights, space=g.space, fixed_covariance=g.fixed_covariance, prune=False
    )


def _parameter_vector(g: MixingMeasure, scale_mode: str) -> np.ndarray:
    parts = [g.weights, g.means.ravel()]
    if scale_mode == "free":
        parts.append(g.covariances().ravel())
    return np.concatenate(parts)


def _favorable_init(
    cfg: EmConfig, rng: np.random.Generator, fixed_covariance
) -> MixingMeasure:
    g0 = cfg.init.g_true
    k, k0, d = cfg.k, g0.order, g0.dimension
    if k < k0:
        raise ValueError("favorable init needs fitted order k >= true order")
    # Random partition of {0..k-1} into k0 nonempty groups.
    perm = rng.permutation(k)
    assignment = np.empty(k, dtype=int)
    assignment[perm[:k0]] = np.arange(k0)
    if k > k0:
        assignment[perm[k0:]] = rng.integers(0, k0, size=k - k0)

    scale = cfg.init.jitter_scale
    atoms = []
    for j in range(k):
        tgt = assignment[j]
        mean = g0.atoms[tgt].mean + scale * rng.standard_normal(d)
        if cfg.scale_mode == "free":
            jitter = scale * rng.standard_normal((d, d))
            cov = g0.covariance_of(tgt) + 0.5 * (jitter + jitter.T)
            atoms.append(Atom(mean, _floor_eigenvalues(cov, cfg.cov_floor)))
        else:
            atoms.append(Atom(mean))
    weights = np.full(k, 1.0 / k)
    return MixingMeasure(
        atoms,
        weights,
        space=g0.space,
        fixed_covariance=None if cfg.scale_mode == "free" else fixed_covariance,
        prune=False,
    )


def _random_box_init(
    cfg: EmConfig, data: np.ndarray, rng: np.random.Generator, fixed_covariance
) -> MixingMeasure:
    d = data.shape[1]
    space = cfg.init.space
    if space is not None:
        lo, hi = space.mean_lower, space.mean_upper
    else:
        lo, hi = data.min(axis=0), data.max(axis=0)
    means = lo + (hi - lo) * rng.random((cfg.k, d))
    if cfg.scale_mode == "free":
        base = np.cov(data.T).reshape(d, d) if data.shape[0] > 1 else np.eye(d)
        atoms = [Atom(m, _floor_eigenvalues(base, cfg.cov_floor)) for m in means]
        fixed = None
    else:
        atoms = [Atom(m) for m in means]
        fixed = fixed_covariance if fixed_covariance is not None else np.eye(d)
    return MixingMeasure(
        atoms, np.full(cfg.k, 1.0 / cfg.k), fixed_covariance=fixed, prune=False
    )


def initial_measure(
    cfg: EmConfig, data: np.ndarray, seed: int, fixed_covariance=None
) -> MixingMeasure:
    rng = np.random.Generator(np.random.Philox(seed))
    if cfg.init.variant == "from_measure":
        return cfg.init.g_init
    if cfg.init.variant == "favorable":
        if fixed_covariance is None and cfg.scale_mode == "fixed":
            fixed_covariance = cfg.init.g_true.fixed_covariance
        return _favorable_init(cfg, rng, fixed_covariance)
    if cfg.init.variant == "random_box":
        return _random_box_init(cfg, data, rng, fixed_covariance)
    raise ValueError(f"unknown init variant {cfg.init.variant!r}")


def fit(
    data: np.ndarray,
    cfg: EmConfig,
    seed: int = 0,
    keep_responsibilities: bool = False,
) -> FitResult:
    """Run the modified EM loop until the parameter change is below tol.

    Deterministic given (data, cfg, seed).  The objective trace records
    the penalized objective at every iterate, starting from the initial
    measure.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n = data.shape[0]
    if n < cfg.k:
        raise DegenerateData(f"n < k: {n} observations for {cfg.k} components")

    g = initial_measure(cfg, data, seed)
    if np.any(g.weights <= 0.0):
        raise NonpositiveWeight("log-weight penalty is -inf at a zero weight")
    trace: List[float] = []
    converged = False
    iterations = 0
    prev_vec = _parameter_vector(g, cfg.scale_mode)
    for _ in range(cfg.max_iters):
        # One density evaluation feeds both the trace and the E-step.
        log_w = np.log(g.weights)
        log_joint = log_component_densities(g, data) + log_w
        lse = logsumexp_rows(log_joint)
        trace.append(float(lse.sum()) + cfg.xi * float(log_w.sum()))
        resp = np.exp(log_joint - lse[:, None])
        g = _m_step(g, data, resp, cfg)
        iterations += 1
        vec = _parameter_vector(g, cfg.scale_mode)
        if float(np.linalg.norm(vec - prev_vec)) <= cfg.tol:
            converged = True
            break
        prev_vec = vec
    trace.append(penalized_objective(g, data, cfg.xi))

    resp = responsibilities(g, data) if keep_responsibilities else None
    return FitResult(g, iterations, trace, converged, resp)


def xi_log_n(n: int) -> float:
    """The default tuning weight: log of the sample size."""
    return math.log(n)
