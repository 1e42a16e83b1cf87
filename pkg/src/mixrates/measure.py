"""Mixing measures on a compact parameter space.

A mixing measure is a finitely supported probability measure whose atoms
are Gaussian component parameters (mean, optionally covariance) and whose
weights are the mixing proportions.  This module provides the measure
representation, Gaussian mixture density evaluation, reproducible
sampling, and nearest-atom (Voronoi) partitioning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import MetricMismatch, SingularCovariance

WEIGHT_TOL = 1e-12
SYMMETRY_TOL = 1e-12

MEAN_ONLY = "mean"
MEAN_AND_COV = "mean+cov"


def _frozen_array(x, dtype=float) -> np.ndarray:
    a = np.array(x, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ParameterSpace:
    """Compact box for means plus an eigenvalue interval for covariances."""

    dimension: int
    mean_lower: np.ndarray
    mean_upper: np.ndarray
    eig_lower: float = 1e-6
    eig_upper: float = 1.0
    scale_mode: str = "fixed"  # "fixed" (shared known covariance) or "free"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        lo = _frozen_array(np.broadcast_to(self.mean_lower, (self.dimension,)))
        hi = _frozen_array(np.broadcast_to(self.mean_upper, (self.dimension,)))
        object.__setattr__(self, "mean_lower", lo)
        object.__setattr__(self, "mean_upper", hi)
        if not np.all(lo < hi):
            raise ValueError("mean lower bounds must be strictly below upper bounds")
        if not (0.0 < self.eig_lower < self.eig_upper):
            raise ValueError("eigenvalue interval must satisfy 0 < lower < upper")
        if self.scale_mode not in ("fixed", "free"):
            raise ValueError(f"unknown scale_mode {self.scale_mode!r}")

    @property
    def diameter(self) -> float:
        """max(1, diam of the mean box)."""
        return max(1.0, float(np.linalg.norm(self.mean_upper - self.mean_lower)))


@dataclass(frozen=True)
class Atom:
    """One support point: a mean and, in free-scale mode, a covariance."""

    mean: np.ndarray
    covariance: Optional[np.ndarray] = None

    def __post_init__(self):
        mean = _frozen_array(np.atleast_1d(self.mean))
        object.__setattr__(self, "mean", mean)
        if self.covariance is not None:
            cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
            if cov.shape != (mean.size, mean.size):
                raise ValueError("covariance shape incompatible with mean")
            if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
                raise ValueError("covariance not symmetric")
            object.__setattr__(self, "covariance", _frozen_array(cov))


class MixingMeasure:
    """Finitely supported probability measure on the parameter space.

    Weights below 1e-12 are dropped at construction and the remainder
    renormalized, so every stored weight is strictly positive.  In fixed
    scale mode a single shared covariance lives on the measure itself.
    """

    def __init__(
        self,
        atoms: Sequence[Atom],
        weights,
        space: Optional[ParameterSpace] = None,
        fixed_covariance=None,
        exact_order: bool = False,
        prune: bool = True,
    ):
        weights = np.asarray(weights, dtype=float)
        atoms = list(atoms)
        if weights.ndim != 1 or len(atoms) != weights.size:
            raise ValueError("need one weight per atom")
        if weights.size == 0:
            raise ValueError("measure needs at least one atom")
        if np.any(weights < 0):
            raise ValueError("negative mixing weight")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if prune:
            keep = weights >= WEIGHT_TOL
            if not np.any(keep):
                raise ValueError("all weights vanish")
            atoms = [a for a, k in zip(atoms, keep) if k]
            weights = weights[keep] / weights[keep].sum()
        else:
            weights = np.maximum(weights, 1e-300)
            weights = weights / weights.sum()

        d = atoms[0].mean.size
        if any(a.mean.size != d for a in atoms):
            raise ValueError("atoms have inconsistent dimension")

        self.atoms = tuple(atoms)
        self.weights = _frozen_array(weights)
        self.space = space
        if fixed_covariance is not None:
            fixed_covariance = np.atleast_2d(np.asarray(fixed_covariance, float))
            if fixed_covariance.shape != (d, d):
                raise ValueError("fixed covariance shape incompatible with atoms")
            fixed_covariance = _frozen_array(fixed_covariance)
        self.fixed_covariance = fixed_covariance

        if space is not None:
            eps = 1e-9
            for a in self.atoms:
                if np.any(a.mean < space.mean_lower - eps) or np.any(
                    a.mean > space.mean_upper + eps
                ):
                    raise ValueError("atom mean outside the parameter box")

        if exact_order:
            for i in range(self.order):
                for j in range(i + 1, self.order):
                    if atom_distance(self, i, self, j, self.metric_kind) <= 0.0:
                        raise ValueError("duplicate atoms in an exact-order measure")

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_points(
        cls,
        means,
        weights,
        covariances=None,
        space: Optional[ParameterSpace] = None,
        fixed_covariance=None,
        **kwargs,
    ) -> "MixingMeasure":
        means = np.atleast_2d(np.asarray(means, dtype=float))
        if covariances is None:
            atoms = [Atom(m) for m in means]
        else:
            covariances = np.asarray(covariances, dtype=float)
            atoms = [Atom(m, c) for m, c in zip(means, covariances)]
        return cls(atoms, weights, space=space, fixed_covariance=fixed_covariance, **kwargs)

    # -- basic accessors ------------------------------------------------------

    @property
    def order(self) -> int:
        return len(self.atoms)

    @property
    def dimension(self) -> int:
        return self.atoms[0].mean.size

    @property
    def means(self) -> np.ndarray:
        return np.stack([a.mean for a in self.atoms])

    @property
    def has_atom_covariances(self) -> bool:
        return all(a.covariance is not None for a in self.atoms)

    @property
    def metric_kind(self) -> str:
        return MEAN_AND_COV if self.has_atom_covariances else MEAN_ONLY

    def covariance_of(self, i: int) -> np.ndarray:
        cov = self.atoms[i].covariance
        if cov is None:
            cov = self.fixed_covariance
        if cov is None:
            raise MetricMismatch("atom has no covariance and no shared one is set")
        return cov

    def covariances(self) -> np.ndarray:
        return np.stack([self.covariance_of(i) for i in range(self.order)])

    def permuted(self, perm) -> "MixingMeasure":
        perm = list(perm)
        return MixingMeasure(
            [self.atoms[i] for i in perm],
            self.weights[perm],
            space=self.space,
            fixed_covariance=self.fixed_covariance,
        )

    # -- JSON round trip (used by the CLI measure-file format) ----------------

    def to_json(self) -> str:
        doc = {"weights": self.weights.tolist(), "means": self.means.tolist()}
        if self.has_atom_covariances:
            doc["covariances"] = [a.covariance.tolist() for a in self.atoms]
        elif self.fixed_covariance is not None:
            doc["fixed_covariance"] = self.fixed_covariance.tolist()
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MixingMeasure":
        doc = json.loads(text)
        return cls.from_points(
            doc["means"],
            doc["weights"],
            covariances=doc.get("covariances"),
            fixed_covariance=doc.get("fixed_covariance"),
        )


@dataclass(frozen=True)
class VoronoiPartition:
    """Assignment of a measure's atom indices to cells of reference atoms."""

    cells: tuple  # tuple of frozenset, one per reference atom
    metric_kind: str = MEAN_ONLY

    def cardinalities(self) -> list:
        return [len(c) for c in self.cells]


def atom_distance(
    g1: MixingMeasure, i: int, g2: MixingMeasure, j: int, metric_kind: str
) -> float:
    """Distance between atom i of g1 and atom j of g2.

    Mean-only: Euclidean distance of means.  Composite: Euclidean mean
    distance plus Frobenius covariance distance.
    """
    d = float(np.linalg.norm(g1.atoms[i].mean - g2.atoms[j].mean))
    if metric_kind == MEAN_ONLY:
        return d
    if metric_kind == MEAN_AND_COV:
        c1, c2 = g1.covariance_of(i), g2.covariance_of(j)
        return d + float(np.linalg.norm(c1 - c2, ord="fro"))
    raise ValueError(f"unknown metric_kind {metric_kind!r}")


def voronoi_cells(
    g: MixingMeasure, g_ref: MixingMeasure, metric_kind: str = MEAN_ONLY
) -> VoronoiPartition:
    """Partition g's atom indices by nearest reference atom.

    Ties go to the smallest reference index, so the cells always form a
    true partition of {0, ..., order-1}.
    """
    if metric_kind == MEAN_AND_COV:
        if not (g.has_atom_covariances or g.fixed_covariance is not None):
            raise MetricMismatch("composite metric requires covariances on g")
        if not (g_ref.has_atom_covariances or g_ref.fixed_covariance is not None):
            raise MetricMismatch("composite metric requires covariances on g_ref")
    cells = [set() for _ in range(g_ref.order)]
    for i in range(g.order):
        dists = [
            atom_distance(g, i, g_ref, j, metric_kind) for j in range(g_ref.order)
        ]
        cells[int(np.argmin(dists))].add(i)
    return VoronoiPartition(tuple(frozenset(c) for c in cells), metric_kind)


# -- Gaussian density and sampling -------------------------------------------


def _chol(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc


def logsumexp_rows(a: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp for finite inputs (hot path in EM)."""
    m = a.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=1, keepdims=True)))[:, 0]


def log_component_densities(g: MixingMeasure, x: np.ndarray) -> np.ndarray:
    """n x k matrix of log N(x_i; mu_j, Sigma_j)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    if d != g.dimension:
        raise ValueError("data dimension does not match the measure")
    out = np.empty((n, g.order))
    for j in range(g.order):
        cov = g.covariance_of(j)
        chol = _chol(cov)
        inv_chol = np.linalg.inv(chol)
        diff = x - g.atoms[j].mean
        sol = diff @ inv_chol.T
        maha = np.einsum("ni,ni->n", sol, sol)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, j] = -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))
    return out


def log_density(g: MixingMeasure, x) -> np.ndarray:
    """Log mixture density at each row of x, accumulated in log space."""
    comp = log_component_densities(g, x)
    return logsumexp_rows(comp + np.log(g.weights))


def density(g: MixingMeasure, x) -> float:
    """Mixture density at a single point x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.exp(log_density(g, x[None, :])[0]))


def sample(g: MixingMeasure, n: int, seed: int) -> np.ndarray:
    """Draw n i.i.d. observations from the mixture.

    Uses the counter-based Philox generator so that identical seeds give
    bit-identical samples across platforms.  Gaussian draws come from
    numpy's ziggurat standard_normal (no Box-Muller).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    labels = rng.choice(g.order, size=n, p=g.weights)
    z = rng.standard_normal((n, g.dimension))
    chols = np.stack([_chol(g.covariance_of(j)) for j in range(g.order)])
    x = g.means[labels] + np.einsum("nij,nj->ni", chols[labels], z)
    return x
