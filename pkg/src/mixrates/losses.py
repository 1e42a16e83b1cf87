"""Refined loss functions over mixing measures.

Three losses sharpen the plain Wasserstein distance by treating Voronoi
cells of the reference measure differently depending on how many fitted
atoms they contain:

* ``loss_d``       -- strongly identifiable kernels (squared terms on
                      crowded cells, linear on singletons);
* ``loss_dbar``    -- location-scale Gaussian kernels, with cell-size
                      dependent exponents from the ``RBarTable``;
* ``loss_wtilde``  -- generalized transport cost with cell-dependent
                      exponents, anchored at a limiting measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .errors import DimensionUnsupported, UnsupportedCellOrder
from .measure import (
    MEAN_AND_COV,
    MEAN_ONLY,
    MixingMeasure,
    atom_distance,
    voronoi_cells,
)
from .transport import CELL_DEPENDENT, CostMatrix, solve_ot


@dataclass(frozen=True)
class RBarTable:
    """Cell-cardinality -> exponent lookup; only published values seeded.

    Entries beyond {2: 4, 3: 6} must be supplied explicitly by the user;
    the package never computes new ones.
    """

    entries: Dict[int, int] = field(default_factory=lambda: {2: 4, 3: 6})

    def __post_init__(self):
        for k_prime, r in self.entries.items():
            if k_prime < 2:
                raise ValueError("exponents are defined for cell cardinality >= 2")
            if r < 4 or r % 2 != 0:
                raise ValueError("exponents must be even integers >= 4")

    def with_entry(self, k_prime: int, r: int) -> "RBarTable":
        return RBarTable({**self.entries, k_prime: r})


def rbar(k_prime: int, table: RBarTable | None = None) -> int:
    """Exponent for a cell with k_prime >= 2 atoms."""
    if k_prime < 2:
        raise ValueError("k_prime must be >= 2")
    table = table if table is not None else RBarTable()
    if k_prime not in table.entries:
        raise UnsupportedCellOrder(k_prime)
    return table.entries[k_prime]


def loss_d(g: MixingMeasure, g0: MixingMeasure) -> float:
    """Voronoi-cell loss for strongly identifiable mixtures.

    Crowded cells contribute weighted squared mean distances, singleton
    cells weighted linear distances, and every cell its aggregated-weight
    discrepancy.  Empty cells contribute only the weight term.
    """
    partition = voronoi_cells(g, g0, MEAN_ONLY)
    total = 0.0
    for j, cell in enumerate(partition.cells):
        power = 2.0 if len(cell) > 1 else 1.0
        mass = 0.0
        for i in cell:
            dist = atom_distance(g, i, g0, j, MEAN_ONLY)
            total += g.weights[i] * dist**power
            mass += g.weights[i]
        total += abs(mass - g0.weights[j])
    return total


def loss_dbar(
    g: MixingMeasure, g0: MixingMeasure, table: RBarTable | None = None
) -> float:
    """Location-scale Gaussian loss with cell-size dependent exponents.

    Singleton cells contribute linear mean-plus-covariance terms; a cell
    with l >= 2 atoms contributes mean distances to the power rbar(l) and
    covariance distances to the power rbar(l)/2.
    """
    table = table if table is not None else RBarTable()
    partition = voronoi_cells(g, g0, MEAN_AND_COV)
    total = 0.0
    for j, cell in enumerate(partition.cells):
        card = len(cell)
        if card > 1:
            r = rbar(card, table)
        mass = 0.0
        for i in cell:
            mu_dist = float(np.linalg.norm(g.atoms[i].mean - g0.atoms[j].mean))
            cov_dist = float(
                np.linalg.norm(g.covariance_of(i) - g0.covariance_of(j), ord="fro")
            )
            if card == 1:
                total += g.weights[i] * (mu_dist + cov_dist)
            else:
                total += g.weights[i] * (mu_dist**r + cov_dist ** (r // 2))
            mass += g.weights[i]
        total += abs(mass - g0.weights[j])
    return total


def loss_wtilde(
    g: MixingMeasure, g2: MixingMeasure, g_star: MixingMeasure
) -> float:
    """Generalized transport cost with exponents set by shared-cell sizes.

    Atom pairs falling in the same Voronoi cell of g_star (cell l) cost
    |theta_i - theta_j'| to the power |A_l(g)| + |A_l(g2)| - 1; pairs in
    different cells cost exactly 1.  Defined for scalar parameters only.
    """
    if g.dimension != 1 or g2.dimension != 1 or g_star.dimension != 1:
        raise DimensionUnsupported("this loss is defined for d = 1 only")
    cells_g = voronoi_cells(g, g_star, MEAN_ONLY).cells
    cells_g2 = voronoi_cells(g2, g_star, MEAN_ONLY).cells

    cost = np.ones((g.order, g2.order))
    for l in range(g_star.order):
        exponent = len(cells_g[l]) + len(cells_g2[l]) - 1
        for i in cells_g[l]:
            for j in cells_g2[l]:
                dist = abs(float(g.atoms[i].mean[0] - g2.atoms[j].mean[0]))
                cost[i, j] = dist**exponent
    value, _ = solve_ot(g.weights, g2.weights, CostMatrix(cost, CELL_DEPENDENT))
    return value


@dataclass(frozen=True)
class PolynomialSystemSolutionCandidate:
    """Candidate (a_j, b_j, c_j) triples for the order-r polynomial system."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    r: int

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if not (a.shape == b.shape == c.shape) or a.ndim != 1:
            raise ValueError("a, b, c must be equal-length vectors")
        if a.size < 2:
            raise ValueError("system is defined for k_prime >= 2")
        if self.r < 1:
            raise ValueError("target order r must be >= 1")
        for name, arr in (("a", a), ("b", b), ("c", c)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def is_nontrivial(self) -> bool:
        """All c_j nonzero and at least one a_j nonzero."""
        return bool(np.all(self.c != 0.0) and np.any(self.a != 0.0))

    def residuals(self) -> np.ndarray:
        """One equation residual per alpha = 1..r."""
        out = np.empty(self.r)
        for alpha in range(1, self.r + 1):
            acc = 0.0
            for n2 in range(alpha // 2 + 1):
                n1 = alpha - 2 * n2
                coef = 1.0 / (math.factorial(n1) * math.factorial(n2))
                acc += coef * np.sum(self.c**2 * self.a**n1 * self.b**n2)
            out[alpha - 1] = acc
        return out


def verify_polynomial_system_solution(
    cand: PolynomialSystemSolutionCandidate, tol: float = 1e-10
) -> bool:
    """True iff the candidate is nontrivial and satisfies every equation."""
    if not cand.is_nontrivial():
        return False
    return bool(np.max(np.abs(cand.residuals())) <= tol)
