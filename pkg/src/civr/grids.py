"""Regular grid specifications used for quadrature and sampling.

All grids are cell-centered: an axis with n points on [lo, hi] samples
lo + (k + 1/2)*(hi - lo)/n, so the midpoint-rule weight of every node is
exactly (hi - lo)/n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AxisSpec:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid axis needs at least 2 points")
        if not self.hi > self.lo:
            raise ValueError("grid axis needs hi > lo")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.n

    def nodes(self) -> np.ndarray:
        return self.lo + (np.arange(self.n) + 0.5) * self.step


@dataclass(frozen=True)
class PhaseGridSpec:
    """Rectangular grid of phase-space points (q-major ordering)."""

    q: AxisSpec
    p: AxisSpec

    @property
    def size(self) -> int:
        return self.q.n * self.p.n

    @property
    def cell_area(self) -> float:
        return self.q.step * self.p.step

    def mesh(self):
        """Flattened (q, p) node coordinates, q-major, each of length size."""
        qq, pp = np.meshgrid(self.q.nodes(), self.p.nodes(), indexing="ij")
        return qq.ravel(), pp.ravel()
