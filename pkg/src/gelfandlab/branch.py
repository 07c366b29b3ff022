"""Solution records shared by the radial and planar solvers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .vexpr import VExpr


@dataclass
class BranchPoint:
    """One solution of -Δv = λ V e^v, v = 0 on the boundary.

    ``grid`` is a :class:`~gelfandlab.solver1d.RadialGrid` or a
    :class:`~gelfandlab.solver2d.Grid2D`; both expose the quadrature and
    sampling methods the diagnostics use.
    """

    lam: float
    s: float
    v: np.ndarray
    grid: Any
    V: VExpr
    peaks: np.ndarray            # (m, 2) peak locations x_{j,k}
    heights: np.ndarray          # (m,) v(x_{j,k})
    residual: float = 0.0
    newton_iters: int = 0

    @property
    def m(self) -> int:
        return len(self.heights)

    @property
    def density(self) -> np.ndarray:
        """λ V e^v at the grid nodes."""
        return self.lam * self.grid.V_nodes(self.V) * np.exp(self.v)

    @property
    def delta(self) -> np.ndarray:
        """Scaling parameter per peak: λ V(x_j) e^{v(x_j)} δ_j² = 1."""
        Vp = np.atleast_1d(self.V(self.peaks))
        return 1.0 / np.sqrt(self.lam * Vp * np.exp(self.heights))

    def total_mass(self) -> float:
        return self.grid.integrate(self.density)

    def ball_mass(self, j: int, R: float) -> float:
        return self.grid.ball_integral(self.density, self.peaks[j], R)

    def summary(self, R: float | None = None) -> dict:
        out = {
            "lambda": self.lam,
            "s": self.s,
            "peaks": self.peaks.tolist(),
            "heights": self.heights.tolist(),
            "delta": self.delta.tolist(),
            "Sigma": self.total_mass(),
        }
        if R is not None:
            out["R"] = R
            out["sigma"] = [self.ball_mass(j, R) for j in range(self.m)]
        return out


@dataclass
class EigenSet:
    """Eigenpairs of -Δw = μ λ V e^v w, each w scaled so max w = ‖w‖∞ = 1."""

    mu: np.ndarray
    w: np.ndarray                              # (K, nodes)
    labels: list = field(default_factory=list)
    c_hat: np.ndarray | None = None            # (K, m) peak values
    c_far: np.ndarray | None = None            # (K, m) far-field fit

    def __len__(self):
        return len(self.mu)


def sup_normalize(w: np.ndarray, rel_tie: float = 1e-9) -> np.ndarray:
    """Scale ``w`` so its largest-magnitude entry equals +1 (first index wins ties)."""
    a = np.abs(w)
    k = int(np.nonzero(a >= a.max() * (1 - rel_tie))[0][0])
    return w / w[k]
