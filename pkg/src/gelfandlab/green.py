"""Dirichlet Green function G, regular part K and Robin function R.

    -Δ G(·, y) = δ_y in Ω,   G(·, y) = 0 on ∂Ω,
    K(x, y) = G(x, y) + (1/2π) log|x - y|,   R(x) = K(x, x).

On the unit disk all three have closed forms.  On other domains K(·, y) is
the harmonic function with boundary values (1/2π) log|· - y|, computed by
the 5-point scheme of :mod:`gelfandlab.grid2d` and cached per source point.
"""
from __future__ import annotations

import csv
import math

import numpy as np
from scipy.sparse.linalg import splu

from .grid2d import Domain, Grid2D

INV2PI = 1.0 / (2.0 * math.pi)
INV4PI = 1.0 / (4.0 * math.pi)


class GreenError(ValueError):
    pass


def _pt(p):
    return np.asarray(p, dtype=float)


def _check_disk(*pts):
    for p in pts:
        if np.any(np.hypot(p[..., 0], p[..., 1]) >= 1.0):
            raise GreenError("point on or outside the closed unit disk")


def disk_G(x, y):
    """G(x, y) = (1/4π) log((1 - 2x·y + |x|²|y|²) / |x - y|²) on the unit disk.

    This is (1/2π) log(|x - y*||y| / |x - y|) with y* = y/|y|², written so
    that it is symmetric in floating point and regular at y = 0.
    """
    x, y = _pt(x), _pt(y)
    _check_disk(x, y)
    xy = x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]
    xx = x[..., 0] ** 2 + x[..., 1] ** 2
    yy = y[..., 0] ** 2 + y[..., 1] ** 2
    d2 = (x[..., 0] - y[..., 0]) ** 2 + (x[..., 1] - y[..., 1]) ** 2
    if np.any(d2 == 0):
        raise GreenError("G is singular at x = y")
    return INV4PI * np.log((1.0 - 2.0 * xy + xx * yy) / d2)


def disk_K(x, y):
    x, y = _pt(x), _pt(y)
    _check_disk(x, y)
    xy = x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]
    xx = x[..., 0] ** 2 + x[..., 1] ** 2
    yy = y[..., 0] ** 2 + y[..., 1] ** 2
    return INV4PI * np.log(1.0 - 2.0 * xy + xx * yy)


def disk_R(x):
    """R(x) = (1/2π) log(1 - |x|²)."""
    x = _pt(x)
    _check_disk(x)
    return INV2PI * np.log1p(-(x[..., 0] ** 2 + x[..., 1] ** 2))


class RegularPartSolver:
    """Harmonic extension of (1/2π) log|· - y| for a fixed grid.

    The Laplacian is factorized once; each source point costs one
    back-substitution.
    """

    def __init__(self, domain: Domain, n: int):
        if n < 32:
            raise GreenError("regular-part grid needs n >= 32")
        self.grid = Grid2D(domain, n)
        self.lu = splu(self.grid.A.tocsc())

    def data(self, y):
        y = _pt(y)

        def g(p):
            # only used off the source; an interior node on it is overwritten
            with np.errstate(divide="ignore"):
                return INV2PI * np.log(np.hypot(p[..., 0] - y[0], p[..., 1] - y[1]))
        return g

    def solve(self, y) -> np.ndarray:
        y = _pt(y)
        dom = self.grid.domain
        if dom.boundary_distance(y) <= self.grid.h:
            raise GreenError("source point within one cell of the boundary")
        return self.lu.solve(self.grid.boundary_rhs(self.data(y)))

    def harmonic_residual(self, y, K: np.ndarray) -> float:
        """max |A K - b| scaled by h², i.e. the discrete Laplacian residual."""
        r = self.grid.A @ K - self.grid.boundary_rhs(self.data(y))
        return float(np.max(np.abs(r)) * self.grid.h**2)


def numeric_regular_part(dom: Domain, y, n: int) -> tuple[Grid2D, np.ndarray]:
    """K(·, y) on an n×n grid; returns (grid, interior values)."""
    solver = RegularPartSolver(dom, n)
    return solver.grid, solver.solve(y)


class GreenOracle:
    """Evaluator for G, K, R and their gradients on a fixed domain.

    ``mode='exact'`` (disk only) uses closed forms; ``mode='numeric'`` solves
    for K(·, y) on an ``n``×``n`` grid, caching one field (as a bicubic
    spline) per source point.
    """

    def __init__(self, domain: Domain | str, mode: str = "exact", n: int = 257):
        self.domain = Domain.parse(domain) if isinstance(domain, str) else domain
        if mode not in ("exact", "numeric"):
            raise GreenError(f"unknown mode {mode!r}")
        if mode == "exact" and self.domain.kind != "disk":
            raise GreenError("exact mode is only available on the unit disk")
        self.mode = mode
        self._cache: dict = {}
        if mode == "numeric":
            self.solver = RegularPartSolver(self.domain, n)
            self.grid = self.solver.grid
            self.step = 0.5 * self.grid.h
        else:
            self.step = 1e-6

    def _check(self, *pts):
        for p in pts:
            if not self.domain.contains(p):
                raise GreenError(f"point {np.asarray(p).tolist()} is not inside the domain")

    def _field(self, y):
        key = (round(float(y[0]), 12), round(float(y[1]), 12))
        sp_ = self._cache.get(key)
        if sp_ is None:
            K = self.solver.solve(y)
            sp_ = self.grid.spline(K, fill=self.solver.data(y))
            self._cache[key] = sp_
        return sp_

    def K(self, x, y) -> float:
        x, y = _pt(x), _pt(y)
        self._check(x, y)
        if self.mode == "exact":
            return float(disk_K(x, y))
        return float(self._field(y).ev(x[0], x[1]))

    def G(self, x, y) -> float:
        x, y = _pt(x), _pt(y)
        self._check(x, y)
        d = math.hypot(x[0] - y[0], x[1] - y[1])
        if self.mode == "exact":
            if d == 0:
                raise GreenError("G is singular at x = y")
            return float(disk_G(x, y))
        if d < self.grid.h:
            raise GreenError("points closer than one cell; use K near the diagonal")
        return self.K(x, y) - INV2PI * math.log(d)

    def R(self, x) -> float:
        x = _pt(x)
        self._check(x)
        if self.mode == "exact":
            return float(disk_R(x))
        return self.K(x, x)

    def grad_R(self, x, h: float | None = None) -> np.ndarray:
        h = self.step if h is None else h
        x = _pt(x)
        out = np.empty(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            if not (self.domain.contains(x + e) and self.domain.contains(x - e)):
                raise GreenError("difference stencil leaves the domain")
            out[i] = (self.R(x + e) - self.R(x - e)) / (2 * h)
        return out

    def grad_G(self, x, y, h: float | None = None) -> np.ndarray:
        """∇ₓG(x, y) by central differences."""
        h = self.step if h is None else h
        x = _pt(x)
        out = np.empty(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            if not (self.domain.contains(x + e) and self.domain.contains(x - e)):
                raise GreenError("difference stencil leaves the domain")
            out[i] = (self.G(x + e, y) - self.G(x - e, y)) / (2 * h)
        return out

    def K_field(self, pts, y) -> np.ndarray:
        """K(·, y) at many points."""
        pts = _pt(pts)
        y = _pt(y)
        if self.mode == "exact":
            return disk_K(pts, np.broadcast_to(y, pts.shape))
        return self._field(y).ev(pts[..., 0], pts[..., 1])

    def G_field(self, pts, y) -> np.ndarray:
        """G(·, y) at many points (no separation check; caller masks the pole)."""
        pts = _pt(pts)
        y = _pt(y)
        d = np.hypot(pts[..., 0] - y[0], pts[..., 1] - y[1])
        if self.mode == "exact":
            return disk_G(pts, np.broadcast_to(y, pts.shape))
        return self._field(y).ev(pts[..., 0], pts[..., 1]) - INV2PI * np.log(d)


def green_gradients(oracle: GreenOracle, x, y, h: float | None = None) -> dict:
    return {"grad_x_G": oracle.grad_G(x, y, h), "grad_R": oracle.grad_R(x, h)}


def export_field_csv(path, grid: Grid2D, values: np.ndarray) -> None:
    """Write interior nodal values as rows ``x,y,value``."""
    pts = grid.points()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for (px, py), val in zip(pts, values):
            w.writerow([repr(float(px)), repr(float(py)), repr(float(val))])
