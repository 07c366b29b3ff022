"""Uniform Cartesian grids on a rectangle or on the unit disk embedded in [-1, 1]².

The 5-point Laplacian is assembled for interior nodes only.  On the disk a
neighbour that falls outside is replaced by a ghost value extrapolated
linearly through the boundary crossing at distance θh (Gibou et al. 2002):
only the diagonal changes, so the matrix stays symmetric and the scheme is
second order in the maximum norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RectBivariateSpline

THETA_MIN = 1e-3


@dataclass(frozen=True)
class Domain:
    """Either the unit disk or an axis-aligned rectangle (a1,b1)×(a2,b2)."""

    kind: str
    bounds: tuple = (-1.0, 1.0, -1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("disk", "rect"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        a1, b1, a2, b2 = self.bounds
        if not (b1 > a1 and b2 > a2):
            raise ValueError("rectangle needs positive side lengths")

    @classmethod
    def parse(cls, text: str) -> "Domain":
        parts = text.split()
        if not parts:
            raise ValueError("empty domain description")
        if parts[0] == "disk" and len(parts) == 1:
            return cls("disk")
        if parts[0] == "rect" and len(parts) == 5:
            return cls("rect", tuple(float(p) for p in parts[1:]))
        raise ValueError(f"bad domain description {text!r}; "
                         "expected 'disk' or 'rect a1 b1 a2 b2'")

    def __str__(self):
        if self.kind == "disk":
            return "disk"
        return "rect " + " ".join(f"{b:g}" for b in self.bounds)

    @property
    def diameter(self) -> float:
        if self.kind == "disk":
            return 2.0
        a1, b1, a2, b2 = self.bounds
        return math.hypot(b1 - a1, b2 - a2)

    def boundary_distance(self, p) -> np.ndarray:
        """Distance to ∂Ω, negative outside."""
        p = np.asarray(p, dtype=float)
        if self.kind == "disk":
            return 1.0 - np.hypot(p[..., 0], p[..., 1])
        a1, b1, a2, b2 = self.bounds
        return np.minimum.reduce([p[..., 0] - a1, b1 - p[..., 0],
                                  p[..., 1] - a2, b2 - p[..., 1]])

    def contains(self, p, margin: float = 0.0) -> bool:
        return bool(np.all(self.boundary_distance(p) > margin))


def _arc_primitive(x):
    """∫ √(1 - x²) dx."""
    return 0.5 * (x * math.sqrt(max(1.0 - x * x, 0.0)) + math.asin(x))


def cell_disk_area(x0: float, x1: float, y0: float, y1: float) -> float:
    """Area of [x0, x1]×[y0, y1] ∩ unit disk, exactly."""
    a, b = max(x0, -1.0), min(x1, 1.0)
    if a >= b:
        return 0.0
    cuts = {a, b}
    for y in (y0, y1):
        if abs(y) < 1.0:
            c = math.sqrt(1.0 - y * y)
            cuts.update(t for t in (-c, c) if a < t < b)
    knots = sorted(cuts)
    area = 0.0
    for p, q in zip(knots, knots[1:]):
        c = math.sqrt(max(1.0 - (0.5 * (p + q)) ** 2, 0.0))
        top, bot = min(y1, c), max(y0, -c)
        if top <= bot:
            continue
        arc = _arc_primitive(q) - _arc_primitive(p)
        area += (arc if top == c else y1 * (q - p)) - (-arc if bot == -c else y0 * (q - p))
    return area


@dataclass
class Grid2D:
    """n×n nodes on the bounding box of ``domain``; h = side/(n-1)."""

    domain: Domain
    n: int
    x: np.ndarray = field(init=False, repr=False)
    y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 5:
            raise ValueError("grid needs at least 5 nodes per side")
        a1, b1, a2, b2 = self.domain.bounds
        self.x = np.linspace(a1, b1, self.n)
        self.y = np.linspace(a2, b2, self.n)
        self.hx = (b1 - a1) / (self.n - 1)
        self.hy = (b2 - a2) / (self.n - 1)
        self.X, self.Y = np.meshgrid(self.x, self.y, indexing="ij")
        if self.domain.kind == "disk":
            self.mask = self.X**2 + self.Y**2 < 1.0 - 1e-12
        else:
            self.mask = np.zeros((self.n, self.n), bool)
            self.mask[1:-1, 1:-1] = True
        self.index = -np.ones((self.n, self.n), int)
        self.index[self.mask] = np.arange(int(self.mask.sum()))
        self._assemble()

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def _crossing(self, x, y, di, dj):
        """Fraction θ of the step (di, dj) from nodes (x, y) to ∂Ω."""
        if self.domain.kind != "disk":
            return np.ones_like(x)
        if di:
            t = (np.sqrt(np.maximum(1.0 - y * y, 0.0)) - di * x) / self.hx
        else:
            t = (np.sqrt(np.maximum(1.0 - x * x, 0.0)) - dj * y) / self.hy
        return np.clip(t, THETA_MIN, 1.0)

    def _assemble(self):
        ii, jj = np.nonzero(self.mask)
        k = self.index[ii, jj]
        x, y = self.x[ii], self.y[jj]
        diag = np.zeros(self.size)
        rows, cols, vals = [], [], []
        brow, bcoef, bpts = [], [], []
        for di, dj, hh in ((1, 0, self.hx), (-1, 0, self.hx), (0, 1, self.hy), (0, -1, self.hy)):
            inside = self.mask[ii + di, jj + dj]
            rows.append(k[inside])
            cols.append(self.index[ii[inside] + di, jj[inside] + dj])
            vals.append(np.full(int(inside.sum()), -1.0 / hh**2))
            diag[k[inside]] += 1.0 / hh**2
            out = ~inside
            th = self._crossing(x[out], y[out], di, dj)
            diag[k[out]] += 1.0 / (th * hh**2)
            brow.append(k[out])
            bcoef.append(1.0 / (th * hh**2))
            bpts.append(np.column_stack([x[out] + di * th * self.hx, y[out] + dj * th * self.hy]))
        rows.append(k)
        cols.append(k)
        vals.append(diag[k])
        N = self.size
        self.A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(N, N))
        self._brow = np.concatenate(brow)
        self._bcoef = np.concatenate(bcoef)
        self._bpts = np.concatenate(bpts)

    def boundary_rhs(self, g) -> np.ndarray:
        """Right-hand side contributed by Dirichlet data ``g(points)``."""
        b = np.zeros(self.size)
        np.add.at(b, self._brow, self._bcoef * np.asarray(g(self._bpts), float))
        return b

    @property
    def boundary_points(self) -> np.ndarray:
        return self._bpts

    def points(self) -> np.ndarray:
        """Interior node coordinates, shape (size, 2)."""
        return np.column_stack([self.X[self.mask], self.Y[self.mask]])

    def V_nodes(self, V) -> np.ndarray:
        return np.asarray(V(self.points()), dtype=float)

    def to_full(self, u: np.ndarray, fill=0.0) -> np.ndarray:
        """Interior vector → n×n array; ``fill`` is a scalar or a callable of points."""
        full = np.empty((self.n, self.n))
        if callable(fill):
            pts = np.stack([self.X, self.Y], axis=-1)
            full[:] = fill(pts)
        else:
            full[:] = fill
        full[self.mask] = u
        return full

    def nearest(self, p) -> int:
        """Interior index of the node nearest to ``p``."""
        i = int(round((p[0] - self.x[0]) / self.hx))
        j = int(round((p[1] - self.y[0]) / self.hy))
        if not (0 <= i < self.n and 0 <= j < self.n) or not self.mask[i, j]:
            raise ValueError(f"point {tuple(p)} is not near an interior node")
        return int(self.index[i, j])

    # quadrature -------------------------------------------------------
    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights of interior nodes.

        On the disk every cell meeting the circle gets its exact covered
        area; the share lying in cells of exterior nodes goes to the nearest
        interior neighbour, which keeps the rule second order.
        """
        if not hasattr(self, "_weights"):
            w = np.full(self.size, self.hx * self.hy)
            if self.domain.kind == "disk":
                R = np.hypot(self.X, self.Y)
                band = np.abs(R - 1.0) < 0.75 * self.h
                for i, j in zip(*np.nonzero(band)):
                    x, y = self.x[i], self.y[j]
                    a = cell_disk_area(x - 0.5 * self.hx, x + 0.5 * self.hx,
                                       y - 0.5 * self.hy, y + 0.5 * self.hy)
                    if self.mask[i, j]:
                        w[self.index[i, j]] += a - self.hx * self.hy
                    elif a > 0:
                        w[self._nearest_interior(i, j)] += a
            self._weights = w
        return self._weights

    def _nearest_interior(self, i: int, j: int) -> int:
        best, k = np.inf, -1
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                a, b = i + di, j + dj
                if 0 <= a < self.n and 0 <= b < self.n and self.mask[a, b]:
                    d = math.hypot(di * self.hx, dj * self.hy)
                    if d < best:
                        best, k = d, int(self.index[a, b])
        if k < 0:
            raise RuntimeError(f"cell ({i}, {j}) meets the disk but has no interior neighbour")
        return k

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.weights, f))

    def ball_integral(self, f: np.ndarray, center, R: float) -> float:
        """∫_{B_R(center)} f with cells cut by the circle weighted by exact coverage."""
        pts = self.points()
        dist = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
        frac = (dist < R).astype(float)
        hx, hy = 0.5 * self.hx, 0.5 * self.hy
        for k in np.nonzero(np.abs(dist - R) < 0.75 * self.h)[0]:
            x, y = pts[k, 0] - center[0], pts[k, 1] - center[1]
            frac[k] = R * R * cell_disk_area((x - hx) / R, (x + hx) / R,
                                             (y - hy) / R, (y + hy) / R) / (4 * hx * hy)
        return float(np.dot(self.weights * frac, f))

    def boundary_distance(self, p) -> np.ndarray:
        return self.domain.boundary_distance(p)

    # sampling ---------------------------------------------------------
    def spline(self, u: np.ndarray, fill=0.0) -> RectBivariateSpline:
        return RectBivariateSpline(self.x, self.y, self.to_full(u, fill), kx=3, ky=3)

    def sample(self, u: np.ndarray, pts, fill=0.0) -> np.ndarray:
        pts = np.asarray(pts, float)
        sp_ = self.spline(u, fill)
        return sp_.ev(pts[..., 0], pts[..., 1])

    def gradient(self, u: np.ndarray, pts, fill=0.0) -> np.ndarray:
        pts = np.asarray(pts, float)
        sp_ = self.spline(u, fill)
        gx = sp_.ev(pts[..., 0], pts[..., 1], dx=1)
        gy = sp_.ev(pts[..., 0], pts[..., 1], dy=1)
        return np.stack([gx, gy], axis=-1)
