"""Radial Liouville-Gel'fand solver on the unit disk.

For radial V the problem reduces to

    -(r v')'/r = λ V(r) e^v  on (0, 1),   v'(0) = 0,  v(1) = 0,

discretized by a vertex-centred finite-volume scheme (three-point stencil,
conservative fluxes through cell midpoints, closed at the axis by the
half cell [0, r_{1/2}]).  The grid is r = sinh(Aξ)/sinh(A) on uniform ξ:
uniform inside the bubble and geometrically graded outside it.

The branch is followed in the peak height s = v(0) rather than in λ,
since λ folds back (at λ = 2 for V ≡ 1) before tending to zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.sparse.linalg import eigsh

from .branch import BranchPoint, EigenSet, sup_normalize
from .vexpr import VExpr, check_positive

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    pass


@dataclass
class RadialGrid:
    """Nodes 0 = r_0 < ... < r_N = 1 with finite-volume metrics."""

    r: np.ndarray
    A: float = 0.0      # sinh grading strength

    def __post_init__(self):
        r = self.r
        h = np.diff(r)
        self.faces = 0.5 * (r[:-1] + r[1:])               # r_{i+1/2}, i=0..N-1
        self.flux = self.faces / h                        # k_i
        lo = np.concatenate([[0.0], self.faces])
        hi = np.concatenate([self.faces, [1.0]])
        self.area = 0.5 * (hi**2 - lo**2)                 # per radian
        self._lo, self._hi = lo, hi

    @classmethod
    def for_width(cls, width: float, N: int = 4000) -> "RadialGrid":
        """Grid with sinh(A) = 1/width: spacing near the axis ≈ A·width/N."""
        A = max(math.asinh(1.0 / width), 1.0)
        xi = np.linspace(0.0, 1.0, N + 1)
        r = np.sinh(A * xi) / math.sinh(A)
        r[-1] = 1.0
        return cls(r, A)

    @property
    def N(self) -> int:
        return len(self.r) - 1

    @property
    def ratio(self) -> float:
        h = np.diff(self.r)
        return float(np.max(h[1:] / h[:-1]))

    def points(self) -> np.ndarray:
        return np.column_stack([self.r, np.zeros_like(self.r)])

    def V_nodes(self, V: VExpr) -> np.ndarray:
        return np.asarray(V(self.points()), dtype=float)

    def integrate(self, f: np.ndarray) -> float:
        """∫_disk f for a radial nodal field f."""
        return float(2 * np.pi * np.dot(self.area, f))

    def ball_integral(self, f: np.ndarray, center, R: float) -> float:
        """∫_{B_R(0)} f; whole cells up to the last face below R, then the
        partial cell by the trapezoid rule on f·r."""
        if np.hypot(*center) > 1e-12:
            raise ValueError("radial grid only integrates over balls centred at 0")
        if R >= 1.0:
            return self.integrate(f)
        i = int(np.searchsorted(self.faces, R)) - 1       # faces[i] <= R
        total = np.dot(self.area[: i + 1], f[: i + 1]) if i >= 0 else 0.0
        a = self.faces[i] if i >= 0 else 0.0
        fa = np.interp(a, self.r, f)
        fR = np.interp(R, self.r, f)
        total += 0.5 * (R - a) * (fa * a + fR * R)
        return float(2 * np.pi * total)

    def interp(self, f: np.ndarray, rr) -> np.ndarray:
        return np.interp(rr, self.r, f)

    def derivative(self, f: np.ndarray, rr) -> np.ndarray:
        """f'(rr) from the face differences, linearly interpolated."""
        df = np.diff(f) / np.diff(self.r)
        return np.interp(rr, self.faces, df)

    @property
    def h(self) -> float:
        """Spacing at the axis, the finest cell of the grid."""
        return float(self.r[1])

    def sample(self, f: np.ndarray, pts) -> np.ndarray:
        """Radial field f at planar points (..., 2)."""
        pts = np.asarray(pts, float)
        return self.interp(f, np.hypot(pts[..., 0], pts[..., 1]))

    def gradient(self, f: np.ndarray, pts) -> np.ndarray:
        pts = np.asarray(pts, float)
        r = np.hypot(pts[..., 0], pts[..., 1])
        d = self.derivative(f, r)
        safe = np.where(r > 0, r, 1.0)
        return (d / safe)[..., None] * pts

    def boundary_distance(self, p) -> np.ndarray:
        p = np.asarray(p, float)
        return 1.0 - np.hypot(p[..., 0], p[..., 1])


def exact_branch(beta: float, grid: RadialGrid | None = None):
    """Closed-form V ≡ 1 solution v = 2 log((1+β²)/(1+β²r²)).

    Returns ``(lam, v0, vfun)``; with ``grid`` a :class:`BranchPoint` is
    returned instead, sampled at the grid nodes.
    """
    from .vexpr import parse

    b2 = beta * beta
    lam = 8 * b2 / (1 + b2) ** 2

    def vfun(r):
        return 2 * np.log((1 + b2) / (1 + b2 * np.asarray(r) ** 2))

    v0 = 2 * math.log1p(b2)
    if grid is None:
        return lam, v0, vfun
    return BranchPoint(lam=lam, s=v0, v=vfun(grid.r), grid=grid, V=parse("1"),
                       peaks=np.zeros((1, 2)), heights=np.array([v0]))


def _residual(grid: RadialGrid, v, lam, Vn):
    N = grid.N
    k = grid.flux
    F = np.zeros(N)
    dv = np.diff(v)                       # v_{i+1} - v_i
    F += -k * dv
    F[1:] += k[:-1] * dv[:-1]
    F -= lam * grid.area[:N] * Vn[:N] * np.exp(v[:N])
    return F


def _newton_step(grid: RadialGrid, v, lam, Vn, F):
    """Solve J d = -F for d = [dλ, dv_1..dv_{N-1}] by bordering.

    Rows 1..N-1 form a tridiagonal block T in (v_1..v_{N-1}) plus the λ
    column; row 0 couples v_1 and λ only.
    """
    N = grid.N
    k = grid.flux
    src = grid.area[:N] * Vn[:N] * np.exp(v[:N])
    diag = k.copy()
    diag[1:] += k[:-1]
    diag -= lam * src
    ab = np.zeros((3, N - 1))
    ab[0, 1:] = -k[1 : N - 1]
    ab[1] = diag[1:]
    ab[2, :-1] = -k[1 : N - 1]
    rhs = np.column_stack([-F[1:], -src[1:]])
    pq = solve_banded((1, 1), ab, rhs)
    p, q = pq[:, 0], pq[:, 1]
    dlam = (-F[0] + k[0] * p[0]) / (-src[0] + k[0] * q[0])
    return np.concatenate([[dlam], p - dlam * q])


def _norm(F, grid, v, lam, Vn):
    # componentwise backward error: |F_i| over the magnitudes entering row i
    N = grid.N
    av = np.abs(v)
    t = grid.flux * (av[:-1] + av[1:])
    scale = t + lam * grid.area[:N] * Vn[:N] * np.exp(v[:N])
    scale[1:] += t[:-1]
    return float(np.max(np.abs(F) / scale))


def _newton(grid, v, lam, s, Vn, tol=1e-11, max_iter=30, max_reject=20):
    v = v.copy()
    v[0], v[-1] = s, 0.0
    it = 0
    F = _residual(grid, v, lam, Vn)
    res = _norm(F, grid, v, lam, Vn)
    step = np.inf
    # the step test matters: the backward-error scale alone stops early on fine grids
    while res > tol or step > 1e-9:
        if it >= max_iter:
            raise NewtonError(f"no convergence after {max_iter} iterations (res {res:.2e})")
        d = _newton_step(grid, v, lam, Vn, F)
        f0 = np.linalg.norm(F)
        t = 1.0
        for _ in range(max_reject):
            lam_t = lam + t * d[0]
            v_t = v.copy()
            v_t[1:-1] += t * d[1:]
            if lam_t > 0:
                with np.errstate(over="ignore"):
                    F_t = _residual(grid, v_t, lam_t, Vn)
                if np.all(np.isfinite(F_t)):
                    res_t = _norm(F_t, grid, v_t, lam_t, Vn)
                    if res_t <= tol or np.linalg.norm(F_t) <= (1 - 1e-4 * t) * f0:
                        break
            t *= 0.5
        else:
            raise NewtonError(f"Newton step rejected {max_reject} times (res {res:.2e})")
        step = max(abs(t * d[0]) / lam, np.max(np.abs(t * d[1:])) / max(1.0, abs(s)))
        v, lam, F, res = v_t, lam_t, F_t, res_t
        it += 1
    return v, lam, it, res


def scaling_width(lam: float, V0: float, s: float) -> float:
    """Bubble radius √8 δ with λ V(0) e^s δ² = 1."""
    return math.sqrt(8.0 / (lam * V0 * math.exp(s)))


DEFAULT_N = 24000
GRADING = 3.0   # sinh(A) = GRADING / bubble radius; balances core and tail errors


def _transfer(grid: RadialGrid, v, new: RadialGrid):
    return CubicSpline(grid.r, v, bc_type=((1, 0.0), "not-a-knot"))(new.r)


def radial_newton_constrained(s: float, V: VExpr, init: BranchPoint | None = None,
                              N: int = DEFAULT_N, tol: float = 1e-11,
                              lam_guess: float | None = None,
                              v_guess=None) -> BranchPoint:
    """Solve for (v, λ) with v(0) = s, re-grid to the new bubble scale, re-solve.

    ``lam_guess``/``v_guess`` (a callable of r) override the predictor taken
    from ``init``; ``init`` alone shifts its profile by (s - s_init)(1 - r²).
    """
    V0 = float(V((0.0, 0.0)))
    if init is None and lam_guess is None:
        lam0 = 4 * s / (V0 * math.exp(s))
    else:
        lam0 = lam_guess if lam_guess is not None else init.lam
    grid = RadialGrid.for_width(scaling_width(lam0, V0, s) / GRADING, N)
    if v_guess is not None:
        v0 = v_guess(grid.r)
    elif init is not None:
        v0 = _transfer(init.grid, init.v, grid) + (s - init.s) * (1 - grid.r**2)
    else:
        v0 = s * (1 - grid.r**2)
    check_positive(V, grid.points())
    v, lam, its, res = _newton(grid, v0, lam0, s, grid.V_nodes(V), tol=tol)
    new = RadialGrid.for_width(scaling_width(lam, V0, s) / GRADING, N)
    v, lam, its2, res = _newton(new, _transfer(grid, v, new), lam, s,
                                new.V_nodes(V), tol=tol)
    return BranchPoint(lam=lam, s=s, v=v, grid=new, V=V, peaks=np.zeros((1, 2)),
                       heights=np.array([v[0]]), residual=res, newton_iters=its + its2)


def continue_branch(V: VExpr, s_values, N: int = DEFAULT_N, tol: float = 1e-11):
    """Amplitude continuation along ``s_values`` (strictly increasing).

    Each step is seeded by secant extrapolation of (log λ, v) from the two
    previous branch points.
    """
    s_values = np.asarray(s_values, dtype=float)
    if np.any(np.diff(s_values) <= 0):
        raise ValueError("amplitude schedule must be strictly increasing")
    out: list[BranchPoint] = []
    for s in s_values:
        s = float(s)
        if len(out) < 2:
            bp = radial_newton_constrained(s, V, out[-1] if out else None, N=N, tol=tol)
        else:
            a, b = out[-2], out[-1]
            th = (s - b.s) / (b.s - a.s)
            lam_g = math.exp(math.log(b.lam) + th * (math.log(b.lam) - math.log(a.lam)))
            va = CubicSpline(a.grid.r, a.v, bc_type=((1, 0.0), "not-a-knot"))
            vb = CubicSpline(b.grid.r, b.v, bc_type=((1, 0.0), "not-a-knot"))
            bp = radial_newton_constrained(
                s, V, b, N=N, tol=tol, lam_guess=lam_g,
                v_guess=lambda r: vb(r) + th * (vb(r) - va(r)))
        log.debug("s=%.2f lambda=%.6e iters=%d", s, bp.lam, bp.newton_iters)
        out.append(bp)
    return out


def extrapolated_ball_mass(bp: BranchPoint, R: float, factor: int = 2) -> float:
    """σ over B_R(0) with the O(h²) discretization error removed.

    Re-solves at ``factor``·N on the same sinh mapping and combines the two
    masses by Richardson extrapolation.  Far down the branch the deficit
    8π - σ ≈ πλ/R² falls below the plain O(h²) error, so the tail of the
    σ-rate fit needs this.
    """
    fine = radial_newton_constrained(bp.s, bp.V, bp, N=factor * bp.grid.N)
    q = factor**2
    return (q * fine.ball_mass(0, R) - bp.ball_mass(0, R)) / (q - 1)


def _mode_matrices(bp: BranchPoint, ell: int):
    g = bp.grid
    N = g.N
    k = g.flux
    rho = bp.density
    if ell == 0:
        idx = np.arange(0, N)
    else:
        idx = np.arange(1, N)
    diag = np.zeros(N)
    diag += k
    diag[1:] += k[:-1]
    if ell:
        diag[1:] += ell**2 * np.log(g._hi[1:N] / g._lo[1:N])
    off = -k[idx[:-1]]
    K = sp.diags([diag[idx], off, off], [0, 1, -1], format="csc")
    M = sp.diags(g.area[idx] * rho[idx], 0, format="csc")
    return K, M, idx


def mode_eigs(bp: BranchPoint, ell: int, count: int = 3, seed: int = 0):
    """The ``count`` smallest eigenpairs of Fourier mode ``ell``.

    Returns ``(mu, W)`` with ``W[i]`` the radial profile on ``bp.grid.r``,
    scaled to sup-norm 1 with positive maximum.
    """
    if ell < 0:
        raise ValueError("Fourier index must be nonnegative")
    K, M, idx = _mode_matrices(bp, ell)
    v0 = np.random.default_rng(seed).random(len(idx))     # fixed start vector
    mu, vecs = eigsh(K, k=count, M=M, sigma=0.0, which="LM", v0=v0)
    order = np.argsort(mu)
    mu = mu[order]
    W = np.zeros((count, bp.grid.N + 1))
    for i, j in enumerate(order):
        W[i, idx] = vecs[:, j]
        W[i] = sup_normalize(W[i])
    return mu, W


def dirichlet_form(bp: BranchPoint, ell: int, a: np.ndarray, b: np.ndarray) -> float:
    """Discrete ∫∇a·∇b over the disk for profiles a(r)cos(ℓθ), b(r)cos(ℓθ)
    (angular factor normalized out)."""
    K, _, idx = _mode_matrices(bp, ell)
    return float(a[idx] @ (K @ b[idx]))


def h10_orthogonality(bp: BranchPoint, entries) -> float:
    """Largest relative Dirichlet cross product between eigenfields.

    Fields of different Fourier index are orthogonal through the angular
    factor, so only pairs sharing ℓ are formed.
    """
    worst = 0.0
    for i, a in enumerate(entries):
        for b in entries[:i]:
            if a.ell != b.ell:
                continue
            ab = dirichlet_form(bp, a.ell, a.w, b.w)
            aa = dirichlet_form(bp, a.ell, a.w, a.w)
            bb = dirichlet_form(bp, a.ell, b.w, b.w)
            worst = max(worst, abs(ab) / math.sqrt(aa * bb))
    return worst


@dataclass
class SpectrumEntry:
    mu: float
    ell: int
    k: int                  # radial index within the mode, from 0
    multiplicity: int       # 1 for ell = 0, else 2 (cos, sin)
    w: np.ndarray = field(repr=False, default=None)


def assemble_spectrum(bp: BranchPoint, nmax: int = 4, lmax: int = 4, per_mode: int = 3,
                      seed: int = 0):
    """Merged ascending spectrum with Fourier labels.

    Returns ``(entries, es)`` where ``entries`` lists each distinct eigenvalue
    once with its multiplicity and ``es`` is an :class:`EigenSet` with
    multiplicities expanded (μ¹, μ², μ³ = μ², ...) truncated to ``nmax``.
    """
    entries = []
    for ell in range(lmax + 1):
        mu, W = mode_eigs(bp, ell, per_mode, seed)
        for k in range(per_mode):
            entries.append(SpectrumEntry(float(mu[k]), ell, k, 1 if ell == 0 else 2, W[k]))
    entries.sort(key=lambda e: e.mu)
    # profiles from distinct modes are orthogonal by the angular factor;
    # within a mode, distinct radial indices must not coincide
    for a, b in zip(entries, entries[1:]):
        if a.ell == b.ell and a.w is not None:
            corr = abs(a.w @ b.w) / (np.linalg.norm(a.w) * np.linalg.norm(b.w))
            if corr > 0.999:
                raise RuntimeError("duplicate eigenpair in merged spectrum")
    mus, ws, labels = [], [], []
    for e in entries:
        for _ in range(e.multiplicity):
            mus.append(e.mu)
            ws.append(e.w)
            labels.append((e.ell, e.k))
    n = min(nmax, len(mus))
    es = EigenSet(mu=np.array(mus[:n]), w=np.array(ws[:n]), labels=labels[:n])
    return entries, es
