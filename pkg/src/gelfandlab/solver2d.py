"""Planar finite-difference solver for -Δv = λ V e^v on a rectangle or masked disk.

The unknowns are the interior nodal values of v together with λ.  The value
at one anchor node is pinned to the amplitude s and λ takes its slot in the
unknown vector, so every Newton step is one sparse LU solve of a square
system.  Other peak heights are whatever the equation makes them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu

from .branch import BranchPoint, EigenSet, sup_normalize
from .green import GreenOracle
from .grid2d import Domain, Grid2D
from .vexpr import VExpr, check_positive

log = logging.getLogger(__name__)

__all__ = ["Grid2D", "Domain", "newton2d_constrained", "singular_seed", "parabola_seed",
           "continue_branch_2d", "detect_peaks", "eig2d", "extract_c", "sturm_count",
           "NewtonError2D", "PeakError", "Branch2D"]


class NewtonError2D(RuntimeError):
    pass


class PeakError(ValueError):
    pass


def _residual(grid: Grid2D, v, lam, Vn):
    with np.errstate(over="ignore", invalid="ignore"):
        src = lam * Vn * np.exp(v)
    return grid.A @ v - src, src


def _backward_error(grid: Grid2D, v, F, src) -> float:
    """max_i |F_i| / (|A||v| + λVe^v)_i."""
    absA = abs(grid.A)
    scale = absA @ np.abs(v) + src
    return float(np.max(np.abs(F) / np.maximum(scale, np.finfo(float).tiny)))


def newton2d_constrained(s: float, V: VExpr, grid: Grid2D, v0: np.ndarray, lam0: float,
                         anchor: int, tol: float = 1e-9, max_iter: int = 40) -> BranchPoint:
    """Solve the anchored system {A v = λ V e^v, v[anchor] = s} by damped Newton.

    ``anchor`` is the interior index of the pinned node.  The returned
    residual is the componentwise backward error of the discrete equation.
    """
    Vn = grid.V_nodes(V)
    check_positive(V, grid.points())
    v = np.array(v0, dtype=float)
    v[anchor] = s
    lam = float(lam0)
    F, src = _residual(grid, v, lam, Vn)
    res = _backward_error(grid, v, F, src)
    N = grid.size
    A = grid.A.tocsc()
    e_k = sp.csc_matrix((np.ones(1), (np.array([anchor]), np.array([0]))), shape=(N, 1))
    step = np.inf
    it = 0
    while not (res <= tol and step <= 1e-9):
        if it >= max_iter:
            raise NewtonError2D(f"no convergence at s={s}: residual {res:.2e}")
        J = A - sp.diags(src, format="csc")
        # replace column ``anchor`` by dF/dλ = -V e^v
        col = sp.csc_matrix((-Vn * np.exp(v)).reshape(-1, 1))
        J = J - J[:, anchor] @ e_k.T + col @ e_k.T
        du = -splu(J.tocsc()).solve(F)
        dv = du.copy()
        dv[anchor] = 0.0
        dlam = du[anchor]
        t = 1.0
        norm0 = np.linalg.norm(F)
        while True:
            lam_t = lam + t * dlam
            if lam_t > 0:
                v_t = v + t * dv
                F_t, src_t = _residual(grid, v_t, lam_t, Vn)
                if np.all(np.isfinite(F_t)) and (np.linalg.norm(F_t) < norm0
                                                 or _backward_error(grid, v_t, F_t, src_t) <= tol):
                    break
            t *= 0.5
            if t < 1e-6:
                raise NewtonError2D(f"line search failed at s={s}")
        step = max(abs(t * dlam) / lam, float(np.max(np.abs(t * dv))) / max(1.0, abs(s)))
        v, lam, F, src = v_t, lam_t, F_t, src_t
        res = _backward_error(grid, v, F, src)
        it += 1
    peaks = np.array([grid.points()[anchor]])
    return BranchPoint(lam=lam, s=s, v=v, grid=grid, V=V, peaks=peaks,
                       heights=np.array([v[anchor]]), residual=res, newton_iters=it)


def parabola_seed(grid: Grid2D, s: float, V: VExpr, center=(0.0, 0.0)):
    """Small-amplitude guess: a paraboloid of height s vanishing near ∂Ω."""
    pts = grid.points()
    dist = grid.domain.boundary_distance(pts)
    d0 = float(grid.domain.boundary_distance(np.asarray(center, float)))
    v = s * np.clip(dist / d0, 0.0, 1.0) ** 2 if grid.domain.kind == "rect" else \
        s * np.clip(1 - np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1]) ** 2, 0, None)
    lam = 4 * s / (float(V(center)) * math.exp(s)) if s > 0 else 1.0
    return v, lam


def singular_seed(grid: Grid2D, oracle: GreenOracle, points, s: float, V: VExpr):
    """Σ_j 8πG(·, x_j) with each logarithmic pole replaced by a bubble of height s.

    Near x_j the guess is s - 2 log(1 + |x - x_j|²/ε_j²), the Liouville
    profile with λ V(x_j) e^s ε_j² = 8.
    """
    points = np.asarray(points, float).reshape(-1, 2)
    pts = grid.points()
    m = len(points)
    eps = np.empty(m)
    for j in range(m):
        tail = 8 * math.pi * oracle.R(points[j])
        tail += sum(8 * math.pi * oracle.G(points[j], points[i]) for i in range(m) if i != j)
        eps[j] = math.exp((tail - s) / 4.0)
    v = np.zeros(len(pts))
    for j in range(m):
        d2 = (pts[:, 0] - points[j, 0]) ** 2 + (pts[:, 1] - points[j, 1]) ** 2
        v += -2 * np.log(d2 + eps[j] ** 2) + 8 * math.pi * oracle.K_field(pts, points[j])
    v = np.maximum(v, 0.0)
    lam = 8.0 / (eps[0] ** 2 * float(V(points[0])) * math.exp(s))
    return v, lam


def detect_peaks(grid: Grid2D, v: np.ndarray, m: int, R_min: float = 0.0):
    """The m highest strict local maxima, pairwise ≥ 2·R_min apart.

    Locations and heights are refined by a parabola through the three
    nodes on each axis.
    """
    full = grid.to_full(v, 0.0)
    n = grid.n
    pad = np.pad(full, 1, constant_values=-np.inf)
    core = pad[1:-1, 1:-1]
    is_max = grid.mask.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_max &= core > pad[1 + di:n + 1 + di, 1 + dj:n + 1 + dj]
    ii, jj = np.nonzero(is_max)
    order = np.argsort(-full[ii, jj], kind="stable")
    chosen = []
    for k in order:
        p = np.array([grid.x[ii[k]], grid.y[jj[k]]])
        if all(np.hypot(*(p - q[0])) >= 2 * R_min for q in chosen):
            chosen.append((p, ii[k], jj[k]))
        if len(chosen) == m:
            break
    if len(chosen) < m:
        raise PeakError(f"fewer than {m} maxima found ({len(chosen)})")
    locs = np.empty((m, 2))
    heights = np.empty(m)
    for q, (p, i, j) in enumerate(chosen):
        f0 = full[i, j]
        loc = p.copy()
        hgt = f0
        for axis, hh in ((0, grid.hx), (1, grid.hy)):
            fm = full[i - 1, j] if axis == 0 else full[i, j - 1]
            fp = full[i + 1, j] if axis == 0 else full[i, j + 1]
            curv = fp - 2 * f0 + fm
            if curv < 0:
                loc[axis] += 0.5 * (fm - fp) / curv * hh
                hgt -= (fp - fm) ** 2 / (8 * curv)
        locs[q] = loc
        heights[q] = hgt
    return locs, heights


@dataclass
class Branch2D:
    points: list
    truncated: bool = False
    reason: str = ""


def continue_branch_2d(grid: Grid2D, V: VExpr, s_values, anchors, oracle: GreenOracle | None = None,
                       tol: float = 1e-9, depth_factor: float = 4.0, R_min: float | None = None) -> Branch2D:
    """Amplitude continuation on a fixed grid with the depth limit δ ≥ 4h.

    The first point is seeded from the singular limit when ``oracle`` is
    given and from a paraboloid otherwise; later points use a secant
    predictor in (log λ, v).  Peak heights and locations are re-detected at
    every point; a peak that leaves its anchor ball is logged, not fatal.
    """
    s_values = np.asarray(s_values, dtype=float)
    if np.any(np.diff(s_values) <= 0):
        raise ValueError("amplitude schedule must be strictly increasing")
    anchors = np.asarray(anchors, float).reshape(-1, 2)
    m = len(anchors)
    if R_min is None:
        R_min = 0.25 * min([np.hypot(*(a - b)) for i, a in enumerate(anchors)
                            for b in anchors[:i]] or [1.0])
    k_anchor = grid.nearest(anchors[0])
    out: list[BranchPoint] = []
    for s in s_values:
        s = float(s)
        if not out:
            if oracle is not None:
                v0, lam0 = singular_seed(grid, oracle, anchors, s, V)
            else:
                v0, lam0 = parabola_seed(grid, s, V, anchors[0])
        elif len(out) == 1:
            b = out[-1]
            v0, lam0 = b.v + (s - b.s) * b.v / max(b.s, 1e-12), b.lam * math.exp(-(s - b.s))
        else:
            a, b = out[-2], out[-1]
            th = (s - b.s) / (b.s - a.s)
            v0 = b.v + th * (b.v - a.v)
            lam0 = math.exp(math.log(b.lam) + th * (math.log(b.lam) - math.log(a.lam)))
        try:
            bp = newton2d_constrained(s, V, grid, v0, lam0, k_anchor, tol=tol)
        except NewtonError2D as exc:
            if not out:
                raise
            return Branch2D(out, True, f"Newton failure: {exc}")
        try:
            bp.peaks, bp.heights = detect_peaks(grid, bp.v, m, R_min)
        except PeakError as exc:
            if not out:
                raise
            return Branch2D(out, True, f"peak detection: {exc}")
        # match detected peaks to anchors
        order = [int(np.argmin(np.hypot(*(bp.peaks - a).T))) for a in anchors]
        if len(set(order)) == m:
            bp.peaks, bp.heights = bp.peaks[order], bp.heights[order]
        for a, p in zip(anchors, bp.peaks):
            if np.hypot(*(a - p)) > R_min:
                log.warning("peak migrated from %s to %s at s=%.2f", a, p, s)
        if np.min(bp.delta) < depth_factor * grid.h:
            return Branch2D(out, True,
                            f"depth limit: delta {np.min(bp.delta):.3e} < {depth_factor:g}h at s={s:g}")
        log.debug("s=%.2f lambda=%.6e iters=%d", s, bp.lam, bp.newton_iters)
        out.append(bp)
    return Branch2D(out)


def sturm_count(A, M, tau: float) -> int:
    """Number of eigenvalues of A w = μ M w below τ, from the LDLᵀ inertia of A - τM."""
    B = (A - tau * M).tocsc()
    lu = splu(B, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
              options={"SymmetricMode": True})
    if not (np.array_equal(lu.perm_r, lu.perm_c)):
        raise RuntimeError("factorization used off-diagonal pivots; inertia unavailable")
    return int(np.sum(lu.U.diagonal() < 0))


def eig2d(bp: BranchPoint, K: int, check: bool = True, seed: int = 0) -> EigenSet:
    """The K smallest eigenpairs of (discrete -Δ) w = μ λVe^v w.

    Shift-invert Lanczos at σ = 0; a Sturm count at the midpoint between μ^K
    and μ^{K+1} verifies that none was skipped.
    """
    g = bp.grid
    A = g.A.tocsc()
    M = sp.diags(bp.density, format="csc")
    v0 = np.random.default_rng(seed).random(A.shape[0])
    mu, vecs = eigsh(A, k=K + 1, M=M, sigma=0.0, which="LM", v0=v0)
    order = np.argsort(mu)
    mu, vecs = mu[order], vecs[:, order]
    if check:
        tau = 0.5 * (mu[K - 1] + mu[K])
        count = sturm_count(A, M, tau)
        if count != K:
            raise RuntimeError(f"Sturm count {count} below {tau:.6g}, expected {K}: eigenvalue missed")
    W = np.array([sup_normalize(vecs[:, i]) for i in range(K)])
    return EigenSet(mu=mu[:K], w=W, labels=list(range(1, K + 1)))


def h10_orthogonality(bp: BranchPoint, es: EigenSet) -> float:
    """Largest |a(wⁱ, wʲ)| / sqrt(a(wⁱ,wⁱ) a(wʲ,wʲ)) over i ≠ j for the discrete Dirichlet form."""
    A = bp.grid.A
    AW = np.array([A @ w for w in es.w])
    G = es.w @ AW.T
    d = np.sqrt(np.diag(G))
    R = np.abs(G) / np.outer(d, d)
    np.fill_diagonal(R, 0.0)
    return float(R.max()) if len(es) > 1 else 0.0


def extract_c(es: EigenSet, bp: BranchPoint, oracle: GreenOracle, centers=None,
              R: float = 0.25, boundary_cells: float = 2.0, max_cond: float = 1e8,
              tie: float = 1e-6):
    """Peak values ĉ and far-field coefficients c̃ for every eigenfunction.

    ĉⁿ_j is wⁿ sampled at the detected peak x_{j,k}; c̃ⁿ is the least-squares
    solution of wⁿ/μⁿ ≈ Σ_j c̃ⁿ_j 8πG(·, x_j) over grid nodes outside every
    B_R(x_j) and at least ``boundary_cells`` cells from ∂Ω.  ``centers``
    defaults to the detected peaks.
    """
    g = bp.grid
    centers = bp.peaks if centers is None else np.asarray(centers, float).reshape(-1, 2)
    m = len(centers)
    pts = g.points()
    keep = g.boundary_distance(pts) >= boundary_cells * _outer_spacing(g)
    for c in centers:
        keep &= np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) > R
    if keep.sum() < 4 * m:
        raise ValueError("far-field region is empty")
    X = np.column_stack([8 * math.pi * oracle.G_field(pts[keep], c) for c in centers])
    cond = np.linalg.cond(X)
    if cond > max_cond:
        raise ValueError(f"ill-conditioned far-field fit (cond {cond:.2e})")
    c_hat = np.array([[float(g.sample(w, bp.peaks[j])) for j in range(bp.m)] for w in es.w])
    # when max w = -min w (mirror-odd modes) the sup normalization leaves the
    # sign open; orient those so the first peak carries the positive value
    for n in range(len(es)):
        a = np.abs(c_hat[n])
        w = es.w[n]
        if a.max() > 0 and abs(w.max() + w.min()) <= tie * np.abs(w).max():
            lead = int(np.nonzero(a >= a.max() * (1 - tie))[0][0])
            if c_hat[n, lead] < 0:
                c_hat[n] *= -1
                es.w[n] *= -1
    Y = (es.w[:, keep] / es.mu[:, None]).T
    c_far = np.linalg.lstsq(X, Y, rcond=None)[0].T
    es.c_hat, es.c_far = c_hat, c_far
    return c_hat, c_far


def _outer_spacing(grid) -> float:
    if hasattr(grid, "hx"):
        return grid.h
    return float(grid.r[-1] - grid.r[-2])
