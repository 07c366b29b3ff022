"""Residuals of the blow-up identities and expansions, one branch point at a time.

Every function takes a solved :class:`~gelfandlab.branch.BranchPoint`, its
:class:`~gelfandlab.branch.EigenSet` and (where the limit involves the
blow-up configuration) the :class:`~gelfandlab.hamiltonian.PeakSystem`, and
returns plain numbers.  Eigen indices ``n`` count from 1 like the
eigenvalues μ¹ ≤ μ² ≤ ...; peak indices ``j`` count from 0.

The bubble is U(x) = -2 log(1 + |x|²/8), the entire solution of
-ΔU = e^U with U(0) = 0 and total mass 8π.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad

from .branch import BranchPoint, EigenSet
from .hamiltonian import PeakSystem, predict_low, predict_mid
from .vexpr import grad_log

LOG2 = math.log(2.0)


def U(rho):
    """Bubble profile at rescaled radius ρ = |x̃|."""
    rho = np.asarray(rho, float)
    return -2.0 * np.log1p(rho * rho / 8.0)


@dataclass(frozen=True)
class BubbleConstants:
    I0: float       # ∫ e^U
    I1: float       # ∫ e^U U
    I2: float       # (1/2π) ∫ e^U log|y|⁻¹
    errors: tuple = ()


def bubble_integrals(tol: float = 1e-12) -> BubbleConstants:
    """Radial adaptive quadrature of the three bubble moments."""
    eU = lambda r: 1.0 / (1.0 + r * r / 8.0) ** 2
    parts = []
    for f in (lambda r: eU(r) * r,
              lambda r: eU(r) * float(U(r)) * r,
              lambda r: -eU(r) * math.log(r) * r if r > 0 else 0.0):
        total, err = 0.0, 0.0
        for a, b in ((0.0, 1.0), (1.0, 10.0), (10.0, np.inf)):
            val, e = quad(f, a, b, epsabs=tol, epsrel=tol, limit=200)
            total += val
            err += e
        parts.append((total, err))
    (i0, e0), (i1, e1), (i2, e2) = parts
    # the angular factor 2π cancels against the 1/2π in I2
    return BubbleConstants(I0=2 * math.pi * i0, I1=2 * math.pi * i1, I2=i2,
                           errors=(2 * math.pi * e0, 2 * math.pi * e1, e2))


# ---------------------------------------------------------------- masses
def _check_balls(bp: BranchPoint, R: float) -> None:
    for j, p in enumerate(bp.peaks):
        if float(bp.grid.boundary_distance(np.asarray(p))) <= R:
            raise ValueError(f"ball around peak {j} is not interior")
        for i in range(j):
            if math.dist(p, bp.peaks[i]) <= 2 * R:
                raise ValueError(f"overlapping balls around peaks {i} and {j}")


def masses(bp: BranchPoint, R: float) -> dict:
    """Σ = ∫_Ω λVe^v and σ_j = ∫_{B_R(x_j)} λVe^v."""
    _check_balls(bp, R)
    return {"Sigma": bp.total_mass(),
            "sigma": np.array([bp.ball_mass(j, R) for j in range(bp.m)])}


def _circle(center, R: float, n: int = 512):
    th = 2 * np.pi * np.arange(n) / n
    nu = np.column_stack([np.cos(th), np.sin(th)])
    return np.asarray(center, float) + R * nu, nu


def _sample(bp: BranchPoint, f: np.ndarray, pts) -> np.ndarray:
    return np.asarray(bp.grid.sample(f, pts), float)


def pohozaev_residual(bp: BranchPoint, j: int, R: float, n_theta: int = 512) -> dict:
    """Local Pohozaev identity on B_R(x_j).

    LHS = I₁ + I₂ with I₁ = -2∮(x - x_j)·ν λVe^v ds + 4σ_j and
    I₂ = 2∫(x - x_j)·∇V λe^v; RHS = R∮{2(∂_ν v)² - |∇v|²} ds.
    """
    _check_balls(bp, R)
    xj = bp.peaks[j]
    pts, nu = _circle(xj, R, n_theta)
    ds = 2 * np.pi * R / n_theta
    vb = _sample(bp, bp.v, pts)
    rho_b = bp.lam * np.asarray(bp.V(pts), float) * np.exp(vb)
    sigma = bp.ball_mass(j, R)
    I1 = -2 * R * np.sum(rho_b) * ds + 4 * sigma
    nodes = bp.grid.points()
    lever = np.sum((nodes - xj) * grad_log(bp.V, nodes), axis=-1)
    I2 = 2 * bp.grid.ball_integral(bp.density * lever, xj, R)
    gv = np.asarray(bp.grid.gradient(bp.v, pts), float)
    dn = np.sum(gv * nu, axis=-1)
    rhs = R * np.sum(2 * dn**2 - np.sum(gv**2, axis=-1)) * ds
    lhs = I1 + I2
    return {"I1": float(I1), "I2": float(I2), "lhs": float(lhs), "rhs": float(rhs),
            "sigma": sigma, "reduced": float(4 * sigma - sigma**2 / (2 * math.pi)),
            "residual": float(abs(lhs - rhs))}


# ---------------------------------------------------------------- peaks
def peak_height_residual(bp: BranchPoint, sys: PeakSystem, R: float) -> dict:
    """v(x_j) against its two asymptotic forms.

    ``refined``: v(x_j) - [-σ/(σ-4π)(log λ + log V(x*_j)) + 6 log 2 - 8π(R(x*_j) + Σ G)]
    ``simple``:  v(x_j) + 2 log λ + 2 log d_j + log V(x_j)
    """
    sig = masses(bp, R)["sigma"]
    L = math.log(bp.lam)
    tail = sys.robin + sys.Gpair.sum(axis=1)
    refined = bp.heights - (-sig / (sig - 4 * math.pi) * (L + sys.logV) + 6 * LOG2
                            - 8 * math.pi * tail)
    logV_peak = np.log(np.atleast_1d(bp.V(bp.peaks)))
    simple = bp.heights + 2 * L + 2 * np.log(sys.d) + logV_peak
    return {"refined": refined, "simple": simple, "sigma": sig}


def scaling_ratio(bp: BranchPoint) -> np.ndarray:
    """δ_j / λ^{1/2}, which tends to d_j."""
    return bp.delta / math.sqrt(bp.lam)


# ---------------------------------------------------------------- eigen
def peak_values(bp: BranchPoint, es: EigenSet) -> np.ndarray:
    """ĉⁿ_j = wⁿ(x_j) for every stored eigenfunction (cached on ``es``)."""
    if es.c_hat is None:
        es.c_hat = np.array([[float(_sample(bp, w, p)) for p in bp.peaks] for w in es.w])
    return es.c_hat


def predicted_c(sys: PeakSystem, n: int) -> np.ndarray:
    """h-matrix eigenvector cⁿ scaled to the sup-normalization of wⁿ."""
    c = sys.C[:, n - 1]
    return c / c[np.argmax(np.abs(c))]


def _c(bp, es, sys, n, c):
    if c is not None:
        return np.asarray(c, float)
    return peak_values(bp, es)[n - 1]


def _weighted(bp: BranchPoint, w: np.ndarray, j: int, R: float) -> float:
    return bp.grid.ball_integral(bp.density * w, bp.peaks[j], R)


def mass_balance_residual(bp: BranchPoint, es: EigenSet, sys: PeakSystem, n: int, j: int,
                     R: float, c=None) -> float:
    """{1/μ - v(x_j)} ∫_{B_R} λVe^v w - [(8π)² Σ_{i≠j}(c_i - c_j)G(x*_j, x*_i) - 16π c_j]."""
    c = _c(bp, es, sys, n, c)
    mu = es.mu[n - 1]
    lhs = (1.0 / mu - bp.heights[j]) * _weighted(bp, es.w[n - 1], j, R)
    G = sys.Gpair[j]
    rhs = (8 * math.pi) ** 2 * float(np.sum((c - c[j]) * G)) - 16 * math.pi * c[j]
    return float(lhs - rhs)


def weighted_mass(bp: BranchPoint, es: EigenSet, n: int, j: int, R: float) -> float:
    """∫_{B_R(x_j)} λVe^v wⁿ, which tends to 8π cⁿ_j."""
    return _weighted(bp, es.w[n - 1], j, R)


def mu_residuals(bp: BranchPoint, es: EigenSet, sys: PeakSystem, n: int) -> dict:
    if not 1 <= n <= sys.m:
        raise IndexError("low-band residuals need 1 <= n <= m")
    pred = predict_low(bp.lam, float(sys.Lambda[n - 1]))
    mu = float(es.mu[n - 1])
    return {"r_first": mu - pred["first"], "r_second": mu - pred["second"],
            "r_inverse": mu - pred["inverse"]}


def mid_residual(bp: BranchPoint, es: EigenSet, sys: PeakSystem, n: int) -> float:
    return float(es.mu[n - 1] - predict_mid(bp.lam, sys, n))


def bubble_profile_error(bp: BranchPoint, es: EigenSet, n: int, j: int, window: float = 4.0,
                        c=None, n_r: int = 81, n_theta: int = 32) -> float:
    """sup_{|x̃| ≤ window} |w(δx̃ + x_j) - w(x_j) - μ c U(x̃)| / μ."""
    delta = float(bp.delta[j])
    h = bp.grid.h
    if delta < h:
        raise ValueError(f"bubble window under-resolved (delta {delta:.2e} < h {h:.2e})")
    c = float(peak_values(bp, es)[n - 1, j] if c is None else c)
    mu = float(es.mu[n - 1])
    w = es.w[n - 1]
    rho = np.linspace(0.0, window, n_r)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    RR, TT = np.meshgrid(rho, th, indexing="ij")
    pts = bp.peaks[j] + delta * np.stack([RR * np.cos(TT), RR * np.sin(TT)], axis=-1)
    wt = _sample(bp, w, pts)
    w0 = float(_sample(bp, w, bp.peaks[j]))
    return float(np.max(np.abs(wt - w0 - mu * c * U(RR))) / mu)


def peak_value_residual(bp: BranchPoint, es: EigenSet, sys: PeakSystem, n: int, j: int,
                     R: float, c=None) -> dict:
    """w(x_j)/μ against its expansion.

    ``residual`` uses the measured weighted mass:
        (1/2π) log δ_j⁻¹ ∫_{B_R} λVe^v w - 6c_j log 2 + 8π(c_j R(x*_j) + Σ_{i≠j} c_i G(x*_j, x*_i));
    ``leading`` replaces the first term by {log λ + log V(x*_j) + v(x_j)}·2c_j.
    """
    c = _c(bp, es, sys, n, c)
    mu = float(es.mu[n - 1])
    w_peak = float(_sample(bp, es.w[n - 1], bp.peaks[j]))
    lhs = w_peak / mu
    tail = -6 * c[j] * LOG2 + 8 * math.pi * (c[j] * sys.robin[j] + float(np.dot(c, sys.Gpair[j])))
    full = math.log(1.0 / bp.delta[j]) / (2 * math.pi) * _weighted(bp, es.w[n - 1], j, R) + tail
    lead = (math.log(bp.lam) + sys.logV[j] + bp.heights[j]) * 2 * c[j] + tail
    return {"lhs": lhs, "residual": lhs - full, "relative": abs(lhs - full) / abs(lhs),
            "leading_residual": lhs - lead, "leading_relative": abs(lhs - lead) / abs(lhs)}


def centered_mass_residual(bp: BranchPoint, es: EigenSet, sys: PeakSystem, n: int, j: int,
                     R: float, c=None) -> float:
    """∫_{B_R} λVe^v (w - w(x_j))/μ + 16π c_j."""
    c = _c(bp, es, sys, n, c)
    mu = float(es.mu[n - 1])
    w = es.w[n - 1]
    w_peak = float(_sample(bp, w, bp.peaks[j]))
    val = bp.grid.ball_integral(bp.density * (w - w_peak), bp.peaks[j], R) / mu
    return float(val + 16 * math.pi * c[j])


def concentration_report(c_hat: np.ndarray, m: int, thresh: float = 0.1) -> dict:
    """Which peaks each low eigenfunction concentrates at, with the structural checks.

    ``c_hat`` has one row per eigenfunction (n = 1, 2, ...) and one column per peak.
    """
    rows = []
    failures = []
    for n in range(1, min(m, len(c_hat)) + 1):
        c = np.asarray(c_hat[n - 1])
        at = [int(j) for j in np.nonzero(np.abs(c) >= thresh)[0]]
        rows.append({"n": n, "peaks": at, "signs": [int(np.sign(c[j])) for j in at]})
        if n == 1 and len(at) != m:
            failures.append(f"n=1 concentrates at {len(at)} of {m} peaks")
        if m >= 2 and len(at) < 2:
            failures.append(f"n={n} concentrates at fewer than two peaks")
    return {"rows": rows, "failures": failures, "ok": not failures}


# ---------------------------------------------------------------- rows
@dataclass
class DiagnosticsRow:
    """Every residual at one branch point; flat and self-describing."""

    config_hash: str
    lam: float
    s: float
    R: float
    Sigma: float
    peaks: list = field(default_factory=list)     # per-peak dicts
    eigen: list = field(default_factory=list)     # per-eigen dicts
    extra: dict = field(default_factory=dict)     # study-specific scalars

    def to_dict(self) -> dict:
        return asdict(self)

    def flat(self) -> dict:
        """Single-level mapping with stable column names for CSV."""
        out = {"config_hash": self.config_hash, "lambda": self.lam, "s": self.s,
               "R": self.R, "Sigma": self.Sigma}
        for j, p in enumerate(self.peaks, 1):
            for k, v in p.items():
                out[f"peak{j}_{k}"] = v
        for e in self.eigen:
            n = e["n"]
            for k, v in e.items():
                if k != "n":
                    out[f"mu{n}_{k}"] = v
        out.update(self.extra)
        return out


def _finite(x) -> float:
    x = float(x)
    return x if math.isfinite(x) else float("nan")


def make_row(bp: BranchPoint, es: EigenSet, sys: PeakSystem, R: float,
             config_hash: str = "", window: float = 4.0) -> DiagnosticsRow:
    """All diagnostics at one branch point (low band n ≤ m, mid band m < n ≤ 3m, μ only above)."""
    m = sys.m
    ms = masses(bp, R)
    ph = peak_height_residual(bp, sys, R)
    peaks = []
    for j in range(bp.m):
        poh = pohozaev_residual(bp, j, R)
        peaks.append({"x": float(bp.peaks[j, 0]), "y": float(bp.peaks[j, 1]),
                      "height": float(bp.heights[j]), "delta": float(bp.delta[j]),
                      "delta_ratio": float(scaling_ratio(bp)[j]),
                      "sigma": float(ms["sigma"][j]), "pohozaev": poh["residual"],
                      "pohozaev_I2": poh["I2"], "height_refined": float(ph["refined"][j]),
                      "height_simple": float(ph["simple"][j])})
    eigen = []
    c_hat = peak_values(bp, es)
    for n in range(1, len(es) + 1):
        e = {"n": n, "mu": float(es.mu[n - 1])}
        if n > 3 * m:
            pass
        elif n <= m:
            if bp.lam < 1:
                e.update(mu_residuals(bp, es, sys, n))
            else:
                e.update(r_first=math.nan, r_second=math.nan, r_inverse=math.nan)
            cp = predicted_c(sys, n)
            for j in range(m):
                e[f"c_hat{j + 1}"] = float(c_hat[n - 1, j])
                e[f"balance_meas{j + 1}"] = mass_balance_residual(bp, es, sys, n, j, R)
                e[f"balance_pred{j + 1}"] = mass_balance_residual(bp, es, sys, n, j, R, c=cp)
                e[f"peak_value{j + 1}"] = peak_value_residual(bp, es, sys, n, j, R)["residual"]
                e[f"centered_mass{j + 1}"] = centered_mass_residual(bp, es, sys, n, j, R)
                try:
                    e[f"profile{j + 1}"] = bubble_profile_error(bp, es, n, j, window)
                except ValueError:
                    e[f"profile{j + 1}"] = float("nan")
            if es.c_far is not None:
                for j in range(m):
                    e[f"c_far{j + 1}"] = float(es.c_far[n - 1, j])
        else:
            e["r_mid"] = mid_residual(bp, es, sys, n)
        eigen.append({k: (_finite(v) if k != "n" else v) for k, v in e.items()})
    return DiagnosticsRow(config_hash=config_hash, lam=bp.lam, s=bp.s, R=R,
                          Sigma=ms["Sigma"], peaks=peaks, eigen=eigen)
