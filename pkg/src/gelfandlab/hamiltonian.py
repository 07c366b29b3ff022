"""The m-point Hamiltonian, its critical points and the asymptotic predictions.

    H(x_1..x_m) = ½ Σ R(x_i) + Σ_{i<j} G(x_i, x_j) + (1/8π) Σ log V(x_i)

At a critical configuration x* this module assembles

* h, the m×m matrix with h_ii = R(x*_i) + 2 Σ_{l≠i} G(x*_l, x*_i) + (1/4π) log V(x*_i)
  and h_ij = -G(x*_i, x*_j), with ascending spectrum Λ and eigenvectors c;
* the peak-width constants d_j = (1/8) exp{4πR + 4π Σ G + ½ log V} at x*_j;
* η, the ascending eigenvalues of D·Hess H·D, D = diag(d_1, d_1, ..., d_m, d_m).

All derivatives of H are central differences over oracle calls, so the same
code serves the exact-disk and the numeric oracles.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .green import GreenOracle
from .vexpr import VExpr

log = logging.getLogger(__name__)

THREE_LOG2_M1 = 3.0 * math.log(2.0) - 1.0


class CriticalPointError(RuntimeError):
    pass


@dataclass
class PeakSystem:
    """m candidate blow-up points with every derived quantity."""

    points: np.ndarray
    H: float = float("nan")
    gradH: np.ndarray | None = None
    hessH: np.ndarray | None = None
    h: np.ndarray | None = None
    Lambda: np.ndarray | None = None
    C: np.ndarray | None = None
    d: np.ndarray | None = None
    D: np.ndarray | None = None
    eta: np.ndarray | None = None
    robin: np.ndarray | None = None         # R(x*_j)
    Gpair: np.ndarray | None = None         # G(x*_i, x*_j), zero diagonal
    logV: np.ndarray | None = None
    degenerate_Lambda: bool = False
    degenerate_hess: bool = False
    iterations: int = 0
    notes: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.points)

    def to_record(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()
        return {
            "points": arr(self.points), "H": self.H, "gradH": arr(self.gradH),
            "hessH": arr(self.hessH), "h": arr(self.h), "Lambda": arr(self.Lambda),
            "C": arr(self.C), "d": arr(self.d), "eta": arr(self.eta),
            "degenerate_Lambda": self.degenerate_Lambda,
            "degenerate_hess": self.degenerate_hess,
        }


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    return p.reshape(-1, 2)


def check_points(points, oracle: GreenOracle, margin: float | None = None) -> None:
    """Raise unless points are interior and pairwise separated by ``margin``."""
    p = _as_points(points)
    dom = oracle.domain
    margin = 0.05 * dom.diameter if margin is None else margin
    for i, x in enumerate(p):
        if not dom.contains(x, margin):
            raise CriticalPointError(f"point {i} escaped to the boundary: {x.tolist()}")
        for j in range(i):
            if math.dist(x, p[j]) < margin:
                raise CriticalPointError(f"collision of points {j} and {i}")


def eval_H(points, oracle: GreenOracle, V: VExpr, margin: float | None = None) -> float:
    p = _as_points(points)
    check_points(p, oracle, margin)
    m = len(p)
    H = 0.0
    for i in range(m):
        H += 0.5 * oracle.R(p[i]) + math.log(V(p[i])) / (8 * math.pi)
        for j in range(i + 1, m):
            H += oracle.G(p[i], p[j])
    return H


def default_step(oracle: GreenOracle) -> float:
    h = 1e-4 * oracle.domain.diameter
    if oracle.mode == "numeric":
        h = max(h, oracle.step)
    return h


def grad_H(points, oracle: GreenOracle, V: VExpr, step: float | None = None,
           margin: float | None = None) -> np.ndarray:
    h = default_step(oracle) if step is None else step
    x = _as_points(points).ravel()
    g = np.empty_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (eval_H(x + e, oracle, V, margin) - eval_H(x - e, oracle, V, margin)) / (2 * h)
    return g


def hess_H(points, oracle: GreenOracle, V: VExpr, step: float | None = None,
           margin: float | None = None) -> np.ndarray:
    h = default_step(oracle) if step is None else step
    x = _as_points(points).ravel()
    n = len(x)
    f = lambda y: eval_H(y, oracle, V, margin)
    f0 = f(x)
    A = np.empty((n, n))
    E = np.eye(n) * h
    for a in range(n):
        A[a, a] = (f(x + E[a]) - 2 * f0 + f(x - E[a])) / h**2
        for b in range(a + 1, n):
            A[a, b] = (f(x + E[a] + E[b]) - f(x + E[a] - E[b])
                       - f(x - E[a] + E[b]) + f(x - E[a] - E[b])) / (4 * h**2)
            A[b, a] = A[a, b]
    return 0.5 * (A + A.T)


def find_critical(points0, oracle: GreenOracle, V: VExpr, tol: float = 1e-8,
                  max_iter: int = 50, margin: float | None = None,
                  step: float | None = None, degen_tol: float = 1e-12) -> PeakSystem:
    """Damped Newton on ∇H; gradient descent on ½|∇H|² when Newton stalls."""
    x = _as_points(points0).ravel().copy()
    check_points(x, oracle, margin)
    g = grad_H(x, oracle, V, step, margin)
    it = 0
    while np.max(np.abs(g)) > tol:
        if it >= max_iter:
            raise CriticalPointError(
                f"no convergence after {max_iter} iterations (|grad| {np.max(np.abs(g)):.2e})")
        Hm = hess_H(x, oracle, V, step, margin)
        try:
            dx = -np.linalg.solve(Hm, g)
        except np.linalg.LinAlgError:
            dx = -Hm @ g
        accepted = False
        for direction in (dx, -Hm @ g):
            t = 1.0
            for _ in range(30):
                y = x + t * direction
                try:
                    gy = grad_H(y, oracle, V, step, margin)
                except Exception:
                    t *= 0.5
                    continue
                if np.linalg.norm(gy) < (1 - 1e-4 * t) * np.linalg.norm(g):
                    x, g, accepted = y, gy, True
                    break
                t *= 0.5
            if accepted:
                break
        if not accepted:
            # stencil hits a margin on every trial step
            check_points(x + dx, oracle, margin)
            raise CriticalPointError("line search failed")
        it += 1
    sys = PeakSystem(points=x.reshape(-1, 2), iterations=it)
    sys.H = eval_H(x, oracle, V, margin)
    sys.gradH = g
    sys.hessH = hess_H(x, oracle, V, step, margin)
    ev = np.linalg.eigvalsh(sys.hessH)
    if np.min(np.abs(ev)) < degen_tol:
        sys.degenerate_hess = True
        sys.notes.append(f"degenerate Hessian (min |eig| {np.min(np.abs(ev)):.2e})")
    assemble_h(sys, oracle, V)
    d_constants(sys, oracle, V)
    eta_spectrum(sys)
    return sys


def _point_terms(sys: PeakSystem, oracle: GreenOracle, V: VExpr) -> None:
    """Cache R(x*_j), G(x*_i, x*_j) and log V(x*_j) on ``sys``."""
    p = sys.points
    m = len(p)
    G = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            G[i, j] = G[j, i] = oracle.G(p[i], p[j])
    sys.robin = np.array([oracle.R(x) for x in p])
    sys.Gpair = G
    sys.logV = np.array([math.log(V(x)) for x in p])


def fix_signs(C: np.ndarray, rel_tie: float = 1e-9) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Entries within ``rel_tie`` of the largest magnitude count as tied and
    the first of them decides, so (1, -1)/√2 is never returned as (-1, 1)/√2.
    """
    C = C.copy()
    for k in range(C.shape[1]):
        a = np.abs(C[:, k])
        lead = int(np.nonzero(a >= a.max() * (1 - rel_tie))[0][0])
        if C[lead, k] < 0:
            C[:, k] *= -1
    return C


def assemble_h(sys: PeakSystem, oracle: GreenOracle, V: VExpr, gap_tol: float = 1e-9):
    """Fill ``h``, ``Lambda`` (ascending) and ``C`` (orthonormal columns)."""
    _point_terms(sys, oracle, V)
    S = sys.Gpair.sum(axis=1)
    h = -sys.Gpair.copy()
    h[np.diag_indices(sys.m)] = sys.robin + 2 * S + sys.logV / (4 * math.pi)
    Lam, C = np.linalg.eigh(h)
    sys.h, sys.Lambda, sys.C = h, Lam, fix_signs(C)
    sys.degenerate_Lambda = bool(sys.m > 1 and np.min(np.diff(Lam)) < gap_tol)
    check_structure(sys)
    return h, Lam, sys.C


def check_structure(sys: PeakSystem, tiny: float = 1e-12) -> None:
    """Matrix-level concentration structure.

    With strictly negative off-diagonal entries, the lowest eigenvector has
    entries of one sign, and for m ≥ 2 no eigenvector is supported on a
    single point.
    """
    C = sys.C
    m = C.shape[0]
    first = C[:, 0]
    if not (np.all(first > tiny) or np.all(first < -tiny)):
        raise AssertionError("first eigenvector of h is not of one sign")
    if m >= 2 and not sys.degenerate_Lambda:
        for k in range(m):
            if np.sum(np.abs(C[:, k]) > tiny) == 1:
                raise AssertionError(f"eigenvector {k} of h is supported on a single point")


def d_constants(sys: PeakSystem, oracle: GreenOracle, V: VExpr) -> np.ndarray:
    if sys.robin is None:
        _point_terms(sys, oracle, V)
    S = sys.Gpair.sum(axis=1)
    d = 0.125 * np.exp(4 * math.pi * (sys.robin + S) + 0.5 * sys.logV)
    sys.d = d
    sys.D = np.diag(np.repeat(d, 2))
    return d


def eta_spectrum(sys: PeakSystem) -> np.ndarray:
    sys.eta = np.linalg.eigvalsh(sys.D @ sys.hessH @ sys.D)
    return sys.eta


def build_system(points, oracle: GreenOracle, V: VExpr, step: float | None = None,
                 margin: float | None = None) -> PeakSystem:
    """All derived quantities at given points, without solving for criticality."""
    sys = PeakSystem(points=_as_points(points).copy())
    sys.H = eval_H(sys.points, oracle, V, margin)
    sys.gradH = grad_H(sys.points, oracle, V, step, margin)
    sys.hessH = hess_H(sys.points, oracle, V, step, margin)
    assemble_h(sys, oracle, V)
    d_constants(sys, oracle, V)
    eta_spectrum(sys)
    return sys


def predict_low(lam: float, Lam: float) -> dict:
    """First/second-order eigenvalue predictions for n ≤ m and the inverse form."""
    if not 0 < lam < 1:
        raise ValueError("predictions need 0 < lambda < 1")
    L = math.log(lam)
    first = -1.0 / (2 * L)
    second = first + (2 * math.pi * Lam - THREE_LOG2_M1 / 2) / L**2
    inverse = 1.0 / (-2 * L - 8 * math.pi * Lam + 2 * THREE_LOG2_M1)
    return {"first": first, "second": second, "inverse": inverse}


def predict_mid(lam: float, sys: PeakSystem, n: int) -> float:
    """μⁿ ≈ 1 - 48π η^{2m-(n-m)+1} λ for m+1 ≤ n ≤ 3m (η indexed from 1)."""
    m = sys.m
    if not m + 1 <= n <= 3 * m:
        raise IndexError(f"mid-band index must lie in {m + 1}..{3 * m}")
    if sys.eta is None:
        raise ValueError("eta spectrum not populated")
    k = 2 * m - (n - m) + 1
    return 1.0 - 48 * math.pi * sys.eta[k - 1] * lam


def pair_scan(oracle: GreenOracle, V: VExpr, t_lo: float = 0.05, t_hi: float = 0.95,
              n: int = 1801, near: float | None = None) -> float:
    """Stationary point of t ↦ H((t, 0), (-t, 0)) by brute-force scan.

    The derivative is sampled on ``n`` points, every sign change is refined
    with Brent's method, and the root closest to ``near`` (default: the one
    with the smallest t) is returned.  Independent of :func:`find_critical`.
    """
    from scipy.optimize import brentq

    h = 1e-6
    phi = lambda t: eval_H([[t, 0.0], [-t, 0.0]], oracle, V, margin=0.0)
    dphi = lambda t: (phi(t + h) - phi(t - h)) / (2 * h)
    ts = np.linspace(t_lo, t_hi, n)
    d = np.array([dphi(t) for t in ts])
    roots = [brentq(dphi, ts[i], ts[i + 1], xtol=1e-13)
             for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]]
    if not roots:
        raise CriticalPointError("no stationary point of the symmetric pair energy in the scan range")
    if near is None:
        return float(roots[0])
    return float(min(roots, key=lambda t: abs(t - near)))
