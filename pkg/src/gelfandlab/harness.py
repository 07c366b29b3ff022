"""End-to-end studies: critical points, branch, eigenpairs, diagnostics, fitted rates.

A study is one INI file (see ``configs/``).  :func:`run_study` is a pure
function of the parsed config: the same file gives the same report, apart
from the ``meta`` block (wall-clock timestamp and stage timings), which is
kept out of the hash and out of every assertion.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import hamiltonian as hm
from . import solver1d as s1
from . import solver2d as s2
from .green import GreenOracle
from .grid2d import Domain, Grid2D
from .vexpr import VExprError, is_constant_one, parse

log = logging.getLogger(__name__)

C_SECOND = -hm.THREE_LOG2_M1 / 2          # −(3 log 2 − 1)/2
SOLVERS = ("1d", "2d")


class ConfigError(ValueError):
    pass


class StudyError(RuntimeError):
    pass


# ---------------------------------------------------------------- config
@dataclass(frozen=True)
class StudyConfig:
    name: str
    domain: str
    V: str
    m: int
    solver: str
    s_values: tuple
    starts: tuple                      # m (x, y) pairs
    R: float
    K: int
    N: int = s1.DEFAULT_N              # radial cells (1d)
    n: int = 257                       # nodes per side (2d)
    depth_factor: float = 4.0
    newton_tol: float = 1e-11
    critical_tol: float = 1e-8
    R_sensitivity: tuple = (0.2, 0.3, 0.4)
    mid_window: tuple = (1e-3, 5e-2)   # λ range of the mid-band slope fit
    tail: int = 6
    window: float = 4.0
    seed: int = 0
    multistart: int = 0
    jsonl: str = ""
    csv: str = ""

    def validate(self) -> None:
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.m < 1:
            raise ConfigError("m must be at least 1")
        try:
            dom = Domain.parse(self.domain)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.solver == "1d" and (dom.kind != "disk" or self.m != 1):
            raise ConfigError("the radial solver handles m = 1 on the unit disk only")
        s = np.asarray(self.s_values, float)
        if len(s) < 2 or not np.all(np.isfinite(s)) or np.any(np.diff(s) <= 0):
            raise ConfigError("amplitude schedule must be strictly increasing with >= 2 points")
        if s[0] <= 0:
            raise ConfigError("amplitudes must be positive")
        if self.K < 3 * self.m + 1:
            raise ConfigError(f"K = {self.K} but at least 3m+1 = {3 * self.m + 1} eigenpairs are needed")
        for key in ("newton_tol", "critical_tol", "R", "depth_factor", "window"):
            val = getattr(self, key)
            if not (math.isfinite(val) and val > 0):
                raise ConfigError(f"{key} must be positive, got {val!r}")
        if any(not (math.isfinite(r) and r > 0) for r in self.R_sensitivity):
            raise ConfigError("R_sensitivity radii must be positive")
        if len(self.starts) != self.m:
            raise ConfigError(f"expected {self.m} start points, got {len(self.starts)}")
        if self.N < 100 or self.n < 33:
            raise ConfigError("grid too coarse (N >= 100, n >= 33)")
        if len(self.mid_window) != 2 or not 0 < self.mid_window[0] < self.mid_window[1]:
            raise ConfigError("mid_window needs two increasing positive values")
        if self.tail < 4:
            raise ConfigError("rate fits need a tail of at least 4 points")
        if self.multistart < 0:
            raise ConfigError("multistart must be nonnegative")
        try:
            parse(self.V)
        except VExprError as exc:
            raise ConfigError(f"V: {exc}") from None

    def hash(self) -> str:
        """SHA-256 over every field that affects results (outputs excluded)."""
        d = asdict(self)
        d.pop("jsonl")
        d.pop("csv")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _points(text: str) -> tuple:
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            xy = _floats(chunk)
            if len(xy) != 2:
                raise ConfigError(f"start point {chunk.strip()!r} needs two coordinates")
            pts.append(tuple(xy))
    return tuple(pts)


def parse_config(text: str, name: str = "study") -> StudyConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str          # N (radial cells) and n (2d nodes) are distinct keys
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from None
    get = lambda sec, key, default=None: cp.get(sec, key, fallback=default)
    try:
        if not cp.has_section("study"):
            raise ConfigError("missing [study] section")
        V = get("study", "V")
        if V is None:
            raise ConfigError("missing key V in [study]")
        m = int(get("study", "m", "1"))
        if get("schedule", "s_values"):
            s_values = tuple(_floats(get("schedule", "s_values")))
        else:
            lo = float(get("schedule", "s_min", "1"))
            hi = float(get("schedule", "s_max", "40"))
            st = float(get("schedule", "s_step", "0.5"))
            if not st > 0:
                raise ConfigError("s_step must be positive")
            s_values = tuple(float(x) for x in np.round(np.arange(lo, hi + 0.5 * st, st), 12))
        starts = _points(get("study", "starts", "0 0"))
        cfg = StudyConfig(
            name=get("study", "name", name),
            domain=get("study", "domain", "disk").strip().strip('"'),
            V=V.strip().strip('"'),
            m=m,
            solver=get("study", "solver", "1d").strip(),
            s_values=s_values,
            starts=starts,
            R=float(get("diagnostics", "R", "0.4")),
            K=int(get("diagnostics", "K", str(3 * m + 1))),
            N=int(get("grid", "N", str(s1.DEFAULT_N))),
            n=int(get("grid", "n", "257")),
            depth_factor=float(get("grid", "depth_factor", "4")),
            newton_tol=float(get("tolerances", "newton", "1e-11")),
            critical_tol=float(get("tolerances", "critical", "1e-8")),
            R_sensitivity=tuple(_floats(get("diagnostics", "R_sensitivity", "0.2 0.3 0.4"))),
            mid_window=tuple(_floats(get("diagnostics", "mid_window", "1e-3 5e-2"))),
            tail=int(get("diagnostics", "tail", "6")),
            window=float(get("diagnostics", "window", "4")),
            seed=int(get("study", "seed", "0")),
            multistart=int(get("study", "multistart", "0")),
            jsonl=get("output", "jsonl", "") or "",
            csv=get("output", "csv", "") or "",
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value: {exc}") from None
    cfg.validate()
    return cfg


def bundled_configs() -> list[str]:
    root = resources.files("gelfandlab") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_config(path_or_name: str) -> StudyConfig:
    """Read a config file, or a bundled preset by name (``disk_m1_V1``)."""
    p = Path(path_or_name)
    if p.is_file():
        return parse_config(p.read_text(), p.stem)
    res = resources.files("gelfandlab") / "configs" / f"{path_or_name}.ini"
    if res.is_file():
        return parse_config(res.read_text(), path_or_name)
    raise ConfigError(f"no config file or bundled preset named {path_or_name!r}")


# ---------------------------------------------------------------- rates
@dataclass
class RateFit:
    model: str
    value: float          # exponent (power) or constant (log-reciprocal)
    stderr: float
    n: int
    against: str = "lambda"


def fit_rate(series, model: str = "power", against: str = "lambda") -> RateFit:
    """Least-squares rate of a tail series of (λ, value) pairs.

    ``power``: slope of log|value| against log x, x = λ or, with
    ``against='inv_log'``, x = 1/|log λ|.  ``log-reciprocal``: the constant
    value·(log λ)².
    """
    arr = np.asarray(series, float).reshape(-1, 2)
    if len(arr) < 4:
        raise ValueError("rate fits need at least 4 points")
    lam, val = arr[:, 0], arr[:, 1]
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    if (model != "power" or against == "inv_log") and np.any(lam >= 1):
        raise ValueError("log-based models need lambda < 1")
    if model == "log-reciprocal":
        y = val * np.log(lam) ** 2
        return RateFit(model, float(y.mean()), float(y.std(ddof=1) / math.sqrt(len(y))),
                       len(y), against)
    if model != "power":
        raise ValueError(f"unknown rate model {model!r}")
    if np.any(val == 0) or not np.all(np.isfinite(val)):
        raise ValueError("degenerate series: zero or non-finite values")
    if against == "lambda":
        x = np.log(lam)
    elif against == "inv_log":
        x = -np.log(np.abs(np.log(lam)))
    else:
        raise ValueError(f"unknown abscissa {against!r}")
    y = np.log(np.abs(val))
    X = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    s2_ = float(r @ r) / (len(y) - 2)
    cov = s2_ * np.linalg.inv(X.T @ X)
    return RateFit(model, float(coef[0]), float(math.sqrt(cov[0, 0])), len(y), against)


# ---------------------------------------------------------------- report
@dataclass
class Assertion:
    name: str
    value: float
    band: str
    passed: bool
    config_hash: str
    note: str = ""


@dataclass
class StudyReport:
    name: str
    config_hash: str
    config: dict
    peak_system: dict
    rows: list = field(default_factory=list)          # DiagnosticsRow
    fits: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)    # Assertion
    critical_points: list = field(default_factory=list)
    truncated: bool = False
    reason: str = ""
    meta: dict = field(default_factory=dict)          # excluded from determinism

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def assertion(self, name: str) -> Assertion:
        for a in self.assertions:
            if a.name == name:
                return a
        raise KeyError(name)

    def check(self, name: str, value: float, ok: bool, band: str, note: str = "") -> None:
        value = float(value)
        ok = bool(ok) and math.isfinite(value)
        self.assertions.append(Assertion(name, value, band, ok, self.config_hash, note))
        log.info("%s %s: %.6g (%s)", "PASS" if ok else "FAIL", name, value, band)


# ---------------------------------------------------------------- study
def _check_radial(V, tol: float = 1e-10) -> None:
    r = np.linspace(0.0, 0.99, 23)
    th = np.linspace(0.0, 2 * np.pi, 7)
    vals = np.array([[float(V((ri * math.cos(t), ri * math.sin(t)))) for t in th] for ri in r])
    spread = np.max(np.abs(vals - vals[:, :1]) / np.abs(vals[:, :1]))
    if spread > tol:
        raise ConfigError("the radial solver needs a radial V (V varies with angle)")


def _multistart(cfg: StudyConfig, oracle, V) -> list:
    """Critical points from seeded perturbations of the configured start."""
    rng = np.random.default_rng(cfg.seed)
    found = []
    for _ in range(cfg.multistart):
        p0 = np.asarray(cfg.starts) + 0.05 * rng.standard_normal((cfg.m, 2))
        try:
            sys = hm.find_critical(p0, oracle, V, tol=cfg.critical_tol)
        except (hm.CriticalPointError, ValueError, AssertionError):
            continue
        if not any(np.max(np.abs(sys.points - q)) < 1e-6 for q in found):
            found.append(sys.points)
    return [q.tolist() for q in found]


def _tail(xs, k):
    return xs[-k:] if len(xs) >= k else xs


def run_study(cfg: StudyConfig) -> StudyReport:
    """Run the configured study end to end.

    A failure at the first branch point is fatal; later failures (including
    the 2D depth limit) truncate the branch and are recorded in the report.
    """
    cfg.validate()
    t_start = time.perf_counter()
    timings = {}
    V = parse(cfg.V)
    oracle = GreenOracle(cfg.domain, "exact" if Domain.parse(cfg.domain).kind == "disk" else "numeric",
                         n=cfg.n)
    if cfg.solver == "1d":
        _check_radial(V)
    chash = cfg.hash()
    log.info("study %s (%s): V=%s m=%d solver=%s", cfg.name, chash, cfg.V, cfg.m, cfg.solver)

    sys = hm.find_critical(cfg.starts, oracle, V, tol=cfg.critical_tol)
    log.info("critical point %s, Lambda=%s, d=%s", sys.points.tolist(), sys.Lambda, sys.d)
    rep = StudyReport(name=cfg.name, config_hash=chash, config=asdict(cfg),
                      peak_system=sys.to_record())
    rep.critical_points = _multistart(cfg, oracle, V)
    timings["critical"] = time.perf_counter() - t_start

    if cfg.solver == "1d":
        _run_1d(cfg, V, oracle, sys, rep, timings)
    else:
        _run_2d(cfg, V, oracle, sys, rep, timings)
    timings["total"] = time.perf_counter() - t_start
    rep.meta = {"created": time.strftime("%Y-%m-%dT%H:%M:%S"), "seconds": timings}
    return rep


def _fit(rep: StudyReport, name, series, model, against="lambda", band=None):
    """fit_rate stored under ``name``; a series too short or degenerate to fit
    fails the assertion ``name`` (when ``band`` is given) instead of raising."""
    try:
        f = fit_rate(series, model, against)
    except ValueError as exc:
        if band:
            rep.check(name, float("nan"), False, band, f"no fit: {exc}")
        return None
    rep.fits[name] = asdict(f)
    return f


def _low_band_rows(rows, key):
    return [(r.lam, r.eigen[0][key]) for r in rows if r.lam < 1 and math.isfinite(r.eigen[0][key])]


def _run_1d(cfg, V, oracle, sys, rep: StudyReport, timings) -> None:
    t0 = time.perf_counter()
    try:
        branch = s1.continue_branch(V, cfg.s_values, N=cfg.N, tol=cfg.newton_tol)
    except s1.NewtonError as exc:
        raise StudyError(f"first branch point unsolvable: {exc}") from None
    timings["branch"] = time.perf_counter() - t0
    exact = is_constant_one(V)
    t0 = time.perf_counter()
    for bp in branch:
        entries, es = s1.assemble_spectrum(bp, nmax=cfg.K, seed=cfg.seed)
        s2.extract_c(es, bp, oracle, R=cfg.R)
        row = dg.make_row(bp, es, sys, cfg.R, rep.config_hash, cfg.window)
        row.extra["h10_orth"] = s1.h10_orthogonality(bp, entries)
        row.extra["sigma_extrap"] = s1.extrapolated_ball_mass(bp, cfg.R)
        row.extra["newton_iters"] = bp.newton_iters
        if exact:
            b2 = math.exp(bp.s / 2) - 1
            lam_ex = 8 * b2 / (1 + b2) ** 2
            v_ex = 2 * np.log((1 + b2) / (1 + b2 * bp.grid.r**2))
            row.extra["exact_lambda_rel"] = abs(bp.lam / lam_ex - 1)
            row.extra["exact_v_rel"] = float(np.max(np.abs(bp.v - v_ex)) / bp.s)
        rep.rows.append(row)
    timings["eigen_diagnostics"] = time.perf_counter() - t0
    _assert_1d(cfg, V, sys, branch, rep, exact)


def _assert_1d(cfg, V, sys, branch, rep: StudyReport, exact: bool) -> None:
    rows, k = rep.rows, cfg.tail
    d1 = float(sys.d[0])
    Lam = float(sys.Lambda[0])

    # exact family and grid convergence
    if exact:
        worst = max(max(r.extra["exact_lambda_rel"], r.extra["exact_v_rel"]) for r in rows)
        rep.check("exact_branch", worst, worst <= 1e-7, "max relative error <= 1e-7")
        orders = []
        for bp in (branch[len(branch) // 2], branch[-1]):
            b2 = math.exp(bp.s / 2) - 1
            lam_ex = 8 * b2 / (1 + b2) ** 2
            e = [abs(s1.radial_newton_constrained(bp.s, V, bp, N=N).lam / lam_ex - 1)
                 for N in (cfg.N // 2, cfg.N)]
            orders.append(math.log2(e[0] / e[1]))
        rep.fits["grid_order"] = min(orders)
        rep.check("grid_order", min(orders), min(orders) >= 1.9, "observed order >= 1.9")

    # scaling constant d_1
    s_min, tol = (16.0, 0.02) if exact else (18.0, 0.03)
    deep = [r for r in rows if r.s >= s_min]
    if deep:
        err = max(abs(r.peaks[0]["delta_ratio"] / d1 - 1) for r in deep)
        rep.fits["delta_ratio_limit"] = rows[-1].peaks[0]["delta_ratio"]
        rep.check("scaling_constant", err, err <= tol,
                  f"|delta/sqrt(lambda) / d1 - 1| <= {tol:g} for s >= {s_min:g} (d1 = {d1:.6f})")

    # mass rate, Richardson-corrected σ
    tail = _tail(rows, k)
    f = _fit(rep, "sigma_exponent", [(r.lam, r.extra["sigma_extrap"] - 8 * math.pi) for r in tail],
             "power", band="fitted exponent >= 0.45")
    if f:
        rep.check("sigma_exponent", f.value, f.value >= 0.45, "fitted exponent >= 0.45")
    _fit(rep, "Sigma_exponent", [(r.lam, r.Sigma - 8 * math.pi) for r in tail], "power")
    last = rows[-1]
    sens = {}
    for R in cfg.R_sensitivity:
        try:
            sens[f"{R:g}"] = float(dg.masses(branch[-1], R)["sigma"][0])
        except ValueError:
            sens[f"{R:g}"] = float("nan")
    rep.fits["sigma_R_sensitivity"] = sens

    # second-order eigenvalue expansion
    r1 = _tail(_low_band_rows(rows, "r_first"), k)
    target = C_SECOND + 2 * math.pi * Lam
    if abs(Lam) < 1e-12:
        half = 0.15 * abs(C_SECOND)
        band = f"{C_SECOND:.5f} +- 15%"
    else:
        half = 0.15
        band = f"shift {2 * math.pi * Lam:.4f} +- 0.15 from {C_SECOND:.5f}"
    fc = _fit(rep, "second_order_constant", r1, "log-reciprocal", band=band)
    if fc:
        rep.check("second_order_constant", fc.value, abs(fc.value - target) <= half, band)
        rep.fits["second_order_shift"] = fc.value - C_SECOND
    r2 = _tail(_low_band_rows(rows, "r_second"), k)
    band = "exponent in 1/|log lambda| >= 2.5"
    fd = _fit(rep, "second_order_residual_decay", r2, "power", "inv_log", band)
    if fd:
        rep.check("second_order_residual_decay", fd.value, fd.value >= 2.5, band)

    # mid band and the μ > 1 band
    lo, hi = cfg.mid_window
    mid = [(r.lam, r.eigen[1]["mu"] - 1) for r in rows if lo <= r.lam <= hi]
    if len(mid) >= 4:
        lam_m, dmu = np.array(mid).T
        slope = float(np.dot(lam_m, dmu) / np.dot(lam_m, lam_m))
        pred = -48 * math.pi * float(sys.eta[1])
        rep.fits["mid_slope"] = slope
        rep.check("mid_slope", slope, abs(slope / pred - 1) <= 0.10,
                  f"(mu2 - 1)/lambda = {pred:.4f} +- 10% over lambda in [{lo:g}, {hi:g}]")
    top = min(r.eigen[3 * sys.m]["mu"] for r in rows)
    rep.check("mu_above_one", top, top > 1, f"mu^{3 * sys.m + 1} > 1 on every point")

    # profile law
    prof = [(r.lam, r.eigen[0]["profile1"]) for r in rows if math.isfinite(r.eigen[0]["profile1"])]
    pt = _tail(prof, k)
    decreasing = all(b[1] <= a[1] for a, b in zip(pt, pt[1:]))
    small = [p for lam, p in prof if lam <= 1e-6]
    rep.fits["profile_error_tail"] = [p for _, p in pt]
    if small:
        rep.check("profile_error", max(small), decreasing and max(small) <= 0.1,
                  "decreasing along the tail and <= 0.1 at lambda <= 1e-6",
                  "" if decreasing else "not monotone on the tail")

    # far field and orthogonality
    far = [r.eigen[0]["c_far1"] for r in rows if r.lam <= 1e-3]
    if far:
        worst = max(far, key=lambda c: abs(c - 1))
        rep.fits["far_field_coefficient"] = far[-1]
        rep.check("far_field_coefficient", worst, abs(worst - 1) <= 0.05,
                  "c_far = 1 +- 5% at every lambda <= 1e-3")
    orth = max(r.extra["h10_orth"] for r in rows)
    rep.check("h10_orthogonality", orth, orth <= 1e-8, "relative cross product <= 1e-8")
    rep.fits["lambda_range"] = [float(rows[0].lam), float(last.lam)]


def _run_2d(cfg, V, oracle, sys, rep: StudyReport, timings) -> None:
    grid = Grid2D(Domain.parse(cfg.domain), cfg.n)
    t0 = time.perf_counter()
    try:
        br = s2.continue_branch_2d(grid, V, cfg.s_values, sys.points, oracle=oracle,
                                   tol=max(cfg.newton_tol, 1e-9), depth_factor=cfg.depth_factor)
    except (s2.NewtonError2D, s2.PeakError) as exc:
        raise StudyError(f"first branch point unsolvable: {exc}") from None
    timings["branch"] = time.perf_counter() - t0
    if not br.points:
        raise StudyError(f"first branch point unsolvable: {br.reason}")
    rep.truncated, rep.reason = br.truncated, br.reason
    if br.truncated:
        log.warning("branch truncated: %s", br.reason)
    t0 = time.perf_counter()
    c_rows = []
    for bp in br.points:
        es = s2.eig2d(bp, cfg.K, seed=cfg.seed)
        s2.extract_c(es, bp, oracle, R=cfg.R)
        row = dg.make_row(bp, es, sys, cfg.R, rep.config_hash, cfg.window)
        row.extra["h10_orth"] = s2.h10_orthogonality(bp, es)
        row.extra["Sigma_ratio"] = row.Sigma / (8 * math.pi * sys.m)
        row.extra["newton_iters"] = bp.newton_iters
        c_rows.append(es.c_hat[: sys.m].copy())
        rep.rows.append(row)
    timings["eigen_diagnostics"] = time.perf_counter() - t0
    _assert_2d(cfg, V, oracle, sys, rep, c_rows)


def _symmetric_pair(points) -> bool:
    p = np.asarray(points)
    return len(p) == 2 and np.allclose(p[0], -p[1], atol=1e-6) and abs(p[0, 1]) < 1e-6


def _assert_2d(cfg, V, oracle, sys, rep: StudyReport, c_rows) -> None:
    m = sys.m
    rows = rep.rows
    if _symmetric_pair(sys.points):
        t_star = abs(float(sys.points[0, 0]))
        t_scan = hm.pair_scan(oracle, V, near=t_star)
        rep.fits["pair_scan"] = t_scan
        rep.check("pair_scan", abs(t_scan - t_star), abs(t_scan - t_star) <= 1e-4,
                  "|t* - 1D scan| <= 1e-4")
        ref = np.array([[1.0, 1.0], [1.0, -1.0]]).T / math.sqrt(2)
        dev = float(np.max(np.abs(np.asarray(sys.C) - ref)))
        rep.check("h_eigenvectors", dev, dev <= 1e-10, "columns (1,1)/sqrt2, (1,-1)/sqrt2 to 1e-10")
    # sign patterns: mode 1 one-signed, mode 2 changes sign
    ok1 = all(np.all(c[0] > 0) for c in c_rows)
    ok2 = all(c[1, 0] > 0 > c[1, 1] for c in c_rows) if m == 2 else True
    worst = min(float(np.min(np.abs(c[:m]))) for c in c_rows)
    rep.check("c_sign_pattern", worst, ok1 and ok2, "c1 (+,+), c2 (+,-) at every point")
    fails = []
    for r, c in zip(rows, c_rows):
        cr = dg.concentration_report(c, m)
        fails += [f"s={r.s:g}: {f}" for f in cr["failures"]]
    rep.check("concentration", worst, not fails, "every n <= m has |c_hat| >= 0.1 at >= 2 peaks",
              "; ".join(fails))
    c_last = c_rows[-1]
    dots = [abs(float(c_last[i] @ c_last[j])) for i in range(m) for j in range(i)]
    if dots:
        rep.check("c_orthogonality", max(dots), max(dots) <= 0.1, "|c_hat^i . c_hat^j| <= 0.1 at the deepest point")
    ratio = rows[-1].extra["Sigma_ratio"]
    rep.fits["Sigma_ratio_trend"] = [r.extra["Sigma_ratio"] for r in rows]
    rep.check("mass_trend", ratio, abs(ratio - 1) <= 0.05, "Sigma/(8 pi m) within 5% at the deepest point")
    orth = max(r.extra["h10_orth"] for r in rows)
    rep.check("h10_orthogonality", orth, orth <= 1e-8, "relative cross product <= 1e-8")
    top = min(r.eigen[3 * m]["mu"] for r in rows)
    rep.check("mu_above_one", top, top > 1, f"mu^{3 * m + 1} > 1 on every point")
    rep.fits["depth"] = {"s": float(rows[-1].s), "lambda": float(rows[-1].lam), "truncated": rep.truncated}
