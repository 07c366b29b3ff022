"""Numerical laboratory for blow-up branches of -Δv = λ V e^v, v = 0 on ∂Ω.

Modules
    vexpr         coefficient expressions V(x)
    green         Green, regular-part and Robin functions
    hamiltonian   the m-point energy, its critical points, h, d_j, η
    solver1d      radial branch continuation and Fourier-mode eigenpairs
    solver2d      planar branch continuation and eigenpairs
    diagnostics   residuals of the asymptotic identities
    harness       configured studies, rate fits, acceptance assertions
    report        JSON-lines and CSV report files
"""
from .branch import BranchPoint, EigenSet
from .green import GreenOracle, disk_G, disk_K, disk_R
from .grid2d import Domain, Grid2D
from .hamiltonian import PeakSystem, eval_H, find_critical, predict_low, predict_mid
from .harness import StudyConfig, StudyReport, fit_rate, load_config, run_study
from .report import emit
from .vexpr import VExpr, parse

__version__ = "0.1.0"

__all__ = [
    "BranchPoint", "EigenSet", "GreenOracle", "disk_G", "disk_K", "disk_R", "Domain", "Grid2D",
    "PeakSystem", "eval_H", "find_critical", "predict_low", "predict_mid", "StudyConfig",
    "StudyReport", "fit_rate", "load_config", "run_study", "emit", "VExpr", "parse",
]
