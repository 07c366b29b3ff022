import math

import numpy as np
import pytest
import scipy.sparse as sp

from gelfandlab.green import GreenOracle
from gelfandlab.grid2d import Domain, Grid2D, cell_disk_area
from gelfandlab.hamiltonian import find_critical
from gelfandlab.solver1d import exact_branch, mode_eigs, radial_newton_constrained
from gelfandlab.solver2d import (PeakError, continue_branch_2d, detect_peaks, eig2d, extract_c,
                                 h10_orthogonality, newton2d_constrained, parabola_seed, sturm_count)
from gelfandlab.vexpr import parse

ONE = parse("1")
DISK = Domain.parse("disk")
S_072 = 2 * math.log(10)          # exact branch point with λ = 0.72
B2_01 = (7.8 + math.sqrt(7.8**2 - 0.04)) / 0.2
S_01 = 2 * math.log1p(B2_01)      # blow-up side point with λ = 0.1


def solve_disk(n, s, V=ONE):
    g = Grid2D(DISK, n)
    v0, lam0 = parabola_seed(g, s, V)
    return newton2d_constrained(s, V, g, v0, lam0, g.nearest((0.0, 0.0)))


@pytest.fixture(scope="module")
def pair():
    V = parse("exp(5*x1^2)")
    oracle = GreenOracle("disk")
    sys = find_critical([[0.5, 0.0], [-0.5, 0.0]], oracle, V)
    g = Grid2D(DISK, 129)
    br = continue_branch_2d(g, V, [6.0, 6.5, 7.0], sys.points, oracle=oracle)
    bp = br.points[-1]
    es = eig2d(bp, 7)
    extract_c(es, bp, oracle)
    return sys, br, bp, es


def test_lambda_on_fine_disk():
    bp = solve_disk(513, S_072)
    assert abs(bp.lam / 0.72 - 1) <= 0.01
    assert bp.residual <= 1e-9


def test_second_order_on_masked_disk():
    errs = [abs(solve_disk(n, S_072).lam / 0.72 - 1) for n in (65, 129, 257)]
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5, errs


def test_mass_matches_closed_form():
    for n in (65, 129, 257):
        bp = solve_disk(n, S_072)
        exact = 8 * math.pi * 9 / 10
        assert abs(bp.total_mass() / exact - 1) <= 2 * bp.grid.h**2


def test_cut_cell_areas():
    assert cell_disk_area(-1, 1, -1, 1) == pytest.approx(math.pi, abs=1e-14)
    assert cell_disk_area(0, 2, 0, 2) == pytest.approx(math.pi / 4, abs=1e-14)
    assert cell_disk_area(1.0, 2.0, -1, 1) == 0.0
    assert cell_disk_area(0.1, 0.2, 0.1, 0.2) == pytest.approx(0.01, abs=1e-16)
    for n in (33, 64, 129):
        assert Grid2D(DISK, n).weights.sum() == pytest.approx(math.pi, abs=1e-12)


def test_unit_square_small_amplitude():
    g = Grid2D(Domain.parse("rect 0 1 0 1"), 65)
    v0, lam0 = parabola_seed(g, 0.5, ONE, (0.5, 0.5))
    bp = newton2d_constrained(0.5, ONE, g, v0, lam0, g.nearest((0.5, 0.5)))
    assert bp.newton_iters <= 6
    assert bp.lam > 0 and bp.residual <= 1e-9


def test_detect_peaks_on_exact_field():
    errs = []
    for n in (65, 129, 257):
        g = Grid2D(DISK, n)
        _, v0, vf = exact_branch(3.0)
        locs, heights = detect_peaks(g, vf(np.hypot(*g.points().T)), 1)
        assert np.hypot(*locs[0]) <= g.h
        errs.append(abs(heights[0] - v0) / g.h**2)
    assert max(errs) <= 10


def test_detect_peaks_symmetric_pair(pair):
    _, _, bp, _ = pair
    assert abs(bp.heights[0] - bp.heights[1]) <= 1e-8
    assert bp.peaks[0] == pytest.approx(-bp.peaks[1], abs=1e-10)


def test_detect_peaks_constant_field():
    g = Grid2D(DISK, 33)
    with pytest.raises(PeakError, match="fewer than"):
        detect_peaks(g, np.ones(g.size), 1)


def test_eigs_against_radial_solver():
    radial = radial_newton_constrained(S_01, ONE)
    assert radial.lam == pytest.approx(0.1, rel=1e-6)
    planar = solve_disk(513, S_01)
    es = eig2d(planar, 4)
    mu1 = mode_eigs(radial, 0, 1)[0][0]
    assert abs(es.mu[0] / mu1 - 1) <= 5e-3
    assert es.mu[3] > 1


def test_pair_band_structure(pair):
    _, br, _, _ = pair
    for bp in br.points:
        es = eig2d(bp, 7)
        assert np.all(np.diff(es.mu) >= 0)
        assert es.mu[6] > 1


def test_pair_eigenfield_symmetry(pair):
    _, _, bp, es = pair
    g = bp.grid
    w1, w2 = g.to_full(es.w[0]), g.to_full(es.w[1])
    assert np.max(np.abs(w1 - w1[::-1, :])) <= 1e-6
    assert np.max(np.abs(w2 + w2[::-1, :])) <= 1e-6


def test_pair_concentration(pair):
    sys, _, _, es = pair
    assert es.c_hat[0] == pytest.approx([1.0, 1.0], rel=0.05)
    assert np.all(np.sign(es.c_far[0]) == np.sign(sys.C[:, 0]))
    assert np.all(np.sign(es.c_far[1]) == np.sign(sys.C[:, 1]))
    c = es.c_hat[:2] / np.linalg.norm(es.c_hat[:2], axis=1, keepdims=True)
    assert abs(c[0] @ c[1]) <= 0.1


def test_h10_orthogonality(pair):
    _, _, bp, es = pair
    assert h10_orthogonality(bp, es) <= 1e-8


def test_normalization(pair):
    _, _, _, es = pair
    # mirror-odd modes tie max and -min; the orientation pass may pick the twin
    assert np.max(es.w, axis=1) == pytest.approx(np.ones(len(es)), abs=1e-8)
    assert np.all(np.max(np.abs(es.w), axis=1) <= 1 + 1e-8)


def test_sturm_count_matches(pair):
    _, _, bp, es = pair
    M = sp.diags(bp.density, format="csc")
    assert sturm_count(bp.grid.A.tocsc(), M, 0.5 * (es.mu[2] + es.mu[3])) == 3


def test_depth_limit_truncates():
    V = parse("exp(5*x1^2)")
    oracle = GreenOracle("disk")
    sys = find_critical([[0.5, 0.0], [-0.5, 0.0]], oracle, V)
    g = Grid2D(DISK, 65)
    br = continue_branch_2d(g, V, np.arange(6.0, 14.5, 0.5), sys.points, oracle=oracle)
    assert br.truncated and "depth limit" in br.reason
    assert all(np.min(b.delta) >= 4 * g.h for b in br.points)


def test_schedule_must_increase():
    g = Grid2D(DISK, 33)
    with pytest.raises(ValueError):
        continue_branch_2d(g, ONE, [2.0, 1.0], [[0.0, 0.0]])
