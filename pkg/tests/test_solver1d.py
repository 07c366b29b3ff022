import math

import numpy as np
import pytest

from gelfandlab.grid2d import Domain, Grid2D
from gelfandlab.solver1d import (RadialGrid, assemble_spectrum, continue_branch, exact_branch,
                                 h10_orthogonality, mode_eigs, radial_newton_constrained)
from gelfandlab.solver2d import newton2d_constrained, parabola_seed
from gelfandlab.vexpr import parse
from oracles import exact_lambda, legendre_mu

ONE = parse("1")


def s_for_lambda(lam):
    """Peak height on the blow-up side of the V = 1 branch with the given λ."""
    # 8b/(1+b)² = λ  ⇔  λb² + (2λ - 8)b + λ = 0, larger root
    b = ((8 - 2 * lam) + math.sqrt((8 - 2 * lam) ** 2 - 4 * lam * lam)) / (2 * lam)
    return 2 * math.log1p(b)


@pytest.fixture(scope="module")
def tail():
    return continue_branch(ONE, np.arange(1.0, 32.5, 0.5))


def test_exact_branch_examples():
    lam, v0, vf = exact_branch(1.0)
    assert lam == 2.0 and v0 == pytest.approx(2 * math.log(2), abs=1e-12)
    assert vf(1.0) == pytest.approx(0.0, abs=1e-15)
    lam, v0, _ = exact_branch(3.0)
    assert lam == pytest.approx(0.72, abs=1e-15)
    assert v0 == pytest.approx(4.605170, abs=1e-6)
    lam, v0, vf = exact_branch(1e-4)
    assert lam == pytest.approx(8e-8, rel=1e-7)
    assert np.max(np.abs(vf(np.linspace(0, 1, 11)))) < 1e-7


def test_exact_branch_mass_and_scaling():
    grid = RadialGrid.for_width(0.3, 20000)
    bp = exact_branch(3.0, grid)
    assert bp.total_mass() == pytest.approx(7.2 * math.pi, abs=1e-5)
    assert bp.total_mass() == pytest.approx(22.619467, abs=1e-5)
    for beta in (0.5, 3.0, 100.0):
        bp = exact_branch(beta, RadialGrid.for_width(0.3 / beta, 2000))
        assert bp.delta[0] == pytest.approx(1 / (math.sqrt(8) * beta), rel=1e-12)
        assert bp.delta[0] / math.sqrt(bp.lam) == pytest.approx((1 + beta**2) / (8 * beta**2), rel=1e-12)


def test_newton_matches_exact_branch():
    bp = radial_newton_constrained(2 * math.log(10), ONE, N=96000)
    assert abs(bp.lam / 0.72 - 1) <= 1e-9
    assert bp.v[-1] == 0.0 and bp.v[0] == pytest.approx(2 * math.log(10), abs=1e-12)


def test_newton_deep_blow_up(tail):
    s = 2 * math.log1p(math.exp(12))
    bp = radial_newton_constrained(s, ONE, init=next(b for b in tail if b.s == 24.0))
    assert abs(bp.lam / exact_lambda(s) - 1) <= 1e-7
    assert bp.lam == pytest.approx(8 * math.exp(12) / (1 + math.exp(12)) ** 2, rel=1e-7)


def test_second_order_in_mesh_width():
    s = 12.0
    errs = [abs(radial_newton_constrained(s, ONE, N=N).lam / exact_lambda(s) - 1)
            for N in (3000, 6000, 12000)]
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5, errs


def test_cross_solver_small_amplitude():
    V = parse("exp(1 - abs2(x))")
    radial = radial_newton_constrained(0.1, V)
    g = Grid2D(Domain.parse("disk"), 129)
    v0, lam0 = parabola_seed(g, 0.1, V)
    planar = newton2d_constrained(0.1, V, g, v0, lam0, g.nearest((0.0, 0.0)))
    assert abs(planar.lam / radial.lam - 1) <= 2e-3


def test_grid_invariants(tail):
    for bp in tail:
        g = bp.grid
        assert np.sum(g.r < bp.delta[0]) >= 12
        assert 1 < g.ratio <= 1.15
        assert np.all(np.diff(g.r) > 0) and g.r[0] == 0 and g.r[-1] == 1


def test_newton_iterations_bounded(tail):
    assert max(bp.newton_iters for bp in tail[2:]) <= 8


def test_mass_in_range(tail):
    for bp in tail:
        assert 0 < bp.total_mass() < 16 * math.pi


def test_rejects_nonincreasing_schedule():
    with pytest.raises(ValueError):
        continue_branch(ONE, [1.0, 2.0, 2.0])


@pytest.mark.parametrize("s", [2 * math.log(2), 6.0, 16.0, 28.0])
@pytest.mark.parametrize("ell", [0, 1, 2])
def test_mode_eigs_match_legendre_roots(tail, s, ell):
    bp = next((b for b in tail if b.s == s), None) or radial_newton_constrained(s, ONE)
    mu, W = mode_eigs(bp, ell, count=2)
    ref = legendre_mu(bp.s, ell, count=2)
    assert mu == pytest.approx(ref, rel=2e-6)
    assert np.all(np.max(W, axis=1) == 1.0)


def test_mode_eigs_examples(tail):
    bp = radial_newton_constrained(2 * math.log(2), ONE)
    assert bp.lam == pytest.approx(2.0, rel=1e-8)
    _, es = assemble_spectrum(bp)
    assert 0 < es.mu[0] < 1 < es.mu[1]

    deep = radial_newton_constrained(s_for_lambda(1e-6), ONE, init=tail[-1])
    assert deep.lam == pytest.approx(1e-6, rel=1e-5)
    mu1 = mode_eigs(deep, 0, 1)[0][0]
    assert 0.030 <= mu1 <= 0.037

    shallow = radial_newton_constrained(s_for_lambda(0.01), ONE)
    mu2 = mode_eigs(shallow, 1, 1)[0][0]
    assert abs(mu2 - (1 + 0.375 * shallow.lam)) <= 5e-4


def test_mode_eigs_rejects_negative_index(tail):
    with pytest.raises(ValueError):
        mode_eigs(tail[0], -1)


def test_assemble_spectrum_ordering(tail):
    for bp in tail[::6]:
        entries, es = assemble_spectrum(bp)
        assert np.all(np.diff(es.mu) >= 0)
        assert es.labels[0] == (0, 0)
        assert es.labels[1] == es.labels[2] == (1, 0)
        assert es.mu[1] == es.mu[2]
        assert es.mu[3] > 1
        assert [e.multiplicity for e in entries if e.ell == 1][:1] == [2]
        assert h10_orthogonality(bp, entries) <= 1e-8


def test_first_eigenvalue_decreases_along_tail(tail):
    deep = [b for b in tail if b.s >= 8]
    mu1 = [mode_eigs(b, 0, 1)[0][0] for b in deep]
    assert np.all(np.diff(mu1) < 0)


def test_eigs_deterministic(tail):
    a = mode_eigs(tail[10], 1, 3, seed=4)
    b = mode_eigs(tail[10], 1, 3, seed=4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_scaling_constant_for_constant_V(tail):
    for bp in tail:
        if bp.s >= 16:
            assert abs(bp.delta[0] / math.sqrt(bp.lam) - 0.125) <= 0.02 * 0.125
