"""Two peaks on the disk: V = exp(5 x1²) pulls a symmetric pair apart.

V = 1 has no two-point critical configuration on the disk (the pair energy
is monotone along the axis), so the weight supplies one at (±t*, 0).  The
planar solver follows the two-peak branch until the cores get too narrow for
the grid, then the first two eigenfunctions are read at the peaks: the first
is even across x1 = 0, the second odd.

    python demos/symmetric_pair.py          # seconds at n = 129; n = 257 goes deeper
"""
import numpy as np

from gelfandlab.green import GreenOracle
from gelfandlab.grid2d import Domain, Grid2D
from gelfandlab.hamiltonian import find_critical
from gelfandlab.solver2d import continue_branch_2d, eig2d, extract_c
from gelfandlab.vexpr import parse


def main(n=129):
    V = parse("exp(5*x1^2)")
    oracle = GreenOracle("disk")
    sys = find_critical([[0.5, 0.0], [-0.5, 0.0]], oracle, V)
    print("critical pair", sys.points.round(6).tolist())
    print("h eigenvectors", sys.C.round(6).tolist())
    grid = Grid2D(Domain.parse("disk"), n)
    br = continue_branch_2d(grid, V, np.arange(6.0, 14.5, 0.5), sys.points, oracle=oracle)
    if br.truncated:
        print("stopped:", br.reason)
    for bp in br.points[::2]:
        es = eig2d(bp, 7)
        extract_c(es, bp, oracle)
        print(f"s={bp.s:4.1f} lambda={bp.lam:.4f} Sigma/16pi={bp.total_mass() / (16 * np.pi):.4f} "
              f"mu={es.mu[:4].round(4).tolist()} c1={es.c_hat[0].round(3).tolist()} "
              f"c2={es.c_hat[1].round(3).tolist()}")


if __name__ == "__main__":
    main()
