"""First eigenvalue along the V = 1 tail against its log-expansion.

μ¹ → 0 like -1/(2 log λ); the second-order term adds C/(log λ)² with
C = 2πΛ¹ - (3 log 2 - 1)/2.  Multiplying the first-order residual by
(log λ)² should settle near C as λ shrinks.

    python demos/low_eigenvalue.py
"""
import math

import numpy as np

from gelfandlab.green import GreenOracle
from gelfandlab.hamiltonian import find_critical, predict_low
from gelfandlab.solver1d import continue_branch, mode_eigs
from gelfandlab.vexpr import parse


def main(expr="1"):
    V = parse(expr)
    sys = find_critical([[0.3, 0.2]], GreenOracle("disk"), V)
    Lam = float(sys.Lambda[0])
    C = 2 * math.pi * Lam - (3 * math.log(2) - 1) / 2
    print(f"V = {expr}: critical point {sys.points[0].round(8)}, 2*pi*Lambda = {2 * math.pi * Lam:.4f}")
    print(f"{'lambda':>10} {'mu1':>10} {'first':>10} {'second':>10} {'(mu1-first)L^2':>15}")
    for bp in continue_branch(V, np.arange(1.0, 40.5, 0.5))[-24::4]:
        mu = mode_eigs(bp, 0, 1)[0][0]
        p = predict_low(bp.lam, Lam)
        L2 = math.log(bp.lam) ** 2
        print(f"{bp.lam:10.2e} {mu:10.6f} {p['first']:10.6f} {p['second']:10.6f} "
              f"{(mu - p['first']) * L2:15.5f}")
    print(f"predicted constant {C:.5f}")


if __name__ == "__main__":
    main()
    main("exp(2*(1 - abs2(x)))")
