"""Walk the V = 1 branch on the unit disk and compare with the closed form.

For V = 1 every branch point is known: with b = e^{s/2} - 1 the solution is
v = 2 log((1+b)/(1+b r²)) and λ = 8b/(1+b)².  The radial solver should track
that family to ~1e-8 while λ falls through eight decades.

    python demos/exact_branch.py
"""
import math

import numpy as np

from gelfandlab.solver1d import continue_branch
from gelfandlab.vexpr import parse


def main():
    branch = continue_branch(parse("1"), np.arange(1.0, 40.5, 0.5))
    print(f"{'s':>5} {'lambda':>12} {'rel err':>9} {'delta/sqrt(lam)':>16} {'mass/8pi':>9}")
    for bp in branch[::6]:
        b = math.exp(bp.s / 2) - 1
        lam = 8 * b / (1 + b) ** 2
        print(f"{bp.s:5.1f} {bp.lam:12.4e} {abs(bp.lam / lam - 1):9.1e} "
              f"{bp.delta[0] / math.sqrt(bp.lam):16.6f} {bp.total_mass() / (8 * math.pi):9.6f}")
    # the scaling ratio tends to 1/8 and the mass to 8π from below


if __name__ == "__main__":
    main()
