"""Observed h-refinement convergence rates versus theory.

Walks the refinement ladder for the three closed-form benchmark problems
and prints the observed rate of each (formulation, degree, variable)
combination next to the theoretical order: p+1 / p / p-1 for u / u_x /
u_xx in the standard formulation, p / p+1 / p in the mixed one.  Rates
are measured as the median of the last three level-to-level slopes that
sit above the round-off band.
"""

import numpy as np

from fem_errbal import (
    DEFAULT_ALPHA_R,
    beta_R,
    beta_T,
    brute_force_sweep,
    catalog,
    variable_available,
)

PROBLEMS = ("bench-poisson", "bench-diffusion", "bench-helmholtz")
VARIABLES = ("u", "ux", "uxx")


def observed_rate(curve, var, flavor):
    # ignore levels already contaminated by round-off: keep records whose
    # error sits well above the modeled floor alpha_R N^beta_R
    a_r, b_r = DEFAULT_ALPHA_R[var], beta_R(flavor)
    rates = [
        r.observed_rate
        for r in curve
        if r.observed_rate is not None and r.value > 1e4 * a_r * r.n_dof**b_r
    ]
    return float(np.median(rates[-3:]))


def main():
    for name in PROBLEMS:
        spec = catalog(name)
        print(f"\n{name}")
        print(f"  {'formulation':<12} {'p':>2} {'var':>4} {'observed':>9} {'theory':>7}")
        for flavor in ("standard", "mixed"):
            for p in (1, 2, 3):
                for var in VARIABLES:
                    if not variable_available(flavor, var, p):
                        continue
                    curve = brute_force_sweep(spec, flavor, p, var, n_max=30000, rise_streak=3)
                    rate = observed_rate(curve, var, flavor)
                    theory = beta_T(flavor, var, p)
                    print(f"  {flavor:<12} {p:>2} {var:>4} {rate:>9.3f} {theory:>7.1f}")


if __name__ == "__main__":
    main()
