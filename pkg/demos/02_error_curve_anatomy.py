"""Anatomy of one error curve: descent, minimum, round-off rise.

Solves the Poisson benchmark with cubic standard elements at every
refinement level up to a DoF cap and prints the full error record:
the truncation branch where the error falls like N^-4, the attainable
minimum, and the round-off branch where it grows again.  A power-law
fit through the post-minimum records recovers the slope and offset of
the round-off model alpha_R N^beta_R.
"""

from fem_errbal import brute_force_sweep, catalog, fit_floor

spec = catalog("bench-poisson")


def main():
    curve = brute_force_sweep(spec, "standard", 3, "u", n_max=300_000, rise_streak=None)
    min_idx = curve.min_index
    print(f"{'REF':>4} {'N':>8} {'error':>12} {'rate':>7}")
    for i, rec in enumerate(curve):
        rate = f"{rec.observed_rate:7.3f}" if rec.observed_rate is not None else "      -"
        marker = "  <- minimum" if i == min_idx else ""
        print(f"{rec.refinement_level:>4} {rec.n_dof:>8} {rec.value:>12.4e} {rate}{marker}")

    best = curve.locate_min()
    print(f"\nattainable accuracy {best.value:.3e} at N = {best.n_dof}")
    print(f"records past the minimum: {len(curve.post_min_records())}")

    fit = fit_floor(curve)
    print(
        f"round-off fit: alpha_R_hat = {fit.alpha_R_hat:.3e}, "
        f"beta_R_hat = {fit.beta_R_hat:.3f} over {fit.point_count} points "
        f"(residual {fit.residual:.3f})"
    )


if __name__ == "__main__":
    main()
