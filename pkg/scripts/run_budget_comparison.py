#!/usr/bin/env python3
"""Equal-time comparison on the paper-v preset: converged full-batch PGM vs
SPGM(4,4,3) vs PGM truncated to SPGM's wall-clock budget.

Prints runtime and PSNR (vs the converged reference) for the stochastic and
the truncated solver, optionally exporting magnitude slices of each result.

Usage:
    python scripts/run_budget_comparison.py [--seed 1] [--slices-prefix out/cmp]
"""

import argparse
import sys

import numpy as np

from nfmimo import (
    MinibatchComposition,
    SolverConfig,
    forward_apply,
    make_phantom,
    pgm_solve,
    preset_scenario,
    psnr_vs_reference,
    simulate_measurements,
    spgm_solve,
)
from nfmimo.io import export_slices_csv


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--snr-db", type=float, default=30.0)
    parser.add_argument("--max-iters", type=int, default=4000)
    parser.add_argument("--slices-prefix", default=None)
    args = parser.parse_args(argv)

    scenario = preset_scenario("paper-v")
    phantom = make_phantom("points:5", scenario.voxels, rng_seed=42)
    clean = forward_apply(phantom, scenario)
    sigma = float(np.sqrt(np.mean(np.abs(clean) ** 2) * 10 ** (-args.snr_db / 10)))
    y = simulate_measurements(phantom, scenario, noise_sigma=sigma, rng_seed=7)

    reference = pgm_solve(
        y.values, scenario,
        SolverConfig(eta=1e-3, alpha=4e-5, tol=1e-3, max_iters=args.max_iters),
    )
    print(
        f"PGM reference: {reference.iterations} iters, {reference.wall_time_s:.1f} s "
        f"({reference.termination})"
    )

    spgm = spgm_solve(
        y.values,
        scenario,
        SolverConfig(
            eta=1e-3, alpha=4e-5, tol=1e-3, max_iters=args.max_iters,
            composition=MinibatchComposition(4, 4, 3), rng_seed=args.seed,
        ),
    )
    spgm_psnr = psnr_vs_reference(spgm.volume, reference.volume).psnr_db
    print(
        f"SPGM (4,4,3):  {spgm.iterations} iters, {spgm.wall_time_s:.1f} s, "
        f"PSNR {spgm_psnr:.2f} dB"
    )

    truncated = pgm_solve(
        y.values,
        scenario,
        SolverConfig(
            eta=1e-3, alpha=4e-5, tol=1e-30, max_iters=10**6,
            time_budget_s=spgm.wall_time_s,
        ),
    )
    star_psnr = psnr_vs_reference(truncated.volume, reference.volume).psnr_db
    print(
        f"PGM (same budget): {truncated.iterations} iters, {truncated.wall_time_s:.1f} s, "
        f"PSNR {star_psnr:.2f} dB"
    )

    if args.slices_prefix:
        for tag, vol in (
            ("reference", reference.volume),
            ("spgm", spgm.volume),
            ("pgm_budget", truncated.volume),
        ):
            paths = export_slices_csv(vol, f"{args.slices_prefix}_{tag}")
            print(f"wrote {len(paths)} slice CSVs for {tag}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
