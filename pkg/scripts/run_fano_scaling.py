#!/usr/bin/env python3
"""Fano-factor scaling campaign: optimize couplings over a grid of chain
lengths and fit D/J ~ N^alpha.  Writes a CSV table, the fitted exponent,
and the run manifest under runs/."""
import argparse
import json

from tickchain.experiments import ExperimentConfig, run_scaling


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lengths", type=int, nargs="+", default=[10, 20, 40, 80])
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--budget", type=int, default=None)
    parser.add_argument("--out", default="runs/scaling")
    args = parser.parse_args()
    config = ExperimentConfig(
        kind="scaling",
        sweep={"n_sites": args.lengths},
        seed=args.seed,
        options={} if args.budget is None else {"budget": args.budget},
    )
    table, fit = run_scaling(config)
    paths = table.write(args.out, "scaling")
    print(json.dumps({
        "exponent": None if fit is None else fit.exponent,
        "exponent_err": None if fit is None else fit.exponent_err,
        "outputs": [str(p) for p in paths],
    }, indent=2))


if __name__ == "__main__":
    main()
