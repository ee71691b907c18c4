"""Command-line experiment runner.

    simulate --config cfg --scheme pdd [--sweep Pmax --values 0,5,10]
             [--seed n] [--trials T] [--out results.csv] [--trace-out t.csv]

Any config key can also be overridden through DMABEAM_<KEY> environment
variables. Exit code 0 on success; failures emit one machine-readable JSON
line on stderr and a nonzero exit code.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (SCHEMES, SWEEP_VARIABLES, env_overrides, run_experiment,
                      sweep, write_csv, write_trace_csv)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="DMA multiuser-MISO beamforming experiments")
    parser.add_argument("--config", required=True, help="config file path")
    parser.add_argument("--scheme", required=True, choices=SCHEMES)
    parser.add_argument("--sweep", choices=SWEEP_VARIABLES,
                        help="sweep variable")
    parser.add_argument("--values", help="comma-separated sweep values")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--trials", type=int, help="MC trial count override")
    parser.add_argument("--out", help="results CSV path")
    parser.add_argument("--trace-out", help="convergence trace CSV path")
    parser.add_argument("--workers", type=int, default=1,
                        help="concurrent sweep points")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = env_overrides()
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.trials is not None:
            overrides["trials"] = args.trials

        if args.sweep:
            if not args.values:
                raise ValueError("--sweep requires --values")
            values = [float(v) for v in args.values.split(",") if v.strip()]
            results = sweep(args.config, args.scheme, args.sweep, values,
                            overrides=overrides, workers=args.workers)
        else:
            results = [run_experiment(args.config, args.scheme,
                                      overrides=overrides)]

        for res in results:
            rep = res.report
            point = f" {res.variable}={res.value:g}" if res.variable else ""
            print(f"{res.scheme}{point}: surrogate={rep.surrogate_bits:.6g} "
                  f"bits/s/Hz, mc={rep.mc_mean_bits:.6g}"
                  f"+-{rep.mc_se_bits:.2g} (T={rep.trials})"
                  + (f", flags={'|'.join(res.flags)}" if res.flags else ""))
        if args.out:
            write_csv(results, args.out)
        if args.trace_out:
            write_trace_csv(results, args.trace_out)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
