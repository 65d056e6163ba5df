"""Command line entry point: ``catm run <config.json> [--out DIR] [--seed-check]``.

Exit status: 0 when every solve converged, 2 on solver non-convergence,
1 on configuration errors, 3 when ``--seed-check`` finds two runs whose
output files differ.
"""

from __future__ import annotations

import argparse
import filecmp
import logging
import sys
import tempfile
from pathlib import Path

from .driver import ScenarioConfig, run_scenario
from .errors import CATMError, ConfigError, ConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_NONDETERMINISTIC = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario document")
    run.add_argument("config", type=Path, help="scenario JSON file")
    run.add_argument("--out", type=Path, default=None,
                     help="output directory (default: <config stem>_out next to the config)")
    run.add_argument("--seed-check", action="store_true",
                     help="run twice and verify the outputs are bit-identical")
    return parser


def _same_outputs(first: Path, second: Path, names) -> list[str]:
    # wall time legitimately differs, so summary.json is not compared
    return [n for n in names if n != "summary.json"
            and not filecmp.cmp(first / n, second / n, shallow=False)]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ScenarioConfig.load(args.config)
        out = args.out or args.config.with_name(args.config.stem + "_out")
        report = run_scenario(cfg, out)
        if args.seed_check:
            with tempfile.TemporaryDirectory() as tmp:
                again = run_scenario(cfg, tmp)
                names = [p.name for p in report.files]
                differing = _same_outputs(report.out_dir, Path(tmp), names)
            if differing or again.converged != report.converged:
                print(f"seed check failed: {', '.join(differing) or 'convergence'} differ",
                      file=sys.stderr)
                return EXIT_NONDETERMINISTIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except CATMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = report.summary
    print(f"{report.kind}: wrote {len(report.files)} files to {report.out_dir}")
    if "final" in summary and "P_diss" in summary.get("final", {}):
        print(f"final P_diss = {summary['final']['P_diss']:.10e}, "
              f"epsilon = {summary.get('epsilon', float('nan')):.3e}")
    if not report.converged:
        print(f"solver did not converge: {summary.get('error', '')}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
