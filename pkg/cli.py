#!/usr/bin/env python3
"""
Command-line front end: simulate, compare, sweep, check and chenfliess runs
driven by a TOML config or one of the embedded figure presets.
"""

import sys
import os
import logging
import argparse
sys.path.append(os.path.dirname(__file__))

from flow import FLOW_FACTORIES, create_shared_store
from utils.config import ConfigError, load_config, load_preset, write_config_text
from utils.dynamics import PreconditionError
from utils.run_log import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Config sections a command cannot run without
REQUIRED_SECTIONS = {
    "compare": "compare",
    "sweep": "sweep",
}


def require_sections(command, config):
    section = REQUIRED_SECTIONS.get(command)
    if section and not getattr(config, section):
        raise ConfigError(f"{section}: section required by the '{command}' command")


def run_command(command, config, options=None):
    """Run one command's flow; returns the shared store"""
    require_sections(command, config)
    flow = FLOW_FACTORIES[command]()
    shared = create_shared_store(config, {**(options or {}), "command": command})
    logger.info(f"Running '{command}' into {shared['options']['out_dir']}")
    flow.run(shared)
    logger.info(f"Finished '{command}': {len(shared['exports']['files'])} files written")
    return shared


def print_summary(command, shared):
    print("\n" + "=" * 50)
    print(f"{command.upper()} RESULTS")
    print("=" * 50)

    for meta, report in shared["analysis"]["convergence"]:
        label = meta.variant if meta.system == "closed_loop" else meta.system
        status = "converged" if report.converged else ("DIVERGED" if meta.status != "ok" else "not converged")
        print(f"  {label:>16} from ({meta.y0:g}, {meta.k0:g}): {status}, "
              f"y(tf)={report.y_final:.4g}, k(tf)={report.k_final:.4g}")

    for point in shared["analysis"]["sweep"]:
        print(f"  omega={point.omega:g}: sup error {point.error:.6g}")

    assumptions = shared["analysis"]["assumptions"]
    if assumptions is not None:
        print(f"  Assumptions: {'all passed' if assumptions.passed else 'FAILED'} (M = {assumptions.bound_M:.6g})")
        for check in assumptions.failures:
            print(f"    {check.assumption} {check.subject}: value={check.value}")
    nussbaum = shared["analysis"]["nussbaum"]
    if nussbaum is not None:
        print(f"  Nussbaum-type: {'yes' if nussbaum.is_nussbaum else 'no'} "
              f"(sup {nussbaum.running_sup:.4g}, inf {nussbaum.running_inf:.4g}, {nussbaum.crossings} crossings)")

    for order, errors in sorted(shared["analysis"]["chen_fliess"].items()):
        print(f"  order {order}: sup distance to Euler orbit {errors['to_reference']:.6g}")

    print(f"\nWrote {len(shared['exports']['files'])} files to {shared['options']['out_dir']}")
    if shared["exports"]["report_path"]:
        print(f"Open '{shared['exports']['report_path']}' to view the report.")


def build_parser():
    parser = argparse.ArgumentParser(description="Universal adaptive stabilization via Lie-bracket approximation")
    parser.add_argument("command", choices=sorted(FLOW_FACTORIES), help="What to run")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=str, help="Path to a TOML experiment config")
    source.add_argument("--preset", type=str, help="Embedded config: fig1, fig2, fig3 or fig4")
    parser.add_argument("--out", type=str, help="Output directory (overrides outputs.directory)")
    parser.add_argument("--with-lbs", action="store_true", help="Also integrate the Lie-bracket system")
    parser.add_argument("--seed", type=int, help="Seed for random initial-condition batches")
    parser.add_argument("--verbose", action="store_true", help="Log to stderr as well")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    configure_logging(verbose=args.verbose)

    try:
        if args.preset:
            config, text = load_preset(args.preset)
        else:
            config, text = load_config(args.config), None
    except ConfigError as e:
        print(f"Invalid configuration:\n{e}", file=sys.stderr)
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE

    options = {
        "out_dir": args.out,
        "with_lbs": True if args.with_lbs else None,
        "seed": args.seed,
    }

    try:
        if text is not None:
            write_config_text(text, args.out or config.outputs.directory)
        shared = run_command(args.command, config, options)
    except (ConfigError, PreconditionError) as e:
        print(f"Invalid configuration:\n{e}", file=sys.stderr)
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    except Exception as e:
        print(f"Error running '{args.command}': {e}", file=sys.stderr)
        logger.exception(f"Unexpected failure in '{args.command}'")
        import traceback
        traceback.print_exc()
        return EXIT_FAILURE

    print_summary(args.command, shared)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
