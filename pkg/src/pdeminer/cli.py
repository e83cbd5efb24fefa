"""
pdeminer command line

    pdeminer generate heat --alpha 0.05 --ic sine --out data/heat.pdrd
    pdeminer corrupt data/heat.pdrd --noise 0.1 --seed 0 --out data/heat_noisy.pdrd
    pdeminer subsample data/heat_noisy.pdrd --n-data 10000 --seed 0 --out data/samples.csv
    pdeminer discover --preset heat_sine_desk --set train.adam_epochs=500
    pdeminer export-plots runs/heat_sine_desk --html
    pdeminer verify --quick

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import logging
from typing import Callable, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from pdeminer import __version__
from pdeminer.components.plot_export import export_plots
from pdeminer.components.verification import run_verification
from pdeminer.dataset_manager import GENERATOR_DEFAULTS, generate, inject_noise, read_dataset, subsample, write_dataset
from pdeminer.errors import ConfigError, PDEMinerError
from pdeminer.experiment_runner import run_discovery
from pdeminer.utils.config import (
    RuntimeSettings, list_presets, load_config, load_preset, merge_overrides, parse_override,
)
from pdeminer.utils.logging_config import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdeminer",
        description="Discover a PDE from noisy scattered data with rational neural networks",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Overrides PDEMINER_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="Solve heat, Burgers or KdV on a grid")
    gen.add_argument("equation", choices=sorted(GENERATOR_DEFAULTS))
    gen.add_argument("--alpha", type=float, default=0.05, help="Heat diffusivity")
    gen.add_argument("--nu", type=float, default=0.1, help="Burgers viscosity")
    gen.add_argument("--ic", default=None, help="Initial condition name (default: sine)")
    gen.add_argument("--n-x", type=int, default=None, help="Output x grid size")
    gen.add_argument("--n-t", type=int, default=None, help="Output t grid size")
    gen.add_argument("--n-modes", type=int, default=None, help="Internal Fourier modes")
    gen.add_argument("--out", required=True, help="Binary dataset path (.pdrd)")

    corrupt = sub.add_parser("corrupt", help="Add calibrated Gaussian noise to a dataset")
    corrupt.add_argument("dataset")
    corrupt.add_argument("--noise", type=float, required=True, help="Noise level p, e.g. 0.1 for 10%%")
    corrupt.add_argument("--seed", type=int, default=0)
    corrupt.add_argument("--out", required=True)

    samp = sub.add_parser("subsample", help="Draw scattered training samples as CSV")
    samp.add_argument("dataset")
    samp.add_argument("--n-data", type=int, required=True)
    samp.add_argument("--seed", type=int, default=0)
    samp.add_argument("--out", required=True, help="CSV with header t,x,u")

    disc = sub.add_parser("discover", help="Train U and N, then rank sparse PDE candidates")
    source = disc.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="Experiment config JSON")
    source.add_argument("--preset", help=f"Shipped preset: {', '.join(list_presets())}")
    disc.add_argument("--seed", type=int, default=None)
    disc.add_argument("--output-dir", default=None)
    disc.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                      help="Dotted config override, repeatable (e.g. train.adam_epochs=500)")

    plots = sub.add_parser("export-plots", help="Write data, U, error and residual grids of a run")
    plots.add_argument("run_dir")
    plots.add_argument("--html", action="store_true", help="Also write the plotly four-panel page")

    verify = sub.add_parser("verify", help="Run the invariant suites")
    verify.add_argument("--quick", action="store_true", help="Smaller random samples")
    verify.add_argument("--seed", type=int, default=0)
    return parser


# ========================================
# COMMANDS
# ========================================

def cmd_generate(args: argparse.Namespace) -> int:
    ds = generate(args.equation, alpha=args.alpha, nu=args.nu, ic=args.ic,
                  n_x=args.n_x, n_t=args.n_t, n_modes=args.n_modes)
    path = write_dataset(ds, args.out)
    print(f"✅ {ds.metadata.equation} ({ds.metadata.ic}) grid {ds.shape[0]}x{ds.shape[1]} written to {path}")
    return EXIT_OK


def cmd_corrupt(args: argparse.Namespace) -> int:
    noisy = inject_noise(read_dataset(args.dataset), args.noise, args.seed)
    path = write_dataset(noisy, args.out)
    print(f"✅ {args.noise:.0%} noise added, written to {path}")
    return EXIT_OK


def cmd_subsample(args: argparse.Namespace) -> int:
    samples = subsample(read_dataset(args.dataset), args.n_data, args.seed)
    path = samples.to_csv(args.out)
    print(f"✅ {len(samples)} samples written to {path}")
    return EXIT_OK


def cmd_discover(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else load_preset(args.preset)
    overrides = dict(parse_override(item) for item in args.overrides)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    elif args.preset and "output_dir" not in overrides:
        overrides["output_dir"] = f"runs/{args.preset}"
    if overrides:
        config = merge_overrides(config, overrides)

    result = run_discovery(config, RuntimeSettings.from_env())
    print(f"✅ Run finished: {result.run_dir}")
    print(result.report.to_text(), end="")
    return EXIT_OK


def cmd_export_plots(args: argparse.Namespace) -> int:
    paths = export_plots(args.run_dir, html=args.html)
    print(f"✅ {len(paths)} files written: " + ", ".join(p.name for p in paths))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_verification(quick=args.quick, seed=args.seed)
    for r in results:
        print(f"{'✅' if r.passed else '❌'} {r.name:<18} {r.seconds:7.2f}s  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"❌ {len(failed)} suite(s) failed: {', '.join(failed)}")
        return EXIT_RUNTIME
    print(f"✅ All {len(results)} suites passed")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "generate": cmd_generate,
    "corrupt": cmd_corrupt,
    "subsample": cmd_subsample,
    "discover": cmd_discover,
    "export-plots": cmd_export_plots,
    "verify": cmd_verify,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # --help and --version exit 0; bad usage exits 2
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValidationError, FileNotFoundError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"❌ {e}")
        return EXIT_USAGE
    except PDEMinerError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"❌ {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
