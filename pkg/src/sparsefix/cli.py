"""Command-line entry point: ``sparsefix <regress|classify|deblur> --config FILE``.

The JSON config holds flat `ExperimentConfig` keys; flags override it. A
``"sweep"`` entry mapping keys to value lists turns the run into a grid
whose points are written to ``<out>/run_000``, ``<out>/run_001``, ...
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .pipelines import EXIT_CAPPED, EXIT_CONVERGED, EXIT_ERROR, MODELS, TASKS, ExperimentConfig, run_experiment

logger = logging.getLogger("sparsefix")

# flag name -> config key
_OVERRIDES = {
    "model": "model",
    "lambda": "lam",
    "gamma": "gamma",
    "alpha": "alpha",
    "p": "p",
    "seed": "seed",
    "out": "out",
    "max_outer": "max_outer",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="sparsefix", description=__doc__.splitlines()[0])
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", type=Path, help="JSON file with experiment settings")
    parser.add_argument("--model", choices=MODELS)
    parser.add_argument("--lambda", dest="lambda", type=float, metavar="X")
    parser.add_argument("--gamma", type=float, metavar="X")
    parser.add_argument("--alpha", type=float, metavar="X")
    parser.add_argument("--p", type=float, metavar="X")
    parser.add_argument("--seed", type=int, metavar="N")
    parser.add_argument("--max-outer", dest="max_outer", type=int, metavar="N")
    parser.add_argument("--out", metavar="DIR")
    parser.add_argument("--sweep", action="store_true", help="expand the config's 'sweep' grid")
    parser.add_argument("--workers", type=int, default=1, help="parallel processes for --sweep")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_settings(args):
    settings = {}
    if args.config is not None:
        with open(args.config) as fh:
            settings = json.load(fh)
        if not isinstance(settings, dict):
            raise ValueError("config file must hold a JSON object")
    if "lambda" in settings:
        settings["lam"] = settings.pop("lambda")
    for flag, key in _OVERRIDES.items():
        val = getattr(args, flag)
        if val is not None:
            settings[key] = val
    settings["task"] = args.task
    return settings


def expand_sweep(settings):
    """Cartesian product of the ``sweep`` lists, each point with its own output dir."""
    grid = dict(settings.pop("sweep", {}))
    if "lambda" in grid:
        grid["lam"] = grid.pop("lambda")
    keys = sorted(grid)
    base_out = Path(settings.get("out", "out"))
    configs = []
    for i, values in enumerate(itertools.product(*(grid[k] for k in keys))):
        point = dict(settings, **dict(zip(keys, values)))
        point["out"] = str(base_out / f"run_{i:03d}")
        configs.append(point)
    return configs


def _run_one(settings):
    try:
        cfg = ExperimentConfig.from_dict(settings)
    except (TypeError, ValueError) as exc:
        logger.error("invalid config: %s", exc)
        return EXIT_ERROR
    return run_experiment(cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = load_settings(args)
    except (OSError, ValueError) as exc:
        logger.error("cannot read config: %s", exc)
        return EXIT_ERROR
    if not args.sweep:
        settings.pop("sweep", None)
        return _run_one(settings)

    points = expand_sweep(settings)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            codes = list(pool.map(_run_one, points))
    else:
        codes = [_run_one(p) for p in points]
    for point, code in zip(points, codes):
        logger.info("%s -> exit %d", point["out"], code)
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return EXIT_CAPPED if EXIT_CAPPED in codes else EXIT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
