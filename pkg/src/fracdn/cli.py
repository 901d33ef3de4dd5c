"""Command line entry point.

``fracdn run --config cfg.json [--out DIR] [--seed N]`` runs one experiment and
writes its tables and a JSON summary.  ``fracdn validate --config cfg.json``
only checks the configuration.

Exit codes: 0 success, 1 a check failed, 2 bad configuration, 3 numerical
failure (a ``diagnostics.json`` file is written next to the outputs).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from . import config as cfgmod
from .errors import ConfigurationError, FracDNError, GeometryError, NumericError
from .experiments import RNG_ALGORITHM, run_experiment
from .io import emit_csv, emit_json

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _provenance(cfg) -> dict:
    return {
        "package": "fracdn",
        "version": __version__,
        "config": cfg,
        "rng": {"algorithm": RNG_ALGORITHM, "seed": cfg["solver"]["seed"]},
        "tolerances": {k: cfg["solver"][k] for k in ("rtol", "kernel_rtol", "alpha")},
    }


def _out_dir(cfg, cli_out) -> Path:
    if cli_out:
        return Path(cli_out)
    env = os.environ.get("FRACDN_OUT")
    if env:
        return Path(env)
    return Path(cfg["output"]["directory"])


def _run(args) -> int:
    try:
        cfg = cfgmod.load(args.config)
        if args.seed is not None:
            cfg["solver"]["seed"] = args.seed
        cfgmod.build_geometry(cfg)
    except (ConfigurationError, GeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(cfg, args.out)
    name = cfg["experiment"]
    prov = _provenance(cfg)
    try:
        res = run_experiment(cfg)
    except NumericError as exc:
        emit_json({"error": str(exc), "diagnostics": exc.diagnostics, "provenance": prov}, out / "diagnostics.json")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FracDNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    formats = cfg["output"]["formats"]
    if "csv" in formats:
        for tname, rows in res.tables.items():
            emit_csv(rows, out / f"{name}_{tname}.csv")
    checks = [{"name": c.name, "passed": c.passed, "soft": c.soft, "detail": c.detail} for c in res.checks]
    if "json" in formats:
        emit_json({"experiment": name, "summary": res.summary, "checks": checks, "provenance": prov}, out / f"{name}.json")
    for c in res.checks:
        word = "PASS" if c.passed else ("SOFT-FAIL" if c.soft else "FAIL")
        print(f"{word}  {c.name}  {c.detail}".rstrip())
    return EXIT_OK if res.passed else EXIT_CHECK


def _validate(args) -> int:
    try:
        cfg = cfgmod.load(args.config)
        cfgmod.build_geometry(cfg)
    except (ConfigurationError, GeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: experiment {cfg['experiment']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracdn", description="Fractional Dirichlet-to-Neumann experiments.")
    p.add_argument("--version", action="version", version=f"fracdn {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (overrides FRACDN_OUT and the config)")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=_run)
    v = sub.add_parser("validate", help="check a configuration file")
    v.add_argument("--config", required=True)
    v.set_defaults(func=_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
