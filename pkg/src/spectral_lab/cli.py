"""Command-line front end: scenario dispatch with deterministic output.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, NoConvergenceError, SpectralLabError
from .experiments import DEFAULT_SEED, SCENARIOS, make_config, run_and_save

SEED_ENV = "SPECTRAL_LAB_SEED"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral-lab",
        description="Numerical laboratory for spectral bounds of random complex potentials",
    )
    sub = parser.add_subparsers(dest="command")
    run_p = sub.add_parser("run", help="run a named scenario")
    run_p.add_argument("scenario", help="scenario identifier (see `list`)")
    run_p.add_argument("--config", metavar="PATH", help="JSON parameter file")
    run_p.add_argument(
        "--set",
        metavar="K=V",
        action="append",
        default=[],
        dest="overrides",
        help="override one parameter (repeatable; wins over --config)",
    )
    run_p.add_argument("--out", metavar="DIR", default=".", help="output directory")
    run_p.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker thread budget (results are identical for any value)",
    )
    run_p.add_argument("--seed", type=int, default=None, help="master seed (wins over env)")
    list_p = sub.add_parser("list", help="enumerate scenarios")
    list_p.add_argument("--json", action="store_true", help="machine-readable listing")
    return parser


def _resolve_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env, 0)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from exc
    return DEFAULT_SEED


def list_scenarios(as_json: bool = False) -> str:
    """Scenario listing with one-line descriptions and parameter schemas."""
    if as_json:
        return json.dumps(
            {
                name: {
                    "description": s.description,
                    "schema": {k: {"type": t, "default": d if not isinstance(d, tuple) else list(d)}
                               for k, (t, d) in s.schema.items()},
                }
                for name, s in sorted(SCENARIOS.items())
            },
            indent=2,
            sort_keys=True,
        )
    lines = []
    for name, s in sorted(SCENARIOS.items()):
        lines.append(f"{name}: {s.description}")
        params = ", ".join(f"{k}:{t}" for k, (t, _d) in s.schema.items())
        lines.append(f"  parameters: {params}")
    return "\n".join(lines)


def _load_overrides(args) -> dict:
    overrides: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        overrides.update(loaded)
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects K=V, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "list":
        print(list_scenarios(as_json=args.json))
        return 0
    if args.command != "run":
        parser.print_usage(sys.stderr)
        return 2
    try:
        overrides = _load_overrides(args)
        if "seed" not in overrides:
            overrides["seed"] = _resolve_seed(args.seed)
        elif args.seed is not None:
            overrides["seed"] = args.seed
        config = make_config(args.scenario, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        written = run_and_save(config, args.out)
    except (ConfigError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NoConvergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except SpectralLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
