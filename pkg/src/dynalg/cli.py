"""``dynalg`` command-line front end.

Exit status: 0 when every check passes, 1 when a verification fails and
2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, ConfigNotFound, DimensionMismatch, NotLinearSector, SchemaViolation
from .functionals import H_CONVENTIONS
from .schrodinger_lab import SIGNS, Grid, PropagatorConfig, coherent_state, evolve, scattering
from .serialization import (
    PROPAGATE_SCHEMA,
    SCENARIO_SCHEMA,
    functional_from_json,
    load_json,
    validate,
    word_from_json,
)
from .suites import SUITES, Settings, run_suite, with_overrides
from .weyl_algebra import normalize

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
_CONFIG_ERRORS = (ConfigError, ConfigNotFound, SchemaViolation, NotLinearSector, DimensionMismatch)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="64-bit unsigned seed for all random scenarios")
    p.add_argument("--tol", type=float, help="tolerance for the exact (algebraic/quadrature/path) records")
    p.add_argument("--dt", type=float, help="base time step of the propagator")
    p.add_argument("--n", type=int, help="number of grid points (power of two)")
    p.add_argument("--h-convention", choices=H_CONVENTIONS, help="constant attached to linear functionals")
    p.add_argument("--sign-convention", choices=SIGNS, help="sign of the perturbation in the Hamiltonian")
    p.add_argument("--out", type=Path, help="write the JSON report here instead of standard output")
    p.add_argument("--no-timings", action="store_true", help="omit wall-clock timings (byte-stable reports)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynalg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run one verification suite")
    verify.add_argument("suite", choices=SUITES)
    verify.add_argument("--config", type=Path, help="scenario JSON supplying defaults")
    _add_common(verify)

    run = sub.add_parser("run", help="run the suite described by a scenario JSON")
    run.add_argument("config", type=Path)
    _add_common(run)

    norm = sub.add_parser("normalize", help="print the Weyl normal form of a word")
    norm.add_argument("word", type=Path)
    norm.add_argument("--h-convention", choices=H_CONVENTIONS, default="consistent")

    prop = sub.add_parser("propagate", help="propagate a coherent state and dump it as CSV")
    prop.add_argument("config", type=Path)
    prop.add_argument("--dt", type=float)
    prop.add_argument("--n", type=int)
    prop.add_argument("--h-convention", choices=H_CONVENTIONS, default="consistent")
    prop.add_argument("--sign-convention", choices=SIGNS)
    prop.add_argument("--out", type=Path, help="CSV destination (default: standard output)")
    return parser


def settings_from_config(data: dict) -> Settings:
    validate(data, SCENARIO_SCHEMA, "scenario")
    grid = data.get("grid", {})
    prop = data.get("propagator", {})
    kw = {
        "suite": data.get("suite"),
        "seed": data.get("seed"),
        "n": grid.get("n"),
        "x_min": grid.get("x_min"),
        "length": grid.get("length"),
        "dt": prop.get("dt"),
        "scheme": prop.get("scheme"),
        "h_convention": data.get("h_convention"),
        "sign_convention": data.get("sign_convention"),
        "tolerances": data.get("tolerances"),
    }
    return with_overrides(Settings(), **kw)


def _settings(args, config: Path | None, suite: str | None) -> Settings:
    settings = Settings()
    if config is not None:
        settings = settings_from_config(load_json(config))
    settings = with_overrides(
        settings,
        suite=suite,
        seed=args.seed,
        tol=args.tol,
        dt=args.dt,
        n=args.n,
        h_convention=args.h_convention,
        sign_convention=args.sign_convention,
    )
    if not 0 <= settings.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if settings.tol is not None and not settings.tol > 0:
        raise ConfigError("--tol must be positive")
    settings.grid  # validates n
    settings.cfg()  # validates dt
    return settings


def _emit_report(report, args) -> int:
    text = json.dumps(report.to_json(timings=not args.no_timings), indent=2) + "\n"
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    for rec in sorted(report.records, key=lambda r: r.name):
        status = "PASS" if rec.passed else "FAIL"
        residual = "error" if rec.residual is None else f"{rec.residual:.3e}"
        print(f"{status}\t{rec.name}\t{residual}\t{rec.tolerance:.1e}", file=sys.stderr)
    print(f"overall\t{'pass' if report.passed else 'fail'}", file=sys.stderr)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_verify(args) -> int:
    settings = _settings(args, args.config, args.suite)
    return _emit_report(run_suite(settings), args)


def _cmd_run(args) -> int:
    data = load_json(args.config)
    if "suite" not in data:
        raise SchemaViolation("scenario: 'suite' is a required property")
    settings = _settings(args, args.config, None)
    return _emit_report(run_suite(settings), args)


def _cmd_normalize(args) -> int:
    word = word_from_json(load_json(args.word), args.h_convention)
    print(json.dumps(normalize(word).to_json()))
    return EXIT_PASS


def _cmd_propagate(args) -> int:
    data = load_json(args.config)
    validate(data, PROPAGATE_SCHEMA, "propagate config")
    grid_kw = dict(data.get("grid", {}))
    if args.n is not None:
        grid_kw["n"] = args.n
    grid = Grid(**grid_kw)
    prop = dict(data.get("propagator", {}))
    if args.dt is not None:
        prop["dt"] = args.dt
    if args.sign_convention is not None:
        prop["sign"] = args.sign_convention
    cfg = PropagatorConfig(**prop)
    F = functional_from_json(data["functional"], args.h_convention)
    st = data.get("state", {})
    psi = coherent_state(grid, st.get("x_mean", 0.0), st.get("p_mean", 0.0), st.get("width", 1.0))
    out = evolve(psi, F, cfg) if data.get("mode", "scattering") == "evolve" else scattering(psi, F, cfg)
    out.to_csv(args.out if args.out is not None else sys.stdout)
    return EXIT_PASS


_COMMANDS = {"verify": _cmd_verify, "run": _cmd_run, "normalize": _cmd_normalize, "propagate": _cmd_propagate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _CONFIG_ERRORS as exc:
        print(f"dynalg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError) as exc:
        print(f"dynalg: error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # reader went away (e.g. `| head`); silence the flush at exit too
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
