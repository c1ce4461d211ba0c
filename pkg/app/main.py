"""
CLI do fibreflow

Comandos:
- run <config> [--out PATH]: trace CSV do cenário (stdout ou arquivo + sidecar .meta)
- check-invariants <config> [--samples N] [--seed S]: relatório de propriedades
- convergence <config> --steps a,b,c: tabela de convergência do esquema
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .core.config import settings
from .core.exceptions import ConfigError, ConfigValidationError, QuantumBundleError
from .core.logging_config import configure_logging, get_logger
from .services.scenario_service import ScenarioService

# Configurar logging antes de tudo
configure_logging()
logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INVARIANT_FAILURE = 1
EXIT_NUMERICAL_ERROR = 3


def _read_config(path: str):
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}")
    return raw, ScenarioService.load_config(raw)


def _parse_ladder(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigValidationError(["steps"], [f"steps: expected comma-separated integers, got '{text}'"])


def cmd_run(args) -> int:
    raw, config = _read_config(args.config)
    records = ScenarioService.run_scenario(config)
    if args.out:
        out = Path(args.out)
        with out.open("w", encoding="utf-8", newline="") as stream:
            ScenarioService.write_trace(config, records, stream)
        ScenarioService.write_sidecar(config, raw, out.with_name(out.name + ".meta"))
        logger.info("Trace written", path=str(out), records=len(records))
    else:
        ScenarioService.write_trace(config, records, sys.stdout)
    return EXIT_OK


def cmd_check_invariants(args) -> int:
    _, config = _read_config(args.config)
    report = ScenarioService.check_invariants(config, samples=args.samples, seed=args.seed)
    ScenarioService.write_report(report, sys.stdout)
    if not report.passed:
        logger.warning("Invariant failures", properties=[r.property for r in report.failures()])
        return EXIT_INVARIANT_FAILURE
    return EXIT_OK


def cmd_convergence(args) -> int:
    _, config = _read_config(args.config)
    table = ScenarioService.convergence_study(config, _parse_ladder(args.steps))
    ScenarioService.write_convergence(table, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description="Quantum evolution in state-space and bundle pictures")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="write the scenario trace as CSV")
    run.add_argument("config")
    run.add_argument("--out", default=None)
    run.set_defaults(handler=cmd_run)

    check = commands.add_parser("check-invariants", help="verify transport and evolution properties")
    check.add_argument("config")
    check.add_argument("--samples", type=int, default=None)
    check.add_argument("--seed", type=int, default=None)
    check.set_defaults(handler=cmd_check_invariants)

    convergence = commands.add_parser("convergence", help="error and observed order over a step ladder")
    convergence.add_argument("config")
    convergence.add_argument("--steps", required=True)
    convergence.set_defaults(handler=cmd_convergence)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except QuantumBundleError as e:
        logger.error("Command failed", command=args.command, error=e.detail, exit_code=e.exit_code)
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
        # Falhas numéricas vindas de numpy/scipy que escaparam da validação
        logger.error("Numerical failure", command=args.command, error=str(e), error_type=type(e).__name__)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
