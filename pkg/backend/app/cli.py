"""Command-line front end: python -m app.cli --config scenarios/straight_push.json"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from .config import settings
from .schemas import ScenarioConfig
from .services.scenario_service import EXIT_CONFIG, EXIT_OK, run, run_batch

logger = logging.getLogger(__name__)


def _positive(value: str) -> float:
  number = float(value)
  if not number > 0:
    raise argparse.ArgumentTypeError(f"must be positive, got {value}")
  return number


def build_parser() -> argparse.ArgumentParser:
  parser = argparse.ArgumentParser(
    prog="app.cli", description="Run closed-loop DCM walking scenarios with push recovery"
  )
  parser.add_argument("--config", help="scenario JSON file")
  parser.add_argument("--out", default=settings.WALK_OUTPUT_DIR, help="output directory")
  parser.add_argument("--dt", type=_positive, help="override the control period (s)")
  parser.add_argument("--no-adapter", action="store_true", help="disable the step adapter")
  parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
  parser.add_argument("--batch", nargs="+", metavar="CONFIG",
                      help="run several scenario files concurrently, one sub-directory each")
  parser.add_argument("--print-schema", action="store_true",
                      help="print the scenario JSON schema and exit")
  return parser


def main(argv: Optional[List[str]] = None) -> int:
  parser = build_parser()
  args = parser.parse_args(argv)
  logging.basicConfig(
    level=logging.WARNING if args.quiet else settings.WALK_LOG_LEVEL.upper(),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
  )
  if args.print_schema:
    print(json.dumps(ScenarioConfig.model_json_schema(), indent=2))
    return EXIT_OK
  adapter = False if args.no_adapter else None
  if args.batch:
    codes = run_batch(args.batch, args.out, dt=args.dt, adapter_enabled=adapter)
    for path, code in codes.items():
      logger.info(f"{path}: exit {code}")
    return max(codes.values(), default=EXIT_OK)
  if not args.config:
    parser.print_usage(sys.stderr)
    logger.error("--config is required unless --batch or --print-schema is given")
    return EXIT_CONFIG
  return run(args.config, args.out, dt=args.dt, adapter_enabled=adapter)


if __name__ == "__main__":
  sys.exit(main())
