#!/usr/bin/env python3
import argparse
import logging
import os
import signal
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# BLAS 线程数必须在 numpy 导入前确定
if os.environ.get("STATMAP_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["STATMAP_THREADS"])

from src.config import config
from src.errors import StatmapError
from src.runner import dumps, load_scenario, run, run_suite


def signal_handler(_signum, _frame):
    print("\nReceived interrupt signal, shutting down...")
    sys.exit(130)


def setup_logging():
    logging.basicConfig(
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        level=getattr(logging, config.log_level.upper(), logging.INFO)
    )
    if config.log_file:
        handler = logging.FileHandler(config.log_file, encoding='utf-8')
        handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        logging.getLogger().addHandler(handler)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="statmap", description="Harmonic maps between statistical manifolds")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="validate a scenario file")
    check.add_argument("scenario")

    run_cmd = commands.add_parser("run", help="run a scenario and write its report")
    run_cmd.add_argument("scenario")
    run_cmd.add_argument("--out", default=None, help=f"output directory (default: {config.out_dir})")
    run_cmd.add_argument("--jobs", type=int, default=None,
                         help="worker threads for the sampled Hessian and quadratic-form checks")

    suite = commands.add_parser("suite", help="run every scenario in a directory")
    suite.add_argument("directory")
    suite.add_argument("--out", default=None)
    suite.add_argument("--jobs", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    try:
        if args.command == "check":
            scenario = load_scenario(args.scenario)
            print(f"{scenario.name}: OK ({', '.join(scenario.analyses)})")
            return 0
        if args.command == "run":
            path = Path(args.scenario)
            jobs = min(args.jobs or config.jobs, config.thread_cap)
            report = run(load_scenario(path), args.out or config.out_dir, base_dir=path.parent, jobs=jobs)
            print(f"{report.name}: {'PASS' if report.passed else 'FAIL'} (exit code {report.exit_code})")
            return report.exit_code
        jobs = min(args.jobs or config.jobs, config.thread_cap)
        result = run_suite(args.directory, args.out, jobs)
        print(f"{result['successful']}/{result['total_scenarios']} scenarios passed")
        return result['exit_code']
    except StatmapError as e:
        print(dumps(e.to_dict()), file=sys.stderr, end="")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
