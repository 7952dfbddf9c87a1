import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..config import config
from ..errors import ConfigurationError, StatmapError
from .runner import RunReport, run
from .scenario import load_scenario
from .storage import ReportStorage

logger = logging.getLogger(__name__)


def discover_scenarios(directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigurationError(f"scenario directory not found: {directory}")
    return sorted(directory.glob("*.json"))


def _run_one(path: Path, out_dir: Path) -> Dict[str, Any]:
    try:
        scenario = load_scenario(path)
    except StatmapError as e:
        logger.error(f"{path.name}: {e}")
        return {"status": "invalid", "exit_code": e.exit_code, "error": e.to_dict()}
    report: RunReport = run(scenario, out_dir, base_dir=path.parent)
    status = "success" if report.passed else ("failed" if report.data["error"] is None else "error")
    return {"status": status, "exit_code": report.exit_code, "error": report.data["error"],
            "assertions_failed": [a["name"] for a in report.data["assertions"] if not a["passed"]]}


def run_suite(directory: Union[str, Path], out_dir: Optional[Union[str, Path]] = None,
              jobs: Optional[int] = None) -> Dict[str, Any]:
    """跑完目录里所有场景，返回汇总报告；exit_code 取各场景的最大值"""
    execution_report: Dict[str, Any] = {
        'start_time': datetime.now().isoformat(timespec='seconds'),
        'total_scenarios': 0,
        'successful': 0,
        'failed': 0,
        'errors': 0,
        'invalid': 0,
        'scenario_results': {},
        'exit_code': 0,
    }
    storage = ReportStorage(str(out_dir) if out_dir else None)
    paths = discover_scenarios(directory)
    execution_report['total_scenarios'] = len(paths)
    logger.info(f"Found {len(paths)} scenarios in {directory}")
    if not paths:
        logger.warning("No scenarios to run")
        storage.save_suite(execution_report)
        return execution_report

    jobs = max(1, jobs or config.jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {path.stem: pool.submit(_run_one, path, storage.out_dir) for path in paths}
        for idx, (name, future) in enumerate(futures.items(), 1):
            result = future.result()
            execution_report['scenario_results'][name] = result
            key = {'success': 'successful', 'failed': 'failed', 'error': 'errors'}.get(result['status'], 'invalid')
            execution_report[key] += 1
            execution_report['exit_code'] = max(execution_report['exit_code'], result['exit_code'])
            logger.info(f"[{idx}/{len(paths)}] Completed scenario {name}, status: {result['status']}")

    execution_report['end_time'] = datetime.now().isoformat(timespec='seconds')
    storage.save_suite(execution_report)
    logger.info(f"Suite completed: {execution_report['successful']}/{len(paths)} passed, "
                f"exit code {execution_report['exit_code']}")
    return execution_report
