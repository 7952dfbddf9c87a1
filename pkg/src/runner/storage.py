import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np

from ..config import config

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """numpy 标量/数组与非有限浮点转成可确定序列化的 JSON 值"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    return value


def dumps(data: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_csv(path: Path, header: Optional[Sequence[str]], rows: Iterable[Sequence[Any]]) -> Path:
    """header 为 None 时只写数据行"""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        if header is not None:
            writer.writerow(header)
        for row in rows:
            writer.writerow([to_jsonable(v) for v in row])
    return path


class ReportStorage:
    def __init__(self, out_dir: Optional[str] = None):
        self.out_dir = Path(out_dir or config.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def get_scenario_dir(self, name: str) -> Path:
        scenario_dir = self.out_dir / name
        scenario_dir.mkdir(parents=True, exist_ok=True)
        return scenario_dir

    def save_json(self, name: str, filename: str, data: Dict[str, Any]) -> Path:
        path = self.get_scenario_dir(name) / filename
        path.write_text(dumps(data), encoding='utf-8')
        return path

    def save_csv(self, name: str, filename: str, header: Optional[Sequence[str]],
                 rows: Iterable[Sequence[Any]]) -> Path:
        return write_csv(self.get_scenario_dir(name) / filename, header, rows)

    def save_suite(self, data: Dict[str, Any]) -> Path:
        path = self.out_dir / "suite_report.json"
        path.write_text(dumps(data), encoding='utf-8')
        return path
