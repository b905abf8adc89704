"""
Report file helpers.
JSON reports are written with sorted keys and CSV reports with fixed column
order, so reruns with the same config and seed give byte-identical files.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_to_builtin) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, rows: Iterable[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> Path:
    """
    Write dict rows as CSV.

    Args:
        path: Output file
        rows: One dict per row
        columns: Leading columns in order; remaining keys follow in first-seen order
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows))
    if columns is not None:
        ordered = list(columns) + [c for c in frame.columns if c not in columns]
        frame = frame.reindex(columns=ordered)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    return path


def read_csv_rows(path: Path, dtype: Optional[Dict[str, Any]] = None) -> List[Dict[str, Any]]:
    """Rows of an existing CSV report; empty when the file does not exist."""
    path = Path(path)
    if not path.is_file():
        return []
    try:
        return pd.read_csv(path, dtype=dtype).to_dict(orient="records")
    except pd.errors.EmptyDataError:
        return []
