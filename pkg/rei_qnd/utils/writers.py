import csv
import dataclasses
import io
import json
import logging
import math
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence

import numpy as np

from ..errors import OutputWriteError


logger = logging.getLogger(__name__)


def to_serializable(value: Any) -> Any:
    """
    Convert report values to JSON-safe types.

    Complex numbers become {"re", "im"}; numpy scalars and arrays become
    Python numbers and lists; non-finite floats become None.
    """
    if isinstance(value, Mapping):
        return {str(key): to_serializable(item) for key, item in value.items()}
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        if hasattr(value, "to_dict"):
            return to_serializable(value.to_dict())
        return to_serializable(dataclasses.asdict(value))
    if isinstance(value, np.ndarray):
        return [to_serializable(item) for item in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [to_serializable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_serializable(float(value.real)), "im": to_serializable(float(value.imag))}
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    return value


def render_json(payload: Mapping[str, Any], timestamp: bool = True) -> str:
    """Sorted, indented JSON; adds generated_at unless timestamp is False."""
    body: Dict[str, Any] = dict(payload)
    if timestamp:
        body["generated_at"] = datetime.now(timezone.utc).isoformat()
    return json.dumps(to_serializable(body), sort_keys=True, indent=2, allow_nan=False) + "\n"


def render_csv(rows: Iterable[Mapping[str, Any]], columns: Sequence[str]) -> str:
    """RFC 4180 CSV text with a header row and repr-exact floats."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({column: _csv_cell(row.get(column)) for column in columns})
    return buffer.getvalue()


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_text(text: str, path: Optional[str] = None) -> None:
    """
    Write text to a file, or to stdout when path is None.

    Args:
        text: Content
        path: Destination file

    Raises:
        OutputWriteError: The file could not be written
    """
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as file:
            file.write(text)
    except OSError as e:
        raise OutputWriteError(path, e.strerror or str(e)) from e
    logger.info(f"Wrote {len(text)} bytes to {path}")


def write_json(payload: Mapping[str, Any], path: Optional[str] = None, timestamp: bool = True) -> None:
    write_text(render_json(payload, timestamp=timestamp), path)


def write_csv(rows: Iterable[Mapping[str, Any]], columns: Sequence[str], path: Optional[str] = None) -> None:
    write_text(render_csv(rows, columns), path)
