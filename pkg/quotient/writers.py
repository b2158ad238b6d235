import csv
import json
import logging
import os
from typing import Any, Iterable, List, Sequence

import numpy as np
from pydantic import BaseModel

from quotient.common import OutputException
from quotient.models import DrawSet

logger = logging.getLogger(__name__)


def format_number(value: float) -> str:
    """17 significant digits: parses back to the same double."""
    return f"{float(value):.17g}"


def _ensure_parent(path: str):
    output_dir = os.path.dirname(path)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)


def _jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return _jsonable(value.model_dump())
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def save_report_to_json(report: Any, output_path: str) -> bool:
    """
    Save a report (dict or pydantic model) as key-value JSON.
    DESIGN: Separated concern - writing is independent of computing.
    """
    try:
        _ensure_parent(output_path)
        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(_jsonable(report), f, indent=2, allow_nan=True)
            f.write("\n")
        logger.info(f"✅ Saved report to {output_path}")
        return True
    except (OSError, TypeError, ValueError) as e:
        logger.error(f"❌ Failed to save report to JSON: {str(e)}")
        raise OutputException(f"JSON save failed: {str(e)}")


def load_report(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _write_lines(output_path: str, lines: Iterable[str]):
    try:
        _ensure_parent(output_path)
        with open(output_path, "w", encoding="utf-8", newline="\n") as f:
            for line in lines:
                f.write(line + "\n")
    except OSError as e:
        logger.error(f"❌ Failed to write {output_path}: {str(e)}")
        raise OutputException(f"Write failed for {output_path}: {str(e)}")


def write_draws(output_path: str, draws: DrawSet):
    """Header "n r M", then one line of r numbers per node per draw."""

    def lines():
        yield f"{draws.n} {draws.r} {draws.M}"
        for factor in draws.factors:
            for row in factor:
                yield " ".join(format_number(v) for v in row)

    _write_lines(output_path, lines())
    logger.info(f"✅ Saved {draws.M} draws to {output_path}")


def write_intercepts(output_path: str, intercepts: Sequence[float]):
    _write_lines(output_path, (format_number(v) for v in intercepts))


def write_adjacency(output_path: str, A, form: str = "edges"):
    A = np.asarray(A)
    n = A.shape[0]

    def lines():
        yield f"{n} {form}"
        if form == "dense":
            for row in A:
                yield " ".join(str(int(v)) for v in row)
        else:
            for i, j in zip(*np.triu_indices(n, 1)):
                if A[i, j]:
                    yield f"{i} {j}"

    _write_lines(output_path, lines())


def write_lines(output_path: str, values: Iterable[Any]):
    _write_lines(output_path, (str(v) for v in values))


def write_table_csv(output_path: str, header: List[str], rows: Iterable[Sequence[Any]]):
    """Comma-separated table with a header row; floats get 17 significant digits."""

    def cell(value):
        if value is None:
            return ""
        if isinstance(value, (float, np.floating)):
            return format_number(value)
        return str(value)

    try:
        _ensure_parent(output_path)
        with open(output_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([cell(value) for value in row])
        logger.info(f"✅ Saved table to {output_path}")
    except OSError as e:
        logger.error(f"❌ Failed to write {output_path}: {str(e)}")
        raise OutputException(f"CSV save failed: {str(e)}")


def write_matrix_csv(output_path: str, matrix, prefix: str = "c"):
    matrix = np.asarray(matrix, dtype=float)
    header = [f"{prefix}{k}" for k in range(matrix.shape[1])]
    write_table_csv(output_path, header, matrix.tolist())
