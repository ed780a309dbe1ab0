import csv
import json
import math
import os
import tempfile
from typing import Any, Iterable, List, Sequence

import numpy as np

from config.logging_config import logger


def format_value(value: float, digits: int = 6) -> str:
    """Format a float for reports; infinities and NaN stay readable."""
    if value is None:
        return "-"
    if math.isinf(value) or math.isnan(value):
        return str(value)
    return f"{value:.{digits}g}"


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over the target."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def to_jsonable(data: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(data, dict):
        return {str(k): to_jsonable(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [to_jsonable(v) for v in data]
    if isinstance(data, np.ndarray):
        return to_jsonable(data.tolist())
    if isinstance(data, np.bool_):
        return bool(data)
    if isinstance(data, np.integer):
        return int(data)
    if isinstance(data, np.floating):
        return float(data)
    return data


def save_to_json(data: Any, filename: str) -> bool:
    """Save data to a JSON file."""
    try:
        payload = json.dumps(to_jsonable(data), indent=4, sort_keys=True)
        atomic_write_bytes(filename, payload.encode("utf-8"))
        return True
    except Exception as e:
        logger.error(f"Error saving to JSON: {str(e)}")
        return False


def load_from_json(filename: str) -> Any:
    """Load data from a JSON file."""
    try:
        with open(filename, 'r') as f:
            return json.load(f)
    except Exception as e:
        logger.error(f"Error loading from JSON: {str(e)}")
        return None


def save_to_csv(rows: Iterable[Sequence[Any]], header: Sequence[str], filename: str) -> bool:
    """Save rows to a CSV file (atomically)."""
    try:
        directory = os.path.dirname(os.path.abspath(filename))
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
        with os.fdopen(fd, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        os.replace(tmp_path, filename)
        return True
    except Exception as e:
        logger.error(f"Error saving to CSV: {str(e)}")
        return False


def parse_float_list(text: str) -> List[float]:
    """Parse '1, 2.5, 4' into floats; '2pi' style multiples of pi are accepted."""
    values = []
    for item in str(text).split(","):
        item = item.strip().lower()
        if not item:
            continue
        if item.endswith("pi"):
            factor = item[:-2].strip("*") or "1"
            values.append(float(factor) * math.pi)
        else:
            values.append(float(item))
    return values


def geometric_windows(first: float, last: float, count: int) -> List[float]:
    """Geometric window schedule T_1 < ... < T_M."""
    if count < 2:
        return [float(last)]
    return [float(v) for v in np.geomspace(first, last, count)]


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    """Quadrature weights w_i with sum(w_i g(t_i)) = trapezoid rule on the nodes."""
    times = np.asarray(times, dtype=np.float64)
    if times.size < 2:
        return np.ones_like(times)
    dt = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w
