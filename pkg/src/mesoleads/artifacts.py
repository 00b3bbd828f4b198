"""Deterministic CSV artifacts and run manifests."""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

SCHEMA_PREFIX = "# schema: mesoleads."


def format_number(x) -> str:
    """Round-trip representation with 17 significant digits."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x) + 0.0, ".17g")  # folds -0.0 into 0


def csv_text(kind: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"{SCHEMA_PREFIX}{kind}/v1\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


def write_csv(path, kind: str, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(kind, columns, rows))
    return path


class SchemaError(ValueError):
    pass


def read_csv(path):
    """Return ``(schema, columns, data)``; ``data`` is a float array (rows x columns)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(SCHEMA_PREFIX):
        raise SchemaError(f"{path}: missing schema header line")
    schema = lines[0][len("# schema: "):].strip()
    reader = csv.reader(lines[1:])
    try:
        columns = next(reader)
    except StopIteration:
        raise SchemaError(f"{path}: missing column header") from None
    data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    return schema, columns, data.reshape(-1, len(columns))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_manifest(out_dir, command: str, params: dict, diagnostics: dict, outputs) -> Path:
    from . import __version__

    manifest = {
        "tool": "mesoleads",
        "version": __version__,
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "parameters": _jsonable(params),
        "diagnostics": _jsonable(diagnostics),
        "outputs": [Path(p).name for p in outputs],
    }
    path = Path(out_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
