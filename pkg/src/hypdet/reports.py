"""Deterministic report emission: JSON, CSV and columnar plot data.

Every numeric file carries the config hash and seed in a header (first CSV
line, or the "meta" object of a JSON report); identical config + seed must
reproduce the files byte for byte, so no timestamps and sorted keys
throughout.
"""

from __future__ import annotations

import hashlib
import json
import os


def config_hash(cfg_dict: dict) -> str:
    canon = json.dumps(cfg_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _sanitize(obj):
    """Make numpy scalars/arrays and complex numbers JSON-serializable."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path: str, payload: dict, meta: dict):
    body = {"meta": meta, **_sanitize(payload)}
    with open(path, "w") as fh:
        json.dump(body, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_csv(path: str, header_cols, rows, meta: dict):
    lines = ["# config_hash=%s seed=%s" % (meta["config_hash"], meta["seed"])]
    lines.append(",".join(header_cols))
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_columns(path: str, comment: str, col_names, columns, meta: dict):
    """Plain columnar plot data: '#' comments, whitespace-separated values."""
    lines = [
        "# config_hash=%s seed=%s" % (meta["config_hash"], meta["seed"]),
        "# " + comment,
        "# columns: " + " ".join(col_names),
    ]
    for row in zip(*columns):
        lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def ensure_dir(path: str):
    os.makedirs(path, exist_ok=True)
    return path
