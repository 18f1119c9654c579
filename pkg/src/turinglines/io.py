"""Output formats and run manifests.

JSON for configs and structured reports, CSV for bulk numeric samples.
Floats are printed with 17 significant digits so that parsing the output
recovers the exact double, making files usable as oracle fixtures.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path
from typing import Iterable, List, Sequence

SCHEMA_VERSION = 1


def format_float(x) -> str:
    """Decimal representation with 17 significant digits (lossless)."""
    return format(float(x), ".17g")


def format_cell(value) -> str:
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def read_csv(path) -> tuple:
    """(header, rows as lists of floats where possible)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows: List[list] = []
        for raw in reader:
            parsed = []
            for cell in raw:
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(cell)
            rows.append(parsed)
    return header, rows


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, payload: dict) -> None:
    body = dict(payload)
    body.setdefault("schema_version", SCHEMA_VERSION)
    with open(path, "w") as fh:
        json.dump(_jsonable(body), fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(config: dict) -> str:
    canonical = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


class ManifestTimer:
    """Collects the run manifest: resolved config, hash, seed, wall time."""

    def __init__(self, command: str, config: dict, seed):
        self.command = command
        self.config = config
        self.seed = seed
        self._start = time.monotonic()

    def write(self, out_dir) -> Path:
        from . import __version__

        path = Path(out_dir) / "manifest.json"
        write_json(
            path,
            {
                "command": self.command,
                "config": self.config,
                "config_hash": config_hash(self.config),
                "seed": self.seed,
                "wall_time_seconds": time.monotonic() - self._start,
                "version": __version__,
            },
        )
        return path
