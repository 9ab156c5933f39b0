"""JSON artifacts written by the CLI

Reports are written with sorted keys and repr-exact floats, so two runs
with the same config and seed give identical files once the fields in
MASKED_FIELDS are removed.
"""

# Built-in
import contextlib
import enum
import json
import math
import pathlib
import time

# PyPI
import numpy as np

MASKED_FIELDS = ("timings",)


def jsonable(obj):
    """Convert numpy scalars, enums, paths and non-finite floats"""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        if math.isfinite(obj):
            return obj
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, pathlib.PurePath):
        return str(obj)
    return obj


def dumps(report: dict) -> str:
    return (
        json.dumps(jsonable(report), sort_keys=True, indent=2, allow_nan=False)
        + "\n"
    )


def write_json(path, report: dict) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report))
    return path


def masked(report: dict, fields=MASKED_FIELDS) -> dict:
    """Copy of report without the run-dependent fields"""
    return {k: v for k, v in report.items() if k not in fields}


class Stopwatch:
    """Wall-clock seconds per named stage"""

    def __init__(self):
        self.timings = dict()

    @contextlib.contextmanager
    def __call__(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - start
