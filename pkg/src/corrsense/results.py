"""Tabular sweep output: CSV table plus a JSON sidecar carrying provenance."""

import csv
from dataclasses import dataclass, field
import json
import math
from pathlib import Path

import numpy as np


@dataclass
class SweepResult:
    columns: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have unequal lengths {sorted(lengths)}")

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def column(self, name):
        return np.asarray(self.columns[name])

    def rows(self):
        names = list(self.columns)
        for r in range(len(self)):
            yield [self.columns[n][r] for n in names]

    def write_csv(self, path):
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(list(self.columns))
            for row in self.rows():
                w.writerow([_fmt(v) for v in row])
        return path

    def write_meta(self, path):
        path = Path(path)
        path.write_text(json.dumps(_jsonable(self.metadata), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path


def meta_path(csv_path):
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj
