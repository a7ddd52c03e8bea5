"""Plain-text outputs: matrix triplet CSVs with JSON headers, density and report CSVs.

Floats are written with ``repr`` so a value round-trips exactly and the same
array always produces the same bytes.
"""
from __future__ import annotations

import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .partition import Partition
from .ulam import DiscreteDensity, StochasticMatrix


def fmt(x) -> str:
    """Deterministic text for a scalar."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (Fraction, Partition)):
        return str(obj)
    return obj


def dump_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def to_json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_matrix(P: StochasticMatrix, stem) -> tuple:
    """``<stem>.csv`` with ``row,col,value`` triplets (row-major order) and
    ``<stem>.json`` with the header."""
    stem = Path(stem)
    M = P.entries.tocsr()
    M.sort_indices()
    coo = M.tocoo()
    csv_path = write_csv(stem.with_suffix(".csv"), ("row", "col", "value"),
                         zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
    json_path = dump_json(P.header(), stem.with_suffix(".json"))
    return csv_path, json_path


def read_matrix(stem) -> StochasticMatrix:
    stem = Path(stem)
    hdr = json.loads(stem.with_suffix(".json").read_text())
    part = Partition.from_header(hdr["partition"])
    rows, cols, vals = [], [], []
    with stem.with_suffix(".csv").open() as fh:
        r = csv.reader(fh)
        next(r)
        for i, j, v in r:
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    n = part.n_states
    M = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return StochasticMatrix(part, M, hdr.get("threshold", 0.0))


def write_density(pi: DiscreteDensity, path) -> Path:
    return write_csv(path, ("index", "mass"), enumerate(pi.pi.tolist()))


def write_overlap_trace(trace, path, column: str = "overlap") -> Path:
    return write_csv(path, ("step", column), enumerate(np.asarray(trace).tolist()))
