"""Flat binary / CSV tensor serialization.

Binary layout (little-endian): rank as one 8-byte unsigned integer, the
extents as 8-byte unsigned integers, then the float64 entries in row-major
order. CSV output keeps 17 significant digits so round-trips are exact.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DimensionError


def save_tensor(path, array):
    array = np.ascontiguousarray(np.asarray(array, dtype=np.float64))
    with open(path, "wb") as fh:
        header = np.array([array.ndim, *array.shape], dtype="<u8")
        fh.write(header.tobytes())
        fh.write(array.astype("<f8").tobytes())


def load_tensor(path):
    raw = Path(path).read_bytes()
    rank = int(np.frombuffer(raw[:8], dtype="<u8")[0])
    shape = tuple(int(x) for x in np.frombuffer(raw[8:8 + 8 * rank], dtype="<u8"))
    data = np.frombuffer(raw[8 + 8 * rank:], dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise DimensionError(
            f"tensor file {path} is truncated: header says {shape}, "
            f"payload holds {data.size} entries")
    return data.reshape(shape).copy()


def save_csv(path, array):
    array = np.asarray(array, dtype=np.float64)
    if array.ndim != 2:
        raise DimensionError(f"CSV export needs a 2-D tensor, got shape {array.shape}")
    with open(path, "w") as fh:
        for row in array:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    return np.asarray(rows, dtype=np.float64)


def sha256_file(path):
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
