"""Dataset writers and readers.  See FORMATS.md for byte-level layouts.

Floats are written with ``repr`` (shortest round-trip form) so datasets are
byte-identical across reruns of the same computation.
"""
from __future__ import annotations

import csv
import json
import math
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .field_core import MultiValuedSample

MAGIC = b"HHF1"


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    f = float(x)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return repr(f)


def _atomic_write(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_plain(obj):
    """Recursively convert numpy scalars/arrays and dataclass reports to JSON-ready values."""
    if hasattr(obj, "to_json") and callable(obj.to_json):
        return to_plain(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    return obj


def dumps_json(obj) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    _atomic_write(path, dumps_json(obj).encode())


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]):
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(fmt(v) if not isinstance(v, str) else v for v in r))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [r for r in rd]
    return header, rows


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

def write_field_csv(path, v, coords: dict):
    """Columns: node, one column per coordinate, lo, hi.  Empty values are nan,nan."""
    v = MultiValuedSample.coerce(v)
    names = list(coords)
    arrs = [np.broadcast_to(np.asarray(coords[k], dtype=float), v.shape).ravel() for k in names]
    lo, hi = v.lo.ravel(), v.hi.ravel()
    rows = ([i] + [a[i] for a in arrs] + [lo[i], hi[i]] for i in range(lo.size))
    write_csv(path, ["node"] + names + ["lo", "hi"], rows)


def read_field_csv(path):
    header, rows = read_csv(path)
    if header[0] != "node" or header[-2:] != ["lo", "hi"]:
        raise ValueError(f"{path}: not a field CSV (header {header})")
    data = np.array([[float(c) for c in r] for r in rows]) if rows else np.zeros((0, len(header)))
    coords = {name: data[:, j + 1] for j, name in enumerate(header[1:-2])}
    return MultiValuedSample(data[:, -2], data[:, -1]), coords


def field_to_bytes(v) -> bytes:
    v = MultiValuedSample.coerce(v)
    dims = v.shape
    head = MAGIC + struct.pack("<I", len(dims)) + struct.pack(f"<{len(dims)}I", *dims)
    return (head + np.ascontiguousarray(v.lo, dtype="<f8").tobytes()
            + np.ascontiguousarray(v.hi, dtype="<f8").tobytes())


def field_from_bytes(buf: bytes) -> MultiValuedSample:
    if buf[:4] != MAGIC:
        raise ValueError("bad magic: not an HHF1 field")
    (ndim,) = struct.unpack_from("<I", buf, 4)
    dims = struct.unpack_from(f"<{ndim}I", buf, 8)
    off = 8 + 4 * ndim
    count = int(np.prod(dims)) if ndim else 1
    need = off + 16 * count
    if len(buf) != need:
        raise ValueError(f"HHF1 payload has {len(buf)} bytes, expected {need}")
    lo = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(dims)
    hi = np.frombuffer(buf, dtype="<f8", count=count, offset=off + 8 * count).reshape(dims)
    return MultiValuedSample(lo.astype(float), hi.astype(float))


def write_field_binary(path, v):
    _atomic_write(path, field_to_bytes(v))


def read_field_binary(path) -> MultiValuedSample:
    return field_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# domain tables
# ---------------------------------------------------------------------------

def write_spectral_csv(path, coeffs):
    write_csv(path, ["k", "re", "im"],
              ([int(k), c.real, c.imag] for k, c in zip(coeffs.k, coeffs.coeffs)))


def write_trajectory_csv(path, traj):
    rows = []
    for i, t in enumerate(traj.times):
        for j in range(traj.gammas.shape[1]):
            rows.append([t, j, traj.gammas[i, j], traj.grad[i, j]])
    write_csv(path, ["t", "node", "gamma", "grad"], rows)


def write_trace_csv(path, trace):
    rows = []
    for i, t in enumerate(trace.t):
        for j in range(trace.values.shape[1]):
            rows.append([t, j, trace.values[i, j]])
    write_csv(path, ["t", "node", "ubar"], rows)


def write_jsonl(path, records: Iterable[dict]):
    lines = [json.dumps(to_plain(r), sort_keys=True, allow_nan=False) for r in records]
    _atomic_write(path, ("\n".join(lines) + ("\n" if lines else "")).encode())


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
