"""Signal and dataset file formats.

CSV signal: header ``<axis names...>,re,im``, one row per grid point in
row-major order. Binary signal: little-endian ``u32`` axis count, one ``u32``
size per axis, then interleaved ``f64`` re/im pairs. Axis names are not part
of the binary layout; callers may pass them back in.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .signal import Axis, Grid, Signal


def fmt(x: float) -> str:
    """17 significant digits, the round-trip width for binary64."""
    return format(float(x), ".17g")


def signal_to_csv(z: Signal) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(z.grid.names) + ["re", "im"])
    flat = z.values.reshape(-1)
    for idx, v in zip(itertools.product(*(range(s) for s in z.shape)), flat):
        w.writerow([*idx, fmt(v.real), fmt(v.imag)])
    return buf.getvalue()


def signal_from_csv(text: str) -> Signal:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty signal CSV")
    header = rows[0]
    if len(header) < 3 or header[-2:] != ["re", "im"]:
        raise ValueError("signal CSV header must end with 're,im'")
    names = header[:-2]
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError("signal CSV has no data rows")
    idx = np.array([[int(c) for c in r[: len(names)]] for r in body], dtype=np.int64)
    vals = np.array([float(r[-2]) + 1j * float(r[-1]) for r in body])
    shape = tuple(int(m) + 1 for m in idx.max(axis=0))
    out = np.zeros(shape, dtype=np.complex128)
    seen = np.zeros(shape, dtype=bool)
    out[tuple(idx.T)] = vals
    seen[tuple(idx.T)] = True
    if not seen.all() or len(body) != out.size:
        raise ValueError("signal CSV does not cover every grid point exactly once")
    return Signal(Grid(tuple(Axis(n, s) for n, s in zip(names, shape))), out)


def signal_to_bytes(z: Signal) -> bytes:
    head = struct.pack("<I", len(z.shape)) + struct.pack(f"<{len(z.shape)}I", *z.shape)
    body = np.empty(2 * z.grid.size, dtype="<f8")
    flat = z.values.reshape(-1)
    body[0::2] = flat.real
    body[1::2] = flat.imag
    return head + body.tobytes()


def signal_from_bytes(data: bytes, names: Sequence[str] | None = None) -> Signal:
    if len(data) < 4:
        raise ValueError("truncated signal header")
    (k,) = struct.unpack_from("<I", data, 0)
    if k < 1 or len(data) < 4 + 4 * k:
        raise ValueError("truncated or invalid signal header")
    shape = struct.unpack_from(f"<{k}I", data, 4)
    count = int(np.prod(shape))
    offset = 4 + 4 * k
    if len(data) != offset + 16 * count:
        raise ValueError(f"expected {16 * count} payload bytes, got {len(data) - offset}")
    body = np.frombuffer(data, dtype="<f8", offset=offset)
    vals = (body[0::2] + 1j * body[1::2]).reshape(shape)
    if names is None:
        names = ["u"] if k == 1 else [f"axis{i}" for i in range(k)]
    return Signal(Grid(tuple(Axis(n, s) for n, s in zip(names, shape))), vals)


def read_signal(path: str | Path, names: Sequence[str] | None = None) -> Signal:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return signal_from_csv(path.read_text())
    return signal_from_bytes(path.read_bytes(), names)


def write_signal(z: Signal, path: str | Path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        path.write_text(signal_to_csv(z))
    else:
        path.write_bytes(signal_to_bytes(z))


def dataset_from_csv(text: str, axis: str = "u") -> list[Signal]:
    """One signal per row. Cells are parsed with :func:`complex`, so real
    numbers and ``a+bj`` literals are both accepted."""
    out = []
    for r in csv.reader(io.StringIO(text)):
        cells = [c.strip() for c in r if c.strip()]
        if not cells:
            continue
        try:
            vals = np.array([complex(c) for c in cells])
        except ValueError:
            if not out:
                continue  # header row
            raise
        out.append(Signal(Grid.line(len(vals), axis), vals))
    if not out:
        raise ValueError("dataset CSV contains no signals")
    return out


def read_dataset(path: str | Path, axis: str = "u") -> list[Signal]:
    """Load a dataset from CSV, or from a binary signal whose first axis
    indexes the samples."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return dataset_from_csv(path.read_text(), axis)
    z = signal_from_bytes(path.read_bytes())
    if len(z.shape) != 2:
        raise ValueError("binary dataset must have exactly two axes (sample, position)")
    return [Signal(Grid.line(z.shape[1], axis), row) for row in z.values]


def _json_value(v, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if v is None or isinstance(v, bool):
        return "null" if v is None else ("true" if v else "false")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v != v or v in (float("inf"), float("-inf")):
            return "null"
        s = fmt(v)
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v[k], indent, level + 1)}" for k in v]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        v = list(v)
        if not v:
            return "[]"
        if all(isinstance(e, (int, float, np.integer, np.floating, bool)) or e is None for e in v):
            return "[" + ", ".join(_json_value(e, indent, level + 1) for e in v) + "]"
        return "[\n" + ",\n".join(pad + _json_value(e, indent, level + 1) for e in v) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """Deterministic JSON: insertion-ordered keys, floats at 17 significant
    digits, non-finite floats as null."""
    return _json_value(obj, indent, 0) + "\n"
