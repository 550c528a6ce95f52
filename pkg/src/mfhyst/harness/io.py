"""File formats: columnar text, a binary event journal and versioned JSON."""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

JOURNAL_MAGIC = b"MFHJ"
JOURNAL_VERSION = 1
SCHEMA_PREFIX = "mfhyst"


def write_columns(path, columns: Mapping[str, np.ndarray], header: Optional[Mapping] = None) -> Path:
    """Whitespace-separated columns preceded by '# key: value' header lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    arrs = [np.asarray(columns[n]) for n in names]
    n = len(arrs[0]) if arrs else 0
    if any(len(a) != n for a in arrs):
        raise ValueError("columns differ in length")
    with path.open("w") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k}: {v}\n")
        fh.write("# " + " ".join(names) + "\n")
        for row in zip(*arrs):
            fh.write(" ".join(repr(float(x)) if not isinstance(x, (np.integer, int)) else str(int(x))
                              for x in row) + "\n")
    return path


def read_columns(path):
    """Return (header dict, {name: array})."""
    header, names, rows = {}, None, []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if ": " in body and names is None and not rows:
                    k, v = body.split(": ", 1)
                    header[k] = v
                else:
                    names = body.split()
            elif line.strip():
                rows.append([float(x) for x in line.split()])
    data = np.array(rows) if rows else np.zeros((0, len(names or [])))
    return header, {n: data[:, i] for i, n in enumerate(names or [])}


def write_journal(path, times: np.ndarray, k: np.ndarray, meta: Mapping) -> Path:
    """Binary event log: magic, u16 version, u32 header length, JSON header,
    u64 count, float64 times, int32 states; all little-endian."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = json.dumps(dict(meta), sort_keys=True).encode()
    times = np.asarray(times, dtype="<f8")
    k = np.asarray(k, dtype="<i4")
    if len(times) != len(k):
        raise ValueError("times and states differ in length")
    with path.open("wb") as fh:
        fh.write(JOURNAL_MAGIC)
        fh.write(struct.pack("<HI", JOURNAL_VERSION, len(head)))
        fh.write(head)
        fh.write(struct.pack("<Q", len(times)))
        fh.write(times.tobytes())
        fh.write(k.tobytes())
    return path


def read_journal(path):
    with Path(path).open("rb") as fh:
        if fh.read(4) != JOURNAL_MAGIC:
            raise ValueError("not an event journal")
        version, hlen = struct.unpack("<HI", fh.read(6))
        if version != JOURNAL_VERSION:
            raise ValueError(f"unsupported journal version {version}")
        meta = json.loads(fh.read(hlen))
        (n,) = struct.unpack("<Q", fh.read(8))
        times = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
        k = np.frombuffer(fh.read(4 * n), dtype="<i4").copy()
    return meta, times, k


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps_json(obj: Mapping, kind: str) -> str:
    body = {"schema": f"{SCHEMA_PREFIX}/{kind}/1", **obj}
    return json.dumps(body, sort_keys=True, indent=2, default=_default) + "\n"


def write_json(path, obj: Mapping, kind: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj, kind))
    return path
