"""Field dumps, run manifests and small text formats.

SGF1 layout: one ASCII header line ``SGF1 <rank> <dims...> <components>``
followed by little-endian float64 samples, component-major then row-major.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import os
from pathlib import Path

import numpy as np

MAGIC = "SGF1"


def write_sgf(path, data: np.ndarray, components: int = 1) -> None:
    """Write samples of shape ``(components, *dims)`` (or ``dims`` if scalar)."""
    a = np.asarray(data, dtype="<f8")
    if components == 1 and (a.ndim == 0 or a.shape[0] != 1):
        a = a[None]
    if a.shape[0] != components:
        raise ValueError(f"leading axis {a.shape[0]} != components {components}")
    dims = a.shape[1:]
    header = f"{MAGIC} {len(dims)} {' '.join(str(d) for d in dims)} {components}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(a).tobytes(order="C"))


def read_sgf(path) -> np.ndarray:
    """Read an SGF1 file; scalars come back as ``dims``, vectors as ``(c, *dims)``."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        payload = fh.read()
    if not header or header[0] != MAGIC:
        raise ValueError(f"{path}: not an SGF1 file")
    rank = int(header[1])
    dims = tuple(int(d) for d in header[2:2 + rank])
    comps = int(header[2 + rank])
    if len(header) != 3 + rank:
        raise ValueError(f"{path}: malformed SGF1 header")
    a = np.frombuffer(payload, dtype="<f8")
    if a.size != comps * int(np.prod(dims)):
        raise ValueError(f"{path}: expected {comps * int(np.prod(dims))} samples, found {a.size}")
    a = a.reshape((comps,) + dims).astype(float)
    return a[0] if comps == 1 else a


def _fmt(v) -> str:
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def manifest_text(params: dict) -> str:
    """Sorted ``key = value`` lines; floats are printed round-trip exact."""
    return "".join(f"{k} = {_fmt(params[k])}\n" for k in sorted(params))


def manifest_hash(params: dict) -> str:
    """Content hash of a manifest; the ``wallclock`` key does not participate."""
    body = manifest_text({k: v for k, v in params.items() if k != "wallclock"})
    return hashlib.sha256(body.encode()).hexdigest()[:16]


def write_manifest(path, params: dict) -> str:
    params = dict(params)
    h = manifest_hash(params)
    params["hash"] = h
    Path(path).write_text(manifest_text(params))
    return h


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_keyvalue(path, values: dict) -> None:
    Path(path).write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in values.items()))


def read_keyvalue(path) -> dict:
    """Numbers come back as floats, anything else as stripped text."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            try:
                out[k.strip()] = float(v)
            except ValueError:
                out[k.strip()] = v.strip()
    return out


def write_csv(path, header, rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    Path(path).write_text(buf.getvalue())


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
