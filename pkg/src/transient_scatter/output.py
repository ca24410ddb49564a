"""CSV/JSON writers and the binary grid checkpoint format.

Files are written to a temporary sibling and renamed into place.
"""
from __future__ import annotations

import contextlib
import json
import os
from pathlib import Path
import struct
import tempfile

import numpy as np

from . import __version__

_CHECKPOINT_MAGIC = b"TSCKPT\x00\x00"
_CHECKPOINT_VERSION = 1
# magic, version, n, x_min, x_max, t, hbar
_HEADER = struct.Struct("<8sIQdddd")


@contextlib.contextmanager
def atomic_open(path, mode: str = "w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": ""})) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def header_lines(config: dict | None) -> list[str]:
    lines = [f"# transient-scatter {__version__}"]
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True))
    return lines


def write_csv(path, columns, rows, config: dict | None = None) -> Path:
    with atomic_open(path) as fh:
        for line in header_lines(config):
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return Path(path)


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Columns and data of a file written by :func:`write_csv` (numeric only)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    columns = lines[0].strip().split(",")
    data = np.array([[float(v) for v in ln.strip().split(",")] for ln in lines[1:]])
    return columns, data.reshape(-1, len(columns))


def write_json(path, record: dict, config: dict | None = None) -> Path:
    payload = {"version": __version__, **record}
    if config is not None:
        payload["config"] = config
    with atomic_open(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return Path(path)


def save_checkpoint(path, state) -> Path:
    """Versioned little-endian dump of a grid state (complex as re/im pairs)."""
    g = state.grid
    with atomic_open(path, "wb") as fh:
        fh.write(_HEADER.pack(_CHECKPOINT_MAGIC, _CHECKPOINT_VERSION, g.n, g.x_min, g.x_max,
                              state.t, state.hbar))
        fh.write(np.ascontiguousarray(state.samples, dtype="<c16").tobytes())
    return Path(path)


def load_checkpoint(path):
    from .reference import GridState, SpatialGrid

    raw = Path(path).read_bytes()
    magic, version, n, x_min, x_max, t, hbar = _HEADER.unpack_from(raw)
    if magic != _CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a transient-scatter checkpoint")
    if version != _CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 16 * n:
        raise ValueError(f"{path}: truncated checkpoint")
    samples = np.frombuffer(body, dtype="<c16").astype(complex)
    return GridState(t, samples, SpatialGrid(x_min, x_max, n), hbar)


def write_snapshot(path, dist, config: dict | None = None) -> Path:
    """Momentum density snapshot with columns t, p, density."""
    rows = ((dist.t, p, r) for p, r in zip(dist.p, dist.density))
    return write_csv(path, ("t", "p", "density"), rows, config)


def write_poles(path, rows, config: dict | None = None) -> Path:
    return write_csv(path, ("re_p", "im_p", "abs_omega"),
                     ((z.value.real, z.value.imag, z.abs_omega) for z in rows), config)
