"""File formats: CSV grids, grayscale images with a normalization sidecar, JSON manifests.

All writers go through a temporary file in the target directory followed by
``os.replace``, so a reader never sees a partial file.
"""

from __future__ import annotations

import contextlib
import json
import os
import platform
import re
import tempfile
from pathlib import Path

import numpy as np
import scipy

from .fracops import Boundary, FieldGrid

HEADER_RE = re.compile(r"^# fgf-grid d=(\d+) n=(\d+) box=(\S+) s=(\S+) seed=(\S+)$")


@contextlib.contextmanager
def atomic_open(path, mode: str = "w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


# -- CSV grids ----------------------------------------------------------------


def write_grid_csv(path, grid: FieldGrid, s, seed) -> Path:
    """Header line, then one line per x_1 row (x_1 varies fastest), 17 significant digits."""
    vals = grid.values
    header = f"# fgf-grid d={grid.d} n={grid.n} box={grid.box_length!r} s={s} seed={seed}"
    rows = vals.reshape(vals.shape[0], -1, order="F").T
    with atomic_open(path) as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    return Path(path)


def read_grid_csv(path) -> tuple[FieldGrid, dict]:
    """Inverse of :func:`write_grid_csv`; returns the grid and the header fields."""
    with open(path) as fh:
        header = fh.readline().strip()
        m = HEADER_RE.match(header)
        if m is None:
            raise ValueError(f"not an fgf grid file: {header!r}")
        d, n = int(m.group(1)), int(m.group(2))
        box = float(m.group(3))
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    flat = np.array(rows, dtype=float).ravel()
    if flat.size != n**d:
        raise ValueError(f"expected {n**d} values, found {flat.size}")
    values = flat.reshape((n,) * d, order="F")
    meta = {"d": d, "n": n, "box": box, "s": m.group(4), "seed": m.group(5)}
    return FieldGrid(values, box / n, Boundary.TORUS), meta


# -- images -------------------------------------------------------------------


def _normalize(values: np.ndarray, bits: int) -> tuple[np.ndarray, float, float]:
    lo, hi = float(values.min()), float(values.max())
    top = 2**bits - 1
    scale = (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)
    return np.rint(scale * top).astype(">u2" if bits == 16 else np.uint8), lo, hi


def _image_array(grid: FieldGrid) -> np.ndarray:
    if grid.d == 1:
        return grid.values[None, :]
    if grid.d == 2:
        # rows are x_2, columns x_1
        return grid.values.T
    raise ValueError("images need d = 1 or 2")


def write_image(path, grid: FieldGrid, bits: int = 8) -> Path:
    """Min-max normalized grayscale image (PGM P5 or PNG by suffix) plus ``<path>.json``."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    path = Path(path)
    pixels, lo, hi = _normalize(_image_array(grid), bits)
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".pnm"):
        h, w = pixels.shape
        with atomic_open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n{2**bits - 1}\n".encode())
            fh.write(pixels.tobytes())
    elif suffix == ".png":
        try:
            from PIL import Image
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise RuntimeError("PNG output needs Pillow; use a .pgm path instead") from exc
        img = Image.fromarray(pixels.astype(np.uint16 if bits == 16 else np.uint8))
        with atomic_open(path, "wb") as fh:
            img.save(fh, format="PNG")
    else:
        raise ValueError(f"unknown image suffix {path.suffix!r} (use .pgm or .png)")
    sidecar = {"image": path.name, "bits": bits, "min": lo, "max": hi, "orientation": "rows x_2, columns x_1"}
    write_json(path.with_name(path.name + ".json"), sidecar)
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError("not a binary PGM file")
    w, h, top = (int(g) for g in m.groups())
    dtype = ">u2" if top > 255 else np.uint8
    return np.frombuffer(data[m.end() :], dtype=dtype).reshape(h, w)


# -- JSON ---------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path, payload) -> Path:
    with atomic_open(path) as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return Path(path)


def versions() -> dict:
    from . import __version__

    return {
        "fgf": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
