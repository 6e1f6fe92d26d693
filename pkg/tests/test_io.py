from __future__ import annotations

import json

import numpy as np
import pytest

from fgf.fracops import Boundary, FieldGrid
from fgf.io import read_grid_csv, read_pgm, write_grid_csv, write_image, write_json
from fgf.sampler import RunConfig, sample_fgf_spectral


@pytest.mark.parametrize("d,n", [(1, 64), (2, 16), (3, 6)])
def test_csv_round_trip_is_bit_exact(tmp_path, d, n):
    grid = sample_fgf_spectral(RunConfig(seed=5, n=n, d=d, box_length=2.5), 0.8)
    path = write_grid_csv(tmp_path / "g.csv", grid, "0.8", 5)
    back, meta = read_grid_csv(path)
    assert np.array_equal(back.values, grid.values)
    assert back.spacing == grid.spacing
    assert meta == {"d": d, "n": n, "box": 2.5, "s": "0.8", "seed": "5"}


def test_csv_layout_has_x1_fastest(tmp_path):
    vals = np.arange(16.0).reshape(4, 4)
    path = write_grid_csv(tmp_path / "g.csv", FieldGrid(vals, 0.25, Boundary.TORUS), 1, 0)
    lines = path.read_text().splitlines()
    assert lines[0] == "# fgf-grid d=2 n=4 box=1.0 s=1 seed=0"
    # first row is x_2 = 0 with x_1 running
    assert [float(v) for v in lines[1].split(",")] == list(vals[:, 0])


def test_csv_rejects_foreign_files(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n")
    with pytest.raises(ValueError):
        read_grid_csv(bad)
    short = tmp_path / "short.csv"
    short.write_text("# fgf-grid d=1 n=4 box=1.0 s=1 seed=0\n1,2,3\n")
    with pytest.raises(ValueError):
        read_grid_csv(short)


@pytest.mark.parametrize("bits", [8, 16])
def test_pgm_round_trip_and_sidecar(tmp_path, bits):
    vals = np.add.outer(np.arange(8.0), 10 * np.arange(5.0))
    path = write_image(tmp_path / "f.pgm", FieldGrid(vals, 0.1, Boundary.TORUS), bits)
    pix = read_pgm(path)
    top = 2**bits - 1
    assert pix.shape == (5, 8)
    assert pix.min() == 0 and pix.max() == top
    expected = np.rint((vals.T - vals.min()) / (vals.max() - vals.min()) * top)
    assert np.array_equal(pix.astype(float), expected)
    side = json.loads((tmp_path / "f.pgm.json").read_text())
    assert side["bits"] == bits and side["min"] == 0.0 and side["max"] == 47.0


def test_png_output(tmp_path):
    pil = pytest.importorskip("PIL.Image")
    vals = np.random.default_rng(0).standard_normal((16, 8))
    path = write_image(tmp_path / "f.png", FieldGrid(vals, 0.1, Boundary.TORUS))
    with pil.open(path) as img:
        assert img.size == (16, 8)


def test_image_argument_errors(tmp_path):
    grid = FieldGrid(np.zeros((4, 4)), 0.25, Boundary.TORUS)
    with pytest.raises(ValueError):
        write_image(tmp_path / "f.pgm", grid, bits=12)
    with pytest.raises(ValueError):
        write_image(tmp_path / "f.tif", grid)
    with pytest.raises(ValueError):
        write_image(tmp_path / "f.pgm", FieldGrid(np.zeros((2, 2, 2)), 0.5, Boundary.TORUS))
    # a constant field maps to black without dividing by zero
    write_image(tmp_path / "c.pgm", grid)
    assert np.all(read_pgm(tmp_path / "c.pgm") == 0)


def test_json_handles_numpy_and_nonfinite(tmp_path):
    path = write_json(tmp_path / "m.json", {"a": np.arange(3), "b": np.float64(0.5), "c": float("inf"), 1: (2, 3)})
    data = json.loads(path.read_text())
    assert data == {"a": [0, 1, 2], "b": 0.5, "c": "inf", "1": [2, 3]}
    assert not list(tmp_path.glob(".*tmp"))
