"""Command-line front end: ``fgf <subcommand> [flags]``.

Every invocation writes a JSON manifest holding the resolved configuration,
package versions, seeds and derived constants. Flags override values read
from ``--config``. Exit status is 0 on success, 1 for invalid input and 2
when a numerical routine fails (the error class is named in the manifest).
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import sys
from pathlib import Path

import numpy as np

from . import decompose, dfgf, green, kernels, sampler
from .errors import FGFError
from .io import atomic_open, versions, write_grid_csv, write_image, write_json
from .params import FieldSpec, as_exact


class UsageError(Exception):
    """Invalid command line or configuration (exit status 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _point(text) -> np.ndarray:
    if isinstance(text, (list, tuple)):
        return np.asarray(text, float)
    return np.asarray(_floats(text), float)


def _pairs(text) -> list[tuple[np.ndarray, np.ndarray]]:
    """``"a:b;c:d"`` (points written with commas inside a pair) or a JSON list."""
    if isinstance(text, list):
        return [(_point(a), _point(b)) for a, b in text]
    out = []
    for item in str(text).split(";"):
        if item.strip():
            a, b = item.split(":")
            out.append((_point(a), _point(b)))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fgf", description="Fractional Gaussian field toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, stochastic=False):
        sp.add_argument("--config", help="JSON run configuration; flags override it")
        sp.add_argument("--manifest", help="manifest path (default derived from --out)")
        sp.add_argument("--out-dir", dest="out_dir", help="directory for default outputs")
        if stochastic:
            sp.add_argument("--seed", type=int)
        return sp

    sp = common(sub.add_parser("sample", help="spectral torus sample"), True)
    sp.add_argument("--d", type=int)
    sp.add_argument("--s", type=str)
    sp.add_argument("--n", type=int)
    sp.add_argument("--box", type=float)
    sp.add_argument("--out", help="CSV grid path")
    sp.add_argument("--png", help="grayscale image path (.png or .pgm)")
    sp.add_argument("--bits", type=int, choices=(8, 16))
    sp.add_argument("--index", type=int, help="substream index")

    sp = common(sub.add_parser("kernel", help="whole-space covariance kernel"))
    sp.add_argument("--d", type=int)
    sp.add_argument("--s", type=str)
    sp.add_argument("--r", type=str, help="distance(s), comma separated")

    sp = common(sub.add_parser("green", help="unit-ball Green's function"))
    sp.add_argument("--mode", choices=("int", "frac", "composed"))
    sp.add_argument("--d", type=int)
    sp.add_argument("--s", type=str)
    sp.add_argument("--x", type=str, help="point, comma separated coordinates")
    sp.add_argument("--y", type=str)
    sp.add_argument("--radius", type=float)
    sp.add_argument("--constant", choices=green.CONSTANT_CHOICES)
    sp.add_argument("--rtol", type=float)

    sp = common(sub.add_parser("dfgf", help="discrete fractional Gaussian field"), True)
    sp.add_argument("--action", choices=("assemble", "sample", "walk"))
    sp.add_argument("--d", type=int)
    sp.add_argument("--s", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--kind", choices=("ball", "box"))
    sp.add_argument("--size", type=float)
    sp.add_argument("--offset", type=float)
    sp.add_argument("--draws", type=int)
    sp.add_argument("--walks", type=int)
    sp.add_argument("--start", type=str, help="walk start site")
    sp.add_argument("--out", help="CSV output path")

    sp = common(sub.add_parser("converge", help="DFGF to continuum convergence table"))
    sp.add_argument("--d", type=int)
    sp.add_argument("--s", type=float)
    sp.add_argument("--deltas", type=str)
    sp.add_argument("--pairs", type=str, help='probe pairs "a:b;c:d"')
    sp.add_argument("--out", help="CSV table path")

    sp = common(sub.add_parser("decompose", help="harmonic / zero-boundary split on a line"), True)
    sp.add_argument("--s", type=str)
    sp.add_argument("--n", type=int, help="number of lattice points in (-1, 1)")
    sp.add_argument("--inner", type=float, help="D = {|x| < inner}")
    sp.add_argument("--core", type=float, help="core distance for the residual")
    sp.add_argument("--out", help="CSV output path")

    sp = common(sub.add_parser("spherical", help="spherical-average kernel"))
    sp.add_argument("--d", type=int)
    sp.add_argument("--H", type=str)
    sp.add_argument("--k", type=int)
    sp.add_argument("--r1", type=float)
    sp.add_argument("--r2", type=float)

    sp = common(sub.add_parser("diagnose", help="structure-function Hurst diagnostic"), True)
    sp.add_argument("--H", type=float)
    sp.add_argument("--points", type=int)
    sp.add_argument("--draws", type=int)
    sp.add_argument("--lags", type=str)
    return p


DEFAULTS = {
    "sample": {"box": 1.0, "bits": 8, "index": 0},
    "kernel": {},
    "green": {"radius": 1.0, "constant": "corrected", "rtol": 1e-6},
    "dfgf": {"action": "assemble", "d": 1, "kind": "ball", "size": 1.0, "offset": 0.0, "draws": 1, "walks": 1000},
    "converge": {"d": 1},
    "decompose": {"inner": 0.5, "core": 0.1},
    "spherical": {"k": 0},
    "diagnose": {"points": 64, "draws": 10000, "lags": "1,2,3,4,5,6,7,8"},
}
REQUIRED = {
    "sample": ("d", "s", "n", "seed", "out"),
    "kernel": ("d", "s", "r"),
    "green": ("mode", "d", "s", "x", "y"),
    "dfgf": ("s", "delta"),
    "converge": ("s", "deltas", "pairs"),
    "decompose": ("s", "n", "seed"),
    "spherical": ("d", "H", "r1", "r2"),
    "diagnose": ("H", "seed"),
}
_META = {"config", "manifest", "out_dir", "command"}


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the config file and explicit flags (in that order)."""
    cmd = args.command
    opts = dict(DEFAULTS[cmd])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for key, val in vars(args).items():
        if key not in _META and val is not None:
            opts[key] = val
    missing = [k for k in REQUIRED[cmd] if opts.get(k) is None]
    if cmd == "dfgf" and opts.get("action") != "assemble" and opts.get("seed") is None:
        missing.append("seed")
    if missing:
        raise UsageError(f"{cmd}: missing required option(s): {', '.join('--' + m for m in missing)}")
    if "seed" in opts and opts["seed"] is not None:
        seed = opts["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise UsageError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return opts


def _out_path(opts: dict, name: str) -> Path:
    return Path(opts.get("out_dir") or ".") / name


def _manifest_path(args, opts: dict) -> Path:
    if args.manifest:
        return Path(args.manifest)
    if opts.get("out"):
        return Path(str(opts["out"]) + ".manifest.json")
    return _out_path({"out_dir": args.out_dir}, f"fgf-{args.command}.manifest.json")


# -- subcommands --------------------------------------------------------------


def _cmd_sample(opts: dict) -> dict:
    spec = FieldSpec(opts["d"], opts["s"])
    config = sampler.RunConfig(seed=opts["seed"], n=opts["n"], d=opts["d"], box_length=opts["box"])
    grid = sampler.sample_fgf_spectral(config, spec.s, opts["index"])
    files = [str(write_grid_csv(opts["out"], grid, opts["s"], opts["seed"]))]
    if opts.get("png"):
        files.append(str(write_image(opts["png"], grid, opts["bits"])))
        files.append(files[-1] + ".json")
    return {"files": files, "spec": repr(spec), "H": spec.H, "run_config": config.to_dict()}


def _cmd_kernel(opts: dict) -> dict:
    spec = FieldSpec(opts["d"], opts["s"])
    rs = _floats(opts["r"])
    values = [float(kernels.whole_space_kernel(spec, r)) + 0.0 for r in rs]
    for r, v in zip(rs, values):
        print(f"{r!r} {v!r}")
    derived = {"spec": repr(spec), "H": spec.H, "r": rs, "values": values}
    if spec.integer_H is None:
        derived["C"] = kernels.normalization_constant(spec.s, spec.d)
    else:
        derived["log_residue"] = kernels.log_residue(spec.integer_H, spec.d)
    return derived


def _cmd_green(opts: dict) -> dict:
    d, mode = opts["d"], opts["mode"]
    x, y = _point(opts["x"]), _point(opts["y"])
    if d == 1:
        x, y = float(x[0]), float(y[0])
    s = as_exact(opts["s"])
    if mode == "int":
        if isinstance(s, float) or s.denominator != 1:
            raise UsageError("--mode int needs an integer s")
        val = green.integer_ball_green(int(s), d, x, y, radius=opts["radius"], constant=opts["constant"])
    elif mode == "frac":
        val = green.fractional_ball_green(float(s), d, x, y, radius=opts["radius"])
    else:
        val = green.composed_ball_green(s, d, x, y, radius=opts["radius"], rtol=opts["rtol"], constant=opts["constant"])
    print(repr(float(val)))
    return {"value": float(val)}


def _write_rows(path, header, rows) -> str:
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
    return str(path)


def _cmd_dfgf(opts: dict) -> dict:
    dom = dfgf.LatticeDomain(opts["d"], opts["delta"], opts["kind"], opts["size"], opts["offset"])
    q = dfgf.assemble_precision(dom, opts["s"])
    out = {"n_sites": dom.n_sites, "dominance_margin": q.dominance_margin, "tail_bound": q.tail_bound,
           "truncation_radius": dom.truncation_radius}
    pts = dom.interior
    path = opts.get("out") or _out_path(opts, f"dfgf-{opts['action']}.csv")
    coords = [f"x{i + 1}" for i in range(dom.d)]
    if opts["action"] == "assemble":
        g = dfgf.dfgf_green(q).entries
        out["files"] = [_write_rows(path, coords + ["green_diagonal"], [[*map(float, p), float(v)] for p, v in zip(pts, np.diag(g))])]
    elif opts["action"] == "sample":
        config = sampler.RunConfig(seed=opts["seed"], ensemble_size=opts["draws"])
        draws = dfgf.sample_dfgf(q, config).samples
        rows = [[*map(float, p), *map(float, draws[:, i])] for i, p in enumerate(pts)]
        out["files"] = [_write_rows(path, coords + [f"draw{j}" for j in range(draws.shape[0])], rows)]
    else:
        config = sampler.RunConfig(seed=opts["seed"])
        start = _point(opts["start"]) if opts.get("start") is not None else pts[len(pts) // 2]
        est = dfgf.walk_green_estimator(dom, opts["s"], start, opts["walks"], config)
        exact = dfgf.dfgf_green(q).entries[dom.site_of(start)]
        rows = [[*map(float, p), float(m), float(e), float(t)] for p, m, e, t in zip(pts, est.mean, est.stderr, exact)]
        out["files"] = [_write_rows(path, coords + ["walk_mean", "walk_stderr", "matrix"], rows)]
        out.update(censored=est.censored, mean_steps=est.mean_steps, start=start)
    return out


def _cmd_converge(opts: dict) -> dict:
    deltas = _floats(opts["deltas"])
    pairs = _pairs(opts["pairs"])
    if opts["d"] == 1:
        pairs = [(float(a[0]), float(b[0])) for a, b in pairs]
    rows = dfgf.convergence_report(opts["s"], deltas, pairs, d=opts["d"])
    table = [[r.delta, float(dv), float(cv), float(abs(dv - cv) / abs(cv))]
             for r in rows for dv, cv in zip(r.discrete, r.continuum)]
    path = opts.get("out") or _out_path(opts, "converge.csv")
    buf = _stdio.StringIO()
    for r in rows:
        buf.write(f"{r.delta!r} {r.relative_error!r}\n")
    sys.stdout.write(buf.getvalue())
    return {"files": [_write_rows(path, ["delta", "discrete", "continuum", "relative_error"], table)],
            "max_relative_error": [r.relative_error for r in rows]}


def _cmd_decompose(opts: dict) -> dict:
    s = as_exact(opts["s"])
    sf = float(s)
    n = opts["n"]
    h = 2.0 / (n + 1)
    pts = -1 + h * np.arange(1, n + 1)
    cell = h if 0 < sf <= 0.5 else None
    cov = green.ball_covariance_matrix(s, 1, pts, cell=cell)
    config = sampler.RunConfig(seed=opts["seed"])
    field = cholesky_draw(cov, config)
    mask = np.abs(pts) < opts["inner"]
    split = decompose.condition_on_complement(cov, mask, field[~mask], config, index=1)
    out = {"n_points": n, "spacing": h, "cell": cell}
    if sf < 1 or sf == int(sf):
        out["residual_harmonic"] = decompose.s_harmonicity_residual(split, s, pts, h, opts["core"])
        out["residual_zero"] = decompose.s_harmonicity_residual(split, s, pts, h, opts["core"], part="zero")
    path = opts.get("out") or _out_path(opts, "decompose.csv")
    rows = [[float(x), float(f), float(g), float(z)] for x, f, g, z in
            zip(pts, field, split.harmonic_part, split.zero_part)]
    out["files"] = [_write_rows(path, ["x", "field", "harmonic", "zero"], rows)]
    return out


def cholesky_draw(cov: green.CovMatrix, config: sampler.RunConfig) -> np.ndarray:
    low = cov.factorize().factor
    return low @ config.rng(0).standard_normal(cov.size)


def _cmd_spherical(opts: dict) -> dict:
    res = decompose.spherical_coefficient_cov(opts["d"], opts["H"], opts["k"], opts["r1"], opts["r2"])
    print(f"integral {res.integral!r}")
    if res.closed is not None:
        print(f"closed {res.closed!r}")
    return {"integral": res.integral, "closed": res.closed, "shifted_dimension": opts["d"] + 2 * opts["k"]}


def _cmd_diagnose(opts: dict) -> dict:
    H = opts["H"]
    m = opts["points"]
    spec = FieldSpec(1, H + 0.5)
    config = sampler.RunConfig(seed=opts["seed"], ensemble_size=opts["draws"])
    pts = np.arange(1, m + 1) / m
    ens = sampler.sample_fgf_exact(spec, pts, "PinnedAtZero", config)
    lags = np.asarray(_floats(opts["lags"])) / m
    sf = sampler.structure_function(ens, lags)
    skew, kurt = sampler.gaussianity_statistics(ens.samples[:, -1] / ens.samples[:, -1].std())
    print(f"hurst {sf.hurst!r}")
    return {"hurst_estimate": sf.hurst, "slope": sf.slope, "structure": sf.values,
            "lags": sf.lags, "skewness": skew, "excess_kurtosis": kurt}


COMMANDS = {
    "sample": _cmd_sample,
    "kernel": _cmd_kernel,
    "green": _cmd_green,
    "dfgf": _cmd_dfgf,
    "converge": _cmd_converge,
    "decompose": _cmd_decompose,
    "spherical": _cmd_spherical,
    "diagnose": _cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        opts = resolve(args)
    except UsageError as exc:
        print(f"fgf: error: {exc}", file=sys.stderr)
        return 1
    opts["out_dir"] = args.out_dir
    manifest = {"command": args.command, "options": opts, "versions": versions(), "status": "ok"}
    code = 0
    try:
        manifest["derived"] = COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"fgf: error: {exc}", file=sys.stderr)
        return 1
    except FGFError as exc:
        print(f"fgf: {type(exc).__name__}: {exc}", file=sys.stderr)
        manifest.update(status="failed", error=type(exc).__name__, message=str(exc))
        code = 2
    except (ValueError, TypeError) as exc:
        print(f"fgf: error: {exc}", file=sys.stderr)
        return 1
    write_json(_manifest_path(args, opts), manifest)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
