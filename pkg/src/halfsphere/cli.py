"""Command-line driver: phantom, forward, reconstruct, validate, decay-scan.

Grids are always built from ``--dims`` and ``--dx`` with dy = dx^2.  The
object grid covers [-nx dx/2, nx dx/2) in every x-axis and (0, ny dy] in y.
Paraboloid-picture data (methods fourier, backprojection, radon) live on a
taller grid with the same lattice covering [-Y, Y + R^2], Y the object height
and R the x half-width, so P F is not clipped.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import io
from .grid import Bump, Field, GridError, GridSpec, Phantom, sample_phantom
from .harness import decay_scan, max_error, rel_error, run_suite, validation_suite

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_IO = 0, 1, 2, 3

METHODS = ("fourier", "backprojection", "spherical", "explicit2d", "explicit3d", "radon")
PARABOLOID_METHODS = ("fourier", "backprojection", "radon")
PHANTOMS = ("empty", "single", "random", "tutorial")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "validate"
    n: int = 1
    dims: tuple[int, ...] = (128, 47)
    dx: float = 1.5
    phantom: str = "single"
    width: float | None = None
    center: tuple[float, ...] | None = None
    bumps: int = 3
    method: str = "fourier"
    data: str = "auto"
    rolloff: float | None = 0.8
    umax: float | None = None
    directions: int = 180
    seed: int = 0
    out: str | None = None
    truth: str | None = None
    input: str | None = None
    threads: int | None = None
    pgm: bool = False
    x0: tuple[float, ...] | None = None
    y0: float | None = None
    radii: tuple[float, ...] = (1.0, 200.0, 64.0)
    corrupt_multiplier: bool = False

    def validate(self) -> None:
        if self.n not in (1, 2):
            raise UsageError("--n must be 1 or 2")
        if self.method not in METHODS:
            raise UsageError(f"--method must be one of {', '.join(METHODS)}")
        need = {"explicit2d": 1, "explicit3d": 2, "radon": 1}.get(self.method)
        if need is not None and self.n != need:
            raise UsageError(f"method {self.method} needs n = {need}")
        if self.phantom not in PHANTOMS:
            raise UsageError(f"--phantom must be one of {', '.join(PHANTOMS)}")
        if self.data not in ("auto", "radon"):
            raise UsageError("--data must be auto or radon")
        if self.dx <= 0:
            raise UsageError("--dx must be positive")
        if self.rolloff is not None and self.rolloff <= 0:
            raise UsageError("--rolloff must be positive (or 'none')")
        if self.directions < 2:
            raise UsageError("--directions must be at least 2")

    def object_grid(self) -> GridSpec:
        d = tuple(self.dims)
        if len(d) == 1:
            d = d * 2
        if len(d) == 2 and self.n == 2:
            d = (d[0], d[0], d[1])
        if len(d) != self.n + 1:
            raise UsageError(f"--dims needs 1, 2 or n+1 entries, got {len(d)}")
        if len(set(d[:-1])) > 1:
            raise UsageError("all x-axes must have the same size")
        dy = self.dx * self.dx
        nx = d[0]
        try:
            return GridSpec(self.n, d, (self.dx,) * self.n + (dy,), (-0.5 * nx * self.dx,) * self.n + (dy,))
        except GridError as e:
            raise UsageError(str(e)) from e

    def data_grid(self) -> GridSpec:
        g = self.object_grid()
        if self.method not in PARABOLOID_METHODS:
            return g
        Y = g.upper(self.n)
        R = 0.5 * g.dims[0] * self.dx
        return GridSpec.paraboloid(self.n, g.dims[0], self.dx, -Y, Y + R * R)


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).replace(",", " ").split())


def _opt_float(text: str) -> float | None:
    return None if str(text).lower() in ("none", "off", "") else float(text)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


CONVERTERS = {
    "n": int, "dims": _ints, "dx": float, "phantom": str, "width": float, "center": _floats,
    "bumps": int, "method": str, "data": str, "rolloff": _opt_float, "umax": _opt_float,
    "directions": int, "seed": int, "out": str, "truth": str, "input": str, "threads": int,
    "pgm": _bool, "x0": _floats, "y0": float, "radii": _floats, "corrupt_multiplier": _bool,
}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, quotes around values are dropped."""
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONVERTERS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        value = value.strip("\"'")
        if value.startswith("[") and value.endswith("]"):
            value = value[1:-1]
        try:
            out[key] = CONVERTERS[key](value)
        except ValueError as e:
            raise UsageError(f"{path}:{lineno}: {e}") from e
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--n", type=int, help="number of x-dimensions (1 or 2)")
    common.add_argument("--dims", type=_ints, help="nx,ny (or nx,nx,ny); dy is dx^2")
    common.add_argument("--dx", type=float, help="x spacing")
    common.add_argument("--method", help="|".join(METHODS))
    common.add_argument("--rolloff", type=_opt_float, help="window cut as a fraction of Nyquist, or 'none'")
    common.add_argument("--umax", type=_opt_float, help="truncation radius of the adjoint sums")
    common.add_argument("--directions", type=int, help="number of Radon directions")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path")
    common.add_argument("--truth", help="reference field for error reports")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")

    p = _Parser(prog="halfsphere", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sp = sub.add_parser("phantom", parents=[common], help="write a sampled phantom")
    sp.add_argument("--phantom", help="|".join(PHANTOMS))
    sp.add_argument("--width", type=float)
    sp.add_argument("--center", type=_floats)
    sp.add_argument("--bumps", type=int, help="bump count for the random phantom")
    sp.add_argument("--pgm", action="store_const", const=True, help="also write PGM previews")
    sp = sub.add_parser("forward", parents=[common], help="simulate data from a field")
    sp.add_argument("input")
    sp.add_argument("--data", help="auto (by method) or radon (sinogram of the field)")
    sp = sub.add_parser("reconstruct", parents=[common], help="invert data")
    sp.add_argument("input")
    sp.add_argument("--pgm", action="store_const", const=True)
    sp = sub.add_parser("validate", parents=[common], help="run the invariant suite")
    sp.add_argument("--corrupt-multiplier", action="store_const", const=True, help=argparse.SUPPRESS)
    sp = sub.add_parser("decay-scan", parents=[common], help="|v| |P F| along a parabola")
    sp.add_argument("input")
    sp.add_argument("--x0", type=_floats)
    sp.add_argument("--y0", type=float)
    sp.add_argument("--radii", type=_floats, help="start,stop,count")
    return p


def make_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if ns.command is None:
        raise UsageError("a command is required: phantom, forward, reconstruct, validate, decay-scan")
    values = {}
    if ns.config:
        try:
            values.update(read_config_file(ns.config))
        except OSError as e:
            raise OSError(f"cannot read config {ns.config}: {e}") from e
    for k, v in vars(ns).items():
        if k not in ("config", "command") and v is not None:
            values[k] = v
    known = {f.name for f in fields(RunConfig)}
    cfg = RunConfig(command=ns.command, **{k: v for k, v in values.items() if k in known})
    cfg.validate()
    return cfg


def _set_threads(cfg: RunConfig) -> None:
    if cfg.threads is None:
        return
    if cfg.threads < 1:
        raise UsageError("--threads must be >= 1")
    import numba

    numba.set_num_threads(min(cfg.threads, numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# phantoms
# ---------------------------------------------------------------------------

def tutorial_phantom(grid: GridSpec) -> Phantom:
    """Three bumps placed by fractions of the object box (x half-width R, height Y)."""
    n = grid.n
    R = 0.5 * grid.dims[0] * grid.dx
    Y = grid.upper(n)
    spec = [((-0.25, 0.10), 0.42, 0.12, 1.0),
            ((0.20, -0.15), 0.50, 0.14, 0.7),
            ((0.05, 0.20), 0.36, 0.10, -0.5)]
    bumps = [Bump(tuple(R * np.array(xs[:n])) + (Y * yf,), amp, Y * wf) for xs, yf, wf, amp in spec]
    return Phantom(tuple(bumps))


def make_phantom(cfg: RunConfig, grid: GridSpec) -> Phantom:
    n = grid.n
    Y = grid.upper(n)
    R = 0.5 * grid.dims[0] * grid.dx
    try:
        if cfg.phantom == "empty":
            return Phantom()
        if cfg.phantom == "tutorial":
            return tutorial_phantom(grid)
        w = cfg.width if cfg.width is not None else Y / 7.0
        if cfg.phantom == "single":
            c = cfg.center if cfg.center is not None else (0.0,) * n + (3.05 * w,)
            if len(c) != n + 1:
                raise UsageError(f"--center needs {n + 1} coordinates")
            return Phantom.single(c, w)
        rng = np.random.default_rng(cfg.seed)
        return Phantom.random(n, cfg.bumps, rng, 0.4 * R, (0.25 * Y, 0.5 * Y), (0.5 * w, w))
    except ValueError as e:
        raise UsageError(str(e)) from e


def _compact(f: Field) -> Field:
    # samples below 1e-16 of the peak are dropped so supports are finite
    peak = float(np.max(np.abs(f.values))) if f.values.size else 0.0
    if peak == 0.0:
        return f
    v = np.where(np.abs(f.values) < 1e-16 * peak, 0.0, f.values)
    return Field(f.grid, v, half_space=f.half_space)


# ---------------------------------------------------------------------------
# embedding between the object grid and the paraboloid data grid
# ---------------------------------------------------------------------------

def _row_offset(small: GridSpec, big: GridSpec) -> int:
    if small.dims[:-1] != big.dims[:-1] or not np.allclose(small.spacing, big.spacing, rtol=1e-12, atol=0) \
            or not np.allclose(small.origin[:-1], big.origin[:-1], rtol=0, atol=1e-9 * small.dx):
        raise GridError("grids do not share an x-lattice and spacing")
    j = (small.origin[-1] - big.origin[-1]) / big.dy
    j0 = int(round(j))
    if abs(j - j0) > 1e-6 or j0 < 0 or j0 + small.dims[-1] > big.dims[-1]:
        raise GridError("object grid is not a row block of the data grid")
    return j0


def embed(f: Field, big: GridSpec) -> Field:
    j0 = _row_offset(f.grid, big)
    v = np.zeros(big.dims)
    v[..., j0:j0 + f.grid.dims[-1]] = f.values
    return Field(big, v)


def crop(F: Field, small: GridSpec) -> Field:
    j0 = _row_offset(small, F.grid)
    return Field(small, F.values[..., j0:j0 + small.dims[-1]], half_space=True)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _require_out(cfg: RunConfig) -> Path:
    if not cfg.out:
        raise UsageError("--out is required")
    return Path(cfg.out)


def _emit(report: dict, cfg: RunConfig, path: Path | None) -> None:
    text = io.dump_json(report)
    if path is not None:
        io.dump_json(report, path)
    sys.stdout.write(text)


def cmd_phantom(cfg: RunConfig) -> int:
    out = _require_out(cfg)
    grid = cfg.object_grid()
    ph = make_phantom(cfg, grid)
    f = _compact(sample_phantom(ph, grid))
    io.write_field(out, f)
    if cfg.pgm:
        io.export_pgm(f, out.with_suffix(".pgm"))
    report = {"command": "phantom", "dims": list(grid.dims), "spacing": list(grid.spacing),
              "bumps": [asdict(b) for b in ph.bumps], "max": float(np.max(f.values)) if f.values.size else 0.0}
    _emit(report, cfg, None)
    return EXIT_OK


def _check_object(f: Field, cfg: RunConfig) -> None:
    if f.n != cfg.n:
        raise UsageError(f"field has n = {f.n}, config says n = {cfg.n}")


def cmd_forward(cfg: RunConfig) -> int:
    from .operators import parab_forward, sphere_means_forward
    from .radon import default_directions, p_grid_for, radon_forward

    out = _require_out(cfg)
    f = io.read_field(cfg.input)
    _check_object(f, cfg)
    if cfg.data == "radon":
        if f.n not in (1, 2):
            raise UsageError("radon data needs n = 1 or 2")
        dirs, w = default_directions(f.n, cfg.directions)
        p0, dp, count = p_grid_for(f.grid)
        s = radon_forward(f, dirs, p0, dp, count, weights=w)
        io.write_sinogram(out, s)
        kind = "sinogram"
    elif cfg.method in PARABOLOID_METHODS:
        G = parab_forward(embed(f, cfg.data_grid()), cfg.umax)
        io.write_field(out, G)
        kind = "paraboloid"
    else:
        if not f.half_space:
            raise UsageError("spherical means need a half-space field")
        io.write_field(out, sphere_means_forward(f))
        kind = "spherical"
    _emit({"command": "forward", "method": cfg.method, "data": kind}, cfg, None)
    return EXIT_OK


def reconstruct(cfg: RunConfig, data) -> Field:
    """Run the configured inversion route; returns the field on the object grid."""
    from .inversion import invert_P_backprojection, invert_S, invert_S_2d, invert_S_3d
    from .radon import Sinogram, invert_P_radon, radon_invert
    from .spectral import invert_P_fourier

    obj = cfg.object_grid()
    if isinstance(data, Sinogram):
        if data.n != cfg.n:
            raise UsageError("sinogram dimension does not match --n")
        return Field(obj, radon_invert(data, obj, rolloff=cfg.rolloff).values)
    if data.n != cfg.n:
        raise UsageError(f"data has n = {data.n}, config says n = {cfg.n}")
    m = cfg.method
    if m in PARABOLOID_METHODS:
        if m == "fourier":
            F = invert_P_fourier(data, rolloff=cfg.rolloff)
        elif m == "backprojection":
            F = invert_P_backprojection(data, cfg.umax)
        else:
            F = invert_P_radon(data, directions=cfg.directions, rolloff=cfg.rolloff)
        return crop(F, obj)
    if m == "spherical":
        return invert_S(data, cfg.umax)
    if m == "explicit2d":
        return invert_S_2d(data, cfg.umax)
    return invert_S_3d(data, cfg.umax)


def cmd_reconstruct(cfg: RunConfig) -> int:
    out = _require_out(cfg)
    data = io.read_any(cfg.input)
    t0 = time.perf_counter()
    f = reconstruct(cfg, data)
    runtime = time.perf_counter() - t0
    io.write_field(out, f)
    if cfg.pgm:
        io.export_pgm(f, out.with_suffix(".pgm"))
    report = {"command": "reconstruct", "method": cfg.method, "n": cfg.n, "dims": list(f.grid.dims),
              "rolloff": cfg.rolloff, "umax": cfg.umax, "runtime_s": runtime}
    if cfg.truth:
        truth = io.read_field(cfg.truth)
        if truth.grid != f.grid:
            raise UsageError("truth field is not on the reconstruction grid")
        report["rel_error"] = rel_error(f, truth)
        report["max_error"] = max_error(f, truth)
    _emit(report, cfg, out.with_suffix(".json"))
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    ok, checks = run_suite(lambda: validation_suite(cfg.seed, cfg.corrupt_multiplier))
    report = {"command": "validate", "seed": cfg.seed, "pass": ok, "checks": checks}
    _emit(report, cfg, Path(cfg.out) if cfg.out else None)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_decay_scan(cfg: RunConfig) -> int:
    out = _require_out(cfg)
    F = io.read_field(cfg.input)
    _check_object(F, cfg)
    if len(cfg.radii) != 3:
        raise UsageError("--radii takes start,stop,count")
    a, b, k = cfg.radii
    radii = np.linspace(a, b, int(k))
    x0 = cfg.x0 if cfg.x0 is not None else (0.0,) * F.n
    y0 = cfg.y0 if cfg.y0 is not None else float(F.grid.upper(F.n))
    scan = decay_scan(F, x0, y0, radii)
    scan.to_csv(out)
    tail = scan.tail(8.0)
    report = {"command": "decay-scan", "bound": scan.bound, "support_radius": scan.support_radius,
              "support_height": scan.support_height,
              "tail_max": float(tail.max()) if tail.size else None}
    _emit(report, cfg, None)
    return EXIT_OK


COMMANDS = {"phantom": cmd_phantom, "forward": cmd_forward, "reconstruct": cmd_reconstruct,
            "validate": cmd_validate, "decay-scan": cmd_decay_scan}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = make_config(argv)
        _set_threads(cfg)
        return COMMANDS[cfg.command](cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, io.FormatError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        # grid or method mismatches surfaced by the library
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
