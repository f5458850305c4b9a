"""Command-line front end: ``bbspectra <subcommand> [--config file.toml] [flags]``.

Settings come from built-in defaults, then the TOML file, then flags; each
layer overrides the previous one.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from . import __version__, io
from . import acceptance
from . import modes as hm
from . import nearly_spherical as ns
from . import optimizer as opt
from . import radial

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("bbspectra")


class UsageError(Exception):
    """Bad or missing configuration; exit code 2."""


# --- option table ---------------------------------------------------------


@dataclass(frozen=True)
class Option:
    name: str
    kind: str  # int, float, str, bool, floats, ints
    default: Any = None
    help: str = ""
    required: bool = False
    check: Callable[[Any], bool] | None = None
    why: str = "out of range"


def _positive(x) -> bool:
    return x > 0


def _all_nonnegative(xs) -> bool:
    return len(xs) > 0 and all(x >= 0 for x in xs)


PHYSICAL = [
    Option("mbar", "float", 1.0, "favorable weight value", check=_positive, why="must be positive"),
    Option("munder", "float", 1.0, "magnitude of the unfavorable weight", check=_positive, why="must be positive"),
]

OPTIONS: dict[str, list[Option]] = {
    "limit": [
        Option("dim", "int", None, "space dimension N", True, lambda n: n in (1, 2, 3), "must be 1, 2 or 3"),
        Option("mbar", "float", None, "favorable weight value", True, _positive, "must be positive"),
        Option("munder", "float", None, "magnitude of the unfavorable weight", True, _positive, "must be positive"),
        Option("R", "float", None, "outer radius (default: r0 + 12 decay lengths)", check=_positive,
               why="must be positive"),
        Option("tol", "float", 1e-12, "eigenvalue tolerance", check=_positive, why="must be positive"),
        Option("resolution", "int", radial.STEPS_PER_LENGTH, "steps per shortest length scale",
               check=lambda n: n >= 50, why="must be at least 50"),
    ],
    "modes": [
        Option("dim", "int", 2, "space dimension N", check=lambda n: n in (2, 3), why="must be 2 or 3"),
        *PHYSICAL,
        Option("lmax", "int", 6, "highest harmonic degree", check=lambda n: n >= 1, why="must be at least 1"),
        Option("resolution", "int", radial.STEPS_PER_LENGTH, "steps per shortest length scale",
               check=lambda n: n >= 50, why="must be at least 50"),
    ],
    "asymmetry": [
        *PHYSICAL,
        Option("mode", "ints", [2], "harmonic degree(s); one record per degree and amplitude",
               check=lambda xs: len(xs) > 0 and all(1 <= x <= 6 for x in xs), why="degrees must lie in 1..6"),
        Option("amps", "floats", [0.02, 0.04, 0.08], "amplitudes as fractions of r0",
               check=_all_nonnegative, why="must be non-negative"),
        Option("kind", "str", "cos", "angular profile: cos or sin", check=lambda s: s in ("cos", "sin"),
               why="must be cos or sin"),
        Option("grid", "int", 1024, "cells per side of the square box", check=lambda n: n >= 16,
               why="must be at least 16"),
        Option("R", "float", None, "half-width of the box (default: r0 + 8 decay lengths)", check=_positive,
               why="must be positive"),
        Option("noise", "bool", True, "estimate the grid-noise floor at half resolution"),
        Option("allow_coarse", "bool", False, "run grids coarser than r0/64 and rely on the noise floor"),
    ],
    "optimize": [
        *PHYSICAL,
        Option("domain", "str", None, "domain spec, e.g. disk:1.0 or ellipse:1.0,0.6", True),
        Option("eps", "float", None, "favorable measure as a fraction of |Omega|", True,
               lambda x: 0 < x < 1, "must lie in (0, 1)"),
        Option("grid", "int", 256, "cells across the longest side", check=lambda n: n >= 8,
               why="must be at least 8"),
        Option("init", "str", "incenter_ball", "incenter_ball or random",
               check=lambda s: s in ("incenter_ball", "random"), why="must be incenter_ball or random"),
        Option("seed", "int", 0, "seed for random initial sets", check=lambda n: n >= 0, why="must be >= 0"),
        Option("tol", "float", 1e-10, "relative eigenvalue change to stop at", check=_positive,
               why="must be positive"),
        Option("maxit", "int", 200, "maximum rearrangement steps", check=_positive, why="must be positive"),
    ],
    "sweep": [
        *PHYSICAL,
        Option("domain", "str", None, "domain spec, e.g. ellipse:1.0,0.6", True),
        Option("eps", "floats", None, "favorable measures as fractions of |Omega|", True,
               lambda xs: len(xs) > 0 and all(0 < x < 1 for x in xs), "must lie in (0, 1)"),
        Option("cells_per_radius", "float", 24.0, "grid cells across the radius of a ball of measure eps",
               check=lambda x: x >= 4, why="must be at least 4"),
        Option("continuation", "bool", True, "start each point from the previous optimum"),
        Option("maxit", "int", 200, "maximum rearrangement steps", check=_positive, why="must be positive"),
    ],
    "verify": [
        Option("quick", "bool", False, "run the fast subset"),
        Option("strict", "bool", False, "treat inconclusive criteria as failures"),
        Option("grid", "int", 1024, "grid for the asymmetry and shape-derivative criteria",
               check=lambda n: n >= 16, why="must be at least 16"),
        Option("cells_per_radius", "float", 24.0, "resolution of the ellipse sweep",
               check=lambda x: x >= 4, why="must be at least 4"),
    ],
}


def _convert(opt: Option, value):
    try:
        if opt.kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if opt.kind == "float":
            if isinstance(value, bool):
                raise ValueError
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
            return out
        if opt.kind == "bool":
            if not isinstance(value, bool):
                raise ValueError
            return value
        if opt.kind == "str":
            if not isinstance(value, str):
                raise ValueError
            return value
        if opt.kind in ("floats", "ints"):
            items = value.split(",") if isinstance(value, str) else list(value)
            conv = int if opt.kind == "ints" else float
            out = [conv(x) for x in items]
            if any(not math.isfinite(x) for x in out):
                raise ValueError
            return out
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for {opt.name}: {value!r}") from None
    raise AssertionError(opt.kind)


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bbspectra", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, options in OPTIONS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", type=Path, help="TOML file with settings for this subcommand")
        p.add_argument("--out", type=Path, default=None, help=f"output directory (default: runs/{command})")
        p.add_argument("-v", "--verbose", action="count", default=0)
        for o in options:
            flag = _flag(o.name)
            if o.kind == "bool":
                p.add_argument(flag, dest=o.name, action=argparse.BooleanOptionalAction, default=None, help=o.help)
            else:
                p.add_argument(flag, dest=o.name, default=None, help=o.help)
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, TOML and flags; validate every field."""
    options = {o.name: o for o in OPTIONS[command]}
    config = {name: o.default for name, o in options.items()}
    if args.config is not None:
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"malformed config: {exc}") from None
        data = data.get(command, data)
        unknown = sorted(set(data) - set(options) - {"out"})
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        if "out" in data and args.out is None:
            args.out = Path(data["out"])
        for k, v in data.items():
            if k != "out":
                config[k] = _convert(options[k], v)
    for name, o in options.items():
        value = getattr(args, name)
        if value is not None:
            config[name] = _convert(o, value)
    for name, o in options.items():
        value = config[name]
        if value is None:
            if o.required:
                raise UsageError(f"missing required setting {_flag(name)}")
            continue
        if o.check is not None and not o.check(value):
            raise UsageError(f"{_flag(name)} {o.why}")
    _cross_validate(command, config)
    return config


def _cross_validate(command: str, config: dict) -> None:
    if command == "limit" and config["R"] is not None:
        r0 = radial.unit_ball_radius(config["dim"])
        if config["R"] <= r0:
            raise UsageError(f"--R must exceed r0 = {r0:.6g}")
    if command in ("optimize", "sweep"):
        try:
            opt.DomainSpec.parse(config["domain"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None


# --- worker pool ----------------------------------------------------------


def pool_size() -> int:
    raw = os.environ.get("BBSPECTRA_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"BBSPECTRA_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def parallel_map(fn: Callable, items: list) -> list:
    """Map in a process pool; results follow input order."""
    n = min(pool_size(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# --- commands -------------------------------------------------------------


class Run:
    """Output directory bookkeeping and the manifest."""

    def __init__(self, command: str, config: dict, out: Path):
        self.command = command
        self.config = config
        self.hash = io.config_hash({"command": command, **config})
        self.out = out
        self.files: list[str] = []
        self.t0 = time.perf_counter()

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def json(self, name: str, obj: dict) -> None:
        io.write_json(self.path(name), {"config_hash": self.hash, **obj})

    def csv(self, name: str, header, rows) -> None:
        io.write_csv(self.path(name), header, rows, self.hash)

    def manifest(self, status: str, summary: dict | None = None) -> None:
        io.write_json(self.out / "manifest.json", {
            "command": self.command,
            "config": self.config,
            "config_hash": self.hash,
            "version": __version__,
            "wall_clock": time.perf_counter() - self.t0,
            "status": status,
            "records": self.files,
            "summary": summary or {},
        })


def cmd_limit(run: Run) -> int:
    c = run.config
    prof = radial.solve_limit_eigen(c["dim"], c["mbar"], c["munder"], c["R"], c["tol"], resolution=c["resolution"])
    prof.write_csv(run.path("profile.csv"), run.hash)
    rec = prof.record()
    try:
        rec["decay_rate"] = radial.decay_rate(prof)
    except ValueError:  # user R too short for a clean fit
        rec["decay_rate"] = None
    run.json("limit.json", rec)
    print(f"lambda0 = {io.fmt(prof.lambda0)}")
    run.manifest("ok", {"lambda0": prof.lambda0})
    return 0


def cmd_modes(run: Run) -> int:
    c = run.config
    prof = radial.solve_limit_eigen(c["dim"], c["mbar"], c["munder"], resolution=c["resolution"])
    table = hm.mode_table(prof, c["lmax"])
    table.write_csv(run.path("modes.csv"), run.hash)
    rec = table.record()
    rec["C"] = table.coercivity if c["lmax"] >= 2 else None
    run.json("modes.json", rec)
    for l in table.degrees:
        print(f"ell={l} g(r0)={io.fmt(table.g_r0(l))}")
    run.manifest("ok", {"C": rec["C"]})
    return 0


def _asym_task(task: tuple) -> dict:
    ell, kind, frac, R, grid, mbar, munder, noise, coarse = task
    prof = radial.solve_limit_eigen(2, mbar, munder)
    table = hm.mode_table(prof, 6)
    spec = ns.PerturbationSpec({(ell, kind): 1.0}, frac * prof.r0)
    nss = ns.normalize_volume_barycenter(spec)
    rec = ns.asymmetry_ratio(nss, R, grid, table, noise=noise, mbar=mbar, munder=munder, lambda0=prof.lambda0,
                             check_resolution=not coarse)
    out = rec.record()
    out.update(ell=ell, amplitude_fraction=frac)
    return out


def cmd_asymmetry(run: Run) -> int:
    c = run.config
    prof = radial.solve_limit_eigen(2, c["mbar"], c["munder"])
    table = hm.mode_table(prof, 6)
    R = c["R"] if c["R"] is not None else prof.r0 + 8 * prof.decay_length
    if R <= 1.5 * prof.r0:
        raise UsageError("--R must exceed 1.5 r0")
    tasks = [(ell, c["kind"], a, R, c["grid"], c["mbar"], c["munder"], c["noise"], c["allow_coarse"])
             for ell in c["mode"] for a in c["amps"]]
    for ell, kind, a, *_ in tasks:  # fail fast on bad amplitudes before any eigen-solve
        ns.normalize_volume_barycenter(ns.PerturbationSpec({(ell, kind): 1.0}, a * prof.r0))
    records = parallel_map(_asym_task, tasks)
    lower = table.single_mode_ratio(2)
    ceiling = 10 * max(table.single_mode_ratio(l) for l in range(2, 7))
    for r in records:
        r["in_band"] = bool(0.9 * lower <= r["ratio"] <= ceiling) if r["phi_l2"] > 0 else None
    cols = ["ell", "amplitude_fraction", "phi_l2", "lambdaA", "lambdaB", "gap", "ratio", "prediction",
            "noise_floor", "status"]
    run.csv("asymmetry.csv", cols, [[r[k] for k in cols] for r in records])
    run.json("asymmetry.json", {"R": R, "band": [0.9 * lower, ceiling], "records": records})
    for r in records:
        print(f"ell={r['ell']} s={r['amplitude_fraction']:g}r0 gap={r['gap']:.6e} ratio={r['ratio']:.5f} "
              f"prediction={r['prediction']:.5f} {r['status']}")
    inconclusive = sum(r["status"] != "ok" for r in records)
    run.manifest("ok" if not inconclusive else "inconclusive", {"inconclusive": inconclusive})
    return 0


def cmd_optimize(run: Run) -> int:
    c = run.config
    spec = opt.DomainSpec.parse(c["domain"])
    h = 2 * max(spec.half_extent) / c["grid"]
    domain = spec.grid(h)
    eps = c["eps"] * spec.volume
    res = opt.rearrangement_optimize(domain, eps, c["mbar"], c["munder"], init=c["init"], tol=c["tol"],
                                     maxit=c["maxit"], seed=c["seed"])
    lam0 = radial.solve_limit_eigen(2, c["mbar"], c["munder"]).lambda0
    diag = opt.diagnostics(res, lam0)
    io.write_pgm(run.path("mask.pgm"), res.mask, f"config_hash={run.hash}")
    run.json("mask.json", {"shape": list(domain.shape), "h": h, "lower": domain.lower, "rle": io.mask_to_rle(res.mask)})
    rec = diag.record()
    rec.update(lam=res.lam, eps=eps, status=res.trace.status, iterations=len(res.trace.records),
               monotone=res.trace.is_monotone())
    if spec.d_star is not None and spec.tag == "disk":
        rec["radial_prediction"] = opt.disk_prediction(eps, spec.d_star, c["mbar"], c["munder"])
    run.json("diagnostics.json", rec)
    run.csv("trace.csv", ["step", "lambda", "count", "changed"],
            [(i, r.lam, r.count, r.changed) for i, r in enumerate(res.trace.records)])
    print(f"lambda = {io.fmt(res.lam)} components = {diag.components4} status = {res.trace.status}")
    run.manifest("ok", {"lambda": res.lam, "components": diag.components4})
    return 0


def _sweep_task(task: tuple):
    spec_text, frac, cpr, mbar, munder, lam0, maxit = task
    return opt.sweep_point(opt.DomainSpec.parse(spec_text), frac, cpr, mbar, munder, lam0, maxit=maxit)


def cmd_sweep(run: Run) -> int:
    c = run.config
    spec = opt.DomainSpec.parse(c["domain"])
    lam0 = radial.solve_limit_eigen(2, c["mbar"], c["munder"]).lambda0
    for frac in c["eps"]:
        opt.favorable_count(spec.grid(opt.sweep_grid_spacing(frac * spec.volume, c["cells_per_radius"])),
                            frac * spec.volume)
    if c["continuation"]:
        points = opt.run_sweep(spec, c["eps"], c["cells_per_radius"], c["mbar"], c["munder"], lam0,
                               continuation=True, maxit=c["maxit"])
    else:
        tasks = [(c["domain"], f, c["cells_per_radius"], c["mbar"], c["munder"], lam0, c["maxit"]) for f in c["eps"]]
        points = parallel_map(_sweep_task, tasks)
    rows = [p.row() for p in points]
    header = list(rows[0])
    run.csv("sweep.csv", header, [[r[k] for k in header] for r in rows])
    summary: dict = {"lambda0": lam0, "points": rows}
    if spec.d_star is not None and len(points) >= 4:
        fit = opt.gap_fit_domain([(p.eps, p.lam) for p in points], lam0, spec.d_star, c["munder"])
        summary["gap_fit"] = fit.record()
    run.json("sweep.json", summary)
    for p in points:
        print(f"eps={p.eps_fraction:g}|Omega| scaled={p.diagnostics.scaled_lambda:.8f} "
              f"ratio={p.diagnostics.scaled_ratio:.6f} components={p.diagnostics.components4}")
    run.manifest("ok", {"scaled_lambda": [p.diagnostics.scaled_lambda for p in points]})
    return 0


def cmd_verify(run: Run) -> int:
    c = run.config
    cfg = acceptance.BatteryConfig(quick=c["quick"], asym_grid=c["grid"], fd_grid=c["grid"],
                                   cells_per_radius=c["cells_per_radius"])
    battery = acceptance.Battery(cfg)
    results = []
    for fn in battery.steps():
        res = fn()
        print(res.line, flush=True)
        results.append(res)
    report = acceptance.summarize(results)
    run.json("report.json", report)
    bad = {acceptance.FAIL} | ({acceptance.INCONCLUSIVE} if c["strict"] else set())
    failed = [r.number for r in results if r.status in bad]
    run.manifest("fail" if failed else "ok", report["counts"])
    print(f"summary: {report['counts']}")
    return 1 if failed else 0


COMMANDS = {
    "limit": cmd_limit,
    "modes": cmd_modes,
    "asymmetry": cmd_asymmetry,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args.command, args)
        pool_size()
        out = args.out if args.out is not None else Path("runs") / args.command
        return COMMANDS[args.command](Run(args.command, config, out))
    except UsageError as exc:
        parser.exit(2, f"bbspectra {args.command}: error: {exc}\n")
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"bbspectra {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
