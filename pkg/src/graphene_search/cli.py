"""``graphene-search`` command line: spectrum, search, scaling and transfer runs.

Every run writes its CSV, a JSON summary or report, and a run manifest with
SHA-256 digests of all outputs. Exit codes: 0 ok, 2 usage, 3 numerical
failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import STUDIES
from .dynamics import run_search, run_transfer
from .exceptions import GrapheneSearchError, LatticeError, NumericalError
from .lattice import LatticeSpec, SiteId
from .spectral import gamma_sweep
from .svg import search_svg, spectrum_svg

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
THREADS_ENV = "GRAPHENE_SEARCH_THREADS"


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


@contextmanager
def stage(name):
    """Tag any exception raised inside with the name of the pipeline stage."""
    try:
        yield
    except (StageError, UsageError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


# -- flag parsing ---------------------------------------------------------------


def parse_cells(text) -> LatticeSpec:
    try:
        return LatticeSpec.parse(text)
    except (ValueError, LatticeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_site(text) -> SiteId:
    try:
        return SiteId.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_gamma(text) -> tuple[float, float, float]:
    """``FROM:TO:STEP``."""
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FROM:TO:STEP, got {text!r}") from None
    if step <= 0 or hi <= lo:
        raise argparse.ArgumentTypeError(f"need TO > FROM and STEP > 0, got {text!r}")
    return lo, hi, step


def parse_sizes(text) -> list[int]:
    """``LO..HI:STEP`` (inclusive) or a comma-separated list."""
    try:
        if ".." in text:
            rng, _, step = text.partition(":")
            lo, hi = (int(v) for v in rng.split(".."))
            sizes = list(range(lo, hi + 1, int(step) if step else 3))
        else:
            sizes = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI:STEP or a list, got {text!r}") from None
    if not sizes or any(s < 2 for s in sizes):
        raise argparse.ArgumentTypeError(f"invalid size list {text!r}")
    return sizes


def positive_float(text) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphene-search", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", type=Path, help="JSON file with default flag values for the subcommand")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="eigenvalues of H_gamma over a gamma grid")
    sp.add_argument("--cells", type=parse_cells, default=LatticeSpec(12, 12))
    sp.add_argument("--gamma", type=parse_gamma, default=(0.0, 1.2, 0.005), metavar="FROM:TO:STEP")
    sp.add_argument("--mark", type=parse_site, default=SiteId(0, 0), metavar="A,B,SUBL")
    sp.add_argument("--out", type=Path, default=Path("spectrum.csv"))
    sp.add_argument("--svg", type=Path)

    se = sub.add_parser("search", help="search dynamics at gamma = 1")
    se.add_argument("--cells", type=parse_cells, default=LatticeSpec(12, 12))
    se.add_argument("--mark", type=parse_site, default=SiteId(0, 0), metavar="A,B,SUBL")
    se.add_argument("--start", choices=("optimal", "uniform-dirac"), default="optimal")
    se.add_argument("--dt", type=positive_float)
    se.add_argument("--tmax", type=positive_float)
    se.add_argument("--out", type=Path, default=Path("search.csv"))
    se.add_argument("--svg", type=Path)

    sc = sub.add_parser("scaling", help="finite-size scaling studies")
    sc.add_argument("--study", choices=sorted(STUDIES), required=True)
    sc.add_argument("--sizes", type=parse_sizes, default=parse_sizes("6..24:3"), metavar="LO..HI:STEP")
    sc.add_argument("--large", action="store_true", help="append m=n=30 (N=1800) to the size grid")
    sc.add_argument("--mark", type=parse_site, default=SiteId(0, 0), metavar="A,B,SUBL")
    sc.add_argument("--out", type=Path, default=Path("scaling.csv"))

    tr = sub.add_parser("transfer", help="state transfer between two marked sites")
    tr.add_argument("--cells", type=parse_cells, default=LatticeSpec(12, 12))
    tr.add_argument("--mark1", type=parse_site, default=SiteId(0, 0), metavar="A,B,SUBL")
    tr.add_argument("--mark2", type=parse_site, metavar="A,B,SUBL",
                    help="default: the cell opposite mark1 on the torus, same sublattice")
    tr.add_argument("--dt", type=positive_float)
    tr.add_argument("--tmax", type=positive_float)
    tr.add_argument("--out", type=Path, default=Path("transfer.csv"))
    return p


_CONVERTERS = {
    "cells": parse_cells, "mark": parse_site, "mark1": parse_site, "mark2": parse_site,
    "gamma": parse_gamma, "sizes": parse_sizes, "dt": positive_float, "tmax": positive_float,
    "out": Path, "svg": Path,
}


def _subparser(parser, name) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def apply_config(parser, argv) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` become defaults that flags override."""
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = json.loads(args.config.read_text())
    except OSError as exc:
        raise OSError(f"cannot read config {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    sub = _subparser(parser, args.command)
    known = {a.dest for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known or dest == "help":
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        conv = _CONVERTERS.get(dest)
        if isinstance(value, list):
            value = ",".join(map(str, value))
        try:
            defaults[dest] = conv(str(value)) if conv is not None and value is not None else value
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"config key {key!r}: {exc}") from None
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError(f"{THREADS_ENV} must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


@contextmanager
def executor():
    n = thread_count()
    if n <= 1:
        yield None
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        yield pool


# -- output --------------------------------------------------------------------


def fmt(value) -> str:
    """17 significant digits for floats, plain ``str`` for everything else."""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue().encode("ascii")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def json_bytes(obj) -> bytes:
    return (json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n").encode("utf-8")


class Outputs:
    """Collects output files in write order, for the manifest."""

    def __init__(self):
        self.files = []

    def write(self, path: Path, data: bytes):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.files.append({"path": str(path), "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})


def sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def manifest(args, outputs: Outputs, duration, notes=None) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.config is not None:
        params["config"] = str(args.config)
    out = {
        "subcommand": args.command,
        "params": {k: str(v) if isinstance(v, (LatticeSpec, SiteId, Path)) else v for k, v in params.items()},
        "version": __version__,
        "duration_s": duration,
        "outputs": list(outputs.files),
    }
    if notes:
        out["notes"] = notes
    return out


# -- subcommands ----------------------------------------------------------------


def cmd_spectrum(args, outputs: Outputs):
    lo, hi, step = args.gamma
    with stage("gamma sweep"), executor() as pool:
        sweep = gamma_sweep(args.cells, args.mark, lo, hi, step=step, executor=pool)
    with stage("symmetry check"):
        err = float(sweep.symmetry_error().max())
        if err > 1e-9:
            raise NumericalError(f"spectrum not symmetric about 0 (max error {err:.3e})")
    rows = ((g, i, e) for g, ev in zip(sweep.gammas, sweep.eigenvalues) for i, e in enumerate(ev))
    outputs.write(args.out, csv_bytes(("gamma", "index", "eigenvalue"), rows))
    summary = {
        "cells": str(args.cells), "marked": str(args.mark), "gamma_points": len(sweep.gammas),
        "crossing_gamma": sweep.crossing_gamma,
        "crossing_separation": float(sweep.branch_separation[sweep.crossing_index]),
        "max_symmetry_error": err,
        "branch_overlap_min": float(sweep.branch_overlap[1:].min()) if len(sweep.gammas) > 1 else 1.0,
    }
    outputs.write(sibling(args.out, ".summary.json"), json_bytes(summary))
    if args.svg is not None:
        outputs.write(args.svg, spectrum_svg(sweep).encode("utf-8"))
    return summary, None


def cmd_search(args, outputs: Outputs):
    if not args.cells.dirac_exact:
        raise UsageError(f"--cells {args.cells}: m and n must be multiples of 3 for Dirac start states")
    with stage("search run"):
        run = run_search(args.cells, args.mark, args.start, dt=args.dt, t_max=args.tmax)
    rows = zip(run.times, run.P_total, run.P_sites[:, 0], run.P_sites[:, 1], run.P_sites[:, 2], run.P_marked)
    outputs.write(args.out, csv_bytes(("t", "P_total", "P_site1", "P_site2", "P_site3", "P_marked"), rows))
    summary = run.summary()
    outputs.write(sibling(args.out, ".summary.json"), json_bytes(summary))
    if args.svg is not None:
        outputs.write(args.svg, search_svg(run).encode("utf-8"))
    return summary, None


def cmd_scaling(args, outputs: Outputs):
    sizes = sorted(set(args.sizes) | ({30} if args.large else set()))
    if any(s % 3 for s in sizes):
        raise UsageError(f"--sizes must be multiples of 3: {sizes}")
    fn = STUDIES[args.study]
    with stage(f"{args.study} study"), executor() as pool:
        if args.study == "moments":
            res = fn(sizes, executor=pool)
        else:
            res = fn(sizes, args.mark, executor=pool)
    header = list(res.rows[0])
    outputs.write(args.out, csv_bytes(header, ([r[k] for k in header] for r in res.rows)))
    report = res.report()
    outputs.write(sibling(args.out, ".report.json"), json_bytes(report))
    return report, None


def cmd_transfer(args, outputs: Outputs):
    spec = args.cells
    mark2 = args.mark2
    if mark2 is None:
        a, b, s = args.mark1
        mark2 = SiteId((a + spec.m // 2) % spec.m, (b + spec.n // 2) % spec.n, s)
    if tuple(args.mark1) == tuple(mark2):
        raise UsageError("--mark1 and --mark2 must differ")
    with stage("transfer run"):
        run = run_transfer(spec, args.mark1, mark2, dt=args.dt, t_max=args.tmax)
    outputs.write(args.out, csv_bytes(("t", "P_ell1", "P_ell2"), zip(run.times, run.P_ell1, run.P_ell2)))
    summary = run.summary()
    outputs.write(sibling(args.out, ".summary.json"), json_bytes(summary))
    notes = {"initial_state": "neighbor state of mark1 projected onto all eigenstates with |E| below "
                              f"the first unperturbed band level ({run.subspace_dim} states), renormalized"}
    return summary, notes


COMMANDS = {"spectrum": cmd_spectrum, "search": cmd_search, "scaling": cmd_scaling, "transfer": cmd_transfer}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    except UsageError as exc:
        print(f"graphene-search: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"graphene-search: error: {exc}", file=sys.stderr)
        return EXIT_IO

    outputs = Outputs()
    t0 = time.perf_counter()
    try:
        summary, notes = COMMANDS[args.command](args, outputs)
        duration = time.perf_counter() - t0
        manifest_path = sibling(args.out, ".manifest.json")
        data = json_bytes(manifest(args, outputs, duration, notes))
        manifest_path.write_bytes(data)
    except UsageError as exc:
        print(f"graphene-search {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        inner = exc.exc
        if isinstance(inner, OSError):
            code = EXIT_IO
        elif isinstance(inner, (LatticeError, ValueError)) and not isinstance(inner, ArithmeticError):
            code = EXIT_USAGE
        elif isinstance(inner, (ArithmeticError, GrapheneSearchError, np.linalg.LinAlgError)):
            code = EXIT_NUMERICAL
        else:
            raise
        print(f"graphene-search {args.command}: error in stage '{exc.stage}': {inner}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"graphene-search {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(_jsonable(summary), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
