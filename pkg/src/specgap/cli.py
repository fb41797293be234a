"""Command-line entry point.

Exit status: 0 on success, 1 for an unknown command, 2 for invalid input,
3 when a resource guard trips.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from . import construction as con
from . import history_state as hs
from . import machines as tm_mod
from . import phase_estimation as pe
from . import robinson as rb
from . import spectra as sx
from . import tiling as tl
from .errors import ResourceGuardError, ValidationError

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_GUARD = 0, 1, 2, 3

COMMANDS = ("tile", "tm", "qpe", "dovetail", "history", "spectrum", "gap-scan",
            "density", "combine", "theorem1")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


@dataclass
class RunConfig:
    command: str
    args: argparse.Namespace
    seed: int = 0
    tol: float = 1e-9
    out: Optional[str] = None
    outputs: List[str] = field(default_factory=list)


# ---------------------------------------------------------------- helpers

def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ValidationError(f"not a list of integers: {text!r}") from exc


def _open_text(path):
    try:
        return open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc


def _emit(cfg: RunConfig, text: str):
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        cfg.outputs.append(cfg.out)
    else:
        sys.stdout.write(text)


def _load_tiles(path: Optional[str]) -> tl.TileSet:
    if path is None:
        return rb.robinson_tileset()
    with _open_text(path) as fh:
        return tl.read_tileset(fh)


def _load_grid(path: str) -> tl.Grid:
    with _open_text(path) as fh:
        return tl.read_grid(fh)


def _load_machine(args) -> tm_mod.TuringMachine:
    if getattr(args, "tm_file", None):
        with _open_text(args.tm_file) as fh:
            return tm_mod.parse_tm(fh.read())
    lib = tm_mod.library()
    if args.machine not in lib:
        raise ValidationError(f"unknown machine {args.machine!r}; choose from {', '.join(lib)}")
    return lib[args.machine]


def _model(name: str, seed: int):
    """Named local terms: ``xy``, ``toy:<e_u>``, ``scalar:<e>``, ``headchain:<m>``,
    ``random:<d>`` (PSD, seeded)."""
    kind, _, arg = name.partition(":")
    try:
        if kind == "xy":
            return con.xy_reference
        if kind == "toy":
            return con.dichotomy_toy(float(arg))
        if kind == "scalar":
            return con.scalar_term(float(arg))
        if kind == "headchain":
            return con.HeadChain(int(arg)).local()
        if kind == "random":
            return con.random_psd_local(int(arg), np.random.default_rng(seed))
    except ValueError as exc:
        raise ValidationError(f"bad model argument in {name!r}") from exc
    raise ValidationError(f"unknown model {name!r}")


def _matrix(obj, name):
    try:
        a = np.array([[complex(x) if isinstance(x, str) else x for x in row] for row in obj])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} is not a matrix") from exc
    if a.ndim != 2:
        raise ValidationError(f"{name} is not a matrix")
    return a


def _theorem1_params(path: str) -> con.Theorem1Params:
    with _open_text(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
    try:
        return con.Theorem1Params(
            n=int(raw["n"]), beta=Fraction(str(raw["beta"])),
            A=_matrix(raw["A"], "A"), B=_matrix(raw["B"], "B"), C=_matrix(raw["C"], "C"),
            D=_matrix(raw["D"], "D"), alpha=float(Fraction(str(raw["alpha"]))),
            Pi=_matrix(raw["Pi"], "Pi"), convention=raw.get("convention", "digits"))
    except (KeyError, ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"bad parameter file: {exc}") from exc


# ---------------------------------------------------------------- commands

def cmd_tile(cfg: RunConfig):
    a = cfg.args
    if a.action == "robinson":
        grid = rb.generate_robinson(a.size)
        buf = io.StringIO()
        tl.write_grid(grid, buf)
        _emit(cfg, buf.getvalue())
        if a.tiles_out:
            with open(a.tiles_out, "w", encoding="utf-8") as fh:
                tl.write_tileset(rb.robinson_tileset(), fh)
            cfg.outputs.append(a.tiles_out)
    elif a.action == "verify":
        rep = tl.verify_tiling(_load_grid(a.grid), _load_tiles(a.tiles))
        lines = [f"mismatches {rep.count}"] + [f"{p} {q}" for p, q in rep.locations]
        _emit(cfg, "\n".join(lines) + "\n")
    elif a.action == "solve":
        grid = tl.solve_tiling(_load_tiles(a.tiles), a.width, a.height, max_cells=a.max_cells)
        if grid is None:
            _emit(cfg, "none\n")
        else:
            buf = io.StringIO()
            tl.write_grid(grid, buf)
            _emit(cfg, buf.getvalue())
    elif a.action == "census":
        census = rb.square_census(_load_grid(a.grid), family=a.family)
        rows = ["side,count"] + [f"{s},{c}" for s, c in census.counts.items()]
        _emit(cfg, "\n".join(rows) + "\n")
    elif a.action == "period":
        hp, vp = tl.detect_period(_load_grid(a.grid), a.max_period)
        _emit(cfg, f"horizontal {hp if hp else 'none'}\nvertical {vp if vp else 'none'}\n")
    elif a.action == "render":
        render_tiling(a.grid, cfg.out, palette=a.palette, scale=a.scale)
        cfg.outputs.append(cfg.out)


def render_tiling(grid_path: str, image_path: str, palette: str = "default", scale: int = 1) -> bytes:
    """Write a PPM image of a grid file; returns the bytes written."""
    if not image_path:
        raise ValidationError("--out is required for render")
    grid = _load_grid(grid_path)
    n = int(grid.as_array().max()) + 1
    if palette == "robinson":
        pal = rb.robinson_palette()
    else:
        pal = tl.default_palette(n)
    data = tl.ppm_bytes(grid, pal, scale)
    with open(image_path, "wb") as fh:
        fh.write(data)
    return data


def cmd_tm(cfg: RunConfig):
    a = cfg.args
    machine = _load_machine(a)
    res = tm_mod.run_tm(machine, _int_list(a.input), a.max_steps)
    _emit(cfg, f"halted {str(res.halted).lower()}\nsteps {res.steps_used}\n"
               f"state {res.state}\nhead {res.head}\ntape {res.tape_string()}\n")


def cmd_qpe(cfg: RunConfig):
    a = cfg.args
    if a.phi is not None:
        try:
            phi = Fraction(a.phi)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"bad phase {a.phi!r}") from exc
    elif a.n is not None:
        phi = tm_mod.phi_of_n(a.n, a.convention).phi
    else:
        raise ValidationError("give --n or --phi")
    _emit(cfg, pe.qpe_distribution(phi, a.bits).to_csv())


def cmd_dovetail(cfg: RunConfig):
    a = cfg.args
    res = pe.dovetail_run(a.n, a.bits, _load_machine(a), a.max_steps)
    _emit(cfg, f"digits {pe.qpe_digits(a.n, a.bits)}\nhalted {str(res.halted).lower()}\n"
               f"steps {res.steps_used}\ntape {res.tape_string()}\n")


def _history_from_args(a, T=None):
    if a.circuit:
        with _open_text(a.circuit) as fh:
            circuit = pe.parse_circuit(fh.read())
        return circuit, a.flag
    compiled = hs.compile_run(_load_machine(a), _int_list(a.input), T if T is not None else a.T)
    return compiled.circuit, compiled.flag_qubit


def cmd_history(cfg: RunConfig):
    a = cfg.args
    if a.action == "sweep":
        if a.circuit:
            raise ValidationError("sweep compiles a machine; use --machine")
        machine = _load_machine(a)
        inp = _int_list(a.input)

        def family(T):
            c = hs.compile_run(machine, inp, T)
            return c.circuit, c.flag_qubit
        rows = ["T,lambda0,T_lambda0"]
        for T, lam in hs.ground_energy_vs_T(family, _int_list(a.T_list), clock=a.clock):
            rows.append(f"{T},{lam!r},{T * lam!r}")
        _emit(cfg, "\n".join(rows) + "\n")
        return
    circuit, flag = _history_from_args(a)
    h = hs.build_history_hamiltonian(circuit, a.init, a.clock)
    if a.action == "penalty":
        if flag is None:
            raise ValidationError("penalty needs --flag for circuit input")
        h = hs.add_halting_penalty(h, flag)
        r = hs.ground_energy(h, k=2)
        _emit(cfg, f"T {h.T}\ndim {h.dim}\nlambda0 {r.lambda0!r}\n")
        return
    buf = io.StringIO()
    sx.write_sparseherm(h.operator, buf)
    _emit(cfg, buf.getvalue())


def cmd_spectrum(cfg: RunConfig):
    a = cfg.args
    with _open_text(a.op) as fh:
        H = sx.read_sparseherm(fh, max_dim=a.max_dim)
    if a.method == "dense" and H.dim > sx.DENSE_GUARD:
        raise ResourceGuardError(f"dense method limited to {sx.DENSE_GUARD} dimensions")
    r = sx.low_eigs(H, min(a.k, H.dim), tol=cfg.tol, method=a.method, seed=cfg.seed)
    rows = ["index,eigenvalue"] + [f"{i},{float(v)!r}" for i, v in enumerate(r.eigenvalues)]
    _emit(cfg, "\n".join(rows) + "\n")


def cmd_gap_scan(cfg: RunConfig):
    a = cfg.args
    v = con.gap_verdict_scan(_model(a.model, cfg.seed), _int_list(a.L), dims=a.dims, k=a.k)
    _emit(cfg, v.to_json() + "\n")


def cmd_density(cfg: RunConfig):
    a = cfg.args
    rows = ["L,density"] + [f"{L},{rho!r}" for L, rho in
                            sx.energy_density(_model(a.model, cfg.seed), _int_list(a.L), dims=a.dims)]
    _emit(cfg, "\n".join(rows) + "\n")


def cmd_combine(cfg: RunConfig):
    a = cfg.args
    rng = np.random.default_rng(cfg.seed)

    def side(spec):
        kind, _, arg = spec.partition(":")
        if kind == "random":
            return con.random_psd_local(int(arg), rng)
        m = _model(spec, cfg.seed)
        return m(a.L * a.W) if callable(m) else m
    rep = con.verify_spectrum_identity(side(a.hu), side(a.hd), a.L, a.W, tol=cfg.tol)
    _emit(cfg, json.dumps({"L": rep.L, "W": rep.W, "dim": rep.dim, "included": rep.included,
                           "max_deviation": float(rep.max_deviation),
                           "min_residual": rep.min_residual, "n_residual": rep.n_residual,
                           "ok": rep.ok}, indent=2) + "\n")


def cmd_theorem1(cfg: RunConfig):
    params = _theorem1_params(cfg.args.params)
    con.theorem1_interactions(params)  # raises on any violated clause
    _emit(cfg, json.dumps(con.theorem1_report(params), indent=2) + "\n")


HANDLERS = {"tile": cmd_tile, "tm": cmd_tm, "qpe": cmd_qpe, "dovetail": cmd_dovetail,
            "history": cmd_history, "spectrum": cmd_spectrum, "gap-scan": cmd_gap_scan,
            "density": cmd_density, "combine": cmd_combine, "theorem1": cmd_theorem1}


# ---------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", default=None)


def _machine_args(p):
    p.add_argument("--machine", default="halt_now", help="library machine name")
    p.add_argument("--tm-file", default=None, help="machine description file")
    p.add_argument("--input", default="", help="tape symbols, e.g. '1 1 1'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specgap", description="Desk-scale spectral-gap construction toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("tile")
    p.add_argument("action", choices=["robinson", "verify", "solve", "census", "period", "render"])
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--grid")
    p.add_argument("--tiles", default=None)
    p.add_argument("--tiles-out", default=None)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--height", type=int, default=8)
    p.add_argument("--max-cells", type=int, default=tl.SOLVE_GUARD)
    p.add_argument("--family", choices=["nested", "all"], default="nested")
    p.add_argument("--max-period", type=int, default=8)
    p.add_argument("--palette", choices=["default", "robinson"], default="default")
    p.add_argument("--scale", type=int, default=1)
    _common(p)

    p = sub.add_parser("tm")
    p.add_argument("action", choices=["run"])
    _machine_args(p)
    p.add_argument("--max-steps", type=int, default=1000)
    _common(p)

    p = sub.add_parser("qpe")
    p.add_argument("--n", type=int)
    p.add_argument("--phi", default=None, help="phase as an exact fraction, e.g. 3/8")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--convention", default="digits")
    _common(p)

    p = sub.add_parser("dovetail")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--bits", type=int, required=True)
    _machine_args(p)
    p.add_argument("--max-steps", type=int, default=1000)
    _common(p)

    p = sub.add_parser("history")
    p.add_argument("action", choices=["build", "penalty", "sweep"])
    p.add_argument("--circuit", default=None)
    p.add_argument("--flag", type=int, default=None)
    _machine_args(p)
    p.add_argument("--T", type=int, default=6)
    p.add_argument("--T-list", default="4,6,8,10,12")
    p.add_argument("--init", choices=["ones", "none"], default="ones")
    p.add_argument("--clock", choices=["full", "unary"], default="unary")
    _common(p)

    p = sub.add_parser("spectrum")
    p.add_argument("--op", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--method", choices=["auto", "dense", "lanczos"], default="auto")
    p.add_argument("--max-dim", type=int, default=sx.DENSE_GUARD)
    _common(p)

    for name in ("gap-scan", "density"):
        p = sub.add_parser(name)
        p.add_argument("--model", required=True,
                       help="xy | toy:<e_u> | scalar:<e> | headchain:<m> | random:<d>")
        p.add_argument("--L", default="4,6,8")
        p.add_argument("--dims", type=int, choices=[1, 2], default=1)
        if name == "gap-scan":
            p.add_argument("--k", type=int, default=3)
        _common(p)

    p = sub.add_parser("combine")
    p.add_argument("--hu", default="random:1")
    p.add_argument("--hd", default="random:2")
    p.add_argument("--L", type=int, default=1)
    p.add_argument("--W", type=int, default=2)
    _common(p)

    p = sub.add_parser("theorem1")
    p.add_argument("--params", required=True, help="JSON with n, beta, A, B, C, D, alpha, Pi")
    _common(p)
    return parser


def dispatch(config: RunConfig) -> int:
    """Run one command; returns the exit status."""
    try:
        HANDLERS[config.command](config)
    except ResourceGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv or argv[0] not in COMMANDS:
        sys.stderr.write(parser.format_help())
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE if "invalid choice" in str(exc) else EXIT_INVALID
    cfg = RunConfig(args.command, args, seed=args.seed, tol=args.tol, out=args.out)
    return dispatch(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
