"""Command-line entry point.

Subcommands: ``simulate``, ``norm``, ``check-ineq``, ``poisson`` and
``static-test``. All paths are taken relative to ``--workdir``. The number
of FFT threads is read from the ``EPLAB_THREADS`` environment variable.

Exit codes: 0 success, 1 a check ran but did not pass, 2 configuration or
parameter rejection, 3 numerical abort, 4 Picard non-contraction.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .evolution import (
    Monitor,
    NonContraction,
    NumericalAbort,
    PicardConfig,
    SchemeConfig,
    gaussian_state,
    picard_solve,
    run_simulation,
    static_state,
)
from .fluid import EosParams, StaticProfile
from .grid import BoxGrid, RadialGrid, load_field, save_field
from .ineq_lab import (
    HypothesisError,
    IneqParams,
    InequalityKind,
    check_inequality,
    corpus_from_grid,
)
from .poisson import DEFAULT_TAIL_EXPONENT, solve_poisson_box, solve_poisson_radial
from .wsobolev import WeightedNormSpec, set_fft_workers, weighted_norm

__all__ = [
    "ConfigError",
    "RunManifest",
    "StaticRow",
    "DEFAULTS",
    "parse_config",
    "validate_config",
    "static_test",
    "main",
]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_ABORT, EXIT_NONCONTRACTION = 0, 1, 2, 3, 4
THREADS_ENV = "EPLAB_THREADS"

DEFAULTS = {
    "eos": {"gamma": 1.2, "K": "static", "a": 1.0},
    "grid": {"kind": "radial", "n": 1024, "extent": 64.0},
    "scheme": {"cfl": 0.4, "eps_hv": 0.25, "t_end": 0.5, "cadence": 10,
               "tail_exponent": DEFAULT_TAIL_EXPONENT, "far_field": "extrapolate"},
    "norms": {"s": 2.6, "delta": -1.2, "jmax": 10, "shell_n": 128},
    "initial": {"profile": "auto", "amplitude": 1.0, "width": 2.0, "velocity": 0.0},
    "picard": {"enabled": False, "T": 0.05, "tol": 1e-8, "max_iter": 40, "M0": None},
    "output": {"csv": "diagnostics.csv", "dump_dir": "dumps", "manifest": "manifest.json",
               "picard_csv": "picard.csv"},
}

_FLOAT_OR_NONE = {("picard", "M0")}
_FLOAT_OR_STATIC = {("eos", "K")}


class ConfigError(ValueError):
    """A configuration value is unknown, malformed or outside its admissible range."""


# ---------------------------------------------------------------- config


def _convert(section: str, key: str, raw: str):
    default = DEFAULTS[section][key]
    text = raw.strip()
    try:
        if (section, key) in _FLOAT_OR_STATIC:
            return "static" if text.lower() == "static" else float(text)
        if (section, key) in _FLOAT_OR_NONE:
            return None if text.lower() in ("", "none", "auto") else float(text)
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None
    return text


def _resolve(sections: dict) -> dict:
    cfg = {name: dict(values) for name, values in DEFAULTS.items()}
    for name, values in sections.items():
        if name not in DEFAULTS:
            raise ConfigError(f"unknown section [{name}]; known: {sorted(DEFAULTS)}")
        for key, raw in values.items():
            if key not in DEFAULTS[name]:
                raise ConfigError(f"unknown key [{name}] {key}; known: {sorted(DEFAULTS[name])}")
            cfg[name][key] = _convert(name, key, raw) if isinstance(raw, str) else raw
    return cfg


def _is_integer(x: float) -> bool:
    return abs(x - round(x)) < 1e-9


def validate_config(cfg: dict) -> list:
    """Messages for every violated range; each quotes the bound."""
    out = []
    gamma = cfg["eos"]["gamma"]
    s, delta = cfg["norms"]["s"], cfg["norms"]["delta"]
    if not 1.0 < gamma < 5.0 / 3.0:
        out.append(f"γ must lie in (1, 5/3), got {gamma:g}")
    else:
        beta = 2.0 / (gamma - 1.0)
        fb = round(beta) if _is_integer(beta) else math.floor(beta)
        lo = -1.5 + 2.0 / (fb - 1)
        if not (lo - 1e-12 <= delta < -0.5):
            out.append(f"δ must satisfy -3/2 + 2/([2/(γ-1)] - 1) = {lo:.6g} <= δ < -1/2, "
                       f"got {delta:g}")
        if not s > 2.5:
            out.append(f"s must satisfy s > 5/2, got {s:g}")
        elif not _is_integer(beta):
            top = 2.5 + beta - fb
            if not s < top:
                out.append(f"s must satisfy s < 5/2 + 2/(γ-1) - [2/(γ-1)] = {top:.6g} "
                           f"(2/(γ-1) = {beta:.6g} is not an integer), got {s:g}")
    K = cfg["eos"]["K"]
    if K == "static":
        if abs(gamma - StaticProfile.gamma) > 1e-12:
            out.append(f"K = static requires γ = 6/5, got {gamma:g}")
    elif not K > 0:
        out.append(f"K must be positive, got {K:g}")
    if not cfg["eos"]["a"] > 0:
        out.append(f"a must be positive, got {cfg['eos']['a']:g}")
    g = cfg["grid"]
    if g["kind"] not in ("radial", "box"):
        out.append(f"grid kind must be 'radial' or 'box', got {g['kind']!r}")
    if not g["n"] >= 16:
        out.append(f"grid n must be >= 16, got {g['n']}")
    if g["kind"] == "box" and g["n"] % 2:
        out.append(f"box grid n must be even, got {g['n']}")
    if not g["extent"] > 0:
        out.append(f"grid extent must be positive, got {g['extent']:g}")
    sc = cfg["scheme"]
    if not sc["cfl"] > 0:
        out.append(f"cfl must be positive, got {sc['cfl']:g}")
    if not sc["eps_hv"] >= 0:
        out.append(f"eps_hv must be non-negative, got {sc['eps_hv']:g}")
    if not sc["t_end"] > 0:
        out.append(f"t_end must be positive, got {sc['t_end']:g}")
    if not sc["cadence"] >= 1:
        out.append(f"cadence must be >= 1, got {sc['cadence']}")
    if not sc["tail_exponent"] > 3:
        out.append(f"tail_exponent must exceed 3 for a finite tail mass, got {sc['tail_exponent']:g}")
    if sc["far_field"] not in ("extrapolate", "frozen"):
        out.append(f"far_field must be 'extrapolate' or 'frozen', got {sc['far_field']!r}")
    nm = cfg["norms"]
    if not nm["jmax"] >= 2:
        out.append(f"jmax must be >= 2, got {nm['jmax']}")
    if not (nm["shell_n"] >= 16 and nm["shell_n"] % 2 == 0):
        out.append(f"shell_n must be an even integer >= 16, got {nm['shell_n']}")
    ini = cfg["initial"]
    if ini["profile"] not in ("auto", "static", "gaussian"):
        out.append(f"initial profile must be auto, static or gaussian, got {ini['profile']!r}")
    if ini["profile"] == "static" and K != "static":
        out.append("initial profile 'static' requires K = static")
    if not ini["amplitude"] > 0 or not ini["width"] > 0:
        out.append("initial amplitude and width must be positive")
    pc = cfg["picard"]
    if not pc["T"] > 0 or not pc["tol"] > 0 or not pc["max_iter"] >= 1:
        out.append("picard T and tol must be positive and max_iter >= 1")
    if pc["M0"] is not None and not pc["M0"] > 0:
        out.append(f"picard M0 must be positive, got {pc['M0']:g}")
    return out


def parse_config(path) -> dict:
    """Read an INI configuration (or a run manifest) and materialise all defaults.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    ConfigError
        On unknown sections or keys, malformed values, or values outside
        their admissible range.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    if path.suffix == ".json":
        sections = json.loads(path.read_text())["config"]
    else:
        parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
        parser.optionxform = str
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        sections = {name: dict(parser[name]) for name in parser.sections()}
    cfg = _resolve(sections)
    bad = validate_config(cfg)
    if bad:
        raise ConfigError("; ".join(bad))
    return cfg


# -------------------------------------------------------------- manifest


@dataclass
class RunManifest:
    """Everything needed to reproduce a run, written before any compute."""

    config: dict
    version: str
    grid_hash: str
    outputs: dict
    command: str = "simulate"

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True))


def _grid_hash(state) -> str:
    g = state.geometry
    h = hashlib.sha256()
    h.update(f"{g.kind}:{g.n}:{g.extent!r}".encode())
    h.update(np.ascontiguousarray(state.w.samples, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(state.v.samples, dtype="<f8").tobytes())
    return h.hexdigest()


def _build(cfg: dict):
    """EOS, initial state and whether the run starts from the static profile."""
    e, g, ini = cfg["eos"], cfg["grid"], cfg["initial"]
    eos = EosParams(e["gamma"], StaticProfile.K_static if e["K"] == "static" else e["K"])
    grid = RadialGrid(g["extent"], g["n"]) if g["kind"] == "radial" else BoxGrid(g["extent"], g["n"])
    profile = ini["profile"]
    if profile == "auto":
        profile = "static" if e["K"] == "static" else "gaussian"
    if profile == "static":
        return eos, static_state(grid, e["a"]), True
    return eos, gaussian_state(grid, eos, ini["amplitude"], ini["width"], ini["velocity"]), False


def _spec(cfg: dict) -> WeightedNormSpec:
    nm = cfg["norms"]
    return WeightedNormSpec(nm["s"], nm["delta"], j_max=nm["jmax"], shell_n=nm["shell_n"])


def _scheme(cfg: dict) -> SchemeConfig:
    sc = cfg["scheme"]
    return SchemeConfig(cfl=sc["cfl"], eps_hv=sc["eps_hv"], t_end=sc["t_end"],
                        cadence=sc["cadence"], tail_exponent=sc["tail_exponent"],
                        far_field=sc["far_field"])


def _write_picard(path, report) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("iteration", "gap", "high_norm"))
        for i, (gap, high) in enumerate(zip(report.gaps, report.high_norms), start=1):
            writer.writerow((i, f"{gap:.17g}", f"{high:.17g}"))


def cmd_simulate(args) -> int:
    cfg = parse_config(args.workdir / args.config)
    eos, initial, is_static = _build(cfg)
    out = cfg["output"]
    dump_dir = args.workdir / out["dump_dir"]
    dump_dir.mkdir(parents=True, exist_ok=True)
    outputs = {"csv": out["csv"], "w": str(Path(out["dump_dir"]) / "w_final.bin"),
               "v": str(Path(out["dump_dir"]) / "v_final.bin")}
    if cfg["picard"]["enabled"]:
        outputs["picard_csv"] = out["picard_csv"]
    manifest = RunManifest(cfg, __version__, _grid_hash(initial), outputs)
    manifest.write(args.workdir / out["manifest"])

    monitor = Monitor(_spec(cfg), norms=True, reference=initial if is_static else None)
    try:
        result = run_simulation(initial, eos, _scheme(cfg), monitor)
    except NumericalAbort as exc:
        if exc.partial is not None:
            exc.partial.series.to_csv(args.workdir / out["csv"])
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    result.series.to_csv(args.workdir / out["csv"])
    save_field(result.final.w, args.workdir / outputs["w"])
    save_field(result.final.v, args.workdir / outputs["v"])
    print(f"steps={result.steps} t={result.final.t:.6g} csv={out['csv']}")

    pc = cfg["picard"]
    if pc["enabled"]:
        pcfg = PicardConfig(T=pc["T"], tol=pc["tol"], max_iter=pc["max_iter"],
                            spec=_spec(cfg), M0=pc["M0"])
        try:
            report = picard_solve(initial, eos, pcfg, _scheme(cfg))
        except NonContraction as exc:
            if exc.report is not None:
                _write_picard(args.workdir / out["picard_csv"], exc.report)
            print(f"Picard non-contraction: {exc}", file=sys.stderr)
            return EXIT_NONCONTRACTION
        _write_picard(args.workdir / out["picard_csv"], report)
        print(f"picard iterations={len(report.gaps)} rate={report.contraction_estimate:.4g} "
              f"T={report.T:g}")
    return EXIT_OK


# ----------------------------------------------------------- static test


@dataclass(frozen=True)
class StaticRow:
    """One resolution of the static-profile convergence study.

    ``ratio`` is the previous row's drift over this row's, ``order`` its
    base-2 logarithm (``nan`` on the first row).
    """

    n: int
    drift: float
    mass_change: float
    ratio: float = float("nan")
    order: float = float("nan")


def static_test(a: float = 1.0, resolutions=(512, 1024, 2048), r_max: float = 64.0,
                t_end: float = 0.5, cfl: float = 0.4, delta: float = -1.2) -> list:
    """Evolve the static profile at each resolution and tabulate the drift.

    ``gamma`` is 6/5 and ``K`` the static value. The drift is the largest
    relative L^2_delta distance of ``(w, v)`` from the initial data over
    ``[0, t_end]``.
    """
    prof = StaticProfile(a)
    rows = []
    for n in resolutions:
        initial = static_state(RadialGrid(r_max, int(n)), a)
        monitor = Monitor(WeightedNormSpec(2.6, delta), norms=False, reference=initial)
        result = run_simulation(initial, prof.eos, SchemeConfig(cfl=cfl, t_end=t_end), monitor)
        drift = float(np.max(result.series.column("static_drift_l2delta")))
        mass = result.series.column("mass")
        change = float(np.max(np.abs(mass - mass[0])) / mass[0])
        if rows:
            ratio = rows[-1].drift / drift if drift > 0 else float("inf")
            rows.append(StaticRow(int(n), drift, change, ratio, math.log2(ratio)))
        else:
            rows.append(StaticRow(int(n), drift, change))
    return rows


def cmd_static_test(args) -> int:
    rows = static_test(args.a, args.resolutions, args.r_max, args.t_end, args.cfl)
    writer = csv.writer(sys.stdout)
    if len(rows) == 1:
        writer.writerow(("n", "drift", "mass_change"))
    else:
        writer.writerow(("n", "drift", "mass_change", "ratio", "order"))
    for row in rows:
        vals = [row.n, f"{row.drift:.6e}", f"{row.mass_change:.3e}"]
        if len(rows) > 1:
            vals += ["" if math.isnan(row.ratio) else f"{row.ratio:.3f}",
                     "" if math.isnan(row.order) else f"{row.order:.3f}"]
        writer.writerow(vals)
    return EXIT_OK


# ------------------------------------------------------- other commands


def cmd_norm(args) -> int:
    u = load_field(args.workdir / args.field)
    spec = WeightedNormSpec(args.s, args.delta, j_max=args.jmax, shell_n=args.shell_n)
    b = weighted_norm(u, spec)
    writer = csv.writer(sys.stdout)
    writer.writerow(("j", "contribution", "cumulative"))
    for j, (c, cum) in enumerate(zip(b.contributions, np.cumsum(b.contributions))):
        writer.writerow((j, f"{c:.17g}", f"{cum:.17g}"))
    print(f"norm={b.norm:.10g} truncated={b.truncated} divergent={b.divergent}", file=sys.stderr)
    return EXIT_OK


def _load_corpus(spec: str, workdir: Path):
    if spec == "builtin":
        return None
    folder = workdir / spec
    if not folder.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {folder}")
    files = sorted(p for p in folder.iterdir() if p.is_file())
    if not files:
        raise FileNotFoundError(f"corpus directory is empty: {folder}")
    return [corpus_from_grid(load_field(p), p.stem) for p in files]


def cmd_check_ineq(args) -> int:
    kwargs = {"s": args.s, "delta": args.delta, "j_max": args.jmax, "shell_n": args.shell_n}
    if args.beta is not None:
        kwargs["beta"] = args.beta
    if args.gamma is not None:
        kwargs["gamma"] = args.gamma
    params = IneqParams(**kwargs)
    report = check_inequality(args.kind, _load_corpus(args.corpus, args.workdir), params)
    if args.out:
        report.to_csv(args.workdir / args.out)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(("case_id", "lhs", "rhs", "ratio"))
        for row in report.rows():
            writer.writerow([row[0]] + [f"{v:.17g}" for v in row[1:]])
    print(report.summary(), file=sys.stderr)
    for msg in report.failures:
        print(f"  {msg}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_poisson(args) -> int:
    rho = load_field(args.workdir / args.density)
    if rho.geometry.kind == "radial":
        pot = solve_poisson_radial(rho, args.tail_exponent)
    else:
        pot = solve_poisson_box(rho)
    out = args.workdir / args.out
    grad_path = out.with_name(f"{out.stem}_grad{out.suffix}")
    save_field(pot.phi, out)
    save_field(pot.grad, grad_path)
    print(f"residual={pot.residual:.6e} flagged={pot.flagged} phi={out.name} grad={grad_path.name}")
    return EXIT_OK


# ------------------------------------------------------------------ main


def _resolutions(text: str):
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("no resolutions given")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eplab", description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", type=Path, default=Path("."),
                        help="base directory for all input and output paths")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve initial data from an INI config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("norm", help="weighted norm of a field dump")
    p.add_argument("--field", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--jmax", type=int, default=10)
    p.add_argument("--shell-n", type=int, default=128)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("check-ineq", help="empirical check of one inequality family")
    p.add_argument("--kind", required=True, choices=[k.value for k in InequalityKind])
    p.add_argument("--s", type=float, default=2.6)
    p.add_argument("--delta", type=float, default=-1.2)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--beta", type=float)
    group.add_argument("--gamma", type=float)
    p.add_argument("--corpus", default="builtin", help="'builtin' or a directory of dumps")
    p.add_argument("--jmax", type=int, default=10)
    p.add_argument("--shell-n", type=int, default=64)
    p.add_argument("--out", help="CSV output path (default: standard output)")
    p.set_defaults(func=cmd_check_ineq)

    p = sub.add_parser("poisson", help="solve lap phi = 4 pi rho for a density dump")
    p.add_argument("--density", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tail-exponent", type=float, default=DEFAULT_TAIL_EXPONENT)
    p.set_defaults(func=cmd_poisson)

    p = sub.add_parser("static-test", help="convergence study of the static profile")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--resolutions", type=_resolutions, default=(512, 1024, 2048))
    p.add_argument("--r-max", type=float, default=64.0)
    p.add_argument("--t-end", type=float, default=0.5)
    p.add_argument("--cfl", type=float, default=0.4)
    p.set_defaults(func=cmd_static_test)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get(THREADS_ENV)
    if threads:
        try:
            set_fft_workers(int(threads))
        except ValueError:
            print(f"{THREADS_ENV} must be a positive integer, got {threads!r}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, HypothesisError) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except NonContraction as exc:
        print(f"Picard non-contraction: {exc}", file=sys.stderr)
        return EXIT_NONCONTRACTION


if __name__ == "__main__":
    sys.exit(main())
