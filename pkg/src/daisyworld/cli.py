"""Command-line front end.

Subcommands: equilibria, continue, basins, manifold, tip, diagram,
reproduce-figures-data.  Each run writes its datasets plus a
``run_manifest.json`` (effective config echo, wall time, library version,
output list) into the output directory.  Exit codes: 0 success, 1
configuration error, 2 numerical failure; errors print one
machine-parsable line ``error: <kind>: <reason>`` on stderr.

Configuration comes from an INI-style file (section per subcommand, plus
``[params]`` and ``[run]``) with command-line flags taking precedence.
Unknown keys are rejected; every luminosity must lie in [0.5, 1.7].
"""
from __future__ import annotations

import argparse
import configparser
import io as _io
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, io
from .accel import USING_NUMBA, set_num_threads
from .continuation import Branch, continue_branch, quasistatic_ramp
from .equilibria import coexistence_analytic, enumerate_equilibria, single_species_equilibria
from .errors import ConfigurationError, DaisyworldError
from .geometry import basin_grid, find_L_BI, stable_manifold
from .model import Params
from .tipping import (
    DEFAULT_DELTA_L_GRID,
    DEFAULT_L_MIN,
    DEFAULT_R_GRID,
    ForcingSpec,
    run_experiment,
    tipping_diagram,
)

L_RANGE = (0.5, 1.7)
ENV_OUTDIR = "DAISYWORLD_OUTDIR"

_FLOAT_LIST = "float_list"
_SCHEMAS: dict[str, dict[str, str]] = {
    "params": {k: "float" for k in Params._FIELDS},
    "run": {"workers": "int", "out": "str"},
    "equilibria": {"L": _FLOAT_LIST},
    "continue": {"starts": "str_list", "L_min": "float", "L_max": "float"},
    "basins": {"L": _FLOAT_LIST, "resolution": "int"},
    "manifold": {"saddle": "str", "L": "float"},
    "tip": {"L_min": "float", "delta_L": "float", "r": "float"},
    "diagram": {
        "L_min": "float",
        "r_min": "float",
        "r_max": "float",
        "r_count": "int",
        "delta_L_min": "float",
        "delta_L_max": "float",
        "delta_L_count": "int",
        "crit_tol": "float",
    },
    "figures-data": {
        "equilibria_L": _FLOAT_LIST,
        "portrait_L": _FLOAT_LIST,
        "branch_L_min": "float",
        "branch_L_max": "float",
        "basin_resolution": "int",
        "ramp_rate": "float",
        "tip_delta_L": "float",
        "tip_r_track": "float",
        "tip_r_tip": "float",
        "L_BI_bracket_low": "float",
        "L_BI_bracket_high": "float",
        "surface_samples": "int",
        "diagram_r_count": "int",
        "diagram_delta_L_count": "int",
        "diagram_crit_tol": "float",
    },
}

_DEFAULTS: dict[str, dict] = {
    "run": {"workers": None, "out": None},
    "equilibria": {"L": [1.0]},
    "continue": {"starts": ["e5@1.0", "e2@1.4", "e3@0.68", "e0@1.0"], "L_min": 0.6, "L_max": 1.6},
    "basins": {"L": [1.205], "resolution": 201},
    "manifold": {"saddle": "e1", "L": 1.205},
    "tip": {"L_min": 0.8, "delta_L": 0.405, "r": 1.0},
    "diagram": {
        "L_min": DEFAULT_L_MIN,
        "r_min": float(DEFAULT_R_GRID[0]),
        "r_max": float(DEFAULT_R_GRID[-1]),
        "r_count": DEFAULT_R_GRID.size,
        "delta_L_min": float(DEFAULT_DELTA_L_GRID[0]),
        "delta_L_max": float(DEFAULT_DELTA_L_GRID[-1]),
        "delta_L_count": DEFAULT_DELTA_L_GRID.size,
        "crit_tol": 1e-4,
    },
    "figures-data": {
        "equilibria_L": [round(x, 10) for x in np.linspace(0.6, 1.6, 21)],
        "portrait_L": [0.65, 0.7, 0.8, 1.0, 1.25, 1.4],
        "branch_L_min": 0.6,
        "branch_L_max": 1.6,
        "basin_resolution": 201,
        "ramp_rate": 1e-3,
        "tip_delta_L": 0.405,
        "tip_r_track": 0.5,
        "tip_r_tip": 1.0,
        "L_BI_bracket_low": 0.85,
        "L_BI_bracket_high": 1.55,
        "surface_samples": 9,
        "diagram_r_count": DEFAULT_R_GRID.size,
        "diagram_delta_L_count": DEFAULT_DELTA_L_GRID.size,
        "diagram_crit_tol": 1e-4,
    },
}


def _parse_value(kind: str, raw, key: str):
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(str(raw))
        if kind == "str":
            return str(raw)
        if kind == _FLOAT_LIST:
            if isinstance(raw, (list, tuple, np.ndarray)):
                return [float(v) for v in raw]
            return [float(tok) for tok in str(raw).replace(",", " ").split()]
        if kind == "str_list":
            if isinstance(raw, (list, tuple)):
                return [str(v) for v in raw]
            return [tok for tok in str(raw).replace(",", " ").split()]
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    raise ConfigurationError(f"unhandled config kind {kind}")


@dataclass
class RunConfig:
    """Effective configuration: defaults, then config file, then flags."""

    params: Params = field(default_factory=Params)
    sections: dict = field(default_factory=dict)
    workers: Optional[int] = None
    out_dir: Optional[str] = None

    def section(self, name: str) -> dict:
        return self.sections[name]

    def echo(self) -> dict:
        payload = {"params": self.params.to_mapping(),
                   "run": {"workers": self.workers, "out": self.out_dir}}
        payload.update({k: dict(v) for k, v in sorted(self.sections.items())})
        return payload

    def to_ini_text(self) -> str:
        cp = configparser.ConfigParser()
        for section, mapping in self.echo().items():
            cp[section] = {}
            for k, v in mapping.items():
                if v is None:
                    continue
                if isinstance(v, (list, tuple)):
                    cp[section][k] = " ".join(io.fmt(float(x)) if isinstance(x, float) else str(x) for x in v)
                elif isinstance(v, float):
                    cp[section][k] = io.fmt(v)
                else:
                    cp[section][k] = str(v)
        buf = _io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _validate_luminosities(cfg: RunConfig) -> None:
    lo, hi = L_RANGE

    def check(val: float, where: str) -> None:
        if not lo <= val <= hi:
            raise ConfigurationError(
                f"luminosity {val:g} in {where} outside allowed range [{lo}, {hi}]"
            )

    for name, sec in cfg.sections.items():
        for key, val in sec.items():
            if key in ("L", "equilibria_L", "portrait_L"):
                for v in val if isinstance(val, list) else [val]:
                    check(v, f"[{name}] {key}")
            elif key in ("L_min", "L_max", "branch_L_min", "branch_L_max",
                         "L_BI_bracket_low", "L_BI_bracket_high"):
                check(val, f"[{name}] {key}")
            elif key == "starts":
                for token in val:
                    check(_parse_start(token)[1], f"[{name}] starts")
    tip = cfg.sections.get("tip")
    if tip is not None:
        check(tip["L_min"] + tip["delta_L"], "[tip] L_min + delta_L")
    dia = cfg.sections.get("diagram")
    if dia is not None:
        check(dia["L_min"] + dia["delta_L_max"], "[diagram] L_min + delta_L_max")


def _parse_start(token: str) -> tuple[str, float]:
    try:
        label, at = token.split("@")
        if label not in ("e0", "e1", "e2", "e3", "e4", "e5"):
            raise ValueError(f"unknown branch label {label!r}")
        return label, float(at)
    except ValueError as exc:
        raise ConfigurationError(f"bad branch start {token!r} (need label@L): {exc}") from None


def load_config(path: Optional[str], overrides: dict[str, dict]) -> RunConfig:
    """Merge defaults, the optional INI file, and flag overrides."""
    sections = {name: dict(vals) for name, vals in _DEFAULTS.items() if name != "run"}
    params_map: dict[str, float] = {}
    workers: Optional[int] = None
    out_dir: Optional[str] = None

    if path is not None:
        cp = configparser.ConfigParser()
        read = cp.read(path)
        if not read:
            raise ConfigurationError(f"config file {path!r} not found")
        for section in cp.sections():
            if section not in _SCHEMAS:
                raise ConfigurationError(f"unknown config section [{section}]")
            schema = _SCHEMAS[section]
            for key, raw in cp[section].items():
                if key not in schema:
                    raise ConfigurationError(f"unknown key {key!r} in section [{section}]")
                val = _parse_value(schema[key], raw, key)
                if section == "params":
                    params_map[key] = val
                elif section == "run":
                    if key == "workers":
                        workers = val
                    else:
                        out_dir = val
                else:
                    sections[section][key] = val

    for section, kv in overrides.items():
        schema = _SCHEMAS[section]
        for key, raw in kv.items():
            if raw is None:
                continue
            if key not in schema:
                raise ConfigurationError(f"unknown key {key!r} for [{section}]")
            val = _parse_value(schema[key], raw, key)
            if section == "params":
                params_map[key] = val
            elif section == "run":
                if key == "workers":
                    workers = val
                else:
                    out_dir = val
            else:
                sections[section][key] = val

    try:
        params = Params.from_mapping(params_map) if params_map else Params()
    except ValueError as exc:
        raise ConfigurationError(f"invalid params: {exc}") from None
    cfg = RunConfig(params, sections, workers, out_dir)
    _validate_luminosities(cfg)
    return cfg


def _resolve_outdir(cfg: RunConfig, flag_value: Optional[str]) -> Path:
    import os

    chosen = flag_value or cfg.out_dir or os.environ.get(ENV_OUTDIR) or "daisyworld-out"
    return io.ensure_dir(chosen)


def _eq_by_label(L: float, label: str, p: Params):
    for e in enumerate_equilibria(L, p):
        if e.label == label:
            return e
    raise ConfigurationError(f"no equilibrium labeled {label} at L={L:g}")


# ---------------------------------------------------------------------------
# subcommand bodies (return a list of written file names)

def _cmd_equilibria(cfg: RunConfig, out: Path) -> list[str]:
    sec = cfg.section("equilibria")
    rows = []
    for L in sec["L"]:
        rows.extend(enumerate_equilibria(L, cfg.params))
    io.write_equilibria_csv(out / "equilibria.csv", rows)
    return ["equilibria.csv"]


def _cmd_continue(cfg: RunConfig, out: Path) -> list[str]:
    sec = cfg.section("continue")
    L_range = (sec["L_min"], sec["L_max"])
    written = []
    branches: list[Branch] = []
    for token in sec["starts"]:
        label, L0 = _parse_start(token)
        start = _eq_by_label(L0, label, cfg.params)
        br = continue_branch(start, L_range, cfg.params)
        branches.append(br)
        name = f"branch_{br.label}.csv"
        io.write_branch_csv(out / name, br)
        written.append(name)
    io.write_folds_csv(out / "folds.csv", branches)
    written.append("folds.csv")
    return written


def _cmd_basins(cfg: RunConfig, out: Path) -> list[str]:
    sec = cfg.section("basins")
    written = []
    for L in sec["L"]:
        grid = basin_grid(L, cfg.params, resolution=sec["resolution"], workers=cfg.workers)
        stem = f"basins_L{L:g}"
        io.write_basin_csv(out / f"{stem}.csv", out / f"{stem}.json", grid)
        written.extend([f"{stem}.csv", f"{stem}.json"])
    return written


def _cmd_manifold(cfg: RunConfig, out: Path) -> list[str]:
    sec = cfg.section("manifold")
    saddle = _eq_by_label(sec["L"], sec["saddle"], cfg.params)
    curve = stable_manifold(saddle, cfg.params)
    name = f"manifold_{sec['saddle']}_L{sec['L']:g}.csv"
    io.write_manifold_csv(out / name, curve)
    return [name]


def _cmd_tip(cfg: RunConfig, out: Path) -> list[str]:
    sec = cfg.section("tip")
    f = ForcingSpec(sec["L_min"], sec["delta_L"], sec["r"])
    outcome = run_experiment(f, cfg.params)
    outcome.trajectory.to_csv(out / "tip_trajectory.csv", cfg.params)
    io.write_json(
        out / "tip_outcome.json",
        {
            "classification": outcome.classification,
            "final_attractor": outcome.final_attractor,
            "crossed_manifold": outcome.crossed_manifold,
            "min_distance_to_saddle": outcome.min_distance_to_saddle,
            "L_min": f.L_min,
            "delta_L": f.delta_L,
            "r": f.r,
        },
    )
    print(f"tip: classification={outcome.classification}")
    return ["tip_trajectory.csv", "tip_outcome.json"]


def _diagram_grids(sec: dict) -> tuple[np.ndarray, np.ndarray]:
    rs = np.logspace(np.log10(sec["r_min"]), np.log10(sec["r_max"]), sec["r_count"])
    dls = np.linspace(sec["delta_L_min"], sec["delta_L_max"], sec["delta_L_count"])
    return rs, dls


def _cmd_diagram(cfg: RunConfig, out: Path) -> list[str]:
    sec = cfg.section("diagram")
    rs, dls = _diagram_grids(sec)
    diagram = tipping_diagram(
        sec["L_min"], rs, dls, cfg.params, workers=cfg.workers, crit_tol=sec["crit_tol"]
    )
    io.write_diagram_csv(out / "diagram.csv", diagram)
    io.write_critical_curve_csv(out / "critical_curve.csv", diagram)
    return ["diagram.csv", "critical_curve.csv"]


def _cmd_figures_data(cfg: RunConfig, out: Path) -> list[str]:
    """One dataset per figure panel; partial failure still writes the rest."""
    sec = cfg.section("figures-data")
    p = cfg.params
    written: list[str] = []
    errors: list[str] = []

    def step(fn, description):
        try:
            written.extend(fn())
        except Exception as exc:  # noqa: BLE001 - recorded and reported
            errors.append(f"{description}: {exc}")

    def branches_step():
        out_names = []
        branches = []
        for token in ("e5@1.0", "e2@1.4", "e3@0.68", "e0@1.0"):
            label, L0 = _parse_start(token)
            start = _eq_by_label(L0, label, p)
            br = continue_branch(start, (sec["branch_L_min"], sec["branch_L_max"]), p)
            branches.append(br)
            name = f"branch_{br.label}.csv"
            io.write_branch_csv(out / name, br)
            out_names.append(name)
        io.write_folds_csv(out / "folds.csv", branches)
        out_names.append("folds.csv")
        return out_names

    def equilibria_step():
        rows = []
        for L in sec["equilibria_L"]:
            rows.extend(enumerate_equilibria(L, p))
        io.write_equilibria_csv(out / "equilibria_grid.csv", rows)
        return ["equilibria_grid.csv"]

    def portraits_step():
        names = []
        index = []
        for L in sec["portrait_L"]:
            eqs = enumerate_equilibria(L, p)
            eq_name = f"portrait_L{L:g}.csv"
            io.write_equilibria_csv(out / eq_name, eqs)
            names.append(eq_name)
            entry = {"L": L, "equilibria": eq_name, "manifolds": []}
            for e in eqs:
                if e.is_saddle and sum(1 for lam in e.eigenvalues if lam.real < 0) == 1:
                    if e.label not in ("e1", "e4"):
                        continue
                    m_name = f"manifold_{e.label}_L{L:g}.csv"
                    io.write_manifold_csv(out / m_name, stable_manifold(e, p))
                    names.append(m_name)
                    entry["manifolds"].append(m_name)
            index.append(entry)
        io.write_json(out / "portraits.json", {"portraits": index})
        names.append("portraits.json")
        return names

    def btip_step():
        white = _eq_by_label(1.4, "e2", p)
        res_w = quasistatic_ramp(white, 1.6, p, rate=sec["ramp_rate"])
        res_w.trajectory.to_csv(out / "btip_white.csv", p)
        black = _eq_by_label(0.68, "e3", p)
        res_b = quasistatic_ramp(black, 0.55, p, rate=sec["ramp_rate"])
        res_b.trajectory.to_csv(out / "btip_black.csv", p)
        io.write_json(
            out / "btip.json",
            {
                "white": {"start_L": 1.4, "end_L": 1.6, "collapsed": res_w.collapsed},
                "black": {"start_L": 0.68, "end_L": 0.55, "collapsed": res_b.collapsed},
                "rate": sec["ramp_rate"],
            },
        )
        return ["btip_white.csv", "btip_black.csv", "btip.json"]

    L_min = DEFAULT_L_MIN
    L_max = L_min + sec["tip_delta_L"]

    def rtip_step():
        names = []
        outcomes = {}
        for tag, r in (("track", sec["tip_r_track"]), ("tip", sec["tip_r_tip"])):
            outcome = run_experiment(ForcingSpec(L_min, sec["tip_delta_L"], r), p)
            name = f"rtip_{tag}.csv"
            outcome.trajectory.to_csv(out / name, p)
            outcomes[tag] = {
                "r": r,
                "classification": outcome.classification,
                "crossed_manifold": outcome.crossed_manifold,
            }
            names.append(name)
        io.write_json(
            out / "rtip.json",
            {"L_min": L_min, "delta_L": sec["tip_delta_L"], "outcomes": outcomes},
        )
        names.append("rtip.json")
        return names

    def surface_step():
        rows = []
        lo = None
        for L in np.linspace(1.196, L_max, sec["surface_samples"]):
            whites = single_species_equilibria(L, "white", p)
            e1 = next((e for e in whites if e.label == "e1" and e.is_saddle), None)
            if e1 is None:
                continue
            curve = stable_manifold(e1, p)
            keep = curve.points[::8]
            rows.extend((L, float(aw), float(ab)) for aw, ab in keep)
            lo = L if lo is None else lo
        with open(out / "manifold_surface.csv", "w", encoding="utf-8", newline="\n") as f:
            f.write("L,alpha_w,alpha_b\n")
            for L, aw, ab in rows:
                f.write(f"{io.fmt(L)},{io.fmt(aw)},{io.fmt(ab)}\n")
        return ["manifold_surface.csv"]

    def basins_step():
        e5_min = coexistence_analytic(L_min, p)
        L_BI = find_L_BI(
            e5_min, (sec["L_BI_bracket_low"], sec["L_BI_bracket_high"]), p
        )
        names = []
        for stem, L in (("basins_Lmax", L_max), ("basins_LBI", L_BI)):
            grid = basin_grid(L, p, resolution=sec["basin_resolution"], workers=cfg.workers)
            io.write_basin_csv(out / f"{stem}.csv", out / f"{stem}.json", grid)
            names.extend([f"{stem}.csv", f"{stem}.json"])
        io.write_json(
            out / "geometry.json",
            {
                "L_min": L_min,
                "L_max": L_max,
                "L_BI": L_BI,
                "e5_at_L_min": {"alpha_w": e5_min.alpha_w, "alpha_b": e5_min.alpha_b},
            },
        )
        names.append("geometry.json")
        return names

    def diagram_step():
        rs = np.logspace(
            np.log10(float(DEFAULT_R_GRID[0])),
            np.log10(float(DEFAULT_R_GRID[-1])),
            sec["diagram_r_count"],
        )
        dls = np.linspace(
            float(DEFAULT_DELTA_L_GRID[0]),
            float(DEFAULT_DELTA_L_GRID[-1]),
            sec["diagram_delta_L_count"],
        )
        diagram = tipping_diagram(
            L_min, rs, dls, p, workers=cfg.workers, crit_tol=sec["diagram_crit_tol"]
        )
        io.write_diagram_csv(out / "diagram.csv", diagram)
        io.write_critical_curve_csv(out / "critical_curve.csv", diagram)
        return ["diagram.csv", "critical_curve.csv"]

    step(branches_step, "branches (fig 1a, 2)")
    step(equilibria_step, "equilibria grid (fig 2)")
    step(portraits_step, "phase portraits (fig 1b)")
    step(btip_step, "quasi-static ramps (fig 3)")
    step(rtip_step, "rate-induced trajectories (fig 4)")
    step(surface_step, "manifold surface (fig 4)")
    step(basins_step, "basin maps (fig BI)")
    step(diagram_step, "tipping diagram (fig 5)")

    if errors:
        raise _PartialFailure(written, errors)
    return written


class _PartialFailure(DaisyworldError):
    def __init__(self, written: list[str], errors: list[str]):
        super().__init__("; ".join(errors))
        self.written = written
        self.errors = errors


_COMMANDS = {
    "equilibria": _cmd_equilibria,
    "continue": _cmd_continue,
    "basins": _cmd_basins,
    "manifold": _cmd_manifold,
    "tip": _cmd_tip,
    "diagram": _cmd_diagram,
    "reproduce-figures-data": _cmd_figures_data,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="daisyworld",
        description="Daisyworld tipping analysis: datasets for equilibria, "
        "branches, basins, manifolds, and forced experiments.",
    )
    ap.add_argument("--version", action="version", version=f"daisyworld {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--out", help=f"output directory (or ${ENV_OUTDIR})")
        sp.add_argument("--workers", type=int, help="parallel worker bound")
        sp.add_argument("--echo-config", action="store_true",
                        help="print the effective config and exit")

    sp = sub.add_parser("equilibria", help="enumerate equilibria at given L values")
    common(sp)
    sp.add_argument("--L", help="luminosity list (comma or space separated)")

    sp = sub.add_parser("continue", help="trace equilibrium branches and folds")
    common(sp)
    sp.add_argument("--start", action="append", dest="starts",
                    help="branch start label@L (repeatable)")
    sp.add_argument("--Lmin", dest="L_min", type=float)
    sp.add_argument("--Lmax", dest="L_max", type=float)

    sp = sub.add_parser("basins", help="basin-of-attraction grids")
    common(sp)
    sp.add_argument("--L", help="luminosity list")
    sp.add_argument("--resolution", type=int)

    sp = sub.add_parser("manifold", help="stable manifold of a saddle")
    common(sp)
    sp.add_argument("--saddle", help="saddle label (e1 or e4)")
    sp.add_argument("--L", type=float)

    sp = sub.add_parser("tip", help="one forced tipping experiment")
    common(sp)
    sp.add_argument("--Lmin", dest="L_min", type=float)
    sp.add_argument("--dL", dest="delta_L", type=float)
    sp.add_argument("--r", type=float)

    sp = sub.add_parser("diagram", help="tipping diagram over (r, delta_L)")
    common(sp)
    sp.add_argument("--Lmin", dest="L_min", type=float)
    sp.add_argument("--r-min", dest="r_min", type=float)
    sp.add_argument("--r-max", dest="r_max", type=float)
    sp.add_argument("--r-count", dest="r_count", type=int)
    sp.add_argument("--dL-min", dest="delta_L_min", type=float)
    sp.add_argument("--dL-max", dest="delta_L_max", type=float)
    sp.add_argument("--dL-count", dest="delta_L_count", type=int)

    sp = sub.add_parser("reproduce-figures-data",
                        help="emit every figure dataset bundle")
    common(sp)
    sp.add_argument("--basin-resolution", dest="basin_resolution", type=int)
    sp.add_argument("--diagram-r-count", dest="diagram_r_count", type=int)
    sp.add_argument("--diagram-dL-count", dest="diagram_delta_L_count", type=int)
    sp.add_argument("--surface-samples", dest="surface_samples", type=int)

    return ap


_SECTION_FOR_COMMAND = {
    "equilibria": "equilibria",
    "continue": "continue",
    "basins": "basins",
    "manifold": "manifold",
    "tip": "tip",
    "diagram": "diagram",
    "reproduce-figures-data": "figures-data",
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            print("error: config: invalid command line", file=sys.stderr)
            return 1
        return 0

    section = _SECTION_FOR_COMMAND[args.command]
    overrides: dict[str, dict] = {section: {}, "run": {}}
    for key in _SCHEMAS[section]:
        if hasattr(args, key):
            overrides[section][key] = getattr(args, key)
    overrides["run"]["workers"] = args.workers
    overrides["run"]["out"] = args.out

    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config, overrides)
        if args.echo_config:
            sys.stdout.write(cfg.to_ini_text())
            return 0
        out = _resolve_outdir(cfg, args.out)
        if cfg.workers is not None:
            set_num_threads(cfg.workers)
        outputs = _COMMANDS[args.command](cfg, out)
        manifest = {
            "command": args.command,
            "version": __version__,
            "numba": USING_NUMBA,
            "config": cfg.echo(),
            "outputs": sorted(outputs),
            "wall_time_s": time.perf_counter() - t0,
        }
        io.write_json(out / "run_manifest.json", manifest)
        print(f"wrote {len(outputs)} dataset(s) to {out}")
        return 0
    except ConfigurationError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1
    except _PartialFailure as exc:
        try:
            manifest = {
                "command": args.command,
                "version": __version__,
                "numba": USING_NUMBA,
                "config": cfg.echo(),
                "outputs": sorted(exc.written),
                "errors": exc.errors,
                "wall_time_s": time.perf_counter() - t0,
            }
            io.write_json(out / "run_manifest.json", manifest)
        finally:
            print(f"error: numeric: partial figure bundle: {exc}", file=sys.stderr)
        return 2
    except DaisyworldError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
