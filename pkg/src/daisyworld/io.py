"""Dataset writers.

All CSV files use comma separation, '.' decimals, 17 significant digits, a
header row, and LF line endings, so identical inputs produce byte-identical
files on any platform.

Schemas
-------
equilibria / branch points:
    L,alpha_w,alpha_b,label,stability,re_lambda1,im_lambda1,re_lambda2,im_lambda2,T_e
    (branch files add an ``is_fold`` 0/1 marker column)
folds:
    branch,L_fold,alpha_w,alpha_b
trajectories:
    t,alpha_w,alpha_b[,L],T_e           (L column only for forced runs)
manifolds:
    alpha_w,alpha_b                      (ordered by arclength)
basin grids:
    CSV matrix of integer class codes (row i = alpha_b level, column j =
    alpha_w level) plus a JSON header file with the legend
tipping diagram:
    r,delta_L,classification,within_e5_range
critical curve:
    r,delta_L_crit
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .continuation import Branch
from .equilibria import Equilibrium
from .geometry import BasinGrid, ManifoldCurve
from .model import Params
from .solver import Trajectory
from .tipping import CLASS_NAMES, TippingDiagram


def fmt(x: float) -> str:
    return f"{x:.17g}"


def _open(path):
    return open(path, "w", encoding="utf-8", newline="\n")


EQUILIBRIA_HEADER = (
    "L,alpha_w,alpha_b,label,stability,"
    "re_lambda1,im_lambda1,re_lambda2,im_lambda2,T_e"
)


def _equilibrium_row(e: Equilibrium) -> str:
    l1, l2 = e.eigenvalues
    return ",".join(
        [
            fmt(e.L),
            fmt(e.alpha_w),
            fmt(e.alpha_b),
            e.label,
            e.stability,
            fmt(l1.real),
            fmt(l1.imag),
            fmt(l2.real),
            fmt(l2.imag),
            fmt(e.T_e),
        ]
    )


def write_equilibria_csv(path, eqs: Sequence[Equilibrium]) -> None:
    with _open(path) as f:
        f.write(EQUILIBRIA_HEADER + "\n")
        for e in eqs:
            f.write(_equilibrium_row(e) + "\n")


def write_branch_csv(path, branch: Branch) -> None:
    fold_idx = set()
    for fp in branch.folds:
        best, best_d = -1, np.inf
        for i, e in enumerate(branch.points):
            d = (
                (e.alpha_w - fp.equilibrium.alpha_w) ** 2
                + (e.alpha_b - fp.equilibrium.alpha_b) ** 2
                + (e.L - fp.L_fold) ** 2
            )
            if d < best_d:
                best, best_d = i, d
        fold_idx.add(best)
    with _open(path) as f:
        f.write(EQUILIBRIA_HEADER + ",is_fold\n")
        for i, e in enumerate(branch.points):
            f.write(_equilibrium_row(e) + (",1\n" if i in fold_idx else ",0\n"))


def write_folds_csv(path, branches: Iterable[Branch]) -> None:
    with _open(path) as f:
        f.write("branch,L_fold,alpha_w,alpha_b\n")
        for br in branches:
            for fp in br.folds:
                f.write(
                    f"{br.label},{fmt(fp.L_fold)},"
                    f"{fmt(fp.equilibrium.alpha_w)},{fmt(fp.equilibrium.alpha_b)}\n"
                )


def write_trajectory_csv(path, traj: Trajectory, p: Params) -> None:
    forced = traj.forcing_values is not None
    Ls = traj.luminosities()
    p_arr = p.as_array()
    with _open(path) as f:
        f.write("t,alpha_w,alpha_b,L,T_e\n" if forced else "t,alpha_w,alpha_b,T_e\n")
        for i in range(traj.times.size):
            aw = float(traj.states[i, 0])
            ab = float(traj.states[i, 1])
            _, Te4, _, _, _, _ = kernels.climate_scalar(aw, ab, float(Ls[i]), p_arr)
            cols = [fmt(traj.times[i]), fmt(aw), fmt(ab)]
            if forced:
                cols.append(fmt(float(Ls[i])))
            cols.append(fmt(Te4 ** 0.25))
            f.write(",".join(cols) + "\n")


def write_manifold_csv(path, curve: ManifoldCurve) -> None:
    with _open(path) as f:
        f.write("alpha_w,alpha_b\n")
        for aw, ab in curve.points:
            f.write(f"{fmt(aw)},{fmt(ab)}\n")


def write_basin_csv(csv_path, json_path, grid: BasinGrid) -> None:
    with _open(csv_path) as f:
        for i in range(grid.resolution):
            f.write(",".join(str(int(c)) for c in grid.classes[i]) + "\n")
    header = {
        "L": grid.L,
        "resolution": grid.resolution,
        "legend": {str(k): v for k, v in sorted(grid.legend().items())},
        "attractors": [
            {"label": e.label, "alpha_w": e.alpha_w, "alpha_b": e.alpha_b}
            for e in grid.attractors
        ],
        "n_unresolved": grid.n_unresolved,
        "n_valid": grid.n_valid,
    }
    write_json(json_path, header)


def write_diagram_csv(path, diagram: TippingDiagram) -> None:
    with _open(path) as f:
        f.write("r,delta_L,classification,within_e5_range\n")
        for i, dL in enumerate(diagram.delta_L_values):
            for j, r in enumerate(diagram.r_values):
                f.write(
                    f"{fmt(r)},{fmt(dL)},{CLASS_NAMES[int(diagram.classes[i, j])]},"
                    f"{1 if diagram.within_e5_range[i] else 0}\n"
                )


def write_critical_curve_csv(path, diagram: TippingDiagram) -> None:
    with _open(path) as f:
        f.write("r,delta_L_crit\n")
        for j, r in enumerate(diagram.r_values):
            c = diagram.critical_delta_L[j]
            if np.isfinite(c):
                f.write(f"{fmt(r)},{fmt(c)}\n")


def write_json(path, payload: dict) -> None:
    with _open(path) as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def ensure_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out
