"""Pseudo-arclength continuation of equilibrium branches in (a_w, a_b, L),
saddle-node (fold) location, and quasi-static luminosity ramps.

A branch point is corrected by Newton on the extended system {rhs = 0,
tangent . (y - y_pred) = 0} using the same finite-difference Jacobian as
the equilibria module, bordered with the secant tangent row.  The step
adapts between ds_min and ds_max on corrector iteration count, so folds
are traversed (L reverses along the branch).  Transcritical contacts with
the simplex faces are not crossed: continuation stops when a cover that
was positive at the start drops to the cover floor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .equilibria import (
    Equilibrium,
    GrowthCutoffWarning,
    jacobian,
    make_equilibrium,
    stable_attractors,
)
from .errors import UnresolvedError
from .model import Params, State
from .solver import ConvergenceResult, IntegratorOptions, Trajectory, converge_to_attractor, integrate_forced
from . import kernels


@dataclass(frozen=True)
class ContinuationOptions:
    ds_min: float = 1e-5
    ds_max: float = 5e-2
    ds_initial: float = 1e-3
    corrector_tol: float = 1e-12
    max_corrector_iter: int = 12
    grow_below: int = 3      # corrector iterations at or below this double ds
    shrink_above: int = 8    # iterations above this halve ds even on success
    cover_floor: float = 1e-6
    max_points: int = 20000
    fold_refine_tol: float = 1e-6   # |dL| across the refined fold bracket
    fold_det_tol: float = 1e-2      # |det J| allowance at the refined fold


@dataclass(frozen=True)
class FoldPoint:
    """A saddle-node: the refined equilibrium and its luminosity.  The
    eigenvalue cross-check (det J changes sign across the fold and stays
    small at it) is recorded, never silently dropped."""

    equilibrium: Equilibrium
    L_fold: float
    eigen_check: bool = True


@dataclass
class Branch:
    """Ordered continuation curve with its detected folds."""

    points: list[Equilibrium]
    folds: list[FoldPoint]
    label: str
    truncated: bool = False

    @property
    def L_values(self) -> np.ndarray:
        return np.array([e.L for e in self.points])


def _rhs_vec(y: np.ndarray, p_arr: np.ndarray) -> np.ndarray:
    dw, db, ok = kernels.rhs_scalar(y[0], y[1], y[2], p_arr)
    if not ok:
        raise UnresolvedError(f"nonphysical climate at L={y[2]:g} during continuation")
    return np.array([dw, db])


def _extended_jacobian(y: np.ndarray, p: Params) -> np.ndarray:
    """2x3 derivative of rhs with respect to (a_w, a_b, L)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GrowthCutoffWarning)
        J2 = jacobian((y[0], y[1]), y[2], p)
    p_arr = p.as_array()
    hL = 1e-7 * max(1.0, abs(y[2]))
    fp = _rhs_vec(np.array([y[0], y[1], y[2] + hL]), p_arr)
    fm = _rhs_vec(np.array([y[0], y[1], y[2] - hL]), p_arr)
    M = np.empty((2, 3))
    M[:, :2] = J2
    M[:, 2] = (fp - fm) / (2.0 * hL)
    return M


def _nullspace_tangent(y: np.ndarray, p: Params) -> np.ndarray:
    """Unit tangent of the solution curve: cross product of the two rows of
    the extended Jacobian."""
    M = _extended_jacobian(y, p)
    t = np.cross(M[0], M[1])
    n = np.linalg.norm(t)
    if n == 0.0:
        raise UnresolvedError(f"degenerate tangent at L={y[2]:g}")
    return t / n


def _correct(
    y_pred: np.ndarray,
    tangent: np.ndarray,
    p: Params,
    opts: ContinuationOptions,
) -> tuple[Optional[np.ndarray], int]:
    """Newton corrector on the bordered system; returns (point, iterations)
    or (None, iterations) on failure."""
    p_arr = p.as_array()
    z = y_pred.copy()
    for it in range(opts.max_corrector_iter + 1):
        F = _rhs_vec(z, p_arr)
        c = float(tangent @ (z - y_pred))
        if max(abs(F[0]), abs(F[1])) < opts.corrector_tol and abs(c) < 1e-12:
            return z, it
        M = np.empty((3, 3))
        M[:2] = _extended_jacobian(z, p)
        M[2] = tangent
        try:
            delta = np.linalg.solve(M, -np.array([F[0], F[1], c]))
        except np.linalg.LinAlgError:
            return None, it
        z = z + delta
        if not np.all(np.isfinite(z)):
            return None, it
    return None, opts.max_corrector_iter + 1


def _constrained_correct(
    y_guess: np.ndarray,
    component: int,
    target: float,
    p: Params,
    opts: ContinuationOptions,
) -> Optional[np.ndarray]:
    """Newton on {rhs = 0, y[component] = target}: pin one coordinate and
    solve for the other two (used to land branch endpoints exactly on the
    cover floor or the L-range boundary)."""
    p_arr = p.as_array()
    z = y_guess.copy()
    z[component] = target
    for _ in range(opts.max_corrector_iter + 1):
        F = _rhs_vec(z, p_arr)
        c = z[component] - target
        if max(abs(F[0]), abs(F[1])) < opts.corrector_tol and abs(c) < 1e-14:
            return z
        M = np.zeros((3, 3))
        M[:2] = _extended_jacobian(z, p)
        M[2, component] = 1.0
        try:
            delta = np.linalg.solve(M, -np.array([F[0], F[1], c]))
        except np.linalg.LinAlgError:
            return None
        z = z + delta
        if not np.all(np.isfinite(z)):
            return None
    return None


def _det_jacobian(y: np.ndarray, p: Params) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GrowthCutoffWarning)
        J = jacobian((y[0], y[1]), y[2], p)
    return float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])


def _as_vec(e: Equilibrium) -> np.ndarray:
    return np.array([e.alpha_w, e.alpha_b, e.L])


def _sweep(
    y0: np.ndarray,
    direction: float,
    L_range: tuple[float, float],
    p: Params,
    opts: ContinuationOptions,
    floor_w: bool,
    floor_b: bool,
) -> tuple[list[np.ndarray], bool]:
    """Walk one direction from y0; returns raw points (excluding y0) and a
    truncation flag."""
    lo, hi = L_range
    t = _nullspace_tangent(y0, p)
    if abs(t[2]) > 1e-12:
        t = t * (direction * np.sign(t[2]))
    elif t[0] != 0.0:
        t = t * (direction * np.sign(t[0]))
    y = y0
    ds = opts.ds_initial
    out: list[np.ndarray] = []
    truncated = False
    left_start = False
    while len(out) < opts.max_points:
        y_pred = y + ds * t
        z, iters = _correct(y_pred, t, p, opts)
        if z is not None and np.linalg.norm(z - y) > 3.0 * ds + 1e-12:
            z = None  # corrector wandered off the local curve segment
        if z is None:
            ds *= 0.5
            if ds < opts.ds_min:
                truncated = True
                break
            continue
        _snap_axis(z)
        step = z - y
        norm = np.linalg.norm(step)
        if norm == 0.0:
            truncated = True
            break
        hit = None  # (component, target) of a boundary the step crossed
        if floor_w and z[0] < opts.cover_floor:
            hit = (0, opts.cover_floor)
        elif floor_b and z[1] < opts.cover_floor:
            hit = (1, opts.cover_floor)
        elif z[2] < lo:
            hit = (2, lo)
        elif z[2] > hi:
            hit = (2, hi)
        if hit is not None:
            clamped = _constrained_correct(0.5 * (y + z), hit[0], hit[1], p, opts)
            if clamped is not None and np.linalg.norm(clamped - y) < 3.0 * ds + 1e-9:
                out.append(_snap_axis(clamped))
            break
        out.append(z)
        t = step / norm
        y = z
        if iters <= opts.grow_below:
            ds = min(ds * 2.0, opts.ds_max)
        elif iters > opts.shrink_above:
            ds = max(ds * 0.5, opts.ds_min)
        if np.linalg.norm(y - y0) > 10 * opts.ds_max:
            left_start = True
        if left_start and np.linalg.norm(y - y0) < opts.ds_min:
            break  # closed loop back onto the start
    else:
        truncated = True
    return out, truncated


def _branch_family(label: str) -> str:
    return {"e1": "white", "e2": "white", "e3": "black", "e4": "black"}.get(label, label)


def _toggle(label: str) -> str:
    return {"e1": "e2", "e2": "e1", "e3": "e4", "e4": "e3"}.get(label, label)


def _snap_axis(y: np.ndarray) -> np.ndarray:
    """Flush cover components that are numerically zero (corrector noise on
    the invariant axes) to exact zeros."""
    for j in (0, 1):
        if abs(y[j]) < 1e-12:
            y[j] = 0.0
    return y


def _curve_midpoint(
    x: np.ndarray, y: np.ndarray, p: Params, opts: ContinuationOptions
) -> Optional[np.ndarray]:
    chord = y - x
    nrm = np.linalg.norm(chord)
    if nrm < 1e-14:
        return None
    z, _ = _correct(x + 0.5 * chord, chord / nrm, p, opts)
    return z


def _detect_folds_raw(
    raw: Sequence[np.ndarray], p: Params, opts: ContinuationOptions
) -> list[tuple[int, np.ndarray, bool]]:
    """Sign changes of dL/ds along the raw point list, refined by bisection
    on the arclength parameter.  Returns (index, refined point, check)."""
    folds = []
    n = len(raw)
    for i in range(1, n - 1):
        d1 = raw[i][2] - raw[i - 1][2]
        d2 = raw[i + 1][2] - raw[i][2]
        if d1 == 0.0 or d2 == 0.0 or (d1 > 0) == (d2 > 0):
            continue
        a, m, b = raw[i - 1].copy(), raw[i].copy(), raw[i + 1].copy()
        sign = 1.0 if d1 > 0.0 else -1.0  # fold is an L maximum when climbing
        for _ in range(80):
            if abs(a[2] - b[2]) < opts.fold_refine_tol and (
                abs(a[2] - m[2]) < opts.fold_refine_tol
            ):
                break
            am = _curve_midpoint(a, m, p, opts)
            mb = _curve_midpoint(m, b, p, opts)
            if am is None or mb is None:
                break
            five = [a, am, m, mb, b]
            j = int(np.argmax([sign * pt[2] for pt in five]))
            j = min(max(j, 1), 3)
            a, m, b = five[j - 1], five[j], five[j + 1]
        det_a = _det_jacobian(raw[i - 1], p)
        det_b = _det_jacobian(raw[i + 1], p)
        det_m = _det_jacobian(m, p)
        check = (det_a * det_b < 0.0) and abs(det_m) < opts.fold_det_tol
        folds.append((i, m, check))
    return folds


def continue_branch(
    start: Equilibrium,
    L_range: tuple[float, float],
    p: Params,
    opts: Optional[ContinuationOptions] = None,
) -> Branch:
    """Trace the equilibrium branch through ``start`` across ``L_range``.

    Both directions are swept and merged.  The walk ends at the range
    boundary, at a simplex-face contact (a cover that was positive at the
    start reaches the cover floor), or on corrector failure at the minimum
    step (flagged as truncated).
    """
    opts = opts or ContinuationOptions()
    lo, hi = float(L_range[0]), float(L_range[1])
    if not lo < hi:
        raise ValueError(f"invalid L range ({lo}, {hi})")
    if not lo <= start.L <= hi:
        raise ValueError(f"start L={start.L:g} outside range ({lo}, {hi})")
    y0 = _as_vec(start)
    floor_w = abs(start.alpha_w) > opts.cover_floor
    floor_b = abs(start.alpha_b) > opts.cover_floor

    up, trunc_up = _sweep(y0, +1.0, (lo, hi), p, opts, floor_w, floor_b)
    down, trunc_down = _sweep(y0, -1.0, (lo, hi), p, opts, floor_w, floor_b)
    raw = [pt for pt in reversed(down)] + [y0] + up
    start_idx = len(down)

    fold_data = _detect_folds_raw(raw, p, opts)

    # sheet labels: the segment holding the start keeps its label and each
    # fold crossing toggles within the family
    labels = [""] * len(raw)
    fold_indices = [i for i, _, _ in fold_data]
    lab = start.label
    labels[start_idx] = lab
    cur = lab
    for i in range(start_idx + 1, len(raw)):
        if i in fold_indices:
            cur = _toggle(cur)
        labels[i] = cur
    cur = lab
    for i in range(start_idx - 1, -1, -1):
        if (i + 1) in fold_indices:
            cur = _toggle(cur)
        labels[i] = cur

    points = []
    for y, lab_i in zip(raw, labels):
        points.append(make_equilibrium((y[0], y[1]), y[2], p, lab_i))

    folds = []
    for i, y_fold, check in fold_data:
        eq = make_equilibrium((y_fold[0], y_fold[1]), y_fold[2], p, labels[i])
        folds.append(FoldPoint(eq, float(y_fold[2]), check))

    return Branch(points, folds, _branch_family(start.label), trunc_up or trunc_down)


def branch_point_at(
    branch: Branch,
    L: float,
    p: Params,
    label: Optional[str] = None,
    opts: Optional[ContinuationOptions] = None,
) -> Optional[Equilibrium]:
    """Re-correct the branch at an exact luminosity.

    Starts a fixed-L Newton from the branch point nearest in L (restricted
    to one sheet when ``label`` is given); None when the branch has no
    point within one max arclength step of that L."""
    opts = opts or ContinuationOptions()
    Lf = float(L)
    idxs = [
        i for i, e in enumerate(branch.points) if label is None or e.label == label
    ]
    if not idxs:
        return None
    nearest_i = min(idxs, key=lambda i: abs(branch.points[i].L - Lf))
    nearest = branch.points[nearest_i]
    if abs(nearest.L - Lf) > 2.0 * opts.ds_max:
        return None
    # secant predictor through the nearest point and its better neighbor
    # keeps the corrector on the right sheet
    guess = _as_vec(nearest)
    neighbors = [j for j in (nearest_i - 1, nearest_i + 1) if j in idxs]
    if neighbors:
        j = min(neighbors, key=lambda j: abs(branch.points[j].L - Lf))
        yj = _as_vec(branch.points[j])
        if yj[2] != guess[2]:
            guess = guess + (yj - guess) * ((Lf - guess[2]) / (yj[2] - guess[2]))
    z = _constrained_correct(guess, 2, Lf, p, opts)
    if z is None:
        return None
    return make_equilibrium(tuple(_snap_axis(z)[:2]), Lf, p, nearest.label)


def detect_folds(
    branch: Branch, p: Params, opts: Optional[ContinuationOptions] = None
) -> list[FoldPoint]:
    """Locate saddle-nodes on an already-computed branch (>= 3 points)."""
    if len(branch.points) < 3:
        raise ValueError("fold detection needs at least 3 branch points")
    opts = opts or ContinuationOptions()
    raw = [_as_vec(e) for e in branch.points]
    out = []
    for i, y_fold, check in _detect_folds_raw(raw, p, opts):
        eq = make_equilibrium(
            (y_fold[0], y_fold[1]), y_fold[2], p, branch.points[i].label
        )
        out.append(FoldPoint(eq, float(y_fold[2]), check))
    return out


@dataclass(frozen=True)
class QuasistaticResult:
    """Outcome of a slow ramp: the forced trajectory, whether the biosphere
    collapsed to the dead planet, and where the frozen end state settled."""

    trajectory: Trajectory
    collapsed: bool
    settled: ConvergenceResult


class _Ramp:
    """Monotone tanh ramp; delta_L may be negative for decreasing L."""

    def __init__(self, L_start: float, L_end: float, rate: float):
        self.L_min = L_start
        self.delta_L = L_end - L_start
        self.r = rate


def quasistatic_ramp(
    start: Equilibrium,
    L_end: float,
    p: Params,
    rate: float = 1e-3,
    opts: Optional[IntegratorOptions] = None,
) -> QuasistaticResult:
    """Ramp the luminosity slowly from the start equilibrium to ``L_end``
    through the tanh profile at the given (small) rate, then let the frozen
    system settle.  Collapse means the end state converged to the origin."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    opts = opts or IntegratorOptions()
    ramp = _Ramp(start.L, float(L_end), float(rate))
    window = 8.0 / rate
    traj = integrate_forced(start.state, ramp, (-window, window), p, opts)
    known = stable_attractors(float(L_end), p)
    settled = converge_to_attractor(traj.final_state, float(L_end), known, p, opts)
    collapsed = settled.resolved and settled.attractor.label == "e0"
    return QuasistaticResult(traj, collapsed, settled)
