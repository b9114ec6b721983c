"""Nonautonomous tipping experiments: the tanh luminosity ramp, tip/track
classification, critical-rate and critical-magnitude estimation, and the
(r, delta_L) tipping diagram.

Every experiment starts exactly at the coexistence equilibrium of the
initial luminosity, integrates the forced system over t in [-8/r, 8/r]
(tanh(8) is within 7e-7 of saturation), then freezes the luminosity at
L_max and converges to an attractor.  Tipping means landing on the dead
planet; tracking means any living attractor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .accel import set_num_threads
from .equilibria import Equilibrium, coexistence_analytic, single_species_equilibria, stable_attractors
from .errors import BracketError, ConfigurationError, UnresolvedError
from .geometry import ManifoldCurve, on_dead_side, stable_manifold
from .model import Params, State
from .solver import IntegratorOptions, Trajectory, converge_to_attractor, integrate_autonomous, integrate_forced

WINDOW_FACTOR = 8.0
DEFAULT_L_MIN = 0.8
DEFAULT_R_GRID = np.logspace(-2.0, 2.0, 25)
DEFAULT_DELTA_L_GRID = np.linspace(0.1, 0.8, 29)

TRACK, TIP, UNRESOLVED_CLASS = 0, 1, 2
CLASS_NAMES = {TRACK: "track", TIP: "tip", UNRESOLVED_CLASS: "unresolved"}


class AlwaysTracksError(BracketError):
    """The system tracks across the whole bracket (delta_L below the
    instantaneous basin-instability threshold)."""


class AlwaysTipsError(BracketError):
    """The system tips across the whole bracket (delta_L beyond what
    quasi-static forcing survives)."""


@dataclass(frozen=True)
class ForcingSpec:
    """Monotone tanh luminosity ramp L(t) = L_min + dL/2 (tanh(rt) + 1)."""

    L_min: float
    delta_L: float
    r: float

    def __post_init__(self) -> None:
        if self.delta_L < 0.0:
            raise ValueError(f"delta_L must be non-negative, got {self.delta_L}")
        if self.r <= 0.0:
            raise ValueError(f"rate must be positive, got {self.r}")
        if self.L_min <= 0.0:
            raise ValueError(f"L_min must be positive, got {self.L_min}")

    @property
    def L_max(self) -> float:
        return self.L_min + self.delta_L

    def value(self, t: float) -> float:
        return kernels.forcing_scalar(float(t), self.L_min, self.delta_L, self.r)

    @property
    def window(self) -> float:
        return WINDOW_FACTOR / self.r


@dataclass(frozen=True)
class TippingOutcome:
    """Classified result of one forced experiment."""

    classification: str  # "tip" | "track" | "unresolved"
    final_attractor: Optional[str]
    trajectory: Trajectory
    crossed_manifold: Optional[bool]
    min_distance_to_saddle: Optional[float] = None

    @property
    def tipped(self) -> bool:
        return self.classification == "tip"


def _require_e5(L: float, p: Params) -> Equilibrium:
    eq = coexistence_analytic(L, p)
    if eq is None or not eq.is_stable:
        raise ConfigurationError(
            f"coexistence equilibrium missing or unstable at L={L:g}; "
            f"the ramp leaves its existence range"
        )
    return eq


def _e1_if_present(L: float, p: Params) -> Optional[Equilibrium]:
    whites = single_species_equilibria(L, "white", p)
    for eq in whites:
        if eq.label == "e1" and eq.is_saddle:
            return eq
    return None


def run_experiment(
    f: ForcingSpec,
    p: Params,
    opts: Optional[IntegratorOptions] = None,
    check_manifold: bool = True,
    manifold_samples: int = 24,
) -> TippingOutcome:
    """Run one ramp experiment from e5(L_min) and classify the outcome.

    The returned trajectory covers the forcing window plus the recorded
    frozen-L_max settling phase.  ``crossed_manifold`` reports whether any
    sampled trajectory point lies on the dead side of the frozen stable
    manifold of e1 at its instantaneous luminosity (the basin threshold);
    it is None when the check is disabled.
    """
    opts = opts or IntegratorOptions()
    e5_min = _require_e5(f.L_min, p)
    _require_e5(f.L_max, p)

    T = f.window
    forced = integrate_forced(e5_min.state, f, (-T, T), p, opts)

    known = stable_attractors(f.L_max, p)
    settled = converge_to_attractor(forced.final_state, f.L_max, known, p, opts)

    if settled.elapsed > 0.0:
        frozen = integrate_autonomous(
            forced.final_state, f.L_max, (T, T + settled.elapsed), p, opts
        )
        times = np.concatenate((forced.times, frozen.times[1:]))
        states = np.vstack((forced.states, frozen.states[1:]))
        forcing_values = np.concatenate(
            (forced.forcing_values, np.full(frozen.times.size - 1, f.L_max))
        )
        trajectory = Trajectory(times, states, forcing_values=forcing_values)
    else:
        trajectory = forced

    if settled.resolved:
        label = settled.attractor.label
        classification = "tip" if label == "e0" else "track"
    else:
        label = None
        classification = "unresolved"

    saddle_at_max = _e1_if_present(f.L_max, p)
    min_dist = None
    if saddle_at_max is not None:
        d = np.hypot(
            trajectory.alpha_w - saddle_at_max.alpha_w,
            trajectory.alpha_b - saddle_at_max.alpha_b,
        )
        min_dist = float(d.min())

    crossed: Optional[bool] = None
    if check_manifold:
        crossed = False
        idx = np.unique(
            np.linspace(0, trajectory.times.size - 1, manifold_samples).astype(int)
        )
        curves: dict[float, Optional[ManifoldCurve]] = {}
        Ls = trajectory.luminosities()
        for i in idx:
            L_s = round(float(Ls[i]), 12)
            if L_s not in curves:
                saddle = _e1_if_present(L_s, p)
                curves[L_s] = None if saddle is None else stable_manifold(saddle, p)
            curve = curves[L_s]
            if curve is None:
                continue
            if on_dead_side(curve, trajectory.states[i]):
                crossed = True
                break

    return TippingOutcome(classification, label, trajectory, crossed, min_dist)


def _fast_classify(
    L_min: float,
    delta_L: float,
    r: float,
    start: State,
    attractors: list[Equilibrium],
    p: Params,
    opts: IntegratorOptions,
) -> tuple[int, Optional[str]]:
    eq_w = np.array([e.alpha_w for e in attractors])
    eq_b = np.array([e.alpha_b for e in attractors])
    idx, _, _, status, _ = kernels.experiment_kernel(
        L_min, delta_L, r, start.alpha_w, start.alpha_b, p.as_array(),
        eq_w, eq_b, opts.match_tol, opts.residual_tol, opts.chunk,
        opts.max_time, opts.rel_tol, opts.abs_tol, opts.max_step,
        opts.first_step(), 1e300, 1e300,
    )
    if idx < 0:
        return UNRESOLVED_CLASS, None
    label = attractors[idx].label
    return (TIP if label == "e0" else TRACK), label


def classify_experiment(
    L_min: float, delta_L: float, r: float, p: Params,
    opts: Optional[IntegratorOptions] = None,
) -> str:
    """Trajectory-free tip/track classification of one (delta_L, r) cell.

    Unlike :func:`run_experiment` this does not require the coexistence
    state to persist at L_max; beyond its range, tracking means reaching
    whatever living attractor remains."""
    opts = opts or IntegratorOptions()
    start = _require_e5(float(L_min), p).state
    attractors = stable_attractors(float(L_min) + float(delta_L), p)
    cls, _ = _fast_classify(float(L_min), float(delta_L), float(r), start, attractors, p, opts)
    return CLASS_NAMES[cls]


def critical_rate(
    L_min: float,
    delta_L: float,
    r_bracket: tuple[float, float],
    p: Params,
    rel_width: float = 1e-4,
    opts: Optional[IntegratorOptions] = None,
) -> float:
    """Critical rate r_c: tracking for r below, tipping for r above.

    Bisection in log r until the bracket's relative width drops below
    ``rel_width``.  Raises AlwaysTracksError / AlwaysTipsError when the
    bracket does not straddle the transition.
    """
    opts = opts or IntegratorOptions()
    Lm, dL = float(L_min), float(delta_L)
    lo, hi = float(r_bracket[0]), float(r_bracket[1])
    if not 0.0 < lo < hi:
        raise BracketError(f"invalid rate bracket ({lo}, {hi})")
    start = _require_e5(Lm, p).state
    _require_e5(Lm + dL, p)
    attractors = stable_attractors(Lm + dL, p)

    def classify(r: float) -> int:
        cls, _ = _fast_classify(Lm, dL, r, start, attractors, p, opts)
        if cls == UNRESOLVED_CLASS:
            raise UnresolvedError(f"experiment unresolved at r={r:g}")
        return cls

    if classify(lo) == TIP:
        raise AlwaysTipsError(
            f"already tipping at r={lo:g}; delta_L={dL:g} exceeds what this "
            f"rate range can survive"
        )
    if classify(hi) == TRACK:
        raise AlwaysTracksError(
            f"still tracking at r={hi:g}; delta_L={dL:g} is below the "
            f"instantaneous tipping threshold"
        )
    while hi / lo > 1.0 + rel_width:
        mid = math.sqrt(lo * hi)
        if classify(mid) == TIP:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


def critical_delta_L(
    L_min: float,
    r: float,
    delta_L_bracket: tuple[float, float],
    p: Params,
    tol: float = 1e-4,
    opts: Optional[IntegratorOptions] = None,
) -> float:
    """Smallest tipping delta_L at a fixed rate, by bisection to ``tol``."""
    opts = opts or IntegratorOptions()
    Lm, rf = float(L_min), float(r)
    lo, hi = float(delta_L_bracket[0]), float(delta_L_bracket[1])
    if not 0.0 <= lo < hi:
        raise BracketError(f"invalid delta_L bracket ({lo}, {hi})")
    start = _require_e5(Lm, p).state

    def classify(dL: float) -> int:
        attractors = stable_attractors(Lm + dL, p)
        cls, _ = _fast_classify(Lm, dL, rf, start, attractors, p, opts)
        if cls == UNRESOLVED_CLASS:
            raise UnresolvedError(f"experiment unresolved at delta_L={dL:g}")
        return cls

    if classify(lo) == TIP:
        raise AlwaysTipsError(f"already tipping at delta_L={lo:g}")
    if classify(hi) == TRACK:
        raise AlwaysTracksError(f"still tracking at delta_L={hi:g}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify(mid) == TIP:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class TippingDiagram:
    """Grid of experiment outcomes over (r, delta_L), the per-row coexistence
    precondition, and the per-rate critical delta_L curve."""

    L_min: float
    r_values: np.ndarray
    delta_L_values: np.ndarray
    classes: np.ndarray           # shape (n_delta_L, n_r), codes TRACK/TIP/UNRESOLVED
    within_e5_range: np.ndarray   # per delta_L row: e5 exists and is stable at L_max
    critical_delta_L: np.ndarray  # per r, NaN where the grid gives no bracket

    def class_name(self, i: int, j: int) -> str:
        return CLASS_NAMES[int(self.classes[i, j])]


def tipping_diagram(
    L_min: float = DEFAULT_L_MIN,
    r_grid=DEFAULT_R_GRID,
    delta_L_grid=DEFAULT_DELTA_L_GRID,
    p: Params = None,
    opts: Optional[IntegratorOptions] = None,
    workers: Optional[int] = None,
    crit_tol: float = 1e-4,
) -> TippingDiagram:
    """Classify every (r, delta_L) cell and extract the critical curve.

    Rows whose L_max falls outside the coexistence range are still
    classified (tracking then means the surviving white-only state) but are
    marked as bifurcation-tipping territory via ``within_e5_range``.
    """
    p = p or Params()
    opts = opts or IntegratorOptions()
    rs = np.ascontiguousarray(np.asarray(r_grid, dtype=float))
    dls = np.asarray(delta_L_grid, dtype=float)
    if rs.ndim != 1 or dls.ndim != 1 or rs.size == 0 or dls.size == 0:
        raise ConfigurationError("diagram grids must be non-empty 1-D arrays")
    if np.any(rs <= 0) or np.any(dls < 0):
        raise ConfigurationError("rates must be positive and delta_L non-negative")
    if np.any(np.diff(rs) <= 0) or np.any(np.diff(dls) <= 0):
        raise ConfigurationError("diagram grids must be strictly increasing")
    if workers is not None:
        set_num_threads(workers)

    Lm = float(L_min)
    start = _require_e5(Lm, p).state

    classes = np.empty((dls.size, rs.size), dtype=np.int64)
    within = np.empty(dls.size, dtype=bool)
    for i, dL in enumerate(dls):
        L_max = Lm + float(dL)
        e5_top = coexistence_analytic(L_max, p)
        within[i] = e5_top is not None and e5_top.is_stable
        attractors = stable_attractors(L_max, p)
        eq_w = np.array([e.alpha_w for e in attractors])
        eq_b = np.array([e.alpha_b for e in attractors])
        out_idx = np.empty(rs.size, dtype=np.int64)
        out_status = np.empty(rs.size, dtype=np.int64)
        kernels.experiment_row_kernel(
            Lm, float(dL), rs, start.alpha_w, start.alpha_b, p.as_array(),
            eq_w, eq_b, opts.match_tol, opts.residual_tol, opts.chunk,
            opts.max_time, opts.rel_tol, opts.abs_tol, opts.max_step,
            opts.first_step(), out_idx, out_status,
        )
        labels_e0 = {j for j, e in enumerate(attractors) if e.label == "e0"}
        for j in range(rs.size):
            if out_idx[j] < 0:
                classes[i, j] = UNRESOLVED_CLASS
            elif int(out_idx[j]) in labels_e0:
                classes[i, j] = TIP
            else:
                classes[i, j] = TRACK

    crit = np.full(rs.size, np.nan)
    for j, r in enumerate(rs):
        col = classes[:, j]
        bracket = None
        for i in range(1, dls.size):
            if col[i - 1] == TRACK and col[i] == TIP:
                bracket = (float(dls[i - 1]), float(dls[i]))
                break
        if bracket is None:
            continue
        try:
            crit[j] = critical_delta_L(Lm, float(r), bracket, p, tol=crit_tol, opts=opts)
        except (BracketError, UnresolvedError):
            pass

    return TippingDiagram(Lm, rs, dls, classes, within, crit)
