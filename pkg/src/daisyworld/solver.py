"""Adaptive ODE integration for autonomous and forced trajectories, and
convergence-to-attractor runs.

The stepper is an embedded Dormand-Prince 5(4) pair (see
:mod:`daisyworld.kernels`): 5th-order propagation with a 4th-order error
estimate, FSAL, and PI-free step control.  Every accepted step is recorded;
there is no dense output.  Identical inputs produce bit-identical
trajectories.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from . import kernels
from .errors import NonphysicalClimateError, SimplexError, StiffnessError
from .model import Params, State, in_simplex

if TYPE_CHECKING:  # pragma: no cover
    from .equilibria import Equilibrium
    from .tipping import ForcingSpec


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances and limits for the adaptive stepper.

    Defaults follow the biotic turnover timescale 1/gamma (about 3.3 time
    units): ``max_time`` = 1e5 dwarfs any transient, convergence is
    re-checked every ``chunk`` = 50 time units, and equilibria are matched
    to ``match_tol`` = 1e-6 in Euclidean distance.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = 1.0
    initial_step: Optional[float] = None
    max_time: float = 1e5
    chunk: float = 50.0
    match_tol: float = 1e-6
    residual_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")

    def first_step(self) -> float:
        if self.initial_step is not None:
            return min(self.initial_step, self.max_step)
        return min(1e-2, self.max_step)


@dataclass(frozen=True)
class Trajectory:
    """Time series of accepted integrator steps.

    ``states`` has shape (n, 2) with columns (alpha_w, alpha_b).  Forced
    runs carry the luminosity at each time in ``forcing_values``;
    autonomous runs store the constant ``L`` instead.
    """

    times: np.ndarray
    states: np.ndarray
    forcing_values: Optional[np.ndarray] = None
    L: Optional[float] = None

    def __post_init__(self) -> None:
        if self.times.ndim != 1 or self.states.shape != (self.times.size, 2):
            raise ValueError("times and states have mismatched shapes")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        if self.forcing_values is not None and self.forcing_values.shape != self.times.shape:
            raise ValueError("forcing_values length mismatch")

    @property
    def alpha_w(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def alpha_b(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def final_state(self) -> State:
        return State(float(self.states[-1, 0]), float(self.states[-1, 1]))

    def luminosities(self) -> np.ndarray:
        """Per-sample luminosity regardless of run kind."""
        if self.forcing_values is not None:
            return self.forcing_values
        if self.L is None:
            raise ValueError("trajectory carries no luminosity information")
        return np.full_like(self.times, self.L)

    def to_csv(self, path, p: Params) -> None:
        from .io import write_trajectory_csv

        write_trajectory_csv(path, self, p)


@dataclass(frozen=True)
class ConvergenceResult:
    """Outcome of a convergence run: the matched attractor (or None),
    the final state, and the integration time spent."""

    attractor: Optional["Equilibrium"]
    final_state: State
    elapsed: float
    min_probe_distance: float = np.inf

    @property
    def resolved(self) -> bool:
        return self.attractor is not None

    @property
    def label(self) -> str:
        return self.attractor.label if self.attractor is not None else "unresolved"


def _check_x0(x0) -> State:
    s = State(float(x0[0]), float(x0[1]))
    if not in_simplex(s, tol=kernels.SIMPLEX_BAND):
        raise SimplexError(f"initial state {tuple(s)} outside the simplex")
    return s


def _raise_for_status(status: int, t: float) -> None:
    if status == kernels.UNDERFLOW:
        raise StiffnessError(f"step size underflow near t={t:g}")
    if status == kernels.NONPHYSICAL:
        raise NonphysicalClimateError(
            f"nonphysical heat transfer encountered near t={t:g}"
        )


def _integrate(
    x0: State,
    t_span: tuple[float, float],
    L_min: float,
    dL: float,
    r: float,
    p: Params,
    opts: IntegratorOptions,
) -> tuple[np.ndarray, np.ndarray]:
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"empty time span ({t0}, {t1})")
    span = t1 - t0
    cap = max(4096, int(1.5 * span / opts.max_step) + 16)
    while True:
        out_t = np.empty(cap)
        out_w = np.empty(cap)
        out_b = np.empty(cap)
        n, status, _, _, _, t_end, _ = kernels.integrate_kernel(
            x0.alpha_w, x0.alpha_b, t0, t1, L_min, dL, r, 1.0,
            opts.rel_tol, opts.abs_tol, opts.max_step, opts.first_step(),
            p.as_array(), True, out_t, out_w, out_b, 1e300, 1e300,
        )
        if status == kernels.CAPACITY:
            cap *= 2
            continue
        _raise_for_status(status, t_end)
        states = np.column_stack((out_w[:n], out_b[:n]))
        return out_t[:n].copy(), states


def integrate_autonomous(
    x0,
    L: float,
    t_span: tuple[float, float],
    p: Params,
    opts: Optional[IntegratorOptions] = None,
) -> Trajectory:
    """Integrate the frozen system at constant luminosity L over t_span."""
    opts = opts or IntegratorOptions()
    s = _check_x0(x0)
    times, states = _integrate(s, t_span, float(L), 0.0, 1.0, p, opts)
    return Trajectory(times, states, L=float(L))


def integrate_forced(
    x0,
    forcing: "ForcingSpec",
    t_span: tuple[float, float],
    p: Params,
    opts: Optional[IntegratorOptions] = None,
) -> Trajectory:
    """Integrate under the tanh luminosity ramp described by ``forcing``."""
    opts = opts or IntegratorOptions()
    s = _check_x0(x0)
    L_min, dL, r = float(forcing.L_min), float(forcing.delta_L), float(forcing.r)
    times, states = _integrate(s, t_span, L_min, dL, r, p, opts)
    forcing_values = L_min + 0.5 * dL * (np.tanh(r * times) + 1.0)
    return Trajectory(times, states, forcing_values=forcing_values)


def converge_to_attractor(
    x0,
    L: float,
    known: Sequence["Equilibrium"],
    p: Params,
    opts: Optional[IntegratorOptions] = None,
    probe: Optional[tuple[float, float]] = None,
) -> ConvergenceResult:
    """Integrate at frozen L until the state is stationary at one of the
    ``known`` equilibria.

    ``known`` must contain every stable equilibrium at L (marginal ones
    excluded); including non-attracting members such as the origin is
    harmless and lets exact-equilibrium initial states resolve.  Runs that
    exhaust ``opts.max_time``, or that sit on an unlisted equilibrium (a
    saddle), come back unresolved rather than misclassified.  ``probe``
    optionally tracks the minimum distance to a phase-space point.
    """
    opts = opts or IntegratorOptions()
    s = _check_x0(x0)
    if not known:
        raise ValueError("known equilibria list is empty")
    eq_w = np.array([e.state.alpha_w for e in known])
    eq_b = np.array([e.state.alpha_b for e in known])
    sw, sb = probe if probe is not None else (1e300, 1e300)
    idx, aw, ab, t, status, dmin = kernels.converge_kernel(
        s.alpha_w, s.alpha_b, float(L), p.as_array(), eq_w, eq_b,
        opts.match_tol, opts.residual_tol, opts.chunk, opts.max_time,
        opts.rel_tol, opts.abs_tol, opts.max_step, opts.first_step(),
        sw, sb,
    )
    _raise_for_status(status, t)
    attractor = known[idx] if idx >= 0 else None
    return ConvergenceResult(attractor, State(aw, ab), t, dmin)
