"""Equilibrium finding, classification, and labeling.

The six branches follow the support of the fixed point: e0 is the bare
planet, e1/e2 live on the white-daisy axis, e3/e4 on the black-daisy axis,
and e5 is the two-species coexistence state.  On each axis the lower-cover
fold sheet takes the lower-numbered label on the white side (e1) and the
higher-numbered one on the black side (e4); those are the saddles whose
stable manifolds bound the dead-planet basin.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from . import kernels
from .errors import BracketError
from .model import Params, State, climate

RESIDUAL_TOL = 1e-10
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
FD_STEP = 1e-7
MARGINAL_TOL = 1e-8
MATCH_TOL = 1e-6
AXIS_SAMPLES = 257
CUTOFF_GUARD_K = 0.5

Stability = Literal[
    "stable-node", "stable-focus", "saddle", "unstable-node", "unstable-focus"
]
Label = Literal["e0", "e1", "e2", "e3", "e4", "e5"]


class GrowthCutoffWarning(UserWarning):
    """A local temperature sits within 0.5 K of a growth-window cutoff,
    where the vector field is only C0; derivative-based results may degrade."""


@dataclass(frozen=True)
class Equilibrium:
    """A located fixed point at one luminosity, with its linearisation."""

    state: State
    L: float
    eigenvalues: tuple[complex, complex]
    stability: Stability
    label: Label
    T_e: float
    marginal: bool = False

    @property
    def alpha_w(self) -> float:
        return self.state.alpha_w

    @property
    def alpha_b(self) -> float:
        return self.state.alpha_b

    @property
    def is_stable(self) -> bool:
        return self.stability in ("stable-node", "stable-focus")

    @property
    def is_saddle(self) -> bool:
        return self.stability == "saddle"


def _rhs_unchecked(aw: float, ab: float, L: float, p_arr: np.ndarray):
    dw, db, ok = kernels.rhs_scalar(aw, ab, L, p_arr)
    if not ok:
        raise BracketError(f"nonphysical climate while evaluating rhs at L={L:g}")
    return dw, db


def residual(state, L: float, p: Params) -> float:
    """max(|da_w/dt|, |da_b/dt|), evaluated on the smooth extension."""
    dw, db = _rhs_unchecked(state[0], state[1], float(L), p.as_array())
    return max(abs(dw), abs(db))


def _warn_near_cutoff(state, L: float, p: Params, strict: bool) -> None:
    aw, ab = state
    if aw < -1e-6 or ab < -1e-6 or aw + ab > 1.0 + 1e-6:
        return
    cl = climate(State(max(aw, 0.0), max(ab, 0.0)), L, p)
    half = p.growth_halfwidth
    for T in (cl.T_w, cl.T_b):
        if abs(abs(T - p.T_opt) - half) < CUTOFF_GUARD_K:
            msg = (
                f"local temperature {T:.3f} K within {CUTOFF_GUARD_K} K of a "
                f"growth-window cutoff at L={L:g}; finite differences cross a "
                f"C1 discontinuity"
            )
            if strict:
                raise ValueError(msg)
            warnings.warn(msg, GrowthCutoffWarning, stacklevel=3)
            return


def jacobian(
    state,
    L: float,
    p: Params,
    h: Optional[float] = None,
    strict: bool = False,
) -> np.ndarray:
    """Central finite-difference Jacobian of the vector field at ``state``.

    Probes step h = 1e-7 * max(1, |alpha|) per component and may leave the
    simplex by that amount; the smooth extension of the field is evaluated
    there.  Emits GrowthCutoffWarning (or raises, with ``strict``) when a
    local temperature is within 0.5 K of a growth cutoff.
    """
    aw, ab = float(state[0]), float(state[1])
    Lf = float(L)
    _warn_near_cutoff((aw, ab), Lf, p, strict)
    p_arr = p.as_array()
    J = np.empty((2, 2))
    for j, a in enumerate((aw, ab)):
        hj = h if h is not None else FD_STEP * max(1.0, abs(a))
        if j == 0:
            fp = _rhs_unchecked(aw + hj, ab, Lf, p_arr)
            fm = _rhs_unchecked(aw - hj, ab, Lf, p_arr)
        else:
            fp = _rhs_unchecked(aw, ab + hj, Lf, p_arr)
            fm = _rhs_unchecked(aw, ab - hj, Lf, p_arr)
        J[0, j] = (fp[0] - fm[0]) / (2.0 * hj)
        J[1, j] = (fp[1] - fm[1]) / (2.0 * hj)
    return J


def eigen_2x2(J: np.ndarray) -> tuple[complex, complex]:
    """Closed-form eigenvalues, largest real part first."""
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        s = math.sqrt(disc)
        lam1, lam2 = complex((tr + s) / 2.0), complex((tr - s) / 2.0)
    else:
        s = math.sqrt(-disc)
        lam1, lam2 = complex(tr / 2.0, s / 2.0), complex(tr / 2.0, -s / 2.0)
    return lam1, lam2


def classify_eigenvalues(eigs: tuple[complex, complex]) -> tuple[Stability, bool]:
    """(stability class, marginal flag).  Complex pairs are foci, real pairs
    nodes or saddles; the equal-eigenvalue degenerate case counts as a node."""
    lam1, lam2 = eigs
    marginal = abs(lam1.real) < MARGINAL_TOL or abs(lam2.real) < MARGINAL_TOL
    if lam1.imag != 0.0:
        kind = "stable-focus" if lam1.real < 0.0 else "unstable-focus"
        return kind, marginal
    r1, r2 = lam1.real, lam2.real
    if r1 * r2 < 0.0:
        return "saddle", marginal
    if r1 <= 0.0 and r2 <= 0.0:
        return "stable-node", marginal
    return "unstable-node", marginal


def make_equilibrium(state, L: float, p: Params, label: Label) -> Equilibrium:
    """Assemble a classified Equilibrium; validates the residual."""
    s = State(float(state[0]), float(state[1]))
    Lf = float(L)
    res = residual(s, Lf, p)
    if res >= RESIDUAL_TOL:
        raise ValueError(
            f"candidate equilibrium {tuple(s)} at L={Lf:g} has residual {res:.3e}"
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GrowthCutoffWarning)
        J = jacobian(s, Lf, p)
    eigs = eigen_2x2(J)
    stability, marginal = classify_eigenvalues(eigs)
    T_e = climate(State(max(s.alpha_w, 0.0), max(s.alpha_b, 0.0)), Lf, p).T_e
    return Equilibrium(s, Lf, eigs, stability, label, T_e, marginal)


def newton_refine(
    state,
    L: float,
    p: Params,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> State:
    """Newton iteration on the full 2-D system with FD Jacobian."""
    aw, ab = float(state[0]), float(state[1])
    p_arr = p.as_array()
    for _ in range(max_iter):
        fw, fb = _rhs_unchecked(aw, ab, L, p_arr)
        if max(abs(fw), abs(fb)) < tol:
            return State(aw, ab)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GrowthCutoffWarning)
            J = jacobian((aw, ab), L, p)
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if det == 0.0:
            break
        daw = (-fw * J[1, 1] + fb * J[0, 1]) / det
        dab = (-fb * J[0, 0] + fw * J[1, 0]) / det
        aw += daw
        ab += dab
    fw, fb = _rhs_unchecked(aw, ab, L, p_arr)
    if max(abs(fw), abs(fb)) >= tol:
        raise BracketError(
            f"Newton refinement failed to reach {tol:g} at L={L:g} "
            f"(state ({aw:.6g}, {ab:.6g}))"
        )
    return State(aw, ab)


@functools.lru_cache(maxsize=8)
def _coexistence_core(p: Params) -> tuple[float, float, float, float]:
    """L-independent part of the coexistence reduction.

    Solves T_b^4 - (2 T_opt - T_b)^4 = q (A_w - A_b) for T_b above T_opt by
    bisection plus Newton polish.  Returns (T_b, T_w, beta, alpha_g).
    Raises BracketError when no root exists in the growth window.
    """
    target = p.q * (p.A_w - p.A_b)
    half = p.growth_halfwidth

    def g(Tb: float) -> float:
        return Tb ** 4 - (2.0 * p.T_opt - Tb) ** 4 - target

    lo, hi = p.T_opt, p.T_opt + half
    if not g(lo) < 0.0 < g(hi):
        raise BracketError(
            "no coexistence root: T_b^4 - T_w^4 = q(A_w - A_b) has no solution "
            "inside the growth window"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    Tb = 0.5 * (lo + hi)
    for _ in range(4):  # Newton polish on the scalar condition
        d = 4.0 * Tb ** 3 + 4.0 * (2.0 * p.T_opt - Tb) ** 3
        Tb -= g(Tb) / d
    Tw = 2.0 * p.T_opt - Tb
    beta = kernels.growth_scalar(Tb, p.k, p.T_opt)
    if beta <= 0.0:
        raise BracketError("no coexistence root: growth rate vanishes at T_b")
    return Tb, Tw, beta, p.gamma / beta


def coexistence_analytic(L: float, p: Params) -> Optional[Equilibrium]:
    """The coexistence equilibrium e5 at luminosity L, or None.

    Both growth brackets vanish at e5, forcing beta(T_w) = beta(T_b) =
    gamma / alpha_g; the even growth curve then gives T_w + T_b = 2 T_opt,
    and the local-temperature differences give T_b^4 - T_w^4 = q (A_w -
    A_b).  That scalar condition is L-independent; the albedo needed to
    realise it at this L, and the covers mixing to that albedo, follow
    algebraically.  Returns None when the covers leave the open simplex.
    """
    Lf = float(L)
    Tb, Tw, beta, ag = _coexistence_core(p)
    if not 0.0 < ag < 1.0:
        return None
    cL = p.S * Lf / p.sigma
    A = (Tb ** 4 + p.q * p.A_b - cL) / (p.q - cL)
    s = 1.0 - ag
    aw = (A - ag * p.A_g - p.A_b * s) / (p.A_w - p.A_b)
    ab = s - aw
    if not (aw > 0.0 and ab > 0.0):
        return None
    refined = newton_refine((aw, ab), Lf, p)
    return make_equilibrium(refined, Lf, p, "e5")


def _axis_condition(alpha: float, L: float, species: str, p_arr: np.ndarray) -> float:
    """(1 - alpha) beta(T_i(alpha, L)) - gamma on the single-species axis."""
    aw, ab = (alpha, 0.0) if species == "white" else (0.0, alpha)
    A, Te4, Tw4, Tb4, _, ok = kernels.climate_scalar(aw, ab, L, p_arr)
    T4 = Tw4 if species == "white" else Tb4
    if not ok or T4 <= 0.0:
        return -p_arr[kernels.P_GAMMA]
    b = kernels.growth_scalar(T4 ** 0.25, p_arr[kernels.P_K], p_arr[kernels.P_TOPT])
    return (1.0 - alpha) * b - p_arr[kernels.P_GAMMA]


def single_species_equilibria(
    L: float,
    species: Literal["white", "black"],
    p: Params,
    n_samples: int = AXIS_SAMPLES,
) -> list[Equilibrium]:
    """All single-species equilibria on one invariant axis (0 to 2 of them).

    Dense sampling of the scalar fixed-point condition brackets each sign
    change; bisection plus on-axis Newton refines every root, which is then
    classified in the full 2-D system.  With two roots the lower-cover sheet
    is e1 (white) or e4 (black); a lone root belongs to the upper sheet.
    """
    if species not in ("white", "black"):
        raise ValueError(f"species must be 'white' or 'black', got {species!r}")
    Lf = float(L)
    p_arr = p.as_array()
    grid = np.linspace(0.0, 1.0, max(n_samples, AXIS_SAMPLES))
    vals = np.array([_axis_condition(a, Lf, species, p_arr) for a in grid])

    brackets: list[tuple[float, float]] = []
    for i in range(grid.size - 1):
        if vals[i] * vals[i + 1] < 0.0:
            brackets.append((grid[i], grid[i + 1]))
    # near a fold the positive blip between two roots can hide inside one
    # grid cell: refine sampled interior maxima and re-bracket when the true
    # maximum pokes above zero
    for i in range(1, grid.size - 1):
        if not (vals[i] >= vals[i - 1] and vals[i] >= vals[i + 1] and vals[i] <= 0.0):
            continue
        lo, hi = grid[i - 1], grid[i + 1]
        for _ in range(200):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            if _axis_condition(m1, Lf, species, p_arr) < _axis_condition(
                m2, Lf, species, p_arr
            ):
                lo = m1
            else:
                hi = m2
            if hi - lo < 1e-12:
                break
        peak = 0.5 * (lo + hi)
        if _axis_condition(peak, Lf, species, p_arr) > 0.0:
            brackets.append((grid[i - 1], peak))
            brackets.append((peak, grid[i + 1]))

    roots: list[float] = []
    for lo, hi in sorted(brackets):
        flo = _axis_condition(lo, Lf, species, p_arr)
        if flo == 0.0 and lo > 0.0:
            roots.append(lo)
            continue
        if flo * _axis_condition(hi, Lf, species, p_arr) >= 0.0:
            continue
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            fm = _axis_condition(mid, Lf, species, p_arr)
            if flo * fm <= 0.0:
                hi = mid
            else:
                lo, flo = mid, fm
        root = 0.5 * (lo + hi)
        # on-axis Newton polish keeps the other cover exactly zero
        for _ in range(NEWTON_MAX_ITER):
            f0 = _axis_condition(root, Lf, species, p_arr)
            if abs(f0) < NEWTON_TOL:
                break
            h = FD_STEP * max(1.0, abs(root))
            d = (
                _axis_condition(root + h, Lf, species, p_arr)
                - _axis_condition(root - h, Lf, species, p_arr)
            ) / (2.0 * h)
            if d == 0.0:
                break
            root -= f0 / d
        roots.append(root)
    roots = sorted(r for r in roots if 0.0 < r < 1.0)
    deduped: list[float] = []
    for r in roots:
        if not deduped or r - deduped[-1] > 1e-12:
            deduped.append(r)
    roots = deduped

    if species == "white":
        labels = ["e1", "e2"] if len(roots) == 2 else ["e2"] * len(roots)
    else:
        labels = ["e4", "e3"] if len(roots) == 2 else ["e3"] * len(roots)
    out = []
    for root, label in zip(roots, labels):
        state = (root, 0.0) if species == "white" else (0.0, root)
        out.append(make_equilibrium(state, Lf, p, label))
    return out


def enumerate_equilibria(L: float, p: Params) -> list[Equilibrium]:
    """Every physically relevant equilibrium at luminosity L, classified and
    labeled: the origin e0, the axis states, and coexistence when present."""
    Lf = float(L)
    p.validate_for_luminosity(Lf)
    eqs = [make_equilibrium((0.0, 0.0), Lf, p, "e0")]
    eqs.extend(single_species_equilibria(Lf, "white", p))
    eqs.extend(single_species_equilibria(Lf, "black", p))
    e5 = coexistence_analytic(Lf, p)
    if e5 is not None:
        eqs.append(e5)
    for i in range(len(eqs)):
        for j in range(i + 1, len(eqs)):
            d = math.hypot(
                eqs[i].alpha_w - eqs[j].alpha_w, eqs[i].alpha_b - eqs[j].alpha_b
            )
            if d < MATCH_TOL:
                raise ValueError(
                    f"duplicate equilibria at L={Lf:g}: {eqs[i].label} and "
                    f"{eqs[j].label} are {d:.2e} apart"
                )
    return eqs


def stable_attractors(L: float, p: Params) -> list[Equilibrium]:
    """Attractor targets for convergence runs: all stable non-marginal
    equilibria, plus the origin (always an equilibrium, matched exactly by
    trajectories that start and stay there)."""
    eqs = enumerate_equilibria(L, p)
    out = [e for e in eqs if e.label == "e0"]
    out.extend(e for e in eqs if e.label != "e0" and e.is_stable and not e.marginal)
    return out


def _transverse_eigenvalue(e: Equilibrium, p: Params) -> float:
    """Growth rate of the absent species invading a single-species state."""
    p_arr = p.as_array()
    A, _, Tw4, Tb4, _, ok = kernels.climate_scalar(e.alpha_w, e.alpha_b, e.L, p_arr)
    T4 = Tb4 if e.alpha_b == 0.0 else Tw4
    if not ok or T4 <= 0.0:
        return -p.gamma
    cover = e.alpha_w + e.alpha_b
    b = kernels.growth_scalar(T4 ** 0.25, p.k, p.T_opt)
    return (1.0 - cover) * b - p.gamma


def basin_targets(L: float, p: Params) -> list[Equilibrium]:
    """Convergence targets for basin grids: the stable attractors plus any
    axis saddle that attracts within its own invariant face (grid points
    that sit exactly on an axis legitimately converge to those)."""
    eqs = enumerate_equilibria(L, p)
    out = stable_attractors(L, p)
    for e in eqs:
        if not (e.is_saddle and not e.marginal):
            continue
        on_axis = (e.alpha_b == 0.0) != (e.alpha_w == 0.0)
        if not on_axis:
            continue
        tr = e.eigenvalues[0].real + e.eigenvalues[1].real
        axis_eig = tr - _transverse_eigenvalue(e, p)
        if axis_eig < 0.0:
            out.append(e)
    return out
