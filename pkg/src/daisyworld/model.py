"""Daisyworld model equations: albedo mixing, radiative balance, local
temperatures, temperature-dependent growth, and the two-species vector field.

All operations are pure functions of ``(state, L, params)``; solver logic
lives elsewhere.  Units: temperatures in K, fluxes in W/m^2, cover
fractions and albedos dimensionless, time in biotic units (the turnover
timescale is 1/gamma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, NamedTuple

import numpy as np

from . import kernels
from .errors import NonphysicalClimateError, SimplexError

#: Stefan-Boltzmann constant, W m^-2 K^-4 (CODATA).  Not a tunable of the
#: model, but kept on Params because every temperature depends on it.
STEFAN_BOLTZMANN = 5.670374419e-8

_DEFAULT_S = 917.0
#: Default horizontal heat-transfer coefficient, q = 0.1 S / sigma (K^4).
DEFAULT_Q = 0.1 * _DEFAULT_S / STEFAN_BOLTZMANN


class State(NamedTuple):
    """Phase-space point: white and black daisy cover fractions."""

    alpha_w: float
    alpha_b: float

    @property
    def alpha_g(self) -> float:
        """Bare-ground fraction (derived, never stored)."""
        return 1.0 - self.alpha_w - self.alpha_b


class LocalClimate(NamedTuple):
    """Planetary albedo, emission temperature, and the three local
    temperatures (white daisies, black daisies, bare ground)."""

    A: float
    T_e: float
    T_w: float
    T_b: float
    T_g: float


@dataclass(frozen=True)
class Params:
    """Model constants.

    gamma   death rate (per unit time)
    k       growth-curve curvature (K^-2); the growth window has half-width
            1/sqrt(k)
    T_opt   optimum growth temperature (K)
    S       solar flux constant (W/m^2); luminosity L scales it
    sigma   Stefan-Boltzmann constant (W m^-2 K^-4)
    A_w, A_b, A_g  albedos of white daisies, black daisies, bare ground
    q       horizontal heat-transfer coefficient (K^4); must stay below
            S*L/sigma for every luminosity used
    """

    gamma: float = 0.3
    k: float = 0.003265
    T_opt: float = 295.5
    S: float = _DEFAULT_S
    sigma: float = STEFAN_BOLTZMANN
    A_w: float = 0.75
    A_b: float = 0.25
    A_g: float = 0.5
    q: float = DEFAULT_Q
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (0.0 <= self.A_b < self.A_g < self.A_w <= 1.0):
            raise ValueError(
                f"albedos must satisfy 0 <= A_b < A_g < A_w <= 1, got "
                f"A_b={self.A_b}, A_g={self.A_g}, A_w={self.A_w}"
            )
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("k", "S", "sigma"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.q < 0.0:
            raise ValueError(f"q must be non-negative, got {self.q}")
        arr = np.array(
            [
                self.gamma,
                self.k,
                self.T_opt,
                self.S,
                self.sigma,
                self.A_w,
                self.A_b,
                self.A_g,
                self.q,
                self.S / self.sigma,
            ],
            dtype=np.float64,
        )
        object.__setattr__(self, "_array", arr)

    def as_array(self) -> np.ndarray:
        """Length-10 float64 array consumed by the kernels."""
        return self._array

    def validate_for_luminosity(self, L: float) -> None:
        """Reject q values that would transfer heat against the gradient."""
        if self.q >= self.S * L / self.sigma:
            raise ValueError(
                f"q={self.q:g} must be below S*L/sigma={self.S * L / self.sigma:g} "
                f"at L={L:g}"
            )

    @property
    def growth_halfwidth(self) -> float:
        """Half-width 1/sqrt(k) of the growth window (K)."""
        return 1.0 / math.sqrt(self.k)

    def replace(self, **changes) -> "Params":
        changes.pop("_array", None)
        return replace(self, **changes)

    _FIELDS = ("gamma", "k", "T_opt", "S", "sigma", "A_w", "A_b", "A_g", "q")

    def to_mapping(self) -> dict[str, float]:
        """Plain mapping for the config-file round trip."""
        return {name: getattr(self, name) for name in self._FIELDS}

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "Params":
        unknown = set(mapping) - set(cls._FIELDS)
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in mapping.items()})

    def __iter__(self) -> Iterator[float]:
        return iter(self.as_array()[:9])


def _as_state(state) -> State:
    if isinstance(state, State):
        return state
    aw, ab = state
    return State(float(aw), float(ab))


def in_simplex(state, tol: float = 0.0) -> bool:
    """True when both covers are >= -tol and their sum is <= 1 + tol."""
    aw, ab = _as_state(state)
    return aw >= -tol and ab >= -tol and aw + ab <= 1.0 + tol


def _require_simplex(state: State) -> None:
    if not in_simplex(state):
        raise SimplexError(
            f"state ({state.alpha_w}, {state.alpha_b}) outside the unit simplex"
        )


def planetary_albedo(state, p: Params) -> float:
    """Cover-weighted albedo A = a_w A_w + a_b A_b + a_g A_g."""
    s = _as_state(state)
    _require_simplex(s)
    return s.alpha_w * p.A_w + s.alpha_b * p.A_b + s.alpha_g * p.A_g


def climate(state, L: float, p: Params) -> LocalClimate:
    """Radiative balance at luminosity L.

    T_e solves sigma T_e^4 = S L (1 - A); each surface temperature then
    follows from T_i^4 = q (A - A_i) + T_e^4.  Raises
    NonphysicalClimateError when any radicand is non-positive (q too large
    for this L).
    """
    s = _as_state(state)
    _require_simplex(s)
    if L <= 0.0:
        raise ValueError(f"luminosity must be positive, got {L}")
    A, Te4, Tw4, Tb4, Tg4, ok = kernels.climate_scalar(
        s.alpha_w, s.alpha_b, L, p.as_array()
    )
    if not ok:
        raise NonphysicalClimateError(
            f"nonphysical heat transfer at L={L:g}: a local T^4 is not positive "
            f"(q={p.q:g} too large)"
        )
    return LocalClimate(A, Te4 ** 0.25, Tw4 ** 0.25, Tb4 ** 0.25, Tg4 ** 0.25)


def growth_rate(T: float, p: Params) -> float:
    """Daisy growth rate at temperature T: 1 - k (T_opt - T)^2 inside the
    growth window, 0 outside; continuous at the cutoffs."""
    if T < 0.0:
        raise ValueError(f"temperature must be non-negative, got {T}")
    return kernels.growth_scalar(T, p.k, p.T_opt)


def rhs(state, L: float, p: Params, check: bool = True) -> tuple[float, float]:
    """Vector field (da_w/dt, da_b/dt) of the two-species system.

    With ``check`` the state must lie within SIMPLEX_BAND of the simplex
    (adaptive integrators may overshoot the boundary by roundoff).  Internal
    callers that differentiate the field pass ``check=False`` and evaluate
    the smooth extension.
    """
    s = _as_state(state)
    if check and not in_simplex(s, tol=kernels.SIMPLEX_BAND):
        raise SimplexError(
            f"state ({s.alpha_w}, {s.alpha_b}) outside the tolerance-expanded simplex"
        )
    dw, db, ok = kernels.rhs_scalar(s.alpha_w, s.alpha_b, L, p.as_array())
    if not ok:
        raise NonphysicalClimateError(
            f"nonphysical heat transfer at L={L:g} while evaluating the vector field"
        )
    return dw, db
