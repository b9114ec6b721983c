"""Frozen-luminosity phase-space geometry: 1-D stable manifolds of saddles,
basin-of-attraction grids, basin-instability tests, and the L_BI boundary.

The stable manifold of a saddle is traced by integrating the time-reversed
vector field from two seeds straddling the saddle along its stable
eigenvector; the halves are joined through the saddle into one polyline
ordered by arclength.  Basins are classified cell-by-cell with the shared
convergence kernel; cells are independent and the result is deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .accel import set_num_threads
from .equilibria import Equilibrium, basin_targets, stable_attractors
from .errors import BracketError, UnresolvedError
from .model import Params, State
from .solver import IntegratorOptions, converge_to_attractor

#: default clip box, slightly outside the simplex so separating curves stay
#: complete where they exit through a face
CLIP_BOX = (-0.05, 1.05)
SEED_OFFSET = 1e-6
ARC_BUDGET = 10.0
MANIFOLD_MAX_STEP = 0.02
DEFAULT_RESOLUTION = 201

INVALID = -2
UNRESOLVED = -1


@dataclass(frozen=True)
class ManifoldCurve:
    """Stable manifold of a saddle at frozen L, as an ordered polyline.

    ``points`` runs from the end of one half-branch, through the saddle,
    to the end of the other; shape (n, 2) in (alpha_w, alpha_b).
    """

    L: float
    saddle: Equilibrium
    points: np.ndarray

    def distance_to(self, point) -> float:
        return float(polyline_distance(self.points, np.asarray(point, float)))

    def crossings(self, p0, p1) -> int:
        return segment_polyline_crossings(self.points, np.asarray(p0, float), np.asarray(p1, float))


@dataclass(frozen=True)
class BasinGrid:
    """Attractor classes over the simplex bounding square.

    ``classes[i, j]`` is the class of the cell centre at
    ``alpha_w = axis[j], alpha_b = axis[i]``: an index into ``attractors``,
    or UNRESOLVED (-1) / INVALID (-2).
    """

    L: float
    resolution: int
    classes: np.ndarray
    attractors: tuple[Equilibrium, ...]

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.resolution)

    @property
    def cell_size(self) -> float:
        return 1.0 / (self.resolution - 1)

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.classes != INVALID))

    @property
    def n_unresolved(self) -> int:
        return int(np.count_nonzero(self.classes == UNRESOLVED))

    def legend(self) -> dict[int, str]:
        out = {INVALID: "invalid", UNRESOLVED: "unresolved"}
        out.update({i: e.label for i, e in enumerate(self.attractors)})
        return out

    def index_of(self, label: str) -> int:
        for i, e in enumerate(self.attractors):
            if e.label == label:
                return i
        raise KeyError(f"no attractor labeled {label!r} at L={self.L:g}")

    def class_at(self, point) -> int:
        """Class of the grid cell nearest to ``point``."""
        j = int(round(float(point[0]) * (self.resolution - 1)))
        i = int(round(float(point[1]) * (self.resolution - 1)))
        if not (0 <= i < self.resolution and 0 <= j < self.resolution):
            return INVALID
        return int(self.classes[i, j])

    def area_fraction(self, label: str) -> float:
        """Fraction of valid cells classified to the given attractor."""
        idx = self.index_of(label)
        return float(np.count_nonzero(self.classes == idx)) / self.n_valid


def _stable_eigvector(saddle: Equilibrium, p: Params) -> np.ndarray:
    import warnings

    from .equilibria import GrowthCutoffWarning, jacobian

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GrowthCutoffWarning)
        J = jacobian(saddle.state, saddle.L, p)
    w, V = np.linalg.eig(J)
    neg = np.flatnonzero(w.real < 0.0)
    if neg.size != 1:
        raise ValueError(
            f"{saddle.label} at L={saddle.L:g} is not a saddle with a 1-D stable "
            f"manifold (eigenvalues {w})"
        )
    v = np.real(V[:, neg[0]])
    return v / np.linalg.norm(v)


def stable_manifold(
    saddle: Equilibrium,
    p: Params,
    opts: Optional[IntegratorOptions] = None,
    clip: tuple[float, float] = CLIP_BOX,
    seed_offset: float = SEED_OFFSET,
    arc_budget: float = ARC_BUDGET,
) -> ManifoldCurve:
    """Both halves of the saddle's stable manifold, traced backward in time
    until they leave the clip box or exhaust the arclength budget."""
    if not saddle.is_saddle:
        raise ValueError(
            f"stable_manifold needs a saddle, got {saddle.label} "
            f"({saddle.stability}) at L={saddle.L:g}"
        )
    opts = opts or IntegratorOptions(max_step=MANIFOLD_MAX_STEP)
    v = _stable_eigvector(saddle, p)
    lo, hi = clip
    p_arr = p.as_array()
    halves = []
    for sign in (+1.0, -1.0):
        seed_w = saddle.alpha_w + sign * seed_offset * v[0]
        seed_b = saddle.alpha_b + sign * seed_offset * v[1]
        cap = 65536
        while True:
            out_w = np.empty(cap)
            out_b = np.empty(cap)
            n, status = kernels.trace_kernel(
                seed_w, seed_b, saddle.L, -1.0, lo, hi, lo, hi, arc_budget,
                opts.rel_tol, opts.abs_tol, opts.max_step, opts.first_step(),
                p_arr, out_w, out_b,
            )
            if status == kernels.CAPACITY:
                cap *= 2
                continue
            halves.append(np.column_stack((out_w[:n], out_b[:n])))
            break
    first = halves[0][::-1]
    middle = np.array([[saddle.alpha_w, saddle.alpha_b]])
    points = np.vstack((first, middle, halves[1]))
    return ManifoldCurve(saddle.L, saddle, points)


def basin_grid(
    L: float,
    p: Params,
    resolution: int = DEFAULT_RESOLUTION,
    opts: Optional[IntegratorOptions] = None,
    workers: Optional[int] = None,
    max_unresolved_fraction: float = 0.01,
) -> BasinGrid:
    """Classify every simplex cell centre by the attractor it converges to.

    Raises UnresolvedError when more than ``max_unresolved_fraction`` of the
    valid cells fail to resolve.
    """
    Lf = float(L)
    opts = opts or IntegratorOptions()
    attractors = basin_targets(Lf, p)
    if not any(e.is_stable and not e.marginal for e in attractors):
        raise ValueError(f"no stable equilibrium at L={Lf:g}; basins undefined")
    if workers is not None:
        set_num_threads(workers)
    res = int(resolution)
    axis = np.linspace(0.0, 1.0, res)
    W, B = np.meshgrid(axis, axis)  # B varies along rows (index i)
    pts_w = W.ravel()
    pts_b = B.ravel()
    valid = (pts_w + pts_b) <= 1.0 + 1e-12
    eq_w = np.array([e.alpha_w for e in attractors])
    eq_b = np.array([e.alpha_b for e in attractors])
    out = np.empty(pts_w.size, dtype=np.int64)
    kernels.basin_kernel(
        pts_w, pts_b, valid, Lf, p.as_array(), eq_w, eq_b,
        opts.match_tol, opts.residual_tol, opts.chunk, opts.max_time,
        opts.rel_tol, opts.abs_tol, opts.max_step, opts.first_step(),
        out,
    )
    classes = out.reshape(res, res)
    grid = BasinGrid(Lf, res, classes, tuple(attractors))
    if grid.n_unresolved > max_unresolved_fraction * grid.n_valid:
        raise UnresolvedError(
            f"{grid.n_unresolved} of {grid.n_valid} cells unresolved at L={Lf:g} "
            f"(limit {max_unresolved_fraction:.0%})"
        )
    return grid


def is_basin_unstable(
    eq: Equilibrium,
    L_test: float,
    p: Params,
    opts: Optional[IntegratorOptions] = None,
) -> bool:
    """True when the frozen-in equilibrium state falls into the dead-planet
    basin at L_test: switching the luminosity instantaneously would kill the
    biosphere."""
    if not eq.is_stable:
        raise ValueError(f"{eq.label} at L={eq.L:g} is not stable")
    opts = opts or IntegratorOptions()
    known = stable_attractors(float(L_test), p)
    result = converge_to_attractor(eq.state, float(L_test), known, p, opts)
    if not result.resolved:
        raise UnresolvedError(
            f"convergence from {eq.label}(L={eq.L:g}) unresolved at L_test={L_test:g}"
        )
    return result.attractor.label == "e0"


def find_L_BI(
    eq: Equilibrium,
    bracket: tuple[float, float],
    p: Params,
    tol: float = 1e-4,
    opts: Optional[IntegratorOptions] = None,
) -> float:
    """Boundary of the basin-instability region: the luminosity where the
    frozen-in equilibrium first crosses into the dead-planet basin.
    Bisection on the membership test to |dL| < tol."""
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise BracketError(f"invalid bracket ({lo}, {hi})")
    if is_basin_unstable(eq, lo, p, opts):
        raise BracketError(f"already basin unstable at bracket low end L={lo:g}")
    if not is_basin_unstable(eq, hi, p, opts):
        raise BracketError(f"not basin unstable at bracket high end L={hi:g}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_basin_unstable(eq, mid, p, opts):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# polyline helpers (shared by the tipping classifier, tests, and exports)

def polyline_distance(points: np.ndarray, pt: np.ndarray) -> float:
    """Minimum Euclidean distance from ``pt`` to the polyline's segments."""
    a = points[:-1]
    b = points[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0.0] = 1.0
    t = np.clip(np.einsum("ij,ij->i", pt - a, ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = np.hypot(proj[:, 0] - pt[0], proj[:, 1] - pt[1])
    if points.shape[0] == 1:
        return float(np.hypot(points[0, 0] - pt[0], points[0, 1] - pt[1]))
    return float(d.min())


def segment_polyline_crossings(points: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> int:
    """Number of polyline segments properly intersected by segment p0-p1."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (
            b[..., 1] - a[..., 1]
        ) * (c[..., 0] - a[..., 0])

    a = points[:-1]
    b = points[1:]
    d1 = orient(a, b, p0)
    d2 = orient(a, b, p1)
    d3 = orient(p0[None, :], p1[None, :], a)
    d4 = orient(p0[None, :], p1[None, :], b)
    proper = ((d1 * d2) < 0.0) & ((d3 * d4) < 0.0)
    return int(np.count_nonzero(proper))


def on_dead_side(
    curve: ManifoldCurve, point, reference: tuple[float, float] = (1.3e-3, 0.7e-3)
) -> bool:
    """Whether ``point`` lies on the same side of the separating curve as a
    reference point deep in the dead-planet basin (crossing parity)."""
    c = curve.crossings(np.asarray(reference, float), np.asarray(point, float))
    return c % 2 == 0
