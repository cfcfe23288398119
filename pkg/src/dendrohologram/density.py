"""The difference pdf, its gridded estimate, and the phase field.

Grids are cell-centred: ``B`` cells of width ``h`` on ``[lo, hi]``; every
field (density, phase, potentials) is sampled at the cell centres.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

NORM_TOL = 1e-9


@dataclass(frozen=True)
class DifferencePdf:
    """Masses over unique signed differences (``n_merged`` counts tolerance merges)."""

    support: np.ndarray
    masses: np.ndarray
    n_pairs: int
    n_merged: int = 0

    def __len__(self) -> int:
        return len(self.support)

    def second_moment(self) -> float:
        return float(np.sum(self.masses * self.support**2))


@dataclass(frozen=True)
class Geometry:
    lo: float
    hi: float
    bins: int

    def __post_init__(self) -> None:
        if not self.hi > self.lo:
            raise DomainError(f"grid bounds need lo < hi, got [{self.lo}, {self.hi}]")
        if self.bins < 1:
            raise DomainError("grid needs at least one cell")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.bins

    @property
    def centers(self) -> np.ndarray:
        return self.lo + self.h * (np.arange(self.bins) + 0.5)


@dataclass(frozen=True)
class DensityGrid:
    geometry: Geometry
    density: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        rho = np.asarray(self.density, dtype=float)
        object.__setattr__(self, "density", rho)
        if rho.shape != (self.geometry.bins,):
            raise DomainError(f"density has shape {rho.shape}, expected ({self.geometry.bins},)")
        if not np.all(np.isfinite(rho)) or np.any(rho < 0):
            raise DomainError("density must be finite and non-negative")
        total = self.h * rho.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise DomainError(f"density integrates to {total!r}, not 1")

    @classmethod
    def from_samples(cls, lo: float, hi: float, values, normalize: bool = True) -> "DensityGrid":
        values = np.asarray(values, dtype=float)
        geom = Geometry(lo, hi, len(values))
        if normalize:
            values = values / (geom.h * values.sum())
        return cls(geom, values)

    @classmethod
    def from_function(cls, lo: float, hi: float, bins: int, f: Callable) -> "DensityGrid":
        geom = Geometry(lo, hi, bins)
        return cls.from_samples(lo, hi, f(geom.centers))

    @property
    def lo(self) -> float:
        return self.geometry.lo

    @property
    def hi(self) -> float:
        return self.geometry.hi

    @property
    def bins(self) -> int:
        return self.geometry.bins

    @property
    def h(self) -> float:
        return self.geometry.h

    @property
    def centers(self) -> np.ndarray:
        return self.geometry.centers


@dataclass(frozen=True)
class PhaseField:
    """Phase ``S`` on a grid; gauge ``S = 0`` at the lowest cell centre."""

    geometry: Geometry
    S: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        S = np.asarray(self.S, dtype=float)
        object.__setattr__(self, "S", S)
        if S.shape != (self.geometry.bins,):
            raise DomainError("phase has the wrong number of cells")

    @property
    def h(self) -> float:
        return self.geometry.h

    def gradient(self) -> np.ndarray:
        return derivative(self.S, self.h)


def check_geometry(*objs) -> Geometry:
    geoms = {o.geometry for o in objs}
    if len(geoms) != 1:
        raise DomainError(f"grid geometries differ: {sorted(map(str, geoms))}")
    return geoms.pop()


def derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Central differences inside, second-order one-sided at the ends."""
    if len(f) < 3:
        raise DomainError("need at least 3 cells to differentiate")
    return np.gradient(f, h, edge_order=2)


def difference_pdf(q: np.ndarray, tol: float = 1e-12, absolute: bool = False) -> DifferencePdf:
    """Fraction of ordered off-diagonal differences at each unique value.

    Values within ``tol`` of a sorted neighbour are chained into one atom
    (single linkage); the atom sits at the midpoint of its extreme members,
    which keeps the pdf exactly even for an antisymmetric ``q``.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    if n < 2 or q.shape != (n, n):
        raise DomainError("difference pdf needs a square matrix with N >= 2")
    if tol < 0:
        raise DomainError("tolerance must be non-negative")
    vals = q[~np.eye(n, dtype=bool)]
    if absolute:
        vals = np.abs(vals)
    vals = np.sort(vals)
    starts = np.concatenate(([True], np.diff(vals) > tol))
    idx = np.flatnonzero(starts)
    ends = np.concatenate((idx[1:], [len(vals)])) - 1
    support = 0.5 * (vals[idx] + vals[ends])
    counts = np.diff(np.concatenate((idx, [len(vals)])))
    n_unique = int(np.count_nonzero(np.diff(vals))) + 1
    return DifferencePdf(
        support=support,
        masses=counts / len(vals),
        n_pairs=len(vals),
        n_merged=n_unique - len(support),
    )


def to_grid(pdf: DifferencePdf, bins: int = 64, bounds: tuple[float, float] = (-1.0, 1.0)) -> DensityGrid:
    """Histogram density: each cell holds its mass divided by ``h``."""
    if bins < 8:
        raise DomainError(f"need at least 8 bins, got {bins}")
    geom = Geometry(float(bounds[0]), float(bounds[1]), int(bins))
    Q = pdf.support
    if np.any(Q < geom.lo) or np.any(Q > geom.hi):
        raise DomainError(f"pdf support [{Q.min()}, {Q.max()}] outside grid [{geom.lo}, {geom.hi}]")
    cell = np.floor((Q - geom.lo) / geom.h).astype(int)
    cell = np.clip(cell, 0, bins - 1)
    mass = np.bincount(cell, weights=pdf.masses, minlength=bins)
    return DensityGrid(geom, mass / geom.h)


def cumulative_trapezoid(f: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(f, dtype=float)
    out[1:] = np.cumsum(0.5 * h * (f[1:] + f[:-1]))
    return out


def phase_field(grid: DensityGrid) -> PhaseField:
    """``S(Q) = int_lo^Q rho(u) u^2 du`` by the cumulative trapezoid rule."""
    u = grid.centers
    return PhaseField(grid.geometry, cumulative_trapezoid(grid.density * u**2, grid.h))


def kinetic_energy_continuum(grid: DensityGrid, phase: PhaseField) -> float:
    """Midpoint rule for ``int (dS/dQ)^2 rho dQ``."""
    check_geometry(grid, phase)
    dS = phase.gradient()
    return float(grid.h * np.sum(dS**2 * grid.density))


def expected_view(grid: DensityGrid) -> float:
    """First moment ``int Q rho dQ``."""
    return float(grid.h * np.sum(grid.centers * grid.density))
