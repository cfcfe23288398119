"""Emergent Bohmian quantities on a density grid.

Unit-free throughout (effectively hbar = m = 1). The quantum potential uses
the bare ``D^2 sqrt(rho) / sqrt(rho)`` by default; ``bohmian=True`` gives
the textbook ``-(1/2) D^2 sqrt(rho) / sqrt(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .density import (
    DensityGrid,
    Geometry,
    PhaseField,
    check_geometry,
    derivative,
    kinetic_energy_continuum,
)
from .errors import DegenerateDensityError, DomainError

DEFAULT_FLOOR = 1e-12
POTENTIAL_MODES = ("zero", "paper", "density")


def second_difference(f: np.ndarray, h: float) -> np.ndarray:
    """Central second difference; second-order one-sided stencils at the ends."""
    f = np.asarray(f, dtype=float)
    if len(f) < 4:
        raise DomainError("need at least 4 cells for a second difference")
    out = np.empty_like(f)
    out[1:-1] = f[:-2] - 2.0 * f[1:-1] + f[2:]
    out[0] = 2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]
    out[-1] = 2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]
    return out / h**2


def floored_cells(grid: DensityGrid, floor: float = DEFAULT_FLOOR) -> int:
    return int(np.count_nonzero(grid.density < floor))


def quantum_potential(
    grid: DensityGrid, floor: float = DEFAULT_FLOOR, bohmian: bool = False, _sign: float = 1.0
) -> np.ndarray:
    """``U^Q = D^2 a / a`` with ``a = sqrt(max(rho, floor))``."""
    if not floor > 0:
        raise DomainError("density floor must be positive")
    a = np.sqrt(np.maximum(grid.density, floor))
    uq = _sign * second_difference(a, grid.h) / a
    return -0.5 * uq if bohmian else uq


# --- continuum variety ---------------------------------------------------


def _shift_count(h: float) -> int:
    M = int(round(1.0 / h))
    if M < 1 or abs(M * h - 1.0) > 1e-9:
        raise DomainError(f"unit shift range needs 1/h integral, got 1/h = {1.0 / h!r}")
    return M


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    if n > 1:
        w[0] = w[-1] = 0.5 * h
    return w


def variety_continuum(grid: DensityGrid, Z_V: float = 1.0) -> float:
    """``Z_V int dQ rho(Q) int_0^1 int_0^1 (x-y)^2 rho(Q+x) rho(Q+y) dx dy``.

    Shifts run over the grid's own nodes, ``x = m h`` for ``m = 0..1/h``;
    rho is zero outside the grid. Trapezoid weights on all three axes.
    """
    rho = grid.density
    B, h = grid.bins, grid.h
    M = _shift_count(h)
    wx = _trapezoid_weights(M + 1, h)
    x = h * np.arange(M + 1)
    padded = np.concatenate((rho, np.zeros(M)))
    # shifted[b, m] = rho at cell b + m
    shifted = np.lib.stride_tricks.sliding_window_view(padded, M + 1)[:B]
    a = shifted * wx
    s0 = a.sum(axis=1)
    s1 = a @ x
    s2 = a @ x**2
    # sum_mn a_m a_n (x_m - x_n)^2 = 2 s2 s0 - 2 s1^2
    inner = 2.0 * (s2 * s0 - s1**2)
    wq = _trapezoid_weights(B, h)
    return float(Z_V * np.sum(wq * rho * inner))


def expansion_constants() -> tuple[float, float]:
    """``int int (x-y)^2`` and ``int int (x-y)^2 x y`` over the unit square."""
    first, _ = integrate.dblquad(lambda y, x: (x - y) ** 2, 0, 1, 0, 1, epsabs=1e-13, epsrel=1e-13)
    second, _ = integrate.dblquad(
        lambda y, x: (x - y) ** 2 * x * y, 0, 1, 0, 1, epsabs=1e-13, epsrel=1e-13
    )
    return first, second


def third_order_constants() -> dict[str, float]:
    """Coefficient candidates for the curvature-squared term.

    ``raw`` integrates ``(x-y)^2 x^2 y^2``; ``taylor`` includes the 1/2! factors
    of both second-order Taylor terms, ``(x-y)^2 (x^2/2)(y^2/2)``.
    """
    raw, _ = integrate.dblquad(
        lambda y, x: (x - y) ** 2 * x**2 * y**2, 0, 1, 0, 1, epsabs=1e-13, epsrel=1e-13
    )
    return {"raw": raw, "taylor": raw / 4.0}


@dataclass(frozen=True)
class VarietyExpansion:
    z_v: float
    const_term: float
    fisher_term: float
    variety_direct: float
    residual: float
    const_error: float
    fisher_error: float
    window_cells: int
    excluded_cells: int


def _window(grid: DensityGrid, floor: float) -> np.ndarray:
    mask = grid.density > floor
    if not mask.any():
        raise DegenerateDensityError("every cell is below the density floor")
    return mask


def fisher_information(grid: DensityGrid, floor: float = DEFAULT_FLOOR) -> float:
    """``int (d rho)^2 / rho dQ`` over cells above the floor."""
    rho = grid.density
    mask = _window(grid, floor)
    drho = derivative(rho, grid.h)
    return float(grid.h * np.sum(drho[mask] ** 2 / rho[mask]))


def _coarsen(grid: DensityGrid) -> DensityGrid | None:
    if grid.bins % 2 or grid.bins < 8:
        return None
    rho = 0.5 * (grid.density[0::2] + grid.density[1::2])
    return DensityGrid(Geometry(grid.lo, grid.hi, grid.bins // 2), rho)


def _leading_terms(grid: DensityGrid, floor: float) -> tuple[float, float]:
    mask = _window(grid, floor)
    const = -6.0 * grid.h * float(np.sum(grid.density[mask]))
    return const, 0.0 - fisher_information(grid, floor)


def variety_expansion_terms(
    grid: DensityGrid, floor: float = DEFAULT_FLOOR, z_v: float | None = None
) -> VarietyExpansion:
    """Leading terms of the short-shift expansion of the continuum variety.

    ``const_term = -6 int rho`` and ``fisher_term = -int (d rho)^2 / rho`` on
    the above-floor window. ``residual`` compares them against the direct
    triple integral with ``Z_V = -36 / mean(rho)^2`` (window mean) unless an
    explicit ``z_v`` is given. Error estimates are the change under 2x coarsening.
    """
    mask = _window(grid, floor)
    const, fisher = _leading_terms(grid, floor)
    if z_v is None:
        z_v = -36.0 / float(np.mean(grid.density[mask])) ** 2
    direct = variety_continuum(grid, z_v)
    coarse = _coarsen(grid)
    if coarse is not None and (coarse.density > floor).any():
        c2, f2 = _leading_terms(coarse, floor)
        const_err, fisher_err = abs(const - c2), abs(fisher - f2)
    else:
        const_err = fisher_err = float("nan")
    return VarietyExpansion(
        z_v=z_v,
        const_term=const,
        fisher_term=fisher,
        variety_direct=direct,
        residual=direct - (const + fisher),
        const_error=const_err,
        fisher_error=fisher_err,
        window_cells=int(mask.sum()),
        excluded_cells=int((~mask).sum()),
    )


def fisher_functional_derivative(grid: DensityGrid, eps: float = 1e-6) -> np.ndarray:
    """Cellwise ``delta F / delta rho`` of the discrete Fisher functional.

    Central finite perturbation of each cell by ``eps * rho_b``; the plain
    gradient is divided by ``h`` to approximate the functional derivative.
    """
    rho = grid.density
    h = grid.h
    if np.any(rho <= 0):
        raise DomainError("functional derivative needs a strictly positive density")

    def F(r):
        return h * np.sum(derivative(r, h) ** 2 / r)

    out = np.empty_like(rho)
    for b in range(len(rho)):
        step = eps * rho[b]
        up, dn = rho.copy(), rho.copy()
        up[b] += step
        dn[b] -= step
        out[b] = (F(up) - F(dn)) / (2.0 * step * h)
    return out


# --- states, residuals, action ---------------------------------------------


@dataclass(frozen=True)
class QuantumState:
    grid: DensityGrid
    phase: PhaseField
    psi: np.ndarray = field(repr=False)

    @property
    def rho(self) -> np.ndarray:
        return self.grid.density

    @property
    def S(self) -> np.ndarray:
        return self.phase.S

    @property
    def geometry(self) -> Geometry:
        return self.grid.geometry


def wavefunction(grid: DensityGrid, phase: PhaseField) -> QuantumState:
    """``psi = sqrt(rho) exp(i S)`` cellwise."""
    check_geometry(grid, phase)
    psi = np.sqrt(grid.density) * np.exp(1j * phase.S)
    return QuantumState(grid, phase, psi)


def external_potential(grid: DensityGrid, mode: str = "zero") -> np.ndarray:
    """``zero``; ``paper`` (the integral of rho, i.e. 1 everywhere); ``density`` (U = rho)."""
    if mode == "zero":
        return np.zeros(grid.bins)
    if mode == "paper":
        return np.full(grid.bins, grid.h * float(np.sum(grid.density)))
    if mode == "density":
        return grid.density.copy()
    raise DomainError(f"unknown potential mode {mode!r}; choose from {POTENTIAL_MODES}")


def _potential(U, bins: int) -> np.ndarray:
    if U is None:
        return np.zeros(bins)
    U = np.broadcast_to(np.asarray(U, dtype=float), (bins,))
    if not np.all(np.isfinite(U)):
        raise DomainError("external potential must be finite")
    return U


def bohmian_residuals(
    prev: QuantumState,
    curr: QuantumState,
    U=None,
    floor: float = DEFAULT_FLOOR,
    continuity_squared: bool = False,
    bohmian: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Hamilton-Jacobi and continuity residuals for one unit dendrogram step.

    ``res_hj = dS + (S')^2 + U + U^Q`` and ``res_cont = d rho - (rho S')'``,
    with ``dS``/``d rho`` the present-minus-previous differences. With
    ``continuity_squared`` the flux is squared before differentiating.
    """
    check_geometry(prev, curr)
    h = curr.grid.h
    U = _potential(U, curr.grid.bins)
    dS = curr.S - prev.S
    Sx = curr.phase.gradient()
    uq = quantum_potential(curr.grid, floor, bohmian=bohmian)
    res_hj = dS + Sx**2 + U + uq
    flux = curr.rho * Sx
    if continuity_squared:
        flux = flux**2
    res_cont = (curr.rho - prev.rho) - derivative(flux, h)
    return res_hj, res_cont


def hamiltonian_density(
    grid: DensityGrid, phase: PhaseField, U=None, floor: float = DEFAULT_FLOOR
) -> np.ndarray:
    """``H = rho [ (S')^2 / 2 - (rho'/rho)^2 + U ]``; ``U`` defaults to rho.

    Cells below the floor are gaps and come back as NaN.
    """
    check_geometry(grid, phase)
    rho = grid.density
    U = rho if U is None else _potential(U, grid.bins)
    Sx = phase.gradient()
    drho = derivative(rho, grid.h)
    H = np.full(grid.bins, np.nan)
    ok = rho > floor
    H[ok] = rho[ok] * (0.5 * Sx[ok] ** 2 - (drho[ok] / rho[ok]) ** 2 + U[ok])
    return H


@dataclass(frozen=True)
class ActionBreakdown:
    kinetic: float
    dendro_energy: float
    variety: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.dendro_energy - self.variety + self.potential

    def as_dict(self) -> dict[str, float]:
        return {
            "kinetic": self.kinetic,
            "dendro_energy": self.dendro_energy,
            "variety": self.variety,
            "potential": self.potential,
            "total": self.total,
        }


def step_variety(grid: DensityGrid, floor: float = DEFAULT_FLOOR) -> float:
    """Per-step variety in Fisher form, ``-int (rho')^2 / rho``."""
    return 0.0 - fisher_information(grid, floor)


def action_evaluate(
    states: Sequence[QuantumState],
    U=None,
    variety_scale: float = 1.0,
    floor: float = DEFAULT_FLOOR,
) -> ActionBreakdown:
    """Discrete action summed over dendrogram steps.

    Per step: ``int dS rho`` (from the second state on, weighted by the
    present rho) ``+ int (S')^2 rho - A v + int U rho``.
    """
    if not states:
        raise DomainError("action needs at least one state")
    check_geometry(*states)
    kinetic = dendro = var = pot = 0.0
    for k, st in enumerate(states):
        h = st.grid.h
        if k > 0:
            dendro += h * float(np.sum((st.S - states[k - 1].S) * st.rho))
        kinetic += kinetic_energy_continuum(st.grid, st.phase)
        var += variety_scale * step_variety(st.grid, floor)
        pot += h * float(np.sum(_potential(U, st.grid.bins) * st.rho))
    return ActionBreakdown(kinetic, dendro, var, pot)
