"""Geodesic event sources in built-in metrics (G = c = 1, signature -+++)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dendrogram import EventPoint
from .errors import ConfigError, DomainError, HorizonError, IntegrationAbort

SPACETIMES = ("minkowski", "schwarzschild")
PROJECTIONS = ("coordinates", "acceleration")


@dataclass(frozen=True)
class Metric:
    name: str = "schwarzschild"
    mass: float = 1.0

    def __post_init__(self) -> None:
        if self.name not in SPACETIMES:
            raise ConfigError(f"unknown spacetime {self.name!r}; choose from {SPACETIMES}")
        if self.name == "schwarzschild" and not self.mass > 0:
            raise ConfigError("schwarzschild mass must be positive")

    @property
    def coordinate_names(self) -> tuple[str, str, str, str]:
        if self.name == "schwarzschild":
            return ("t", "r", "theta", "phi")
        return ("t", "x", "y", "z")

    def _check(self, x) -> None:
        if self.name == "schwarzschild" and not x[1] > 2.0 * self.mass:
            raise HorizonError(f"r = {x[1]!r} is not outside the horizon r = {2 * self.mass}")

    def g(self, x) -> np.ndarray:
        """Covariant metric components at ``x``."""
        if self.name == "minkowski":
            return np.diag([-1.0, 1.0, 1.0, 1.0])
        self._check(x)
        r, th = x[1], x[2]
        f = 1.0 - 2.0 * self.mass / r
        return np.diag([-f, 1.0 / f, r * r, (r * math.sin(th)) ** 2])


def christoffel(metric: Metric, x) -> np.ndarray:
    """``G[s, m, n] = Gamma^s_{mn}``, closed form, symmetric in ``m, n``."""
    G = np.zeros((4, 4, 4))
    if metric.name == "minkowski":
        return G
    metric._check(x)
    M = metric.mass
    r, th = float(x[1]), float(x[2])
    f = 1.0 - 2.0 * M / r
    s, c = math.sin(th), math.cos(th)
    G[0, 0, 1] = G[0, 1, 0] = M / (r * r * f)
    G[1, 0, 0] = M * f / (r * r)
    G[1, 1, 1] = -M / (r * r * f)
    G[1, 2, 2] = -r * f
    G[1, 3, 3] = -r * f * s * s
    G[2, 1, 2] = G[2, 2, 1] = 1.0 / r
    G[2, 3, 3] = -s * c
    G[3, 1, 3] = G[3, 3, 1] = 1.0 / r
    G[3, 2, 3] = G[3, 3, 2] = c / s
    return G


def geodesic_acceleration(metric: Metric, x, u) -> np.ndarray:
    """``-Gamma^s_{mn} u^m u^n``."""
    return -np.einsum("smn,m,n->s", christoffel(metric, x), u, u)


def _schwarzschild_rhs(M: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    # same terms as christoffel(), unrolled for speed
    r, th = x[1], x[2]
    ut, ur, uth, uph = u
    f = 1.0 - 2.0 * M / r
    s, c = math.sin(th), math.cos(th)
    a0 = -2.0 * M / (r * r * f) * ut * ur
    a1 = -M * f / (r * r) * ut * ut + M / (r * r * f) * ur * ur + r * f * (uth * uth + s * s * uph * uph)
    a2 = -2.0 / r * ur * uth + s * c * uph * uph
    a3 = -2.0 / r * ur * uph - 2.0 * c / s * uth * uph
    return np.array([ut, ur, uth, uph, a0, a1, a2, a3])


@dataclass(frozen=True)
class GeodesicTrajectory:
    metric: Metric
    ds: float
    x: np.ndarray  # (n, 4)
    u: np.ndarray  # (n, 4)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def s(self) -> np.ndarray:
        return self.ds * np.arange(len(self.x))

    def write_csv(self, path: str | Path) -> None:
        names = self.metric.coordinate_names
        header = ["s", *names, "u0", "u1", "u2", "u3"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for s, x, u in zip(self.s, self.x, self.u):
                w.writerow([repr(float(v)) for v in (s, *x, *u)])


def integrate_geodesic(metric: Metric, x0, u0, ds: float, n_steps: int) -> GeodesicTrajectory:
    """Classical RK4 on ``x' = u, u' = -Gamma u u``; returns ``n_steps + 1`` samples.

    State updates use compensated summation so long runs do not pile up
    rounding in the coordinates.
    """
    if n_steps < 2:
        raise DomainError("need at least 2 integration steps")
    if not ds > 0:
        raise DomainError("step ds must be positive")
    y = np.concatenate([np.asarray(x0, dtype=float), np.asarray(u0, dtype=float)])
    if y.shape != (8,) or not np.all(np.isfinite(y)):
        raise DomainError("initial state must be 4 finite coordinates and 4 velocity components")
    metric._check(y[:4])

    if metric.name == "minkowski":
        def rhs(z):
            return np.concatenate([z[4:], np.zeros(4)])
    else:
        M = metric.mass

        def rhs(z):
            if not z[1] > 2.0 * M:
                raise HorizonError("horizon crossed")
            return _schwarzschild_rhs(M, z[:4], z[4:])

    out = np.empty((n_steps + 1, 8))
    out[0] = y
    comp = np.zeros(8)
    for i in range(1, n_steps + 1):
        try:
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * ds * k1)
            k3 = rhs(y + 0.5 * ds * k2)
            k4 = rhs(y + ds * k3)
        except HorizonError as exc:
            raise IntegrationAbort(f"step {i}: {exc}", step=i) from exc
        dy = (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) - comp
        y_new = y + dy
        comp = (y_new - y) - dy
        y = y_new
        if not np.all(np.isfinite(y)) or (metric.name == "schwarzschild" and not y[1] > 2.0 * metric.mass):
            raise IntegrationAbort(f"step {i}: state left the metric domain", step=i)
        out[i] = y
    return GeodesicTrajectory(metric, ds, out[:, :4].copy(), out[:, 4:].copy())


def timelike_velocity(metric: Metric, x, spatial) -> np.ndarray:
    """Complete ``(u^1, u^2, u^3)`` with ``u^0 > 0`` so that ``g(u, u) = -1``."""
    g = np.diag(metric.g(x))
    spatial = np.asarray(spatial, dtype=float)
    ut2 = (1.0 + np.sum(g[1:] * spatial**2)) / -g[0]
    return np.concatenate([[math.sqrt(ut2)], spatial])


def circular_orbit(metric: Metric, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Equatorial circular orbit at radius ``r`` (needs ``r > 3M``)."""
    M = metric.mass
    if metric.name != "schwarzschild" or not r > 3.0 * M:
        raise DomainError("circular timelike orbits need schwarzschild with r > 3M")
    ut = 1.0 / math.sqrt(1.0 - 3.0 * M / r)
    uph = math.sqrt(M / r**3) * ut
    return np.array([0.0, r, math.pi / 2, 0.0]), np.array([ut, 0.0, 0.0, uph])


def orbit_initial_state(metric: Metric, r0: float, phi_rate_scale: float = 1.0):
    """Equatorial start at radius ``r0`` with ``u^r = 0`` and a scaled circular ``u^phi``.

    For minkowski the same numbers give a uniform straight line in (t, x, y, z).
    """
    if metric.name == "minkowski":
        x0 = np.array([0.0, r0, 0.0, 0.0])
        return x0, timelike_velocity(metric, x0, [0.0, phi_rate_scale, 0.0])
    x0, u_circ = circular_orbit(metric, r0)
    return x0, timelike_velocity(metric, x0, [0.0, 0.0, phi_rate_scale * u_circ[3]])


def conserved_quantities(traj: GeodesicTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Killing energy ``E = (1 - 2M/r) u^t`` and angular momentum ``L = r^2 sin^2 u^phi``."""
    if traj.metric.name != "schwarzschild":
        raise DomainError("conserved E, L implemented for schwarzschild only")
    r, th = traj.x[:, 1], traj.x[:, 2]
    E = (1.0 - 2.0 * traj.metric.mass / r) * traj.u[:, 0]
    L = (r * np.sin(th)) ** 2 * traj.u[:, 3]
    return E, L


def sample_indices(n_samples: int, stride: int) -> np.ndarray:
    """Indices 0, stride, 2 stride, ...; the last sample only if it lands on the stride."""
    if stride < 1:
        raise DomainError("stride must be >= 1")
    return np.arange(0, n_samples, stride)


def geodesic_residual(traj: GeodesicTrajectory) -> np.ndarray:
    """``d^2x/ds^2 + Gamma u u`` per sample, with ``du/ds`` by finite differences."""
    du = np.gradient(traj.u, traj.ds, axis=0, edge_order=2)
    return du - np.array([geodesic_acceleration(traj.metric, x, u) for x, u in zip(traj.x, traj.u)])


def sample_events(
    traj: GeodesicTrajectory,
    stride: int = 1,
    projection: str = "coordinates",
    scales=None,
) -> list[EventPoint]:
    """Every ``stride``-th sample as an event, optionally rescaled per coordinate."""
    if projection not in PROJECTIONS:
        raise ConfigError(f"unknown projection {projection!r}; choose from {PROJECTIONS}")
    idx = sample_indices(len(traj), stride)
    if len(idx) == 0:
        raise DomainError("no samples selected")
    data = traj.x if projection == "coordinates" else geodesic_residual(traj)
    data = data[idx]
    if scales is not None:
        data = data * np.asarray(scales, dtype=float)
    return [EventPoint(i, tuple(row)) for i, row in enumerate(data)]
