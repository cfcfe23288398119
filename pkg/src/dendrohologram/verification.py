"""Self-checks behind ``dht verify``.

Each check returns a :class:`CheckResult`. Checks compare the library
against closed forms or literal loop transcriptions kept in this file.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .dendrogram import build_dendrogram, events_from_array
from .density import DensityGrid, Geometry, PhaseField
from .geodesic import (
    Metric,
    circular_orbit,
    conserved_quantities,
    integrate_geodesic,
    timelike_velocity,
)
from .padic import BranchCode, encode_edge, padic_norm, ultrametric_distance
from .quantum import (
    bohmian_residuals,
    expansion_constants,
    fisher_functional_derivative,
    quantum_potential,
    variety_continuum,
    wavefunction,
)
from .views import (
    difference_matrix,
    differences_energy,
    distinctiveness_matrix,
    event_distribution,
    mean_momenta,
    variety,
)

FAULTS = ("flip_stencil_sign",)


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.passed = bool(self.passed)


def _order(errors) -> list[float]:
    return [math.log2(a / b) for a, b in zip(errors[:-1], errors[1:])]


def check_expansion_constants() -> CheckResult:
    first, second = expansion_constants()
    ok = abs(first - 1 / 6) <= 1e-9 and abs(second - 1 / 36) <= 1e-9
    return CheckResult("expansion_constants", ok, {"first": first, "second": second})


def check_ultrametric(rng: np.random.Generator, n_triples: int = 10_000) -> CheckResult:
    bad = 0
    for _ in range(n_triples):
        L = int(rng.integers(1, 33))
        x, y, z = (BranchCode(tuple(rng.integers(0, 2, L))) for _ in range(3))
        dxy, dyz, dxz = ultrametric_distance(x, y), ultrametric_distance(y, z), ultrametric_distance(x, z)
        if dxz > max(dxy, dyz):
            bad += 1
        if len({x, y, z}) == 3:
            top = sorted((dxy, dyz, dxz))
            bad += top[1] != top[2]
        if padic_norm(encode_edge(x) - encode_edge(y), 2) != dxy:
            bad += 1
    return CheckResult("ultrametric_laws", bad == 0, {"triples": n_triples, "violations": bad})


def check_uniform_distribution(rng: np.random.Generator) -> CheckResult:
    bad = []
    for n in range(3, 65):
        d = build_dendrogram(events_from_array(rng.random((n, 2))))
        dist = event_distribution(d)
        if len(dist) != n or any(p != Fraction(1, n) for p in dist.values()):
            bad.append(n)
    return CheckResult("uniform_distribution", not bad, {"failing_n": bad})


def _literal_views(e):
    n = len(e)
    q = [[e[i] - e[k] for k in range(n)] for i in range(n)]
    I = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                I[i][j] = sum((q[i][k] - q[j][k]) ** 2 for k in range(n) if k not in (i, j)) / n
    v = sum(I[i][j] for i in range(n) for j in range(n) if i != j) / n**2
    p = [sum(q[j][k] for k in range(n) if k != j) / (n - 1) for j in range(n)]
    T = sum(q[j][k] ** 2 for j in range(n) for k in range(n) if j != k) / (n * (n - 1))
    return np.array(I), v, np.array(p), T


def check_views_oracle(rng: np.random.Generator, n_sets: int = 50) -> CheckResult:
    worst = 0.0
    for _ in range(n_sets):
        n = int(rng.integers(3, 13))
        e = list(rng.random(n))
        q = difference_matrix(e)
        I, v, p, T = _literal_views(e)
        closed = (n - 2) / n * (np.subtract.outer(e, e)) ** 2
        np.fill_diagonal(closed, 0.0)
        worst = max(
            worst,
            np.max(np.abs(distinctiveness_matrix(q) - I)),
            np.max(np.abs(I - closed)),
            abs(variety(q) - v),
            np.max(np.abs(mean_momenta(q) - p)),
            abs(differences_energy(q) - T),
        )
    return CheckResult("views_oracle", worst <= 1e-12, {"max_abs_diff": worst})


def _gaussian_grid(bins: int, sigma: float, lo=-1.0, hi=1.0) -> DensityGrid:
    return DensityGrid.from_function(lo, hi, bins, lambda q: np.exp(-(q**2) / (2 * sigma**2)))


def check_quantum_potential(sign: float = 1.0) -> list[CheckResult]:
    sigma = 0.2
    errs_g, errs_c = [], []
    for B in (64, 128, 256):
        g = _gaussian_grid(B, sigma)
        c = g.centers
        exact = c**2 / (4 * sigma**4) - 1 / (2 * sigma**2)
        m = np.abs(c) <= 0.8
        errs_g.append(float(np.max(np.abs(quantum_potential(g, _sign=sign) - exact)[m])))
        gc = DensityGrid.from_function(-1, 1, B, lambda q: np.cos(q) ** 2)
        errs_c.append(float(np.max(np.abs(quantum_potential(gc, _sign=sign) + 1.0)[m])))
    out = []
    for name, errs in (("quantum_potential_gaussian", errs_g), ("quantum_potential_cosine", errs_c)):
        orders = _order(errs)
        ok = all(1.7 <= o <= 2.3 for o in orders) and errs[-1] < 0.05
        out.append(CheckResult(name, ok, {"errors": errs, "orders": orders}))
    return out


def check_variational_identity() -> CheckResult:
    worst = 0.0
    for f in (lambda q: np.exp(-(q**2) / (2 * 0.35**2)), lambda q: 1 + 0.5 * np.cos(np.pi * q)):
        g = DensityGrid.from_function(-1, 1, 96, f)
        dF = fisher_functional_derivative(g)[3:-3]
        target = -4.0 * quantum_potential(g)[3:-3]
        worst = max(worst, float(np.max(np.abs(dF - target)) / np.max(np.abs(target))))
    return CheckResult("variational_identity", worst <= 0.01, {"max_rel_error": worst})


def manufactured_madelung(bins: int, sigma: float = 0.15):
    """Previous/current states built so both residuals vanish analytically (U = 0)."""
    geom = Geometry(-1.0, 1.0, bins)
    Q = geom.centers
    norm = 1.0 / (sigma * math.sqrt(2 * math.pi))
    rho = norm * np.exp(-(Q**2) / (2 * sigma**2))
    drho = -Q / sigma**2 * rho
    S = 0.005 * Q + 0.002 * Q**3
    dS = 0.005 + 0.006 * Q**2
    d2S = 0.012 * Q
    uq = Q**2 / (4 * sigma**4) - 1 / (2 * sigma**2)
    S_prev = S + dS**2 + uq
    rho_prev = rho - (drho * dS + rho * d2S)
    curr = wavefunction(DensityGrid.from_samples(-1, 1, rho), PhaseField(geom, S))
    prev = wavefunction(DensityGrid.from_samples(-1, 1, rho_prev), PhaseField(geom, S_prev))
    return prev, curr


def check_madelung() -> CheckResult:
    errs_hj, errs_c = [], []
    for B in (64, 128, 256):
        prev, curr = manufactured_madelung(B)
        hj, cont = bohmian_residuals(prev, curr)
        m = np.abs(curr.grid.centers) <= 0.5
        errs_hj.append(float(np.max(np.abs(hj[m]))))
        errs_c.append(float(np.max(np.abs(cont[m]))))
    o_hj, o_c = _order(errs_hj), _order(errs_c)
    ok = all(1.7 <= o <= 2.3 for o in o_hj + o_c)
    return CheckResult(
        "madelung_residuals", ok, {"hj_errors": errs_hj, "hj_orders": o_hj, "cont_errors": errs_c, "cont_orders": o_c}
    )


def literal_variety_continuum(rho, h: float, Z_V: float = 1.0) -> float:
    B = len(rho)
    M = int(round(1.0 / h))

    def r(k):
        return rho[k] if k < B else 0.0

    def w(k, n):
        return 0.5 * h if k in (0, n - 1) else h

    total = 0.0
    for b in range(B):
        inner = 0.0
        for m in range(M + 1):
            for n in range(M + 1):
                inner += w(m, M + 1) * w(n, M + 1) * (m * h - n * h) ** 2 * r(b + m) * r(b + n)
        total += w(b, B) * rho[b] * inner
    return Z_V * total


def check_variety_oracle(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for B in (8, 16, 32):
        g = DensityGrid.from_samples(-1, 1, rng.random(B))
        worst = max(worst, abs(variety_continuum(g) - literal_variety_continuum(g.density, g.h)))
    return CheckResult("variety_continuum_oracle", worst <= 1e-10, {"max_abs_diff": worst})


def check_geodesics(n_steps: int = 10_000) -> list[CheckResult]:
    flat = Metric("minkowski")
    x0 = np.array([0.0, 1.0, -2.0, 0.5])
    u0 = timelike_velocity(flat, x0, [0.3, -0.1, 0.2])
    tr = integrate_geodesic(flat, x0, u0, 0.37, 200)
    line = x0 + np.outer(tr.s, u0)
    dev = float(max(np.max(np.abs(tr.x - line)), np.max(np.abs(tr.u - u0))))
    out = [CheckResult("geodesic_minkowski", dev <= 1e-12, {"max_deviation": dev})]

    m = Metric("schwarzschild", 1.0)
    xc, uc = circular_orbit(m, 6.0)
    tr = integrate_geodesic(m, xc, uc, 0.1, n_steps)
    E, L = conserved_quantities(tr)
    r_drift = float(np.max(np.abs(tr.x[:, 1] - 6.0)))
    e_drift = float(np.max(np.abs(E / E[0] - 1)))
    l_drift = float(np.max(np.abs(L / L[0] - 1)))
    ok = r_drift < 1e-6 and e_drift < 1e-6 and l_drift < 1e-6
    out.append(
        CheckResult("geodesic_circular_orbit", ok, {"r_drift": r_drift, "E_drift": e_drift, "L_drift": l_drift})
    )

    up = timelike_velocity(m, xc, [0.01, 0.0, uc[3]])
    span = 100.0
    ref = integrate_geodesic(m, xc, up, span / 3200, 3200).x[-1]
    errs = [float(np.max(np.abs(integrate_geodesic(m, xc, up, span / n, n).x[-1] - ref))) for n in (50, 100, 200)]
    orders = _order(errs)
    out.append(CheckResult("rk4_order", all(3.5 <= o <= 4.5 for o in orders), {"errors": errs, "orders": orders}))
    return out


def run_verification(seed: int = 0, faults: tuple[str, ...] = ()) -> dict:
    """Run every check; ``faults`` deliberately break one stage to prove detection."""
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown faults {sorted(unknown)}")
    rng = np.random.Generator(np.random.Philox(seed))
    sign = -1.0 if "flip_stencil_sign" in faults else 1.0
    results: list[CheckResult] = [check_expansion_constants()]
    steps: list[Callable[[], object]] = [
        lambda: check_ultrametric(rng),
        lambda: check_uniform_distribution(rng),
        lambda: check_views_oracle(rng),
        lambda: check_quantum_potential(sign),
        check_variational_identity,
        check_madelung,
        lambda: check_variety_oracle(rng),
        check_geodesics,
    ]
    for step in steps:
        r = step()
        results.extend(r if isinstance(r, list) else [r])
    return {
        "schema": "dht-verify/1",
        "seed": seed,
        "faults": list(faults),
        "passed": all(r.passed for r in results),
        "failed": [r.name for r in results if not r.passed],
        "checks": [asdict(r) for r in results],
    }
