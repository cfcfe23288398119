import time

import numpy as np
import pytest
import sympy as sp

from dendrohologram.density import DensityGrid, Geometry, PhaseField, phase_field
from dendrohologram.errors import DegenerateDensityError, DomainError
from dendrohologram.quantum import (
    action_evaluate,
    bohmian_residuals,
    expansion_constants,
    external_potential,
    fisher_information,
    hamiltonian_density,
    quantum_potential,
    third_order_constants,
    variety_continuum,
    variety_expansion_terms,
    wavefunction,
)

Qs, x, y = sp.symbols("Q x y", real=True)


def gaussian(bins, sigma, lo=-1.0, hi=1.0):
    return DensityGrid.from_function(lo, hi, bins, lambda q: np.exp(-(q**2) / (2 * sigma**2)))


class TestConstants:
    def test_against_symbolic_integrals(self):
        t0 = time.perf_counter()
        first, second = expansion_constants()
        assert time.perf_counter() - t0 < 1.0
        exact1 = sp.integrate((x - y) ** 2, (x, 0, 1), (y, 0, 1))
        exact2 = sp.integrate((x - y) ** 2 * x * y, (x, 0, 1), (y, 0, 1))
        assert (exact1, exact2) == (sp.Rational(1, 6), sp.Rational(1, 36))
        assert abs(first - 1 / 6) <= 1e-9 and abs(second - 1 / 36) <= 1e-9

    def test_third_order_both_readings(self):
        raw = sp.integrate((x - y) ** 2 * x**2 * y**2, (x, 0, 1), (y, 0, 1))
        taylor = sp.integrate((x - y) ** 2 * (x**2 / 2) * (y**2 / 2), (x, 0, 1), (y, 0, 1))
        assert (raw, taylor) == (sp.Rational(1, 120), sp.Rational(1, 480))
        c = third_order_constants()
        assert c["raw"] == pytest.approx(1 / 120, abs=1e-12)
        assert c["taylor"] == pytest.approx(1 / 480, abs=1e-12)


class TestQuantumPotential:
    def test_flat(self):
        g = DensityGrid.from_samples(-1, 1, np.ones(32))
        np.testing.assert_allclose(quantum_potential(g), 0.0, atol=1e-9)

    def test_cosine_amplitude(self):
        g = DensityGrid.from_function(-1, 1, 256, lambda q: np.cos(q) ** 2)
        m = np.abs(g.centers) <= 0.8
        np.testing.assert_allclose(quantum_potential(g)[m], -1.0, atol=1e-4)

    def test_gaussian_closed_form_and_order(self):
        sigma = 0.2
        errs = []
        for bins in (64, 128, 256):
            g = gaussian(bins, sigma)
            c = g.centers
            exact = c**2 / (4 * sigma**4) - 1 / (2 * sigma**2)
            m = np.abs(c) <= 0.8
            errs.append(np.max(np.abs(quantum_potential(g) - exact)[m]))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all((orders >= 1.7) & (orders <= 2.3))

    def test_bohmian_convention(self):
        g = gaussian(64, 0.3)
        np.testing.assert_allclose(quantum_potential(g, bohmian=True), -0.5 * quantum_potential(g))

    def test_floor_keeps_values_finite(self):
        rho = np.zeros(32)
        rho[10:20] = 1.0
        assert np.all(np.isfinite(quantum_potential(DensityGrid.from_samples(-1, 1, rho))))


class TestWavefunction:
    def test_real_for_zero_phase(self):
        g = gaussian(32, 0.3)
        st = wavefunction(g, PhaseField(g.geometry, np.zeros(32)))
        np.testing.assert_array_equal(st.psi.imag, 0.0)
        np.testing.assert_allclose(st.psi.real, np.sqrt(g.density))

    def test_modulus_and_gauge(self):
        g = gaussian(48, 0.3)
        ph = phase_field(g)
        a = wavefunction(g, ph)
        b = wavefunction(g, PhaseField(g.geometry, ph.S + 0.7))
        np.testing.assert_allclose(np.abs(a.psi) ** 2, g.density, rtol=1e-12)
        assert abs(g.h * np.sum(np.abs(a.psi) ** 2) - 1) <= 1e-9
        np.testing.assert_allclose(b.psi, a.psi * np.exp(0.7j), atol=1e-12)

    def test_geometry_mismatch(self):
        with pytest.raises(DomainError):
            wavefunction(gaussian(32, 0.3), PhaseField(Geometry(-1, 1, 16), np.zeros(16)))


def _manufactured(bins, sigma=0.15):
    """Symbolic (rho, S) pair that makes both residuals vanish analytically."""
    rho = sp.exp(-(Qs**2) / (2 * sigma**2)) / (sigma * sp.sqrt(2 * sp.pi))
    S = sp.Rational(1, 200) * Qs + sp.Rational(1, 500) * Qs**3
    uq = sp.diff(sp.sqrt(rho), Qs, 2) / sp.sqrt(rho)
    S_prev = S + sp.diff(S, Qs) ** 2 + uq
    rho_prev = rho - sp.diff(rho * sp.diff(S, Qs), Qs)
    geom = Geometry(-1.0, 1.0, bins)
    c = geom.centers
    ev = {k: sp.lambdify(Qs, sp.simplify(f), "numpy")(c) for k, f in
          dict(rho=rho, S=S, S_prev=S_prev, rho_prev=rho_prev).items()}
    curr = wavefunction(DensityGrid.from_samples(-1, 1, ev["rho"]), PhaseField(geom, ev["S"]))
    prev = wavefunction(DensityGrid.from_samples(-1, 1, ev["rho_prev"]), PhaseField(geom, ev["S_prev"]))
    return prev, curr


class TestResiduals:
    def test_static_flat_state(self):
        g = DensityGrid.from_samples(-1, 1, np.ones(16))
        st = wavefunction(g, PhaseField(g.geometry, np.full(16, 2.0)))
        hj, cont = bohmian_residuals(st, st)
        np.testing.assert_allclose(hj, 0, atol=1e-9)
        np.testing.assert_allclose(cont, 0, atol=1e-12)

    def test_manufactured_pair_converges(self):
        errs_hj, errs_c = [], []
        for bins in (64, 128, 256):
            prev, curr = _manufactured(bins)
            hj, cont = bohmian_residuals(prev, curr)
            m = np.abs(curr.grid.centers) <= 0.5
            errs_hj.append(np.max(np.abs(hj[m])))
            errs_c.append(np.max(np.abs(cont[m])))
        for errs in (errs_hj, errs_c):
            orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
            assert np.all((orders >= 1.7) & (orders <= 2.3)), errs

    def test_squared_flux_variant_differs(self):
        prev, curr = _manufactured(128)
        _, plain = bohmian_residuals(prev, curr)
        _, squared = bohmian_residuals(prev, curr, continuity_squared=True)
        assert np.all(np.isfinite(squared))
        assert np.max(np.abs(squared - plain)) > 1e-3

    def test_gauge(self):
        prev, curr = _manufactured(64)
        shifted = wavefunction(curr.grid, PhaseField(curr.geometry, curr.S + 0.3))
        hj, cont = bohmian_residuals(prev, curr)
        hj2, cont2 = bohmian_residuals(prev, shifted)
        np.testing.assert_allclose(cont2, cont, atol=1e-12)
        np.testing.assert_allclose(hj2 - hj, 0.3, atol=1e-9)

    def test_geometry_mismatch(self):
        a = wavefunction(gaussian(32, 0.3), phase_field(gaussian(32, 0.3)))
        b = wavefunction(gaussian(64, 0.3), phase_field(gaussian(64, 0.3)))
        with pytest.raises(DomainError):
            bohmian_residuals(a, b)


class TestHamiltonian:
    def test_flat_density_potential(self):
        g = DensityGrid.from_samples(-1, 1, np.ones(16))
        H = hamiltonian_density(g, PhaseField(g.geometry, np.zeros(16)))
        np.testing.assert_allclose(H, g.density**2)

    def test_fisher_sign(self):
        g = gaussian(64, 0.3)
        H = hamiltonian_density(g, PhaseField(g.geometry, np.zeros(64)), U=0.0)
        drho = np.gradient(g.density, g.h, edge_order=2)
        np.testing.assert_allclose(H, -(drho**2) / g.density, rtol=1e-12)
        assert np.all(H <= 0)

    def test_gaps(self):
        rho = np.ones(16)
        rho[:4] = 0.0
        g = DensityGrid.from_samples(-1, 1, rho)
        H = hamiltonian_density(g, PhaseField(g.geometry, np.zeros(16)))
        assert np.all(np.isnan(H[:4])) and np.all(np.isfinite(H[4:]))


def _literal_action(states, U, A):
    """Direct loop transcription of the per-step action sum."""
    total = 0.0
    for k, st in enumerate(states):
        rho, S, h, B = st.rho, st.S, st.grid.h, st.grid.bins

        def d(f, i):
            if i == 0:
                return (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
            if i == B - 1:
                return (3 * f[B - 1] - 4 * f[B - 2] + f[B - 3]) / (2 * h)
            return (f[i + 1] - f[i - 1]) / (2 * h)

        for i in range(B):
            if k > 0:
                total += h * (S[i] - states[k - 1].S[i]) * rho[i]
            total += h * d(S, i) ** 2 * rho[i]
            total += A * h * d(rho, i) ** 2 / rho[i]
            total += h * U[i] * rho[i]
    return total


class TestAction:
    def test_static_flat(self):
        g = DensityGrid.from_samples(-1, 1, np.ones(16))
        br = action_evaluate([wavefunction(g, PhaseField(g.geometry, np.zeros(16)))])
        assert br.kinetic == 0.0 and br.dendro_energy == 0.0

    def test_identical_states(self):
        g = gaussian(32, 0.3)
        st = wavefunction(g, phase_field(g))
        assert action_evaluate([st, st]).dendro_energy == 0.0

    def test_three_state_transcription(self):
        states = [wavefunction(g, phase_field(g)) for g in (gaussian(40, s) for s in (0.2, 0.3, 0.4))]
        U = 0.5 * states[0].grid.centers ** 2
        br = action_evaluate(states, U, variety_scale=1.5)
        assert br.total == pytest.approx(_literal_action(states, U, 1.5), rel=1e-12)

    def test_potential_modes(self):
        g = gaussian(32, 0.3)
        assert np.all(external_potential(g, "zero") == 0)
        np.testing.assert_allclose(external_potential(g, "paper"), 1.0)
        np.testing.assert_array_equal(external_potential(g, "density"), g.density)
        with pytest.raises(DomainError):
            external_potential(g, "harmonic")


def _literal_variety(rho, h, Z_V):
    B, M = len(rho), int(round(1 / h))
    w = lambda k, n: h / 2 if k in (0, n - 1) else h  # noqa: E731
    r = lambda k: rho[k] if k < B else 0.0  # noqa: E731
    return Z_V * sum(
        w(b, B) * rho[b] * w(m, M + 1) * w(n, M + 1) * ((m - n) * h) ** 2 * r(b + m) * r(b + n)
        for b in range(B) for m in range(M + 1) for n in range(M + 1)
    )


class TestVarietyContinuum:
    @pytest.mark.parametrize("bins", [8, 16, 24])
    def test_matches_literal_loops(self, rng, bins):
        g = DensityGrid.from_samples(-1, 1, rng.random(bins))
        assert abs(variety_continuum(g, -2.0) - _literal_variety(g.density, g.h, -2.0)) <= 1e-10

    def test_single_cell_is_zero(self):
        rho = np.zeros(16)
        rho[7] = 1.0
        assert variety_continuum(DensityGrid.from_samples(-1, 1, rho)) == 0.0

    def test_needs_integral_inverse_width(self):
        with pytest.raises(DomainError):
            variety_continuum(DensityGrid.from_samples(-1, 1, np.ones(9)))


class TestVarietyExpansion:
    def test_flat_has_no_fisher_term(self):
        ve = variety_expansion_terms(DensityGrid.from_samples(-1, 1, np.ones(32)))
        assert ve.fisher_term == 0.0
        assert ve.const_term == pytest.approx(-6.0)

    def test_gaussian_fisher_matches_symbolic(self):
        sigma = sp.Rational(1, 5)
        f = sp.exp(-(Qs**2) / (2 * sigma**2))
        Z = sp.integrate(f, (Qs, -1, 1))
        rho = f / Z
        exact = float(sp.integrate(sp.simplify(sp.diff(rho, Qs) ** 2 / rho), (Qs, -1, 1)))
        ve = variety_expansion_terms(gaussian(256, 0.2))
        assert abs(-ve.fisher_term - exact) <= 0.01 * exact
        assert ve.excluded_cells == 0

    @pytest.mark.parametrize("L", [100, 200])
    def test_slowly_varying_residual_small(self, L):
        # known residual sources: edge truncation ~ 0.8/L and the mean-density
        # normalization ~ -1.5 eps^2, both relative to the retained terms
        eps = 0.02
        g = DensityGrid.from_function(-L / 2, L / 2, 32 * L, lambda q: 1 + eps * np.cos(2 * np.pi * q / L))
        ve = variety_expansion_terms(g)
        assert abs(ve.residual) <= 0.01 * abs(ve.const_term + ve.fisher_term)

    def test_degenerate(self):
        with pytest.raises(DegenerateDensityError):
            variety_expansion_terms(gaussian(32, 0.3), floor=1e6)

    def test_fisher_information_positive(self):
        assert fisher_information(gaussian(64, 0.3)) > 0
