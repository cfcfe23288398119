from fractions import Fraction

import numpy as np
import pytest

from dendrohologram.density import (
    DensityGrid,
    DifferencePdf,
    Geometry,
    PhaseField,
    difference_pdf,
    expected_view,
    kinetic_energy_continuum,
    phase_field,
    to_grid,
)
from dendrohologram.errors import DomainError
from dendrohologram.views import difference_matrix


def uniform(bins):
    return DensityGrid.from_samples(-1.0, 1.0, np.ones(bins))


class TestDifferencePdf:
    def test_pair(self):
        pdf = difference_pdf(difference_matrix([Fraction(1, 2), Fraction(1, 4)]))
        np.testing.assert_array_equal(pdf.support, [-0.25, 0.25])
        np.testing.assert_array_equal(pdf.masses, [0.5, 0.5])

    def test_three_values(self):
        pdf = difference_pdf(difference_matrix([Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]))
        np.testing.assert_array_equal(pdf.support, [-0.375, -0.25, -0.125, 0.125, 0.25, 0.375])
        np.testing.assert_allclose(pdf.masses, 1 / 6, rtol=0, atol=1e-15)
        assert pdf.n_pairs == 6 and pdf.n_merged == 0

    def test_repeated_differences_share_an_atom(self):
        pdf = difference_pdf(difference_matrix([0.0, 0.25, 0.5]))
        np.testing.assert_array_equal(pdf.support, [-0.5, -0.25, 0.25, 0.5])
        np.testing.assert_allclose(pdf.masses, [1 / 6, 1 / 3, 1 / 3, 1 / 6])

    def test_symmetry_with_tolerance_merges(self, rng):
        e = np.round(rng.random(30), 3) + rng.normal(0, 1e-9, 30)
        pdf = difference_pdf(difference_matrix(list(e)), tol=1e-6)
        np.testing.assert_allclose(pdf.support, -pdf.support[::-1], atol=1e-15)
        np.testing.assert_array_equal(pdf.masses, pdf.masses[::-1])
        assert pdf.n_merged > 0
        assert abs(pdf.masses.sum() - 1) <= 1e-12

    def test_absolute_mode(self):
        pdf = difference_pdf(difference_matrix([0.5, 0.25]), absolute=True)
        np.testing.assert_array_equal(pdf.support, [0.25])

    def test_bad_tolerance(self):
        with pytest.raises(DomainError):
            difference_pdf(np.zeros((3, 3)), tol=-1)


class TestToGrid:
    def test_single_atom(self):
        pdf = DifferencePdf(np.array([0.3]), np.array([1.0]), 2)
        g = to_grid(pdf, 16)
        assert np.count_nonzero(g.density) == 1
        assert g.density.max() == pytest.approx(1 / g.h)

    def test_centres_give_flat_density(self):
        geom = Geometry(-1, 1, 10)
        pdf = DifferencePdf(geom.centers, np.full(10, 0.1), 90)
        np.testing.assert_allclose(to_grid(pdf, 10).density, 0.5)

    @pytest.mark.parametrize("bins", [8, 16, 32, 64, 128])
    def test_normalization_under_refinement(self, rng, bins):
        pdf = difference_pdf(difference_matrix(list(rng.random(20))))
        g = to_grid(pdf, bins)
        assert abs(g.h * g.density.sum() - 1) <= 1e-9

    def test_support_outside(self):
        pdf = DifferencePdf(np.array([-0.5, 0.5]), np.array([0.5, 0.5]), 2)
        with pytest.raises(DomainError):
            to_grid(pdf, 16, (-0.25, 0.25))

    def test_too_few_bins(self):
        with pytest.raises(DomainError):
            to_grid(DifferencePdf(np.array([0.0]), np.array([1.0]), 2), 4)

    def test_unnormalized_density_rejected(self):
        with pytest.raises(DomainError):
            DensityGrid(Geometry(-1, 1, 8), np.ones(8))


class TestPhaseField:
    def test_flat_where_density_vanishes(self):
        rho = np.zeros(32)
        rho[20:] = 1.0
        S = phase_field(DensityGrid.from_samples(-1, 1, rho)).S
        assert np.all(S[:20] == 0.0)

    @pytest.mark.parametrize("bins", [32, 64, 128])
    def test_uniform_closed_form(self, bins):
        g = uniform(bins)
        c = g.centers
        # S runs from the first to the last centre: int (1/2) u^2 du over [c0, c_last]
        exact = (c[-1] ** 3 - c[0] ** 3) / 6
        assert phase_field(g).S[-1] == pytest.approx(exact, abs=2 * g.h**2)

    def test_uniform_tends_to_one_third(self):
        errs = [abs(phase_field(uniform(b)).S[-1] - 1 / 3) for b in (64, 128, 256)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[-1] < 0.01

    def test_monotone(self, rng):
        g = DensityGrid.from_samples(-1, 1, rng.random(50))
        assert np.all(np.diff(phase_field(g).S) >= 0)


class TestKineticEnergy:
    def test_zero_for_flat_phase(self):
        g = uniform(16)
        assert kinetic_energy_continuum(g, PhaseField(g.geometry, np.full(16, 3.0))) == 0.0

    def test_uniform_value_and_order(self):
        # B = 64 is still pre-asymptotic (an h^3 boundary term), so start at 128
        errs = []
        for bins in (128, 256, 512):
            g = uniform(bins)
            errs.append(abs(kinetic_energy_continuum(g, phase_field(g)) - 0.05))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert errs[-1] < 1e-3
        assert np.all((orders >= 1.7) & (orders <= 2.3))

    def test_scale_law(self):
        # rho_c(Q) = rho(Q/c)/c gives T_c = c^2 T
        def T(sigma):
            g = DensityGrid.from_function(-1, 1, 2048, lambda q: np.exp(-(q**2) / (2 * sigma**2)))
            return kinetic_energy_continuum(g, phase_field(g))

        assert T(0.2) / T(0.1) == pytest.approx(4.0, rel=1e-3)

    def test_geometry_mismatch(self):
        g = uniform(16)
        with pytest.raises(DomainError):
            kinetic_energy_continuum(g, phase_field(uniform(32)))


def test_discrete_continuum_second_moment(rng):
    e = rng.random(12)
    pdf = difference_pdf(difference_matrix(list(e)))
    for bins in (256, 1024):
        g = to_grid(pdf, bins)
        grid_moment = g.h * np.sum(g.density * g.centers**2)
        assert abs(grid_moment - pdf.second_moment()) <= 2 * g.h * np.max(np.abs(pdf.support))


def test_expected_view_is_zero_for_even_pdf(rng):
    g = to_grid(difference_pdf(difference_matrix(list(rng.random(10)))), 64)
    assert abs(expected_view(g)) <= 1e-12
