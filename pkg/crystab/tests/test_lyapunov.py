import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from crystab.exceptions import ControlDesignError, GridMismatchError, InvalidStateError
from crystab.lyapunov import (
    DensityWeight,
    HState,
    cooling_weight,
    enantiomer_weight,
    h_inner,
    lyapunov_V,
    lyapunov_W,
)
from crystab.models import Grid, PiecewiseFn
from crystab.verify import weight_ode_residual

from .fixtures import step_function, synthetic_coefficients


def constant(value):
    return PiecewiseFn.constant(value, 1.0)


class CoolingWeightTests(SimpleTestCase):
    def test_constant_coefficients(self):
        coeffs = synthetic_coefficients(n_cells=100, g=1.0)
        rho = cooling_weight(coeffs, 1.0, constant(0.1), 1.0, coeffs.grid)
        np.testing.assert_allclose(rho.rho, np.exp(-0.1 * coeffs.grid.nodes), rtol=1e-14)
        self.assertAlmostEqual(rho.boundary_value, 0.904837418, places=9)

    def test_dissolution_cancels_the_decay_profile(self):
        coeffs = synthetic_coefficients(n_cells=100, g=1.0, psi=-0.5)
        rho = cooling_weight(coeffs, 1.0, constant(1.0), 2.0, coeffs.grid)
        np.testing.assert_array_equal(rho.rho, 2.0)

    def test_residual_with_piecewise_data(self):
        psi = step_function(1.0, 0.3, -0.4, 0.1)
        coeffs = synthetic_coefficients(n_cells=200, g=1.5, psi=psi)
        h = step_function(1.0, 0.7, 1.0, 0.5)
        rho = cooling_weight(coeffs, 1.0, h, 1.0, coeffs.grid)
        residual = weight_ode_residual(rho, coeffs.g, coeffs.dg, psi, rho.h, 1.0)
        self.assertLessEqual(residual, 1e-10)

    def test_positive_and_log_derivative(self):
        psi = step_function(1.0, 0.3, -0.4, 0.1)
        coeffs = synthetic_coefficients(n_cells=50, g=1.5, psi=psi)
        rho = cooling_weight(coeffs, 1.0, constant(0.5), 1.0, coeffs.grid)
        self.assertTrue(np.all(rho.rho > 0))
        x = np.array([0.1, 0.5, 0.9])
        step = 1e-6
        numeric = (np.log(rho.at(x + step)) - np.log(rho.at(x - step))) / (2 * step)
        np.testing.assert_allclose(numeric, rho.log_derivative(x), atol=1e-8)

    def test_vanishing_decay_profile_rejected(self):
        coeffs = synthetic_coefficients(n_cells=10)
        with self.assertRaises(ControlDesignError):
            cooling_weight(coeffs, 1.0, constant(0.0), 1.0, coeffs.grid)


class EnantiomerWeightTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(1.0, 100)

    def test_decay_profile_equal_to_growth(self):
        rho = enantiomer_weight(1.3, constant(0.0), constant(1.3), 2.0, self.grid)
        np.testing.assert_allclose(rho.rho, 2.0 * np.exp(-self.grid.nodes), rtol=1e-14)

    def test_zero_integrand(self):
        rho = enantiomer_weight(1.0, constant(-0.5), constant(1.0), 1.0, self.grid)
        np.testing.assert_array_equal(rho.rho, 1.0)

    def test_doubling_growth_halves_the_exponent(self):
        psi = step_function(1.0, 0.2, -0.3, 0.0)
        slow = enantiomer_weight(1.0, psi, constant(1.0), 1.0, self.grid)
        fast = enantiomer_weight(2.0, psi, constant(1.0), 1.0, self.grid)
        np.testing.assert_allclose(fast.exponent, 0.5 * slow.exponent, rtol=1e-14)

    def test_residual(self):
        psi = step_function(1.0, 0.2, -0.3, 0.0)
        h = constant(0.8)
        rho = enantiomer_weight(1.2, psi, h, 1.0, self.grid)
        self.assertLessEqual(weight_ode_residual(rho, 1.2, 0.0, psi, h, 1.0), 1e-10)

    def test_perturbed_sample_shows_in_the_residual(self):
        rho = enantiomer_weight(1.0, constant(0.0), constant(1.0), 1.0, self.grid)
        samples = rho.rho.copy()
        samples[40] *= 1.01
        perturbed = DensityWeight(
            samples, rho.rho_bar, rho.h, rho.exponent, rho.integrand, rho.grid
        )
        self.assertGreater(weight_ode_residual(perturbed, 1.0, 0.0, 0.0, 1.0, 1.0), 1e-3)

    def test_constant_coefficient_residual_is_at_rounding_level(self):
        coeffs = synthetic_coefficients(n_cells=100, g=1.0)
        rho = cooling_weight(coeffs, 1.0, constant(0.1), 1.0, coeffs.grid)
        self.assertLessEqual(weight_ode_residual(rho, 1.0, 0.0, 0.0, 0.1, 1.0), 1e-14)


class FunctionalTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(1.0, 400)
        self.one = DensityWeight.constant(1.0, self.grid)

    def test_zero_state(self):
        self.assertEqual(lyapunov_V(np.zeros(401), 0.0, self.one, 1.0), 0.0)
        self.assertEqual(lyapunov_W(np.zeros(401), np.zeros(401), 0.0, self.one, self.one, 1.0), 0.0)

    def test_constant_profile(self):
        self.assertAlmostEqual(lyapunov_V(np.full(401, 2.0), 3.0, self.one, 1.0), 6.5)

    def test_linear_profile(self):
        value = lyapunov_V(self.grid.nodes, 1.0, self.one, 2.0)
        self.assertAlmostEqual(value, 1.0 / 6.0 + 1.0, delta=1e-5)

    def test_two_species(self):
        ones = np.ones(401)
        self.assertAlmostEqual(lyapunov_W(ones, ones, 1.0, self.one, self.one, 4.0), 3.0)

    def test_second_species_at_rest_reduces_to_V(self):
        w = np.sin(self.grid.nodes)
        self.assertAlmostEqual(
            lyapunov_W(w, np.zeros(401), 0.3, self.one, self.one, 2.0),
            lyapunov_V(w, 0.3, self.one, 2.0),
            places=15,
        )

    def test_grid_mismatch(self):
        with self.assertRaises(GridMismatchError):
            lyapunov_V(np.zeros(10), 0.0, self.one, 1.0)


class HStateTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(1.0, 200)
        self.rho = enantiomer_weight(1.0, constant(0.0), constant(0.5), 1.0, self.grid)

    def test_shifted_profile_must_vanish_at_zero(self):
        with self.assertRaisesRegex(InvalidStateError, r"eta\(0\) must be exactly 0"):
            HState(np.ones(201), 1.0)

    def test_shifted_profile_must_be_a_node_sample(self):
        with self.assertRaises(InvalidStateError):
            HState(np.zeros((2, 201)), 1.0)

    def test_norm_of_a_pure_scalar_state(self):
        one = DensityWeight.constant(1.0, self.grid)
        xi = HState(np.zeros(201), 1.0)
        self.assertAlmostEqual(h_inner(xi, xi, one, 3.0, 2.0), 7.0)

    @settings(deadline=None)
    @given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3))
    def test_half_norm_equals_V(self, a, s, alpha, gamma):
        x = self.grid.nodes
        w = alpha * s + a * x + np.sin(3 * x)
        xi = HState.from_profile(w, s, alpha)
        self.assertAlmostEqual(
            0.5 * h_inner(xi, xi, self.rho, gamma, alpha),
            lyapunov_V(w, s, self.rho, gamma),
            places=10,
        )

    @settings(deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(0.1, 3))
    def test_symmetric_and_positive(self, seed, alpha, gamma):
        rng = np.random.default_rng(seed)
        a = HState.from_profile(rng.normal(size=201), rng.normal(), alpha)
        b = HState.from_profile(rng.normal(size=201), rng.normal(), alpha)
        self.assertAlmostEqual(
            h_inner(a, b, self.rho, gamma, alpha), h_inner(b, a, self.rho, gamma, alpha), places=12
        )
        self.assertGreater(h_inner(a, a, self.rho, gamma, alpha), 0.0)
