import numpy as np
from django.test import SimpleTestCase

from crystab.equilibrium import cooling_steady
from crystab.exceptions import ScenarioError
from crystab.linearization import enantiomer_alpha, linearize_cooling
from crystab.models import PiecewiseFn
from crystab.quadrature import gauss_integral
from crystab.simulate import CoolingLinearSystem, TimeStepSpec

from .fixtures import cooling_kinetics, cooling_scenario, synthetic_coefficients

ZERO = PiecewiseFn.constant(0.0, 1.0)


class LinearizeCoolingTests(SimpleTestCase):
    def setUp(self):
        self.scenario = cooling_scenario()
        self.ss = cooling_steady(self.scenario)
        self.coeffs = linearize_cooling(self.scenario, self.ss)

    def test_input_gain_is_flow_over_void_fraction(self):
        self.assertEqual(self.coeffs.b, self.scenario.kinetics.v / self.ss.eps)
        # n-bar = 1 and k_v = 2 give eps = 1 - 2/4 up to the trapezoid error.
        kinetics = cooling_kinetics(psi=ZERO, k_v=2.0)
        s = cooling_scenario(kinetics=kinetics)
        coeffs = linearize_cooling(s, cooling_steady(s))
        self.assertAlmostEqual(coeffs.b, 2.0, places=4)

    def test_outflow_coefficient_and_vanishing_boundary_gain(self):
        # B(c) = 2c and G(0, c) = c: n-bar = 2, g = 1, eps = 1/2.
        kinetics = cooling_kinetics(
            k_g=1.0, a_g=0.0, c_sat=0.0, k_b=2.0, p_b=1.0, k_v=1.0, psi=ZERO
        )
        s = cooling_scenario(kinetics=kinetics)
        coeffs = linearize_cooling(s, cooling_steady(s))
        self.assertAlmostEqual(coeffs.k1, 2.0, places=4)
        self.assertEqual(coeffs.alpha, 0.0)

    def test_boundary_gain_of_the_reference_scenario(self):
        # B / G(0, c) = 2 (c - c_sat) for k_b = 2, p_b = 2, k_g = 1.
        self.assertAlmostEqual(self.coeffs.alpha, 2.0, places=14)
        self.assertAlmostEqual(self.coeffs.g[0], 0.5)

    def test_theta_term_by_term(self):
        # x = 0.5 is a breakpoint of phi; the right limit 0.2 applies.
        x = 0.5
        eps, beta = self.ss.eps, self.ss.beta
        g, dg = 0.5 * (1.0 + 0.5 * x), 0.5 * 0.5
        transport = 3.0 * x**2 * g + x**3 * dg + 1.0 * x**3 * 0.0
        braces = (1.0 - 2.0) * transport - 1.0 * 2.0 * 0.2 + 1.0 * beta / eps * x**3
        self.assertAlmostEqual(self.coeffs.theta_fn(x), 0.05 / eps * braces, places=13)

        printed = linearize_cooling(self.scenario, self.ss, beta_term="printed")
        braces = (1.0 - 2.0) * transport - 1.0 * 2.0 * 0.2 + 1.0 * beta * x**3
        self.assertAlmostEqual(printed.theta_fn(x), 0.05 / eps * braces, places=13)

    def test_k2_identity(self):
        c = self.coeffs
        self.assertAlmostEqual(c.k2, c.k0 - c.alpha * c.k1 - c.alpha * c.theta_integral, places=13)

    def test_theta_integral_against_gauss_quadrature(self):
        c = self.coeffs
        reference = gauss_integral(lambda x: c.theta_fn(x), 0.0, 1.0, c.breakpoints)
        self.assertAlmostEqual(c.theta_integral, reference, delta=1e-5)

    def test_refinement_is_second_order(self):
        k0 = []
        for n_cells in (100, 200, 400):
            s = cooling_scenario(n_cells=n_cells)
            k0.append(linearize_cooling(s, cooling_steady(s)).k0)
        coarse, fine = abs(k0[0] - k0[1]), abs(k0[1] - k0[2])
        self.assertGreater(coarse / fine, 3.0)

    def test_unknown_beta_term(self):
        with self.assertRaises(ScenarioError):
            linearize_cooling(self.scenario, self.ss, beta_term="guess")

    def test_no_concentration_coupling_without_sensitivity(self):
        coeffs = synthetic_coefficients(g_c=0.0, alpha=0.0, dn_bar=0.3, k0=0.0)
        system = CoolingLinearSystem(
            coeffs, None, 1.0, 1.0, TimeStepSpec(t_end=1.0, control="open")
        )
        y = system.pack((np.zeros_like(coeffs.grid.nodes),), 1.0)
        (dw,), _ = system.split(system.rhs(y, 0.0))
        np.testing.assert_array_equal(dw, 0.0)


class EnantiomerAlphaTests(SimpleTestCase):
    def test_equal_sensitivities(self):
        self.assertEqual(enantiomer_alpha(0.4, 0.4, 2.0, 1.0), 0.0)

    def test_value(self):
        self.assertAlmostEqual(enantiomer_alpha(2.0, 1.0, 3.0, 1.5), 2.0)

    def test_sign_passes_through(self):
        self.assertLess(enantiomer_alpha(0.1, 0.5, 1.0, 1.0), 0.0)
