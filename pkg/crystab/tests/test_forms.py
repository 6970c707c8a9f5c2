import tomli
from django.test import SimpleTestCase

from crystab.exceptions import ScenarioError
from crystab.forms import (
    CoolingScenarioForm,
    EnantiomerScenarioForm,
    parse_scenario,
    serialize_scenario,
)
from crystab.models import CoolingScenario, EnantiomerScenario

from .fixtures import COOLING_DOCUMENT, ENANTIOMER_DOCUMENT

MINIMAL_COOLING = """
model = "cooling"
length = 1.0
k_g = 1.0
k_b = 1.0
rho0 = 2.0
v = 1.0
k_v = 0.1
c_bar_target = 1.0
"""


class ParseScenarioTests(SimpleTestCase):
    def test_minimal_document_fills_defaults(self):
        scenario = parse_scenario(MINIMAL_COOLING)
        self.assertIsInstance(scenario, CoolingScenario)
        self.assertEqual(scenario.grid.n_cells, 400)
        self.assertEqual(scenario.kinetics.a_g, 0.0)
        self.assertEqual(scenario.kinetics.p_b, 1.0)
        self.assertEqual(scenario.kinetics.psi(0.5), 0.0)
        self.assertEqual(scenario.h(0.5), 1.0)
        self.assertEqual(scenario.gamma, 1.0)

    def test_full_cooling_document(self):
        scenario = parse_scenario(COOLING_DOCUMENT)
        self.assertEqual(scenario.kinetics.psi.breakpoints, (0.2,))
        self.assertEqual(scenario.kinetics.psi(0.1), -0.5)
        self.assertEqual(scenario.kinetics.phi(0.7), 0.2)
        self.assertEqual(scenario.kappa, 2.0)

    def test_enantiomer_document(self):
        scenario = parse_scenario(ENANTIOMER_DOCUMENT)
        self.assertIsInstance(scenario, EnantiomerScenario)
        self.assertEqual(scenario.species[1].G_bar, 1.2)
        self.assertEqual(scenario.decay_rate, 1.0)

    def test_grid_override(self):
        self.assertEqual(parse_scenario(COOLING_DOCUMENT, n_cells=50).grid.n_cells, 50)

    def test_negative_shape_factor(self):
        text = MINIMAL_COOLING.replace("k_v = 0.1", "k_v = -1")
        with self.assertRaisesRegex(ScenarioError, "k_v must be positive") as caught:
            parse_scenario(text)
        self.assertEqual(caught.exception.field, "k_v")

    def test_vanishing_decay_profile(self):
        with self.assertRaisesRegex(ScenarioError, r"h must be positive on \[0,ℓ\]"):
            parse_scenario(MINIMAL_COOLING + "h = 0.0\n")

    def test_syntax_error_reports_position(self):
        with self.assertRaisesRegex(ScenarioError, "syntax error: .*line 3"):
            parse_scenario('model = "cooling"\nlength = 1.0\nk_g = = 2\n')

    def test_unknown_model_tag(self):
        with self.assertRaisesRegex(ScenarioError, "unknown model tag 'batch'"):
            parse_scenario('model = "batch"\n')

    def test_unknown_key(self):
        with self.assertRaisesRegex(ScenarioError, "unknown key 'temperature'"):
            parse_scenario(MINIMAL_COOLING + "temperature = 300\n")

    def test_bad_piecewise_table(self):
        text = MINIMAL_COOLING + "psi.breakpoints = [0.2]\npsi.coeffs = [[-0.5]]\n"
        with self.assertRaisesRegex(ScenarioError, "psi: expected 2 coefficient lists"):
            parse_scenario(text)

    def test_both_targets_rejected(self):
        with self.assertRaisesRegex(ScenarioError, "exactly one of"):
            parse_scenario(MINIMAL_COOLING + "u_f_target = 1.5\n")

    def test_enantiomer_kappa_must_be_positive(self):
        text = ENANTIOMER_DOCUMENT.replace("kappa = 1.0", "kappa = 0.0")
        with self.assertRaisesRegex(ScenarioError, "kappa must be positive"):
            parse_scenario(text)


class ScenarioFormTests(SimpleTestCase):
    def test_errors_are_collected_per_field(self):
        form = CoolingScenarioForm({"length": "long", "k_g": 1.0})
        self.assertFalse(form.is_valid())
        self.assertIn("length", form.errors)
        self.assertIn("rho0", form.errors)
        self.assertEqual(form.errors["rho0"], ["rho0 is required"])

    def test_non_finite_value(self):
        form = CoolingScenarioForm({"length": float("inf")})
        self.assertEqual(form.errors["length"], ["length must be a finite number"])

    def test_unknown_piecewise_key(self):
        form = CoolingScenarioForm({"psi": {"coeffs": [[0.0]], "degree": 0}})
        self.assertEqual(form.errors["psi"], ["unknown key psi.degree"])

    def test_unknown_key_is_a_form_error(self):
        data = tomli.loads(MINIMAL_COOLING)
        data["temperature"] = 300
        form = CoolingScenarioForm(data)
        self.assertFalse(form.is_valid())
        self.assertEqual(form.non_field_errors(), ["unknown key 'temperature'"])
        with self.assertRaises(ScenarioError) as caught:
            form.save()
        self.assertIsNone(caught.exception.field)

    def test_valid_form_saves_the_scenario(self):
        form = EnantiomerScenarioForm(
            {
                "length": 1,
                "n_cells": 10,
                "G_bar_1": 1,
                "B_bar_1": 1,
                "g_1": 0,
                "b_1": 0,
                "G_bar_2": 2,
                "B_bar_2": 1,
                "g_2": 0,
                "b_2": 0,
            }
        )
        self.assertTrue(form.is_valid())
        self.assertEqual(form.save().grid.n_cells, 10)


class SerializeScenarioTests(SimpleTestCase):
    def test_cooling_round_trip(self):
        scenario = parse_scenario(COOLING_DOCUMENT)
        again = parse_scenario(serialize_scenario(scenario))
        self.assertEqual(again, scenario)

    def test_enantiomer_round_trip(self):
        scenario = parse_scenario(ENANTIOMER_DOCUMENT)
        again = parse_scenario(serialize_scenario(scenario))
        self.assertEqual(again, scenario)

    def test_feed_target_round_trip(self):
        text = MINIMAL_COOLING.replace("c_bar_target = 1.0", "u_f_target = 1.25")
        scenario = parse_scenario(text)
        self.assertEqual(parse_scenario(serialize_scenario(scenario)), scenario)
