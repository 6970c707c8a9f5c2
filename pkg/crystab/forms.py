"""
Scenario documents: parsing, field validation and serialization.

A scenario document is TOML with a top-level ``model`` tag. Piecewise
functions are tables with ``breakpoints`` and ``coeffs`` (usually written
as dotted keys, ``psi.breakpoints = [0.2]``) or a bare number for a
constant. Each model has a Django form that cleans the raw values field by
field, runs ``clean_<field>`` hooks, and finally builds the scenario in
``clean``.
"""

import logging
import math

import tomli
from django import forms
from django.conf import settings
from django.core.exceptions import NON_FIELD_ERRORS, ValidationError

from .exceptions import ScenarioError
from .models import (
    CoolingKinetics,
    CoolingScenario,
    EnantiomerScenario,
    Grid,
    PiecewiseFn,
    Species,
)

logger = logging.getLogger("crystab")


class ScenarioFieldMixin:
    """
    A scenario key. Messages name the key through the field label; an
    optional key that is missing falls back to ``default``.
    """

    default_error_messages = {"required": "%(name)s is required"}

    def __init__(self, *, default=None, **kwargs):
        self.default = default
        super().__init__(**kwargs)

    def error(self, code="invalid", **params):
        return ValidationError(
            self.error_messages[code], code=code, params={"name": self.label, **params}
        )

    def validate(self, value):
        if value in self.empty_values and self.required:
            raise self.error("required")
        super().validate(value)

    def clean(self, value):
        value = super().clean(value)
        if value is None and self.default is not None:
            return self.to_python(self.default)
        return value


class FloatField(ScenarioFieldMixin, forms.FloatField):
    default_error_messages = {"invalid": "%(name)s must be a finite number"}

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error()
        if not math.isfinite(value):
            raise self.error()
        return float(value)


class IntegerField(ScenarioFieldMixin, forms.IntegerField):
    default_error_messages = {"invalid": "%(name)s must be an integer"}

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error()
        return value


class PiecewiseField(ScenarioFieldMixin, forms.Field):
    """
    Raw piecewise data. A number is a constant; a table needs ``coeffs`` and
    may give ``breakpoints``. The PiecewiseFn itself is built in the form's
    ``clean`` once the domain length is known.
    """

    default_error_messages = {
        "invalid": "%(name)s must be a number or a table with breakpoints and coeffs",
        "unknown_key": "unknown key %(name)s.%(key)s",
        "missing_coeffs": "%(name)s.coeffs is required",
        "coeffs": "%(name)s.coeffs must be a list of lists",
    }

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return {"breakpoints": [], "coeffs": [[float(value)]]}
        if not isinstance(value, dict):
            raise self.error()
        unknown = sorted(set(value) - {"breakpoints", "coeffs"})
        if unknown:
            raise self.error("unknown_key", key=unknown[0])
        if "coeffs" not in value:
            raise self.error("missing_coeffs")
        coeffs = value["coeffs"]
        if not isinstance(coeffs, list) or not all(isinstance(c, list) for c in coeffs):
            raise self.error("coeffs")
        return {"breakpoints": list(value.get("breakpoints", [])), "coeffs": coeffs}


def build_piecewise(raw, length, name) -> PiecewiseFn:
    try:
        return PiecewiseFn(
            length,
            tuple(raw["breakpoints"]),
            tuple(tuple(piece) for piece in raw["coeffs"]),
        )
    except (TypeError, ValueError) as e:
        message = e.message if isinstance(e, ScenarioError) else str(e)
        raise ScenarioError(f"{name}: {message}", field=name) from e


class ScenarioForm(forms.Form):
    """
    Validates the key/value table of one scenario model.

    ``n_cells`` overrides the grid size of the document. Once ``is_valid``
    ran, ``instance`` holds the scenario built by ``clean``.
    """

    model = ""

    def __init__(self, data=None, n_cells=None, **kwargs):
        super().__init__(data, **kwargs)
        self.n_cells = n_cells
        self.instance = None
        for name, field in self.fields.items():
            field.label = name

    def clean_n_cells(self):
        if self.n_cells is not None:
            return self.n_cells
        n_cells = self.cleaned_data["n_cells"]
        return settings.DEFAULT_GRID_CELLS if n_cells is None else n_cells

    def clean(self):
        cleaned_data = super().clean()
        unknown = sorted(set(self.data) - set(self.fields) - {"model"})
        if unknown:
            raise ValidationError(f"unknown key {unknown[0]!r}", code="unknown_key")
        if self.errors:
            return cleaned_data
        try:
            self.instance = self.build(cleaned_data)
        except ScenarioError as e:
            self.add_error(e.field if e.field in self.fields else None, e.message)
        return cleaned_data

    def save(self):
        """Return the validated scenario or raise the first error found."""
        if not self.is_valid():
            name, messages = next(iter(self.errors.items()))
            raise ScenarioError(
                messages[0], field=None if name == NON_FIELD_ERRORS else name
            )
        return self.instance

    def grid(self, data):
        return Grid(data["length"], data["n_cells"])

    def piecewise(self, data, name):
        return build_piecewise(data[name], data["length"], name)


class CoolingScenarioForm(ScenarioForm):
    model = "cooling"

    length = FloatField()
    n_cells = IntegerField(required=False)
    k_g = FloatField()
    a_g = FloatField(required=False, default=0.0)
    k_b = FloatField()
    p_b = FloatField(required=False, default=1.0)
    c_sat = FloatField(required=False, default=0.0)
    rho0 = FloatField()
    v = FloatField()
    k_v = FloatField()
    psi = PiecewiseField(required=False, default=0.0)
    phi = PiecewiseField(required=False, default=0.0)
    c_bar_target = FloatField(required=False)
    u_f_target = FloatField(required=False)
    gamma = FloatField(required=False, default=1.0)
    kappa = FloatField(required=False, default=1.0)
    rho_bar = FloatField(required=False, default=1.0)
    h = PiecewiseField(required=False, default=1.0)

    def clean_k_v(self):
        k_v = self.cleaned_data["k_v"]
        if k_v < 0:
            raise ValidationError("k_v must be positive", code="k_v")
        return k_v

    def build(self, data):
        kinetics = CoolingKinetics(
            k_g=data["k_g"],
            k_b=data["k_b"],
            rho0=data["rho0"],
            v=data["v"],
            k_v=data["k_v"],
            psi=self.piecewise(data, "psi"),
            phi=self.piecewise(data, "phi"),
            a_g=data["a_g"],
            p_b=data["p_b"],
            c_sat=data["c_sat"],
        )
        return CoolingScenario(
            kinetics=kinetics,
            grid=self.grid(data),
            h=self.piecewise(data, "h"),
            gamma=data["gamma"],
            kappa=data["kappa"],
            rho_bar=data["rho_bar"],
            c_bar_target=data["c_bar_target"],
            u_f_target=data["u_f_target"],
        )


class EnantiomerScenarioForm(ScenarioForm):
    model = "enantiomer"

    length = FloatField()
    n_cells = IntegerField(required=False)
    psi = PiecewiseField(required=False, default=0.0)
    gamma = FloatField(required=False, default=1.0)
    kappa = FloatField(required=False, default=1.0)
    G_bar_1 = FloatField()
    B_bar_1 = FloatField()
    g_1 = FloatField()
    b_1 = FloatField()
    rho_bar_1 = FloatField(required=False, default=1.0)
    h_1 = PiecewiseField(required=False, default=1.0)
    G_bar_2 = FloatField()
    B_bar_2 = FloatField()
    g_2 = FloatField()
    b_2 = FloatField()
    rho_bar_2 = FloatField(required=False, default=1.0)
    h_2 = PiecewiseField(required=False, default=1.0)

    def clean_kappa(self):
        kappa = self.cleaned_data["kappa"]
        if not kappa > 0:
            raise ValidationError("kappa must be positive", code="kappa")
        return kappa

    def build(self, data):
        species = tuple(
            Species(
                G_bar=data[f"G_bar_{k}"],
                B_bar=data[f"B_bar_{k}"],
                g=data[f"g_{k}"],
                b=data[f"b_{k}"],
                h=self.piecewise(data, f"h_{k}"),
                rho_bar=data[f"rho_bar_{k}"],
            )
            for k in (1, 2)
        )
        return EnantiomerScenario(
            species=species,
            psi=self.piecewise(data, "psi"),
            grid=self.grid(data),
            gamma=data["gamma"],
            kappa=data["kappa"],
        )


FORMS = {form.model: form for form in (CoolingScenarioForm, EnantiomerScenarioForm)}


def parse_scenario(text: str, n_cells=None):
    """
    Parse and validate a scenario document.

    Parameters:
    text (str): The TOML document.
    n_cells (int | None): Overrides the document's grid size.

    Returns:
    CoolingScenario | EnantiomerScenario: The validated scenario.
    """
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ScenarioError(f"syntax error: {e}") from e
    model = data.get("model")
    if model not in FORMS:
        raise ScenarioError(
            f"unknown model tag {model!r}; expected one of {', '.join(FORMS)}",
            field="model",
        )
    form = FORMS[model](data, n_cells=n_cells)
    scenario = form.save()
    logger.debug(f"Parsed {model} scenario on {scenario.grid.n_cells} cells.")
    return scenario


def _number(value) -> str:
    return repr(float(value))


def _piecewise_lines(name, f: PiecewiseFn):
    breakpoints = ", ".join(_number(b) for b in f.breakpoints)
    coeffs = ", ".join(
        "[" + ", ".join(_number(c) for c in piece) + "]" for piece in f.coeffs
    )
    return [f"{name}.breakpoints = [{breakpoints}]", f"{name}.coeffs = [{coeffs}]"]


def serialize_scenario(scenario) -> str:
    """Scenario document that ``parse_scenario`` maps back to ``scenario``."""
    lines = [
        f'model = "{scenario.model}"',
        f"length = {_number(scenario.grid.length)}",
        f"n_cells = {scenario.grid.n_cells}",
    ]
    if isinstance(scenario, CoolingScenario):
        k = scenario.kinetics
        for name in ("k_g", "a_g", "k_b", "p_b", "c_sat", "rho0", "v", "k_v"):
            lines.append(f"{name} = {_number(getattr(k, name))}")
        for name in ("c_bar_target", "u_f_target"):
            value = getattr(scenario, name)
            if value is not None:
                lines.append(f"{name} = {_number(value)}")
        for name in ("gamma", "kappa", "rho_bar"):
            lines.append(f"{name} = {_number(getattr(scenario, name))}")
        lines += _piecewise_lines("psi", k.psi)
        lines += _piecewise_lines("phi", k.phi)
        lines += _piecewise_lines("h", scenario.h)
    else:
        for name in ("gamma", "kappa"):
            lines.append(f"{name} = {_number(getattr(scenario, name))}")
        lines += _piecewise_lines("psi", scenario.psi)
        for label, sp in zip((1, 2), scenario.species):
            for name in ("G_bar", "B_bar", "g", "b", "rho_bar"):
                lines.append(f"{name}_{label} = {_number(getattr(sp, name))}")
            lines += _piecewise_lines(f"h_{label}", sp.h)
    return "\n".join(lines) + "\n"
