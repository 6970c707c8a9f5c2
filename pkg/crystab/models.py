"""
Model instances: spatial grid, piecewise-polynomial functions, kinetics and the
two scenario families (cooling crystallizer, preferential crystallization of
enantiomers).

Every type here is immutable after construction and validates its invariants
in ``__post_init__``; violations raise :class:`ScenarioError` naming the
failed constraint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Optional, Union

import numpy as np
from numpy.polynomial import Polynomial

from .exceptions import ScenarioError, UnphysicalStateError

if TYPE_CHECKING:
    from .linearization import LinearizedCoefficients

logger = logging.getLogger("crystab")

ArrayLike = Union[float, np.ndarray]

# Relative slack when deciding whether a coordinate lies in [0, length].
_DOMAIN_SLACK = 1e-12


def _frozen(values):
    array = np.array(values, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Grid:
    length: float
    n_cells: int

    def __post_init__(self):
        if not self.length > 0:
            raise ScenarioError("length must be positive", field="length")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ScenarioError("n_cells must be an integer >= 2", field="n_cells")
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @cached_property
    def nodes(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, self.length, self.n_cells + 1))

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights on the nodes."""
        weights = np.full(self.n_cells + 1, self.dx)
        weights[0] = weights[-1] = 0.5 * self.dx
        return _frozen(weights)

    def with_cells(self, n_cells: int) -> "Grid":
        return Grid(self.length, n_cells)


@dataclass(frozen=True)
class PiecewiseFn:
    """
    Piecewise polynomial on [0, length].

    ``breakpoints`` are the cut points b_1 < ... < b_m; piece j covers
    [b_j, b_{j+1}) with b_0 = 0 and b_{m+1} = length, and ``coeffs[j]`` lists
    the coefficients of its polynomial in ascending powers of the global
    coordinate x (degree at most 3). At a breakpoint the right-limit is used
    unless ``left=True`` is requested.
    """

    length: float
    breakpoints: tuple = ()
    coeffs: tuple = ((0.0,),)

    def __post_init__(self):
        length = float(self.length)
        breakpoints = tuple(float(b) for b in self.breakpoints)
        coeffs = tuple(tuple(float(c) for c in piece) for piece in self.coeffs)
        if not length > 0:
            raise ScenarioError("piecewise function length must be positive")
        if any(b < 0.0 or b > length for b in breakpoints):
            raise ScenarioError("breakpoints must lie in [0, length]")
        if any(b1 >= b2 for b1, b2 in zip(breakpoints, breakpoints[1:])):
            raise ScenarioError("breakpoints must be strictly increasing")
        if len(coeffs) != len(breakpoints) + 1:
            raise ScenarioError(
                f"expected {len(breakpoints) + 1} coefficient lists for "
                f"{len(breakpoints)} breakpoints, got {len(coeffs)}"
            )
        if any(not 1 <= len(piece) <= 4 for piece in coeffs):
            raise ScenarioError("each piece needs 1 to 4 coefficients (degree <= 3)")
        if not all(np.isfinite(c) for piece in coeffs for c in piece):
            raise ScenarioError("piecewise coefficients must be finite")
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def constant(cls, value: float, length: float) -> "PiecewiseFn":
        return cls(length, (), ((float(value),),))

    @cached_property
    def edges(self) -> tuple:
        return (0.0,) + self.breakpoints + (self.length,)

    @cached_property
    def polynomials(self) -> tuple:
        return tuple(Polynomial(piece) for piece in self.coeffs)

    def piece_index(self, x: ArrayLike, left: bool = False) -> np.ndarray:
        side = "left" if left else "right"
        index = np.searchsorted(np.asarray(self.breakpoints), x, side=side)
        return np.clip(index, 0, len(self.coeffs) - 1)

    def __call__(self, x: ArrayLike, left: bool = False) -> ArrayLike:
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        slack = _DOMAIN_SLACK * self.length
        if np.any(x_arr < -slack) or np.any(x_arr > self.length + slack):
            raise ScenarioError(
                f"coordinate outside [0, {self.length}]: "
                f"min {x_arr.min()}, max {x_arr.max()}"
            )
        index = self.piece_index(x_arr, left=left)
        result = np.empty_like(x_arr)
        for j, poly in enumerate(self.polynomials):
            mask = index == j
            if np.any(mask):
                result[mask] = poly(x_arr[mask])
        if np.ndim(x) == 0:
            return float(result[0])
        return result.reshape(np.shape(x))

    def scaled(self, factor: float) -> "PiecewiseFn":
        return PiecewiseFn(
            self.length,
            self.breakpoints,
            tuple(tuple(factor * c for c in piece) for piece in self.coeffs),
        )

    def check_points(self, nodes: np.ndarray) -> np.ndarray:
        """Grid nodes plus both one-sided limits at every breakpoint."""
        bps = np.asarray(self.breakpoints)
        return np.concatenate([self(nodes), self(bps), self(bps, left=True)])

    def minimum_on(self, nodes: np.ndarray) -> float:
        return float(np.min(self.check_points(nodes)))

    def maximum_on(self, nodes: np.ndarray) -> float:
        return float(np.max(self.check_points(nodes)))


def eval_piecewise(f: PiecewiseFn, x: float) -> float:
    return f(x)


@dataclass(frozen=True)
class CoolingKinetics:
    """
    Growth G(x, c) = k_g (c - c_sat)(1 + a_g x) and nucleation
    B(c) = k_b max(c - c_sat, 0)^p_b, plus the material constants of the
    cooling crystallizer.
    """

    k_g: float
    k_b: float
    rho0: float
    v: float
    k_v: float
    psi: PiecewiseFn
    phi: PiecewiseFn
    a_g: float = 0.0
    p_b: float = 1.0
    c_sat: float = 0.0

    def __post_init__(self):
        checks = (
            (self.k_g > 0, "k_g must be positive", "k_g"),
            (self.a_g >= 0, "a_g must be nonnegative", "a_g"),
            (self.k_b >= 0, "k_b must be nonnegative", "k_b"),
            (self.p_b >= 1, "p_b must be at least 1", "p_b"),
            (self.c_sat >= 0, "c_sat must be nonnegative", "c_sat"),
            (self.rho0 > 0, "rho0 must be positive", "rho0"),
            (self.v > 0, "v must be positive", "v"),
            # k_v = 0 is the solids-free limit.
            (self.k_v >= 0, "k_v must be positive", "k_v"),
        )
        for ok, message, name in checks:
            if not ok:
                raise ScenarioError(message, field=name)
        if self.psi.length != self.phi.length:
            raise ScenarioError("psi and phi must share the domain length")


def eval_growth(k: CoolingKinetics, x: ArrayLike, c: float):
    """
    Growth rate and its exact partial derivatives.

    Parameters:
    k (CoolingKinetics): Kinetics family.
    x (float | ndarray): Crystal size(s).
    c (float): Solute concentration, must exceed c_sat.

    Returns:
    tuple: (G, dG/dx, dG/dc), each shaped like ``x``.
    """
    if not c > k.c_sat:
        raise UnphysicalStateError(
            f"growth rate nonpositive: c = {c} does not exceed c_sat = {k.c_sat}"
        )
    x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    excess = c - k.c_sat
    size_factor = 1.0 + k.a_g * x
    growth = k.k_g * excess * size_factor
    d_dx = k.k_g * excess * k.a_g + 0.0 * x
    d_dc = k.k_g * size_factor
    return growth, d_dx, d_dc


def eval_nucleation(k: CoolingKinetics, c: float):
    """Nucleation rate B(c) and dB/dc; both vanish below saturation."""
    if c < 0:
        raise UnphysicalStateError(f"concentration must be nonnegative, got {c}")
    excess = c - k.c_sat
    if excess <= 0:
        return 0.0, 0.0
    rate = k.k_b * excess**k.p_b
    slope = k.k_b * k.p_b * excess ** (k.p_b - 1.0)
    return rate, slope


@dataclass(frozen=True)
class CoolingScenario:
    kinetics: CoolingKinetics
    grid: Grid
    h: PiecewiseFn
    gamma: float = 1.0
    kappa: float = 1.0
    rho_bar: float = 1.0
    c_bar_target: Optional[float] = None
    u_f_target: Optional[float] = None

    model = "cooling"

    def __post_init__(self):
        if (self.c_bar_target is None) == (self.u_f_target is None):
            raise ScenarioError("exactly one of c_bar_target or u_f_target must be set")
        if self.c_bar_target is not None and not self.c_bar_target > self.kinetics.c_sat:
            raise ScenarioError("c_bar_target must exceed c_sat", field="c_bar_target")
        if self.u_f_target is not None and not self.u_f_target >= 0:
            raise ScenarioError("u_f_target must be nonnegative", field="u_f_target")
        if not self.gamma > 0:
            raise ScenarioError("gamma must be positive", field="gamma")
        if not self.rho_bar > 0:
            raise ScenarioError("rho_bar must be positive", field="rho_bar")
        for name in ("psi", "phi"):
            if getattr(self.kinetics, name).length != self.grid.length:
                raise ScenarioError(f"{name} must be defined on [0, length]", field=name)
        if self.h.length != self.grid.length:
            raise ScenarioError("h must be defined on [0, length]", field="h")
        if not self.h.minimum_on(self.grid.nodes) > 0:
            raise ScenarioError("h must be positive on [0,ℓ]", field="h")


@dataclass(frozen=True)
class Species:
    """Equilibrium data of one enantiomer; see EnantiomerScenario."""

    G_bar: float
    B_bar: float
    g: float
    b: float
    h: PiecewiseFn
    rho_bar: float = 1.0

    def validate(self, label: str, grid: Grid):
        for name in ("G_bar", "B_bar", "rho_bar"):
            if not getattr(self, name) > 0:
                raise ScenarioError(
                    f"{name}_{label} must be positive", field=f"{name}_{label}"
                )
        if self.h.length != grid.length:
            raise ScenarioError(f"h_{label} must be defined on [0, length]")
        if not self.h.minimum_on(grid.nodes) > 0:
            raise ScenarioError(
                f"h_{label} must be positive on [0,ℓ]", field=f"h_{label}"
            )

    def h_floor(self, grid: Grid) -> float:
        return self.h.minimum_on(grid.nodes)


@dataclass(frozen=True)
class EnantiomerScenario:
    species: tuple
    psi: PiecewiseFn
    grid: Grid
    gamma: float = 1.0
    kappa: float = 1.0

    model = "enantiomer"

    def __post_init__(self):
        if len(self.species) != 2:
            raise ScenarioError("exactly two species are required")
        object.__setattr__(self, "species", tuple(self.species))
        for label, sp in zip(("1", "2"), self.species):
            sp.validate(label, self.grid)
        if self.psi.length != self.grid.length:
            raise ScenarioError("psi must be defined on [0, length]", field="psi")
        if not self.gamma > 0:
            raise ScenarioError("gamma must be positive", field="gamma")
        if not self.kappa > 0:
            raise ScenarioError("kappa must be positive", field="kappa")

    @property
    def decay_rate(self) -> float:
        """min{h_10, h_20, kappa}."""
        floors = [sp.h_floor(self.grid) for sp in self.species]
        return float(min(floors + [self.kappa]))


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    value: float = float("nan")


@dataclass(frozen=True)
class ConditionReport:
    checks: tuple
    threshold: Optional[float] = None
    advisory: bool = False

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> tuple:
        return tuple(check.name for check in self.checks if not check.passed)

    def as_lines(self, prefix: str) -> list:
        lines = [
            f"{prefix}.{check.name}={'pass' if check.passed else 'fail'}"
            for check in self.checks
        ]
        if self.threshold is not None:
            lines.append(f"{prefix}.kappa_threshold={float(self.threshold)!r}")
        lines.append(f"{prefix}.passed={str(self.passed).lower()}")
        return lines


def check_sign_conditions(
    coeffs: "LinearizedCoefficients", s: CoolingScenario
) -> ConditionReport:
    """
    Check the sign pattern of a realistic cooling crystallizer.

    The report is advisory: closed-loop stability does not need every one
    of these inequalities.
    """
    k = s.kinetics
    nodes = s.grid.nodes
    checks = (
        ConditionCheck("rho0 > c_bar > 0", bool(k.rho0 > coeffs.c_bar > 0), coeffs.c_bar),
        ConditionCheck("k0 > 0", bool(coeffs.k0 > 0), coeffs.k0),
        ConditionCheck("k1 > 0", bool(coeffs.k1 > 0), coeffs.k1),
        ConditionCheck("alpha > 0", bool(coeffs.alpha > 0), coeffs.alpha),
        ConditionCheck("b > 0", bool(coeffs.b > 0), coeffs.b),
        ConditionCheck("g > 0", bool(np.min(coeffs.g) > 0), float(np.min(coeffs.g))),
        ConditionCheck(
            "g_c > 0", bool(np.min(coeffs.g_c) > 0), float(np.min(coeffs.g_c))
        ),
        ConditionCheck(
            "psi <= 0", k.psi.maximum_on(nodes) <= 0, k.psi.maximum_on(nodes)
        ),
    )
    report = ConditionReport(checks, advisory=True)
    if not report.passed:
        logger.warning(f"Sign conditions not met (advisory): {', '.join(report.failed)}")
    return report
