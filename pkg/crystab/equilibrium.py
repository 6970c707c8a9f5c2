"""
Constant-input steady states of the cooling crystallizer and of the
enantiomer model, and the void fraction functional.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .exceptions import SteadyStateError, UnphysicalStateError
from .models import (
    CoolingKinetics,
    CoolingScenario,
    EnantiomerScenario,
    Grid,
    eval_growth,
    eval_nucleation,
)
from .quadrature import RationalAntiderivative, trapezoid

logger = logging.getLogger("crystab")

# Number of scan points used to bracket the feed inversion.
FEED_SCAN_POINTS = 400


def void_fraction(n, k_v: float, grid: Grid) -> float:
    """
    Liquid volume fraction 1 - k_v * integral of x^3 n over [0, length].

    Parameters:
    n (ndarray): Number density sampled on the grid nodes.
    k_v (float): Volumetric shape factor.
    grid (Grid): Grid the samples live on.

    Returns:
    float: The void fraction, strictly positive.
    """
    eps = 1.0 - k_v * trapezoid(grid.nodes**3 * np.asarray(n), grid)
    if not eps > 0:
        raise UnphysicalStateError(f"void fraction exhausted: epsilon = {eps!r}")
    return eps


@dataclass(frozen=True)
class CoolingSteadyState:
    c_bar: float
    u_f_bar: float
    n: np.ndarray
    dn: np.ndarray
    eps: float
    beta: float
    boundary_value: float
    exponent: RationalAntiderivative
    kinetics: CoolingKinetics
    grid: Grid

    def profile(self, x):
        """n-bar at arbitrary sizes from the closed-form exponent."""
        return self.boundary_value * np.exp(self.kinetics.v * self.exponent(x))

    def slope(self, x, left: bool = False):
        """n-bar' = n-bar v psi / g, with one-sided limits of psi at jumps."""
        k = self.kinetics
        growth = eval_growth(k, x, self.c_bar)[0]
        return self.profile(x) * k.v * k.psi(x, left=left) / growth


@dataclass(frozen=True)
class EnantiomerSteadyState:
    n: tuple
    boundary_values: tuple
    exponents: tuple
    grid: Grid

    def profile(self, k: int, x):
        return self.boundary_values[k] * np.exp(self.exponents[k](x))


def _cooling_profile(k: CoolingKinetics, grid: Grid, c: float):
    growth0 = eval_growth(k, 0.0, c)[0]
    nucleation = eval_nucleation(k, c)[0]
    boundary_value = nucleation / growth0
    exponent = RationalAntiderivative(k.psi, scale=k.k_g * (c - k.c_sat), slope=k.a_g)
    n = boundary_value * np.exp(k.v * exponent(grid.nodes))
    return n, boundary_value, exponent


def _feed_terms(k: CoolingKinetics, grid: Grid, n):
    """Void fraction and the solids removal integral rho0 k_v int phi n."""
    eps = void_fraction(n, k.k_v, grid)
    removal = k.rho0 * k.k_v * trapezoid(k.phi(grid.nodes) * n, grid)
    return eps, removal


def cooling_steady(s: CoolingScenario) -> CoolingSteadyState:
    """
    Steady state of the cooling crystallizer for the scenario's target.

    When the scenario fixes the feed concentration instead of c-bar, the
    concentration is recovered first with :func:`cbar_from_feed`.

    Parameters:
    s (CoolingScenario): The scenario.

    Returns:
    CoolingSteadyState: Profiles on the grid plus the scalar equilibrium data.
    """
    k = s.kinetics
    if s.c_bar_target is not None:
        c_bar = float(s.c_bar_target)
    else:
        c_bar = cbar_from_feed(s, s.u_f_target)
    n, boundary_value, exponent = _cooling_profile(k, s.grid, c_bar)
    eps, removal = _feed_terms(k, s.grid, n)
    u_f_bar = k.rho0 + eps * (c_bar - k.rho0) + removal
    beta = u_f_bar - k.rho0 - removal
    growth = eval_growth(k, s.grid.nodes, c_bar)[0]
    dn = n * k.v * k.psi(s.grid.nodes) / growth
    logger.info(
        f"Cooling steady state: c_bar={c_bar!r}, u_f_bar={u_f_bar!r}, eps={eps!r}."
    )
    return CoolingSteadyState(
        c_bar=c_bar,
        u_f_bar=u_f_bar,
        n=n,
        dn=dn,
        eps=eps,
        beta=beta,
        boundary_value=boundary_value,
        exponent=exponent,
        kinetics=k,
        grid=s.grid,
    )


def _feed_residual(s: CoolingScenario, u_f: float, c: float) -> float:
    k = s.kinetics
    n = _cooling_profile(k, s.grid, c)[0]
    eps, removal = _feed_terms(k, s.grid, n)
    return c - k.rho0 - (u_f - k.rho0 - removal) / eps


def cbar_from_feed(s: CoolingScenario, u_f: float) -> float:
    """
    Invert the steady mass balance for c-bar given the feed concentration.

    The interval (c_sat, rho0] is scanned for sign changes of the residual;
    exactly one bracket is refined by bisection.

    Parameters:
    s (CoolingScenario): Scenario supplying kinetics and grid.
    u_f (float): Feed concentration.

    Returns:
    float: The steady concentration c-bar.
    """
    k = s.kinetics
    lower = k.c_sat + 1e-9 * max(1.0, k.rho0)
    scan = np.linspace(lower, k.rho0, FEED_SCAN_POINTS)
    values = np.full(scan.shape, np.nan)
    for i, c in enumerate(scan):
        try:
            values[i] = _feed_residual(s, u_f, c)
        except UnphysicalStateError:
            continue
    logger.debug(f"Feed scan for u_f={u_f!r}: {np.isfinite(values).sum()} usable points.")

    exact = [float(scan[i]) for i in range(len(scan)) if values[i] == 0.0]
    brackets = [
        (float(scan[i]), float(scan[i + 1]))
        for i in range(len(scan) - 1)
        if np.isfinite(values[i])
        and np.isfinite(values[i + 1])
        and values[i] * values[i + 1] < 0
    ]
    count = len(exact) + len(brackets)
    if count == 0:
        raise SteadyStateError(
            f"no steady state for u_f = {u_f!r}: residual has no sign change "
            f"on [{lower!r}, {k.rho0!r}]"
        )
    if count > 1:
        raise SteadyStateError(
            f"multiple roots: {count} sign changes of the steady residual "
            f"for u_f = {u_f!r}"
        )
    if exact:
        return exact[0]
    a, b = brackets[0]
    return float(bisect(lambda c: _feed_residual(s, u_f, c), a, b, xtol=1e-12))


def enantiomer_steady(s: EnantiomerScenario) -> EnantiomerSteadyState:
    """Equilibrium profiles of both enantiomers, computed independently."""
    profiles, boundary_values, exponents = [], [], []
    for sp in s.species:
        exponent = RationalAntiderivative(s.psi, scale=sp.G_bar)
        boundary_value = sp.B_bar / sp.G_bar
        profiles.append(boundary_value * np.exp(exponent(s.grid.nodes)))
        boundary_values.append(boundary_value)
        exponents.append(exponent)
    return EnantiomerSteadyState(
        n=tuple(profiles),
        boundary_values=tuple(boundary_values),
        exponents=tuple(exponents),
        grid=s.grid,
    )
