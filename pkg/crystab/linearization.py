"""
Coefficients of the cooling crystallizer linearized around its steady state,
and the boundary gains of the enantiomer deviation system.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .equilibrium import CoolingSteadyState
from .exceptions import ScenarioError, UnphysicalStateError
from .models import CoolingScenario, Grid, PiecewiseFn, eval_growth, eval_nucleation
from .quadrature import piecewise_trapezoid, trapezoid

logger = logging.getLogger("crystab")

BETA_TERMS = ("consistent", "printed")


@dataclass(frozen=True)
class LinearizedCoefficients:
    """
    Node samples and scalars of the linearized cooling system

        w_t = -g w' + v psi w - g_c n' s,   w(0) = alpha s,
        s_t = -k0 s + k1 w(l) + int theta w + b u.

    ``theta_fn`` evaluates theta at arbitrary sizes (``left=True`` for left
    limits at breakpoints of psi and phi); ``growth`` returns (g, g') at
    arbitrary sizes.
    """

    grid: Grid
    g: np.ndarray
    dg: np.ndarray
    g_c: np.ndarray
    dn_bar: np.ndarray
    theta: np.ndarray
    alpha: float
    k0: float
    k1: float
    k2: float
    beta: float
    b: float
    v: float
    psi: PiecewiseFn
    c_bar: float
    theta_fn: Callable
    growth: Callable
    breakpoints: tuple = ()

    @property
    def theta_integral(self) -> float:
        return piecewise_trapezoid(self.theta_fn, self.grid, self.breakpoints)


def boundary_gain(kinetics, c: float) -> float:
    """d/dc of B(c) / G(0, c) by the quotient rule on the kinetics family."""
    growth0, _, growth0_c = eval_growth(kinetics, 0.0, c)
    nucleation, nucleation_c = eval_nucleation(kinetics, c)
    return (nucleation_c * growth0 - nucleation * growth0_c) / growth0**2


def linearize_cooling(
    s: CoolingScenario, ss: CoolingSteadyState, beta_term: str = "consistent"
) -> LinearizedCoefficients:
    """
    Evaluate the linearization coefficients at the steady state.

    Parameters:
    s (CoolingScenario): The scenario ``ss`` was computed for.
    ss (CoolingSteadyState): Steady state to linearize around.
    beta_term (str): ``"consistent"`` uses the derivative of the feed term
        v beta / eps with respect to the void fraction, v beta k_v x^3 / eps^2;
        ``"printed"`` uses (k_v / eps) v beta x^3.

    Returns:
    LinearizedCoefficients: The coefficient bundle.
    """
    if beta_term not in BETA_TERMS:
        raise ScenarioError(
            f"beta_term must be one of {', '.join(BETA_TERMS)}, got {beta_term!r}"
        )
    if not ss.eps > 0:
        raise UnphysicalStateError(f"void fraction exhausted: epsilon = {ss.eps!r}")
    k = s.kinetics
    grid = s.grid
    x = grid.nodes
    c_bar = ss.c_bar
    eps = ss.eps

    g, dg, g_c = eval_growth(k, x, c_bar)
    g = np.broadcast_to(g, x.shape).astype(float)
    dg = np.broadcast_to(dg, x.shape).astype(float)
    g_c = np.broadcast_to(g_c, x.shape).astype(float)
    if not np.min(g) > 0:
        raise UnphysicalStateError("growth rate nonpositive on the grid")

    alpha = boundary_gain(k, c_bar)
    k0 = k.v + (c_bar - k.rho0) * k.k_v / eps * trapezoid(x**3 * g_c * ss.dn, grid)
    k1 = (k.rho0 - c_bar) * k.k_v * grid.length**3 * g[-1] / eps
    b = k.v / eps
    beta_factor = k.v * ss.beta / eps if beta_term == "consistent" else k.v * ss.beta

    def growth(y):
        gy, dgy, _ = eval_growth(k, y, c_bar)
        return gy, dgy

    def theta_fn(y, left=False):
        y = np.asarray(y, dtype=float)
        gy, dgy = growth(y)
        transport = 3.0 * y**2 * gy + y**3 * dgy + k.v * y**3 * k.psi(y, left=left)
        braces = (
            (c_bar - k.rho0) * transport
            - k.v * k.rho0 * k.phi(y, left=left)
            + beta_factor * y**3
        )
        return k.k_v / eps * braces

    theta = theta_fn(x)
    breakpoints = tuple(sorted(set(k.psi.breakpoints) | set(k.phi.breakpoints)))
    theta_integral = piecewise_trapezoid(theta_fn, grid, breakpoints)
    k2 = k0 - alpha * k1 - alpha * theta_integral
    logger.debug(
        f"Linearized cooling system: alpha={alpha!r}, k0={k0!r}, k1={k1!r}, "
        f"k2={k2!r}, b={b!r}, beta_term={beta_term}."
    )
    return LinearizedCoefficients(
        grid=grid,
        g=g,
        dg=dg,
        g_c=g_c,
        dn_bar=np.asarray(ss.dn, dtype=float),
        theta=theta,
        alpha=alpha,
        k0=k0,
        k1=k1,
        k2=k2,
        beta=ss.beta,
        b=b,
        v=k.v,
        psi=k.psi,
        c_bar=c_bar,
        theta_fn=theta_fn,
        growth=growth,
        breakpoints=breakpoints,
    )


def enantiomer_alpha(b_k: float, g_k: float, B_bar_k: float, G_bar_k: float) -> float:
    """Boundary gain (b_k - g_k) B_k / G_k of species k."""
    if not G_bar_k > 0:
        raise ScenarioError("G_bar must be positive")
    return (b_k - g_k) * B_bar_k / G_bar_k
