"""
Stabilizing feedback laws and the parameter certificate for the cooling
crystallizer.
"""

import logging

import numpy as np

from .exceptions import ControlDesignError
from .linearization import enantiomer_alpha
from .lyapunov import check_grid
from .models import ConditionCheck, ConditionReport
from .quadrature import trapezoid

logger = logging.getLogger("crystab")


def feedback_kernel(coeffs, rho, gamma: float) -> np.ndarray:
    """Node samples of gamma theta - rho g_c n', the kernel of the cooling law."""
    return gamma * coeffs.theta - rho.rho * coeffs.g_c * coeffs.dn_bar


def cooling_feedback(w, s: float, coeffs, rho, gamma: float, kappa: float, grid):
    """
    Feed deviation u stabilizing the linearized cooling crystallizer.

    Parameters:
    w (ndarray): Deviation profile on the grid nodes.
    s (float): Concentration deviation.
    coeffs (LinearizedCoefficients): Linearization at the steady state.
    rho (DensityWeight): Weight of the Lyapunov functional.
    gamma (float): Coupling weight of s in the functional.
    kappa (float): Gain on s.
    grid (Grid): Grid of ``w``.

    Returns:
    float: The control value u.
    """
    if coeffs.b == 0:
        raise ControlDesignError("input gain b vanishes: the feedback is undefined")
    if not gamma > 0:
        raise ControlDesignError("gamma must be positive")
    check_grid(grid, w)
    w = np.asarray(w, dtype=float)
    integral = trapezoid(feedback_kernel(coeffs, rho, gamma) * w, grid)
    return -(kappa * s + integral + gamma * coeffs.k1 * w[-1]) / (gamma * coeffs.b)


def kappa_threshold(coeffs, rho_bar: float, gamma: float) -> float:
    """Lower bound rho_bar g(0) alpha^2 / 2 - gamma k0 that kappa must exceed."""
    return rho_bar * coeffs.g[0] * coeffs.alpha**2 / 2.0 - gamma * coeffs.k0


def check_stability_conditions(
    coeffs, rho_bar: float, gamma: float, kappa: float, g_ell: float, h
) -> ConditionReport:
    """
    Check the sufficient conditions for exponential stability of the
    closed-loop cooling crystallizer.

    The kappa condition is strict: at the threshold the s^2 coefficient of
    the dissipation vanishes.

    Returns:
    ConditionReport: Per-condition results and the kappa threshold.
    """
    threshold = kappa_threshold(coeffs, rho_bar, gamma)
    h_min = float(np.min(h))
    checks = (
        ConditionCheck("rho_bar > 0", bool(rho_bar > 0), rho_bar),
        ConditionCheck("gamma > 0", bool(gamma > 0), gamma),
        ConditionCheck("kappa > threshold", bool(kappa > threshold), kappa),
        ConditionCheck("g(l) > 0", bool(g_ell > 0), g_ell),
        ConditionCheck("h > 0", bool(h_min > 0), h_min),
    )
    report = ConditionReport(checks, threshold=threshold)
    logger.debug(
        f"Stability conditions: kappa={kappa!r}, threshold={threshold!r}, "
        f"passed={report.passed}."
    )
    return report


def enantiomer_feedback(
    w1, w2, v: float, s, ss, rho1, rho2, printed_boundary_term: bool = False
) -> float:
    """
    Scalar input u = dv/dt stabilizing the enantiomer deviation system.

    The law is nonlinear in v through the advection factor (1 + g_k v).
    By default the outflow term carries w_k(l)^2, which makes the closed-loop
    derivative of W equal to
    -1/2 sum_k (int rho_k h_k w_k^2 + G_k rho_k(l) w_k(l)^2) - gamma kappa v^2 / 2;
    ``printed_boundary_term=True`` uses w_k(l) instead.

    Parameters:
    w1, w2 (ndarray): Deviation profiles of both species on the grid nodes.
    v (float): Saturation deviation.
    s (EnantiomerScenario): Scenario.
    ss (EnantiomerSteadyState): Equilibrium profiles.
    rho1, rho2 (DensityWeight): Weights of the functional.
    printed_boundary_term (bool): Use the linear outflow term.

    Returns:
    float: The control value u.
    """
    grid = s.grid
    psi = s.psi(grid.nodes)
    total = 0.0
    for sp, n_bar, w, rho in zip(s.species, ss.n, (w1, w2), (rho1, rho2)):
        check_grid(grid, w)
        w = np.asarray(w, dtype=float)
        alpha = enantiomer_alpha(sp.b, sp.g, sp.B_bar, sp.G_bar)
        h = sp.h(grid.nodes)
        interior = trapezoid((2.0 * n_bar + (h + 2.0 * psi) * w) * w * rho.rho, grid)
        outflow = w[-1] if printed_boundary_term else w[-1] ** 2
        total += (
            sp.g * interior
            - sp.G_bar * (1.0 + sp.g * v) * rho.rho_bar * alpha**2 * v
            + sp.G_bar * sp.g * rho.boundary_value * outflow
        )
    return -s.kappa * v / 2.0 + total / (2.0 * s.gamma)
