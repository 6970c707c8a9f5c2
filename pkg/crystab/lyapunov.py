"""
Density weights and the quadratic functionals built from them.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import (
    ControlDesignError,
    GridMismatchError,
    InvalidStateError,
    UnphysicalStateError,
)
from .models import Grid, PiecewiseFn
from .quadrature import gauss_cumulative, gauss_integral, trapezoid

logger = logging.getLogger("crystab")


@dataclass(frozen=True)
class DensityWeight:
    """
    rho(x) = rho_bar * exp(-integral_0^x integrand(y) dy).

    ``rho`` holds the node samples; ``exponent`` the cumulative integral at
    the nodes, from which ``at`` evaluates rho anywhere.
    """

    rho: np.ndarray
    rho_bar: float
    h: np.ndarray
    exponent: np.ndarray
    integrand: Callable
    grid: Grid
    breakpoints: tuple = ()

    @classmethod
    def constant(cls, value: float, grid: Grid) -> "DensityWeight":
        zeros = np.zeros_like(grid.nodes)
        return cls(
            rho=np.full_like(grid.nodes, float(value)),
            rho_bar=float(value),
            h=zeros,
            exponent=zeros,
            integrand=lambda x, left=False: np.zeros_like(np.asarray(x, dtype=float)),
            grid=grid,
        )

    def at(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        nodes = self.grid.nodes
        index = np.clip(np.searchsorted(nodes, x_arr, side="right") - 1, 0, len(nodes) - 1)
        exponent = np.array(
            [
                self.exponent[i]
                + gauss_integral(self.integrand, nodes[i], xi, self.breakpoints)
                for i, xi in zip(index, x_arr)
            ]
        )
        values = self.rho_bar * np.exp(-exponent)
        if np.ndim(x) == 0:
            return float(values[0])
        return values.reshape(np.shape(x))

    def log_derivative(self, x, left: bool = False):
        return -np.asarray(self.integrand(x, left), dtype=float)

    @property
    def boundary_value(self) -> float:
        """rho(l)."""
        return float(self.rho[-1])


@dataclass(frozen=True)
class HState:
    """Shifted state (eta, s) with eta = w - alpha s, so eta(0) = 0."""

    eta: np.ndarray
    s: float

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if eta.ndim != 1 or eta.size < 2:
            raise InvalidStateError("eta must be a one-dimensional node sample")
        if eta[0] != 0.0:
            raise InvalidStateError(f"eta(0) must be exactly 0, got {eta[0]!r}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "s", float(self.s))

    @classmethod
    def from_profile(cls, w, s: float, alpha: float) -> "HState":
        eta = np.asarray(w, dtype=float) - alpha * s
        eta[0] = 0.0
        return cls(eta, s)

    def profile(self, alpha: float) -> np.ndarray:
        return self.eta + alpha * self.s


def check_grid(grid: Grid, *samples):
    for sample in samples:
        if np.shape(sample) != grid.nodes.shape:
            raise GridMismatchError(
                f"expected {grid.nodes.size} node samples, got {np.shape(sample)}"
            )


def cooling_weight(coeffs, v: float, h: PiecewiseFn, rho_bar: float, grid: Grid):
    """
    Weight solving (rho g)' + 2 v psi rho = -h rho with rho(0) = rho_bar.

    Parameters:
    coeffs (LinearizedCoefficients): Supplies g, g' and psi.
    v (float): Flow-rate parameter.
    h (PiecewiseFn): Positive decay profile.
    rho_bar (float): Anchor value rho(0).
    grid (Grid): Sampling grid.

    Returns:
    DensityWeight: The weight.
    """
    if not rho_bar > 0:
        raise ControlDesignError("rho_bar must be positive")
    if not h.minimum_on(grid.nodes) > 0:
        raise ControlDesignError("h must be positive on [0,ℓ]")
    g_nodes = coeffs.growth(grid.nodes)[0]
    if not np.min(g_nodes) > 0:
        raise UnphysicalStateError("growth rate nonpositive: weight undefined")
    psi = coeffs.psi

    def integrand(x, left=False):
        x = np.asarray(x, dtype=float)
        g, dg = coeffs.growth(x)
        return (2.0 * v * psi(x, left=left) + dg + h(x, left=left)) / g

    breakpoints = tuple(sorted(set(psi.breakpoints) | set(h.breakpoints)))
    exponent = gauss_cumulative(integrand, grid, breakpoints)
    rho = rho_bar * np.exp(-exponent)
    logger.debug(f"Cooling weight: rho(l)={rho[-1]!r}, min rho={rho.min()!r}.")
    return DensityWeight(
        rho=rho,
        rho_bar=float(rho_bar),
        h=h(grid.nodes),
        exponent=exponent,
        integrand=integrand,
        grid=grid,
        breakpoints=breakpoints,
    )


def enantiomer_weight(
    G_bar: float, psi: PiecewiseFn, h: PiecewiseFn, rho_bar: float, grid: Grid
) -> DensityWeight:
    """Weight solving G_bar rho' = -(2 psi + h) rho with rho(0) = rho_bar."""
    if not G_bar > 0:
        raise ControlDesignError("G_bar must be positive")
    if not rho_bar > 0:
        raise ControlDesignError("rho_bar must be positive")
    if not h.minimum_on(grid.nodes) > 0:
        raise ControlDesignError("h must be positive on [0,ℓ]")

    def integrand(x, left=False):
        x = np.asarray(x, dtype=float)
        return (2.0 * psi(x, left=left) + h(x, left=left)) / G_bar

    breakpoints = tuple(sorted(set(psi.breakpoints) | set(h.breakpoints)))
    exponent = gauss_cumulative(integrand, grid, breakpoints)
    return DensityWeight(
        rho=rho_bar * np.exp(-exponent),
        rho_bar=float(rho_bar),
        h=h(grid.nodes),
        exponent=exponent,
        integrand=integrand,
        grid=grid,
        breakpoints=breakpoints,
    )


def lyapunov_V(w, s: float, rho: DensityWeight, gamma: float) -> float:
    """V = 1/2 int rho w^2 + gamma/2 s^2."""
    check_grid(rho.grid, w)
    w = np.asarray(w, dtype=float)
    return 0.5 * trapezoid(rho.rho * w**2, rho.grid) + 0.5 * gamma * s**2


def lyapunov_W(w1, w2, v: float, rho1: DensityWeight, rho2: DensityWeight, gamma):
    """W = 1/2 sum_k int rho_k w_k^2 + gamma/2 v^2."""
    check_grid(rho1.grid, w1)
    check_grid(rho2.grid, w2)
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    return (
        0.5 * trapezoid(rho1.rho * w1**2, rho1.grid)
        + 0.5 * trapezoid(rho2.rho * w2**2, rho2.grid)
        + 0.5 * gamma * v**2
    )


def h_inner(a: HState, b: HState, rho: DensityWeight, gamma: float, alpha: float):
    """Inner product int (eta_a + alpha s_a)(eta_b + alpha s_b) rho + gamma s_a s_b."""
    check_grid(rho.grid, a.eta, b.eta)
    integrand = a.profile(alpha) * b.profile(alpha) * rho.rho
    return trapezoid(integrand, rho.grid) + gamma * a.s * b.s
