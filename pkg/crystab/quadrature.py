"""
Quadrature helpers shared by the steady-state, coefficient and weight code.

State-dependent integrals live on grid nodes and use the composite trapezoid
rule; integrands known in closed form use Gauss-Legendre per cell or exact
antiderivatives. Integrals over piecewise data are split at breakpoints.
"""

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss
from scipy.integrate import trapezoid as _scipy_trapezoid

from .exceptions import ScenarioError

GAUSS_ORDER = 5


def trapezoid(values, grid) -> float:
    """Composite trapezoid rule of node samples on ``grid``."""
    return float(_scipy_trapezoid(values, dx=grid.dx))


def _interior_cuts(breakpoints, length):
    tol = 1e-12 * length
    return sorted({float(b) for b in breakpoints if tol < b < length - tol})


def piecewise_trapezoid(func, grid, breakpoints=()) -> float:
    """
    Trapezoid rule split at breakpoints.

    Parameters:
    func (callable): ``func(x, left)`` evaluating the integrand at the points
        ``x``; ``left=True`` asks for left limits.
    grid (Grid): The node set supplying the interior points of every piece.
    breakpoints (iterable): Locations of jumps of the integrand.

    Returns:
    float: The integral over [0, grid.length].
    """
    nodes = grid.nodes
    tol = 1e-12 * grid.length
    edges = [0.0] + _interior_cuts(breakpoints, grid.length) + [grid.length]
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        inner = nodes[(nodes > a + tol) & (nodes < b - tol)]
        points = np.concatenate([[a], inner, [b]])
        values = np.array(func(points, False), dtype=float)
        values[-1] = np.asarray(func(np.array([b]), True), dtype=float)[0]
        total += float(_scipy_trapezoid(values, points))
    return total


def _gauss_on(integrand, a, b, order):
    gx, gw = leggauss(order)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    points = mid[:, None] + half[:, None] * gx[None, :]
    values = np.asarray(integrand(points.ravel()), dtype=float).reshape(points.shape)
    return (values * gw[None, :]).sum(axis=1) * half


def gauss_cumulative(integrand, grid, breakpoints=(), order=GAUSS_ORDER) -> np.ndarray:
    """Cumulative integral from 0 to every node, Gauss-Legendre per cell."""
    nodes = grid.nodes
    starts = list(nodes[:-1])
    ends = list(nodes[1:])
    cells = list(range(grid.n_cells))
    for cut in _interior_cuts(breakpoints, grid.length):
        i = int(np.searchsorted(nodes, cut, side="right")) - 1
        if np.isclose(nodes[i], cut, rtol=0.0, atol=1e-12 * grid.length):
            continue
        # A cell may already be split by an earlier cut.
        for k, (a, b, c) in enumerate(zip(starts, ends, cells)):
            if c == i and a < cut < b:
                starts[k], ends[k] = a, cut
                starts.append(cut)
                ends.append(b)
                cells.append(i)
                break
    pieces = _gauss_on(integrand, starts, ends, order)
    per_cell = np.zeros(grid.n_cells)
    np.add.at(per_cell, np.asarray(cells), pieces)
    return np.concatenate([[0.0], np.cumsum(per_cell)])


def gauss_integral(integrand, a, b, breakpoints=(), order=GAUSS_ORDER) -> float:
    """Integral over [a, b] split at the breakpoints inside it."""
    if b == a:
        return 0.0
    cuts = sorted(float(p) for p in breakpoints if a < p < b)
    edges = [a] + cuts + [b]
    return float(np.sum(_gauss_on(integrand, edges[:-1], edges[1:], order)))


class RationalAntiderivative:
    """
    Closed form of x -> integral_0^x f(y) / (scale * (1 + slope * y)) dy for a
    piecewise polynomial f.

    With slope > 0 every piece is divided by (1 + slope * y): the quotient is
    integrated as a polynomial and the remainder contributes a logarithm.
    """

    def __init__(self, numerator, scale: float, slope: float = 0.0):
        if not scale > 0:
            raise ScenarioError("scale must be positive", field="scale")
        self.numerator = numerator
        self.scale = float(scale)
        self.slope = float(slope)
        self._primitives = [self._primitive(poly) for poly in numerator.polynomials]
        edges = numerator.edges
        offsets = [0.0]
        for j, prim in enumerate(self._primitives[:-1]):
            offsets.append(offsets[-1] + prim(edges[j + 1]) - prim(edges[j]))
        self._offsets = offsets

    def _primitive(self, poly: Polynomial):
        if self.slope == 0.0:
            integral = poly.integ()
            return lambda y: integral(y) / self.scale
        quotient, remainder = divmod(poly, Polynomial([1.0, self.slope]))
        q_integral = quotient.integ()
        r0 = float(remainder.coef[0])
        slope = self.slope
        return lambda y: (q_integral(y) + r0 * np.log1p(slope * y) / slope) / self.scale

    def __call__(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        index = self.numerator.piece_index(x_arr)
        edges = self.numerator.edges
        result = np.empty_like(x_arr)
        for j, prim in enumerate(self._primitives):
            mask = index == j
            if np.any(mask):
                result[mask] = self._offsets[j] + prim(x_arr[mask]) - prim(edges[j])
        if np.ndim(x) == 0:
            return float(result[0])
        return result.reshape(np.shape(x))
