"""Scenario and coefficient builders shared by the test modules."""

import dataclasses

import numpy as np

from crystab.linearization import LinearizedCoefficients
from crystab.models import (
    CoolingKinetics,
    CoolingScenario,
    EnantiomerScenario,
    Grid,
    PiecewiseFn,
    Species,
)

COOLING_DOCUMENT = """
model = "cooling"
length = 1.0
n_cells = 400
k_g = 1.0
a_g = 0.5
k_b = 2.0
p_b = 2.0
c_sat = 0.5
rho0 = 2.0
v = 1.0
k_v = 0.05
psi.breakpoints = [0.2]
psi.coeffs = [[-0.5], [0.0]]
phi.breakpoints = [0.5]
phi.coeffs = [[0.0], [0.2]]
c_bar_target = 1.0
gamma = 1.0
kappa = 2.0
rho_bar = 1.0
h = 1.0
"""

ENANTIOMER_DOCUMENT = """
model = "enantiomer"
length = 1.0
n_cells = 200
psi.breakpoints = [0.2]
psi.coeffs = [[-0.3], [0.0]]
gamma = 1.0
kappa = 1.0
G_bar_1 = 1.0
B_bar_1 = 1.0
g_1 = 0.2
b_1 = 0.6
h_1 = 1.0
G_bar_2 = 1.2
B_bar_2 = 0.8
g_2 = -0.1
b_2 = 0.4
h_2 = 1.5
"""


def step_function(length, cut, before, after):
    return PiecewiseFn(length, (cut,), ((before,), (after,)))


def cooling_kinetics(length=1.0, **overrides):
    """Kinetics with growth 1 + x/2 at c = 1 and n-bar(0) = 1."""
    values = dict(
        k_g=1.0,
        a_g=0.5,
        k_b=2.0,
        p_b=2.0,
        c_sat=0.5,
        rho0=2.0,
        v=1.0,
        k_v=0.05,
        psi=step_function(length, 0.2, -0.5, 0.0),
        phi=step_function(length, 0.5, 0.0, 0.2),
    )
    values.update(overrides)
    return CoolingKinetics(**values)


def cooling_scenario(n_cells=400, kinetics=None, **overrides):
    grid = Grid(1.0, n_cells)
    values = dict(
        kinetics=kinetics or cooling_kinetics(),
        grid=grid,
        h=PiecewiseFn.constant(1.0, 1.0),
        gamma=1.0,
        kappa=2.0,
        rho_bar=1.0,
        c_bar_target=1.0,
    )
    values.update(overrides)
    return CoolingScenario(**values)


def species(G_bar=1.0, B_bar=1.0, g=0.0, b=0.0, h=1.0, rho_bar=1.0, length=1.0):
    return Species(
        G_bar=G_bar,
        B_bar=B_bar,
        g=g,
        b=b,
        h=PiecewiseFn.constant(h, length),
        rho_bar=rho_bar,
    )


def enantiomer_scenario(n_cells=200, psi=None, first=None, second=None, **overrides):
    values = dict(
        species=(
            first or species(G_bar=1.0, B_bar=1.0, g=0.2, b=0.6, h=1.0),
            second or species(G_bar=1.2, B_bar=0.8, g=-0.1, b=0.4, h=1.5),
        ),
        psi=psi if psi is not None else step_function(1.0, 0.2, -0.3, 0.0),
        grid=Grid(1.0, n_cells),
        gamma=1.0,
        kappa=1.0,
    )
    values.update(overrides)
    return EnantiomerScenario(**values)


def random_enantiomer_scenario(seed, n_cells=400):
    """Scenario with parameters drawn from the ranges the decay tests cover."""
    rng = np.random.default_rng(seed)
    draws = [
        species(
            G_bar=rng.uniform(0.5, 1.5),
            B_bar=rng.uniform(0.5, 1.5),
            g=rng.uniform(-0.5, 0.5),
            b=rng.uniform(0.0, 1.0),
            h=rng.uniform(0.5, 2.0),
            rho_bar=rng.uniform(0.5, 2.0),
        )
        for _ in range(2)
    ]
    return enantiomer_scenario(
        n_cells=n_cells,
        psi=step_function(1.0, 0.2, -rng.uniform(0.0, 1.0), 0.0),
        first=draws[0],
        second=draws[1],
        gamma=rng.uniform(0.5, 2.0),
        kappa=rng.uniform(0.5, 2.0),
    )


def synthetic_coefficients(
    n_cells=400,
    g=2.0,
    dg=0.0,
    g_c=0.0,
    dn_bar=0.0,
    theta=0.0,
    alpha=1.0,
    k0=1.0,
    k1=0.0,
    b=1.0,
    v=1.0,
    psi=0.0,
):
    """
    Linearization bundle with constant coefficients, for tests that need
    control over every term independently of any kinetics.
    """
    grid = Grid(1.0, n_cells)
    ones = np.ones_like(grid.nodes)
    psi_fn = psi if isinstance(psi, PiecewiseFn) else PiecewiseFn.constant(psi, 1.0)

    def growth(y):
        y = np.asarray(y, dtype=float)
        return g * np.ones_like(y), dg * np.ones_like(y)

    def theta_fn(y, left=False):
        return theta * np.ones_like(np.asarray(y, dtype=float))

    return LinearizedCoefficients(
        grid=grid,
        g=g * ones,
        dg=dg * ones,
        g_c=g_c * ones,
        dn_bar=dn_bar * ones,
        theta=theta * ones,
        alpha=alpha,
        k0=k0,
        k1=k1,
        k2=k0 - alpha * k1 - alpha * theta * grid.length,
        beta=0.0,
        b=b,
        v=v,
        psi=psi_fn,
        c_bar=1.0,
        theta_fn=theta_fn,
        growth=growth,
        breakpoints=tuple(psi_fn.breakpoints),
    )


def with_cells(scenario, n_cells):
    return dataclasses.replace(scenario, grid=scenario.grid.with_cells(n_cells))
