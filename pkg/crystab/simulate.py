"""
Method-of-lines simulation of the cooling crystallizer (linearized and
nonlinear) and of the enantiomer model (quasilinear and nonlinear).

Spatial derivatives use first-order upwinding, integrals the trapezoid rule
on the grid and time stepping the classical four-stage Runge-Kutta scheme.
The boundary node is tied to the scalar state and is re-imposed after every
stage.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .control import cooling_feedback, enantiomer_feedback
from .equilibrium import void_fraction
from .exceptions import ScenarioError, SimulationAbort
from .linearization import enantiomer_alpha, linearize_cooling
from .lyapunov import cooling_weight, enantiomer_weight, lyapunov_V, lyapunov_W
from .models import eval_growth, eval_nucleation
from .quadrature import trapezoid

logger = logging.getLogger("crystab")

MODES = ("linear", "nonlinear", "quasilinear")
CONTROLS = ("open", "closed")

# Relative mismatch tolerated in an initial boundary value before it is rejected.
_BOUNDARY_TOL = 1e-10


@dataclass
class CoolingState:
    """Deviation (w, s); for the nonlinear model ``w`` holds n and ``s`` holds c."""

    w: np.ndarray
    s: float
    t: float = 0.0


@dataclass
class EnantiomerState:
    w1: np.ndarray
    w2: np.ndarray
    v: float
    t: float = 0.0


@dataclass(frozen=True)
class TimeStepSpec:
    t_end: float
    cfl: float = 0.5
    output_stride: int = 1
    mode: str = "linear"
    control: str = "closed"
    open_input: Union[float, Callable] = 0.0
    snapshot_times: tuple = ()
    keep_profiles: bool = False

    def __post_init__(self):
        if not self.t_end > 0:
            raise ScenarioError("t_end must be positive", field="t_end")
        if not 0 < self.cfl <= 1:
            raise ScenarioError("cfl must lie in (0, 1]", field="cfl")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise ScenarioError("output_stride must be a positive integer")
        if self.mode not in MODES:
            raise ScenarioError(f"unknown mode {self.mode!r}", field="mode")
        if self.control not in CONTROLS:
            raise ScenarioError(f"unknown control {self.control!r}", field="control")

    def input_at(self, t: float) -> float:
        if callable(self.open_input):
            return float(self.open_input(t))
        return float(self.open_input)


@dataclass
class SimTrace:
    """
    Time series recorded by a simulation.

    ``values`` holds V (cooling) or W (enantiomer), ``scalars`` the scalar
    state s or v. ``records`` keeps (profiles, scalar) per record when the
    run asked for it; ``snapshots`` holds (t, profiles, scalar) at the first
    record reaching each requested time. ``stride`` is the number of steps
    between records.
    """

    model: str
    value_name: str
    scalar_name: str
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)
    scalars: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    weights: tuple = ()
    stride: int = 1

    def freeze(self):
        for name in ("times", "values", "scalars", "controls", "norms"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        return self

    def __len__(self):
        return len(self.times)


def stable_dt(max_speed: float, dx: float, cfl: float) -> float:
    """Explicit time step cfl * dx / max_speed."""
    if not max_speed > 0:
        raise SimulationAbort(
            f"advection speed must be positive for upwinding, got {max_speed!r}"
        )
    return cfl * dx / max_speed


def _upwind(values, dx):
    return (values[1:] - values[:-1]) / dx


class _System:
    """
    A semi-discrete system on a flat state vector. Subclasses lay out the
    profiles followed by the scalar state.
    """

    model = ""
    value_name = ""
    scalar_name = ""

    def __init__(self, grid, n_profiles):
        self.grid = grid
        self.size = grid.n_cells + 1
        self.n_profiles = n_profiles

    def split(self, y):
        profiles = tuple(
            y[k * self.size : (k + 1) * self.size] for k in range(self.n_profiles)
        )
        return profiles, y[-1]

    def pack(self, profiles, scalar):
        return np.concatenate([np.asarray(p, dtype=float) for p in profiles] + [[scalar]])

    def step(self, y, t, dt):
        """One classical Runge-Kutta step with the boundary re-imposed per stage."""
        k1 = self.rhs(y, t)
        y2 = self.impose(y + 0.5 * dt * k1)
        k2 = self.rhs(y2, t + 0.5 * dt)
        y3 = self.impose(y + 0.5 * dt * k2)
        k3 = self.rhs(y3, t + 0.5 * dt)
        y4 = self.impose(y + dt * k3)
        k4 = self.rhs(y4, t + dt)
        return self.impose(y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))

    def deviation(self, y):
        """Profiles and scalar as deviations from the equilibrium."""
        return self.split(y)


class CoolingLinearSystem(_System):
    model = "cooling"
    value_name = "V"
    scalar_name = "s"

    def __init__(self, coeffs, rho, gamma, kappa, spec):
        super().__init__(coeffs.grid, 1)
        self.coeffs = coeffs
        self.rho = rho
        self.gamma = gamma
        self.kappa = kappa
        self.spec = spec
        self.psi = coeffs.psi(self.grid.nodes)

    def control(self, y, t):
        (w,), s = self.split(y)
        if self.spec.control == "closed":
            return cooling_feedback(
                w, s, self.coeffs, self.rho, self.gamma, self.kappa, self.grid
            )
        return self.spec.input_at(t)

    def rhs(self, y, t):
        c = self.coeffs
        (w,), s = self.split(y)
        u = self.control(y, t)
        ds = -c.k0 * s + c.k1 * w[-1] + trapezoid(c.theta * w, self.grid) + c.b * u
        dw = np.empty_like(w)
        dw[1:] = (
            -c.g[1:] * _upwind(w, self.grid.dx)
            + c.v * self.psi[1:] * w[1:]
            - c.g_c[1:] * c.dn_bar[1:] * s
        )
        dw[0] = c.alpha * ds
        return self.pack((dw,), ds)

    def impose(self, y):
        y[0] = self.coeffs.alpha * y[-1]
        return y

    def speed(self, y):
        return float(np.max(self.coeffs.g))

    def lyapunov(self, y):
        (w,), s = self.deviation(y)
        return lyapunov_V(w, s, self.rho, self.gamma)

    def norm(self, y):
        (w,), _ = self.deviation(y)
        return math.sqrt(trapezoid(self.rho.rho * w**2, self.grid))


class CoolingNonlinearSystem(CoolingLinearSystem):
    """Population and mass balances in physical variables (n, c)."""

    def __init__(self, scenario, ss, coeffs, rho, spec):
        super().__init__(coeffs, rho, scenario.gamma, scenario.kappa, spec)
        self.kinetics = scenario.kinetics
        self.ss = ss
        self.phi = self.kinetics.phi(self.grid.nodes)
        self.cubes = self.grid.nodes**3

    def deviation(self, y):
        (n,), c = self.split(y)
        return (n - self.ss.n,), c - self.ss.c_bar

    def control(self, y, t):
        if self.spec.control == "closed":
            (w,), s = self.deviation(y)
            return cooling_feedback(
                w, s, self.coeffs, self.rho, self.gamma, self.kappa, self.grid
            )
        return self.spec.input_at(t)

    def rhs(self, y, t):
        k = self.kinetics
        (n,), c = self.split(y)
        u_f = self.ss.u_f_bar + self.control(y, t)
        growth = eval_growth(k, self.grid.nodes, c)[0]
        dn = np.zeros_like(n)
        dn[1:] = -growth[1:] * _upwind(n, self.grid.dx) + k.v * self.psi[1:] * n[1:]
        eps = void_fraction(n, k.k_v, self.grid)
        dlog_eps = -k.k_v / eps * trapezoid(self.cubes * dn, self.grid)
        removal = k.rho0 * k.k_v * trapezoid(self.phi * n, self.grid)
        dc = (k.rho0 - c) * (k.v + dlog_eps) + k.v / eps * (u_f - k.rho0 - removal)
        return self.pack((dn,), dc)

    def impose(self, y):
        c = y[-1]
        y[0] = eval_nucleation(self.kinetics, c)[0] / eval_growth(self.kinetics, 0.0, c)[0]
        return y

    def speed(self, y):
        return float(np.max(eval_growth(self.kinetics, self.grid.nodes, y[-1])[0]))


class EnantiomerSystem(_System):
    model = "enantiomer"
    value_name = "W"
    scalar_name = "v"

    def __init__(self, scenario, ss, rho1, rho2, spec, printed_boundary_term=False):
        super().__init__(scenario.grid, 2)
        self.scenario = scenario
        self.ss = ss
        self.rho = (rho1, rho2)
        self.spec = spec
        self.printed_boundary_term = printed_boundary_term
        self.psi = scenario.psi(self.grid.nodes)
        self.nonlinear = spec.mode == "nonlinear"

    def _factors(self, v):
        factors = []
        for label, sp in zip(("1", "2"), self.scenario.species):
            growth = 1.0 + sp.g * v
            if not growth > 0:
                raise SimulationAbort(
                    f"advection speed of species {label} loses sign: "
                    f"1 + g_{label} v = {growth!r}"
                )
            nucleation = 1.0 + sp.b * v
            if self.nonlinear and nucleation < 0:
                raise SimulationAbort(
                    f"nucleation rate of species {label} negative: "
                    f"1 + b_{label} v = {nucleation!r}"
                )
            factors.append((growth, nucleation))
        return factors

    def control(self, y, t):
        (w1, w2), v = self.split(y)
        if self.spec.control == "closed":
            return enantiomer_feedback(
                w1,
                w2,
                v,
                self.scenario,
                self.ss,
                *self.rho,
                printed_boundary_term=self.printed_boundary_term,
            )
        return self.spec.input_at(t)

    def rhs(self, y, t):
        profiles, v = self.split(y)
        factors = self._factors(v)
        u = self.control(y, t)
        derivatives = []
        for sp, w, n_bar, (growth, _) in zip(
            self.scenario.species, profiles, self.ss.n, factors
        ):
            dw = np.empty_like(w)
            source = sp.g * v * n_bar[1:]
            if self.nonlinear:
                source = source * self.psi[1:]
            dw[1:] = (
                -sp.G_bar * growth * _upwind(w, self.grid.dx)
                + self.psi[1:] * w[1:]
                - source
            )
            dw[0] = self._boundary_rate(sp, growth, u)
            derivatives.append(dw)
        return self.pack(derivatives, u)

    def _boundary_rate(self, sp, growth, u):
        if self.nonlinear:
            return sp.B_bar / sp.G_bar * (sp.b - sp.g) / growth**2 * u
        return enantiomer_alpha(sp.b, sp.g, sp.B_bar, sp.G_bar) * u

    def impose(self, y):
        values = enantiomer_boundary_values(self.scenario, self.ss, y[-1], self.nonlinear)
        for k, value in enumerate(values):
            y[k * self.size] = value
        return y

    def speed(self, y):
        v = y[-1]
        factors = self._factors(v)
        return max(
            sp.G_bar * growth for sp, (growth, _) in zip(self.scenario.species, factors)
        )

    def lyapunov(self, y):
        (w1, w2), v = self.split(y)
        return lyapunov_W(w1, w2, v, *self.rho, self.scenario.gamma)

    def norm(self, y):
        (w1, w2), _ = self.split(y)
        rho1, rho2 = self.rho
        return math.sqrt(
            trapezoid(rho1.rho * w1**2, self.grid) + trapezoid(rho2.rho * w2**2, self.grid)
        )


def enantiomer_boundary_values(s, ss, v: float, nonlinear: bool = False) -> tuple:
    """
    Boundary deviations w_k(0) tied to v: alpha_k v in the quasilinear model,
    B_k(1 + b_k v) / (G_k(1 + g_k v)) - n_bar_k(0) in the full one.
    """
    values = []
    for sp, n0 in zip(s.species, ss.boundary_values):
        if nonlinear:
            values.append(sp.B_bar * (1.0 + sp.b * v) / (sp.G_bar * (1.0 + sp.g * v)) - n0)
        else:
            values.append(enantiomer_alpha(sp.b, sp.g, sp.B_bar, sp.G_bar) * v)
    return tuple(values)


def _check_boundary(system, y):
    expected = system.impose(y.copy())
    scale = max(1.0, float(np.max(np.abs(y))))
    for k in range(system.n_profiles):
        index = k * system.size
        if abs(expected[index] - y[index]) > _BOUNDARY_TOL * scale:
            raise SimulationAbort(
                f"initial state violates the boundary condition of profile {k + 1}: "
                f"{y[index]!r} != {expected[index]!r}"
            )


def _record(trace, system, y, t, spec, pending):
    trace.times.append(t)
    trace.values.append(system.lyapunov(y))
    profiles, scalar = system.deviation(y)
    trace.scalars.append(float(scalar))
    trace.controls.append(system.control(y, t))
    trace.norms.append(system.norm(y))
    copies = tuple(np.array(p) for p in profiles)
    if spec.keep_profiles:
        trace.records.append((copies, float(scalar)))
    while pending and pending[0] <= t * (1 + 1e-12) + 1e-15:
        trace.snapshots.append((t, copies, float(scalar)))
        pending.pop(0)


def _integrate(system, y, spec, adaptive):
    trace = SimTrace(
        system.model, system.value_name, system.scalar_name, stride=spec.output_stride
    )
    trace.weights = system.rho if isinstance(system.rho, tuple) else (system.rho,)
    pending = sorted(float(t) for t in spec.snapshot_times)
    dx = system.grid.dx
    t = 0.0
    step = 0
    _record(trace, system, y, t, spec, pending)

    if not adaptive:
        dt = stable_dt(system.speed(y), dx, spec.cfl)
        n_steps = int(math.ceil(spec.t_end / dt - 1e-12))
        dt = spec.t_end / n_steps
    recorded = True
    while t < spec.t_end * (1 - 1e-14):
        if adaptive:
            dt = min(stable_dt(system.speed(y), dx, spec.cfl), spec.t_end - t)
        courant = system.speed(y) * dt / dx
        if courant > 1.0 + 1e-12:
            raise SimulationAbort(f"CFL violation: Courant number {courant!r} > 1")
        y = system.step(y, t, dt)
        t = t + dt
        step += 1
        if not np.all(np.isfinite(y)):
            logger.error(f"Non-finite state at t={t!r} after {step} steps.")
            raise SimulationAbort(f"non-finite state at t = {t!r}")
        recorded = step % spec.output_stride == 0
        if recorded:
            _record(trace, system, y, t, spec, pending)
    if not recorded:
        _record(trace, system, y, t, spec, pending)
    logger.info(
        f"Simulated {system.model} ({spec.mode}, {spec.control} loop) "
        f"for t_end={spec.t_end!r} in {step} steps."
    )
    return trace.freeze()


def simulate_cooling_linear(x0: CoolingState, coeffs, rho, gamma, kappa, spec):
    """
    Integrate the linearized cooling crystallizer.

    Parameters:
    x0 (CoolingState): Initial deviation with w(0) = alpha s.
    coeffs (LinearizedCoefficients): Linearization.
    rho (DensityWeight): Weight of V and of the feedback.
    gamma (float): Coupling weight.
    kappa (float): Feedback gain.
    spec (TimeStepSpec): Horizon, Courant number and loop mode.

    Returns:
    SimTrace: Records of t, V, s, u and the weighted norm of w.
    """
    system = CoolingLinearSystem(coeffs, rho, gamma, kappa, spec)
    y = system.pack((x0.w,), x0.s)
    _check_boundary(system, y)
    return _integrate(system, y, spec, adaptive=False)


def simulate_cooling_nonlinear(s, ss, x0: CoolingState, spec, coeffs=None, rho=None):
    """
    Integrate the nonlinear population and mass balances in (n, c).

    ``x0.w`` is the number density n and ``x0.s`` the concentration c. In
    closed loop the feed is u_f = u_f_bar + u with u from the linear law
    applied to (n - n_bar, c - c_bar). The trace holds deviations.
    """
    if coeffs is None:
        coeffs = linearize_cooling(s, ss)
    if rho is None:
        rho = cooling_weight(coeffs, s.kinetics.v, s.h, s.rho_bar, s.grid)
    system = CoolingNonlinearSystem(s, ss, coeffs, rho, spec)
    y = system.impose(system.pack((x0.w,), x0.s))
    if np.any(y[:-1] < 0):
        raise SimulationAbort("initial number density must be nonnegative")
    void_fraction(y[:-1], s.kinetics.k_v, s.grid)
    return _integrate(system, y, spec, adaptive=True)


def enantiomer_weights(s):
    return tuple(
        enantiomer_weight(sp.G_bar, s.psi, sp.h, sp.rho_bar, s.grid) for sp in s.species
    )


def simulate_enantiomer(
    s, ss, x0: EnantiomerState, spec, weights=None, printed_boundary_term=False
):
    """
    Integrate the enantiomer deviation system with the scalar input dv/dt = u.

    ``spec.mode`` selects the quasilinear model (default for any mode other
    than ``"nonlinear"``) or the full model with G_k = G_k(1 + g_k v) and
    B_k = B_k(1 + b_k v). The time step follows the current advection speed.

    Returns:
    SimTrace: Records of t, W, v, u and the weighted norm of (w1, w2).
    """
    rho1, rho2 = weights if weights is not None else enantiomer_weights(s)
    system = EnantiomerSystem(s, ss, rho1, rho2, spec, printed_boundary_term)
    y = system.pack((x0.w1, x0.w2), x0.v)
    system._factors(x0.v)
    _check_boundary(system, y)
    return _integrate(system, y, spec, adaptive=True)


def _smooth_profile(rng, boundary, grid, amplitude):
    a, b = amplitude * rng.uniform(-1.0, 1.0, size=2)
    y = grid.nodes / grid.length
    return boundary + a * y + b * y**2


def random_cooling_state(alpha, grid, seed=0, amplitude=0.05, scale=1.0):
    """Smooth random deviation satisfying w(0) = alpha s."""
    rng = np.random.default_rng(seed)
    s0 = amplitude * scale * rng.uniform(-1.0, 1.0)
    w = _smooth_profile(rng, alpha * s0, grid, amplitude * scale)
    return CoolingState(w=w, s=s0)


def random_enantiomer_state(alphas, grid, seed=0, amplitude=0.05, scale=1.0, boundary=None):
    """
    Smooth random deviation satisfying w_k(0) = alpha_k v, or
    (w_1(0), w_2(0)) = boundary(v) when a boundary map is given.
    """
    rng = np.random.default_rng(seed)
    v0 = amplitude * rng.uniform(-1.0, 1.0)
    values = boundary(v0) if boundary is not None else tuple(alpha * v0 for alpha in alphas)
    w1, w2 = (_smooth_profile(rng, value, grid, amplitude * scale) for value in values)
    return EnantiomerState(w1=w1, w2=w2, v=v0)
