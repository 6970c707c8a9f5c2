"""
Numerical certificates: residuals of the weight and steady-state equations,
closed-loop derivative identities, the discrete closed-loop operator with its
decay margin, and decay-rate fits of simulated traces.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigh, solve_triangular
from scipy.stats import linregress

from .control import feedback_kernel
from .equilibrium import void_fraction
from .exceptions import CertificateError
from .models import eval_growth, eval_nucleation
from .quadrature import trapezoid
from .simulate import CoolingNonlinearSystem, TimeStepSpec

logger = logging.getLogger("crystab")

# Share of records dropped at each end of a decay fit.
FIT_TRIM = 0.1


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    window: tuple


@dataclass(frozen=True)
class DiscreteOperator:
    """
    Closed-loop matrix on the stacked node samples (eta_0, ..., eta_N, s)
    together with the metric ``metric`` realizing the H-norm on them.
    """

    matrix: np.ndarray
    metric: np.ndarray
    input_vector: np.ndarray
    gain: np.ndarray
    alpha: float

    @property
    def dissipation(self) -> np.ndarray:
        """Q = -(A^T M + M A), symmetric by construction."""
        product = self.metric @ self.matrix
        return -(product + product.T)

    def to_shifted(self, w, s):
        eta = np.asarray(w, dtype=float) - self.alpha * s
        eta[0] = 0.0
        return np.concatenate([eta, [s]])

    def rk4_step(self, xi, dt):
        a = self.matrix
        k1 = a @ xi
        k2 = a @ (xi + 0.5 * dt * k1)
        k3 = a @ (xi + 0.5 * dt * k2)
        k4 = a @ (xi + dt * k3)
        return xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class SteadyResidual:
    profile: float
    boundary: float
    scalar: float

    @property
    def max(self) -> float:
        return max(self.profile, self.boundary, self.scalar)


def _sampled(f, nodes):
    return f(nodes) if callable(f) else np.broadcast_to(np.asarray(f, dtype=float), nodes.shape)


def weight_ode_residual(rho, g, dg, psi, h, v: float) -> float:
    """
    Max over nodes of |(rho g)' + 2 v psi rho + h rho|.

    rho' is taken from the closed-form exponent; the remaining terms use the
    stored samples, so a corrupted sample shows up in the residual. For an
    enantiomer weight pass g = G_bar, dg = 0 and v = 1.
    """
    nodes = rho.grid.nodes
    g, dg, psi, h = (_sampled(f, nodes) for f in (g, dg, psi, h))
    closed = rho.at(nodes)
    derivative = closed * rho.log_derivative(nodes)
    residual = derivative * g + rho.rho * dg + 2.0 * v * psi * rho.rho + h * rho.rho
    return float(np.max(np.abs(residual)))


def cooling_rate_w_form(coeffs, rho, gamma: float, kappa: float):
    """dV/dt of the closed loop in terms of w = eta + alpha s."""
    grid = coeffs.grid
    s_coefficient = kappa + gamma * coeffs.k0 - rho.rho_bar * coeffs.g[0] * coeffs.alpha**2 / 2

    def evaluate(profiles, s):
        (w,) = profiles
        return (
            -0.5 * trapezoid(rho.rho * rho.h * w**2, grid)
            - 0.5 * rho.boundary_value * coeffs.g[-1] * w[-1] ** 2
            - s_coefficient * s**2
        )

    return evaluate


def cooling_rate_eta_form(coeffs, rho, gamma: float, kappa: float):
    """The same dissipation written with the shifted profile eta = w - alpha s."""
    w_form = cooling_rate_w_form(coeffs, rho, gamma, kappa)

    def evaluate(profiles, s):
        (w,) = profiles
        return w_form((w - coeffs.alpha * s,), s)

    return evaluate


def enantiomer_rate(s, rho1, rho2):
    """dW/dt of the closed-loop quasilinear enantiomer system."""
    grid = s.grid

    def evaluate(profiles, v):
        total = 0.0
        for sp, w, rho in zip(s.species, profiles, (rho1, rho2)):
            total += trapezoid(rho.rho * rho.h * w**2, grid)
            total += sp.G_bar * rho.boundary_value * w[-1] ** 2
        return -0.5 * total - 0.5 * s.gamma * s.kappa * v**2

    return evaluate


def closed_loop_rate_identity(trace, model: str, evaluator) -> float:
    """
    Max relative error between the time derivative of the recorded Lyapunov
    values and the closed-form rate, over the middle 80% of the records.

    Parameters:
    trace (SimTrace): Run recorded at every step with ``keep_profiles``.
    model (str): ``"cooling"`` or ``"enantiomer"``; must match the trace.
    evaluator (callable): Maps (profiles, scalar) to the closed-form rate.

    Returns:
    float: The max relative error, 0 for a zero trajectory.
    """
    if model != trace.model:
        raise CertificateError(f"trace is of model {trace.model!r}, not {model!r}")
    if len(trace) < 5:
        raise CertificateError(f"trace too short: {len(trace)} records, need 5")
    if len(trace.records) != len(trace):
        raise CertificateError("trace has no profile records; rerun with keep_profiles")
    if trace.stride != 1:
        raise CertificateError(
            f"trace records every {trace.stride} steps; rerun with output_stride=1"
        )
    times = np.asarray(trace.times)
    values = np.asarray(trace.values)
    numeric = np.gradient(values, times)
    closed = np.array([evaluator(profiles, scalar) for profiles, scalar in trace.records])
    trim = int(FIT_TRIM * len(times))
    window = slice(trim, len(times) - trim)
    diff = np.abs(numeric[window] - closed[window])
    scale = np.abs(closed[window])
    with np.errstate(divide="ignore", invalid="ignore"):
        errors = np.where(diff == 0.0, 0.0, diff / scale)
    result = float(np.max(errors)) if errors.size else 0.0
    logger.debug(f"Rate identity ({model}): max relative error {result!r}.")
    return result


def assemble_closed_loop(coeffs, rho, gamma: float, kappa: float, grid):
    """
    Discrete closed-loop operator on (eta, s) with eta = w - alpha s.

    The stencils are those of the linear simulator: upwind differences for
    i >= 1, trapezoid weights for every integral. Row 0 vanishes, which keeps
    eta(0) = 0 invariant.

    Returns:
    DiscreteOperator: The matrix, the H-metric, the input vector and the gain.
    """
    n = grid.n_cells + 1
    size = n + 1
    dx = grid.dx
    c = grid.weights
    a = coeffs.alpha
    psi = coeffs.psi(grid.nodes)
    ct = c * coeffs.theta
    k2 = coeffs.k0 - a * coeffs.k1 - a * float(np.sum(ct))

    matrix = np.zeros((size, size))
    rows = np.arange(1, n)
    matrix[rows, rows] += -coeffs.g[1:] / dx + coeffs.v * psi[1:]
    matrix[rows, rows - 1] += coeffs.g[1:] / dx
    matrix[1:n, :n] -= a * ct[None, :]
    matrix[1:n, n - 1] -= a * coeffs.k1
    matrix[1:n, n] = a * k2 + a * coeffs.v * psi[1:] - coeffs.g_c[1:] * coeffs.dn_bar[1:]
    matrix[n, :n] = ct
    matrix[n, n - 1] += coeffs.k1
    matrix[n, n] = -k2

    input_vector = np.zeros(size)
    input_vector[1:n] = -a * coeffs.b
    input_vector[n] = coeffs.b

    p = c * feedback_kernel(coeffs, rho, gamma)
    gain = np.zeros(size)
    gain[:n] = -p / (gamma * coeffs.b)
    gain[n - 1] += -coeffs.k1 / coeffs.b
    gain[n] = -(kappa + a * float(np.sum(p)) + gamma * coeffs.k1 * a) / (gamma * coeffs.b)
    matrix += np.outer(input_vector, gain)
    matrix[0, :] = 0.0

    cr = c * rho.rho
    metric = np.zeros((size, size))
    metric[np.arange(n), np.arange(n)] = cr
    metric[:n, n] = a * cr
    metric[n, :n] = a * cr
    metric[n, n] = a**2 * float(np.sum(cr)) + gamma
    return DiscreteOperator(
        matrix=matrix, metric=metric, input_vector=input_vector, gain=gain, alpha=a
    )


def decay_margin(op: DiscreteOperator) -> float:
    """
    Smallest generalized eigenvalue delta of (Q, M) on the subspace eta_0 = 0.

    M is reduced by its Cholesky factor L and delta is the smallest
    eigenvalue of L^-1 Q L^-T. When delta > 0 the certified decay rate of
    the H-norm is delta / 2.
    """
    metric = op.metric[1:, 1:]
    dissipation = op.dissipation[1:, 1:]
    try:
        lower = cholesky(metric, lower=True)
    except LinAlgError as e:
        raise CertificateError(f"metric is not positive definite: {e}") from e
    half = solve_triangular(lower, dissipation, lower=True)
    reduced = solve_triangular(lower, half.T, lower=True)
    reduced = 0.5 * (reduced + reduced.T)
    delta = float(eigh(reduced, eigvals_only=True, subset_by_index=[0, 0])[0])
    logger.debug(f"Decay margin delta={delta!r} on {metric.shape[0]} unknowns.")
    return delta


def fit_decay(times, values) -> DecayFit:
    """
    Least-squares decay rate of log(values) against time.

    The first and last 10% of the records are dropped, as are values at the
    floating-point floor (below 10 machine epsilons of the initial value).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    trim = int(FIT_TRIM * len(times))
    window = slice(trim, len(times) - trim)
    times, kept = times[window], values[window]
    floor = 10.0 * np.finfo(float).eps * (values[0] if len(values) else 0.0)
    usable = kept > max(floor, 0.0)
    if np.count_nonzero(usable) < 3:
        raise CertificateError(
            f"fewer than 3 usable records for a decay fit ({np.count_nonzero(usable)})"
        )
    t_fit, v_fit = times[usable], kept[usable]
    regression = linregress(t_fit, np.log(v_fit))
    return DecayFit(
        rate=max(-float(regression.slope), 0.0),
        r_squared=float(regression.rvalue) ** 2,
        window=(float(t_fit[0]), float(t_fit[-1])),
    )


def steady_residual(s, ss) -> SteadyResidual:
    """
    Residuals of the population and mass balances at the steady state, with
    n' taken from its closed form.
    """
    k = s.kinetics
    nodes = s.grid.nodes
    growth = eval_growth(k, nodes, ss.c_bar)[0]
    profile = -growth * ss.dn + k.v * k.psi(nodes) * ss.n
    boundary = ss.n[0] - eval_nucleation(k, ss.c_bar)[0] / eval_growth(k, 0.0, ss.c_bar)[0]
    eps = void_fraction(ss.n, k.k_v, s.grid)
    removal = k.rho0 * k.k_v * trapezoid(k.phi(nodes) * ss.n, s.grid)
    scalar = (k.rho0 - ss.c_bar) * k.v + k.v / eps * (ss.u_f_bar - k.rho0 - removal)
    return SteadyResidual(
        profile=float(np.max(np.abs(profile[1:]))) if nodes.size > 1 else 0.0,
        boundary=abs(float(boundary)),
        scalar=abs(float(scalar)),
    )


def enantiomer_steady_residual(s, ss, step: float = 1e-5) -> float:
    """
    Residual of G_k n_k' = psi n_k and G_k n_k(0) = B_k at the equilibrium.

    n_k' is a central difference of the closed-form profile at cell
    midpoints of cells free of breakpoints.
    """
    grid = s.grid
    h = step * grid.length
    mids = 0.5 * (grid.nodes[1:] + grid.nodes[:-1])
    clear = np.ones(mids.shape, dtype=bool)
    for b in s.psi.breakpoints:
        clear &= np.abs(mids - b) > 0.5 * grid.dx + h
    mids = mids[clear]
    worst = 0.0
    for k, sp in enumerate(s.species):
        slope = (ss.profile(k, mids + h) - ss.profile(k, mids - h)) / (2.0 * h)
        residual = sp.G_bar * slope - s.psi(mids) * ss.profile(k, mids)
        boundary = sp.G_bar * ss.n[k][0] - sp.B_bar
        worst = max(worst, float(np.max(np.abs(residual), initial=0.0)), abs(boundary))
    return worst


def mass_balance_linearization_defect(s, ss, coeffs, w, s_dev, step: float = 1e-5):
    """
    Relative gap between the linear concentration rate and a central
    difference quotient of the nonlinear mass balance along (w, s_dev).

    Both sides use the simulator's stencils, so the gap measures the
    linearization itself up to O(dx).
    """
    spec = TimeStepSpec(t_end=1.0, control="open", mode="nonlinear")
    system = CoolingNonlinearSystem(s, ss, coeffs, None, spec)
    w = np.asarray(w, dtype=float)

    def rate(sign):
        y = system.pack((ss.n + sign * step * w,), ss.c_bar + sign * step * s_dev)
        return system.rhs(y, 0.0)[-1]

    quotient = (rate(1.0) - rate(-1.0)) / (2.0 * step)
    linear = (
        -coeffs.k0 * s_dev + coeffs.k1 * w[-1] + trapezoid(coeffs.theta * w, s.grid)
    )
    defect = abs(quotient - linear) / max(abs(quotient), np.finfo(float).tiny)
    logger.debug(f"Mass balance linearization defect {defect!r}.")
    return defect


def decay_envelope_ratio(trace, omega: float) -> float:
    """Max over records of W(t) / (W(0) exp(-omega t))."""
    values = np.asarray(trace.values)
    times = np.asarray(trace.times)
    if values[0] == 0.0:
        return 0.0
    return float(np.max(values / (values[0] * np.exp(-omega * times))))
