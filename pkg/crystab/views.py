"""
Pipeline handlers behind the command-line interface: one function per
command. Each handler takes a validated scenario, runs the steady state ->
linearization -> weights -> simulation -> verification chain as far as the
command needs, writes CSV files and returns the scalar summary as an ordered
mapping.
"""

import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np
from django.conf import settings

from .control import check_stability_conditions
from .equilibrium import cooling_steady, enantiomer_steady
from .exceptions import CertificateError, CertificateFailure, ScenarioError
from .forms import parse_scenario
from .linearization import enantiomer_alpha, linearize_cooling
from .lyapunov import cooling_weight
from .models import CoolingScenario, check_sign_conditions
from .simulate import (
    TimeStepSpec,
    enantiomer_boundary_values,
    enantiomer_weights,
    random_cooling_state,
    random_enantiomer_state,
    simulate_cooling_linear,
    simulate_cooling_nonlinear,
    simulate_enantiomer,
)
from .verify import (
    assemble_closed_loop,
    closed_loop_rate_identity,
    cooling_rate_w_form,
    decay_envelope_ratio,
    decay_margin,
    enantiomer_rate,
    enantiomer_steady_residual,
    fit_decay,
    steady_residual,
    weight_ode_residual,
)

logger = logging.getLogger("crystab")

SWEEP_PARAMETERS = ("kappa", "gamma", "N", "cfl", "h-scale")
SWEEP_COLUMNS = ("parameter", "value", "omega_hat", "delta", "certified_rate", "passed")

# Tolerances of the verification report.
ENVELOPE_SLACK = 1.05
RATE_IDENTITY_TOL = 0.05
FIT_FRACTION = 0.9
MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class CoolingPipeline:
    scenario: CoolingScenario
    steady: object
    coeffs: object
    weight: object

    @classmethod
    def build(cls, scenario, beta_term="consistent"):
        steady = cooling_steady(scenario)
        coeffs = linearize_cooling(scenario, steady, beta_term=beta_term)
        weight = cooling_weight(
            coeffs, scenario.kinetics.v, scenario.h, scenario.rho_bar, scenario.grid
        )
        return cls(scenario, steady, coeffs, weight)


@dataclass(frozen=True)
class EnantiomerPipeline:
    scenario: object
    steady: object
    weights: tuple
    alphas: tuple

    @classmethod
    def build(cls, scenario):
        steady = enantiomer_steady(scenario)
        alphas = tuple(
            enantiomer_alpha(sp.b, sp.g, sp.B_bar, sp.G_bar) for sp in scenario.species
        )
        return cls(scenario, steady, enantiomer_weights(scenario), alphas)


def build_pipeline(scenario):
    if isinstance(scenario, CoolingScenario):
        return CoolingPipeline.build(scenario)
    return EnantiomerPipeline.build(scenario)


def load_scenario(path, n_cells=None):
    """
    Read and validate a scenario file.

    Parameters:
    path (str | Path): Scenario document.
    n_cells (int | None): Grid size overriding the document.

    Returns:
    CoolingScenario | EnantiomerScenario: The scenario.
    """
    text = Path(path).read_text(encoding="utf-8")
    logger.info(f"Loading scenario {path}.")
    return parse_scenario(text, n_cells=n_cells)


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return settings.OUTPUT_FLOAT_FORMAT(float(value))
    return str(value)


def write_csv(path, header, columns):
    """Write equally long columns under ``header``."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([format_value(value) for value in row])
    logger.info(f"Wrote {path}.")


def summary_lines(summary) -> list:
    return [f"{key}={format_value(value)}" for key, value in summary.items()]


def steady(scenario, output=None) -> dict:
    """
    Steady state of the scenario.

    Parameters:
    scenario (CoolingScenario | EnantiomerScenario): The scenario.
    output (str | None): CSV path for the profiles.

    Returns:
    dict: Scalar equilibrium data and the steady residual.
    """
    x = scenario.grid.nodes
    if isinstance(scenario, CoolingScenario):
        ss = cooling_steady(scenario)
        if output:
            write_csv(output, ("x", "n_bar", "dn_bar"), (x, ss.n, ss.dn))
        residual = steady_residual(scenario, ss)
        return {
            "c_bar": ss.c_bar,
            "u_f_bar": ss.u_f_bar,
            "eps": ss.eps,
            "beta": ss.beta,
            "n_bar_0": ss.boundary_value,
            "steady_residual": residual.max,
        }
    ss = enantiomer_steady(scenario)
    if output:
        write_csv(output, ("x", "n_bar_1", "n_bar_2"), (x, *ss.n))
    return {
        "n_bar_1_0": ss.boundary_values[0],
        "n_bar_2_0": ss.boundary_values[1],
        "steady_residual": enantiomer_steady_residual(scenario, ss),
    }


def linearize(scenario, output=None, beta_term="consistent") -> dict:
    """
    Linearization coefficients, with the advisory sign-condition report for
    the cooling model.
    """
    if not isinstance(scenario, CoolingScenario):
        pipeline = EnantiomerPipeline.build(scenario)
        return {"alpha_1": pipeline.alphas[0], "alpha_2": pipeline.alphas[1]}
    ss = cooling_steady(scenario)
    coeffs = linearize_cooling(scenario, ss, beta_term=beta_term)
    if output:
        write_csv(
            output,
            ("x", "g", "dg", "g_c", "dn_bar", "theta"),
            (scenario.grid.nodes, coeffs.g, coeffs.dg, coeffs.g_c, coeffs.dn_bar, coeffs.theta),
        )
    summary = {
        "alpha": coeffs.alpha,
        "k0": coeffs.k0,
        "k1": coeffs.k1,
        "k2": coeffs.k2,
        "beta": coeffs.beta,
        "b": coeffs.b,
    }
    report = check_sign_conditions(coeffs, scenario)
    for line in report.as_lines("signs"):
        key, value = line.split("=", 1)
        summary[key] = value
    return summary


def weights(scenario, output=None) -> dict:
    """Density weights and the residuals of their defining equations."""
    pipeline = build_pipeline(scenario)
    x = scenario.grid.nodes
    if isinstance(pipeline, CoolingPipeline):
        c = pipeline.coeffs
        rho = pipeline.weight
        if output:
            write_csv(output, ("x", "rho", "h"), (x, rho.rho, rho.h))
        residual = weight_ode_residual(rho, c.g, c.dg, c.psi, rho.h, c.v)
        return {"rho_bar": rho.rho_bar, "rho_l": rho.boundary_value, "weight_residual": residual}
    rho1, rho2 = pipeline.weights
    if output:
        write_csv(output, ("x", "rho1", "rho2"), (x, rho1.rho, rho2.rho))
    residual = max(
        weight_ode_residual(rho, sp.G_bar, 0.0, scenario.psi, rho.h, 1.0)
        for sp, rho in zip(scenario.species, pipeline.weights)
    )
    return {"rho1_l": rho1.boundary_value, "rho2_l": rho2.boundary_value, "weight_residual": residual}


def _initial_state(pipeline, seed, amplitude, nonlinear=False):
    grid = pipeline.scenario.grid
    if isinstance(pipeline, CoolingPipeline):
        scale = float(np.max(pipeline.steady.n))
        state = random_cooling_state(
            pipeline.coeffs.alpha, grid, seed=seed, amplitude=amplitude, scale=scale
        )
        if nonlinear:
            state = dataclasses.replace(
                state, w=pipeline.steady.n + state.w, s=pipeline.steady.c_bar + state.s
            )
        return state
    scale = max(float(np.max(n)) for n in pipeline.steady.n)
    boundary = None
    if nonlinear:
        boundary = partial(
            enantiomer_boundary_values, pipeline.scenario, pipeline.steady, nonlinear=True
        )
    return random_enantiomer_state(
        pipeline.alphas, grid, seed=seed, amplitude=amplitude, scale=scale, boundary=boundary
    )


def run_simulation(pipeline, spec, seed=0, amplitude=None):
    """Closed- or open-loop run from a seeded random initial deviation."""
    amplitude = settings.DEFAULT_AMPLITUDE if amplitude is None else amplitude
    scenario = pipeline.scenario
    nonlinear = spec.mode == "nonlinear"
    x0 = _initial_state(pipeline, seed, amplitude, nonlinear=nonlinear)
    if isinstance(pipeline, CoolingPipeline):
        if nonlinear:
            return simulate_cooling_nonlinear(
                scenario, pipeline.steady, x0, spec, pipeline.coeffs, pipeline.weight
            )
        return simulate_cooling_linear(
            x0, pipeline.coeffs, pipeline.weight, scenario.gamma, scenario.kappa, spec
        )
    return simulate_enantiomer(scenario, pipeline.steady, x0, spec, weights=pipeline.weights)


def _snapshot_path(output, index):
    path = Path(output)
    return path.with_name(f"{path.stem}.snapshot-{index}.csv")


def write_trace(trace, output):
    header = ("t", trace.value_name, trace.scalar_name, "u", "norm_w")
    write_csv(
        output,
        header,
        (trace.times, trace.values, trace.scalars, trace.controls, trace.norms),
    )


def write_snapshot(path, trace, grid, profiles):
    if trace.model == "cooling":
        header = ("x", "rho", "w")
    else:
        header = ("x", "rho1", "rho2", "w1", "w2")
    columns = (grid.nodes, *(rho.rho for rho in trace.weights), *profiles)
    write_csv(path, header, columns)


def simulate(
    scenario,
    output=None,
    closed=True,
    t_end=None,
    cfl=None,
    stride=1,
    seed=None,
    amplitude=None,
    mode=None,
    snapshot_times=(),
) -> dict:
    """
    Simulate the scenario from a seeded random initial deviation.

    Parameters:
    scenario (CoolingScenario | EnantiomerScenario): The scenario.
    output (str | None): Trace CSV path; snapshots are written next to it.
    closed (bool): Apply the feedback law, else u = 0.
    t_end, cfl (float | None): Horizon and Courant number (settings defaults).
    stride (int): Steps between trace records.
    seed (int | None): Seed of the initial deviation.
    amplitude (float | None): Relative size of the initial deviation.
    mode (str | None): ``linear``/``nonlinear`` (cooling) or
        ``quasilinear``/``nonlinear`` (enantiomer).
    snapshot_times (tuple): Times at which profiles are saved.

    Returns:
    dict: Final values and the fitted decay rate.
    """
    is_cooling = isinstance(scenario, CoolingScenario)
    mode = mode or ("linear" if is_cooling else "quasilinear")
    if is_cooling and mode == "quasilinear" or not is_cooling and mode == "linear":
        raise ScenarioError(f"mode {mode!r} does not apply to the {scenario.model} model")
    spec = TimeStepSpec(
        t_end=settings.DEFAULT_T_END if t_end is None else t_end,
        cfl=settings.DEFAULT_CFL if cfl is None else cfl,
        output_stride=stride,
        mode=mode,
        control="closed" if closed else "open",
        snapshot_times=tuple(snapshot_times),
    )
    seed = settings.DEFAULT_SEED if seed is None else seed
    pipeline = build_pipeline(scenario)
    trace = run_simulation(pipeline, spec, seed=seed, amplitude=amplitude)
    summary = {
        "records": len(trace),
        "t_end": trace.times[-1],
        f"{trace.value_name}_0": trace.values[0],
        f"{trace.value_name}_end": trace.values[-1],
    }
    try:
        summary["omega_hat"] = fit_decay(trace.times, trace.values).rate
    except CertificateError as e:
        logger.warning(f"No decay fit for this run: {e}")
    if output:
        write_trace(trace, output)
        for index, (t, profiles, _) in enumerate(trace.snapshots):
            write_snapshot(_snapshot_path(output, index), trace, scenario.grid, profiles)
            summary[f"snapshot.{index}.t"] = t
    return summary


def _verify_cooling(pipeline, t_end, cfl, seed) -> dict:
    scenario = pipeline.scenario
    c = pipeline.coeffs
    rho = pipeline.weight
    conditions = check_stability_conditions(
        c, scenario.rho_bar, scenario.gamma, scenario.kappa, c.g[-1], rho.h
    )
    op = assemble_closed_loop(c, rho, scenario.gamma, scenario.kappa, scenario.grid)
    delta = decay_margin(op)
    report = {line.split("=", 1)[0]: line.split("=", 1)[1] for line in conditions.as_lines("conditions")}
    report.update(
        {
            "delta": delta,
            "certified_rate": delta / 2.0,
            "weight_residual": weight_ode_residual(rho, c.g, c.dg, c.psi, rho.h, c.v),
            "steady_residual": steady_residual(scenario, pipeline.steady).max,
        }
    )
    passed = conditions.passed and delta > 0
    if passed:
        spec = TimeStepSpec(t_end=t_end, cfl=cfl)
        trace = run_simulation(pipeline, spec, seed=seed)
        increments = np.diff(trace.values)
        monotone = bool(np.all(increments <= MONOTONE_SLACK))
        fit = fit_decay(trace.times, trace.values)
        report.update(
            {
                "V_monotone": monotone,
                "omega_hat": fit.rate,
                "fit_r_squared": fit.r_squared,
            }
        )
        passed = monotone and fit.rate >= FIT_FRACTION * delta / 2.0
    else:
        report["simulation"] = "skipped"
    report["passed"] = passed
    return report


def _verify_enantiomer(pipeline, t_end, cfl, seed) -> dict:
    scenario = pipeline.scenario
    omega = scenario.decay_rate
    spec = TimeStepSpec(
        t_end=t_end if t_end is not None else 3.0 / omega,
        cfl=cfl,
        mode="quasilinear",
        keep_profiles=True,
    )
    trace = run_simulation(pipeline, spec, seed=seed)
    envelope = decay_envelope_ratio(trace, omega)
    identity = closed_loop_rate_identity(
        trace, "enantiomer", enantiomer_rate(scenario, *pipeline.weights)
    )
    fit = fit_decay(trace.times, trace.values)
    residual = max(
        weight_ode_residual(rho, sp.G_bar, 0.0, scenario.psi, rho.h, 1.0)
        for sp, rho in zip(scenario.species, pipeline.weights)
    )
    passed = envelope <= ENVELOPE_SLACK and identity <= RATE_IDENTITY_TOL
    return {
        "omega": omega,
        "envelope_ratio": envelope,
        "rate_identity_error": identity,
        "omega_hat": fit.rate,
        "weight_residual": residual,
        "passed": passed,
    }


def verify(scenario, strict=False, t_end=None, cfl=None, seed=None) -> dict:
    """
    Run the stability certificates of the scenario.

    Parameters:
    scenario (CoolingScenario | EnantiomerScenario): The scenario.
    strict (bool): Raise CertificateFailure when a certificate fails.
    t_end, cfl (float | None): Simulation horizon and Courant number.
    seed (int | None): Seed of the initial deviation.

    Returns:
    dict: The verification report.
    """
    cfl = settings.DEFAULT_CFL if cfl is None else cfl
    seed = settings.DEFAULT_SEED if seed is None else seed
    pipeline = build_pipeline(scenario)
    if isinstance(pipeline, CoolingPipeline):
        t_end = settings.DEFAULT_T_END if t_end is None else t_end
        report = _verify_cooling(pipeline, t_end, cfl, seed)
    else:
        report = _verify_enantiomer(pipeline, t_end, cfl, seed)
    logger.info(f"Verification of the {scenario.model} scenario passed={report['passed']}.")
    if strict and not report["passed"]:
        message = "certificate failed"
        if "conditions.kappa_threshold" in report:
            message += f": kappa must exceed {report['conditions.kappa_threshold']}"
        raise CertificateFailure(message, report=report)
    return report


def apply_parameter(scenario, parameter, value):
    """Scenario with one sweepable parameter replaced."""
    if parameter in ("kappa", "gamma"):
        return dataclasses.replace(scenario, **{parameter: float(value)})
    if parameter == "N":
        if float(value) != int(value):
            raise ScenarioError(f"N must be an integer, got {value!r}")
        return dataclasses.replace(scenario, grid=scenario.grid.with_cells(int(value)))
    if parameter == "h-scale":
        if isinstance(scenario, CoolingScenario):
            return dataclasses.replace(scenario, h=scenario.h.scaled(float(value)))
        species = tuple(
            dataclasses.replace(sp, h=sp.h.scaled(float(value))) for sp in scenario.species
        )
        return dataclasses.replace(scenario, species=species)
    if parameter == "cfl":
        return scenario
    raise ScenarioError(
        f"unknown sweep parameter {parameter!r}; expected one of {', '.join(SWEEP_PARAMETERS)}"
    )


def sweep_point(job) -> dict:
    """One sweep row; module-level so worker processes can unpickle it."""
    scenario, parameter, value, t_end, cfl, seed = job
    scenario = apply_parameter(scenario, parameter, value)
    if parameter == "cfl":
        cfl = float(value)
    pipeline = build_pipeline(scenario)
    if isinstance(pipeline, CoolingPipeline):
        c = pipeline.coeffs
        op = assemble_closed_loop(c, pipeline.weight, scenario.gamma, scenario.kappa, scenario.grid)
        delta = decay_margin(op)
        certified = delta / 2.0
        spec = TimeStepSpec(t_end=t_end, cfl=cfl)
        passed_certificate = delta > 0
    else:
        delta = math.nan
        certified = scenario.decay_rate
        spec = TimeStepSpec(t_end=t_end, cfl=cfl, mode="quasilinear")
        passed_certificate = True
    trace = run_simulation(pipeline, spec, seed=seed)
    omega_hat = fit_decay(trace.times, trace.values).rate
    if isinstance(pipeline, CoolingPipeline):
        passed = passed_certificate and omega_hat >= FIT_FRACTION * certified
    else:
        passed = decay_envelope_ratio(trace, certified) <= ENVELOPE_SLACK
    return {
        "parameter": parameter,
        "value": float(value),
        "omega_hat": omega_hat,
        "delta": delta,
        "certified_rate": certified,
        "passed": bool(passed),
    }


def sweep(scenario, parameter, values, output=None, t_end=None, cfl=None, seed=None, workers=None):
    """
    Run independent closed-loop simulations over the values of one parameter.

    Parameters:
    scenario (CoolingScenario | EnantiomerScenario): Base scenario.
    parameter (str): One of kappa, gamma, N, cfl, h-scale.
    values (list): Parameter values; must not be empty.
    output (str | None): CSV path for the summary table.
    t_end, cfl (float | None): Horizon and Courant number.
    seed (int | None): Seed of the initial deviation, shared by all rows.
    workers (int | None): Worker processes; 1 runs inline.

    Returns:
    list: One summary row per value.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ScenarioError(
            f"unknown sweep parameter {parameter!r}; expected one of {', '.join(SWEEP_PARAMETERS)}"
        )
    if not values:
        raise ScenarioError("sweep needs at least one value")
    t_end = settings.DEFAULT_T_END if t_end is None else t_end
    cfl = settings.DEFAULT_CFL if cfl is None else cfl
    seed = settings.DEFAULT_SEED if seed is None else seed
    workers = settings.SWEEP_WORKERS if workers is None else workers
    jobs = [(scenario, parameter, value, t_end, cfl, seed) for value in values]
    # Fail fast on bad values before spawning workers.
    for value in values:
        apply_parameter(scenario, parameter, value)
    logger.info(f"Sweeping {parameter} over {len(values)} values with {workers} workers.")
    if workers == 1:
        rows = [sweep_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(sweep_point, jobs))
    if output:
        write_csv(output, SWEEP_COLUMNS, [[row[c] for row in rows] for c in SWEEP_COLUMNS])
    return rows
