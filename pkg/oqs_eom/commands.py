"""
oqs_eom/commands.py
Pipelines behind each CLI subcommand. Every command returns a ResultRecord
carrying its own residuals and warnings, an optional flat table, and the
list of acceptance violations (non-empty only for verify).
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple
import logging

import numpy as np

from oqs_eom.catalog_config import CATALOG_CONFIG, CATALOG_NAMES
from oqs_eom.config import Config
from oqs_eom.dynamics.effective import (
    effective_liouville,
    evaluate_frequency_grid,
    hermiticity_breaking_report,
    verify_resolvent_identities,
)
from oqs_eom.dynamics.longtime import (
    FINITE_SIZE_CAVEAT,
    LongTimeExtrapolation,
    LongTimeFormula,
    extrapolated_oracle,
    long_time_formula,
    long_time_limit_extrapolated,
    observed_relaxation_time,
    sector_oracle,
    spectrum_effective,
    time_average_oracle,
    timescale_diagnostics,
    zero_mode_projector,
)
from oqs_eom.dynamics.projection import q_spectrum_report
from oqs_eom.dynamics.time_domain import (
    ContourSpec,
    TimeGrid,
    compare_trajectories,
    exact_reduced_evolution,
    inverse_laplace_evolve,
    refinement_study,
)
from oqs_eom.errors import EmptyZeroClusterError
from oqs_eom.models.catalog import sector_weighted_initial
from oqs_eom.models.composite import (
    CompositeModel,
    build_initial_total,
    build_total_hamiltonian,
    fingerprint,
)
from oqs_eom.persistence import Table, matrix_columns
from oqs_eom.schemas import ResultRecord, RunConfig, encode_array, encode_value
from oqs_eom.state import build_pipeline
from oqs_eom.worker import parallel_map

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    record: ResultRecord
    table: Optional[Table] = None
    violations: List[str] = field(default_factory=list)


def _record(command: str, m: CompositeModel, cfg: Optional[RunConfig], **sections) -> ResultRecord:
    parameters = cfg.model_dump(mode="json") if cfg is not None else {}
    return ResultRecord(
        command=command,
        model_name=m.name,
        model_fingerprint=fingerprint(m),
        parameters=encode_value(parameters),
        payload=encode_value(sections.get("payload", {})),
        diagnostics=encode_value(sections.get("diagnostics", {})),
        warnings=sections.get("warnings", []),
    )


def _trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((a - b + (a - b).conj().T) / 2))))


# ================================================================================
# VERIFY
# ================================================================================

def run_verify(cfg: RunConfig, threads: Optional[int] = None) -> CommandResult:
    m = cfg.build_model()
    pipe = build_pipeline(m)
    tol = cfg.tolerances
    zs = cfg.frequencies.values(pipe.scale)
    logger.info(f"🚀 verify: {m.name} at {zs.size} frequencies")

    reports = parallel_map(lambda z: verify_resolvent_identities(pipe, z, q_seed=cfg.q_seed), zs, threads)

    table = Table(["z", "r_resolvent", "r_cross", "r_state", "trace_defect", "left_zero_mode_defect", "condition"])
    for r in reports:
        table.add_row(complex(r.z), r.r_resolvent, r.r_cross, r.r_state, r.trace_defect,
                      r.left_zero_mode_defect, r.condition)

    max_residual = max(r.max_residual for r in reports)
    max_trace = max(r.trace_defect for r in reports)
    max_zero = max(r.left_zero_mode_defect for r in reports)
    violations = []
    if max_residual > tol.acceptance:
        violations.append(f"resolvent residual {max_residual:.3e} > {tol.acceptance:.1e}")
    if max_trace > tol.trace:
        violations.append(f"trace defect {max_trace:.3e} > {tol.trace:.1e}")
    if max_zero > tol.zero_mode:
        violations.append(f"left zero-mode defect {max_zero:.3e} > {tol.zero_mode:.1e}")

    eps_sample = [float(np.min(zs.imag))]
    diagnostics = {
        "max_residual": max_residual,
        "max_trace_defect": max_trace,
        "max_left_zero_mode_defect": max_zero,
        "max_condition": max(r.condition for r in reports),
        "projector_algebra": pipe.pq.algebra_defects(),
        "block_reconstruction": pipe.bd.reconstruction_defect(),
        "q_image_orthonormality": pipe.qb.orthonormality_defect(),
        "q_spectrum": q_spectrum_report(pipe.bd, pipe.qb),
        "hermiticity_breaking": hermiticity_breaking_report(pipe.bd, pipe.qb, eps_sample, pipe.scale),
        "library_tolerances": Config.get_tolerances(),
        "passed": not violations,
    }
    payload = {
        "z": [complex(z) for z in zs],
        "r_resolvent": [r.r_resolvent for r in reports],
        "r_cross": [r.r_cross for r in reports],
        "r_state": [r.r_state for r in reports],
    }
    warnings = list(violations)
    return CommandResult(_record("verify", m, cfg, payload=payload, diagnostics=diagnostics, warnings=warnings),
                         table, violations)


# ================================================================================
# EVOLVE
# ================================================================================

def _contour(cfg: RunConfig, m: CompositeModel, t_max: float) -> ContourSpec:
    if cfg.contour is None:
        return ContourSpec.default_for(m, t_max)
    return ContourSpec(**cfg.contour.model_dump())


def run_evolve(cfg: RunConfig, threads: Optional[int] = None) -> CommandResult:
    m = cfg.build_model()
    grid = TimeGrid.linspace(cfg.times.t_max, cfg.times.count)
    contour = _contour(cfg, m, grid.t_max)
    logger.info(f"🚀 evolve: {m.name}, t_max = {grid.t_max:g}")

    oracle = exact_reduced_evolution(m, grid)
    laplace = inverse_laplace_evolve(m, contour, grid, threads=threads)
    comparison = compare_trajectories(oracle, laplace)

    warnings = []
    diagnostics = {
        "comparison": comparison.as_dict(),
        "oracle": oracle.diagnostics,
        "inverse_laplace": laplace.diagnostics,
        "contour": contour.as_dict(),
    }
    if cfg.contour is None:
        diagnostics["contour_defaults"] = Config.get_contour_defaults()
    if laplace.diagnostics["hermiticity_defect"] > 10 * max(comparison.max_deviation, 1e-14):
        warnings.append("hermiticity defect of the inverse-Laplace output exceeds 10x the oracle deviation")
    if cfg.refinement_steps:
        study = refinement_study(m, grid, contour, steps=cfg.refinement_steps, threads=threads)
        diagnostics["refinement"] = {"deviations": study.deviations, "monotone": study.monotone,
                                     "contours": [c.as_dict() for c in study.contours]}
        if not study.monotone:
            warnings.append("contour refinement did not decrease the deviation monotonically")

    d = m.d_s
    table = Table(["t"] + matrix_columns("oracle", d) + matrix_columns("laplace", d))
    for k, t in enumerate(grid.times):
        table.add_row(float(t), *oracle.states[k].reshape(-1), *laplace.states[k].reshape(-1))

    payload = {
        "times": grid.times,
        "oracle": encode_array(oracle.states),
        "inverse_laplace": encode_array(laplace.states),
        "deviation": comparison.per_time,
    }
    return CommandResult(_record("evolve", m, cfg, payload=payload, diagnostics=diagnostics, warnings=warnings), table)


# ================================================================================
# FREQUENCY SWEEP
# ================================================================================

def run_freq_sweep(cfg: RunConfig, threads: Optional[int] = None) -> CommandResult:
    m = cfg.build_model()
    pipe = build_pipeline(m)
    zs = cfg.frequencies.values(pipe.scale)
    result = evaluate_frequency_grid(pipe, zs, threads=threads, keep_liouville=True)
    spectra = np.stack([np.sort_complex(np.linalg.eigvals(l)) for l in result.l_eff])

    d = m.d_s
    table = Table(["z"] + matrix_columns("rho", d) + [f"lambda[{k}]" for k in range(d * d)])
    for k, z in enumerate(result.z):
        table.add_row(complex(z), *result.rho[k].reshape(-1), *spectra[k])

    diagnostics = {
        "max_trace_defect": float(np.max(result.trace_defects)),
        "max_condition_q": float(np.max(result.condition_q)),
        "max_condition_eff": float(np.max(result.condition_eff)),
        "max_imag_eigenvalue": float(np.max(spectra.imag)),
    }
    payload = {
        "z": [complex(z) for z in result.z],
        "rho_z": encode_array(result.rho),
        "eigenvalues": encode_array(spectra),
    }
    return CommandResult(_record("freq-sweep", m, cfg, payload=payload, diagnostics=diagnostics), table)


# ================================================================================
# SPECTRUM
# ================================================================================

def run_spectrum(cfg: RunConfig, threads: Optional[int] = None) -> CommandResult:
    m = cfg.build_model()
    pipe = build_pipeline(m)
    if cfg.spectrum_z is not None:
        z = complex(*cfg.spectrum_z)
    else:
        z = 1j * (cfg.eps_ref or Config.EPS_REF_FACTOR * pipe.scale)
    ev = effective_liouville(pipe.bd, pipe.qb, z, rb=pipe.rb)
    sd = spectrum_effective(ev)

    warnings = []
    diagnostics = {
        "biorthogonality_defect": sd.biorthogonality_defect,
        "eigenvector_condition": sd.eigenvector_condition,
        "defective": sd.defective,
        "left_zero_mode_defect": ev.left_zero_mode_defect,
        "condition": ev.condition,
        "growth_modes": int(np.sum(sd.eigenvalues.imag > 1e-8 * pipe.scale)),
    }
    payload = {
        "z": z,
        "eigenvalues": encode_array(sd.eigenvalues),
        "right": encode_array(sd.right),
        "left": encode_array(sd.left),
    }
    if sd.defective:
        warnings.append("spectrum flagged as defective")
    try:
        zero = zero_mode_projector(sd, cfg.tolerances.cluster)
        diagnostics["zero_cluster"] = {"degeneracy": zero.degeneracy,
                                       "idempotency_defect": zero.idempotency_defect()}
        payload["rho_inf_candidate"] = encode_array(zero.rho_inf_candidate)
        payload["zero_mode_projector"] = encode_array(zero.projector)
    except EmptyZeroClusterError as e:
        warnings.append(str(e))
        logger.warning(f"⚠️ {e}")
    return CommandResult(_record("spectrum", m, cfg, payload=payload, diagnostics=diagnostics, warnings=warnings))


# ================================================================================
# LONG TIME
# ================================================================================

def _longtime_entry(m: CompositeModel, cfg: RunConfig, threads: Optional[int],
                    weights: Optional[List[float]] = None) -> Tuple[Dict, LongTimeExtrapolation, LongTimeFormula]:
    tol = cfg.tolerances.longtime
    extrapolated = long_time_limit_extrapolated(m, cfg.eps_seq, threads=threads)
    formula = long_time_formula(m, cfg.eps_ref, cfg.tolerances.cluster)
    oracle = time_average_oracle(m)
    matched = extrapolated_oracle(m, cfg.eps_seq)

    dev_matched = float(np.max(np.abs(extrapolated.rho_inf - matched)))
    dev_formula = float(np.max(np.abs(formula.rho_inf - extrapolated.rho_inf)))
    dev_oracle = float(np.max(np.abs(extrapolated.rho_inf - oracle)))
    entry = {
        "rho_inf_extrapolated": encode_array(extrapolated.rho_inf),
        "rho_inf_formula": encode_array(formula.rho_inf),
        "stationary_state": encode_array(formula.stationary_state),
        "rho_inf_oracle": encode_array(oracle),
        "rho_inf_oracle_matched": encode_array(matched),
        "extrapolation": extrapolated.as_dict(),
        "formula": formula.as_dict(),
        "comparisons": {
            "extrapolated_vs_matched_oracle": {"deviation": dev_matched, "within_tolerance": dev_matched <= tol},
            "formula_vs_extrapolated": {"deviation": dev_formula, "within_tolerance": dev_formula <= tol},
            "extrapolated_vs_infinite_oracle": {"deviation": dev_oracle, "within_tolerance": dev_oracle <= tol},
        },
    }
    if formula.independence_defect is not None:
        entry["comparisons"]["stationary_state_independence"] = {
            "deviation": formula.independence_defect,
            "within_tolerance": formula.independence_defect <= tol,
        }
    if m.sector_projectors:
        if weights is None and cfg.initial.kind == "sector":
            weights = cfg.initial.weights
        if weights is not None:
            sector = sector_oracle(m, weights)
            dev_sector = float(np.max(np.abs(formula.rho_inf - sector)))
            entry["rho_inf_sector_oracle"] = encode_array(sector)
            entry["comparisons"]["formula_vs_sector_oracle"] = {"deviation": dev_sector,
                                                                "within_tolerance": dev_sector <= 1e-6}
    return entry, extrapolated, formula


def run_longtime(cfg: RunConfig, threads: Optional[int] = None) -> CommandResult:
    m = cfg.build_model()
    logger.info(f"🚀 longtime: {m.name}, eps_seq = {cfg.eps_seq}")
    warnings = [FINITE_SIZE_CAVEAT]

    runs, formulas = [], []
    weight_sets = cfg.weights_list or [None]
    for weights in weight_sets:
        variant = m if weights is None else m.with_initial(sector_weighted_initial(m, weights))
        entry, extrapolated, formula = _longtime_entry(variant, cfg, threads, weights)
        if weights is not None:
            entry["weights"] = list(weights)
        if not extrapolated.converged:
            warnings.append(f"eps-extrapolation did not converge for {variant.name} (weights {weights})")
        runs.append(entry)
        formulas.append(formula.rho_inf)

    diagnostics = {"runs": len(runs)}
    if len(formulas) >= 2:
        diagnostics["trace_distance_first_two"] = _trace_distance(formulas[0], formulas[1])
    return CommandResult(_record("longtime", m, cfg, payload={"results": runs}, diagnostics=diagnostics,
                                 warnings=warnings))


# ================================================================================
# DIAGNOSE
# ================================================================================

def run_diagnose(cfg: RunConfig, threads: Optional[int] = None) -> CommandResult:
    m = cfg.build_model()
    pipe = build_pipeline(m)
    eps_ref = cfg.eps_ref or Config.EPS_REF_FACTOR * pipe.scale
    scales = timescale_diagnostics(pipe.bd, pipe.qb, eps_ref)

    grid = TimeGrid.linspace(cfg.times.t_max, cfg.times.count)
    oracle = exact_reduced_evolution(m, grid)
    observed = observed_relaxation_time(oracle, time_average_oracle(m))

    diagnostics = {"timescales": scales.as_dict(), "observed_relaxation_time": observed}
    if scales.coupled and np.isfinite(observed) and observed > 0:
        ratio = scales.tau / observed
        diagnostics["tau_over_observed"] = ratio
        diagnostics["within_factor_3"] = bool(1 / 3 <= ratio <= 3)
    warnings = ["timescales are heuristic estimates", FINITE_SIZE_CAVEAT]
    return CommandResult(_record("diagnose", m, cfg, payload=scales.as_dict(), diagnostics=diagnostics,
                                 warnings=warnings))


# ================================================================================
# CATALOG
# ================================================================================

def run_catalog(cfg: Optional[RunConfig], threads: Optional[int] = None) -> CommandResult:
    """Without a config: list the fixtures. With one: dump the model's matrices."""
    if cfg is None:
        listing = {name: entry["description"] for name, entry in CATALOG_CONFIG.items()}
        record = ResultRecord(
            command="catalog",
            model_name="",
            model_fingerprint="",
            payload={"models": listing, "names": CATALOG_NAMES},
        )
        table = Table(["name", "description"])
        for name in CATALOG_NAMES:
            table.add_row(name, CATALOG_CONFIG[name]["description"])
        return CommandResult(record, table)

    m = cfg.build_model()
    payload = {
        "d_s": m.d_s,
        "d_e": m.d_e,
        "h_tot": encode_array(build_total_hamiltonian(m)),
        "rho_e": encode_array(m.rho_e),
        "rho_tot0": encode_array(build_initial_total(m)),
        "sector_projectors": [encode_array(p) for p in m.sector_projectors],
    }
    return CommandResult(_record("catalog", m, cfg, payload=payload))


COMMANDS: Dict[str, Callable] = {
    "verify": run_verify,
    "evolve": run_evolve,
    "freq-sweep": run_freq_sweep,
    "spectrum": run_spectrum,
    "longtime": run_longtime,
    "diagnose": run_diagnose,
    "catalog": run_catalog,
}


def run_command(command: str, cfg: Optional[RunConfig], threads: Optional[int] = None) -> CommandResult:
    if command not in COMMANDS:
        raise KeyError(f"unknown command '{command}'")
    return COMMANDS[command](cfg, threads=threads)
