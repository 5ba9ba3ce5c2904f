"""
oqs_eom/dynamics/longtime.py
Spectral analysis of L(z), zero-mode projector, long-time limits (by
epsilon-extrapolation and by the zero-mode formula), exact closed-system
time averages and timescale diagnostics.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
import scipy.linalg as la
from scipy.interpolate import BarycentricInterpolator
from scipy.optimize import linear_sum_assignment

from oqs_eom.config import Config
from oqs_eom.errors import (
    DefectiveSpectrumError,
    EmptyZeroClusterError,
    InvalidFrequencyError,
    SolverError,
)
from oqs_eom.dynamics.effective import (
    EffectiveLiouvilleEval,
    effective_liouville,
    evaluate_frequency_grid,
    initial_shift,
)
from oqs_eom.dynamics.projection import BlockDecomposition, QImageBasis, restricted_blocks
from oqs_eom.dynamics.time_domain import Trajectory
from oqs_eom.models.catalog import make_rng, sector_initial
from oqs_eom.models.composite import (
    CompositeModel,
    FullMatrix,
    build_initial_total,
    eigendecompose,
    maximally_mixed,
)
from oqs_eom.ops.operator_space import SuperOperator, partial_trace_env, unvec, vec
from oqs_eom.state import build_pipeline

logger = logging.getLogger(__name__)

FINITE_SIZE_CAVEAT = (
    "finite environment: evaluated at finite eps; below the environment level spacing "
    "recurrences return and the eps -> 0+ limit is not a continuum result"
)


def _hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


# ================================================================================
# SPECTRAL DATA
# ================================================================================

@dataclass(frozen=True)
class SpectralData:
    """
    Eigensystem of L(z). right[k] and left[k] are d_S x d_S eigenmatrices
    with <left[j], right[k]> = delta_jk (Hilbert-Schmidt).
    """

    z: complex
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    biorthogonality_defect: float
    eigenvector_condition: float
    defective: bool

    @property
    def scale(self) -> float:
        radius = float(np.max(np.abs(self.eigenvalues))) if self.eigenvalues.size else 0.0
        return radius if radius > 0 else 1.0


def spectrum_effective(ev: EffectiveLiouvilleEval) -> SpectralData:
    """
    Complete eigensystem of L(z), sorted by |Im lambda| then Re lambda.
    Left eigenmatrices are the rows of the inverse right-eigenvector matrix.
    """
    l_eff = np.asarray(ev.l_eff)
    if not np.all(np.isfinite(l_eff)):
        raise SolverError(f"L(z) at z = {ev.z} is not finite")
    try:
        eigenvalues, vr = la.eig(l_eff)
    except la.LinAlgError as e:
        raise SolverError(f"eigensolver failed at z = {ev.z}: {e}") from e

    order = np.lexsort((eigenvalues.real, np.abs(eigenvalues.imag)))
    eigenvalues, vr = eigenvalues[order], vr[:, order]
    condition = float(np.linalg.cond(vr))
    defective = condition > Config.DEFECTIVE_COND
    if defective:
        logger.warning(f"⚠️ L(z) at z = {ev.z:.4g} looks defective (eigenvector condition {condition:.3e})")

    lh = np.linalg.inv(vr)
    defect = float(np.max(np.abs(lh @ vr - np.eye(vr.shape[0]))))
    d_s = int(round(np.sqrt(l_eff.shape[0])))
    right = np.stack([unvec(vr[:, k], d_s) for k in range(vr.shape[1])])
    # <L_k, R_j> = vdot(vec L_k, vec R_j) = lh[k] @ vr[:, j]
    left = np.stack([unvec(lh[k].conj(), d_s) for k in range(lh.shape[0])])
    return SpectralData(
        z=ev.z,
        eigenvalues=eigenvalues,
        right=right,
        left=left,
        biorthogonality_defect=defect,
        eigenvector_condition=condition,
        defective=defective,
    )


# ================================================================================
# ZERO MODE PROJECTOR
# ================================================================================

@dataclass(frozen=True)
class ZeroModeProjector:
    projector: np.ndarray
    degeneracy: int
    rho_inf_candidate: np.ndarray
    modes: List[np.ndarray] = field(default_factory=list)
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def apply(self, rho) -> np.ndarray:
        return SuperOperator(self.projector).apply(rho)

    def idempotency_defect(self) -> float:
        return float(np.max(np.abs(self.projector @ self.projector - self.projector)))


def zero_mode_projector(sd: SpectralData, cluster_tol: Optional[float] = None) -> ZeroModeProjector:
    """
    Spectral projector onto the eigenvalues with |lambda| <= cluster_tol * scale.

    In the non-degenerate case the right zero mode is normalized to unit trace
    and the projector is |rho_inf><1|.

    Raises:
        EmptyZeroClusterError: no eigenvalue near zero
        DefectiveSpectrumError: the cluster's eigenvectors are numerically dependent
    """
    cluster_tol = Config.ZERO_CLUSTER_TOL if cluster_tol is None else cluster_tol
    cluster = np.flatnonzero(np.abs(sd.eigenvalues) <= cluster_tol * sd.scale)
    if cluster.size == 0:
        raise EmptyZeroClusterError(
            f"no eigenvalue of L(z) within {cluster_tol:.1e} * {sd.scale:.4g} of zero at z = {sd.z}"
        )
    d_s = sd.right.shape[1]
    vr = np.stack([vec(sd.right[k]) for k in cluster], axis=1)
    if np.linalg.cond(vr) > Config.DEFECTIVE_COND:
        raise DefectiveSpectrumError(f"zero cluster of size {cluster.size} is defective at z = {sd.z}")
    lh = np.stack([vec(sd.left[k]).conj() for k in cluster])
    projector = vr @ lh

    modes = []
    for k in cluster:
        r = sd.right[k]
        tr = np.trace(r)
        modes.append(r / tr if abs(tr) > 1e-12 else r)

    if cluster.size == 1:
        rho_inf = _hermitize(modes[0])
        projector = np.outer(vec(rho_inf), vec(np.eye(d_s)))
    else:
        rho_inf = _hermitize(unvec(projector @ vec(maximally_mixed(d_s)), d_s))
    return ZeroModeProjector(
        projector=projector,
        degeneracy=int(cluster.size),
        rho_inf_candidate=rho_inf,
        modes=modes,
        eigenvalues=sd.eigenvalues[cluster],
    )


# ================================================================================
# EXACT TIME AVERAGES
# ================================================================================

def time_average_oracle(m: CompositeModel, averaging_rate: Optional[float] = None,
                        rho_tot0: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Exact long-time average of the closed system's reduced state.

    With averaging_rate=None every eigenbasis element with |omega_ab| above
    DEGENERACY_TOL * spectral range is dropped (infinite-time average). With a
    rate eps each element is weighted by eps / (eps + i omega_ab), which is
    eps * integral e^(-eps t) rho(t) dt exactly.
    """
    eig = eigendecompose(m)
    v = eig.vectors
    rho_tot0 = build_initial_total(m) if rho_tot0 is None else rho_tot0
    rotated = v.conj().T @ rho_tot0 @ v
    omega = eig.bohr_frequencies
    if averaging_rate is None:
        spread = eig.spectral_range if eig.spectral_range > 0 else 1.0
        rotated = np.where(np.abs(omega) <= Config.DEGENERACY_TOL * spread, rotated, 0.0)
    else:
        if averaging_rate <= 0:
            raise InvalidFrequencyError(f"averaging rate must be positive, got {averaging_rate}")
        rotated = rotated * (averaging_rate / (averaging_rate + 1j * omega))
    averaged = v @ rotated @ v.conj().T
    return _hermitize(partial_trace_env(averaged, m.d_s, m.d_e))


def sector_oracle(m: CompositeModel, weights: Sequence[float],
                  averaging_rate: Optional[float] = None) -> np.ndarray:
    """sum_s w_s * time average of the state started entirely in sector s"""
    if len(weights) != len(m.sector_projectors):
        raise ValueError(f"expected {len(m.sector_projectors)} weights, got {len(weights)}")
    result = np.zeros((m.d_s, m.d_s), dtype=complex)
    for s, w in enumerate(weights):
        if w:
            result = result + w * time_average_oracle(m.with_initial(sector_initial(m, s)), averaging_rate)
    return result


# ================================================================================
# LONG-TIME LIMITS
# ================================================================================

@dataclass
class LongTimeExtrapolation:
    rho_inf: np.ndarray
    eps_seq: List[float]
    samples: np.ndarray
    estimates: np.ndarray
    differences: List[float]
    monotone: bool
    converged: bool
    caveat: str = FINITE_SIZE_CAVEAT

    def as_dict(self) -> Dict:
        return {
            "eps_seq": self.eps_seq,
            "differences": self.differences,
            "monotone": self.monotone,
            "converged": self.converged,
            "caveat": self.caveat,
        }


def _validate_eps_seq(eps_seq: Sequence[float]) -> np.ndarray:
    eps = np.asarray(eps_seq, dtype=float)
    if eps.ndim != 1 or eps.size == 0:
        raise InvalidFrequencyError("eps sequence must be a non-empty list")
    if np.any(eps < Config.EPS_MIN):
        raise InvalidFrequencyError(f"eps sequence has values below eps_min = {Config.EPS_MIN:.1e}")
    if np.any(np.diff(eps) >= 0):
        raise InvalidFrequencyError("eps sequence must be strictly decreasing")
    return eps


def extrapolate_to_zero(eps: np.ndarray, samples: np.ndarray, order: int) -> np.ndarray:
    """
    Polynomial (Richardson) extrapolation to eps = 0 through the last
    order + 1 samples. Returns the running estimates: entry k uses samples
    max(0, k - order) .. k.
    """
    estimates = []
    flat = samples.reshape(samples.shape[0], -1)
    for k in range(eps.size):
        lo = max(0, k - order)
        xs = eps[lo:k + 1]
        if xs.size == 1:
            estimates.append(flat[k])
            continue
        re = BarycentricInterpolator(xs, flat[lo:k + 1].real, axis=0)(0.0)
        im = BarycentricInterpolator(xs, flat[lo:k + 1].imag, axis=0)(0.0)
        estimates.append(np.asarray(re) + 1j * np.asarray(im))
    return np.stack(estimates).reshape(samples.shape)


def long_time_limit_extrapolated(m: CompositeModel, eps_seq: Sequence[float],
                                 order: Optional[int] = None,
                                 threads: Optional[int] = None) -> LongTimeExtrapolation:
    """
    g(eps) = -i z rho(z) at z = i eps, i.e. eps * rho(i eps), extrapolated to eps -> 0.

    Non-convergence is reported (and logged), never raised: below the level
    spacing of a finite environment the sequence stops converging.
    """
    order = Config.RICHARDSON_ORDER if order is None else order
    eps = _validate_eps_seq(eps_seq)
    pipe = build_pipeline(m)
    grid = evaluate_frequency_grid(pipe, 1j * eps, threads=threads)
    samples = eps[:, None, None] * grid.rho

    estimates = extrapolate_to_zero(eps, samples, order)
    differences = [float(np.max(np.abs(estimates[k] - estimates[k - 1]))) for k in range(1, eps.size)]
    monotone = all(b <= a for a, b in zip(differences, differences[1:]))
    converged = bool(differences) and differences[-1] <= Config.LONGTIME_TOL
    if not converged:
        logger.warning(f"⚠️ eps-extrapolation for {m.name} did not converge (steps {differences})")

    rho_inf = _hermitize(estimates[-1])
    return LongTimeExtrapolation(
        rho_inf=rho_inf,
        eps_seq=[float(e) for e in eps],
        samples=samples,
        estimates=estimates,
        differences=differences,
        monotone=monotone,
        converged=converged,
    )


def extrapolated_oracle(m: CompositeModel, eps_seq: Sequence[float], order: Optional[int] = None) -> np.ndarray:
    """Abel-averaged oracle at each eps, extrapolated exactly like the pipeline samples"""
    order = Config.RICHARDSON_ORDER if order is None else order
    eps = _validate_eps_seq(eps_seq)
    samples = np.stack([time_average_oracle(m, averaging_rate=e) for e in eps])
    return _hermitize(extrapolate_to_zero(eps, samples, order)[-1])


@dataclass
class LongTimeFormula:
    """
    rho_inf: zero modes plus the modes of L(i eps) whose eigenvalues shrink
        in proportion to eps, each weighted by eps / (eps + i lambda), with
        the linear eps-correction from a second evaluation at eps / 2
    stationary_state: Pi0 (rho_0 + shift) alone at eps_ref
    """

    rho_inf: np.ndarray
    stationary_state: np.ndarray
    eps_ref: float
    degeneracy: int
    zero_modes: ZeroModeProjector
    slow_eigenvalues: np.ndarray
    independence_defect: Optional[float]
    initial_state_spread: Optional[float] = None
    caveat: str = FINITE_SIZE_CAVEAT

    @property
    def degenerate(self) -> bool:
        return self.degeneracy > 1

    @property
    def retained_modes(self) -> int:
        return self.degeneracy + int(self.slow_eigenvalues.size)

    def as_dict(self) -> Dict:
        return {
            "eps_ref": self.eps_ref,
            "degeneracy": self.degeneracy,
            "degenerate": self.degenerate,
            "retained_modes": self.retained_modes,
            "slow_eigenvalues": [complex(v) for v in self.slow_eigenvalues],
            "independence_defect": self.independence_defect,
            "initial_state_spread": self.initial_state_spread,
            "projector_idempotency_defect": self.zero_modes.idempotency_defect(),
            "caveat": self.caveat,
        }


def match_slow_modes(sd: SpectralData, sd_half: SpectralData, eps: float,
                     exclude: Sequence[int] = (), exclude_half: Sequence[int] = (),
                     factor: Optional[float] = None,
                     match_tol: Optional[float] = None) -> List[Tuple[int, int]]:
    """
    Pairs (k, j) of eigenvalues with lambda_j(eps / 2) ~ lambda_k(eps) / 2.

    Candidates satisfy |lambda_k| <= factor * eps; the pairing is a
    minimum-cost assignment on |lambda_j(eps/2) - lambda_k(eps)/2| and a pair
    is kept when that cost is at most match_tol * |lambda_k| / 2.
    """
    factor = Config.SLOW_MODE_FACTOR if factor is None else factor
    match_tol = Config.SLOW_MODE_MATCH_TOL if match_tol is None else match_tol
    rows = [k for k in range(sd.eigenvalues.size)
            if k not in exclude and abs(sd.eigenvalues[k]) <= factor * eps]
    cols = [j for j in range(sd_half.eigenvalues.size) if j not in exclude_half]
    if not rows or not cols:
        return []
    predicted = sd.eigenvalues[rows] / 2
    cost = np.abs(sd_half.eigenvalues[cols][None, :] - predicted[:, None])
    r_idx, c_idx = linear_sum_assignment(cost)
    return [
        (rows[r], cols[c]) for r, c in zip(r_idx, c_idx)
        if cost[r, c] <= match_tol * abs(predicted[r])
    ]


def _weighted_modes(sd: SpectralData, modes: Sequence[int], eps: float, x: np.ndarray) -> np.ndarray:
    """sum_k eps / (eps + i lambda_k) vec(R_k) <L_k, x>"""
    total = np.zeros_like(x)
    for k in modes:
        weight = eps / (eps + 1j * sd.eigenvalues[k])
        total = total + weight * vec(sd.right[k]) * np.vdot(vec(sd.left[k]), x)
    return total


def _zero_cluster(sd: SpectralData, cluster_tol: Optional[float]) -> List[int]:
    cluster_tol = Config.ZERO_CLUSTER_TOL if cluster_tol is None else cluster_tol
    return [int(k) for k in np.flatnonzero(np.abs(sd.eigenvalues) <= cluster_tol * sd.scale)]


@dataclass(frozen=True)
class _FormulaSide:
    """Spectral data, zero projector and source vector at one eps"""

    eps: float
    spectrum: SpectralData
    zero: ZeroModeProjector
    zero_index: List[int]
    source: np.ndarray


def _formula_side(pipe, eps: float, cluster_tol: Optional[float]) -> _FormulaSide:
    z = 1j * eps
    ev = effective_liouville(pipe.bd, pipe.qb, z, rb=pipe.rb)
    sd = spectrum_effective(ev)
    # the radius of L(i eps) grows like 1/eps; the cluster is measured against min(radius, eps)
    cluster_tol = Config.ZERO_CLUSTER_TOL if cluster_tol is None else cluster_tol
    cluster_tol = cluster_tol * min(1.0, eps / sd.scale)
    zero = zero_mode_projector(sd, cluster_tol)
    shift = initial_shift(pipe.bd, pipe.qb, z, pipe.delta_corr, rb=pipe.rb)
    return _FormulaSide(
        eps=eps,
        spectrum=sd,
        zero=zero,
        zero_index=_zero_cluster(sd, cluster_tol),
        source=vec(pipe.rho_0 + shift),
    )


def _slow_estimate(side: _FormulaSide, half: _FormulaSide, pairs: List[Tuple[int, int]],
                   source: np.ndarray, source_half: np.ndarray) -> np.ndarray:
    d_s = side.zero.rho_inf_candidate.shape[0]
    at_eps = side.zero.projector @ source + _weighted_modes(side.spectrum, [k for k, _ in pairs], side.eps, source)
    at_half = half.zero.projector @ source_half + _weighted_modes(
        half.spectrum, [j for _, j in pairs], half.eps, source_half
    )
    return _hermitize(unvec(2 * at_half - at_eps, d_s))


def _second_initial_state(m: CompositeModel, seed: int) -> FullMatrix:
    """Seeded random correlated total state, used to cross-check initial-state independence"""
    rng = make_rng(seed)
    a = rng.standard_normal((m.dim, m.dim)) + 1j * rng.standard_normal((m.dim, m.dim))
    rho = a @ a.conj().T
    return FullMatrix(_hermitize(rho / np.trace(rho)))


def _null_vector_state(l_eff: np.ndarray) -> np.ndarray:
    """Unit-trace right null vector of L(z) from the smallest singular value"""
    _, _, vh = la.svd(l_eff)
    r = unvec(vh[-1].conj())
    return r / np.trace(r)


def long_time_formula(m: CompositeModel, eps_ref: Optional[float] = None,
                      cluster_tol: Optional[float] = None, check_seed: int = 0) -> LongTimeFormula:
    """
    Long-time limit from the spectrum of L(i eps_ref) and L(i eps_ref / 2).

    Every mode of the zero cluster enters with weight 1 (Pi0). Modes whose
    eigenvalue halves when eps halves enter with eps / (eps + i lambda); their
    weights stay O(1) as eps -> 0 on a finite environment. The two evaluations
    are combined as 2 F(eps/2) - F(eps).

    In the non-degenerate case the stationary state Pi0 (rho_0 + shift) is
    recomputed for a seeded random correlated initial state through its own
    pipeline and the null vector of L(i eps_ref) from an SVD; the difference is
    reported as independence_defect.

    Raises:
        EmptyZeroClusterError: no eigenvalue of L(i eps_ref) near zero
        DefectiveSpectrumError: zero cluster with dependent eigenvectors
    """
    pipe = build_pipeline(m)
    eps_ref = Config.EPS_REF_FACTOR * pipe.scale if eps_ref is None else float(eps_ref)
    if not eps_ref >= 2 * Config.EPS_MIN:
        raise InvalidFrequencyError(f"eps_ref must be at least {2 * Config.EPS_MIN:.1e}, got {eps_ref}")

    side = _formula_side(pipe, eps_ref, cluster_tol)
    half = _formula_side(pipe, eps_ref / 2, cluster_tol)
    pairs = match_slow_modes(side.spectrum, half.spectrum, eps_ref, side.zero_index, half.zero_index)
    rho_inf = _slow_estimate(side, half, pairs, side.source, half.source)
    stationary = _hermitize(side.zero.apply(unvec(side.source)))
    slow = np.array([side.spectrum.eigenvalues[k] for k, _ in pairs], dtype=complex)
    logger.info(f"✅ {m.name}: {side.zero.degeneracy} zero mode(s), {len(pairs)} slow mode(s) at eps = {eps_ref:.3g}")

    independence, spread = None, None
    if side.zero.degeneracy == 1:
        other = build_pipeline(m.with_initial(_second_initial_state(m, check_seed)))
        z = 1j * eps_ref
        ev = effective_liouville(other.bd, other.qb, z, rb=other.rb)
        source = other.rho_0 + initial_shift(other.bd, other.qb, z, other.delta_corr, rb=other.rb)
        other_stationary = _hermitize(_null_vector_state(ev.l_eff) * np.trace(source))
        independence = float(np.max(np.abs(other_stationary - stationary)))

        source_half = vec(other.rho_0 + initial_shift(other.bd, other.qb, 1j * eps_ref / 2,
                                                      other.delta_corr, rb=other.rb))
        other_inf = _slow_estimate(side, half, pairs, vec(source), source_half)
        spread = float(np.max(np.abs(other_inf - rho_inf)))
    else:
        logger.info(f"✅ {m.name}: degenerate zero cluster ({side.zero.degeneracy} modes), result keeps initial data")
    return LongTimeFormula(
        rho_inf=rho_inf,
        stationary_state=stationary,
        eps_ref=eps_ref,
        degeneracy=side.zero.degeneracy,
        zero_modes=side.zero,
        slow_eigenvalues=slow,
        independence_defect=independence,
        initial_state_spread=spread,
    )


# ================================================================================
# TIMESCALES
# ================================================================================

@dataclass(frozen=True)
class TimescaleDiagnostics:
    """
    Heuristic scales: t_PQ = 1 / ||L_PQ||_2, t_Q = ||[i eps - L_Q]^-1||_2 on
    image(Q), tau = t_PQ^2 / t_Q.

    L_Q has a kernel on image(Q) whenever d_E > d_S, so t_Q >= 1 / eps and
    tau <= eps * t_PQ^2, with equality for a maximally mixed rho_E.
    """

    t_pq: float
    t_q: float
    tau: float
    eps_ref: float
    coupled: bool
    verdict: str

    def as_dict(self) -> Dict:
        return {
            "t_PQ": self.t_pq,
            "t_Q": self.t_q,
            "tau": self.tau,
            "eps_ref": self.eps_ref,
            "coupled": self.coupled,
            "verdict": self.verdict,
            "heuristic": True,
        }


def _correlation_verdict(t_q: float, t_pq: float) -> str:
    ratio = t_q / t_pq
    if ratio < 0.1:
        return "negligible"
    if ratio > 10:
        return "important"
    return "comparable"


def timescale_diagnostics(bd: BlockDecomposition, qb: QImageBasis, eps_ref: float) -> TimescaleDiagnostics:
    if not eps_ref > 0:
        raise InvalidFrequencyError(f"eps_ref must be positive, got {eps_ref}")
    rb = restricted_blocks(bd, qb)
    coupling = float(np.linalg.norm(rb.w_pq, 2)) if rb.rank else 0.0
    scale = max(float(np.linalg.norm(bd.L_tot, 2)), 1.0)
    if coupling <= 1e-14 * scale:
        logger.info("✅ Uncoupled model: infinite relaxation time")
        t_q = float(np.linalg.norm(np.linalg.inv(1j * eps_ref * np.eye(rb.rank) - rb.a_q), 2)) if rb.rank else 0.0
        return TimescaleDiagnostics(
            t_pq=float("inf"), t_q=t_q, tau=float("inf"), eps_ref=eps_ref, coupled=False, verdict="uncoupled",
        )

    t_pq = 1.0 / coupling
    t_q = float(np.linalg.norm(np.linalg.inv(1j * eps_ref * np.eye(rb.rank) - rb.a_q), 2))
    return TimescaleDiagnostics(
        t_pq=t_pq,
        t_q=t_q,
        tau=t_pq ** 2 / t_q,
        eps_ref=eps_ref,
        coupled=True,
        verdict=_correlation_verdict(t_q, t_pq),
    )


def observed_relaxation_time(traj: Trajectory, rho_inf: np.ndarray) -> float:
    """First grid time where ||rho(t) - rho_inf|| drops below 1/e of its initial value (inf if never)"""
    distance = np.linalg.norm(traj.states - rho_inf[None, :, :], axis=(1, 2))
    if distance[0] == 0:
        return 0.0
    below = np.flatnonzero(distance <= distance[0] / np.e)
    return float(traj.grid.times[below[0]]) if below.size else float("inf")
