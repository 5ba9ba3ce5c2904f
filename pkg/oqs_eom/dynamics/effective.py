"""
oqs_eom/dynamics/effective.py
Frequency-domain reduced dynamics:

    L(z)       = L_P + L_PQ [z - L_Q]^-1 L_QP
    shift(z)   = L_PQ [z - L_Q]^-1 delta_corr
    rho(z)     = i [z - L(z)]^-1 (rho_0 + shift(z))

All Q-propagation happens in the orthonormal Q-image coordinates; the
full-space inverse of z - L_Q is never formed.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union
import logging

import numpy as np

from oqs_eom.config import Config
from oqs_eom.errors import InvalidFrequencyError, InvalidStateError, NearPoleError
from oqs_eom.dynamics.projection import (
    BlockDecomposition,
    QImageBasis,
    RestrictedBlocks,
    restricted_blocks,
)
from oqs_eom.models.catalog import make_rng
from oqs_eom.models.composite import CompositeModel
from oqs_eom.ops.operator_space import as_matrix, unvec, vec
from oqs_eom.state import Pipeline, build_pipeline
from oqs_eom.worker import chunked, parallel_map

logger = logging.getLogger(__name__)

# Elements per stacked work array; keeps a frequency chunk near 64 MB of complex128
_CHUNK_ELEMENTS = 1 << 22


# ================================================================================
# VALUE TYPES
# ================================================================================

@dataclass(frozen=True)
class ComplexFrequency:
    """z = omega + i eps with eps >= EPS_MIN"""

    value: complex

    def __post_init__(self):
        z = complex(self.value)
        if not np.isfinite(z.real) or not np.isfinite(z.imag):
            raise InvalidFrequencyError(f"frequency {z} is not finite")
        if z.imag < Config.EPS_MIN:
            raise InvalidFrequencyError(
                f"Im z = {z.imag:.3e} is below eps_min = {Config.EPS_MIN:.1e}; "
                f"evaluations on or below the real axis are rejected"
            )
        object.__setattr__(self, "value", z)


FrequencyLike = Union[complex, float, ComplexFrequency]


def as_frequency(z: FrequencyLike) -> complex:
    if isinstance(z, ComplexFrequency):
        return z.value
    return ComplexFrequency(z).value


@dataclass(frozen=True)
class EffectiveLiouvilleEval:
    z: complex
    l_eff: np.ndarray
    condition: float

    @property
    def left_zero_mode_defect(self) -> float:
        """||vec(I_S)^dagger L(z)|| relative to ||L(z)||"""
        return trace_row_defect(self.l_eff) / max(float(np.linalg.norm(self.l_eff)), 1e-300)


@dataclass(frozen=True)
class FrequencyState:
    z: complex
    rho_z: np.ndarray
    condition: float

    @property
    def trace_defect(self) -> float:
        """|Tr rho(z) - i/z|"""
        return float(abs(np.trace(self.rho_z) - 1j / self.z))


def trace_row_defect(l_eff: np.ndarray) -> float:
    d = int(round(np.sqrt(l_eff.shape[0])))
    return float(np.linalg.norm(vec(np.eye(d)) @ l_eff))


# ================================================================================
# RESTRICTED SOLVES
# ================================================================================

def _blocks(bd: BlockDecomposition, qb: QImageBasis, rb: Optional[RestrictedBlocks]) -> RestrictedBlocks:
    return rb if rb is not None else restricted_blocks(bd, qb)


def _check_q_space(bd: BlockDecomposition, y: np.ndarray, name: str) -> None:
    norm = float(np.linalg.norm(y))
    if norm == 0.0:
        return
    leak = float(np.linalg.norm(bd.pq.P @ y))
    if leak > 1e-8 * norm:
        raise InvalidStateError(f"{name} is not in image(Q): |P y| / |y| = {leak / norm:.3e}")


def _solve_checked(matrix: np.ndarray, rhs: np.ndarray, z: complex, what: str):
    condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > Config.NEAR_POLE_COND:
        raise NearPoleError(z, condition, what=what)
    return np.linalg.solve(matrix, rhs), condition


def q_propagate(bd: BlockDecomposition, qb: QImageBasis, z: FrequencyLike, y,
                rb: Optional[RestrictedBlocks] = None) -> np.ndarray:
    """
    Solve (z - L_Q) x = y for x in image(Q).

    Args:
        bd: block decomposition
        qb: Q-image basis
        z: complex frequency with Im z > 0
        y: D-vector in image(Q)
        rb: precomputed restricted blocks (computed when omitted)

    Returns:
        D-vector x in image(Q)

    Raises:
        NearPoleError: condition of the restricted system above NEAR_POLE_COND
    """
    z = as_frequency(z)
    rb = _blocks(bd, qb, rb)
    y = np.asarray(y, dtype=complex)
    _check_q_space(bd, y, "y")
    if rb.rank == 0 or not np.any(y):
        return np.zeros_like(y)

    coords, _ = _solve_checked(z * np.eye(rb.rank) - rb.a_q, rb.q_coordinates(y), z, "z - L_Q")
    x = rb.basis @ coords

    residual = float(np.linalg.norm(z * x - bd.L_Q @ x - y))
    if residual > 1e-9 * float(np.linalg.norm(y)):
        logger.warning(f"⚠️ Q-propagation residual {residual:.3e} at z = {z:.6g}")
    return x


def effective_liouville(bd: BlockDecomposition, qb: QImageBasis, z: FrequencyLike,
                        rb: Optional[RestrictedBlocks] = None) -> EffectiveLiouvilleEval:
    """L(z) on d_S^2-vectors; one restricted solve per column of L_QP embed"""
    z = as_frequency(z)
    rb = _blocks(bd, qb, rb)
    if rb.rank == 0:
        return EffectiveLiouvilleEval(z=z, l_eff=np.array(rb.l_p), condition=1.0)

    memory, condition = _solve_checked(z * np.eye(rb.rank) - rb.a_q, rb.w_qp, z, "z - L_Q")
    l_eff = rb.l_p + rb.w_pq @ memory
    return EffectiveLiouvilleEval(z=z, l_eff=l_eff, condition=condition)


def initial_shift(bd: BlockDecomposition, qb: QImageBasis, z: FrequencyLike, delta_corr,
                  rb: Optional[RestrictedBlocks] = None) -> np.ndarray:
    """Virtual initial-state change L_PQ [z - L_Q]^-1 delta_corr, as a d_S x d_S matrix"""
    z = as_frequency(z)
    rb = _blocks(bd, qb, rb)
    d_s = bd.pq.d_s
    delta_corr = np.asarray(delta_corr, dtype=complex)
    _check_q_space(bd, delta_corr, "delta_corr")
    if rb.rank == 0 or not np.any(delta_corr):
        return np.zeros((d_s, d_s), dtype=complex)

    coords, _ = _solve_checked(z * np.eye(rb.rank) - rb.a_q, rb.q_coordinates(delta_corr), z, "z - L_Q")
    return unvec(rb.w_pq @ coords, d_s)


def rho_z(ev: EffectiveLiouvilleEval, rho_0, shift=None) -> FrequencyState:
    rho_0 = as_matrix(rho_0)
    d2 = ev.l_eff.shape[0]
    if rho_0.shape[0] ** 2 != d2:
        raise InvalidStateError(f"rho_0 of shape {rho_0.shape} does not match L_eff of size {d2}")
    source = rho_0 if shift is None else rho_0 + as_matrix(shift)
    solution, condition = _solve_checked(ev.z * np.eye(d2) - ev.l_eff, vec(source), ev.z, "z - L_eff")
    return FrequencyState(z=ev.z, rho_z=unvec(1j * solution, rho_0.shape[0]), condition=condition)


def frequency_state(pipe: Pipeline, z: FrequencyLike) -> FrequencyState:
    """rho(z) for the pipeline's own initial state"""
    ev = effective_liouville(pipe.bd, pipe.qb, z, rb=pipe.rb)
    shift = initial_shift(pipe.bd, pipe.qb, ev.z, pipe.delta_corr, rb=pipe.rb)
    return rho_z(ev, pipe.rho_0, shift)


# ================================================================================
# FREQUENCY GRIDS
# ================================================================================

@dataclass
class FrequencyGridResult:
    """Stacked evaluations over a grid of z values (first axis = frequency)"""

    z: np.ndarray
    rho: np.ndarray
    condition_q: np.ndarray
    condition_eff: np.ndarray
    l_eff: Optional[np.ndarray] = None

    @property
    def trace_defects(self) -> np.ndarray:
        return np.abs(np.trace(self.rho, axis1=1, axis2=2) - 1j / self.z)


def _chunk_length(rank: int) -> int:
    return max(1, min(Config.FREQUENCY_CHUNK, _CHUNK_ELEMENTS // max(rank * rank, 1)))


def _raise_near_pole(zs: np.ndarray, conditions: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(conditions) | (conditions > Config.NEAR_POLE_COND)
    if np.any(bad):
        first = int(np.argmax(bad))
        raise NearPoleError(zs[first], conditions[first], what=what)


def _evaluate_chunk(pipe: Pipeline, zs: np.ndarray, keep_liouville: bool):
    rb = pipe.rb
    d2 = rb.system_dim
    n = zs.size
    source = vec(pipe.rho_0)

    if rb.rank:
        coords_delta = rb.q_coordinates(pipe.delta_corr)
        rhs = np.concatenate([rb.w_qp, coords_delta[:, None]], axis=1)
        m = zs[:, None, None] * np.eye(rb.rank) - rb.a_q
        cond_q = np.linalg.cond(m)
        _raise_near_pole(zs, cond_q, "z - L_Q")
        solved = np.linalg.solve(m, np.broadcast_to(rhs, (n,) + rhs.shape))
        mapped = rb.w_pq @ solved
        l_eff = rb.l_p + mapped[:, :, :d2]
        shift = mapped[:, :, d2]
    else:
        cond_q = np.ones(n)
        l_eff = np.broadcast_to(rb.l_p, (n, d2, d2)).copy()
        shift = np.zeros((n, d2), dtype=complex)

    g = zs[:, None, None] * np.eye(d2) - l_eff
    cond_g = np.linalg.cond(g)
    _raise_near_pole(zs, cond_g, "z - L_eff")
    solution = 1j * np.linalg.solve(g, (source + shift)[:, :, None])[:, :, 0]
    d_s = pipe.pq.d_s
    return solution.reshape(n, d_s, d_s), cond_q, cond_g, (l_eff if keep_liouville else None)


def evaluate_frequency_grid(pipe: Pipeline, zs: Sequence[complex], threads: Optional[int] = None,
                            keep_liouville: bool = False) -> FrequencyGridResult:
    """
    rho(z) (and optionally L(z)) over a grid, using stacked LAPACK solves.

    Chunks are independent and are mapped over worker threads; results are
    concatenated in grid order.
    """
    zs = np.asarray([as_frequency(z) for z in zs], dtype=complex)
    parts = parallel_map(
        lambda chunk: _evaluate_chunk(pipe, chunk, keep_liouville),
        chunked(zs, _chunk_length(pipe.rb.rank)),
        threads,
    )
    return FrequencyGridResult(
        z=zs,
        rho=np.concatenate([p[0] for p in parts]),
        condition_q=np.concatenate([p[1] for p in parts]),
        condition_eff=np.concatenate([p[2] for p in parts]),
        l_eff=np.concatenate([p[3] for p in parts]) if keep_liouville else None,
    )


# ================================================================================
# HIGH-FREQUENCY MOMENTS
# ================================================================================

def high_frequency_moments(pipe: Pipeline, order: int) -> np.ndarray:
    """
    Coefficients c_0..c_order of rho(z) = i sum_k c_k / z^(k+1) for large |z|.

    Built from the effective blocks only:
        c_0 = rho_0
        c_n = L_P c_(n-1) + sum_(m=0)^(n-2) M_m c_(n-2-m) + s_(n-1)
    with memory moments M_m = W_PQ A_Q^m W_QP and shift moments
    s_m = W_PQ A_Q^m B^dagger delta_corr.

    Returns:
        array of shape (order + 1, d_S, d_S)
    """
    rb = pipe.rb
    d_s = pipe.pq.d_s
    memory: List[np.ndarray] = []
    shifts: List[np.ndarray] = []
    if rb.rank:
        left = rb.w_pq
        coords = rb.q_coordinates(pipe.delta_corr)
        for _ in range(max(order - 1, 0) + 1):
            memory.append(left @ rb.w_qp)
            shifts.append(left @ coords)
            left = left @ rb.a_q
    else:
        memory = [np.zeros_like(rb.l_p)] * (order + 1)
        shifts = [np.zeros(rb.system_dim, dtype=complex)] * (order + 1)

    moments = [vec(pipe.rho_0)]
    for n in range(1, order + 1):
        c = rb.l_p @ moments[n - 1] + shifts[n - 1]
        for m in range(n - 1):
            c = c + memory[m] @ moments[n - 2 - m]
        moments.append(c)
    return np.stack([unvec(c, d_s) for c in moments])


# ================================================================================
# IDENTITY CHECKS
# ================================================================================

@dataclass
class ResolventReport:
    """Relative residuals of the projected-resolvent identities at one z"""

    z: complex
    r_resolvent: float
    r_cross: float
    r_state: float
    trace_defect: float
    left_zero_mode_defect: float
    condition: float
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.r_resolvent, self.r_cross, self.r_state)


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.linalg.norm(b))
    return float(np.linalg.norm(a - b)) / (scale if scale > 0 else 1.0)


def verify_resolvent_identities(model: Union[CompositeModel, Pipeline], z: FrequencyLike,
                                q_seed: int = 0) -> ResolventReport:
    """
    Compare the effective pipeline with brute-force full-space resolvents.

    r_resolvent: restrict [z - L_tot]^-1 embed  vs  [z - L(z)]^-1
    r_cross:     restrict [z - L_tot]^-1 q      vs  [z - L(z)]^-1 L_PQ [z - L_Q]^-1 q
                 for a seeded random Q-space vector q
    r_state:     restrict i [z - L_tot]^-1 vec(rho_tot0)  vs  rho(z)

    Raises:
        NearPoleError: any of the three resolvents is ill-conditioned at z
    """
    pipe = model if isinstance(model, Pipeline) else build_pipeline(model)
    z = as_frequency(z)
    bd, rb = pipe.bd, pipe.rb
    d_s = pipe.pq.d_s
    d2 = d_s * d_s
    big = bd.L_tot.shape[0]

    ev = effective_liouville(bd, pipe.qb, z, rb=rb)
    g_eff = z * np.eye(d2) - ev.l_eff
    g_eff_inv, _ = _solve_checked(g_eff, np.eye(d2, dtype=complex), z, "z - L_eff")
    g_full = z * np.eye(big) - bd.L_tot
    full_condition = float(np.linalg.cond(g_full))
    if not np.isfinite(full_condition) or full_condition > Config.NEAR_POLE_COND:
        raise NearPoleError(z, full_condition, what="z - L_tot")

    brute = bd.restrict @ np.linalg.solve(g_full, bd.embed)
    r_resolvent = _relative(brute, g_eff_inv)

    if rb.rank:
        rng = make_rng(q_seed)
        q_vec = bd.pq.Q @ (rng.standard_normal(big) + 1j * rng.standard_normal(big))
        lhs = bd.restrict @ np.linalg.solve(g_full, q_vec)
        coords, _ = _solve_checked(z * np.eye(rb.rank) - rb.a_q, rb.q_coordinates(q_vec), z, "z - L_Q")
        rhs = g_eff_inv @ (rb.w_pq @ coords)
        r_cross = _relative(rhs, lhs)
    else:
        r_cross = 0.0

    state = frequency_state(pipe, z)
    brute_state = unvec(1j * (bd.restrict @ np.linalg.solve(g_full, vec(pipe.rho_tot0))), d_s)
    r_state = _relative(state.rho_z, brute_state)

    return ResolventReport(
        z=z,
        r_resolvent=r_resolvent,
        r_cross=r_cross,
        r_state=r_state,
        trace_defect=state.trace_defect,
        left_zero_mode_defect=ev.left_zero_mode_defect,
        condition=ev.condition,
    )


def hermiticity_breaking_report(bd: BlockDecomposition, qb: QImageBasis, eps_seq: Sequence[float],
                                scale: float = 1.0) -> List[Dict[str, float]]:
    """
    Imaginary parts of the spectrum of L(i eps) for each eps. Growth modes are
    eigenvalues with Im lambda above 1e-8 * scale; they are counted, not rejected.
    """
    rb = restricted_blocks(bd, qb)
    rows = []
    for eps in eps_seq:
        ev = effective_liouville(bd, qb, 1j * eps, rb=rb)
        imag = np.linalg.eigvals(ev.l_eff).imag
        rows.append({
            "epsilon": float(eps),
            "max_imag": float(np.max(imag)),
            "min_imag": float(np.min(imag)),
            "growth_modes": int(np.sum(imag > 1e-8 * scale)),
        })
    return rows
