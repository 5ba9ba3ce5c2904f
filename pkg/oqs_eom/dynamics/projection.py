"""
oqs_eom/dynamics/projection.py
Projector pair P = Tr_E(.) (x) rho_E, Q = 1 - P, the four Liouville blocks,
an orthonormal basis of image(Q) and the restricted-coordinate blocks used
by every frequency-domain solve.
"""

from dataclasses import dataclass
from typing import Dict, Tuple
import logging

import numpy as np
import scipy.linalg as la

from oqs_eom.config import Config
from oqs_eom.errors import DimensionError, SolverError
from oqs_eom.ops.operator_space import DensityOperator, Operator, as_matrix, partial_trace_env, validate_density, vec

logger = logging.getLogger(__name__)

CORRELATION_FLOOR = 1e-14


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=complex)
    a.setflags(write=False)
    return a


# ================================================================================
# PROJECTOR PAIR
# ================================================================================

@dataclass(frozen=True)
class ProjectorPair:
    """
    P and Q as dense D x D matrices, plus the factorization P = embed @ restrict.

    embed:    d_S^2 -> D,  rho_S |-> vec(rho_S (x) rho_E)
    restrict: D -> d_S^2,  X |-> vec(Tr_E X)
    """

    P: np.ndarray
    Q: np.ndarray
    rho_e: np.ndarray
    d_s: int
    d_e: int
    embed: np.ndarray
    restrict: np.ndarray

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def algebra_defects(self) -> Dict[str, float]:
        """Entrywise defects of P^2 = P, Q^2 = Q, PQ = QP = 0, P + Q = 1"""
        p, q = self.P, self.Q
        eye = np.eye(self.dim)
        return {
            "p_idempotent": float(np.max(np.abs(p @ p - p))),
            "q_idempotent": float(np.max(np.abs(q @ q - q))),
            "pq": float(np.max(np.abs(p @ q))),
            "qp": float(np.max(np.abs(q @ p))),
            "completeness": float(np.max(np.abs(p + q - eye))),
        }


def build_projector_pair(rho_e, d_s: int, d_e: int) -> ProjectorPair:
    """
    Build P X = Tr_E(X) (x) rho_E under the row-major vec convention.

    Args:
        rho_e: environment reference state (d_E x d_E density operator)
        d_s: system dimension
        d_e: environment dimension

    Returns:
        ProjectorPair
    """
    rho_e = as_matrix(rho_e)
    if rho_e.shape != (d_e, d_e):
        raise DimensionError(f"rho_E has shape {rho_e.shape}, expected ({d_e}, {d_e})")
    rho_e = DensityOperator(Operator(rho_e, name="rho_E")).data

    eye_s = np.eye(d_s, dtype=complex)
    eye_e = np.eye(d_e, dtype=complex)
    big = (d_s * d_e) ** 2
    # vec index of a total operator factors as (i, a, j, b) with i, j system and a, b environment
    embed = np.einsum("ki,lj,ab->kalbij", eye_s, eye_s, rho_e).reshape(big, d_s * d_s)
    restrict = np.einsum("ik,jl,ab->ijkalb", eye_s, eye_s, eye_e).reshape(d_s * d_s, big)

    p = embed @ restrict
    q = np.eye(big, dtype=complex) - p
    return ProjectorPair(
        P=_readonly(p),
        Q=_readonly(q),
        rho_e=_readonly(rho_e),
        d_s=d_s,
        d_e=d_e,
        embed=_readonly(embed),
        restrict=_readonly(restrict),
    )


# ================================================================================
# BLOCK DECOMPOSITION
# ================================================================================

@dataclass(frozen=True)
class BlockDecomposition:
    """L_tot split into P L P, P L Q, Q L P and Q L Q (all D x D)"""

    L_P: np.ndarray
    L_PQ: np.ndarray
    L_QP: np.ndarray
    L_Q: np.ndarray
    L_tot: np.ndarray
    pq: ProjectorPair

    @property
    def embed(self) -> np.ndarray:
        return self.pq.embed

    @property
    def restrict(self) -> np.ndarray:
        return self.pq.restrict

    def reconstruction_defect(self) -> float:
        total = self.L_P + self.L_PQ + self.L_QP + self.L_Q
        return float(np.max(np.abs(total - self.L_tot)))


def decompose_liouville(l_tot, pq: ProjectorPair) -> BlockDecomposition:
    l_tot = np.asarray(l_tot, dtype=complex)
    if l_tot.shape != pq.P.shape:
        raise DimensionError(f"Liouville of shape {l_tot.shape} does not match projector of shape {pq.P.shape}")
    p, q = pq.P, pq.Q
    return BlockDecomposition(
        L_P=_readonly(p @ l_tot @ p),
        L_PQ=_readonly(p @ l_tot @ q),
        L_QP=_readonly(q @ l_tot @ p),
        L_Q=_readonly(q @ l_tot @ q),
        L_tot=_readonly(l_tot),
        pq=pq,
    )


# ================================================================================
# Q-IMAGE BASIS
# ================================================================================

@dataclass(frozen=True)
class QImageBasis:
    """Orthonormal D x (D - d_S^2) matrix whose columns span image(Q)"""

    basis: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def orthonormality_defect(self) -> float:
        b = self.basis
        return float(np.max(np.abs(b.conj().T @ b - np.eye(self.rank)))) if self.rank else 0.0


def q_image_basis(pq: ProjectorPair) -> QImageBasis:
    """
    Orthonormal basis of image(Q) from a column-pivoted QR of Q.

    Raises:
        SolverError: numerical rank differs from D - d_S^2 (malformed projector)
    """
    expected = pq.dim - pq.d_s ** 2
    if expected == 0:
        return QImageBasis(basis=_readonly(np.zeros((pq.dim, 0), dtype=complex)))

    q_factor, r_factor, _ = la.qr(np.asarray(pq.Q), pivoting=True, mode="economic")
    diag = np.abs(np.diag(r_factor))
    rank = int(np.sum(diag > Config.RANK_TOL * diag[0]))
    if rank != expected:
        raise SolverError(f"Q has numerical rank {rank}, expected {expected} (malformed projector)")

    basis = q_factor[:, :rank]
    leak = float(np.max(np.abs(pq.P @ basis)))
    if leak > 1e-10:
        logger.warning(f"⚠️ Q-image basis leaks into P-space ({leak:.3e})")
    return QImageBasis(basis=_readonly(basis))


# ================================================================================
# RESTRICTED BLOCKS
# ================================================================================

@dataclass(frozen=True)
class RestrictedBlocks:
    """
    The four blocks in restricted coordinates (d = d_S^2, r = rank of Q):

        l_p  (d x d)  restrict L embed
        w_pq (d x r)  restrict L B
        w_qp (r x d)  B^dagger Q L embed
        a_q  (r x r)  B^dagger Q L B   (L_Q on image(Q))
    """

    l_p: np.ndarray
    w_pq: np.ndarray
    w_qp: np.ndarray
    a_q: np.ndarray
    basis: np.ndarray

    @property
    def system_dim(self) -> int:
        return self.l_p.shape[0]

    @property
    def rank(self) -> int:
        return self.a_q.shape[0]

    def q_coordinates(self, y: np.ndarray) -> np.ndarray:
        return self.basis.conj().T @ y


def restricted_blocks(bd: BlockDecomposition, qb: QImageBasis) -> RestrictedBlocks:
    b = qb.basis
    l_tot, embed, restrict = bd.L_tot, bd.embed, bd.restrict
    l_embed = l_tot @ embed
    l_b = l_tot @ b
    return RestrictedBlocks(
        l_p=_readonly(restrict @ l_embed),
        w_pq=_readonly(restrict @ l_b),
        w_qp=_readonly(b.conj().T @ (bd.pq.Q @ l_embed)),
        a_q=_readonly(b.conj().T @ (bd.pq.Q @ l_b)),
        basis=b,
    )


def q_spectrum_report(bd: BlockDecomposition, qb: QImageBasis) -> Dict[str, float]:
    """
    Spectrum of L_Q on image(Q). For a non-orthogonal P (Gibbs rho_E) it need
    not be real; the largest imaginary part is reported.
    """
    rb = restricted_blocks(bd, qb)
    if rb.rank == 0:
        return {"rank": 0, "max_abs_imag": 0.0, "max_imag": 0.0, "min_imag": 0.0, "spectral_radius": 0.0}
    eigenvalues = la.eigvals(rb.a_q)
    return {
        "rank": rb.rank,
        "max_abs_imag": float(np.max(np.abs(eigenvalues.imag))),
        "max_imag": float(np.max(eigenvalues.imag)),
        "min_imag": float(np.min(eigenvalues.imag)),
        "spectral_radius": float(np.max(np.abs(eigenvalues))),
    }


# ================================================================================
# INITIAL STATE SPLIT
# ================================================================================

def split_initial(rho_tot0, pq: ProjectorPair) -> Tuple[np.ndarray, np.ndarray]:
    """
    rho_tot0 -> (rho_0, delta_corr) with rho_0 = Tr_E rho_tot0 and
    delta_corr = Q vec(rho_tot0).
    """
    rho = as_matrix(rho_tot0)
    if rho.shape != (pq.d_s * pq.d_e, pq.d_s * pq.d_e):
        raise DimensionError(f"initial state of shape {rho.shape} does not match {pq.d_s}x{pq.d_e}")
    validate_density(rho)
    rho_0 = partial_trace_env(rho, pq.d_s, pq.d_e)
    delta_corr = pq.Q @ vec(rho)
    # product states leave only roundoff in Q-space
    if float(np.max(np.abs(delta_corr))) <= CORRELATION_FLOOR:
        delta_corr = np.zeros_like(delta_corr)
    return rho_0, delta_corr
