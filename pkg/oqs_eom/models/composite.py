"""
oqs_eom/models/composite.py
System (x) environment models, total Hamiltonian / Liouville and initial states.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple, Union
import hashlib
import logging

import numpy as np
import scipy.linalg as la

from oqs_eom.cache import eigen_cache
from oqs_eom.config import Config
from oqs_eom.errors import DimensionError, InvalidStateError
from oqs_eom.ops.operator_space import (
    DensityOperator,
    Operator,
    as_matrix,
    check_hermitian,
    commutator_superop,
    embed_with_env,
    partial_trace_env,
    pauli,
    validate_density,
)

logger = logging.getLogger(__name__)


def _frozen(a, shape: Tuple[int, int], name: str, hermitian: bool = False) -> np.ndarray:
    arr = as_matrix(a)
    if arr.shape != shape:
        raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
    return Operator(arr, hermitian=hermitian, name=name).data


def _density(a, shape: Tuple[int, int], name: str) -> np.ndarray:
    return DensityOperator(Operator(_frozen(a, shape, name), name=name)).data


# ================================================================================
# INITIAL STATES
# ================================================================================

@dataclass(frozen=True)
class Product:
    """rho_tot0 = rho_0 (x) rho_E"""

    rho_0: np.ndarray


@dataclass(frozen=True)
class FullMatrix:
    """rho_tot0 given explicitly"""

    rho_tot0: np.ndarray


@dataclass(frozen=True)
class ProductPlusCorrelation:
    """rho_tot0 = rho_0 (x) rho_E + delta, with Tr_E delta = 0"""

    rho_0: np.ndarray
    delta: np.ndarray


InitialStateSpec = Union[Product, FullMatrix, ProductPlusCorrelation]


# ================================================================================
# MODEL
# ================================================================================

@dataclass(frozen=True)
class CompositeModel:
    """
    H_tot = H_S (x) 1 + 1 (x) H_E + sum_k S_k (x) E_k together with the
    environment reference state rho_E and an initial total state.
    """

    d_s: int
    d_e: int
    h_s: np.ndarray
    h_e: np.ndarray
    couplings: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    rho_e: np.ndarray
    initial: InitialStateSpec
    name: str = "inline"
    # Conserved system projectors (block sectors); empty for generic models
    sector_projectors: Tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.d_s <= 0 or self.d_e <= 0:
            raise DimensionError("model dimensions must be positive")
        s, e = (self.d_s, self.d_s), (self.d_e, self.d_e)
        object.__setattr__(self, "h_s", _frozen(self.h_s, s, "H_S", hermitian=True))
        object.__setattr__(self, "h_e", _frozen(self.h_e, e, "H_E", hermitian=True))
        pairs = tuple(
            (_frozen(s_k, s, f"couplings[{k}].S", hermitian=True),
             _frozen(e_k, e, f"couplings[{k}].E", hermitian=True))
            for k, (s_k, e_k) in enumerate(self.couplings)
        )
        object.__setattr__(self, "couplings", pairs)
        object.__setattr__(self, "rho_e", _density(self.rho_e, e, "rho_E"))
        object.__setattr__(
            self, "sector_projectors",
            tuple(_frozen(p, s, "sector projector", hermitian=True) for p in self.sector_projectors),
        )

    @property
    def dim(self) -> int:
        return self.d_s * self.d_e

    @property
    def coupled(self) -> bool:
        return any(np.any(s_k) and np.any(e_k) for s_k, e_k in self.couplings)

    def with_initial(self, initial: InitialStateSpec) -> "CompositeModel":
        return replace(self, initial=initial)

    def with_environment_state(self, rho_e) -> "CompositeModel":
        """Swap rho_E; product initial states keep their system factor"""
        return replace(self, rho_e=np.asarray(rho_e, dtype=complex))

    def with_coupling_scale(self, s: float) -> "CompositeModel":
        scaled = tuple((s_k, s * e_k) for s_k, e_k in self.couplings)
        return replace(self, couplings=scaled, name=f"{self.name}*{s:g}")


# ================================================================================
# CONSTRUCTION
# ================================================================================

def build_total_hamiltonian(m: CompositeModel) -> np.ndarray:
    eye_s = np.eye(m.d_s, dtype=complex)
    eye_e = np.eye(m.d_e, dtype=complex)
    h = np.kron(m.h_s, eye_e) + np.kron(eye_s, m.h_e)
    for s_k, e_k in m.couplings:
        h = h + np.kron(s_k, e_k)
    return (h + h.conj().T) / 2


def build_total_liouville(m: CompositeModel) -> np.ndarray:
    return commutator_superop(build_total_hamiltonian(m))


def build_initial_total(m: CompositeModel) -> np.ndarray:
    """
    Total initial density operator for the model's InitialStateSpec.

    Raises:
        InvalidStateError: trace / positivity violation, or a correlation
            part that is not in Q-space (Tr_E delta != 0).
    """
    spec = m.initial
    if isinstance(spec, Product):
        rho = embed_with_env(_density(spec.rho_0, (m.d_s, m.d_s), "rho_0"), m.rho_e)
    elif isinstance(spec, FullMatrix):
        rho = np.array(_frozen(spec.rho_tot0, (m.dim, m.dim), "rho_tot0"))
    elif isinstance(spec, ProductPlusCorrelation):
        rho_0 = _density(spec.rho_0, (m.d_s, m.d_s), "rho_0")
        delta = _frozen(spec.delta, (m.dim, m.dim), "delta")
        check_hermitian(delta, "delta", tol=Config.PSD_TOL)
        if abs(np.trace(delta)) > Config.HERMITIAN_TOL:
            raise InvalidStateError(f"correlation part is not traceless (Tr = {np.trace(delta):.3e})")
        reduced = partial_trace_env(delta, m.d_s, m.d_e)
        leak = float(np.max(np.abs(reduced))) * float(np.max(np.abs(m.rho_e)))
        if leak > Config.Q_SPACE_TOL:
            raise InvalidStateError(f"correlation part not in Q-space (|P delta| = {leak:.3e})")
        rho = embed_with_env(rho_0, m.rho_e) + delta
    else:
        raise InvalidStateError(f"unknown initial state specification {type(spec).__name__}")
    validate_density(rho)
    return rho


# ================================================================================
# EIGENDECOMPOSITION
# ================================================================================

@dataclass(frozen=True)
class Eigendecomposition:
    """Eigenpairs of H_tot (ascending energies)"""

    energies: np.ndarray
    vectors: np.ndarray
    residual: float

    @property
    def bohr_frequencies(self) -> np.ndarray:
        """omega_ab = eps_a - eps_b"""
        return self.energies[:, None] - self.energies[None, :]

    @property
    def spectral_range(self) -> float:
        return float(self.energies[-1] - self.energies[0])


def eigendecompose_hamiltonian(h: np.ndarray) -> Eigendecomposition:
    energies, vectors = la.eigh(h)
    recon = vectors @ np.diag(energies) @ vectors.conj().T
    norm = float(np.linalg.norm(h)) or 1.0
    residual = float(np.linalg.norm(h - recon)) / norm
    if residual > 1e-10:
        logger.warning(f"⚠️ Eigendecomposition residual {residual:.3e} above 1e-10")
    return Eigendecomposition(energies=energies, vectors=vectors, residual=residual)


def eigendecompose(m: CompositeModel) -> Eigendecomposition:
    """Cached eigendecomposition of the model's total Hamiltonian"""
    key = fingerprint(m, include_initial=False)
    cached = eigen_cache.get(key)
    if cached is not None:
        return cached
    result = eigendecompose_hamiltonian(build_total_hamiltonian(m))
    eigen_cache.set(key, result)
    return result


def liouville_scale(m: CompositeModel) -> float:
    """Spectral radius of L_tot (largest Bohr frequency); 1 for a trivial Hamiltonian"""
    spread = eigendecompose(m).spectral_range
    return spread if spread > 0 else 1.0


# ================================================================================
# HELPERS
# ================================================================================

def fingerprint(m: CompositeModel, include_initial: bool = True) -> str:
    """SHA-256 content digest over every matrix of the model"""
    digest = hashlib.sha256()
    digest.update(f"{m.d_s}x{m.d_e}".encode("utf-8"))
    arrays = [m.h_s, m.h_e, m.rho_e]
    for s_k, e_k in m.couplings:
        arrays.extend([s_k, e_k])
    arrays.extend(m.sector_projectors)
    if include_initial:
        spec = m.initial
        digest.update(type(spec).__name__.encode("utf-8"))
        if isinstance(spec, Product):
            arrays.append(spec.rho_0)
        elif isinstance(spec, FullMatrix):
            arrays.append(spec.rho_tot0)
        else:
            arrays.extend([spec.rho_0, spec.delta])
    for a in arrays:
        digest.update(np.ascontiguousarray(a, dtype=np.complex128).tobytes())
    return digest.hexdigest()


def gibbs_state(h, beta: float = 1.0) -> np.ndarray:
    """exp(-beta H) / Tr exp(-beta H), evaluated in the eigenbasis"""
    energies, vectors = la.eigh(as_matrix(h))
    weights = np.exp(-beta * (energies - energies.min()))
    weights = weights / weights.sum()
    rho = (vectors * weights) @ vectors.conj().T
    return (rho + rho.conj().T) / 2


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


def pure_state(amplitudes: Sequence[complex]) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def bell_state(d_s: int = 2, d_e: int = 2) -> np.ndarray:
    """(|0,0> + |1,1>)/sqrt(2) on C^{d_s} (x) C^{d_e}"""
    if d_s < 2 or d_e < 2:
        raise DimensionError("Bell state needs both factors of dimension >= 2")
    psi = np.zeros(d_s * d_e, dtype=complex)
    psi[0] = psi[1 * d_e + 1] = 1 / np.sqrt(2)
    return np.outer(psi, psi.conj())


def project_to_q_space(x, rho_e, d_s: int, d_e: int) -> np.ndarray:
    """X - Tr_E(X) (x) rho_E"""
    x = as_matrix(x)
    return x - embed_with_env(partial_trace_env(x, d_s, d_e), rho_e)


def correlated_initial(m: CompositeModel, w, lam: float,
                       rho_0=None, system_op=None) -> ProductPlusCorrelation:
    """
    ProductPlusCorrelation with delta = lam * Q(X_S (x) W).

    Args:
        m: model supplying rho_E and dimensions
        w: hermitian environment operator
        lam: correlation strength
        rho_0: system state (defaults to the model's product factor or maximally mixed)
        system_op: hermitian system operator X_S (defaults to sigma_x on a qubit)
    """
    if rho_0 is None:
        rho_0 = m.initial.rho_0 if isinstance(m.initial, (Product, ProductPlusCorrelation)) else maximally_mixed(m.d_s)
    if system_op is None:
        if m.d_s != 2:
            raise DimensionError("default system operator sigma_x needs d_S = 2")
        system_op = pauli("x")
    delta = lam * project_to_q_space(np.kron(as_matrix(system_op), as_matrix(w)), m.rho_e, m.d_s, m.d_e)
    delta = (delta + delta.conj().T) / 2
    return ProductPlusCorrelation(rho_0=np.asarray(rho_0, dtype=complex), delta=delta)


def reduced_initial(m: CompositeModel) -> np.ndarray:
    return partial_trace_env(build_initial_total(m), m.d_s, m.d_e)
