"""
oqs_eom/ops/operator_space.py
Dense linear algebra on operators and superoperators.

Conventions used everywhere in the package:
    - row-major vectorization, (i, j) -> i*d + j, so that
      vec(A X B) = (A kron B^T) vec(X)
    - tensor ordering system (x) environment
    - hbar = 1, all energies dimensionless
"""

from dataclasses import dataclass, field
from typing import Union
import logging

import numpy as np

from oqs_eom.config import Config
from oqs_eom.errors import DimensionError, InvalidStateError

logger = logging.getLogger(__name__)


# ================================================================================
# VALUE TYPES
# ================================================================================

@dataclass(frozen=True)
class Operator:
    """A d x d complex matrix on a Hilbert space"""

    data: np.ndarray
    hermitian: bool = False
    name: str = "operator"

    def __post_init__(self):
        arr = np.array(self.data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise DimensionError(f"operator must be a non-empty square matrix, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.hermitian:
            check_hermitian(arr, self.name)

    @property
    def dim(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class DensityOperator:
    """Unit-trace, hermitian, positive semidefinite operator"""

    op: Operator
    trace_tol: float = field(default_factory=lambda: Config.TRACE_TOL)
    psd_tol: float = field(default_factory=lambda: Config.PSD_TOL)

    def __post_init__(self):
        if not isinstance(self.op, Operator):
            object.__setattr__(self, "op", Operator(self.op))
        validate_density(self.op.data, self.trace_tol, self.psd_tol)

    @property
    def data(self) -> np.ndarray:
        return self.op.data

    @property
    def dim(self) -> int:
        return self.op.dim


@dataclass(frozen=True)
class SuperOperator:
    """A D x D matrix acting on row-major vectorized operators, D = d^2"""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"superoperator must be square, got shape {arr.shape}")
        _operator_dim(arr.shape[0])
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def op_dim(self) -> int:
        return _operator_dim(self.data.shape[0])

    def apply(self, x: "OperatorLike") -> np.ndarray:
        return unvec(self.data @ vec(x), self.op_dim)


OperatorLike = Union[np.ndarray, Operator, DensityOperator]


def as_matrix(x: OperatorLike) -> np.ndarray:
    """Plain complex ndarray view of any operator-like input"""
    if isinstance(x, (Operator, DensityOperator)):
        return x.data
    return np.asarray(x, dtype=complex)


def _operator_dim(length: int) -> int:
    d = int(round(np.sqrt(length)))
    if d * d != length or d == 0:
        raise DimensionError(f"length {length} is not a perfect square")
    return d


# ================================================================================
# VALIDATION
# ================================================================================

def hermiticity_defect(a: np.ndarray) -> float:
    """max |A - A^dagger| relative to max |A| (0 for the zero matrix)"""
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T))) / scale


def check_hermitian(a: np.ndarray, name: str = "matrix", tol: float = None) -> None:
    tol = Config.HERMITIAN_TOL if tol is None else tol
    defect = hermiticity_defect(np.asarray(a))
    if defect > tol:
        raise InvalidStateError(f"{name} is not hermitian (relative defect {defect:.3e} > {tol:.1e})")


def validate_density(rho: np.ndarray, trace_tol: float = None, psd_tol: float = None) -> None:
    """Raise InvalidStateError unless rho is a density matrix within tolerance"""
    trace_tol = Config.TRACE_TOL if trace_tol is None else trace_tol
    psd_tol = Config.PSD_TOL if psd_tol is None else psd_tol
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density operator must be square, got shape {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"trace {tr.real:.12g}{tr.imag:+.3g}i differs from 1 by more than {trace_tol:.1e}")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > psd_tol:
        raise InvalidStateError(f"density operator not hermitian (defect {herm:.3e})")
    min_eig = float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)))
    if min_eig < -psd_tol:
        raise InvalidStateError(f"density operator not positive semidefinite (min eigenvalue {min_eig:.3e})")


# ================================================================================
# VECTORIZATION
# ================================================================================

def vec(x: OperatorLike) -> np.ndarray:
    """Row-major stacking of a square operator into a length-d^2 vector"""
    a = as_matrix(x)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"vec expects a square matrix, got shape {a.shape}")
    return a.reshape(-1).copy()


def unvec(v: np.ndarray, d: int = None) -> np.ndarray:
    """Inverse of vec; d is inferred when omitted"""
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1:
        raise DimensionError(f"unvec expects a vector, got shape {v.shape}")
    if d is None:
        d = _operator_dim(v.size)
    if v.size != d * d:
        raise DimensionError(f"vector of length {v.size} cannot be reshaped to {d}x{d}")
    return v.reshape(d, d).copy()


def hs_inner(a: OperatorLike, b: OperatorLike) -> complex:
    """Hilbert-Schmidt scalar product Tr(A^dagger B)"""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


# ================================================================================
# COMPOSITE SYSTEMS
# ================================================================================

def partial_trace_env(x: OperatorLike, d_s: int, d_e: int) -> np.ndarray:
    """Tr_E of an operator on H_S (x) H_E"""
    a = as_matrix(x)
    if a.shape != (d_s * d_e, d_s * d_e):
        raise DimensionError(f"operator of shape {a.shape} does not factor as {d_s}x{d_e}")
    return np.einsum("iaja->ij", a.reshape(d_s, d_e, d_s, d_e))


def embed_with_env(rho_s: OperatorLike, rho_e: OperatorLike) -> np.ndarray:
    """rho_S (x) rho_E"""
    a, b = as_matrix(rho_s), as_matrix(rho_e)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != a.shape[1] or b.shape[0] != b.shape[1]:
        raise DimensionError("embed_with_env expects square factors")
    return np.kron(a, b)


def commutator_superop(h: OperatorLike, check: bool = True) -> np.ndarray:
    """
    Matrix of X -> [H, X] under row-major vectorization: H (x) I - I (x) H^T.

    Args:
        h: Hamiltonian
        check: reject non-hermitian input (tests may switch this off)

    Returns:
        D x D complex matrix
    """
    a = as_matrix(h)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"Hamiltonian must be square, got shape {a.shape}")
    if check:
        check_hermitian(a, "Hamiltonian")
    eye = np.eye(a.shape[0], dtype=complex)
    return np.kron(a, eye) - np.kron(eye, a.T)


def pauli(name: str) -> np.ndarray:
    table = {
        "x": [[0, 1], [1, 0]],
        "y": [[0, -1j], [1j, 0]],
        "z": [[1, 0], [0, -1]],
        "i": [[1, 0], [0, 1]],
    }
    return np.array(table[name.lower()], dtype=complex)


def basis_operator(d: int, i: int, j: int) -> np.ndarray:
    """|i><j| on a d-dimensional space"""
    e = np.zeros((d, d), dtype=complex)
    e[i, j] = 1.0
    return e
