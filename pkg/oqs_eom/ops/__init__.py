from oqs_eom.ops.operator_space import (
    Operator,
    DensityOperator,
    SuperOperator,
    as_matrix,
    vec,
    unvec,
    hs_inner,
    partial_trace_env,
    embed_with_env,
    commutator_superop,
    check_hermitian,
    validate_density,
    hermiticity_defect,
    pauli,
    basis_operator,
)

__all__ = [
    "Operator",
    "DensityOperator",
    "SuperOperator",
    "as_matrix",
    "vec",
    "unvec",
    "hs_inner",
    "partial_trace_env",
    "embed_with_env",
    "commutator_superop",
    "check_hermitian",
    "validate_density",
    "hermiticity_defect",
    "pauli",
    "basis_operator",
]
