from oqs_eom.models.composite import (
    CompositeModel,
    Product,
    FullMatrix,
    ProductPlusCorrelation,
    InitialStateSpec,
    Eigendecomposition,
    build_total_hamiltonian,
    build_total_liouville,
    build_initial_total,
    eigendecompose,
    liouville_scale,
    fingerprint,
    gibbs_state,
    maximally_mixed,
    pure_state,
    bell_state,
    correlated_initial,
    project_to_q_space,
)
from oqs_eom.models.catalog import (
    catalog_model,
    gaussian_hermitian,
    sector_weighted_initial,
    sector_initial,
)

__all__ = [
    "CompositeModel",
    "Product",
    "FullMatrix",
    "ProductPlusCorrelation",
    "InitialStateSpec",
    "Eigendecomposition",
    "build_total_hamiltonian",
    "build_total_liouville",
    "build_initial_total",
    "eigendecompose",
    "liouville_scale",
    "fingerprint",
    "gibbs_state",
    "maximally_mixed",
    "pure_state",
    "bell_state",
    "correlated_initial",
    "project_to_q_space",
    "catalog_model",
    "gaussian_hermitian",
    "sector_weighted_initial",
    "sector_initial",
]
