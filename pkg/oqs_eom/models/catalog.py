"""
oqs_eom/models/catalog.py
Named, reproducible test models.
"""

from typing import Optional, Sequence
import logging

import numpy as np

from oqs_eom.catalog_config import CATALOG_CONFIG, CATALOG_NAMES, QB3_V
from oqs_eom.errors import ConfigError, DimensionError
from oqs_eom.models.composite import (
    CompositeModel,
    Product,
    build_total_hamiltonian,
    gibbs_state,
    pure_state,
)
from oqs_eom.ops.operator_space import pauli

logger = logging.getLogger(__name__)

MAX_REDRAWS = 50


def make_rng(seed: int) -> np.random.Generator:
    """Named 64-bit generator (PCG64) so fixtures are reproducible bit-for-bit"""
    return np.random.Generator(np.random.PCG64(seed))


def gaussian_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    """
    Seeded Gaussian hermitian matrix: g_ii on the diagonal, (g_ij + i h_ij)/sqrt(2)
    above it, mirrored below.
    """
    g = rng.standard_normal((d, d))
    h = rng.standard_normal((d, d))
    upper = np.triu((g + 1j * h) / np.sqrt(2), k=1)
    return upper + upper.conj().T + np.diag(np.diag(g)).astype(complex)


def min_level_gap(h: np.ndarray) -> float:
    energies = np.linalg.eigvalsh(h)
    return float(np.min(np.diff(energies))) if energies.size > 1 else np.inf


def _qb3() -> CompositeModel:
    cfg = CATALOG_CONFIG["QB3"]
    h_e = np.diag(cfg["h_e_diagonal"]).astype(complex)
    return CompositeModel(
        d_s=2,
        d_e=3,
        h_s=0.5 * pauli("z"),
        h_e=h_e,
        couplings=((pauli("x"), cfg["coupling_strength"] * QB3_V),),
        rho_e=gibbs_state(h_e, cfg["beta"]),
        initial=Product(pure_state([1, 1])),
        name="QB3",
    )


def _generic(seed: int, env_dim: int) -> CompositeModel:
    cfg = CATALOG_CONFIG["GENERIC"]
    rng = make_rng(seed)
    for attempt in range(MAX_REDRAWS):
        h_e = cfg["env_scale"] * gaussian_hermitian(env_dim, rng)
        e_x = cfg["coupling_scales"][0] * gaussian_hermitian(env_dim, rng)
        e_z = cfg["coupling_scales"][1] * gaussian_hermitian(env_dim, rng)
        model = CompositeModel(
            d_s=2,
            d_e=env_dim,
            h_s=0.5 * pauli("z"),
            h_e=h_e,
            couplings=((pauli("x"), e_x), (pauli("z"), e_z)),
            rho_e=gibbs_state(h_e, cfg["beta"]),
            initial=Product(pure_state([1, 0])),
            name=f"GENERIC(seed={seed},d_E={env_dim})",
        )
        h_tot = build_total_hamiltonian(model)
        energies = np.linalg.eigvalsh(h_tot)
        spread = energies[-1] - energies[0]
        if min_level_gap(h_tot) >= 1e-6 * spread:
            return model
        logger.warning(f"⚠️ GENERIC draw {attempt} degenerate, re-drawing")
    raise ConfigError(f"could not draw a non-degenerate GENERIC model in {MAX_REDRAWS} attempts")


def _decoupled(seed: int, env_dim: int) -> CompositeModel:
    cfg = CATALOG_CONFIG["DECOUPLED"]
    rng = make_rng(seed)
    h_e = cfg["env_scale"] * gaussian_hermitian(env_dim, rng)
    e_z = cfg["coupling_scales"][0] * gaussian_hermitian(env_dim, rng)
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    model = CompositeModel(
        d_s=2,
        d_e=env_dim,
        h_s=0.5 * pauli("z"),
        h_e=h_e,
        couplings=((pauli("z"), e_z),),
        rho_e=gibbs_state(h_e, cfg["beta"]),
        initial=Product(pure_state([1, 0])),
        name=f"DECOUPLED(seed={seed},d_E={env_dim})",
        sector_projectors=(p0, p1),
    )
    return model.with_initial(sector_weighted_initial(model, (0.5, 0.5)))


def _degenerate(seed: int, env_dim: int) -> CompositeModel:
    cfg = CATALOG_CONFIG["DEGENERATE"]
    rng = make_rng(seed)
    h_e = cfg["env_scale"] * gaussian_hermitian(env_dim, rng)
    e_hop = cfg["coupling_scales"][0] * gaussian_hermitian(env_dim, rng)
    e_diag = cfg["coupling_scales"][1] * gaussian_hermitian(env_dim, rng)
    hop = np.zeros((3, 3), dtype=complex)
    hop[1, 2] = hop[2, 1] = 1.0
    model = CompositeModel(
        d_s=3,
        d_e=env_dim,
        h_s=np.diag(cfg["h_s_diagonal"]).astype(complex),
        h_e=h_e,
        couplings=((hop, e_hop), (np.diag([0.5, -0.3, 0.2]).astype(complex), e_diag)),
        rho_e=gibbs_state(h_e, cfg["beta"]),
        initial=Product(pure_state([1, 0, 0])),
        name=f"DEGENERATE(seed={seed},d_E={env_dim})",
        sector_projectors=(np.diag([1.0, 0, 0]).astype(complex), np.diag([0, 1.0, 1.0]).astype(complex)),
    )
    return model.with_initial(sector_weighted_initial(model, (0.5, 0.5)))


def catalog_model(name: str, seed: int = 0, env_dim: Optional[int] = None) -> CompositeModel:
    """
    Build a named fixture.

    Args:
        name: one of QB3, GENERIC, DECOUPLED, DEGENERATE
        seed: seed of the PCG64 generator (ignored by QB3)
        env_dim: environment dimension for the seeded models

    Returns:
        CompositeModel
    """
    key = name.upper()
    if key not in CATALOG_CONFIG:
        raise ConfigError(f"unknown catalog model '{name}' (choose from {CATALOG_NAMES})", field="model.catalog")
    if key == "QB3":
        return _qb3()
    env_dim = env_dim or CATALOG_CONFIG[key]["default_env_dim"]
    if env_dim < 2:
        raise DimensionError("environment dimension must be at least 2")
    builders = {"GENERIC": _generic, "DECOUPLED": _decoupled, "DEGENERATE": _degenerate}
    return builders[key](seed, env_dim)


def sector_representatives(m: CompositeModel) -> list:
    """First system basis state inside each conserved sector"""
    reps = []
    for proj in m.sector_projectors:
        diag = np.real(np.diag(proj))
        reps.append(int(np.argmax(diag > 0.5)))
    return reps


def sector_weighted_initial(m: CompositeModel, weights: Sequence[float]) -> Product:
    """
    Product state whose system factor is the pure superposition
    sum_s sqrt(w_s) |r_s>, with r_s the representative level of sector s.
    """
    if not m.sector_projectors:
        raise ConfigError(f"model {m.name} declares no conserved sectors", field="initial.weights")
    if len(weights) != len(m.sector_projectors):
        raise ConfigError(
            f"expected {len(m.sector_projectors)} sector weights, got {len(weights)}", field="initial.weights"
        )
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ConfigError("sector weights must be non-negative and sum to 1", field="initial.weights")
    amplitudes = np.zeros(m.d_s, dtype=complex)
    for weight, level in zip(w, sector_representatives(m)):
        amplitudes[level] = np.sqrt(weight)
    return Product(pure_state(amplitudes))


def sector_initial(m: CompositeModel, index: int) -> Product:
    """Product state with all weight on sector `index`"""
    weights = np.zeros(len(m.sector_projectors))
    weights[index] = 1.0
    return sector_weighted_initial(m, weights)
