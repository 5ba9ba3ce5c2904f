"""
oqs_eom/state.py
Everything derived once per model and shared by all frequency evaluations.
"""

from dataclasses import dataclass
import logging

import numpy as np

from oqs_eom.cache import pipeline_cache
from oqs_eom.dynamics.projection import (
    BlockDecomposition,
    ProjectorPair,
    QImageBasis,
    RestrictedBlocks,
    build_projector_pair,
    decompose_liouville,
    q_image_basis,
    restricted_blocks,
    split_initial,
)
from oqs_eom.models.composite import (
    CompositeModel,
    build_initial_total,
    build_total_liouville,
    fingerprint,
    liouville_scale,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Pipeline:
    """Model plus its projector pair, blocks, Q-image basis and split initial state"""

    model: CompositeModel
    pq: ProjectorPair
    bd: BlockDecomposition
    qb: QImageBasis
    rb: RestrictedBlocks
    rho_tot0: np.ndarray
    rho_0: np.ndarray
    delta_corr: np.ndarray
    scale: float

    @property
    def correlated(self) -> bool:
        return bool(np.any(self.delta_corr))


def build_pipeline(m: CompositeModel) -> Pipeline:
    """Cached by the model fingerprint (initial state included)"""
    key = fingerprint(m)
    cached = pipeline_cache.get(key)
    if cached is not None:
        return cached

    logger.debug(f"🔨 Building pipeline for {m.name} (D = {m.dim ** 2})")
    pq = build_projector_pair(m.rho_e, m.d_s, m.d_e)
    bd = decompose_liouville(build_total_liouville(m), pq)
    qb = q_image_basis(pq)
    rho_tot0 = build_initial_total(m)
    rho_0, delta_corr = split_initial(rho_tot0, pq)
    pipe = Pipeline(
        model=m,
        pq=pq,
        bd=bd,
        qb=qb,
        rb=restricted_blocks(bd, qb),
        rho_tot0=rho_tot0,
        rho_0=rho_0,
        delta_corr=delta_corr,
        scale=liouville_scale(m),
    )
    pipeline_cache.set(key, pipe)
    return pipe
