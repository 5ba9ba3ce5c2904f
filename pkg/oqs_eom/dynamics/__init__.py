
from .projection import (
    BlockDecomposition,
    ProjectorPair,
    QImageBasis,
    RestrictedBlocks,
    build_projector_pair,
    decompose_liouville,
    q_image_basis,
    restricted_blocks,
)
