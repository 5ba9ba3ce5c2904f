import numpy as np
import pytest

from oqs_eom.dynamics.projection import (
    build_projector_pair,
    decompose_liouville,
    q_image_basis,
    q_spectrum_report,
    split_initial,
)
from oqs_eom.errors import DimensionError, InvalidStateError
from oqs_eom.models import build_initial_total, build_total_hamiltonian, build_total_liouville, maximally_mixed
from oqs_eom.ops import embed_with_env, partial_trace_env, unvec, vec
from oqs_eom.state import build_pipeline
from tests.conftest import random_matrix


def test_projector_algebra(qb3):
    pq = build_projector_pair(qb3.rho_e, 2, 3)
    for name, defect in pq.algebra_defects().items():
        assert defect < 1e-12, name


def test_projector_action(qb3, rng):
    pq = build_projector_pair(qb3.rho_e, 2, 3)
    x = random_matrix(6, rng)
    expected = embed_with_env(partial_trace_env(x, 2, 3), qb3.rho_e)
    np.testing.assert_allclose(unvec(pq.P @ vec(x)), expected, atol=1e-13)


def test_embed_and_restrict(qb3, rng):
    pq = build_projector_pair(qb3.rho_e, 2, 3)
    rho_s = random_matrix(2, rng)
    np.testing.assert_allclose(pq.embed @ vec(rho_s), vec(np.kron(rho_s, qb3.rho_e)), atol=1e-14)
    np.testing.assert_allclose(pq.restrict @ pq.embed, np.eye(4), atol=1e-14)


def test_orthogonal_projector_for_mixed_environment():
    pq = build_projector_pair(maximally_mixed(3), 2, 3)
    np.testing.assert_allclose(pq.P, pq.P.conj().T, atol=1e-14)


def test_projector_rejects_invalid_environment_state():
    with pytest.raises(InvalidStateError):
        build_projector_pair(np.diag([0.7, 0.7]), 2, 2)
    with pytest.raises(DimensionError):
        build_projector_pair(maximally_mixed(2), 2, 3)


def test_blocks_sum_to_liouville(qb3):
    pq = build_projector_pair(qb3.rho_e, 2, 3)
    bd = decompose_liouville(build_total_liouville(qb3), pq)
    assert bd.reconstruction_defect() < 1e-11


def test_decompose_rejects_shape_mismatch(qb3):
    pq = build_projector_pair(qb3.rho_e, 2, 3)
    with pytest.raises(DimensionError):
        decompose_liouville(np.eye(16), pq)


def test_p_block_matches_direct_commutator(qb3, rng):
    pq = build_projector_pair(qb3.rho_e, 2, 3)
    bd = decompose_liouville(build_total_liouville(qb3), pq)
    h = build_total_hamiltonian(qb3)
    rho = np.kron(random_matrix(2, rng), qb3.rho_e)
    direct = pq.P @ vec(h @ rho - rho @ h)
    np.testing.assert_allclose(bd.L_P @ vec(rho), direct, atol=1e-12)


def test_q_image_basis(qb3):
    pq = build_projector_pair(qb3.rho_e, 2, 3)
    qb = q_image_basis(pq)
    assert qb.rank == 32
    assert qb.orthonormality_defect() < 1e-10
    np.testing.assert_allclose(pq.P @ qb.basis, 0, atol=1e-10)
    np.testing.assert_allclose(pq.Q @ qb.basis, qb.basis, atol=1e-10)


def test_q_image_basis_for_trivial_environment():
    pq = build_projector_pair(np.ones((1, 1)), 2, 1)
    assert q_image_basis(pq).rank == 0


def test_restricted_blocks_match_full_blocks(qb3_pipeline):
    pipe = qb3_pipeline
    bd, rb, b = pipe.bd, pipe.rb, pipe.qb.basis
    np.testing.assert_allclose(rb.l_p, bd.restrict @ bd.L_P @ bd.embed, atol=1e-12)
    np.testing.assert_allclose(rb.w_pq, bd.restrict @ bd.L_PQ @ b, atol=1e-12)
    np.testing.assert_allclose(rb.w_qp, b.conj().T @ bd.L_QP @ bd.embed, atol=1e-12)
    np.testing.assert_allclose(rb.a_q, b.conj().T @ bd.L_Q @ b, atol=1e-12)


def test_restricted_blocks_preserve_trace(generic):
    rb = build_pipeline(generic).rb
    identity = vec(np.eye(2))
    np.testing.assert_allclose(identity @ rb.l_p, 0, atol=1e-12)
    np.testing.assert_allclose(identity @ rb.w_pq, 0, atol=1e-12)


def test_q_spectrum_report(qb3_mixed_env):
    pipe = build_pipeline(qb3_mixed_env)
    report = q_spectrum_report(pipe.bd, pipe.qb)
    assert report["rank"] == 32
    # orthogonal projector: L_Q is hermitian on image(Q)
    assert report["max_abs_imag"] < 1e-10


def test_split_initial_product(qb3):
    pq = build_projector_pair(qb3.rho_e, 2, 3)
    rho_0, delta = split_initial(build_initial_total(qb3), pq)
    np.testing.assert_allclose(np.trace(rho_0), 1.0, atol=1e-14)
    np.testing.assert_allclose(delta, 0, atol=1e-14)


def test_split_initial_bell(qb3_bell):
    pq = build_projector_pair(qb3_bell.rho_e, 2, 3)
    rho_tot0 = build_initial_total(qb3_bell)
    rho_0, delta = split_initial(rho_tot0, pq)
    np.testing.assert_allclose(rho_0, np.diag([0.5, 0.5]), atol=1e-14)
    assert np.linalg.norm(delta) > 0.1
    np.testing.assert_allclose(pq.P @ delta, 0, atol=1e-13)
    np.testing.assert_allclose(pq.embed @ vec(rho_0) + delta, vec(rho_tot0), atol=1e-13)
