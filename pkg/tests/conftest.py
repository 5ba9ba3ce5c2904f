import numpy as np
import pytest

from oqs_eom.models import (
    FullMatrix,
    Product,
    bell_state,
    catalog_model,
    maximally_mixed,
    pure_state,
)
from oqs_eom.state import build_pipeline


def random_matrix(d, rng):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def random_density(d, rng):
    a = random_matrix(d, rng)
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qb3():
    return catalog_model("QB3")


@pytest.fixture
def qb3_bell(qb3):
    return qb3.with_initial(FullMatrix(bell_state(2, 3)))


@pytest.fixture
def qb3_mixed_env(qb3):
    """QB3 with an orthogonal projector (maximally mixed rho_E)"""
    return qb3.with_environment_state(maximally_mixed(3))


@pytest.fixture
def free_qubit(qb3):
    """QB3 with the coupling switched off; system starts in |+>"""
    return qb3.with_coupling_scale(0.0).with_initial(Product(pure_state([1, 1])))


@pytest.fixture
def generic():
    return catalog_model("GENERIC", seed=7)


@pytest.fixture
def decoupled():
    return catalog_model("DECOUPLED", seed=3)


@pytest.fixture
def degenerate():
    return catalog_model("DEGENERATE", seed=5)


@pytest.fixture
def qb3_pipeline(qb3_bell):
    return build_pipeline(qb3_bell)


@pytest.fixture
def write_config(tmp_path):
    def write(text, name="run.yaml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write
