import numpy as np
import pytest

from spincorr.core import Convention, Operator, SpinRegister, StateVector
from spincorr.oracle import CorrelationQuery

AXES = ("x", "y", "z")


def random_state_vector(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_hermitian(rng, dim, scale=1.0):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (m + m.conj().T) / 2


def random_instance(rng, register, tmax=2.0):
    """Random (H, psi, query) triple on the given register."""
    dim = register.dimension
    h = Operator(random_hermitian(rng, dim), register, hermitian_hint=True)
    psi = StateVector(random_state_vector(rng, dim), register)
    t1 = float(rng.uniform(0, tmax))
    query = CorrelationQuery(
        site_i=int(rng.integers(1, register.system_site_count + 1)),
        site_j=int(rng.integers(1, register.system_site_count + 1)),
        axis_a=AXES[rng.integers(3)],
        axis_b=AXES[rng.integers(3)],
        t1=t1,
        t2=t1 + float(rng.uniform(0, tmax)),
    )
    return h, psi, query


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def pauli_pair():
    """Two spin-1/2 sites, no ancilla, Pauli convention."""
    return SpinRegister(2, 0.5, 0, Convention.PAULI)


@pytest.fixture
def pauli_pair_ancilla():
    return SpinRegister(2, 0.5, 1, Convention.PAULI)
