import numpy as np
import pytest

from mqcsim.geometry import build_chain, couplings
from mqcsim.hilbert import HilbertSpace, build_H0, build_Hdd, thermal_state


@pytest.fixture
def two_spin():
    """Two spins perpendicular to the field at unit distance: d = 1."""
    space = HilbertSpace(2)
    table = couplings(build_chain(1.0, 2, axis=(1.0, 0.0, 0.0)))
    return space, table


@pytest.fixture
def two_spin_ops(two_spin):
    space, table = two_spin
    return {
        "space": space,
        "table": table,
        "d": table.entries[(0, 1)],
        "h0": build_H0(table, space),
        "hdd": build_Hdd(table, space),
        "rho0": thermal_state(space),
    }


def random_traceless_hermitian(rng, space):
    dim = space.dim
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = m + m.conj().T
    m = m - np.trace(m) / dim * np.eye(dim)
    from mqcsim.hilbert import DensityOperator
    return DensityOperator(space, m, traceless=True)
