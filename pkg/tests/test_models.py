import numpy as np
import pytest

from cnmsse.models import COUPLING_OPERATORS, SystemModel, spin_boson, transfer


def test_spin_boson_hamiltonians():
    np.testing.assert_array_equal(spin_boson(0, 0.5).H, [[0, 0.5], [0.5, 0]])
    np.testing.assert_array_equal(spin_boson(1, 1).H, [[1, 1], [1, -1]])
    np.testing.assert_array_equal(spin_boson(0, 0).H, np.zeros((2, 2)))
    m = spin_boson(0.3, 0.2)
    np.testing.assert_array_equal(m.f, np.diag([1, -1]))
    np.testing.assert_array_equal(m.psi0, [1, 0])


def test_transfer_hamiltonian():
    m = transfer(1, 0, 1, 0.5)
    np.testing.assert_array_equal(m.H, [[1, 0.5], [0.5, 1]])
    np.testing.assert_array_equal(m.f, COUPLING_OPERATORS["acceptor"])
    assert transfer(1, 0, 1, 0.5, coupling="sigma_z").f[0, 0] == 1


def test_invalid_models_rejected():
    with pytest.raises(ValueError):
        transfer(1, 0, 1, 0.5, coupling="nope")
    with pytest.raises(ValueError):
        SystemModel([[0, 1], [0, 0]], np.eye(2), [1, 0])
    with pytest.raises(ValueError):
        SystemModel(np.eye(2), np.eye(2), [1, 1])
    with pytest.raises(ValueError):
        SystemModel(np.eye(3), np.eye(2), [1, 0])


def test_model_arrays_are_read_only():
    m = spin_boson(0, 1)
    with pytest.raises(ValueError):
        m.H[0, 0] = 3
