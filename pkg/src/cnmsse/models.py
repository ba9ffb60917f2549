"""Two-level system Hamiltonians, coupling operators and initial states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["COUPLING_OPERATORS", "SystemModel", "spin_boson", "transfer"]

# Alternatives for the transfer model, whose bath coupling operator is not
# fixed by the model definition; "acceptor" is the default.
COUPLING_OPERATORS = {
    "acceptor": np.diag([0.0, 1.0]),
    "sigma_z": np.diag([1.0, -1.0]),
    "acceptor_neg": np.diag([0.0, -1.0]),
}


@dataclass(frozen=True)
class SystemModel:
    H: np.ndarray
    f: np.ndarray
    psi0: np.ndarray

    def __post_init__(self):
        H = np.array(self.H, dtype=complex)
        f = np.array(self.f, dtype=complex)
        psi0 = np.array(self.psi0, dtype=complex)
        d = psi0.size
        if H.shape != (d, d) or f.shape != (d, d):
            raise ValueError("H, f and psi0 dimensions disagree")
        if not np.allclose(H, H.conj().T, atol=1e-14):
            raise ValueError("system Hamiltonian is not Hermitian")
        if not np.allclose(f, f.conj().T, atol=1e-14):
            raise ValueError("coupling operator is not Hermitian")
        if abs(np.linalg.norm(psi0) - 1.0) > 1e-12:
            raise ValueError("initial state is not normalised")
        for name, arr in (("H", H), ("f", f), ("psi0", psi0)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.psi0.size


def spin_boson(eps: float, delta: float) -> SystemModel:
    """``H = eps sz + delta sx`` coupled through ``sz``, starting in ``|1>``."""
    return SystemModel([[eps, delta], [delta, -eps]], np.diag([1.0, -1.0]), [1.0, 0.0])


def transfer(e_d: float, e_a: float, lam: float, J: float, coupling: str = "acceptor") -> SystemModel:
    """Donor/acceptor model ``E_D|D><D| + (E_A + lam)|A><A| + J(|D><A| + h.c.)``.

    Starts in the donor state. ``coupling`` selects the bath operator from
    :data:`COUPLING_OPERATORS`.
    """
    try:
        f = COUPLING_OPERATORS[coupling]
    except KeyError:
        raise ValueError(f"unknown coupling operator {coupling!r}") from None
    return SystemModel([[e_d, J], [J, e_a + lam]], f, [1.0, 0.0])
