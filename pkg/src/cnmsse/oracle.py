"""
Exact references: closed two-level dynamics and exact diagonalisation of a
system coupled to a few discrete bath modes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .models import SystemModel

__all__ = ["EDConfig", "EDResult", "TailError", "exact_discrete", "rabi", "thermal_tail"]

TAIL_TOL = 1e-8


class TailError(ValueError):
    def __init__(self, message: str, suggested: int):
        super().__init__(f"{message}; try n_b >= {suggested}")
        self.suggested = suggested


def rabi(model: SystemModel, t):
    """Population of the first level for a bare two-level system started in it.

    ``P1(t) = 1 - (J^2 / W^2) sin^2(W t)`` with ``W^2 = J^2 + (H11 - H22)^2 / 4``.
    """
    if model.dim != 2 or not np.allclose(np.abs(model.psi0), [1.0, 0.0]):
        raise ValueError("rabi formula needs a two-level model started in |1>")
    J = abs(model.H[0, 1])
    delta = (model.H[0, 0] - model.H[1, 1]).real
    W = np.sqrt(J**2 + delta**2 / 4)
    t = np.asarray(t, dtype=float)
    if W == 0:
        return np.ones_like(t)
    return 1.0 - (J / W) ** 2 * np.sin(W * t) ** 2


def thermal_tail(beta: float, omega: float, n_b: int) -> float:
    """Thermal probability of the levels ``n >= n_b`` that truncation drops."""
    return float(np.exp(-beta * omega * n_b))


@dataclass(frozen=True)
class EDConfig:
    model: SystemModel
    modes: Sequence[tuple[float, float]]  # (c, w) pairs
    beta: float
    n_b: int = 20
    dt: float = 0.01
    t_final: float = 10.0
    output_stride: int = 1
    tail_tol: float = field(default=TAIL_TOL)

    def __post_init__(self):
        if self.n_b < 2:
            raise ValueError("n_b must be at least 2")
        for _, w in self.modes:
            tail = thermal_tail(self.beta, w, self.n_b)
            if tail > self.tail_tol:
                need = int(np.ceil(-np.log(self.tail_tol) / (self.beta * w)))
                raise TailError(f"thermal tail {tail:.2e} above {self.tail_tol:.0e}", need)


@dataclass(frozen=True)
class EDResult:
    t: np.ndarray
    rho: np.ndarray  # (nt, d, d)

    @property
    def p1(self) -> np.ndarray:
        return self.rho[:, 0, 0].real

    @property
    def trace(self) -> np.ndarray:
        return np.trace(self.rho, axis1=1, axis2=2)


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def exact_discrete(cfg: EDConfig) -> EDResult:
    """Reduced dynamics of ``H_S + sum w b^dag b + f sum c (b + b^dag)/sqrt(2w)``.

    The bath starts in a thermal state truncated to ``n_b`` levels per mode
    and renormalised. Evolution uses one eigendecomposition of the total
    Hamiltonian, so the result carries no time-stepping error.
    """
    m = cfg.model
    d = m.dim
    nb = cfg.n_b
    b = _ladder(nb)
    num = np.diag(np.arange(nb, dtype=float))
    eye_b = np.eye(nb)
    n_modes = len(cfg.modes)
    dim_b = nb**n_modes

    def embed(op, k):
        out = np.ones((1, 1))
        for j in range(n_modes):
            out = np.kron(out, op if j == k else eye_b)
        return out

    H = np.kron(m.H, np.eye(dim_b))
    rho_b = np.ones((1, 1))
    for k, (c, w) in enumerate(cfg.modes):
        H = H + np.kron(np.eye(d), w * embed(num, k))
        H = H + np.kron(m.f, (c / np.sqrt(2 * w)) * embed(b + b.T, k))
        p = np.exp(-cfg.beta * w * np.arange(nb))
        rho_b = np.kron(rho_b, np.diag(p / p.sum()))
    rho0 = np.kron(np.outer(m.psi0, m.psi0.conj()), rho_b)

    evals, V = np.linalg.eigh(H)
    rho0_eig = V.conj().T @ rho0 @ V
    n_steps = int(round(cfg.t_final / cfg.dt))
    t = np.arange(0, n_steps + 1, cfg.output_stride) * cfg.dt
    out = np.empty((t.size, d, d), dtype=complex)
    for i, ti in enumerate(t):
        ph = np.exp(-1j * evals * ti)
        rt = V @ (ph[:, None] * rho0_eig * ph.conj()[None, :]) @ V.conj().T
        out[i] = np.trace(rt.reshape(d, dim_b, d, dim_b), axis1=1, axis2=3)
    return EDResult(t, out)
