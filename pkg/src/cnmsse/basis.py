"""
General basis sets for the adjusted bath correlation function.

A basis is a vector of functions ``Phi(t) = (phi_1, ..., phi_K)`` closed
under differentiation, ``Phi'(t) = eta @ Phi(t)``, together with weights ``d``
such that ``abcf(t) ~ d @ Phi(t)``. Exponentials are the special case of a
diagonal ``eta``; the other families here carry off-diagonal couplings and
stay well defined where exponential expansions degenerate.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bath import AbcfScheme, BathSpec, Brownian, Discrete, OhmicAlg, OhmicExp, _cos_t, _sinc_t

__all__ = [
    "BasisChoice",
    "BasisSet",
    "DegenerateDecompositionError",
    "ExpFit",
    "Family",
    "MEIER_TANNOR_OHMIC_EXP",
    "MeierTannorParams",
    "ResidualReport",
    "build_basis",
    "damped_sincos_basis",
    "exponential_basis",
    "fit_exponentials",
    "meier_tannor_params",
    "reconstruct_abcf",
    "validate_basis",
]

# Published three-mode Meier-Tannor fit of S(w) = alpha w exp(-w/wc), stored
# as (p_k / (alpha wc^4), Omega_k / wc, Gamma_k / wc). Taken as given, not refit.
MEIER_TANNOR_OHMIC_EXP = (
    (12.0677, 0.2378, 2.2593),
    (-19.9762, 0.0888, 5.4377),
    (0.1834, 0.0482, 0.8099),
)


class DegenerateDecompositionError(ValueError):
    pass


class Family(enum.Enum):
    SINCOS = "SinCos"
    DAMPED_SINCOS = "DampedSinCos"
    POLYEXP = "PolyExp"
    BROWNIAN = "Brownian"
    EXPONENTIAL = "Exponential"


class BasisChoice(enum.Enum):
    AUTO = "auto"
    FORCE_EXPONENTIAL = "force_exponential"

    @classmethod
    def parse(cls, value) -> "BasisChoice":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        for member in cls:
            if member.value == key or member.name.lower() == key:
                return member
        raise ValueError(f"unknown basis choice {value!r}")


@dataclass(frozen=True)
class MeierTannorParams:
    """Lorentzian triples ``(p_k, Omega_k, Gamma_k)`` in absolute units."""

    modes: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        for _, om, ga in self.modes:
            if not (om > 0 and ga > 0):
                raise ValueError("Lorentzian Omega and Gamma must be positive")

    def spectral_density(self, w):
        w = np.asarray(w, dtype=float)[..., None]
        p, om, ga = (np.array(x) for x in zip(*self.modes))
        return np.sum(p * w / (((w + om) ** 2 + ga**2) * ((w - om) ** 2 + ga**2)), axis=-1)

    def abcf(self, t):
        """``-i sum_k p_k e^{-Gamma_k t} sin(Omega_k t) / (4 Omega_k Gamma_k)``."""
        t = np.asarray(t, dtype=float)[..., None]
        p, om, ga = (np.array(x) for x in zip(*self.modes))
        return -1j * np.sum(p * np.exp(-ga * t) * np.sin(om * t) / (4 * om * ga), axis=-1)


def meier_tannor_params(sd: OhmicExp, table=MEIER_TANNOR_OHMIC_EXP) -> MeierTannorParams:
    scale = sd.alpha * sd.wc**4
    return MeierTannorParams(tuple((p * scale, om * sd.wc, ga * sd.wc) for p, om, ga in table))


@dataclass(frozen=True)
class BasisSet:
    """Basis functions with coupling matrix ``eta``, initial values and weights.

    ``params`` holds the family parameters: per-pair frequencies for
    ``SinCos``, ``(Omega, Gamma)`` pairs for ``DampedSinCos``, ``wc`` for
    ``PolyExp``, ``(w0, zeta)`` for ``Brownian`` and the rates
    ``nu_k`` for ``Exponential``.
    """

    family: Family
    eta: np.ndarray
    phi0: np.ndarray
    d: np.ndarray
    params: tuple = field(default=())

    def __post_init__(self):
        eta = np.array(self.eta, dtype=complex)
        phi0 = np.array(self.phi0, dtype=complex)
        d = np.array(self.d, dtype=complex)
        k = eta.shape[0]
        if eta.shape != (k, k) or phi0.shape != (k,) or d.shape != (k,):
            raise ValueError("inconsistent basis dimensions")
        for name, arr in (("eta", eta), ("phi0", phi0), ("d", d)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def K(self) -> int:
        return self.eta.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.eta == np.diag(np.diag(self.eta))))

    def evaluate(self, t) -> np.ndarray:
        """Closed-form ``Phi(t)``; shape ``(K,) + shape(t)``."""
        t = np.asarray(t, dtype=float)
        fam = self.family
        if fam is Family.SINCOS:
            rows = []
            for w in self.params:
                rows += [np.sin(w * t), np.cos(w * t)]
        elif fam is Family.DAMPED_SINCOS:
            rows = []
            for om, ga in self.params:
                e = np.exp(-ga * t)
                rows += [e * np.sin(om * t), e * np.cos(om * t)]
        elif fam is Family.POLYEXP:
            (wc,) = self.params
            e = np.exp(-wc * t)
            rows = [t * e, e]
        elif fam is Family.BROWNIAN:
            w0, zeta = self.params
            sd = Brownian(1.0, w0, zeta)
            rows = [sd.phi_p(t), sd.phi_q(t)]
        else:
            rows = [np.exp(-nu * t) for nu in self.params]
        return np.array(rows, dtype=complex)

    def derivative(self, t) -> np.ndarray:
        """Closed-form ``Phi'(t)``, written out independently of ``eta``."""
        t = np.asarray(t, dtype=float)
        fam = self.family
        if fam is Family.SINCOS:
            rows = []
            for w in self.params:
                rows += [w * np.cos(w * t), -w * np.sin(w * t)]
        elif fam is Family.DAMPED_SINCOS:
            rows = []
            for om, ga in self.params:
                e = np.exp(-ga * t)
                s, c = np.sin(om * t), np.cos(om * t)
                rows += [e * (om * c - ga * s), -e * (om * s + ga * c)]
        elif fam is Family.POLYEXP:
            (wc,) = self.params
            e = np.exp(-wc * t)
            rows = [(1.0 - wc * t) * e, -wc * e]
        elif fam is Family.BROWNIAN:
            w0, zeta = self.params
            sd = Brownian(1.0, w0, zeta)
            e = np.exp(-0.5 * zeta * t)
            if sd.is_critical:
                dp = -w0 * (1.0 - 0.5 * zeta * t) * e
                dq = -w0**2 * t * e
            else:
                w1sq = w0**2 - zeta**2 / 4.0
                sinc, cos = _sinc_t(w1sq, t), _cos_t(w1sq, t)
                dp = -w0 * (cos - 0.5 * zeta * sinc) * e
                dq = -(w0**2) * sinc * e
            rows = [dp, dq]
        else:
            rows = [-nu * np.exp(-nu * t) for nu in self.params]
        return np.array(rows, dtype=complex)


def exponential_basis(nus, ds) -> BasisSet:
    nus = np.asarray(nus, dtype=complex)
    return BasisSet(
        Family.EXPONENTIAL, np.diag(-nus), np.ones(nus.size), np.asarray(ds, dtype=complex),
        tuple(complex(x) for x in nus),
    )


def damped_sincos_basis(mt: MeierTannorParams) -> BasisSet:
    k = 2 * len(mt.modes)
    eta = np.zeros((k, k))
    phi0 = np.zeros(k)
    d = np.zeros(k, dtype=complex)
    for i, (p, om, ga) in enumerate(mt.modes):
        eta[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = [[-ga, om], [-om, -ga]]
        phi0[2 * i + 1] = 1.0
        d[2 * i] = -1j * p / (4 * om * ga)
    return BasisSet(Family.DAMPED_SINCOS, eta, phi0, d, tuple((om, ga) for _, om, ga in mt.modes))


def build_basis(bath: BathSpec, choice="auto") -> BasisSet:
    """Basis and weights reproducing the Ke-Zhao aBCF of ``bath``."""
    choice = BasisChoice.parse(choice)
    if bath.scheme is not AbcfScheme.KEZHAO:
        raise ValueError("basis construction requires the KeZhao aBCF scheme")
    sd = bath.sd
    if choice is BasisChoice.AUTO:
        if isinstance(sd, Discrete):
            k = 2 * len(sd.modes)
            eta = np.zeros((k, k))
            phi0 = np.zeros(k)
            d = np.zeros(k, dtype=complex)
            for i, (w, a) in enumerate(zip(sd.frequencies, sd.weights)):
                eta[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = [[0.0, w], [-w, 0.0]]
                phi0[2 * i + 1] = 1.0
                d[2 * i] = -1j * a
            return BasisSet(Family.SINCOS, eta, phi0, d, tuple(float(w) for w in sd.frequencies))
        if isinstance(sd, OhmicExp):
            return damped_sincos_basis(meier_tannor_params(sd))
        if isinstance(sd, OhmicAlg):
            wc = sd.wc
            return BasisSet(
                Family.POLYEXP, [[-wc, 1.0], [0.0, -wc]], [0.0, 1.0],
                [-1j * math.pi * sd.alpha * wc**3 / 2.0, 0.0], (wc,),
            )
        if isinstance(sd, Brownian):
            return BasisSet(
                Family.BROWNIAN, [[-sd.zeta, -sd.w0], [sd.w0, 0.0]], [0.0, 1.0],
                [1j * sd.lam * sd.w0, 0.0], (sd.w0, sd.zeta),
            )
        raise TypeError(f"no basis for {type(sd).__name__}")

    if isinstance(sd, Brownian):
        if sd.is_critical:
            raise DegenerateDecompositionError(
                "degenerate exponential decomposition at critical damping"
            )
        w1 = sd.w1
        amp = sd.lam * sd.w0**2 / (2.0 * w1)
        return exponential_basis(
            [sd.zeta / 2 + 1j * w1, sd.zeta / 2 - 1j * w1], [amp, -amp]
        )
    if isinstance(sd, Discrete):
        nus, ds = [], []
        for w, a in zip(sd.frequencies, sd.weights):
            # -i a sin(wt) = -(a/2) e^{iwt} + (a/2) e^{-iwt}
            nus += [-1j * w, 1j * w]
            ds += [-a / 2.0, a / 2.0]
        return exponential_basis(nus, ds)
    if isinstance(sd, OhmicExp):
        nus, ds = [], []
        for p, om, ga in meier_tannor_params(sd).modes:
            amp = p / (8.0 * om * ga)
            nus += [ga + 1j * om, ga - 1j * om]
            ds += [amp, -amp]
        return exponential_basis(nus, ds)
    raise DegenerateDecompositionError(
        f"{type(sd).__name__} has no exact exponential decomposition; use fit_exponentials"
    )


def reconstruct_abcf(basis: BasisSet, t):
    """``sum_k d_k phi_k(t)``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    return np.tensordot(basis.d, basis.evaluate(t), axes=1)


@dataclass(frozen=True)
class ResidualReport:
    """Maximum residuals over a time grid (infinity norm over components)."""

    ode_fd: float
    ode_closed: float
    expm: float
    per_time: np.ndarray  # columns: t, ode_fd, ode_closed, expm

    def ok(self, tol: float) -> bool:
        return max(self.ode_fd, self.ode_closed, self.expm) < tol


def validate_basis(basis: BasisSet, grid, h: float | None = None) -> ResidualReport:
    """Check ``Phi' = eta Phi`` and ``Phi(t) = expm(eta t) Phi(0)`` on ``grid``.

    ``ode_fd`` uses a central difference with step ``h``; the default
    balances truncation against rounding for the fastest rate in ``eta``.
    ``ode_closed`` uses the analytic derivative and does not involve ``eta``
    on its left-hand side.
    """
    grid = np.asarray(grid, dtype=float)
    if h is None:
        h = 6e-6 / max(1.0, float(np.abs(basis.eta).max()))
    if grid.size == 0:
        raise ValueError("empty grid")
    phi = basis.evaluate(grid)  # (K, n)
    rhs = basis.eta @ phi
    # one-sided at t=0 would be less accurate; closed forms extend to t<0
    fd = (basis.evaluate(grid + h) - basis.evaluate(grid - h)) / (2 * h)
    r_fd = np.abs(fd - rhs).max(axis=0)
    r_cl = np.abs(basis.derivative(grid) - rhs).max(axis=0)
    r_ex = np.array(
        [np.abs(scipy.linalg.expm(basis.eta * t) @ basis.phi0 - phi[:, i]).max()
         for i, t in enumerate(grid)]
    )
    table = np.column_stack([grid, r_fd, r_cl, r_ex])
    return ResidualReport(float(r_fd.max()), float(r_cl.max()), float(r_ex.max()), table)


@dataclass(frozen=True)
class ExpFit:
    nu: np.ndarray
    d: np.ndarray
    residual: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return np.sum(self.d * np.exp(-self.nu * t), axis=-1)


def fit_exponentials(t, y, order: int, rcond: float = 1e-13) -> ExpFit:
    """Matrix-pencil fit ``y(t) ~ sum_k d_k exp(-nu_k t)`` on a uniform grid."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=complex)
    n = t.size
    if order < 1 or 2 * order > n:
        raise ValueError("order must satisfy 1 <= order <= len(samples)/2")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("matrix pencil needs a uniform time grid")
    pencil = n // 2
    hankel = scipy.linalg.hankel(y[: n - pencil], y[n - pencil - 1 :])
    _, s, vh = np.linalg.svd(hankel, full_matrices=False)
    if s.size < order or s[order - 1] <= rcond * s[0]:
        raise np.linalg.LinAlgError("pencil rank below requested order")
    v = vh[:order].conj().T
    z = np.linalg.eigvals(np.linalg.pinv(v[:-1]) @ v[1:])
    nu = -np.log(z) / dt
    vander = np.exp(-np.outer(t - t[0], nu))
    amp, *_ = np.linalg.lstsq(vander, y, rcond=None)
    d = amp * np.exp(nu * t[0])
    fit = ExpFit(nu, d, 0.0)
    return ExpFit(nu, d, float(np.abs(fit(t) - y).max()))
