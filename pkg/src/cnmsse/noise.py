"""
Correlated forward/backward noise ``Z+(t), Z-(t)``.

The processes are built mode by mode on a frequency grid,

    Z+(t) = sum_j A_j e^{-i w_j t} + B_j e^{i w_j t}
    Z-(t) = sum_j C_j e^{-i w_j t} + D_j e^{i w_j t},

with the coefficients linear in two independent standard complex Gaussians
per mode. The mixing is chosen so that, for the Ke-Zhao split,

    <Z+(t) Z+(s)> = <Z-(t) Z-(s)> = alpha1(t - s)
    <Z+(t) Z-*(s)>                = conj(alpha(t - s))

hold exactly for the discretised bath, while every coefficient stays bounded
for any temperature. A realization is therefore an exact function of time and
can be sampled at arbitrary integrator stage times.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import CZT

from .bath import AbcfScheme, SpectralDensity

__all__ = [
    "CorrelatorEstimate",
    "FrequencyGrid",
    "NoiseRealization",
    "default_grid",
    "discretize",
    "empirical_correlators",
    "streamed_correlators",
    "mixing_amplitudes",
    "sample",
    "sample_batch",
    "trajectory_rng",
]

DEFAULT_J = 3000
CUTOFF_CAP = 30.0
# direct trigonometric sums are cheaper than a chirp-z transform below this
_CZT_MIN_MODES = 64


@dataclass(frozen=True)
class FrequencyGrid:
    """Frequencies ``w_j`` and BCF weights ``s_j`` (``S(w_j) dw / pi``)."""

    omegas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        s = np.asarray(self.weights, dtype=float)
        if w.shape != s.shape or w.ndim != 1:
            raise ValueError("omegas and weights must be 1-d of equal length")
        if np.any(w <= 0) or np.any(s < 0):
            raise ValueError("grid needs w_j > 0 and s_j >= 0")
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "weights", s)

    def __len__(self):
        return self.omegas.size

    @property
    def uniform(self) -> bool:
        if self.omegas.size < 2:
            return False
        dw = np.diff(self.omegas)
        return bool(np.allclose(dw, dw[0], rtol=1e-12, atol=0))

    def alpha1(self, tau, beta: float):
        """Discretised ``sum_j s_j coth(beta w_j / 2) cos(w_j tau)``."""
        nbar = _occupation(self.omegas, beta)
        wt = np.multiply.outer(np.asarray(tau, dtype=float), self.omegas)
        return np.sum(self.weights * (2 * nbar + 1) * np.cos(wt), axis=-1)

    def alpha_conj(self, tau, beta: float):
        """Discretised complex conjugate of the BCF."""
        wt = np.multiply.outer(np.asarray(tau, dtype=float), self.omegas)
        return self.alpha1(tau, beta) + 1j * np.sum(self.weights * np.sin(wt), axis=-1)


def discretize(sd: SpectralDensity, J: int = DEFAULT_J, omega_max: float | None = None) -> FrequencyGrid:
    """Midpoint discretisation ``w_j = (j - 1/2) dw``, ``s_j = S(w_j) dw / pi``.

    Discrete densities ignore ``J`` and ``omega_max`` and return their modes.
    """
    if not sd.continuous:
        return FrequencyGrid(sd.frequencies, sd.weights)
    if J < 1:
        raise ValueError("J must be >= 1")
    if omega_max is None:
        omega_max = sd.cutoff(cap=CUTOFF_CAP * sd.characteristic_frequency())
    if not omega_max > 0:
        raise ValueError("omega_max must be positive")
    dw = omega_max / J
    w = (np.arange(J) + 0.5) * dw
    return FrequencyGrid(w, sd.evaluate(w) * dw / np.pi)


def default_grid(sd: SpectralDensity) -> FrequencyGrid:
    return discretize(sd)


def _occupation(w, beta: float):
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(beta * np.asarray(w, dtype=float))


def mixing_amplitudes(grid: FrequencyGrid, beta: float):
    """Per-mode ``(u, v, w)`` of the coefficient construction."""
    nbar = _occupation(grid.omegas, beta)
    s = grid.weights
    u = np.sqrt(s * (nbar + 1) / 2)
    v = nbar * np.sqrt(s / (2 * (nbar + 1)))
    return u, v, u.copy()


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for one trajectory, fixed by ``(master_seed, index)``."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(seq))


def _complex_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.standard_normal((2, n))
    return (z[0] + 1j * z[1]) / np.sqrt(2.0)


@dataclass(frozen=True)
class NoiseRealization:
    """Coefficients of one realization, or of a batch along a leading axis."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    omegas: np.ndarray
    beta: float

    @property
    def batch_shape(self) -> tuple:
        return self.A.shape[:-1]

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        """``(Z+(t), Z-(t))``; time axes come last."""
        t = np.asarray(t, dtype=float)
        e = np.exp(-1j * np.multiply.outer(self.omegas, t))  # (J,) + t.shape
        ec = e.conj()
        zp = np.tensordot(self.A, e, axes=1) + np.tensordot(self.B, ec, axes=1)
        zm = np.tensordot(self.C, e, axes=1) + np.tensordot(self.D, ec, axes=1)
        return zp, zm

    def on_grid(self, h: float, n: int):
        """``Z+`` and ``Z-`` at ``t_m = m h``, ``m < n``; shapes ``(n,) + batch``.

        Uses a chirp-z transform on uniform frequency grids, the direct sum
        otherwise; both are exact up to rounding.
        """
        w = self.omegas
        J = w.size
        uniform = J >= _CZT_MIN_MODES and np.allclose(np.diff(w), w[1] - w[0], rtol=1e-12, atol=0)
        if not uniform:
            zp, zm = self.eval(np.arange(n) * h)
            return np.moveaxis(zp, -1, 0), np.moveaxis(zm, -1, 0)
        dw = w[1] - w[0]
        t = np.arange(n) * h
        czt = CZT(J, n, w=np.exp(-1j * dw * h), a=1.0)
        lead = np.exp(-1j * w[0] * t)

        def neg(coef):  # sum_j c_j e^{-i w_j t}
            return lead * czt(coef, axis=-1)

        def pos(coef):  # sum_j c_j e^{+i w_j t}
            return np.conj(lead * czt(np.conj(coef), axis=-1))

        b_pos = pos(self.B)
        zp = neg(self.A) + b_pos
        zm = neg(self.C) + (b_pos if self.D is self.B else pos(self.D))
        return np.moveaxis(zp, -1, 0), np.moveaxis(zm, -1, 0)


def _kezhao_coefficients(u, v, w, g1, g2):
    a = u * g1 + v * np.conj(g2)
    b = w * (np.conj(g1) + g2)
    c = v * g1 + u * np.conj(g2)
    return a, b, c, b


def sample(grid: FrequencyGrid, beta: float, rng: np.random.Generator,
           scheme=AbcfScheme.KEZHAO) -> NoiseRealization:
    """Draw one realization on ``grid``."""
    return sample_batch(grid, beta, [rng], scheme=scheme, squeeze=True)


def sample_batch(grid: FrequencyGrid, beta: float, rngs: Sequence[np.random.Generator],
                 scheme=AbcfScheme.KEZHAO, squeeze: bool = False) -> NoiseRealization:
    """One realization per generator, stacked along axis 0."""
    scheme = AbcfScheme.parse(scheme)
    J = len(grid)
    g = np.array([_complex_normal(r, 2 * J) for r in rngs])
    g1, g2 = g[:, :J], g[:, J:]
    if scheme is AbcfScheme.KEZHAO:
        a, b, c, d = _kezhao_coefficients(*mixing_amplitudes(grid, beta), g1, g2)
    elif scheme is AbcfScheme.DIOSISTRUNZ:
        # one process, <Z Z> = 0 and <Z(t) Z*(s)> = conj(alpha(t - s))
        nbar = _occupation(grid.omegas, beta)
        s = grid.weights
        a = np.sqrt(s * nbar) * np.conj(g2)
        b = np.sqrt(s * (nbar + 1)) * g1
        c, d = a, b
    else:
        raise NotImplementedError("SongShi noise sampling is not implemented")
    if squeeze:
        a, b, c, d = a[0], b[0], c[0], d[0]
    return NoiseRealization(a, b, c, d, grid.omegas, float(beta))


@dataclass(frozen=True)
class CorrelatorEstimate:
    t: np.ndarray
    zpzp: np.ndarray
    zmzm: np.ndarray
    zpzm_conj: np.ndarray
    se_zpzp: np.ndarray  # complex: real part = SE(re), imag part = SE(im)
    se_zmzm: np.ndarray
    se_zpzm_conj: np.ndarray
    target_alpha1: np.ndarray
    target_alpha_conj: np.ndarray
    n: int

    def within(self, k: float = 5.0) -> dict[str, bool]:
        """Componentwise ``|estimate - target| <= k SE`` at every time."""

        def ok(est, se, target):
            return bool(
                np.all(np.abs(est.real - np.real(target)) <= k * se.real)
                and np.all(np.abs(est.imag - np.imag(target)) <= k * se.imag)
            )

        return {
            "zpzp": ok(self.zpzp, self.se_zpzp, self.target_alpha1),
            "zmzm": ok(self.zmzm, self.se_zmzm, self.target_alpha1),
            "zpzm_conj": ok(self.zpzm_conj, self.se_zpzm_conj, self.target_alpha_conj),
        }


def _jackknife_se(x: np.ndarray) -> np.ndarray:
    """Delete-one jackknife SE of the mean along axis 0, real and imaginary apart."""
    n = x.shape[0]

    def se(part):
        loo = (part.sum(axis=0) - part) / (n - 1)
        return np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))

    return se(x.real) + 1j * se(x.imag)


def empirical_correlators(realizations, grid_t, freq_grid: FrequencyGrid) -> CorrelatorEstimate:
    """Sample correlators against ``t = 0`` with jackknife standard errors.

    ``realizations`` is a batched :class:`NoiseRealization` or a list of
    single ones drawn on ``freq_grid``. Targets are the discretised
    ``alpha1`` and ``conj(alpha)`` of that grid.
    """
    if isinstance(realizations, NoiseRealization):
        nr = realizations
    else:
        items = list(realizations)
        nr = NoiseRealization(*(np.stack([getattr(r, k) for r in items]) for k in "ABCD"),
                              items[0].omegas, items[0].beta)
    if nr.A.ndim != 2 or nr.A.shape[0] < 1000:
        raise ValueError("need at least 10^3 realizations")
    t = np.asarray(grid_t, dtype=float)
    zp, zm = nr.eval(t)  # (N, nt)
    zp0, zm0 = nr.eval(0.0)
    pp = zp * zp0[:, None]
    mm = zm * zm0[:, None]
    pm = zp * np.conj(zm0)[:, None]
    return CorrelatorEstimate(
        t, pp.mean(0), mm.mean(0), pm.mean(0),
        _jackknife_se(pp), _jackknife_se(mm), _jackknife_se(pm),
        freq_grid.alpha1(t, nr.beta), freq_grid.alpha_conj(t, nr.beta), nr.A.shape[0],
    )


def streamed_correlators(grid: FrequencyGrid, beta: float, t, n: int, master_seed: int = 0,
                         chunk: int = 1000, scheme=AbcfScheme.KEZHAO) -> CorrelatorEstimate:
    """:func:`empirical_correlators` without holding all realizations.

    Realization ``i`` comes from ``trajectory_rng(master_seed, i)``. Sums and
    sums of squares are accumulated chunk by chunk; the standard error of a
    mean equals its delete-one jackknife value, so the result matches the
    in-memory estimate.
    """
    if n < 1000:
        raise ValueError("need at least 10^3 realizations")
    t = np.asarray(t, dtype=float)
    t_all = np.concatenate([[0.0], t])
    acc = np.zeros((3, 4, t.size))  # products x (sum re, sum im, sumsq re, sumsq im)
    for lo in range(0, n, chunk):
        rngs = [trajectory_rng(master_seed, i) for i in range(lo, min(lo + chunk, n))]
        zp, zm = sample_batch(grid, beta, rngs, scheme=scheme).eval(t_all)
        prods = (zp[:, 1:] * zp[:, :1], zm[:, 1:] * zm[:, :1], zp[:, 1:] * np.conj(zm[:, :1]))
        for k, x in enumerate(prods):
            acc[k, 0] += x.real.sum(0)
            acc[k, 1] += x.imag.sum(0)
            acc[k, 2] += (x.real**2).sum(0)
            acc[k, 3] += (x.imag**2).sum(0)
    mean_re, mean_im = acc[:, 0] / n, acc[:, 1] / n
    var_re = (acc[:, 2] - n * mean_re**2) / (n - 1)
    var_im = (acc[:, 3] - n * mean_im**2) / (n - 1)
    se = np.sqrt(np.maximum(var_re, 0) / n) + 1j * np.sqrt(np.maximum(var_im, 0) / n)
    mean = mean_re + 1j * mean_im
    return CorrelatorEstimate(t, mean[0], mean[1], mean[2], se[0], se[1], se[2],
                              grid.alpha1(t, beta), grid.alpha_conj(t, beta), n)
