"""
Spectral densities and bath correlation functions.

A harmonic bath linearly coupled through a system operator ``f`` is fully
characterised by its spectral density ``S(w)``. The bath correlation function
(BCF) at inverse temperature ``beta`` is

    alpha(t) = int_0^inf dw S(w)/pi [coth(beta w / 2) cos(w t) - i sin(w t)].

The hierarchy treats part of it deterministically (the adjusted BCF, aBCF)
and leaves the remainder ``alpha1 = alpha - abcf`` to the stochastic noise.
Three splittings are supported:

``KeZhao``
    ``alpha1 = Re alpha``; the aBCF is purely imaginary and temperature
    independent. This is the default.
``SongShi``
    ``alpha1`` uses the csch kernel, the aBCF the tanh kernel.
``DiosiStrunz``
    ``alpha1 = 0``; the aBCF is the full BCF.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "AbcfScheme",
    "BathSpec",
    "Brownian",
    "Discrete",
    "OhmicAlg",
    "OhmicExp",
    "QuadratureError",
    "SpectralDensity",
    "abcf",
    "alpha1",
    "bcf",
    "coth_half",
    "sd_eval",
]

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-14
QUAD_LIMIT = 2000
CUTOFF_REL = 1e-10
CRITICAL_RTOL = 1e-6


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (estimated error {estimate:.3e})")
        self.estimate = estimate


class AbcfScheme(enum.Enum):
    KEZHAO = "KeZhao"
    SONGSHI = "SongShi"
    DIOSISTRUNZ = "DiosiStrunz"

    @classmethod
    def parse(cls, value: "str | AbcfScheme") -> "AbcfScheme":
        if isinstance(value, cls):
            return value
        key = str(value).replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown aBCF scheme {value!r}")


def coth_half(x):
    """``coth(x / 2)`` with the small-``x`` series ``2/x + x/6``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    out = 1.0 / np.tanh(0.5 * safe)
    series = 2.0 / np.where(small, x, 1.0) + x / 6.0
    return np.where(small, series, out)


class SpectralDensity:
    """Base class of the spectral density families."""

    continuous = True

    def __call__(self, w):
        return self.evaluate(w)

    def evaluate(self, w):
        raise NotImplementedError

    def slope_at_zero(self) -> float:
        """``dS/dw`` at ``w = 0``; sets the ``w -> 0`` limit of ``S coth``."""
        raise NotImplementedError

    def characteristic_frequency(self) -> float:
        raise NotImplementedError

    def abcf_kezhao(self, t):
        """Closed form of ``-i int_0^inf S(w)/pi sin(w t) dw``."""
        raise NotImplementedError

    def peak(self) -> float:
        """Maximum of ``S`` on ``w >= 0``."""
        wc = self.characteristic_frequency()
        grid = np.geomspace(wc * 1e-4, wc * 1e3, 4000)
        vals = self.evaluate(grid)
        i = int(np.argmax(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = optimize.minimize_scalar(
            lambda w: -float(self.evaluate(w)), bounds=(lo, hi), method="bounded"
        )
        return max(float(vals[i]), -float(res.fun))

    def cutoff(self, rel: float = CUTOFF_REL, cap: float | None = None) -> float:
        """Smallest frequency beyond the peak where ``S < rel * max S``.

        The search runs on a geometric grid and is refined by bisection.
        ``cap`` bounds the result from above.
        """
        wc = self.characteristic_frequency()
        target = rel * self.peak()
        hi = wc
        while self.evaluate(hi) >= target:
            hi *= 2.0
            if cap is not None and hi >= cap:
                return float(cap)
            if hi > wc * 1e12:
                raise ValueError("spectral density does not decay")
        lo = hi / 2.0
        # S may still be rising at lo; bisection only needs a sign change
        root = optimize.brentq(lambda w: self.evaluate(w) - target, lo, hi, xtol=1e-12 * hi)
        return float(min(root, cap) if cap is not None else root)


@dataclass(frozen=True)
class Discrete(SpectralDensity):
    """Sum of delta peaks ``pi/2 sum c_k^2/w_k delta(w - w_k)``."""

    modes: tuple[tuple[float, float], ...]
    continuous = False

    def __init__(self, modes: Sequence[tuple[float, float]]):
        modes = tuple((float(c), float(w)) for c, w in modes)
        if not modes:
            raise ValueError("discrete spectral density needs at least one mode")
        for c, w in modes:
            if not w > 0:
                raise ValueError(f"mode frequency must be positive, got {w}")
        object.__setattr__(self, "modes", modes)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([c for c, _ in self.modes])

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([w for _, w in self.modes])

    @property
    def weights(self) -> np.ndarray:
        """``c_k^2 / (2 w_k)``, the BCF weight of each mode."""
        return self.couplings**2 / (2.0 * self.frequencies)

    def evaluate(self, w):
        raise ValueError("pointwise evaluation undefined for discrete SD")

    def characteristic_frequency(self) -> float:
        return float(self.frequencies.max())

    def abcf_kezhao(self, t):
        t = np.asarray(t, dtype=float)
        return -1j * np.sum(
            self.weights * np.sin(np.multiply.outer(t, self.frequencies)), axis=-1
        )


@dataclass(frozen=True)
class OhmicExp(SpectralDensity):
    """``S(w) = alpha w exp(-w / wc)``."""

    alpha: float
    wc: float

    def __post_init__(self):
        if not self.wc > 0:
            raise ValueError("cutoff frequency must be positive")
        if not self.alpha >= 0:
            raise ValueError("coupling strength must be non-negative")

    def evaluate(self, w):
        w = np.asarray(w, dtype=float)
        return self.alpha * w * np.exp(-w / self.wc)

    def slope_at_zero(self) -> float:
        return self.alpha

    def characteristic_frequency(self) -> float:
        return self.wc

    def abcf_kezhao(self, t):
        # int_0^inf w e^{-w/wc} sin(wt) dw = 2 wc^3 t / (1 + wc^2 t^2)^2
        t = np.asarray(t, dtype=float)
        wc = self.wc
        return -1j * (2.0 * self.alpha * wc**3 / math.pi) * t / (1.0 + (wc * t) ** 2) ** 2


@dataclass(frozen=True)
class OhmicAlg(SpectralDensity):
    """``S(w) = 2 pi alpha w / (1 + (w/wc)^2)^2`` with Kondo parameter ``alpha``."""

    alpha: float
    wc: float

    def __post_init__(self):
        if not self.wc > 0:
            raise ValueError("cutoff frequency must be positive")
        if not self.alpha >= 0:
            raise ValueError("coupling strength must be non-negative")

    def evaluate(self, w):
        w = np.asarray(w, dtype=float)
        return 2.0 * math.pi * self.alpha * w / (1.0 + (w / self.wc) ** 2) ** 2

    def slope_at_zero(self) -> float:
        return 2.0 * math.pi * self.alpha

    def characteristic_frequency(self) -> float:
        return self.wc

    def abcf_kezhao(self, t):
        t = np.asarray(t, dtype=float)
        return -1j * (math.pi * self.alpha * self.wc**3 / 2.0) * t * np.exp(-self.wc * t)


@dataclass(frozen=True)
class Brownian(SpectralDensity):
    """``S(w) = 2 lam zeta w0^2 w / ((w^2 - w0^2)^2 + zeta^2 w^2)``."""

    lam: float
    w0: float
    zeta: float

    def __post_init__(self):
        if not (self.w0 > 0 and self.zeta > 0):
            raise ValueError("w0 and zeta must be positive")
        if not self.lam >= 0:
            raise ValueError("reorganisation energy must be non-negative")

    def evaluate(self, w):
        w = np.asarray(w, dtype=float)
        return (
            2.0 * self.lam * self.zeta * self.w0**2 * w
            / ((w**2 - self.w0**2) ** 2 + self.zeta**2 * w**2)
        )

    def slope_at_zero(self) -> float:
        return 2.0 * self.lam * self.zeta / self.w0**2

    def characteristic_frequency(self) -> float:
        return self.w0

    @property
    def is_critical(self) -> bool:
        return abs(self.zeta - 2.0 * self.w0) < CRITICAL_RTOL * self.w0

    @property
    def w1(self) -> complex:
        """``sqrt(w0^2 - zeta^2/4)``; imaginary when overdamped."""
        return complex(np.sqrt(complex(self.w0**2 - self.zeta**2 / 4.0)))

    def phi_p(self, t):
        """``-(w0/w1) sin(w1 t) e^{-zeta t/2}``, finite through critical damping."""
        t = np.asarray(t, dtype=float)
        decay = np.exp(-0.5 * self.zeta * t)
        if self.is_critical:
            return -self.w0 * t * decay
        return -self.w0 * _sinc_t(self.w0**2 - self.zeta**2 / 4.0, t) * decay

    def phi_q(self, t):
        """``(zeta/(2 w1) sin(w1 t) + cos(w1 t)) e^{-zeta t/2}``."""
        t = np.asarray(t, dtype=float)
        decay = np.exp(-0.5 * self.zeta * t)
        if self.is_critical:
            return (1.0 + 0.5 * self.zeta * t) * decay
        w1sq = self.w0**2 - self.zeta**2 / 4.0
        return (0.5 * self.zeta * _sinc_t(w1sq, t) + _cos_t(w1sq, t)) * decay

    def abcf_kezhao(self, t):
        return 1j * self.lam * self.w0 * self.phi_p(t)


def _sinc_t(w1sq: float, t):
    """``sin(w1 t) / w1`` for real or imaginary ``w1`` given ``w1^2``."""
    if w1sq > 0:
        w1 = math.sqrt(w1sq)
        return np.sin(w1 * t) / w1
    if w1sq < 0:
        k = math.sqrt(-w1sq)
        return np.sinh(k * t) / k
    return t


def _cos_t(w1sq: float, t):
    if w1sq > 0:
        return np.cos(math.sqrt(w1sq) * t)
    if w1sq < 0:
        return np.cosh(math.sqrt(-w1sq) * t)
    return np.ones_like(t)


@dataclass(frozen=True)
class BathSpec:
    sd: SpectralDensity
    beta: float
    scheme: AbcfScheme = AbcfScheme.KEZHAO

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("inverse temperature must be positive")
        object.__setattr__(self, "scheme", AbcfScheme.parse(self.scheme))


def sd_eval(sd: SpectralDensity, w):
    """Evaluate ``S(w)`` for ``w >= 0``."""
    if np.any(np.asarray(w) < 0):
        raise ValueError("spectral density is defined for w >= 0")
    return sd.evaluate(w)


def _fourier_quad(g: Callable, t: float, kind: str, upper: float) -> float:
    """``int_0^upper g(w) {cos,sin}(w t) dw`` by adaptive Gauss-Kronrod."""
    t = float(t)
    if kind == "sin" and t == 0.0:
        return 0.0
    opts = dict(epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, full_output=1)
    if t == 0.0:
        out = integrate.quad(g, 0.0, upper, **opts)
    else:
        out = integrate.quad(g, 0.0, upper, weight=kind, wvar=t, **opts)
    val, err = out[0], out[1]
    # a fourth element is scipy's convergence warning
    if len(out) > 3 and err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature did not converge at t={t}: {out[3]}", err)
    return float(val)


def _kernel(sd: SpectralDensity, beta: float, which: str) -> Callable[[float], float]:
    """Integrand ``S(w)/pi * weight(w)`` for the requested thermal weight."""
    slope = sd.slope_at_zero()
    if which == "one":
        return lambda w: float(sd.evaluate(w)) / math.pi
    if which == "coth":

        def g(w):
            if w == 0.0:
                return 2.0 * slope / (beta * math.pi)
            return float(sd.evaluate(w) * coth_half(beta * w)) / math.pi

        return g
    if which == "tanh":
        return lambda w: float(sd.evaluate(w)) * math.tanh(beta * w / 4.0) / math.pi
    if which == "csch":

        def g(w):
            x = 0.5 * beta * w
            if x < 1e-4:
                # S(w) csch(x) -> 2 S'(0)/beta
                return (2.0 * slope / beta) * (1.0 - x * x / 6.0) / math.pi
            if x > 700.0:
                return 0.0
            return float(sd.evaluate(w)) / math.sinh(x) / math.pi

        return g
    raise ValueError(which)


def _quad_series(sd, beta, which, kind, t) -> np.ndarray:
    upper = sd.cutoff()
    g = _kernel(sd, beta, which)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    return np.array([_fourier_quad(g, ti, kind, upper) for ti in ts]).reshape(np.shape(t))


def _check_t(t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("correlation functions are evaluated for t >= 0")


def abcf(bath: BathSpec, t, method: str = "auto"):
    """Adjusted bath correlation function.

    Parameters
    ----------
    bath : BathSpec
    t : float or array_like
        Non-negative times.
    method : {"auto", "quad"}
        ``"auto"`` uses closed forms where they exist; ``"quad"`` forces
        adaptive quadrature of the defining integral (continuous SDs only).
    """
    _check_t(t)
    sd, beta, scheme = bath.sd, bath.beta, bath.scheme
    if scheme is AbcfScheme.KEZHAO:
        if method == "auto" or not sd.continuous:
            return sd.abcf_kezhao(t)
        return -1j * _quad_series(sd, beta, "one", "sin", t)
    if scheme is AbcfScheme.DIOSISTRUNZ:
        return bcf(bath, t, method=method)
    # Song-Shi
    if not sd.continuous:
        wk, ak = sd.frequencies, sd.weights
        wt = np.multiply.outer(np.asarray(t, dtype=float), wk)
        return np.sum(ak * (np.tanh(beta * wk / 4.0) * np.cos(wt) - 1j * np.sin(wt)), axis=-1)
    imag = sd.abcf_kezhao(t) if method == "auto" else -1j * _quad_series(sd, beta, "one", "sin", t)
    return _quad_series(sd, beta, "tanh", "cos", t) + imag


def alpha1(bath: BathSpec, t):
    """Noise part ``alpha(t) - abcf(t)`` of the BCF (real)."""
    _check_t(t)
    sd, beta, scheme = bath.sd, bath.beta, bath.scheme
    if scheme is AbcfScheme.DIOSISTRUNZ:
        return np.zeros(np.shape(t))
    thermal = coth_half if scheme is AbcfScheme.KEZHAO else _csch_half
    if not sd.continuous:
        wk, ak = sd.frequencies, sd.weights
        wt = np.multiply.outer(np.asarray(t, dtype=float), wk)
        return np.sum(ak * thermal(beta * wk) * np.cos(wt), axis=-1)
    which = "coth" if scheme is AbcfScheme.KEZHAO else "csch"
    return _quad_series(sd, beta, which, "cos", t)


def _csch_half(x):
    return 1.0 / np.sinh(0.5 * np.asarray(x, dtype=float))


def bcf(bath: BathSpec, t, method: str = "auto"):
    """Full BCF ``alpha(t) = Re part (coth kernel) - i (sin kernel)``."""
    _check_t(t)
    kz = BathSpec(bath.sd, bath.beta, AbcfScheme.KEZHAO)
    return alpha1(kz, t) + abcf(kz, t, method=method)
