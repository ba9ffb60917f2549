import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cnmsse.bath import Discrete, OhmicExp
from cnmsse.noise import (
    FrequencyGrid, discretize, empirical_correlators, mixing_amplitudes, sample,
    sample_batch, streamed_correlators, trajectory_rng,
)

DISC = Discrete([(0.2, 1.0)])


def test_discrete_grid_is_its_mode():
    g = discretize(DISC)
    np.testing.assert_allclose(g.omegas, [1.0])
    np.testing.assert_allclose(g.weights, [0.02], rtol=1e-15)


def test_riemann_sum_of_ohmic_exp():
    sd = OhmicExp(0.157, 7.5)
    g = discretize(sd, 2000, 75.0)
    dw = 75.0 / 2000
    w = (np.arange(2000) + 0.5) * dw
    assert g.weights.sum() == pytest.approx(np.sum(sd.evaluate(w)) * dw / math.pi, rel=1e-14)
    # the truncated integral differs from alpha wc^2 / pi only by the e^{-10} tail
    assert g.weights.sum() == pytest.approx(0.157 * 7.5**2 / math.pi, rel=2e-3)


def test_single_mode_grid():
    g = discretize(OhmicExp(0.157, 7.5), 1, 10.0)
    assert len(g) == 1


def test_mixing_amplitudes_discrete():
    u, v, w = mixing_amplitudes(discretize(DISC), 1.0)
    nbar = 1 / (math.e - 1)
    assert u[0] == pytest.approx(math.sqrt(0.02 * (nbar + 1) / 2), rel=1e-14)
    assert v[0] == pytest.approx(nbar * math.sqrt(0.02 / (2 * (nbar + 1))), rel=1e-14)
    assert w[0] == u[0]


def test_zero_temperature_limit():
    _, v, _ = mixing_amplitudes(discretize(DISC), 1e4)
    assert v[0] == 0.0


class _Fixed:
    """Generator stand-in returning preset standard normals."""

    def __init__(self, re, im):
        self.z = np.array([re, im], dtype=float)

    def standard_normal(self, shape):
        return self.z.reshape(shape) * math.sqrt(2.0)


def test_eval_linearity_and_unit_draw():
    g = discretize(DISC)
    zero = sample(g, 1.0, _Fixed([0.0, 0.0], [0.0, 0.0]))
    assert zero.eval(0.3) == (0, 0)
    nr = sample(g, 1.0, _Fixed([1.0, 0.0], [0.0, 0.0]))  # g1 = 1, g2 = 0
    u, v, w = mixing_amplitudes(g, 1.0)
    zp, zm = nr.eval(0.0)
    assert zp == pytest.approx(u[0] + w[0], rel=1e-14)
    assert zm == pytest.approx(v[0] + w[0], rel=1e-14)
    assert nr.D is nr.B or np.array_equal(nr.D, nr.B)


@given(st.integers(0, 2**32 - 1))
def test_conjugated_draws(seed):
    g = discretize(Discrete([(0.3, 0.7), (0.2, 1.9)]))
    rng = np.random.default_rng(seed)
    re, im = rng.standard_normal((2, 4)) / math.sqrt(2)
    a = sample(g, 1.3, _Fixed(re, im))
    b = sample(g, 1.3, _Fixed(re, -im))
    u, v, w = mixing_amplitudes(g, 1.3)
    g1 = (re + 1j * im)[:2]
    g2 = (re + 1j * im)[2:]
    # recomputed from the definitions with conjugated Gaussians
    np.testing.assert_allclose(b.A, u * np.conj(g1) + v * g2, atol=1e-15)
    np.testing.assert_allclose(b.B, w * (g1 + np.conj(g2)), atol=1e-15)
    np.testing.assert_allclose(b.C, v * np.conj(g1) + u * g2, atol=1e-15)
    # real mixing amplitudes: conjugating the draws conjugates every coefficient
    for k in "ABCD":
        np.testing.assert_allclose(getattr(b, k), np.conj(getattr(a, k)), atol=1e-15)
    t = np.linspace(0, 3, 5)
    np.testing.assert_allclose(b.eval(t)[0], np.conj(a.eval(-t)[0]), atol=1e-14)


def test_eval_is_exact_sum():
    g = discretize(OhmicExp(0.1, 2.0), 200, 20.0)
    nr = sample(g, 2.0, trajectory_rng(5, 0))
    t = np.array([0.0, 0.37, 3.1])
    direct = [np.sum(nr.A * np.exp(-1j * g.omegas * s) + nr.B * np.exp(1j * g.omegas * s)) for s in t]
    np.testing.assert_allclose(nr.eval(t)[0], direct, atol=1e-13)


def test_on_grid_matches_eval():
    g = discretize(OhmicExp(0.157, 7.5), 3000)
    nr = sample_batch(g, 5.0, [trajectory_rng(1, i) for i in range(3)])
    zp, zm = nr.on_grid(0.005, 2001)
    ep, em = nr.eval(np.arange(2001) * 0.005)
    np.testing.assert_allclose(zp, ep.T, atol=1e-11)
    np.testing.assert_allclose(zm, em.T, atol=1e-11)


def test_trajectory_streams_are_reproducible_and_distinct():
    a = trajectory_rng(7, 3).standard_normal(4)
    np.testing.assert_array_equal(a, trajectory_rng(7, 3).standard_normal(4))
    assert not np.array_equal(a, trajectory_rng(7, 4).standard_normal(4))
    assert not np.array_equal(a, trajectory_rng(8, 3).standard_normal(4))


@pytest.fixture(scope="module")
def discrete_ensemble():
    g = discretize(DISC)
    return g, sample_batch(g, 1.0, [trajectory_rng(11, i) for i in range(100_000)])


def test_mean_vanishes(discrete_ensemble):
    _, nr = discrete_ensemble
    t = np.linspace(0, 10, 50)
    zp, _ = nr.eval(t)
    se = zp.real.std(0, ddof=1) / math.sqrt(zp.shape[0])
    assert np.all(np.abs(zp.real.mean(0)) < 5 * se)


def test_correlators_match_targets(discrete_ensemble):
    g, nr = discrete_ensemble
    est = empirical_correlators(nr, np.linspace(0, 10, 50), g)
    assert all(est.within(5.0).values())
    assert est.target_alpha1[0] == pytest.approx(0.02 / math.tanh(0.5), rel=1e-14)
    assert np.all(np.abs(est.zpzp.imag) <= 5 * est.se_zpzp.imag)


def test_streamed_equals_in_memory():
    g = discretize(DISC)
    t = np.linspace(0, 5, 7)
    nr = sample_batch(g, 1.0, [trajectory_rng(2, i) for i in range(3000)])
    a = empirical_correlators(nr, t, g)
    b = streamed_correlators(g, 1.0, t, 3000, master_seed=2, chunk=700)
    for name in ("zpzp", "zmzm", "zpzm_conj", "se_zpzp", "se_zmzm", "se_zpzm_conj"):
        np.testing.assert_allclose(getattr(b, name), getattr(a, name), atol=1e-14)


def test_too_few_realizations_rejected():
    g = discretize(DISC)
    with pytest.raises(ValueError):
        empirical_correlators(sample_batch(g, 1.0, [trajectory_rng(0, i) for i in range(10)]), [0.0], g)


def test_grid_validation():
    with pytest.raises(ValueError):
        FrequencyGrid(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        discretize(OhmicExp(0.1, 1.0), 0)
