import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cnmsse.basis import BasisSet, Family, build_basis, exponential_basis
from cnmsse.bath import BathSpec, Brownian, Discrete
from cnmsse.hierarchy import (
    Direction, EnsembleAborted, EnsembleSpec, FockSpace, Formulation, HierarchyState,
    TrajectoryAborted, Truncation, apply_heff, build_operator, ladder_operators, propagate,
    run_ensemble,
)
from cnmsse.models import SystemModel, spin_boson, transfer
from cnmsse.noise import discretize, sample, trajectory_rng

# ------------------------------------------------------------------ Fock space


@given(K=st.integers(1, 3), n_max=st.integers(0, 4))
def test_hypercube_size_and_bijection(K, n_max):
    s = FockSpace.build(K, n_max)
    assert s.size == (n_max + 1) ** K
    for i in range(s.size):
        assert s.offset(s.occupation(i)) == i
    assert s.occupation(0) == (0,) * K


@given(caps=st.lists(st.integers(0, 4), min_size=1, max_size=3), level=st.integers(0, 6))
def test_triangular_space(caps, level):
    s = FockSpace.build(len(caps), caps, "triangular", level)
    expected = sum(1 for n in np.ndindex(*(c + 1 for c in caps)) if sum(n) <= level)
    assert s.size == expected
    assert all(sum(n) <= level for n in s.states.tolist())
    assert s.find(tuple(c + 1 for c in caps)) is None
    with pytest.raises(KeyError):
        s.offset(tuple(c + 1 for c in caps))


def test_space_validation():
    with pytest.raises(ValueError):
        FockSpace.build(2, [1, 2, 3])
    with pytest.raises(ValueError):
        FockSpace.build(2, 3, "hypercube", level=2)
    with pytest.raises(ValueError):
        Truncation.parse("spherical")


# ------------------------------------------------------------ single steps


def _zero_model():
    return SystemModel(np.zeros((2, 2)), np.zeros((2, 2)), [1, 0])


def test_pure_exponential_tier():
    nu = 0.5 + 1j
    basis = exponential_basis([nu], [1.0])
    space = FockSpace.build(1, 4)
    m = _zero_model()
    for form in Formulation:
        amp = np.zeros((2, space.size), dtype=complex)
        amp[:, space.offset((3,))] = [0.3, -0.7j]
        out = apply_heff(HierarchyState(amp, formulation=form), 0.0, None, m, basis, space)
        np.testing.assert_allclose(out[:, space.offset((3,))], -3 * nu * amp[:, space.offset((3,))],
                                   atol=1e-15)
        assert np.count_nonzero(out[:, [i for i in range(space.size) if i != space.offset((3,))]]) == 0


def test_ladder_unit_action():
    space = FockSpace.build(1, 3)
    low, rai = ladder_operators(space)
    v0 = np.zeros(space.size)
    v0[0] = 1
    v1 = np.zeros(space.size)
    v1[1] = 1
    np.testing.assert_array_equal(rai[0] @ v0, v1)
    np.testing.assert_array_equal(low[0] @ v1, v0)
    ulow, urai = ladder_operators(space, scaled=False)
    v2 = np.zeros(space.size)
    v2[2] = 1
    np.testing.assert_array_equal(urai[0] @ v1, 2 * v2)
    np.testing.assert_array_equal(ulow[0] @ v2, v1)


def test_initial_state():
    space = FockSpace.build(2, 3)
    m = transfer(1, 0, 1, 0.5)
    st_ = HierarchyState.initial(m, space)
    np.testing.assert_array_equal(st_.amplitudes[:, 0], m.psi0)
    assert np.count_nonzero(st_.amplitudes[:, 1:]) == 0


def _random_basis(rng, K, diagonal):
    if diagonal:
        nus = rng.uniform(0.1, 2, K) + 1j * rng.uniform(-3, 3, K)
        d = rng.normal(size=K) + 1j * rng.normal(size=K)
        return exponential_basis(nus, d)
    eta = rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K))
    phi0 = rng.normal(size=K) + 1j * rng.normal(size=K)
    d = rng.normal(size=K) + 1j * rng.normal(size=K)
    return BasisSet(Family.DAMPED_SINCOS, eta, phi0, d)


def _random_model(rng):
    h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    f = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    psi = rng.normal(size=2) + 1j * rng.normal(size=2)
    return SystemModel(h + h.conj().T, f + f.conj().T, psi / np.linalg.norm(psi))


@given(seed=st.integers(0, 2**32 - 1), K=st.integers(1, 3), n_max=st.integers(1, 4),
       trunc=st.sampled_from(list(Truncation)), form=st.sampled_from(list(Formulation)))
def test_direct_recursion_equals_ladder_operator(seed, K, n_max, trunc, form):
    rng = np.random.default_rng(seed)
    basis = _random_basis(rng, K, diagonal=form is Formulation.EXPONENTIAL_RESCALED_D or K == 1)
    model = _random_model(rng)
    space = FockSpace.build(K, n_max, trunc)
    amp = rng.normal(size=(2, space.size)) + 1j * rng.normal(size=(2, space.size))
    z = complex(rng.normal(), rng.normal())
    direct = apply_heff(HierarchyState(amp, Direction.FORWARD, form), 0.0, z, model, basis, space)
    op = build_operator(model, basis, space, form)
    ladder = op.apply(amp.ravel(), z).reshape(amp.shape)
    scale = max(1.0, np.abs(direct).max())
    assert np.abs(direct - ladder).max() / scale < 1e-12


def test_sqrt_d_requires_diagonal_eta():
    basis = build_basis(BathSpec(Brownian(1, 1, 2), 1.0))
    with pytest.raises(ValueError, match="diagonal"):
        build_operator(transfer(1, 0, 1, 0.5), basis, FockSpace.build(2, 2), "exponential_rescaled_d")


def test_dimension_mismatch():
    basis = exponential_basis([1.0], [1.0])
    with pytest.raises(ValueError):
        build_operator(spin_boson(0, 1), basis, FockSpace.build(2, 2))


# -------------------------------------------------------------- propagation


def test_closed_system_rabi():
    basis = build_basis(BathSpec(Discrete([(0.0, 1.0)]), 1.0))
    res = propagate(spin_boson(0, 0.5), basis, FockSpace.build(2, 3), None, 1e-3, 20.0,
                    output_stride=100)
    p1 = np.real(res.rho[:, 0, 0])
    assert np.abs(p1 - np.cos(0.5 * res.t) ** 2).max() < 1e-6


def _fig1_setup():
    bath = BathSpec(Discrete([(0.2, 1.0)]), 1.0)
    basis = build_basis(bath)
    noise = sample(discretize(bath.sd), 1.0, trajectory_rng(3, 0))
    return spin_boson(0, 0.5), basis, noise


def test_fourth_order_convergence():
    model, basis, noise = _fig1_setup()
    space = FockSpace.build(2, 3)
    ends = [propagate(model, basis, space, noise, dt, 4.0).forward[-1] for dt in (0.2, 0.1, 0.05)]
    ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
    assert 12 < ratio < 20


def test_compiled_kernel_matches_reference():
    model, basis, noise = _fig1_setup()
    space = FockSpace.build(2, 3)
    a = propagate(model, basis, space, noise, 0.01, 3.0, output_stride=10)
    b = propagate(model, basis, space, noise, 0.01, 3.0, output_stride=10, backend="reference")
    np.testing.assert_allclose(a.forward, b.forward, atol=1e-13)
    np.testing.assert_allclose(a.backward, b.backward, atol=1e-13)


@pytest.mark.parametrize("zeta", [1.0, 5.0])
def test_formulations_agree_on_a_trajectory(zeta):
    bath = BathSpec(Brownian(1.0, 1.0, zeta), 1.0)
    model = transfer(1, 0, 1, 0.5)
    noise = sample(discretize(bath.sd), 1.0, trajectory_rng(9, 4))
    space = FockSpace.build(2, 6, "triangular")
    ext = propagate(model, build_basis(bath), space, noise, 0.01, 5.0, output_stride=10)
    exp = build_basis(bath, "force_exponential")
    for form in Formulation:
        other = propagate(model, exp, space, noise, 0.01, 5.0, form, output_stride=10)
        np.testing.assert_allclose(other.forward, ext.forward, atol=1e-10)
        np.testing.assert_allclose(other.backward, ext.backward, atol=1e-10)


@pytest.mark.parametrize("sd", [Brownian(1.0, 1.0, 2.0), Discrete([(0.2, 1.0), (0.3, 2.0)])], ids=repr)
def test_unscaled_and_rescaled_share_psi0(sd):
    bath = BathSpec(sd, 1.0)
    basis = build_basis(bath)
    assert not basis.is_diagonal
    model = transfer(1, 0, 1, 0.5)
    noise = sample(discretize(sd), 1.0, trajectory_rng(4, 1))
    space = FockSpace.build(basis.K, 3)
    a = propagate(model, basis, space, noise, 0.01, 5.0, "extended_rescaled", 10)
    b = propagate(model, basis, space, noise, 0.01, 5.0, "extended_unscaled", 10)
    assert np.abs(a.forward - b.forward).max() < 1e-8
    assert np.abs(a.backward - b.backward).max() < 1e-8


def test_truncation_changes_shrink():
    model, basis, noise = _fig1_setup()
    runs = [propagate(model, basis, FockSpace.build(2, n), noise, 0.01, 10.0, output_stride=10).rho
            for n in range(1, 7)]
    gaps = [np.abs(b - a).max() for a, b in zip(runs, runs[1:])]
    assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))


def test_divergence_aborts_trajectory():
    basis = exponential_basis([-60.0], [1.0])  # growing mode
    with pytest.raises(TrajectoryAborted) as info:
        propagate(spin_boson(0, 0.5), basis, FockSpace.build(1, 3), None, 0.01, 10.0)
    assert 0 < info.value.time <= 10.0


def test_t_final_must_be_multiple_of_dt():
    model, basis, noise = _fig1_setup()
    with pytest.raises(ValueError):
        propagate(model, basis, FockSpace.build(2, 1), noise, 0.03, 1.0)


# ----------------------------------------------------------------- ensembles


def _spec(**kw):
    bath = BathSpec(Discrete([(0.2, 1.0)]), 1.0)
    basis = build_basis(bath)
    base = dict(model=spin_boson(0, 0.5), basis=basis, space=FockSpace.build(2, 3),
                grid=discretize(bath.sd), beta=1.0, dt=0.01, t_final=2.0, output_stride=20,
                n_traj=200, master_seed=5, block=16)
    base.update(kw)
    return EnsembleSpec(**base)


def test_single_decoupled_trajectory_is_pure():
    bath = BathSpec(Discrete([(0.0, 1.0)]), 1.0)
    res = run_ensemble(_spec(basis=build_basis(bath), grid=discretize(bath.sd), n_traj=1))
    np.testing.assert_allclose(res.trace, 1.0, atol=1e-10)
    for r in res.rho:
        assert np.linalg.matrix_rank(r, tol=1e-9) == 1
    assert np.all(np.isnan(res.se_norm))


def test_ensemble_independent_of_threads_and_block():
    a = run_ensemble(_spec(threads=1))
    b = run_ensemble(_spec(threads=3, block=7))
    np.testing.assert_array_equal(a.rho, b.rho)
    np.testing.assert_array_equal(a.se_norm, b.se_norm)


def test_ensemble_trace_and_hermiticity():
    res = run_ensemble(_spec(n_traj=400))
    assert np.all(np.abs(res.trace.real - 1) <= np.maximum(5 * res.se_trace.real, 1e-12))
    assert res.hierarchy_dim == 2 * 16
    np.testing.assert_allclose(res.populations.sum(axis=1), 1.0, atol=1e-12)


def test_ensemble_abort_threshold():
    basis = exponential_basis([-60.0], [1.0])
    spec = _spec(basis=basis, space=FockSpace.build(1, 3), t_final=10.0, output_stride=100, n_traj=40)
    with pytest.raises(EnsembleAborted) as info:
        run_ensemble(spec)
    assert info.value.n_aborted == 40


def test_ensemble_spec_validation():
    with pytest.raises(ValueError):
        _spec(n_traj=0)
    with pytest.raises(ValueError):
        _spec(threads=0)
    with pytest.raises(ValueError):
        _spec(t_final=1.005)
