"""
Pseudo-Fock hierarchy, effective non-Hermitian generator, RK4 propagation
and ensemble reduction to the reduced density matrix.

The enlarged state of one trajectory is a ``d x M`` complex array whose
column ``m`` holds the auxiliary wavefunction of occupation vector
``space.states[m]``; column 0 is the physical wavefunction. Flattened
row-major it matches ``kron(system_operator, fock_operator)``.
"""
from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._kernels import rk4_block
from .basis import BasisSet
from .models import SystemModel
from .noise import FrequencyGrid, NoiseRealization, sample_batch, trajectory_rng

__all__ = [
    "Direction",
    "EnsembleAborted",
    "EnsembleResult",
    "EnsembleSpec",
    "FockSpace",
    "Formulation",
    "HierarchyOperator",
    "HierarchyState",
    "PropagationResult",
    "TrajectoryAborted",
    "Truncation",
    "apply_heff",
    "build_operator",
    "ladder_operators",
    "propagate",
    "run_ensemble",
]

ABORT_FRACTION = 0.01
DEFAULT_BLOCK = 32


class Truncation(enum.Enum):
    HYPERCUBE = "hypercube"
    TRIANGULAR = "triangular"

    @classmethod
    def parse(cls, value) -> "Truncation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown truncation {value!r}") from None


class Formulation(enum.Enum):
    EXTENDED_RESCALED = "extended_rescaled"
    EXTENDED_UNSCALED = "extended_unscaled"
    EXPONENTIAL_RESCALED_D = "exponential_rescaled_d"

    @classmethod
    def parse(cls, value) -> "Formulation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown formulation {value!r}") from None


class Direction(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class TrajectoryAborted(RuntimeError):
    def __init__(self, time: float, max_amplitude: float):
        super().__init__(f"non-finite amplitudes at t={time:g} (last finite max |psi0| = {max_amplitude:.3e})")
        self.time = time
        self.max_amplitude = max_amplitude


class EnsembleAborted(RuntimeError):
    def __init__(self, n_aborted: int, n_traj: int):
        super().__init__(f"{n_aborted} of {n_traj} trajectories aborted (limit {ABORT_FRACTION:.0%})")
        self.n_aborted = n_aborted
        self.n_traj = n_traj


# ---------------------------------------------------------------- Fock space


@dataclass(frozen=True, eq=False)
class FockSpace:
    """Truncated set of occupation vectors with a flat index.

    Hypercube keeps ``n_k <= caps[k]``; Triangular additionally requires
    ``sum(n) <= level``. States are in lexicographic order, vacuum first.
    """

    caps: tuple
    truncation: Truncation = Truncation.HYPERCUBE
    level: int | None = None
    states: np.ndarray = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        caps = tuple(int(c) for c in self.caps)
        if not caps or min(caps) < 0:
            raise ValueError("caps must be a non-empty tuple of non-negative integers")
        trunc = Truncation.parse(self.truncation)
        level = self.level
        if trunc is Truncation.TRIANGULAR:
            level = max(caps) if level is None else int(level)
            if level < 0:
                raise ValueError("triangular level must be non-negative")
        elif level is not None:
            raise ValueError("level only applies to triangular truncation")
        states = [n for n in itertools.product(*(range(c + 1) for c in caps))
                  if level is None or sum(n) <= level]
        arr = np.array(states, dtype=np.int64).reshape(len(states), len(caps))
        arr.setflags(write=False)
        object.__setattr__(self, "caps", caps)
        object.__setattr__(self, "truncation", trunc)
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "states", arr)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(states)})

    @classmethod
    def build(cls, K: int, n_max, truncation="hypercube", level: int | None = None) -> "FockSpace":
        """``n_max`` is a scalar cap for every mode or a per-mode sequence."""
        caps = (int(n_max),) * K if np.ndim(n_max) == 0 else tuple(n_max)
        if len(caps) != K:
            raise ValueError(f"{len(caps)} caps given for {K} modes")
        return cls(caps, Truncation.parse(truncation), level)

    @property
    def K(self) -> int:
        return len(self.caps)

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def __len__(self) -> int:
        return self.size

    def offset(self, n) -> int:
        try:
            return self._index[tuple(int(x) for x in n)]
        except KeyError:
            raise KeyError(f"occupation {tuple(n)} is outside the truncated space") from None

    def find(self, n) -> int | None:
        return self._index.get(tuple(int(x) for x in n))

    def occupation(self, offset: int) -> tuple:
        return tuple(int(x) for x in self.states[offset])


# ------------------------------------------------------ formulation weights


def _ladder_weights(basis: BasisSet, formulation: Formulation):
    """``(down, up)`` coefficients multiplying the lowering and raising terms."""
    if formulation is Formulation.EXPONENTIAL_RESCALED_D:
        if not basis.is_diagonal:
            raise ValueError("the sqrt(d) formulation requires a diagonal eta")
        root = np.sqrt(basis.d)
        return root, root * basis.phi0
    return basis.d, basis.phi0


def _check_dims(basis: BasisSet, space: FockSpace):
    if basis.K != space.K:
        raise ValueError(f"basis has {basis.K} modes but the Fock space has {space.K}")


# ----------------------------------------------- route 1: direct recursion


@dataclass
class HierarchyState:
    amplitudes: np.ndarray  # (d, M)
    direction: Direction = Direction.FORWARD
    formulation: Formulation = Formulation.EXTENDED_RESCALED

    @classmethod
    def initial(cls, model: SystemModel, space: FockSpace, direction=Direction.FORWARD,
                formulation=Formulation.EXTENDED_RESCALED) -> "HierarchyState":
        amp = np.zeros((model.dim, space.size), dtype=complex)
        amp[:, 0] = model.psi0
        return cls(amp, Direction(direction), Formulation.parse(formulation))


def _noise_value(noise, t: float, direction: Direction) -> complex:
    if noise is None:
        return 0.0
    if isinstance(noise, NoiseRealization):
        zp, zm = noise.eval(t)
        return complex(zp if direction is Direction.FORWARD else zm)
    if callable(noise):
        return complex(noise(t))
    return complex(noise)


def apply_heff(state: HierarchyState, t: float, noise, model: SystemModel, basis: BasisSet,
               space: FockSpace) -> np.ndarray:
    """``d psi / dt = -i H_eff psi`` assembled occupation by occupation.

    ``noise`` is a single :class:`NoiseRealization` (``Z+`` for forward,
    ``Z-`` for backward states), a callable ``t -> Z``, a constant, or
    ``None`` for no noise. Neighbours outside ``space`` contribute nothing.
    """
    psi = np.asarray(state.amplitudes)
    if psi.shape != (model.dim, space.size):
        raise ValueError(f"amplitudes have shape {psi.shape}, expected {(model.dim, space.size)}")
    _check_dims(basis, space)
    form = Formulation.parse(state.formulation)
    down, up = _ladder_weights(basis, form)
    eta = basis.eta
    unscaled = form is Formulation.EXTENDED_UNSCALED
    z = _noise_value(noise, t, state.direction)

    out = -1j * ((model.H + z * model.f) @ psi)
    fpsi = model.f @ psi
    K = space.K
    for i, n in enumerate(space.states):
        acc = np.zeros(model.dim, dtype=complex)
        for k in range(K):
            nk = n[k]
            up_n = n.copy()
            up_n[k] += 1
            j = space.find(up_n)
            if j is not None:
                acc += down[k] * (1.0 if unscaled else math.sqrt(nk + 1)) * fpsi[:, j]
            if nk > 0:
                lo_n = n.copy()
                lo_n[k] -= 1
                j = space.find(lo_n)
                acc -= up[k] * (nk if unscaled else math.sqrt(nk)) * fpsi[:, j]
        for k in range(K):
            if n[k] == 0:
                continue
            for kp in range(K):
                e = eta[k, kp]
                if e == 0:
                    continue
                m = n.copy()
                m[k] -= 1
                m[kp] += 1
                j = space.find(m)
                if j is None:
                    continue
                if unscaled or k == kp:
                    fac = n[k]
                else:
                    fac = math.sqrt(n[k] * (n[kp] + 1))
                out[:, i] += e * fac * psi[:, j]
        out[:, i] += acc
    return out


# -------------------------------------------------- route 2: ladder algebra


def ladder_operators(space: FockSpace, scaled: bool = True):
    """Sparse lowering and raising operators per mode on ``space``.

    Scaled: ``b|n> = sqrt(n_k)|n-e_k>``, ``b^dag|n> = sqrt(n_k+1)|n+e_k>``.
    Unscaled: ``a|n> = |n-e_k>``, ``a^dag|n> = (n_k+1)|n+e_k>``. Raising
    out of the space is dropped.
    """
    M = space.size
    lower, raise_ = [], []
    for k in range(space.K):
        rows, cols, vals = [], [], []
        for i, n in enumerate(space.states):
            if n[k] == 0:
                continue
            m = n.copy()
            m[k] -= 1
            rows.append(space.offset(m))
            cols.append(i)
            vals.append(math.sqrt(n[k]) if scaled else 1.0)
        low = sp.csr_matrix((vals, (rows, cols)), shape=(M, M), dtype=complex)
        rows, cols, vals = [], [], []
        for i, n in enumerate(space.states):
            m = n.copy()
            m[k] += 1
            j = space.find(m)
            if j is None:
                continue
            rows.append(j)
            cols.append(i)
            vals.append(math.sqrt(n[k] + 1) if scaled else n[k] + 1.0)
        rai = sp.csr_matrix((vals, (rows, cols)), shape=(M, M), dtype=complex)
        lower.append(low)
        raise_.append(rai)
    return lower, raise_


@dataclass(frozen=True, eq=False)
class HierarchyOperator:
    """``d Psi/dt = (L - i Z(t) F) Psi`` on the flattened enlarged state."""

    L: sp.csr_matrix
    F: sp.csr_matrix
    d: int
    M: int

    @property
    def size(self) -> int:
        return self.d * self.M

    def apply(self, psi, z) -> np.ndarray:
        return self.L @ psi - 1j * z * (self.F @ psi)


def build_operator(model: SystemModel, basis: BasisSet, space: FockSpace,
                   formulation=Formulation.EXTENDED_RESCALED) -> HierarchyOperator:
    """Assemble ``-i H_eff`` from ladder operators.

    ``-i H_eff = -i H_S - f sum_k up_k b_k^dag + f sum_k down_k b_k
    + sum_kk' eta_kk' b_k^dag b_k'``, with the formulation deciding the
    ladder scaling and the ``(down, up)`` weights.
    """
    form = Formulation.parse(formulation)
    _check_dims(basis, space)
    down, up = _ladder_weights(basis, form)
    low, rai = ladder_operators(space, scaled=form is not Formulation.EXTENDED_UNSCALED)
    M = space.size
    A = sp.csr_matrix((M, M), dtype=complex)
    N = sp.csr_matrix((M, M), dtype=complex)
    for k in range(space.K):
        A = A + down[k] * low[k] - up[k] * rai[k]
        for kp in range(space.K):
            if basis.eta[k, kp] != 0:
                N = N + basis.eta[k, kp] * (rai[k] @ low[kp])
    eye_s = sp.identity(model.dim, dtype=complex, format="csr")
    eye_f = sp.identity(M, dtype=complex, format="csr")
    L = (sp.kron(sp.csr_matrix(-1j * model.H), eye_f) + sp.kron(sp.csr_matrix(model.f), A)
         + sp.kron(eye_s, N))
    F = sp.kron(sp.csr_matrix(model.f), eye_f)
    L, F = sp.csr_matrix(L), sp.csr_matrix(F)
    for m in (L, F):
        m.eliminate_zeros()
        m.sort_indices()
    return HierarchyOperator(L, F, model.dim, M)


# ---------------------------------------------------------------- propagation


def _n_steps(dt: float, t_final: float) -> int:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    n = int(round(t_final / dt))
    if abs(n * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"t_final={t_final} is not an integer multiple of dt={dt}")
    return n


def _split_csr(m: sp.csr_matrix) -> tuple:
    """``(indptr, indices, data)`` of the real part, then of the imaginary part."""
    out = []
    for part in (m.real, m.imag):
        part = sp.csr_matrix(part)
        part.eliminate_zeros()
        part.sort_indices()
        out += [part.indptr.astype(np.uint64), part.indices.astype(np.uint64),
                np.ascontiguousarray(part.data, dtype=float)]
    return tuple(out)


class _Block:
    """Numba-side copy of an operator, reused across trajectory blocks."""

    def __init__(self, op: HierarchyOperator):
        self.op = op
        self.L = _split_csr(op.L)
        self.F = _split_csr(op.F)
        self.rows = np.arange(op.d, dtype=np.int64) * op.M

    def run(self, psi0, zp, zm, h: float, nsteps: int, stride: int):
        """Propagate ``B`` forward and ``B`` backward columns.

        ``zp, zm`` have shape ``(2 nsteps + 1, B)``. Returns forward and
        backward ``psi^0`` series of shape ``(n_out, d, B)`` and the failing
        step per trajectory (``-1`` if finite throughout).
        """
        B = zp.shape[1]
        C = 2 * B
        z = np.concatenate([zp, zm], axis=1)
        z = np.ascontiguousarray(np.concatenate([z.real, z.imag], axis=1))
        x = np.zeros((self.op.size, 2 * C))
        x[self.rows, :C] = psi0.real[:, None]
        x[self.rows, C:] = psi0.imag[:, None]
        out = np.zeros((nsteps // stride + 1, self.op.d, 2 * C))
        fail = np.full(C, -1, dtype=np.int64)
        rk4_block(self.L, self.F, z, x.ravel(), float(h), int(nsteps), int(stride), self.rows, out, fail)
        with np.errstate(invalid="ignore"):  # inf * 1j in aborted columns
            out = out[..., :C] + 1j * out[..., C:]
        fb = np.stack([fail[:B], fail[B:]])
        f = np.where((fb < 0).all(axis=0), -1, np.where(fb < 0, np.iinfo(np.int64).max, fb).min(axis=0))
        return out[:, :, :B], out[:, :, B:], f


def _rk4_reference(op: HierarchyOperator, psi0, zfun, h: float, nsteps: int, stride: int):
    """Plain sparse RK4 of one column, kept as an independent check on the kernel."""
    x = np.zeros(op.size, dtype=complex)
    x[np.arange(op.d) * op.M] = psi0
    rows = np.arange(op.d) * op.M
    out = [x[rows].copy()]
    for n in range(nsteps):
        t = n * h
        k1 = op.apply(x, zfun(t))
        k2 = op.apply(x + 0.5 * h * k1, zfun(t + 0.5 * h))
        k3 = op.apply(x + 0.5 * h * k2, zfun(t + 0.5 * h))
        k4 = op.apply(x + h * k3, zfun(t + h))
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (n + 1) % stride == 0:
            out.append(x[rows].copy())
    return np.array(out)


@dataclass(frozen=True)
class PropagationResult:
    t: np.ndarray
    forward: np.ndarray  # (nt, d)
    backward: np.ndarray

    @property
    def rho(self) -> np.ndarray:
        return np.einsum("ta,tb->tab", self.forward, self.backward.conj())


def propagate(model: SystemModel, basis: BasisSet, space: FockSpace, noise, dt: float,
              t_final: float, formulation=Formulation.EXTENDED_RESCALED, output_stride: int = 1,
              backend: str = "numba") -> PropagationResult:
    """RK4 for one trajectory pair; ``psi^0`` every ``output_stride`` steps.

    ``noise`` is a single :class:`NoiseRealization` or ``None`` (no noise).
    It is evaluated exactly at the stage times ``t``, ``t + dt/2``,
    ``t + dt``. ``backend="reference"`` uses plain scipy sparse products.

    Raises
    ------
    TrajectoryAborted
        If either direction produces non-finite amplitudes.
    """
    nsteps = _n_steps(dt, t_final)
    stride = int(output_stride)
    if stride < 1:
        raise ValueError("output_stride must be >= 1")
    op = build_operator(model, basis, space, formulation)
    n_half = 2 * nsteps + 1
    if noise is None:
        zp = zm = np.zeros((n_half, 1), dtype=complex)
    else:
        if noise.batch_shape:
            raise ValueError("propagate takes a single realization")
        zp, zm = noise.on_grid(0.5 * dt, n_half)
        zp, zm = zp[:, None], zm[:, None]
    t = np.arange(nsteps // stride + 1) * stride * dt
    if backend == "numba":
        fwd, bwd, fail = _Block(op).run(model.psi0, zp, zm, dt, nsteps, stride)
        fwd, bwd, fail = fwd[:, :, 0], bwd[:, :, 0], int(fail[0])
    elif backend == "reference":
        half = 0.5 * dt
        fwd = _rk4_reference(op, model.psi0, lambda s: zp[int(round(s / half)), 0], dt, nsteps, stride)
        bwd = _rk4_reference(op, model.psi0, lambda s: zm[int(round(s / half)), 0], dt, nsteps, stride)
        bad = ~(np.isfinite(fwd).all(axis=1) & np.isfinite(bwd).all(axis=1))
        fail = int(np.argmax(bad)) * stride if bad.any() else -1
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if fail >= 0:
        good = np.concatenate([fwd, bwd], axis=1)
        good = good[np.isfinite(good).all(axis=1)]
        raise TrajectoryAborted(fail * dt, float(np.abs(good).max()) if good.size else float("nan"))
    return PropagationResult(t, fwd, bwd)


# ------------------------------------------------------------------- ensemble


@dataclass(frozen=True)
class EnsembleSpec:
    """Everything that fixes an ensemble run, including its seed."""

    model: SystemModel
    basis: BasisSet
    space: FockSpace
    grid: FrequencyGrid
    beta: float
    formulation: Formulation = Formulation.EXTENDED_RESCALED
    dt: float = 0.01
    t_final: float = 10.0
    output_stride: int = 1
    n_traj: int = 1
    master_seed: int = 0
    threads: int = 1
    block: int = DEFAULT_BLOCK
    scheme: str = "KeZhao"

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.threads < 1 or self.block < 1 or self.output_stride < 1:
            raise ValueError("threads, block and output_stride must be >= 1")
        _n_steps(self.dt, self.t_final)
        _check_dims(self.basis, self.space)
        object.__setattr__(self, "formulation", Formulation.parse(self.formulation))


@dataclass(frozen=True)
class EnsembleResult:
    """Trajectory average of ``psi+ psi-^dag`` with batch-means errors.

    ``se_raw`` and ``se_norm`` are per-population standard errors of the raw
    and trace-normalised populations; ``se_trace`` holds the SE of the real
    and imaginary parts of the trace as a complex number.
    """

    t: np.ndarray
    rho: np.ndarray  # (nt, d, d)
    se_raw: np.ndarray  # (nt, d)
    se_norm: np.ndarray  # (nt, d)
    se_trace: np.ndarray  # (nt,) complex
    n_traj: int
    n_aborted: int
    n_batches: int
    master_seed: int
    hierarchy_dim: int
    aborted: tuple = ()  # (trajectory index, abort time)

    @property
    def trace(self) -> np.ndarray:
        return np.trace(self.rho, axis1=1, axis2=2)

    @property
    def populations(self) -> np.ndarray:
        """Trace-normalised ``Re rho_aa / Re Tr rho``."""
        return np.real(np.diagonal(self.rho, axis1=1, axis2=2)) / self.trace.real[:, None]

    @property
    def raw_populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.rho, axis1=1, axis2=2))

    @property
    def se_trace_abs(self) -> np.ndarray:
        return np.abs(self.se_trace)

    @property
    def hermiticity_deviation(self) -> np.ndarray:
        return np.abs(self.rho - np.conj(np.swapaxes(self.rho, 1, 2))).max(axis=(1, 2))


def _batch_of(n_traj: int):
    nb = max(1, math.isqrt(n_traj))
    idx = np.arange(n_traj)
    return nb, (idx * nb) // n_traj


def _chunk_work(spec: EnsembleSpec, prop: _Block, nsteps: int, lo: int, hi: int):
    rngs = [trajectory_rng(spec.master_seed, i) for i in range(lo, hi)]
    nr = sample_batch(spec.grid, spec.beta, rngs, scheme=spec.scheme)
    zp, zm = nr.on_grid(0.5 * spec.dt, 2 * nsteps + 1)
    return prop.run(spec.model.psi0, zp, zm, spec.dt, nsteps, spec.output_stride)


def run_ensemble(spec: EnsembleSpec, progress=None) -> EnsembleResult:
    """Average ``psi+ psi-^dag`` over ``spec.n_traj`` trajectories.

    Trajectory ``i`` draws its noise from ``trajectory_rng(master_seed, i)``
    and trajectories are reduced in index order, so the result does not
    depend on ``threads``. Non-finite trajectories are dropped and counted.

    Raises
    ------
    EnsembleAborted
        If more than 1% of trajectories abort.
    """
    nsteps = _n_steps(spec.dt, spec.t_final)
    op = build_operator(spec.model, spec.basis, spec.space, spec.formulation)
    prop = _Block(op)
    d = spec.model.dim
    nt = nsteps // spec.output_stride + 1
    N = spec.n_traj
    nb, batch = _batch_of(N)
    bsum = np.zeros((nb, nt, d, d), dtype=complex)
    bcount = np.zeros(nb, dtype=np.int64)
    aborted = []
    bounds = [(lo, min(lo + spec.block, N)) for lo in range(0, N, spec.block)]

    def consume(lo, hi, res):
        fwd, bwd, fail = res
        ok = fail < 0
        for j in np.flatnonzero(~ok):
            aborted.append((lo + int(j), float(fail[j] * spec.dt)))
        if not ok.any():
            return
        # (nt, d, B) x (nt, d, B) -> (B, nt, d, d)
        outer = np.einsum("tab,tcb->btac", fwd[..., ok], bwd[..., ok].conj())
        ids = batch[lo:hi][ok]
        np.add.at(bsum, ids, outer)
        np.add.at(bcount, ids, 1)
        if progress is not None:
            progress(hi, N)

    if spec.threads == 1:
        for lo, hi in bounds:
            consume(lo, hi, _chunk_work(spec, prop, nsteps, lo, hi))
    else:
        window = 4 * spec.threads
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            for w0 in range(0, len(bounds), window):
                part = bounds[w0 : w0 + window]
                futures = [pool.submit(_chunk_work, spec, prop, nsteps, lo, hi) for lo, hi in part]
                for (lo, hi), fut in zip(part, futures):
                    consume(lo, hi, fut.result())

    n_ok = int(bcount.sum())
    n_ab = N - n_ok
    if n_ab > ABORT_FRACTION * N:
        raise EnsembleAborted(n_ab, N)
    rho = bsum.sum(axis=0) / n_ok

    live = bcount > 0
    bm = bsum[live] / bcount[live, None, None, None]
    k = bm.shape[0]
    pops = np.real(np.diagonal(bm, axis1=2, axis2=3))  # (k, nt, d)
    tr = np.trace(bm, axis1=2, axis2=3)  # (k, nt)
    if k >= 2:
        root = math.sqrt(k)
        se_raw = pops.std(axis=0, ddof=1) / root
        se_norm = (pops / tr.real[..., None]).std(axis=0, ddof=1) / root
        se_tr = (tr.real.std(axis=0, ddof=1) + 1j * tr.imag.std(axis=0, ddof=1)) / root
    else:
        se_raw = np.full((nt, d), np.nan)
        se_norm = np.full((nt, d), np.nan)
        se_tr = np.full(nt, np.nan + 1j * np.nan)
    t = np.arange(nt) * spec.output_stride * spec.dt
    return EnsembleResult(t, rho, se_raw, se_norm, se_tr, N, n_ab, k, spec.master_seed, op.size,
                          tuple(aborted))
