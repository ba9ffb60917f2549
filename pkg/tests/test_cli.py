import json
import math

import numpy as np
import pytest

from cnmsse.basis import build_basis
from cnmsse.bath import BathSpec, Brownian, abcf
from cnmsse.cli import (
    GridMismatch, basis_check_table, compare_tables, main, parse_tolerances, population_header,
    read_table,
)
from cnmsse.config import ConfigError

SBM = """
[system]
model = sbm
eps = 0.0
delta = {delta}

[bath]
sd = discrete
modes = {c}:1.0
beta = 1.0

[basis]
n_max = 3

[run]
dt = {dt}
t_final = {tf}
output_stride = {stride}
n_traj = {n}
master_seed = 3

[check]
n_realizations = {nr}
n_times = 20
t_max = 5
"""

BROWNIAN = """
[system]
model = transfer
e_d = 1
e_a = 0
lam = 1
coupling_j = 0.5

[bath]
sd = brownian
lam = 1
w0 = 1
zeta = {zeta}
beta = 1

[basis]
choice = {choice}
n_max = {n_max}
truncation = triangular

[run]
dt = {dt}
t_final = {tf}
output_stride = 5
n_traj = {n}
master_seed = 8
formulation = {form}
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def sbm(tmp_path, name="sbm.ini", delta=0.5, c=0.2, dt=0.01, tf=2, stride=10, n=64, nr=1000):
    return write(tmp_path, name, SBM.format(delta=delta, c=c, dt=dt, tf=tf, stride=stride, n=n, nr=nr))


def brownian(tmp_path, name, zeta=2.0, choice="auto", n_max=4, dt=0.02, tf=4, n=40,
             form="extended_rescaled"):
    text = BROWNIAN.format(zeta=zeta, choice=choice, n_max=n_max, dt=dt, tf=tf, n=n, form=form)
    return write(tmp_path, name, text)


def test_zero_coupling_run_is_rabi(tmp_path):
    cfg = sbm(tmp_path, delta=1.0, c=0.0, dt=0.001, tf=20, stride=100, n=1)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    header, data = read_table(tmp_path / "o" / "populations.csv")
    t, p1 = data[:, 0], data[:, header.index("p1_norm")]
    assert t[-1] == pytest.approx(20.0)
    assert np.abs(p1 - np.cos(t) ** 2).max() < 1e-6


def test_run_outputs_and_determinism(tmp_path):
    cfg = sbm(tmp_path)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    a = (tmp_path / "a" / "populations.csv").read_bytes()
    assert a == (tmp_path / "b" / "populations.csv").read_bytes()
    first = a.decode().splitlines()[0]
    assert first == ",".join(population_header())
    assert first.split(",") == [
        "t", "re_rho11", "im_rho11", "re_rho12", "im_rho12", "re_rho21", "im_rho21", "re_rho22",
        "im_rho22", "trace_re", "trace_im", "p1_norm", "p2_norm", "p1_se", "p2_se",
    ]
    meta = json.loads((tmp_path / "a" / "meta.json").read_text())
    for key in ("config", "config_ini", "master_seed", "n_traj", "wall_time_s", "version",
                "hierarchy_dim", "n_aborted"):
        assert key in meta
    assert meta["hierarchy_dim"] == 32 and meta["n_traj"] == 64 and meta["master_seed"] == 3


def test_config_echo_reproduces_run(tmp_path):
    cfg = sbm(tmp_path)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "6", "--n-traj", "48"])
    echo = json.loads((tmp_path / "a" / "meta.json").read_text())["config_ini"]
    again = write(tmp_path, "echo.ini", echo)
    assert main(["run", "--config", again, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "populations.csv").read_bytes() == (tmp_path / "b" / "populations.csv").read_bytes()


def test_seed_override_changes_result(tmp_path):
    cfg = sbm(tmp_path)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "4"])
    assert (tmp_path / "a" / "populations.csv").read_bytes() != (tmp_path / "b" / "populations.csv").read_bytes()
    assert json.loads((tmp_path / "b" / "meta.json").read_text())["master_seed"] == 4


def test_run_against_oracle(tmp_path):
    cfg = sbm(tmp_path, n=400)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    assert main(["oracle", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    h, d = read_table(tmp_path / "r" / "oracle.csv")
    assert h == population_header()
    assert np.all(d[:, h.index("p1_se")] == 0)
    code = main(["compare", str(tmp_path / "r" / "populations.csv"), str(tmp_path / "r" / "oracle.csv"),
                 "--tol", "p1_norm=abs:0.02,se:3"])
    assert code == 0


def test_self_compare_and_failures(tmp_path, capsys):
    cfg = sbm(tmp_path)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    csv_a = str(tmp_path / "a" / "populations.csv")
    assert main(["compare", csv_a, csv_a]) == 0
    reports = compare_tables(read_table(csv_a), read_table(csv_a))
    assert all(r.max_abs == 0 and r.passed for r in reports)
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "9"])
    assert main(["compare", csv_a, str(tmp_path / "b" / "populations.csv")]) == 1
    long = sbm(tmp_path, "long.ini", tf=3)
    main(["run", "--config", long, "--out", str(tmp_path / "c")])
    assert main(["compare", csv_a, str(tmp_path / "c" / "populations.csv")]) == 2
    assert main(["compare", csv_a, csv_a, "--tol", "p1_norm=rel:3"]) == 2
    assert "grid" in capsys.readouterr().err


def test_compare_tables_semantics():
    t = np.arange(3.0)
    a = (["t", "p1_norm", "p1_se"], np.column_stack([t, [0.5, 0.5, 0.5], [0.01, 0.01, 0.01]]))
    b = (["t", "p1_norm", "p1_se"], np.column_stack([t, [0.5, 0.52, 0.5], [0.0, 0.0, 0.0]]))
    (r,) = compare_tables(a, b, parse_tolerances(["p1_norm=se:3"]))
    assert r.max_abs == pytest.approx(0.02) and r.max_se_rel == pytest.approx(2.0) and r.passed
    (r,) = compare_tables(a, b, parse_tolerances(["p1_norm=se:1.5"]))
    assert not r.passed
    (r,) = compare_tables(a, b, parse_tolerances(["p1_norm=abs:0.021,se:1"]))
    assert r.passed
    c = (["t", "p1_norm"], np.column_stack([t + 0.5, t]))
    with pytest.raises(GridMismatch):
        compare_tables(a, c)
    with pytest.raises(ConfigError):
        parse_tolerances(["p1_norm"])


def test_formulations_compare_equal(tmp_path):
    out = []
    for choice, form in (("auto", "extended_rescaled"), ("force_exponential", "exponential_rescaled_d")):
        cfg = brownian(tmp_path, f"{form}.ini", zeta=1.0, choice=choice, n_max=5, n=32, form=form)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / form)]) == 0
        out.append(str(tmp_path / form / "populations.csv"))
    assert main(["compare", *out]) == 0


def test_config_errors_exit_2(tmp_path):
    bad = write(tmp_path, "bad.ini", "[system]\nmodel = sbm\n")
    assert main(["run", "--config", bad]) == 2
    crit = brownian(tmp_path, "crit.ini", choice="force_exponential")
    assert main(["run", "--config", crit, "--out", str(tmp_path / "x")]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["oracle", "--config", brownian(tmp_path, "b.ini"), "--out", str(tmp_path / "x")]) == 2


def test_abort_exit_3(tmp_path):
    # RK4 is unstable for this hierarchy at dt = 0.25
    cfg = brownian(tmp_path, "unstable.ini", zeta=5.0, n_max=10, dt=0.25, tf=50, n=20)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "u")]) == 3


def test_basis_check(tmp_path):
    cfg = brownian(tmp_path, "b.ini")
    assert main(["basis-check", "--config", cfg, "--out", str(tmp_path / "bc")]) == 0
    h, d = read_table(tmp_path / "bc" / "basis_check.csv")
    for col in ("recon_err", "ode_fd_residual", "ode_closed_residual", "expm_residual"):
        assert d[:, h.index(col)].max() < 1e-8


def test_basis_check_flags_corrupted_eta():
    import dataclasses

    basis = build_basis(BathSpec(Brownian(1.0, 1.0, 2.0), 1.0))
    eta = basis.eta.copy()
    eta[0, 1] += 1e-3
    t = np.linspace(0, 10, 101)
    target = abcf(BathSpec(Brownian(1.0, 1.0, 2.0), 1.0), t)
    _, data, flagged = basis_check_table(dataclasses.replace(basis, eta=eta), target, t)
    assert flagged and data[:, 6:].max() > 1e-5
    _, _, flagged = basis_check_table(basis, target, t)
    assert not flagged


def test_noise_check_standard_errors_scale(tmp_path):
    tables = []
    for n in (1000, 100_000):
        cfg = sbm(tmp_path, f"n{n}.ini", nr=n)
        assert main(["noise-check", "--config", cfg, "--out", str(tmp_path / f"n{n}")]) == 0
        tables.append(read_table(tmp_path / f"n{n}" / "noise_check.csv"))
    (h, small), (_, large) = tables
    for col in h:
        if col.endswith("_se"):
            ratio = small[1:, h.index(col)] / large[1:, h.index(col)]
            assert abs(np.median(ratio) / math.sqrt(100) - 1) < 0.2, col


def test_bundled_config_by_name(tmp_path):
    assert main(["basis-check", "--config", "fig5_brownian_critical", "--out", str(tmp_path)]) == 0
