"""Command line entry point: ``cnmsse {run,oracle,noise-check,basis-check,compare}``.

Exit codes: 0 success, 1 failed comparison or flagged basis residual,
2 configuration error, 3 too many aborted trajectories.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .basis import BasisSet, DegenerateDecompositionError, reconstruct_abcf, validate_basis
from .bath import abcf
from .config import ConfigError, RunConfig, load_config
from .hierarchy import EnsembleAborted, EnsembleResult, run_ensemble
from .noise import streamed_correlators
from .oracle import EDConfig, TailError, exact_discrete

log = logging.getLogger("cnmsse")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
BASIS_TOL = 1e-8
FLOAT_FMT = "%.17g"


# ------------------------------------------------------------------ tables


def population_header(d: int = 2) -> list[str]:
    cols = ["t"]
    for a in range(1, d + 1):
        for b in range(1, d + 1):
            cols += [f"re_rho{a}{b}", f"im_rho{a}{b}"]
    cols += ["trace_re", "trace_im"]
    cols += [f"p{a}_norm" for a in range(1, d + 1)]
    cols += [f"p{a}_se" for a in range(1, d + 1)]
    return cols


def population_table(t, rho, se_norm=None):
    """Rows of the population CSV for density matrices ``rho`` of shape (nt, d, d)."""
    rho = np.asarray(rho)
    nt, d, _ = rho.shape
    tr = np.trace(rho, axis1=1, axis2=2)
    flat = rho.reshape(nt, d * d)
    ri = np.empty((nt, 2 * d * d))
    ri[:, 0::2] = flat.real
    ri[:, 1::2] = flat.imag
    pops = np.real(np.diagonal(rho, axis1=1, axis2=2)) / tr.real[:, None]
    se = np.zeros((nt, d)) if se_norm is None else np.asarray(se_norm)
    data = np.column_stack([t, ri, tr.real, tr.imag, pops, se])
    return population_header(d), data


def write_table(path: Path, header, data) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",")


def read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


# ---------------------------------------------------------------- compare


@dataclass(frozen=True)
class Tolerance:
    abs: float | None = None
    se: float | None = None

    def bound(self, se_combined):
        parts = []
        if self.abs is not None:
            parts.append(np.full_like(se_combined, self.abs))
        if self.se is not None:
            parts.append(self.se * np.nan_to_num(se_combined, nan=0.0))
        return np.maximum.reduce(parts)


DEFAULT_TOLERANCE = Tolerance(abs=1e-8)


def parse_tolerances(items) -> dict[str, Tolerance]:
    """Parse ``["p1_norm=abs:0.02,se:3", ...]``."""
    out = {}
    for item in items or ():
        col, sep, rest = item.partition("=")
        if not sep or not col.strip():
            raise ConfigError(f"bad tolerance {item!r}; expected column=abs:x,se:y")
        kw = {}
        for part in rest.split(","):
            key, sep, val = part.partition(":")
            key = key.strip()
            if not sep or key not in ("abs", "se"):
                raise ConfigError(f"bad tolerance term {part!r} in {item!r}")
            try:
                kw[key] = float(val)
            except ValueError:
                raise ConfigError(f"bad tolerance value {val!r} in {item!r}") from None
            if kw[key] < 0:
                raise ConfigError(f"negative tolerance in {item!r}")
        out[col.strip()] = Tolerance(**kw)
    return out


class GridMismatch(ValueError):
    """The two tables do not share a time grid."""


@dataclass(frozen=True)
class ColumnReport:
    column: str
    max_abs: float
    max_se_rel: float  # nan without an SE column
    passed: bool


def _se_column(col: str, header) -> str | None:
    if col.endswith("_norm"):
        cand = col[: -len("_norm")] + "_se"
        if cand in header:
            return cand
    return None


def compare_tables(a, b, tolerances: dict[str, Tolerance] | None = None) -> list[ColumnReport]:
    """Per-column deviations between two tables ``(header, data)``.

    The SE used for a ``pK_norm`` column is ``sqrt(seA^2 + seB^2)`` from the
    matching ``pK_se`` columns. Without tolerances every common column except
    the SE columns is checked at ``abs 1e-8``.
    """
    (ha, da), (hb, db) = a, b
    if "t" not in ha or "t" not in hb:
        raise GridMismatch("both tables need a t column")
    ta, tb = da[:, ha.index("t")], db[:, hb.index("t")]
    if ta.shape != tb.shape or not np.allclose(ta, tb, rtol=0, atol=1e-12):
        raise GridMismatch(f"time grids differ ({ta.size} vs {tb.size} points)")
    if tolerances:
        missing = [c for c in tolerances if c not in ha or c not in hb]
        if missing:
            raise ConfigError(f"columns not in both tables: {', '.join(missing)}")
        checks = dict(tolerances)
    else:
        checks = {c: DEFAULT_TOLERANCE for c in ha if c in hb and c != "t" and not c.endswith("_se")}
    reports = []
    for col, tol in checks.items():
        dev = np.abs(da[:, ha.index(col)] - db[:, hb.index(col)])
        se_col = _se_column(col, ha)
        if se_col is not None and se_col in hb:
            se = np.hypot(da[:, ha.index(se_col)], db[:, hb.index(se_col)])
        else:
            se = np.full_like(dev, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(se > 0, dev / se, np.where(dev == 0, 0.0, np.inf))
        rel = np.where(np.isnan(se), np.nan, rel)
        passed = bool(np.all(dev <= tol.bound(se)))
        max_rel = float(np.nanmax(rel)) if np.any(~np.isnan(rel)) else float("nan")
        reports.append(ColumnReport(col, float(dev.max(initial=0.0)), max_rel, passed))
    return reports


# ------------------------------------------------------------ diagnostics


def basis_check_table(basis: BasisSet, target, t) -> tuple[list[str], np.ndarray, bool]:
    """Reconstruction error and basis residuals on ``t``.

    ``target`` is the reference function values at ``t``. Returns the CSV
    header, the data and whether any residual column reaches
    :data:`BASIS_TOL`. The reconstruction error is reported but not
    flagged, since some bases approximate their bath by construction.
    """
    t = np.asarray(t, dtype=float)
    rec = reconstruct_abcf(basis, t)
    rep = validate_basis(basis, t)
    data = np.column_stack([
        t, rec.real, rec.imag, np.real(target), np.imag(target), np.abs(rec - target),
        rep.per_time[:, 1], rep.per_time[:, 2], rep.per_time[:, 3],
    ])
    header = ["t", "re_recon", "im_recon", "re_abcf", "im_abcf", "recon_err",
              "ode_fd_residual", "ode_closed_residual", "expm_residual"]
    return header, data, not rep.ok(BASIS_TOL)


def noise_check_table(est) -> tuple[list[str], np.ndarray]:
    cols = {"t": est.t}
    for name, val, se, tgt in (
        ("zpzp", est.zpzp, est.se_zpzp, est.target_alpha1),
        ("zmzm", est.zmzm, est.se_zmzm, est.target_alpha1),
        ("zpzm_conj", est.zpzm_conj, est.se_zpzm_conj, est.target_alpha_conj),
    ):
        cols[f"re_{name}"] = val.real
        cols[f"im_{name}"] = val.imag
        cols[f"re_{name}_se"] = se.real
        cols[f"im_{name}_se"] = se.imag
        cols[f"re_{name}_target"] = np.real(tgt)
        cols[f"im_{name}_target"] = np.imag(tgt)
    return list(cols), np.column_stack(list(cols.values()))


# ---------------------------------------------------------------- commands


def _out_dir(cfg: RunConfig, override) -> Path:
    path = Path(override if override is not None else cfg.output.get("directory", "out"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _formats(cfg: RunConfig) -> set[str]:
    return set(cfg.output.get("formats", ("csv", "json")))


def _meta(cfg: RunConfig, extra: dict) -> dict:
    return {"version": __version__, "config": cfg.to_dict(), "config_ini": cfg.to_ini(), **extra}


def _write_meta(path: Path, meta: dict) -> None:
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def _result_table(res: EnsembleResult):
    return population_table(res.t, res.rho, res.se_norm)


def cmd_run(cfg: RunConfig, out: Path) -> int:
    spec = cfg.ensemble_spec()
    log.info("hierarchy dimension %d, %d trajectories", spec.model.dim * spec.space.size, spec.n_traj)
    t0 = time.perf_counter()
    res = run_ensemble(spec)
    wall = time.perf_counter() - t0
    fmts = _formats(cfg)
    if "csv" in fmts:
        write_table(out / "populations.csv", *_result_table(res))
    if "json" in fmts:
        _write_meta(out / "meta.json", _meta(cfg, {
            "command": "run", "master_seed": res.master_seed, "n_traj": res.n_traj,
            "n_aborted": res.n_aborted, "aborted": [list(a) for a in res.aborted],
            "n_batches": res.n_batches, "hierarchy_dim": res.hierarchy_dim,
            "threads": spec.threads, "wall_time_s": wall,
            "max_hermiticity_deviation": float(res.hermiticity_deviation.max()),
        }))
    log.info("wrote %s in %.1f s", out, wall)
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, out: Path) -> int:
    if cfg.bath["sd"] != "discrete":
        raise ConfigError("the exact oracle needs a discrete spectral density")
    r = cfg.run
    ed = EDConfig(cfg.model(), cfg.bath["modes"], cfg.bath["beta"], n_b=cfg.oracle.get("n_b", 20),
                  dt=r.get("dt", 0.01), t_final=r.get("t_final", 10.0),
                  output_stride=r.get("output_stride", 1))
    t0 = time.perf_counter()
    res = exact_discrete(ed)
    write_table(out / "oracle.csv", *population_table(res.t, res.rho))
    if "json" in _formats(cfg):
        _write_meta(out / "oracle_meta.json", _meta(cfg, {
            "command": "oracle", "n_b": ed.n_b, "wall_time_s": time.perf_counter() - t0}))
    return EXIT_OK


def _check_grid(cfg: RunConfig, n_key: str, n_default: int) -> np.ndarray:
    c = cfg.check
    t_max = c.get("t_max", cfg.run.get("t_final", 10.0))
    return np.linspace(0.0, t_max, c.get(n_key, n_default))


def cmd_noise_check(cfg: RunConfig, out: Path) -> int:
    t = _check_grid(cfg, "n_times", 50)
    n = cfg.check.get("n_realizations", 100_000)
    est = streamed_correlators(cfg.frequency_grid(), cfg.bath["beta"], t, n,
                               master_seed=cfg.run.get("master_seed", 0),
                               scheme=cfg.bath.get("scheme", "KeZhao"))
    write_table(out / "noise_check.csv", *noise_check_table(est))
    for name, ok in est.within(5.0).items():
        log.info("%s within 5 SE of target: %s", name, ok)
    return EXIT_OK


def cmd_basis_check(cfg: RunConfig, out: Path) -> int:
    t = _check_grid(cfg, "n_points", 2001)
    basis = cfg.basis_set()
    header, data, flagged = basis_check_table(basis, abcf(cfg.bath_spec(), t), t)
    write_table(out / "basis_check.csv", header, data)
    worst = data[:, 6:].max(axis=0)
    print(f"basis {basis.family.value} K={basis.K}: max recon_err {data[:, 5].max():.3e}, "
          f"ode_fd {worst[0]:.3e}, ode_closed {worst[1]:.3e}, expm {worst[2]:.3e}")
    if flagged:
        print(f"FLAGGED: basis residual at or above {BASIS_TOL:g}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_compare(a, b, tol_items) -> int:
    reports = compare_tables(read_table(a), read_table(b), parse_tolerances(tol_items))
    print(f"{'column':<14} {'max_abs_dev':>12} {'max_se_rel':>10}  result")
    for r in reports:
        print(f"{r.column:<14} {r.max_abs:12.4e} {r.max_se_rel:10.3g}  {'PASS' if r.passed else 'FAIL'}")
    ok = all(r.passed for r in reports)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAIL


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cnmsse", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    # accept -v after the subcommand too without resetting the top-level value
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "propagate a trajectory ensemble"),
                        ("oracle", "exact reference for a discrete bath"),
                        ("noise-check", "sample noise correlators against their targets"),
                        ("basis-check", "basis reconstruction and residuals")):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.add_argument("--config", required=True, help="INI file or bundled config name")
        sp.add_argument("--out", help="output directory (overrides [output] directory)")
        sp.add_argument("--seed", type=int, help="master seed (overrides [run] master_seed)")
        if name == "run":
            sp.add_argument("--threads", type=int, help="worker threads")
            sp.add_argument("--n-traj", type=int, help="number of trajectories")
    cp = sub.add_parser("compare", help="compare two CSV tables", parents=[common])
    cp.add_argument("a")
    cp.add_argument("b")
    cp.add_argument("--tol", action="append", metavar="COL=abs:X,se:K",
                    help="per-column tolerance; repeatable")
    return p


def _resolve_config(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    from importlib import resources

    bundled = resources.files("cnmsse") / "configs" / (name if name.endswith(".ini") else name + ".ini")
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"no such config: {name}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "compare":
            return cmd_compare(args.a, args.b, args.tol)
        cfg = load_config(_resolve_config(args.config))
        overrides = {"master_seed": args.seed}
        if args.command == "run":
            overrides.update(threads=args.threads, n_traj=args.n_traj)
            if args.threads is not None and args.threads < 1:
                raise ConfigError("--threads must be positive")
            if args.n_traj is not None and args.n_traj < 1:
                raise ConfigError("--n-traj must be positive")
        cfg = cfg.with_overrides(**overrides)
        out = _out_dir(cfg, args.out)
        command = {"run": cmd_run, "oracle": cmd_oracle, "noise-check": cmd_noise_check,
                   "basis-check": cmd_basis_check}[args.command]
        return command(cfg, out)
    except (ConfigError, DegenerateDecompositionError, TailError, GridMismatch, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnsembleAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
