"""INI run configuration: parsing, validation and construction of run objects.

Sections and keys (``*`` marks required keys)::

    [system]  model* = sbm | transfer
              sbm:      eps*, delta*
              transfer: e_d*, e_a*, lam*, coupling_j*, coupling = acceptor
    [bath]    sd* = discrete | ohmic_exp | ohmic_alg | brownian
              discrete: modes* = "c:w, c:w, ..."
              ohmic_exp / ohmic_alg: alpha*, wc*
              brownian: lam*, w0*, zeta*
              beta*, scheme = KeZhao
    [basis]   choice = auto | force_exponential, n_max = 3 | "7, 7",
              truncation = hypercube | triangular, level
    [noise]   j = 3000, omega_max
    [run]     dt = 0.01, t_final = 10, output_stride = 1, n_traj = 1,
              master_seed = 0, formulation = extended_rescaled, threads = 1,
              block = 32
    [output]  directory = out, formats = csv, json
    [oracle]  n_b = 20
    [check]   n_realizations = 100000, n_times = 50, t_max = 20, n_points = 2001
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

from .basis import BasisChoice, BasisSet, DegenerateDecompositionError, build_basis
from .bath import AbcfScheme, BathSpec, Brownian, Discrete, OhmicAlg, OhmicExp
from .hierarchy import EnsembleSpec, FockSpace, Formulation, Truncation
from .models import COUPLING_OPERATORS, SystemModel, spin_boson, transfer
from .noise import DEFAULT_J, FrequencyGrid, discretize

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Schema violation in a run configuration."""


_SYSTEM_KEYS = {"sbm": {"eps", "delta"}, "transfer": {"e_d", "e_a", "lam", "coupling_j"}}
_SD_KEYS = {
    "discrete": {"modes"},
    "ohmic_exp": {"alpha", "wc"},
    "ohmic_alg": {"alpha", "wc"},
    "brownian": {"lam", "w0", "zeta"},
}
_OPTIONAL = {
    "system": {"model", "coupling"},
    "bath": {"sd", "beta", "scheme"},
    "basis": {"choice", "n_max", "truncation", "level"},
    "noise": {"j", "omega_max"},
    "run": {"dt", "t_final", "output_stride", "n_traj", "master_seed", "formulation", "threads",
            "block"},
    "output": {"directory", "formats"},
    "oracle": {"n_b"},
    "check": {"n_realizations", "n_times", "t_max", "n_points"},
}
_FORMATS = {"csv", "json"}


@dataclass(frozen=True)
class RunConfig:
    system: dict
    bath: dict
    basis: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    check: dict = field(default_factory=dict)

    # ----------------------------------------------------------- builders

    def model(self) -> SystemModel:
        s = self.system
        if s["model"] == "sbm":
            return spin_boson(s["eps"], s["delta"])
        return transfer(s["e_d"], s["e_a"], s["lam"], s["coupling_j"], s.get("coupling", "acceptor"))

    def spectral_density(self):
        b = self.bath
        kind = b["sd"]
        if kind == "discrete":
            return Discrete(b["modes"])
        if kind == "ohmic_exp":
            return OhmicExp(b["alpha"], b["wc"])
        if kind == "ohmic_alg":
            return OhmicAlg(b["alpha"], b["wc"])
        return Brownian(b["lam"], b["w0"], b["zeta"])

    def bath_spec(self) -> BathSpec:
        return BathSpec(self.spectral_density(), self.bath["beta"], self.bath.get("scheme", "KeZhao"))

    def basis_set(self) -> BasisSet:
        return build_basis(self.bath_spec(), self.basis.get("choice", "auto"))

    def fock_space(self, K: int) -> FockSpace:
        return FockSpace.build(K, self.basis.get("n_max", 3), self.basis.get("truncation", "hypercube"),
                               self.basis.get("level"))

    def frequency_grid(self) -> FrequencyGrid:
        return discretize(self.spectral_density(), self.noise.get("j", DEFAULT_J), self.noise.get("omega_max"))

    def ensemble_spec(self) -> EnsembleSpec:
        basis = self.basis_set()
        r = self.run
        return EnsembleSpec(
            model=self.model(), basis=basis, space=self.fock_space(basis.K), grid=self.frequency_grid(),
            beta=self.bath["beta"], formulation=r.get("formulation", Formulation.EXTENDED_RESCALED),
            dt=r.get("dt", 0.01), t_final=r.get("t_final", 10.0), output_stride=r.get("output_stride", 1),
            n_traj=r.get("n_traj", 1), master_seed=r.get("master_seed", 0), threads=r.get("threads", 1),
            block=r.get("block", 32), scheme=self.bath.get("scheme", "KeZhao"),
        )

    def with_overrides(self, **run_overrides) -> "RunConfig":
        run = dict(self.run)
        run.update({k: v for k, v in run_overrides.items() if v is not None})
        return RunConfig(self.system, self.bath, self.basis, self.noise, run, self.output, self.oracle,
                         self.check)

    # -------------------------------------------------------------- echo

    def to_ini(self) -> str:
        """Config text that parses back to an equal :class:`RunConfig`."""
        cp = configparser.ConfigParser(interpolation=None)
        for name in _OPTIONAL:
            sec = getattr(self, name)
            if not sec:
                continue
            cp.add_section(name)
            for k, v in sec.items():
                cp.set(name, k, _format_value(v))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {name: {k: _jsonable(v) for k, v in getattr(self, name).items()} for name in _OPTIONAL
                if getattr(self, name)}


def _format_value(v) -> str:
    if isinstance(v, (list, tuple)):
        if v and isinstance(v[0], (list, tuple)):
            return ", ".join(f"{a!r}:{b!r}" for a, b in v)
        return ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def _jsonable(v):
    if hasattr(v, "value"):
        return v.value
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


# --------------------------------------------------------------- parsing


def _num(sec, key, raw, kind=float, positive=False, nonneg=False):
    try:
        val = kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"[{sec}] {key}: cannot parse {raw!r} as {kind.__name__}") from None
    if kind is float and val != val:
        raise ConfigError(f"[{sec}] {key}: NaN not allowed")
    if positive and not val > 0:
        raise ConfigError(f"[{sec}] {key} must be positive, got {raw!r}")
    if nonneg and val < 0:
        raise ConfigError(f"[{sec}] {key} must be non-negative, got {raw!r}")
    return val


def _int(sec, key, raw, positive=False, nonneg=False):
    try:
        f = float(raw)
    except ValueError:
        raise ConfigError(f"[{sec}] {key}: cannot parse {raw!r} as int") from None
    if f != int(f):
        raise ConfigError(f"[{sec}] {key}: {raw!r} is not an integer")
    return _num(sec, key, int(f), int, positive, nonneg)


def _modes(raw):
    out = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            c, w = item.split(":")
            out.append((float(c), float(w)))
        except ValueError:
            raise ConfigError(f"[bath] modes: cannot parse {item!r}, expected c:w") from None
    if not out:
        raise ConfigError("[bath] modes: at least one c:w pair required")
    for _, w in out:
        if not w > 0:
            raise ConfigError("[bath] modes: frequencies must be positive")
    return tuple(out)


def parse_config(text: str) -> RunConfig:
    """Parse and validate INI text.

    Raises
    ------
    ConfigError
        On unknown sections or keys, missing required keys or bad values.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    unknown = set(cp.sections()) - set(_OPTIONAL)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    for req in ("system", "bath"):
        if not cp.has_section(req):
            raise ConfigError(f"missing section [{req}]")
    raw = {s: dict(cp.items(s)) for s in cp.sections()}

    # system
    sysraw = raw["system"]
    model = sysraw.get("model", "").strip().lower()
    if model not in _SYSTEM_KEYS:
        raise ConfigError(f"[system] model must be sbm or transfer, got {model!r}")
    allowed = _OPTIONAL["system"] | _SYSTEM_KEYS[model]
    _reject_unknown("system", sysraw, allowed)
    if model == "sbm" and "coupling" in sysraw:
        raise ConfigError("[system] coupling only applies to the transfer model")
    system = {"model": model}
    for k in _SYSTEM_KEYS[model]:
        if k not in sysraw:
            raise ConfigError(f"[system] missing {k}")
        system[k] = _num("system", k, sysraw[k])
    if model == "transfer":
        coupling = sysraw.get("coupling", "acceptor").strip()
        if coupling not in COUPLING_OPERATORS:
            raise ConfigError(f"[system] coupling must be one of {sorted(COUPLING_OPERATORS)}")
        system["coupling"] = coupling

    # bath
    braw = raw["bath"]
    sd = braw.get("sd", "").strip().lower()
    if sd not in _SD_KEYS:
        raise ConfigError(f"[bath] sd must be one of {sorted(_SD_KEYS)}, got {sd!r}")
    _reject_unknown("bath", braw, _OPTIONAL["bath"] | _SD_KEYS[sd])
    bath = {"sd": sd}
    for k in _SD_KEYS[sd]:
        if k not in braw:
            raise ConfigError(f"[bath] missing {k}")
        bath[k] = _modes(braw[k]) if k == "modes" else _num("bath", k, braw[k], positive=True)
    if "beta" not in braw:
        raise ConfigError("[bath] missing beta")
    bath["beta"] = _num("bath", "beta", braw["beta"], positive=True)
    if "scheme" in braw:
        try:
            bath["scheme"] = AbcfScheme.parse(braw["scheme"]).value
        except ValueError as exc:
            raise ConfigError(f"[bath] {exc}") from None

    # basis
    basis = {}
    sraw = raw.get("basis", {})
    _reject_unknown("basis", sraw, _OPTIONAL["basis"])
    if "choice" in sraw:
        try:
            basis["choice"] = BasisChoice.parse(sraw["choice"]).value
        except ValueError as exc:
            raise ConfigError(f"[basis] {exc}") from None
    if "n_max" in sraw:
        parts = [p for p in sraw["n_max"].split(",") if p.strip()]
        caps = tuple(_int("basis", "n_max", p.strip(), nonneg=True) for p in parts)
        if not caps:
            raise ConfigError("[basis] n_max is empty")
        basis["n_max"] = caps[0] if len(caps) == 1 else caps
    if "truncation" in sraw:
        try:
            basis["truncation"] = Truncation.parse(sraw["truncation"]).value
        except ValueError as exc:
            raise ConfigError(f"[basis] {exc}") from None
    if "level" in sraw:
        if basis.get("truncation") != "triangular":
            raise ConfigError("[basis] level requires truncation = triangular")
        basis["level"] = _int("basis", "level", sraw["level"], nonneg=True)

    # noise
    noise = {}
    nraw = raw.get("noise", {})
    _reject_unknown("noise", nraw, _OPTIONAL["noise"])
    if "j" in nraw:
        noise["j"] = _int("noise", "j", nraw["j"], positive=True)
    if "omega_max" in nraw:
        noise["omega_max"] = _num("noise", "omega_max", nraw["omega_max"], positive=True)

    # run
    run = {}
    rraw = raw.get("run", {})
    _reject_unknown("run", rraw, _OPTIONAL["run"])
    for k in ("dt", "t_final"):
        if k in rraw:
            run[k] = _num("run", k, rraw[k], positive=(k == "dt"), nonneg=True)
    for k in ("output_stride", "n_traj", "threads", "block"):
        if k in rraw:
            run[k] = _int("run", k, rraw[k], positive=True)
    if "master_seed" in rraw:
        run["master_seed"] = _int("run", "master_seed", rraw["master_seed"], nonneg=True)
    if "formulation" in rraw:
        try:
            run["formulation"] = Formulation.parse(rraw["formulation"]).value
        except ValueError as exc:
            raise ConfigError(f"[run] {exc}") from None

    # output
    output = {}
    oraw = raw.get("output", {})
    _reject_unknown("output", oraw, _OPTIONAL["output"])
    if "directory" in oraw:
        output["directory"] = oraw["directory"].strip()
    if "formats" in oraw:
        fmts = tuple(f.strip().lower() for f in oraw["formats"].split(",") if f.strip())
        bad = set(fmts) - _FORMATS
        if bad:
            raise ConfigError(f"[output] unknown format(s): {', '.join(sorted(bad))}")
        output["formats"] = fmts

    oracle = {}
    if "oracle" in raw:
        _reject_unknown("oracle", raw["oracle"], _OPTIONAL["oracle"])
        if "n_b" in raw["oracle"]:
            oracle["n_b"] = _int("oracle", "n_b", raw["oracle"]["n_b"], positive=True)

    check = {}
    if "check" in raw:
        craw = raw["check"]
        _reject_unknown("check", craw, _OPTIONAL["check"])
        for k in ("n_realizations", "n_times", "n_points"):
            if k in craw:
                check[k] = _int("check", k, craw[k], positive=True)
        if "t_max" in craw:
            check["t_max"] = _num("check", "t_max", craw["t_max"], positive=True)

    cfg = RunConfig(system, bath, basis, noise, run, output, oracle, check)
    _validate_combination(cfg)
    return cfg


def _reject_unknown(section, raw, allowed):
    extra = set(raw) - set(allowed)
    if extra:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(extra))}")


def _validate_combination(cfg: RunConfig):
    """Checks that need the assembled objects (dt divides t_final, caps vs K, ...)."""
    try:
        cfg.model()
        bath = cfg.bath_spec()
        if bath.scheme is AbcfScheme.KEZHAO:
            basis = cfg.basis_set()
            cfg.fock_space(basis.K)
        dt = cfg.run.get("dt", 0.01)
        tf = cfg.run.get("t_final", 10.0)
        n = round(tf / dt)
        if abs(n * dt - tf) > 1e-9 * max(1.0, tf):
            raise ConfigError(f"[run] t_final={tf} is not a multiple of dt={dt}")
    except (ConfigError, DegenerateDecompositionError):
        # a degenerate decomposition keeps its own error type
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
