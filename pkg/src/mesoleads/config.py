"""Experiment configuration files (TOML) and scenario construction.

A config names a scenario (``resonant_level``, ``two_dot`` or ``custom``),
bath defaults under ``[bath]``, per-bath overrides under ``[baths.<name>]``,
and the system, drive, numerics, chain and sweep sections. Every field the
scenario needs is checked before any computation starts; defaults that were
filled in are reported by :meth:`ExperimentConfig.resolved`.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .model import Harmonic, SystemModel, DriveProtocol, resonant_level, two_dot
from .spectral import BathSpec, DiscretizationScheme, SpectralFunction

import numpy as np

SCENARIOS = ("resonant_level", "two_dot", "custom")
SOLVERS = ("time_domain", "floquet", "chain", "pauli")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


BATH_DEFAULTS = {
    "coupling": 1.0,
    "cutoff": 8.0,
    "inner_window": 4.0,
    "modes": 100,
    "log_ratio": 0.1,
}

NUMERIC_DEFAULTS = {
    "dt": None,
    "t_final": None,
    "stride": 10,
    "n_max": 8,
    "tol": 1e-9,
    "max_sweeps": 10_000,
    "eig_check_every": 10,
    "period_samples": None,
}

CHAIN_DEFAULTS = {"length": 400, "n_star": 20_000, "dt": 0.02, "stride": 5}


@dataclass
class BathConfig:
    name: str
    temperature: float
    chemical_potential: float
    coupling: float
    cutoff: float
    inner_window: float
    modes: int
    log_ratio: float
    site: int = 0

    def spec(self) -> BathSpec:
        spectral = SpectralFunction(self.coupling, self.cutoff)
        if self.inner_window >= self.cutoff:
            scheme = DiscretizationScheme(self.cutoff, self.modes, 0)
        else:
            scheme = DiscretizationScheme.from_total(self.modes, self.inner_window, self.log_ratio)
        return BathSpec(self.temperature, self.chemical_potential, spectral, scheme)


@dataclass
class ExperimentConfig:
    scenario: str
    baths: list[BathConfig]
    system: dict
    drive: dict
    numerics: dict
    chain: dict
    sweep: dict
    solver: str = "time_domain"
    source: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    # ---- model construction -------------------------------------------------
    def bath_specs(self, swap: bool = False) -> list[BathSpec]:
        specs = [b.spec() for b in self.baths]
        if swap:
            if len(specs) != 2:
                raise ConfigError("baths", "temperature swap needs exactly two baths")
            a, b = specs
            specs = [BathSpec(b.temperature, a.chemical_potential, a.spectral, a.scheme),
                     BathSpec(a.temperature, b.chemical_potential, b.spectral, b.scheme)]
        return specs

    def model(self, swap: bool = False, hopping: float | None = None,
              frequency: float | None = None) -> SystemModel:
        specs = self.bath_specs(swap)
        amp = float(self.drive["amplitude"])
        freq = float(self.drive["frequency"] if frequency is None else frequency)
        kind = Harmonic(self.drive["kind"])
        if self.scenario == "resonant_level":
            return resonant_level(specs, self.system["energy"], amp, freq, kind)
        if self.scenario == "two_dot":
            lam = self.system["hopping"] if hopping is None else hopping
            return two_dot(specs[0], specs[1], lam, amp, freq,
                           tuple(self.system["energies"]), kind)
        h = np.array(self.system["hamiltonian"], dtype=float)
        amps = tuple(float(a) for a in self.drive["amplitudes"])
        couplings = tuple((b.site, s) for b, s in zip(self.baths, specs))
        return SystemModel(h, DriveProtocol(amps, freq, kind), couplings)

    def system_occupation(self) -> np.ndarray:
        occ = self.system["occupations"]
        return np.diag(np.asarray(occ, dtype=float)).astype(complex)

    def sweep_points(self):
        """Sorted ``(hopping, omega/hopping)`` pairs of the sweep grid."""
        return sorted((float(lam), float(r)) for lam in self.sweep["hoppings"]
                      for r in self.sweep["ratios"])

    def resolved(self) -> dict:
        return {
            "scenario": self.scenario,
            "solver": self.solver,
            "baths": [asdict(b) for b in self.baths],
            "system": self.system,
            "drive": self.drive,
            "numerics": self.numerics,
            "chain": self.chain,
            "sweep": self.sweep,
        }


def _number(value, name, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(name, "must be finite")
    if positive and not value > 0:
        raise ConfigError(name, f"must be > 0, got {value}")
    if nonneg and value < 0:
        raise ConfigError(name, f"must be >= 0, got {value}")
    return int(value) if integer else float(value)


def _require(section: dict, key: str, prefix: str):
    if key not in section:
        raise ConfigError(f"{prefix}.{key}" if prefix else key, "missing required field")
    return section[key]


def set_dotted(data: dict, dotted: str, value):
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, "cannot override inside a non-table value")
    node[keys[-1]] = value


def parse_override(text: str):
    """``key.path=value`` with ``value`` parsed as a TOML value (bare words become strings)."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key.strip(), value


def load_config(path, overrides=()) -> ExperimentConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    for text in overrides:
        set_dotted(data, *parse_override(text))
    cfg = parse_config(data)
    cfg.source = str(path)
    return cfg


def parse_config(data: dict) -> ExperimentConfig:
    data = copy.deepcopy(data)
    scenario = _require(data, "scenario", "")
    if scenario not in SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    solver = data.get("solver", "time_domain")
    if solver not in SOLVERS:
        raise ConfigError("solver", f"unknown solver {solver!r}; expected one of {SOLVERS}")

    defaults = dict(BATH_DEFAULTS)
    defaults.update(data.get("bath", {}))
    bath_tables = data.get("baths")
    if not isinstance(bath_tables, dict) or not bath_tables:
        raise ConfigError("baths", "at least one [baths.<name>] table is required")
    expected = {"resonant_level": ("left", "right"), "two_dot": ("left", "right")}.get(scenario)
    names = list(expected) if expected else list(bath_tables)
    baths = []
    for name in names:
        prefix = f"baths.{name}"
        if name not in bath_tables:
            raise ConfigError(prefix, "missing required bath table")
        table = dict(defaults)
        table.update(bath_tables[name])
        bath = BathConfig(
            name=name,
            temperature=_number(_require(table, "temperature", prefix), f"{prefix}.temperature",
                                positive=True),
            chemical_potential=_number(_require(table, "chemical_potential", prefix),
                                       f"{prefix}.chemical_potential"),
            coupling=_number(table["coupling"], f"{prefix}.coupling", positive=True),
            cutoff=_number(table["cutoff"], f"{prefix}.cutoff", positive=True),
            inner_window=_number(table["inner_window"], f"{prefix}.inner_window", positive=True),
            modes=_number(table["modes"], f"{prefix}.modes", positive=True, integer=True),
            log_ratio=_number(table["log_ratio"], f"{prefix}.log_ratio", nonneg=True),
            site=0,
        )
        if bath.inner_window > bath.cutoff:
            raise ConfigError(f"{prefix}.inner_window", "must not exceed the cutoff")
        if scenario == "two_dot":
            bath.site = names.index(name)
        elif scenario == "custom":
            bath.site = _number(_require(table, "site", prefix), f"{prefix}.site",
                                nonneg=True, integer=True)
        baths.append(bath)

    system = dict(data.get("system", {}))
    if scenario == "resonant_level":
        system["energy"] = _number(system.get("energy", 0.0), "system.energy")
        p0 = _number(system.get("occupation", 0.5), "system.occupation")
        system["occupation"] = p0
        system["occupations"] = [p0]
    elif scenario == "two_dot":
        system["hopping"] = _number(_require(system, "hopping", "system"), "system.hopping")
        energies = system.get("energies", [0.0, 0.0])
        if len(energies) != 2:
            raise ConfigError("system.energies", "two_dot needs exactly two energies")
        system["energies"] = [_number(e, "system.energies") for e in energies]
        occ = system.get("occupations", [0.5, 0.5])
        if len(occ) != 2:
            raise ConfigError("system.occupations", "two_dot needs exactly two occupations")
        system["occupations"] = [_number(o, "system.occupations") for o in occ]
    else:
        h = _require(system, "hamiltonian", "system")
        h = np.asarray(h, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ConfigError("system.hamiltonian", "must be a square matrix")
        if not np.allclose(h, h.T):
            raise ConfigError("system.hamiltonian", "must be symmetric")
        system["hamiltonian"] = h.tolist()
        occ = system.get("occupations", [0.5] * h.shape[0])
        if len(occ) != h.shape[0]:
            raise ConfigError("system.occupations", "need one occupation per site")
        system["occupations"] = [_number(o, "system.occupations") for o in occ]
        for b in baths:
            if b.site >= h.shape[0]:
                raise ConfigError(f"baths.{b.name}.site", "site index out of range")
    for o in system["occupations"]:
        if not 0 <= o <= 1:
            raise ConfigError("system.occupations", f"occupation {o} outside [0, 1]")

    drive = dict(data.get("drive", {}))
    drive["amplitude"] = _number(drive.get("amplitude", 0.0), "drive.amplitude")
    drive["frequency"] = _number(drive.get("frequency", 0.0), "drive.frequency", nonneg=True)
    kind = drive.get("kind", "sin")
    if kind not in ("sin", "cos"):
        raise ConfigError("drive.kind", f"expected 'sin' or 'cos', got {kind!r}")
    drive["kind"] = kind
    if scenario == "custom":
        n = len(system["hamiltonian"])
        amps = drive.get("amplitudes", [drive["amplitude"]] + [0.0] * (n - 1))
        if len(amps) != n:
            raise ConfigError("drive.amplitudes", "need one amplitude per site")
        drive["amplitudes"] = [_number(a, "drive.amplitudes") for a in amps]

    numerics = dict(NUMERIC_DEFAULTS)
    numerics.update(data.get("numerics", {}))
    for key in ("dt", "t_final", "tol"):
        if numerics[key] is not None:
            numerics[key] = _number(numerics[key], f"numerics.{key}", positive=True)
    for key in ("stride", "n_max", "max_sweeps"):
        numerics[key] = _number(numerics[key], f"numerics.{key}", positive=True, integer=True)
    numerics["eig_check_every"] = _number(numerics["eig_check_every"],
                                          "numerics.eig_check_every", nonneg=True, integer=True)
    if numerics["period_samples"] is not None:
        numerics["period_samples"] = _number(numerics["period_samples"],
                                             "numerics.period_samples", positive=True, integer=True)

    chain = dict(CHAIN_DEFAULTS)
    chain.update(data.get("chain", {}))
    chain["length"] = _number(chain["length"], "chain.length", positive=True, integer=True)
    chain["n_star"] = _number(chain["n_star"], "chain.n_star", positive=True, integer=True)
    chain["dt"] = _number(chain["dt"], "chain.dt", positive=True)
    chain["stride"] = _number(chain["stride"], "chain.stride", positive=True, integer=True)

    sweep = dict(data.get("sweep", {}))
    for key in ("hoppings", "ratios"):
        if key in sweep:
            sweep[key] = [_number(v, f"sweep.{key}", positive=True) for v in sweep[key]]

    return ExperimentConfig(scenario, baths, system, drive, numerics, chain, sweep,
                            solver, raw=data)


def require_fields(cfg: ExperimentConfig, command: str):
    """Command-specific checks that the generic parse cannot know about."""
    if command in ("evolve", "chain-oracle", "pauli-oracle") and cfg.numerics["t_final"] is None:
        raise ConfigError("numerics.t_final", f"required by '{command}'")
    if command == "floquet-sweep":
        if cfg.scenario != "two_dot":
            raise ConfigError("scenario", "floquet-sweep needs the two_dot scenario")
        for key in ("hoppings", "ratios"):
            if not cfg.sweep.get(key):
                raise ConfigError(f"sweep.{key}", "missing required field")
    if command == "floquet" and cfg.drive["frequency"] == 0 and cfg.drive["amplitude"] != 0:
        raise ConfigError("drive.frequency", "a driven limit cycle needs frequency > 0")
    if command == "pauli-oracle" and cfg.scenario != "resonant_level":
        raise ConfigError("scenario", "pauli-oracle needs the resonant_level scenario")
