"""Run configuration: nested blocks loaded from YAML with strict key checking."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..channel import PilotConfig
from ..clustering import FronthaulConfig
from ..scenario import PathLossModel
from ..wmmse.common import AlgorithmConfig, LinkBudget, dbm_to_watt

ALGORITHMS = ("alg1", "alg2", "bench1", "bench2")
SWEEP_VARIABLES = ("S", "L", "M", "K", "m_mo", "fh_max")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioBlock:
    M: int = 10
    K: int = 8
    L: int = 8
    area_side: float = 1000.0
    shadow_sigma_db: float = 4.0
    path_loss: PathLossModel = field(default_factory=PathLossModel)


@dataclass(frozen=True)
class PilotBlock:
    tau_u: int = 2000
    pilot_power_w: float = 0.1


@dataclass(frozen=True)
class PowerBlock:
    P_w: float = 0.1
    noise_dbm: float = -92.0


@dataclass(frozen=True)
class ClusteringBlock:
    S: int = 2
    method: str = "geographic"


@dataclass(frozen=True)
class AlgorithmsBlock:
    run: tuple[str, ...] = ALGORITHMS
    alg1: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    alg2: AlgorithmConfig = field(default_factory=AlgorithmConfig)


@dataclass(frozen=True)
class MonteCarloBlock:
    n_drops: int = 50
    n_h: int = 200
    n_h_eval: int = 200
    n_small: int = 1
    master_seed: int = 0
    common_random_numbers: bool = True


@dataclass(frozen=True)
class SweepBlock:
    variable: str | None = None
    values: tuple = ()
    total_antennas: int | None = None  # M sweeps: L = total_antennas // M


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "results"
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioBlock = field(default_factory=ScenarioBlock)
    pilot: PilotBlock = field(default_factory=PilotBlock)
    power: PowerBlock = field(default_factory=PowerBlock)
    fronthaul: FronthaulConfig = field(default_factory=FronthaulConfig)
    clustering: ClusteringBlock = field(default_factory=ClusteringBlock)
    algorithms: AlgorithmsBlock = field(default_factory=AlgorithmsBlock)
    monte_carlo: MonteCarloBlock = field(default_factory=MonteCarloBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    def __post_init__(self):
        validate(self)

    def budget(self) -> LinkBudget:
        return LinkBudget(
            power=self.power.P_w,
            noise_power=dbm_to_watt(self.power.noise_dbm),
            pilot_power=self.pilot.pilot_power_w,
            fronthaul=self.fronthaul,
        )

    def pilot_config(self) -> PilotConfig:
        return PilotConfig(tau_u=self.pilot.tau_u, rho_u=self.pilot.pilot_power_w / dbm_to_watt(self.power.noise_dbm))

    def sweep_points(self) -> list:
        return list(self.sweep.values) if self.sweep.variable else [None]

    def at(self, value) -> "RunConfig":
        """Config with the sweep variable set to ``value``."""
        var = self.sweep.variable
        if var is None or value is None:
            return self
        if var == "S":
            return replace(self, clustering=replace(self.clustering, S=int(value)))
        if var in ("L", "K"):
            return replace(self, scenario=replace(self.scenario, **{var: int(value)}))
        if var == "M":
            sc = replace(self.scenario, M=int(value))
            if self.sweep.total_antennas:
                sc = replace(sc, L=self.sweep.total_antennas // int(value))
            return replace(self, scenario=sc)
        if var == "m_mo":
            return replace(self, fronthaul=replace(self.fronthaul, m_mo=int(value)))
        return replace(self, fronthaul=replace(self.fronthaul, fh_max=float(value)))

    def to_dict(self) -> dict:
        d = asdict(self)
        return json.loads(json.dumps(d, default=list))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def validate(cfg: RunConfig) -> None:
    sc = cfg.scenario
    if min(sc.M, sc.K, sc.L) < 1:
        raise ConfigError("M, K and L must be >= 1")
    if sc.area_side <= 0 or sc.shadow_sigma_db < 0:
        raise ConfigError("area_side must be positive and shadow_sigma_db non-negative")
    if cfg.pilot.tau_u < sc.K or cfg.pilot.pilot_power_w <= 0:
        raise ConfigError("need tau_u >= K and a positive pilot power")
    if cfg.power.P_w <= 0:
        raise ConfigError("P_w must be positive")
    if cfg.clustering.method != "geographic":
        raise ConfigError(f"unknown clustering method {cfg.clustering.method!r}")
    if not 1 <= cfg.clustering.S <= sc.M:
        raise ConfigError(f"S must lie in [1, M={sc.M}]")
    bad = set(cfg.algorithms.run) - set(ALGORITHMS)
    if bad or not cfg.algorithms.run:
        raise ConfigError(f"algorithms must be a non-empty subset of {ALGORITHMS}, got {sorted(bad)}")
    mc = cfg.monte_carlo
    if min(mc.n_drops, mc.n_h, mc.n_h_eval, mc.n_small) < 1:
        raise ConfigError("monte_carlo counts must be >= 1")
    sw = cfg.sweep
    if sw.variable is not None:
        if sw.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {sw.variable!r}")
        if not sw.values:
            raise ConfigError("sweep needs at least one value")
        for v in sw.values:
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"sweep values must be positive numbers, got {v!r}")
        if sw.variable == "S" and max(sw.values) > sc.M:
            raise ConfigError("a swept S exceeds M")
        if sw.total_antennas is not None and sw.variable != "M":
            raise ConfigError("total_antennas only applies to M sweeps")
    bad_fmt = set(cfg.output.formats) - {"csv"}
    if bad_fmt:
        raise ConfigError(f"unsupported output formats {sorted(bad_fmt)}")


_BLOCKS = {
    "scenario": ScenarioBlock,
    "pilot": PilotBlock,
    "power": PowerBlock,
    "fronthaul": FronthaulConfig,
    "clustering": ClusteringBlock,
    "algorithms": AlgorithmsBlock,
    "monte_carlo": MonteCarloBlock,
    "sweep": SweepBlock,
    "output": OutputBlock,
}


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    kw = dict(data)
    # YAML 1.1 reads "2e9" as a string
    for f in fields(cls):
        if f.name in kw and isinstance(kw[f.name], str) and f.type in ("float", float):
            try:
                kw[f.name] = float(kw[f.name])
            except ValueError as exc:
                raise ConfigError(f"{where}.{f.name}: {exc}") from exc
    if cls is ScenarioBlock and "path_loss" in kw:
        pl = dict(kw["path_loss"] or {})
        if "exponents" in pl:
            pl["exponents"] = tuple(pl["exponents"])
        kw["path_loss"] = _build(PathLossModel, pl, f"{where}.path_loss")
    if cls is AlgorithmsBlock:
        for name in ("alg1", "alg2"):
            if name in kw:
                kw[name] = _build(AlgorithmConfig, kw[name], f"{where}.{name}")
        if "run" in kw:
            kw["run"] = tuple(kw["run"])
    for key in ("values", "formats"):
        if key in kw and isinstance(kw[key], list):
            kw[key] = tuple(kw[key])
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict | None) -> RunConfig:
    data = data or {}
    unknown = set(data) - set(_BLOCKS)
    if unknown:
        raise ConfigError(f"unknown config blocks: {sorted(unknown)}")
    blocks = {name: _build(cls, data.get(name), name) for name, cls in _BLOCKS.items()}
    try:
        return RunConfig(**blocks)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def dump_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
