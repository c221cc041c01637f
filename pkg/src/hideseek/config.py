"""Run configuration: dataclasses, a line-aware INI reader and a dumper.

A config file is a sectioned ``key = value`` document. Every key has a
default taken from the scenario preset named by ``[run] scenario``; the file
overrides individual keys. ``[phase.N]`` sections, when present, replace the
preset's phase plan. Unknown sections or keys are rejected with their line.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from .game import SCENARIOS, EpisodeConfig, PhaseConfig, RewardConfig
from .learn.mlp import MlpSpec
from .learn.ppo import HyperParams, buffer_size
from .sensors import FRONTAL, SPATIAL, GridSensorConfig, RaycastConfig
from .world import ArenaConfig, ConfigError, WorldParams

LEARNING_TEAMS = ("hiders", "seekers", "single_agent")
OPPONENT_POLICIES = ("frozen_checkpoint", "scripted_random", "scripted_stationary", "scripted_pursuit", "none")


class ConfigParseError(ConfigError):
    """Config error carrying the offending key path and source line."""

    def __init__(self, key_path: str, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(key_path, message + where)
        self.line = line


def _field_path(section: str, obj, exc: Exception) -> str:
    """``section.field`` when the message opens with one of obj's fields."""
    head = str(exc).split(" ", 1)[0]
    return f"{section}.{head}" if head in {f.name for f in fields(obj)} else section


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    scenario: str = "hideseek_curriculum"
    total_env_steps: int = 3_000_000
    checkpoint_interval: int = 10  # updates between checkpoints
    rewards_ledger: bool = False
    metrics_smoothing: float = 0.99


@dataclass(frozen=True)
class ParallelConfig:
    env_count: int = 8
    instances_per_env: int = 3
    workers: int = 1
    buffer_size: int = 0  # 0 means derive b * E_n * P_n
    asynchronous: bool = False  # merge worker blocks as they finish; not reproducible

    @property
    def instances(self) -> int:
        return self.env_count * self.instances_per_env


@dataclass(frozen=True)
class LearnConfig:
    batch_size: int = 3072
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    learning_rate: float = 3e-4
    epochs_per_update: int = 3
    entropy_coefficient: float = 0.005
    value_coefficient: float = 0.5
    max_grad_norm: float = 0.5
    optimizer: str = "sgd"
    minibatch_size: int = 0  # 0 means batch_size
    hidden_layers: int = 2
    hidden_units: int = 256
    init_log_std: float = -0.5

    def hyper(self, seed: int) -> HyperParams:
        return HyperParams(
            batch_size=self.batch_size, gamma=self.gamma, gae_lambda=self.gae_lambda,
            clip_epsilon=self.clip_epsilon, learning_rate=self.learning_rate,
            epochs_per_update=self.epochs_per_update, entropy_coefficient=self.entropy_coefficient,
            value_coefficient=self.value_coefficient, max_grad_norm=self.max_grad_norm,
            optimizer=self.optimizer, seed=seed,
        )


@dataclass(frozen=True)
class EpisodeSection:
    max_env_steps: int = 3072
    prep_fraction: float = 0.4
    decision_interval: int = 3
    hiders: int = 1
    seekers: int = 1
    agents: int = 1  # learning agents in single-team scenarios
    target_mode: str = "auto"
    target_speed: float = 1.5

    @property
    def phase(self) -> PhaseConfig:
        return PhaseConfig(self.max_env_steps, self.prep_fraction, self.decision_interval)


@dataclass(frozen=True)
class CurriculumConfig:
    enabled: bool = True
    start_level: int = 1
    threshold: float = 1.0
    window: int = 100
    level4_reward_scale: float = 0.5


@dataclass(frozen=True)
class ObservationSection:
    proprio: bool = True
    relative: bool = False


@dataclass(frozen=True)
class TrainPhase:
    learning_team: str = "hiders"
    opponent_policy: str = "scripted_random"
    step_budget: int = 1_000_000


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    parallel: ParallelConfig = field(default_factory=ParallelConfig)
    learn: LearnConfig = field(default_factory=LearnConfig)
    episode: EpisodeSection = field(default_factory=EpisodeSection)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    world: WorldParams = field(default_factory=WorldParams)
    spatial_sensor: GridSensorConfig | None = SPATIAL
    frontal_sensor: GridSensorConfig | None = FRONTAL
    raycast: RaycastConfig | None = field(default_factory=RaycastConfig)
    observation: ObservationSection = field(default_factory=ObservationSection)
    phases: tuple = (TrainPhase(step_budget=3_000_000),)

    # --- derived views ---
    @property
    def scenario_kind(self) -> str:
        """``hideseek`` or the name of a single-team pre-experiment."""
        return self.rewards.scenario

    @property
    def is_hideseek(self) -> bool:
        return self.rewards.scenario == "hideseek"

    @property
    def buffer_capacity(self) -> int:
        return buffer_size(self.learn.batch_size, self.parallel.env_count, self.parallel.instances_per_env)

    def team_size(self, team: str) -> int:
        if team == "hiders":
            return self.episode.hiders
        if team == "seekers":
            return self.episode.seekers
        return self.episode.agents

    @property
    def teams(self) -> tuple:
        return ("hiders", "seekers") if self.is_hideseek else ("single_agent",)

    def observation_config(self):
        from .harness.observe import ObservationConfig

        return ObservationConfig(
            spatial=self.spatial_sensor, frontal=self.frontal_sensor, raycast=self.raycast,
            proprio=self.observation.proprio, relative=self.observation.relative,
        )

    def mlp_spec(self) -> MlpSpec:
        return MlpSpec(
            input_dim=self.observation_config().size(), hidden_layers=self.learn.hidden_layers,
            hidden_units=self.learn.hidden_units, init_log_std=self.learn.init_log_std,
        )

    def episode_config(self, level: int = 1) -> EpisodeConfig:
        scale = self.curriculum.level4_reward_scale if (self.is_hideseek and level == 4) else 1.0
        return EpisodeConfig(
            phase=self.episode.phase, rewards=self.rewards, frontal=self.frontal_sensor or FRONTAL,
            reward_scale=scale, target_mode=self.episode.target_mode,
            target_speed=self.episode.target_speed,
        )

    def validate(self) -> "RunConfig":
        """Check cross-field consistency; raises ``ConfigError``."""
        try:
            self.episode.phase
        except ValueError as exc:
            raise ConfigError(_field_path("episode", self.episode, exc), str(exc)) from exc
        if self.rewards.scenario not in ("hideseek",) + SCENARIOS:
            raise ConfigError("rewards.scenario", f"unknown scenario {self.rewards.scenario!r}")
        if self.is_hideseek != (self.arena.layout == "hideseek"):
            raise ConfigError("arena.layout", "hide-and-seek needs the hideseek layout, scenarios the open one")
        p = self.parallel
        for name in ("env_count", "instances_per_env", "workers"):
            if getattr(p, name) < 1:
                raise ConfigError(f"parallel.{name}", "must be >= 1")
        try:
            cap = self.buffer_capacity
        except (ValueError, OverflowError) as exc:
            raise ConfigError("learn.batch_size", str(exc)) from exc
        if p.buffer_size and p.buffer_size != cap:
            raise ConfigError(
                "parallel.buffer_size",
                f"declared {p.buffer_size} but batch_size*env_count*instances_per_env = {cap}",
            )
        if self.learn.minibatch_size < 0:
            raise ConfigError("learn.minibatch_size", "must be >= 0")
        try:
            self.learn.hyper(self.run.seed)
        except ValueError as exc:
            raise ConfigError(_field_path("learn", self.learn, exc), str(exc)) from exc
        if self.is_hideseek:
            if not 1 <= self.episode.hiders <= 2:
                raise ConfigError("episode.hiders", "must be in 1..2")
            if not 1 <= self.episode.seekers <= 4:
                raise ConfigError("episode.seekers", "must be in 1..4")
        elif self.episode.agents < 1:
            raise ConfigError("episode.agents", "must be >= 1")
        if not 1 <= self.curriculum.start_level <= 4:
            raise ConfigError("curriculum.start_level", "must be in 1..4")
        if self.curriculum.window < 1:
            raise ConfigError("curriculum.window", "must be >= 1")
        if not 0 <= self.run.metrics_smoothing < 1:
            raise ConfigError("run.metrics_smoothing", "must lie in [0, 1)")
        if self.run.checkpoint_interval < 1:
            raise ConfigError("run.checkpoint_interval", "must be >= 1")
        if not self.phases:
            raise ConfigError("phase", "at least one training phase is required")
        for i, ph in enumerate(self.phases):
            key = f"phase.{i}"
            if ph.learning_team not in LEARNING_TEAMS:
                raise ConfigError(f"{key}.learning_team", f"must be one of {LEARNING_TEAMS}")
            if ph.opponent_policy not in OPPONENT_POLICIES:
                raise ConfigError(f"{key}.opponent_policy", f"must be one of {OPPONENT_POLICIES}")
            if ph.learning_team not in self.teams:
                raise ConfigError(f"{key}.learning_team", f"{ph.learning_team!r} does not exist in this scenario")
            if ph.step_budget < 1:
                raise ConfigError(f"{key}.step_budget", "must be >= 1")
            if self.learn.batch_size % self.team_size(ph.learning_team):
                raise ConfigError("learn.batch_size", f"must be divisible by the {ph.learning_team} team size")
        total = sum(ph.step_budget for ph in self.phases)
        if total != self.run.total_env_steps:
            raise ConfigError("run.total_env_steps", f"phase budgets sum to {total}, not {self.run.total_env_steps}")
        return self


# --- INI reading and writing ----------------------------------------------

_SECTION_TYPES = {
    "run": RunSection,
    "parallel": ParallelConfig,
    "learn": LearnConfig,
    "episode": EpisodeSection,
    "rewards": RewardConfig,
    "curriculum": CurriculumConfig,
    "arena": ArenaConfig,
    "world": WorldParams,
    "spatial_sensor": GridSensorConfig,
    "frontal_sensor": GridSensorConfig,
    "raycast": RaycastConfig,
    "observation": ObservationSection,
}
_OPTIONAL = ("spatial_sensor", "frontal_sensor", "raycast")


def read_ini(text: str, source: str = "<config>"):
    """Parse ``[section]`` / ``key = value`` lines. Returns an ordered dict
    section -> {key: (raw value, line number)} plus each section's line."""
    sections: dict = {}
    lines: dict = {}
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigParseError(source, f"malformed section header {line!r}", no)
            current = line[1:-1].strip()
            if current in sections:
                raise ConfigParseError(current, "duplicate section", no)
            sections[current] = {}
            lines[current] = no
            continue
        if "=" not in line:
            raise ConfigParseError(current or source, f"expected 'key = value', got {line!r}", no)
        if current is None:
            raise ConfigParseError(source, "key outside of any section", no)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in sections[current]:
            raise ConfigParseError(f"{current}.{key}", "duplicate key", no)
        sections[current][key] = (value, no)
    return sections, lines


def _convert(kind, raw: str, path: str, line: int):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(part.strip() for part in raw.split(",") if part.strip())
        return raw
    except ValueError:
        raise ConfigParseError(path, f"expected {kind.__name__}, got {raw!r}", line) from None


_KINDS = {"int": int, "float": float, "bool": bool, "str": str, "tuple": tuple}


def _field_kind(obj, name: str):
    ann = {f.name: f.type for f in fields(obj)}[name]
    ann = ann if isinstance(ann, str) else getattr(ann, "__name__", str(ann))
    return _KINDS.get(ann.split("|")[0].strip(), str)


def _apply_section(base, name: str, items: dict):
    values = {}
    known = {f.name for f in fields(base)}
    for key, (raw, line) in items.items():
        path = f"{name}.{key}"
        if key not in known:
            raise ConfigParseError(path, "unknown key", line)
        values[key] = _convert(_field_kind(base, key), raw, path, line)
    try:
        return dataclasses.replace(base, **values)
    except (ValueError, TypeError) as exc:
        first = min((ln for _, ln in items.values()), default=None)
        raise ConfigParseError(name, str(exc), first) from None


def parse_text(text: str, source: str = "<config>") -> RunConfig:
    from .presets import PRESET_NAMES, preset

    sections, sec_lines = read_ini(text, source)
    run_items = sections.get("run", {})
    scenario = run_items.get("scenario", (RunSection.scenario, None))
    if scenario[0] not in PRESET_NAMES:
        raise ConfigParseError("run.scenario", f"unknown scenario {scenario[0]!r}; expected one of {PRESET_NAMES}",
                               scenario[1])
    cfg = preset(scenario[0]).config
    updates = {}
    phase_sections = []
    for name, items in sections.items():
        if name.startswith("phase."):
            idx = name.split(".", 1)[1]
            if not idx.isdigit():
                raise ConfigParseError(name, "phase sections are named phase.0, phase.1, ...", sec_lines[name])
            phase_sections.append((int(idx), name, items))
            continue
        if name not in _SECTION_TYPES:
            raise ConfigParseError(name, "unknown section", sec_lines[name])
        base = getattr(cfg, name)
        if name in _OPTIONAL:
            items = dict(items)
            enabled = items.pop("enabled", None)
            on = True if enabled is None else _convert(bool, enabled[0], f"{name}.enabled", enabled[1])
            if not on:
                updates[name] = None
                continue
            if base is None:
                base = _SECTION_TYPES[name]() if name == "raycast" else (SPATIAL if name == "spatial_sensor" else FRONTAL)
        updates[name] = _apply_section(base, name, items)
    cfg = dataclasses.replace(cfg, **updates)
    if phase_sections:
        phase_sections.sort()
        if [i for i, _, _ in phase_sections] != list(range(len(phase_sections))):
            raise ConfigParseError("phase", "phase sections must be numbered 0, 1, 2, ... without gaps",
                                   sec_lines[phase_sections[0][1]])
        cfg = dataclasses.replace(
            cfg, phases=tuple(_apply_section(TrainPhase(), n, it) for _, n, it in phase_sections)
        )
    elif "total_env_steps" in run_items:
        cfg = dataclasses.replace(cfg, phases=rescale_phases(cfg.phases, cfg.run.total_env_steps))
    try:
        return cfg.validate()
    except ConfigParseError:
        raise
    except ConfigError as exc:
        sec, _, key = exc.field.partition(".")
        line = sections.get(sec, {}).get(key, (None, sec_lines.get(sec)))[1]
        raise ConfigParseError(exc.field, str(exc).split(": ", 1)[-1], line) from None


def parse_config(path) -> RunConfig:
    """Read and fully validate a run config file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_text(text, str(path))


def rescale_phases(phases, total: int) -> tuple:
    """Scale phase budgets proportionally so they sum to ``total``."""
    old = sum(p.step_budget for p in phases)
    out, used = [], 0
    for i, p in enumerate(phases):
        budget = total - used if i == len(phases) - 1 else max(1, p.step_budget * total // old)
        used += budget
        out.append(dataclasses.replace(p, step_budget=budget))
    return tuple(out)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(str(x) for x in v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    """Resolved config with every key written out; ``parse_text`` of the
    result reproduces ``cfg`` exactly."""
    out = []
    for name in _SECTION_TYPES:
        obj = getattr(cfg, name)
        out.append(f"[{name}]")
        if name in _OPTIONAL:
            out.append(f"enabled = {_fmt(obj is not None)}")
            if obj is None:
                out.append("")
                continue
        for f in fields(obj):
            out.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
        out.append("")
    for i, ph in enumerate(cfg.phases):
        out.append(f"[phase.{i}]")
        for f in fields(ph):
            out.append(f"{f.name} = {_fmt(getattr(ph, f.name))}")
        out.append("")
    return "\n".join(out)
