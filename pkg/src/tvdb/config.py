"""Flat ``section.key = value`` experiment configuration with key-precise diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .energies import TV_MODES, EnergyParams
from .grid import GridSpec
from .mosco import SweepSchedule
from .regularizers import KINDS, RegularizerSpec
from .scenarios import PAIRED, SINGLE


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and, when known, the line."""


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


# key -> (parser, default)
SCHEMA = {
    "grid.nx": (int, 32),
    "grid.ny": (int, 24),
    "grid.lx": (float, 1.0),
    "grid.ly": (float, 1.0),
    "energy.epsilon": (float, 1.0),
    "energy.kappa": (float, 0.0),
    "energy.tv_mode": (str, "anisotropic"),
    "regularizer.kind": (str, "none"),
    "regularizer.delta": (float, 0.1),
    "flow.tau": (float, 1e-3),
    "flow.T": (float, 0.1),
    "flow.inner_tol": (float, 1e-8),
    "flow.inner_max_iters": (int, 20000),
    "scenario.name": (str, "step"),
    "scenario.amplitude": (float, 1.0),
    "scenario.shift": (float, 0.5),
    "schedule.n_sweep": (int, 8),
    "schedule.delta": (_floats, ()),
    "schedule.kappa": (_floats, ()),
    "schedule.max_level": (int, 8),
    "mosco.mode": (str, "m2"),
    "props.lattice_samples": (int, 1000),
    "props.prox_samples": (int, 200),
    "output.directory": (str, "tvdb_out"),
    "output.checkpoint_stride": (int, 10),
    "output.csv": (_bool, True),
    "output.weak_tests": (int, 50),
    "seed": (int, 0),
}

MOSCO_MODES = ("m2", "m1", "trajectory")


@dataclass
class ExperimentConfig:
    values: dict
    lines: dict = field(default_factory=dict)  # key -> line number in the source file
    source: str = "<defaults>"

    def __getitem__(self, key):
        return self.values[key]

    def _where(self, key) -> str:
        line = self.lines.get(key)
        if line:
            return f"{self.source}:{line}: "
        return f"{self.source}: (default or override) "

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(f"{self._where(key)}{key}: {message}")

    # typed views

    @property
    def grid(self) -> GridSpec:
        v = self.values
        return GridSpec(v["grid.nx"], v["grid.ny"], v["grid.lx"], v["grid.ly"])

    @property
    def params(self) -> EnergyParams:
        v = self.values
        reg = None
        if v["regularizer.kind"] != "none":
            reg = RegularizerSpec(v["regularizer.kind"], v["regularizer.delta"])
        return EnergyParams(v["energy.epsilon"], v["energy.kappa"] if reg else 0.0, reg,
                            v["energy.tv_mode"])

    @property
    def schedule(self) -> SweepSchedule:
        v = self.values
        if v["schedule.delta"] or v["schedule.kappa"]:
            return SweepSchedule(v["schedule.delta"], v["schedule.kappa"])
        return SweepSchedule.geometric(v["schedule.n_sweep"])

    def echo(self) -> dict:
        return {k: list(val) if isinstance(val, tuple) else val for k, val in self.values.items()}

    # validation

    def validate(self) -> "ExperimentConfig":
        v = self.values

        def need(key, ok, message):
            if not ok:
                raise self.error(key, message)

        need("grid.nx", v["grid.nx"] >= 4, "must be an integer >= 4")
        need("grid.ny", v["grid.ny"] >= 3, "must be an integer >= 3")
        need("grid.lx", v["grid.lx"] > 0, "must be positive")
        need("grid.ly", v["grid.ly"] > 0, "must be positive")
        need("energy.epsilon", v["energy.epsilon"] > 0, "must be positive")
        need("energy.kappa", v["energy.kappa"] >= 0, "must be nonnegative")
        need("energy.tv_mode", v["energy.tv_mode"] in TV_MODES, f"must be one of {TV_MODES}")
        kinds = ("none",) + KINDS
        need("regularizer.kind", v["regularizer.kind"] in kinds, f"must be one of {kinds}")
        need("regularizer.delta", 0 < v["regularizer.delta"] <= 1, "must lie in (0, 1]")
        need("flow.tau", v["flow.tau"] > 0, "must be positive")
        need("flow.T", v["flow.T"] > 0, "must be positive")
        n = v["flow.T"] / v["flow.tau"] if v["flow.tau"] > 0 else 0
        need("flow.T", abs(n - round(n)) <= 1e-9 * max(1.0, n), "must be an integer multiple of flow.tau")
        need("flow.inner_tol", v["flow.inner_tol"] > 0, "must be positive")
        need("flow.inner_max_iters", v["flow.inner_max_iters"] >= 1, "must be at least 1")
        names = SINGLE + PAIRED
        need("scenario.name", v["scenario.name"] in names, f"must be one of {names}")
        need("schedule.n_sweep", v["schedule.n_sweep"] >= 4, "a sweep needs at least 4 entries")
        need("schedule.max_level", v["schedule.max_level"] >= 1, "must be at least 1")
        need("mosco.mode", v["mosco.mode"] in MOSCO_MODES, f"must be one of {MOSCO_MODES}")
        need("props.lattice_samples", v["props.lattice_samples"] >= 1, "must be at least 1")
        need("props.prox_samples", v["props.prox_samples"] >= 0, "must be nonnegative")
        need("output.checkpoint_stride", v["output.checkpoint_stride"] >= 1, "must be at least 1")
        need("output.weak_tests", v["output.weak_tests"] >= 0, "must be nonnegative")
        try:
            self.schedule
        except ValueError as exc:
            key = "schedule.delta" if v["schedule.delta"] else "schedule.n_sweep"
            raise self.error(key, str(exc)) from None
        return self


def defaults() -> dict:
    return {k: d for k, (_, d) in SCHEMA.items()}


def parse_config(text: str, source: str = "<string>", overrides: dict | None = None) -> ExperimentConfig:
    values, lines = defaults(), {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: {key}: unknown key")
        if key in lines:
            raise ConfigError(f"{source}:{lineno}: {key}: duplicate key (first set on line {lines[key]})")
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: cannot parse {val!r} ({exc})") from None
        lines[key] = lineno
    for key, val in (overrides or {}).items():
        values[key] = val
    return ExperimentConfig(values, lines, source).validate()


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(p), overrides)
