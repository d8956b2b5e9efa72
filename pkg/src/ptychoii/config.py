"""Experiment configuration: a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored. Lists are comma-separated.
Unknown keys and unparsable values are rejected with the key name and line
number. An empty file yields every default below.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .objects import OBJECTS

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "parse_config", "SCHEMA", "SCENARIOS"]

SCENARIOS = ("compare-algorithms", "shift-error", "loose-support", "frames-sweep", "custom")


class ConfigError(ValueError):
    """Invalid configuration; the message names the key (and line, when known)."""


def _int_list(s):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _float_list(s):
    return tuple(float(v) for v in s.split(",") if v.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "compare-algorithms"
    object: str = "letters"
    background: float = 0.0
    grid: int = 128
    probe_px: int = 40
    steps: int = 16
    step_px: int = 4
    axis: str = "x"
    frames: int = 1000
    algorithm: str = "pii"
    iters: int = 20
    er_iters: int = 1000
    hio_iters: int = 1000
    beta: float = 0.7
    init: str = "uniform"
    noise_floor: float = 2.0
    order: str = "shuffle"
    loose: tuple = (0, 5, 10, 15, 20)
    shift: tuple = (0.0, 10.0, 20.0, 25.0, 50.0)
    shift_reference: str = "radius"
    frame_counts: tuple = (10, 50, 100, 500, 1000, 2000)
    n_seeds: int = 5
    seed: int = 0
    out: str = "results"

    def validate(self) -> "ExperimentConfig":
        def bad(key, why):
            raise ConfigError(f"{key}: {why}")

        if self.scenario not in SCENARIOS:
            bad("scenario", f"must be one of {', '.join(SCENARIOS)}")
        if self.grid < 2 or self.grid & (self.grid - 1):
            bad("grid", "must be a power of two")
        if self.object not in OBJECTS and not Path(self.object).is_file():
            bad("object", f"{self.object!r} is neither a built-in object nor an existing file")
        if not 0 < self.probe_px <= self.grid:
            bad("probe_px", "must be in (0, grid]")
        if self.steps < 1:
            bad("steps", "must be >= 1")
        if self.step_px < 0:
            bad("step_px", "must be >= 0")
        if (self.steps - 1) * self.step_px + self.probe_px > self.grid:
            bad("steps", "the scan (steps - 1) * step_px + probe_px does not fit the grid")
        if self.axis not in ("x", "y", "xy"):
            bad("axis", "must be x, y or xy")
        if self.frames < 2:
            bad("frames", "must be >= 2")
        if self.algorithm not in ("er", "hio", "pii"):
            bad("algorithm", "must be er, hio or pii")
        for k in ("iters", "er_iters", "hio_iters", "n_seeds"):
            if getattr(self, k) < 1:
                bad(k, "must be >= 1")
        if not 0 < self.beta <= 1:
            bad("beta", "must be in (0, 1]")
        if self.init not in ("uniform", "random"):
            bad("init", "must be uniform or random")
        if not 0 <= self.background <= 1:
            bad("background", "must be in [0, 1]")
        if self.order not in ("shuffle", "plan"):
            bad("order", "must be shuffle or plan")
        if self.noise_floor < 0:
            bad("noise_floor", "must be >= 0")
        if self.shift_reference not in ("step", "radius", "diameter"):
            bad("shift_reference", "must be step, radius or diameter")
        for k in ("loose", "shift", "frame_counts"):
            if not getattr(self, k):
                bad(k, "list must not be empty")
        if any(v < 0 for v in self.loose):
            bad("loose", "values must be >= 0")
        if any(not 0 <= v <= 100 for v in self.shift):
            bad("shift", "values must be in [0, 100]")
        if any(v < 2 for v in self.frame_counts):
            bad("frame_counts", "values must be >= 2")
        if not 0 <= self.seed < 2 ** 64:
            bad("seed", "must be an unsigned 64-bit integer")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def to_text(self) -> str:
        """Config file text that :func:`parse_config` reads back to ``self``."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_PARSERS = {
    int: int,
    float: float,
    str: str,
}

SCHEMA = {
    f.name: (
        _int_list if f.name in ("loose", "frame_counts")
        else _float_list if f.name == "shift"
        else _PARSERS[type(f.default)]
    )
    for f in fields(ExperimentConfig)
}


def coerce(key: str, raw, line: int | None = None):
    where = f" (line {line})" if line is not None else ""
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}{where}")
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    try:
        return SCHEMA[key](raw.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw.strip()!r}{where}") from None


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"line {n}: expected 'key = value', got {s!r}")
        key, raw = (p.strip() for p in s.split("=", 1))
        values[key] = coerce(key, raw, n)
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = coerce(key, raw)
    return ExperimentConfig(**values).validate()


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read and validate a config file; ``path=None`` starts from the defaults."""
    text = ""
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {str(p)!r} does not exist")
        text = p.read_text()
    return parse_config(text, overrides)
