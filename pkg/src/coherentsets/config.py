"""Experiment configuration: presets, key=value files, command-line overrides.

A config file is plain text, one ``key = value`` per line, ``#`` comments.
Every key has a preset default per experiment, file values override presets,
and explicit overrides (CLI flags) override the file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

__all__ = ["ExperimentConfig", "ConfigError", "make_config", "parse_config_file",
           "EXPERIMENTS"]

EXPERIMENTS = ("single-map", "periodic3", "aperiodic4", "wave2d")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Normalized settings for one experiment run.

    ``decay_span`` is the window the decay rates are measured over and
    ``push_span`` how far the seed vectors are pushed forward before the
    first checkpoint (steps for map experiments, time units for the flow).
    """

    experiment: str
    boxes: tuple[int, ...]
    test_points: int
    decay_span: float
    push_span: float
    modes: int
    checkpoints: tuple[float, ...]
    step: float = 0.01
    delta_range: tuple[int, int] | None = None
    compare_at: float | None = None
    preset: str = "desk"
    out_dir: Path | None = None
    workers: int = 1

    @property
    def n(self) -> int:
        total = 1
        for b in self.boxes:
            total *= b
        return total

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose from {', '.join(EXPERIMENTS)}")
        if any(b < 1 for b in self.boxes):
            raise ConfigError("box counts must be positive")
        if self.test_points < 1:
            raise ConfigError("test_points must be >= 1")
        if self.experiment == "wave2d":
            if len(self.boxes) != 2:
                raise ConfigError("wave2d needs boxes = NXxNY")
            side = round(self.test_points ** 0.5)
            if side * side != self.test_points:
                raise ConfigError("wave2d test_points must be a perfect square")
            if self.step <= 0:
                raise ConfigError("step must be positive")
        elif len(self.boxes) != 1:
            raise ConfigError(f"{self.experiment} needs a single box count")
        if not 0 <= self.push_span <= self.decay_span:
            raise ConfigError("need 0 <= push_span <= decay_span")
        if self.modes < 1:
            raise ConfigError("modes must be >= 1")
        if any(t < 0 for t in self.checkpoints):
            raise ConfigError("checkpoints must be nonnegative")
        if tuple(sorted(self.checkpoints)) != self.checkpoints:
            raise ConfigError("checkpoints must be sorted")
        if self.delta_range is not None:
            lo, hi = self.delta_range
            if not 1 <= lo <= hi:
                raise ConfigError("delta_range must satisfy 1 <= lo <= hi")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def as_items(self) -> list[tuple[str, object]]:
        items: list[tuple[str, object]] = [
            ("experiment", self.experiment),
            ("boxes", "x".join(str(b) for b in self.boxes)),
            ("test_points", self.test_points),
            ("decay_span", self.decay_span),
            ("push_span", self.push_span),
            ("modes", self.modes),
            ("checkpoints", ",".join(_num_str(t) for t in self.checkpoints)),
            ("workers", self.workers),
        ]
        if self.experiment == "wave2d":
            items.append(("step", self.step))
            items.append(("preset", self.preset))
            items.append(("compare_at", self.compare_at))
        if self.delta_range is not None:
            items.append(("delta_range", f"{self.delta_range[0]}:{self.delta_range[1]}"))
        return items


def _num_str(v: float) -> str:
    return str(int(v)) if float(v) == int(v) else repr(float(v))


_PRESETS: dict[str, ExperimentConfig] = {
    "single-map": ExperimentConfig(
        experiment="single-map", boxes=(6,), test_points=30, decay_span=20,
        push_span=10, modes=3, checkpoints=(0.0,)),
    "periodic3": ExperimentConfig(
        experiment="periodic3", boxes=(6,), test_points=30, decay_span=18,
        push_span=9, modes=3, checkpoints=(0.0, 1.0, 2.0)),
    "aperiodic4": ExperimentConfig(
        experiment="aperiodic4", boxes=(100,), test_points=100, decay_span=20,
        push_span=10, modes=3, checkpoints=(0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0),
        delta_range=(2, 19)),
    "wave2d": ExperimentConfig(
        experiment="wave2d", boxes=(120, 60), test_points=100, decay_span=40,
        push_span=20, modes=3, checkpoints=(2.5, 5.0, 7.5, 10.0), step=0.01,
        compare_at=10.0, preset="desk"),
}

#: Long-running full-resolution settings; opt in with preset=full.
_WAVE2D_FULL = dict(boxes=(240, 120), test_points=400, decay_span=80.0,
                    push_span=40.0, preset="full")


def parse_config_file(path) -> dict[str, str]:
    """Read ``key = value`` lines; later duplicates win."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _parse_boxes(text: str) -> tuple[int, ...]:
    parts = text.lower().replace("x", " ").split()
    try:
        return tuple(int(p) for p in parts)
    except ValueError as err:
        raise ConfigError(f"bad boxes spec {text!r}") from err


def _parse_checkpoints(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.replace(",", " ").split())
    except ValueError as err:
        raise ConfigError(f"bad checkpoints {text!r}") from err


def _parse_delta_range(text: str) -> tuple[int, int]:
    try:
        lo, _, hi = text.partition(":")
        return int(lo), int(hi)
    except ValueError as err:
        raise ConfigError(f"bad delta_range {text!r}; expected LO:HI") from err


_COERCERS = {
    "experiment": str,
    "boxes": _parse_boxes,
    "test_points": int,
    "decay_span": float,
    "push_span": float,
    "modes": int,
    "checkpoints": _parse_checkpoints,
    "step": float,
    "delta_range": _parse_delta_range,
    "compare_at": float,
    "preset": str,
    "out_dir": Path,
    "workers": int,
}


def make_config(experiment: str | None = None, config_file=None,
                overrides: dict[str, object] | None = None) -> ExperimentConfig:
    """Build a validated config from preset, then file, then overrides."""
    raw: dict[str, object] = {}
    if config_file is not None:
        for key, value in parse_config_file(config_file).items():
            if key not in _COERCERS:
                raise ConfigError(f"unknown config key {key!r}")
            raw[key] = _COERCERS[key](value)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _COERCERS:
            raise ConfigError(f"unknown config key {key!r}")
        raw[key] = _COERCERS[key](value) if isinstance(value, str) else value

    name = experiment or raw.get("experiment")
    if name is None:
        raise ConfigError("no experiment named; pass one or set it in the config file")
    if name not in _PRESETS:
        raise ConfigError(f"unknown experiment {name!r}; "
                          f"choose from {', '.join(EXPERIMENTS)}")
    cfg = _PRESETS[name]
    raw.pop("experiment", None)
    if name == "wave2d" and raw.get("preset") == "full":
        merged = dict(_WAVE2D_FULL)
        merged.update(raw)
        raw = merged
    if "boxes" in raw and isinstance(raw["boxes"], tuple) is False:
        raw["boxes"] = _parse_boxes(str(raw["boxes"]))
    cfg = replace(cfg, **raw)  # type: ignore[arg-type]
    cfg.validate()
    return cfg
