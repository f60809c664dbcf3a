"""Run configuration: a flat, commented key=value format with sections.

Keys are globally unique; sections are purely organizational. `#` starts a
comment, blank lines are ignored. Values round-trip losslessly (floats are
written with repr precision). Environment variables named SDF_<KEY> override
file values when loading through load_config().
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .terrain import TerrainFamily, TerrainSpec


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # [run]
    master_seed: int = 1234
    env_count: int = 4
    frame_count: int = 16
    frame_dt: float = 0.02
    workers: int = 1
    output_dir: str = "out"
    # [terrain]
    family: str = "StairsUp"
    difficulty: int = 19
    cell_resolution: float = 0.05
    extent_length: float = 12.0
    extent_width: float = 4.0
    terrain_seed: int = 0
    # [rig]
    image_width: int = 40
    image_height: int = 30
    focal_x: float = 21.0
    focal_y: float = 21.0
    baseline: float = 0.05
    mount_forward: float = 0.10
    mount_height: float = 0.65
    mount_pitch: float = 1.0471975511965976  # 60 degrees downward
    max_range: float = 4.0
    # [robot]
    base_height: float = 0.78
    walk_speed: float = 0.5
    start_x: float = 1.0
    # [augment]
    stereo_fusion: bool = True
    random_conv: bool = True
    gaussian_noise: bool = True
    perlin_noise: bool = True
    scale: bool = True
    pixel_failures: bool = True
    clip: bool = True
    crop: bool = True

    _SECTIONS = (
        ("run", ("master_seed", "env_count", "frame_count", "frame_dt", "workers",
                 "output_dir")),
        ("terrain", ("family", "difficulty", "cell_resolution", "extent_length",
                     "extent_width", "terrain_seed")),
        ("rig", ("image_width", "image_height", "focal_x", "focal_y", "baseline",
                 "mount_forward", "mount_height", "mount_pitch", "max_range")),
        ("robot", ("base_height", "walk_speed", "start_x")),
        ("augment", ("stereo_fusion", "random_conv", "gaussian_noise", "perlin_noise",
                     "scale", "pixel_failures", "clip", "crop")),
    )

    def validate(self) -> "RunConfig":
        if self.env_count < 1:
            raise ConfigError("env_count must be >= 1")
        if self.frame_count < 1:
            raise ConfigError("frame_count must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.terrain_spec()  # raises on bad terrain parameters
        return self

    def terrain_spec(self) -> TerrainSpec:
        try:
            family = TerrainFamily(self.family)
        except ValueError:
            names = ", ".join(f.value for f in TerrainFamily)
            raise ConfigError(f"unknown terrain family {self.family!r} (expected one of {names})")
        return TerrainSpec(family=family, difficulty=self.difficulty,
                           cell_resolution=self.cell_resolution,
                           extent=(self.extent_length, self.extent_width),
                           seed=self.terrain_seed)

    # -- serialization --------------------------------------------------------

    def to_text(self) -> str:
        lines = ["# sdfsim run configuration"]
        for section, keys in self._SECTIONS:
            lines.append(f"\n[{section}]")
            for key in keys:
                lines.append(f"{key} = {_format_value(getattr(self, key))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line or (line.startswith("[") and line.endswith("]")):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = (part.strip() for part in line.partition("="))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                setattr(cfg, key, _parse_value(types[key], value))
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}")
        return cfg

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_text())

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_text(f.read())

    def apply_env(self, environ=None) -> "RunConfig":
        environ = os.environ if environ is None else environ
        types = {f.name: f.type for f in fields(self)}
        for key, typ in types.items():
            raw = environ.get(f"SDF_{key.upper()}")
            if raw is not None:
                try:
                    setattr(self, key, _parse_value(typ, raw))
                except ValueError as exc:
                    raise ConfigError(f"environment SDF_{key.upper()}: {exc}")
        return self


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(typ: str, raw: str):
    if typ == "bool":
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if typ == "int":
        return int(raw)
    if typ == "float":
        return float(raw)
    return raw


def load_config(path=None, environ=None) -> RunConfig:
    """File -> environment overrides -> validation."""
    cfg = RunConfig.from_file(path) if path else RunConfig()
    return cfg.apply_env(environ).validate()
