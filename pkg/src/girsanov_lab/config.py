"""Scenario configuration files.

One scenario per file, one ``key = value`` per line, ``#`` starts a
comment, arrays are comma separated::

    scenario = two_atom_tilt
    n_paths = 20000
    atoms = 1, -1
    ell = 2, 0.5

Keys other than the reserved ones below are model parameters.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

OUTPUT_ENV = "GIRSANOV_LAB_OUTPUT_DIR"
DEFAULT_OUTPUT = "girsanov-out"

_RESERVED = {
    "scenario": "scenario_name",
    "scenario_name": "scenario_name",
    "grid_n": "grid_n",
    "n_paths": "n_paths",
    "seed": "seed",
    "tolerance_sigmas": "tolerance_sigmas",
    "output": "output_path",
    "output_path": "output_path",
    "workers": "workers",
}


class ConfigError(ValueError):
    pass


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [_scalar(t.strip()) for t in text.split(",") if t.strip()]
    return _scalar(text)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_name: str
    params: dict = field(default_factory=dict)
    grid_n: int = 256
    n_paths: int = 10_000
    seed: int = 0
    tolerance_sigmas: float = 3.0
    output_path: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.grid_n < 2:
            raise ConfigError("grid_n must be >= 2")
        if self.n_paths < 100:
            raise ConfigError("n_paths must be >= 100")
        if not self.tolerance_sigmas > 0:
            raise ConfigError("tolerance_sigmas must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "ScenarioConfig":
        fields, params = {}, {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ConfigError(f"line {lineno}: empty key")
            if key in _RESERVED:
                fields[_RESERVED[key]] = value
            else:
                params[key] = parse_value(value)
        if "scenario_name" not in fields:
            raise ConfigError("missing 'scenario'")
        try:
            kw = {
                "grid_n": int(fields.get("grid_n", cls.grid_n)),
                "n_paths": int(fields.get("n_paths", cls.n_paths)),
                "seed": int(fields.get("seed", cls.seed)),
                "tolerance_sigmas": float(fields.get("tolerance_sigmas", cls.tolerance_sigmas)),
                "workers": int(fields.get("workers", cls.workers)),
            }
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(fields["scenario_name"], params, output_path=fields.get("output_path"), **kw)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def output_dir(self) -> str:
        return self.output_path or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT

    # typed parameter access
    def num(self, key: str, default: float) -> float:
        v = self.params.get(key, default)
        if isinstance(v, list):
            raise ConfigError(f"{key}: expected a single number")
        return float(v)

    def integer(self, key: str, default: int) -> int:
        return int(self.num(key, default))

    def nums(self, key: str, default) -> list[float]:
        v = self.params.get(key, default)
        return [float(x) for x in (v if isinstance(v, list) else [v])]

    def echo(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "params": dict(self.params),
            "grid_n": self.grid_n,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "tolerance_sigmas": self.tolerance_sigmas,
            "workers": self.workers,
        }
