"""Run configuration: flat ``section.key = value`` text with ``#`` comments."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ExpressionError, OldroydError
from .expr import compile_expr
from .model import FluidParams
from .solver import SolverOptions

FORCING_PRESETS = {
    "zero": ("0", "0"),
    "unit": ("1", "0"),
    "swirl": ("-(y - 0.5)", "x - 0.5"),
    "small": ("-(y - 0.5)", "x - 0.5"),
    "shear": ("sin(pi*y)", "0"),
}
# presets that come with a default target H^-1 norm
PRESET_TARGETS = {"small": 0.1}


@dataclass
class ForcingConfig:
    preset: str | None = "small"
    expr1: str | None = None
    expr2: str | None = None
    scale: float = 1.0
    # rescale so the discrete H^-1 norm equals this value
    target_norm: float | None = None

    def expressions(self):
        if self.expr1 is not None or self.expr2 is not None:
            return self.expr1 or "0", self.expr2 or "0"
        if self.preset not in FORCING_PRESETS:
            raise ConfigError(f"unknown forcing preset {self.preset!r}; choose from {sorted(FORCING_PRESETS)}")
        return FORCING_PRESETS[self.preset]

    def effective_target(self):
        if self.target_norm is not None:
            return self.target_norm
        if self.expr1 is None and self.expr2 is None:
            return PRESET_TARGETS.get(self.preset)
        return None


@dataclass
class MeshConfig:
    n: int = 16
    file: str | None = None
    refine: int = 0


@dataclass
class OutputConfig:
    dir: str = "runs"
    csv: bool = True
    vtk: bool = False


@dataclass
class MMSConfig:
    levels: int = 3
    n0: int = 8
    velocity_scale: float = 1.0
    stress_scale: float = 0.1
    reference: str = "interpolant"
    min_order: float = 1.8


@dataclass
class ProbeConfig:
    n_starts: int = 5
    rel_tol: float = 1e-8


@dataclass
class CertifyConfig:
    sweep: str | None = None
    c_omega_restarts: int = 5


@dataclass
class RunConfig:
    params: FluidParams = field(default_factory=FluidParams)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    output: OutputConfig = field(default_factory=OutputConfig)
    mms: MMSConfig = field(default_factory=MMSConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    certify: CertifyConfig = field(default_factory=CertifyConfig)
    seed: int = 0

    def validate(self, base_dir: Path | None = None):
        if self.mesh.file is not None:
            path = Path(self.mesh.file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigError(f"mesh file {self.mesh.file!r} does not exist")
            self.mesh.file = str(path)
        if self.mesh.n < 1 or self.mesh.refine < 0:
            raise ConfigError("mesh.n must be >= 1 and mesh.refine >= 0")
        if self.mms.reference not in ("interpolant", "exact"):
            raise ConfigError("mms.reference must be 'interpolant' or 'exact'")
        for e in self.forcing.expressions():
            try:
                compile_expr(e)
            except ExpressionError as exc:
                raise ConfigError(f"forcing expression {e!r}: {exc}") from exc
        return self


SECTIONS = ("params", "forcing", "mesh", "solver", "output", "mms", "probe", "certify")


def _hints(cls):
    return typing.get_type_hints(cls)


def _convert(text: str, hint, key: str):
    args = typing.get_args(hint)
    optional = type(None) in args
    if optional:
        if text.lower() in ("none", "null", ""):
            return None
        hint = next(a for a in args if a is not type(None))
    try:
        if hint is bool:
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as {getattr(hint, '__name__', hint)}") from exc


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    """Parse dotted-key config text; unknown keys and bad values raise :class:`ConfigError`."""
    values: dict[str, dict] = {s: {} for s in SECTIONS}
    top: dict = {}
    hints = {s: _hints(type(getattr(RunConfig(), s))) for s in SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "seed":
            top["seed"] = _convert(val, int, key)
            continue
        section, _, name = key.partition(".")
        if section not in hints or name not in hints[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[section][name] = _convert(val, hints[section][name], key)
    try:
        cfg = RunConfig(
            params=FluidParams(**values["params"]),
            forcing=ForcingConfig(**values["forcing"]),
            mesh=MeshConfig(**values["mesh"]),
            solver=SolverOptions(**values["solver"]),
            output=OutputConfig(**values["output"]),
            mms=MMSConfig(**values["mms"]),
            probe=ProbeConfig(**values["probe"]),
            certify=CertifyConfig(**values["certify"]),
            **top,
        )
    except ConfigError:
        raise
    except (OldroydError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate(base_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def _format(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for s in SECTIONS:
        obj = getattr(cfg, s)
        for f in dataclasses.fields(obj):
            lines.append(f"{s}.{f.name} = {_format(getattr(obj, f.name))}")
    lines.append(f"seed = {cfg.seed}")
    return "\n".join(lines) + "\n"


def build_forcing(fc: ForcingConfig):
    """Callable ``f(x, y) -> (f1, f2)`` for the configured expressions times ``scale``."""
    e1, e2 = (compile_expr(e) for e in fc.expressions())
    scale = fc.scale

    def f(x, y):
        return scale * e1(x, y), scale * e2(x, y)

    f.expressions = fc.expressions()
    f.scale = scale
    return f


def scaled_forcing(f, factor):
    def g(x, y):
        a, b = f(x, y)
        return factor * np.asarray(a), factor * np.asarray(b)

    return g
