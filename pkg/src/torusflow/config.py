"""Run configuration in flat ``key = value`` format.

Lines starting with ``#`` are comments.  Unknown keys, keys that do not apply
to the chosen profile kind, malformed values and out-of-range values are
rejected with a single-line :class:`ConfigError` naming the key.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .diagnostics import DEFAULT_LEVELS
from .flow import SCHEMES, StepperConfig
from .geometry import (
    ProfileError,
    build_grid,
    make_circle_profile,
    make_interval_profile,
    make_star_profile,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "echo_config", "config_hash",
           "make_profile", "make_grid", "make_stepper", "initial_field"]

PRESETS = ("const", "radial_cos", "wrap", "table")
MMS_CASES = ("cos", "const")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    profile_kind: str = "interval"
    profile_r0: float = 1.0
    profile_r1: float = 2.0
    profile_center_y: float = 0.0
    profile_center_r: float = 2.0
    profile_a: float = 0.5
    profile_cos: tuple = (0.5,)
    profile_sin: tuple = ()
    grid_n: int = 129
    grid_ns: int = 64
    grid_nphi: int = 64
    init_preset: str = "radial_cos"
    init_amplitude: float = 2 * math.pi
    init_k: int = 1
    init_table: str = ""
    stepper_sigma: float = 0.2
    stepper_scheme: str = "euler"
    stepper_stages: int = 16
    stepper_t_final: float = 30.0
    stepper_osc_tol: float = 1e-4
    stepper_vtilde_cap: float = 1e3
    stepper_max_steps: int = 0
    diagnostics_cadence: int = 10
    diagnostics_levels: tuple = DEFAULT_LEVELS
    diagnostics_h2v2_cap_factor: float = 100.0
    output_dir: str = "out"
    output_snapshot_interval: int = 0
    mms_case: str = "cos"
    mms_amplitude: float = 1.0
    mms_t_final: float = 0.05
    mms_order_min: float = 1.8
    mms_order_max: float = 2.2
    source: str = field(default="", compare=False)

    @property
    def dim(self) -> int:
        return 1 if self.profile_kind == "interval" else 2


def _key(attr: str) -> str:
    section, _, rest = attr.partition("_")
    return f"{section}.{rest}"


_ATTRS = [f.name for f in fields(RunConfig) if f.name != "source"]
KEYS = {_key(a): a for a in _ATTRS}

# keys that only make sense for some profile kinds / presets / schemes
_APPLIES = {
    "profile.r0": lambda c: c.profile_kind == "interval",
    "profile.r1": lambda c: c.profile_kind == "interval",
    "profile.center_y": lambda c: c.profile_kind != "interval",
    "profile.center_r": lambda c: c.profile_kind != "interval",
    "profile.a": lambda c: c.profile_kind == "circle",
    "profile.cos": lambda c: c.profile_kind == "star",
    "profile.sin": lambda c: c.profile_kind == "star",
    "grid.n": lambda c: c.profile_kind == "interval",
    "grid.ns": lambda c: c.profile_kind != "interval",
    "grid.nphi": lambda c: c.profile_kind != "interval",
    "init.k": lambda c: c.init_preset == "radial_cos",
    "init.table": lambda c: c.init_preset == "table",
    "init.amplitude": lambda c: c.init_preset != "table",
    "stepper.stages": lambda c: c.stepper_scheme == "rkl2",
}


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
    except ValueError:
        kind = "list of numbers" if isinstance(default, tuple) else type(default).__name__
        raise ConfigError(f"{key}: expected {kind}, got {raw!r}") from None
    return raw


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _validate(c: RunConfig):
    _check(c.profile_kind in ("interval", "circle", "star"), "profile.kind",
           "must be one of interval, circle, star")
    if c.profile_kind == "circle":
        _check(c.profile_a > 0, "profile.a", "must be > 0")
        _check(c.profile_center_r - c.profile_a > 0, "profile.a",
               "must be < profile.center_r (profile touches rotation axis)")
    if c.profile_kind == "interval":
        _check(c.profile_r0 > 0, "profile.r0", "must be > 0")
        _check(c.profile_r1 > c.profile_r0, "profile.r1", "must be > profile.r0")
        _check(c.grid_n >= 3, "grid.n", "must be >= 3")
    else:
        _check(c.grid_ns >= 8, "grid.ns", "must be >= 8")
        _check(c.grid_nphi >= 8 and c.grid_nphi % 2 == 0, "grid.nphi", "must be even and >= 8")
    if c.profile_kind == "star":
        _check(len(c.profile_cos) >= 1, "profile.cos", "needs at least a0")
        try:
            make_profile(c)
        except ProfileError as exc:
            raise ConfigError(f"profile.cos: {exc}") from None
    _check(c.init_preset in PRESETS, "init.preset", f"must be one of {', '.join(PRESETS)}")
    _check(c.init_k >= 0, "init.k", "must be >= 0")
    if c.init_preset == "table":
        _check(bool(c.init_table), "init.table", "path required for preset table")
    _check(0 < c.stepper_sigma <= 0.5, "stepper.sigma", "sigma ∈ (0, 0.5]")
    _check(c.stepper_scheme in SCHEMES, "stepper.scheme", f"must be one of {', '.join(SCHEMES)}")
    _check(c.stepper_stages >= 2, "stepper.stages", "must be >= 2")
    _check(c.stepper_t_final > 0, "stepper.t_final", "must be > 0")
    _check(c.stepper_osc_tol >= 0, "stepper.osc_tol", "must be >= 0")
    _check(c.stepper_vtilde_cap > 1, "stepper.vtilde_cap", "must be > 1")
    _check(c.stepper_max_steps >= 0, "stepper.max_steps", "must be >= 0 (0 = unlimited)")
    _check(c.diagnostics_cadence >= 1, "diagnostics.cadence", "must be >= 1")
    _check(list(c.diagnostics_levels) == sorted(c.diagnostics_levels), "diagnostics.levels",
           "must be nondecreasing")
    _check(c.diagnostics_h2v2_cap_factor > 0, "diagnostics.h2v2_cap_factor", "must be > 0")
    _check(c.output_snapshot_interval >= 0, "output.snapshot_interval", "must be >= 0")
    _check(c.mms_case in MMS_CASES, "mms.case", f"must be one of {', '.join(MMS_CASES)}")
    _check(c.mms_t_final > 0, "mms.t_final", "must be > 0")
    _check(c.mms_order_min <= c.mms_order_max, "mms.order_max", "must be >= mms.order_min")


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{key}: unknown key")
        if key in seen:
            raise ConfigError(f"{key}: duplicate key (lines {seen[key]} and {lineno})")
        seen[key] = lineno
        attr = KEYS[key]
        setattr(cfg, attr, _convert(key, raw, getattr(RunConfig, attr)))
    for key in seen:
        applies = _APPLIES.get(key)
        if applies is not None and not applies(cfg):
            raise ConfigError(f"{key}: not used with this profile.kind / init.preset / stepper.scheme")
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    cfg = parse_config(text)
    cfg.source = str(path)
    return cfg


def echo_config(cfg: RunConfig) -> str:
    """Canonical text of the effective configuration (every applicable key)."""
    lines = []
    for key, attr in KEYS.items():
        applies = _APPLIES.get(key)
        if applies is not None and not applies(cfg):
            continue
        lines.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(echo_config(cfg).encode("utf-8")).hexdigest()


def make_profile(c: RunConfig):
    if c.profile_kind == "interval":
        return make_interval_profile(c.profile_r0, c.profile_r1)
    center = (c.profile_center_y, c.profile_center_r)
    if c.profile_kind == "circle":
        return make_circle_profile(center, c.profile_a)
    return make_star_profile(center, (c.profile_cos, c.profile_sin))


def make_grid(c: RunConfig):
    prof = make_profile(c)
    return build_grid(prof, c.grid_n if c.dim == 1 else (c.grid_ns, c.grid_nphi))


def make_stepper(c: RunConfig) -> StepperConfig:
    return StepperConfig(
        sigma=c.stepper_sigma, scheme=c.stepper_scheme, t_final=c.stepper_t_final,
        vtilde_cap=c.stepper_vtilde_cap, osc_tol=c.stepper_osc_tol, stages=c.stepper_stages,
        max_steps=c.stepper_max_steps or None,
    )


def _radial_coordinate(grid):
    """Normalised coordinate in [0, 1]: ``(r - r0)/(r1 - r0)`` in 1D, polar ``s`` in 2D."""
    if grid.dim == 1:
        r0, r1 = grid.profile.r_range
        return (grid.r - r0) / (r1 - r0)
    return np.broadcast_to(grid.s[:, None], grid.shape)


def initial_field(c: RunConfig, grid) -> np.ndarray:
    """Initial angle field of the configured preset."""
    s = _radial_coordinate(grid)
    A = c.init_amplitude
    if c.init_preset == "const":
        return np.full(grid.shape, A)
    if c.init_preset == "radial_cos":
        return A * np.cos(c.init_k * np.pi * s)
    if c.init_preset == "wrap":
        return A * (1.0 + np.cos(np.pi * s)) / 2.0
    table = Path(c.init_table)
    if not table.is_absolute() and c.source:
        table = Path(c.source).parent / table
    try:
        data = np.loadtxt(table, comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"init.table: cannot read {table}: {exc}") from None
    if data.shape[1] != 2:
        raise ConfigError("init.table: expected two columns (coordinate, u)")
    order = np.argsort(data[:, 0])
    # 1D tables are indexed by r, 2D tables by the polar coordinate s
    x = grid.r if grid.dim == 1 else s
    return np.interp(x, data[order, 0], data[order, 1])
