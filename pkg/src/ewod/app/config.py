"""Line-oriented ``key = value`` run configuration."""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field

from ..materials import MaterialParams, PinningParams
from ..mesh import ChannelGeometry, Electrode
from ..scheme import Circle, Ellipse, HalfPlane, SchemeParams
from .presets import PRESET_NAMES, PRESETS, scale_defaults


class ConfigError(ValueError):
    def __init__(self, key: str | None, line: int | None, message: str):
        self.key, self.line = key, line
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{key}: {message}" if key else f"{where}{message}")


@dataclass
class RunConfig:
    preset: str = "move"
    desk_scale: bool = True
    nx: int = 40
    ny_fluid: int = 8
    ny_plate: int = 2
    geometry: ChannelGeometry = field(default_factory=ChannelGeometry)
    droplets: tuple = ()
    material: MaterialParams = field(default_factory=MaterialParams)
    scheme: SchemeParams = field(default_factory=SchemeParams)
    steps: int = 10
    vtk_every: int = 0  # 0 disables VTK output
    out: str = "out"
    seed: int = 0  # reserved; the physics is deterministic
    V00: float = 20.0
    init_potential: bool = False


_GEOM_KEYS = ("x_min", "x_max", "y_fluid_min", "y_fluid_max", "plate_thickness")
_MAT_KEYS = tuple(f.name for f in dataclasses.fields(MaterialParams) if f.name not in ("pinning", "theta_s"))
_SCHEME_KEYS = tuple(f.name for f in dataclasses.fields(SchemeParams))
_RUN_KEYS = ("preset", "steps", "vtk_every", "out", "seed", "V00", "desk_scale", "init_potential")

KNOWN_KEYS = frozenset(
    [f"mesh.{k}" for k in ("nx", "ny_fluid", "ny_plate")]
    + [f"geometry.{k}" for k in _GEOM_KEYS + ("electrodes", "droplets")]
    + [f"material.{k}" for k in _MAT_KEYS + ("theta_s", "theta_s_degrees", "pinning_T_p", "pinning_width")]
    + [f"scheme.{k}" for k in _SCHEME_KEYS]
    + [f"run.{k}" for k in _RUN_KEYS]
)

_INT_KEYS = {"mesh.nx", "mesh.ny_fluid", "mesh.ny_plate", "scheme.picard_max", "scheme.max_iter",
             "run.steps", "run.vtk_every", "run.seed"}
_BOOL_KEYS = {"material.K_slaved", "material.M_slaved", "scheme.flow", "run.desk_scale", "run.init_potential"}
_STR_KEYS = {"scheme.mode", "run.preset", "run.out", "geometry.electrodes", "geometry.droplets"}
_OPTIONAL = {"scheme.A_stab", "scheme.B_stab", "material.M2"}

_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$")


def _convert(key: str, raw: str, line: int):
    try:
        if key in _OPTIONAL and raw.lower() in ("auto", "none"):
            return None
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if key in _INT_KEYS:
            return int(raw)
        if key in _STR_KEYS:
            return raw.strip('"').strip("'")
        return float(raw)
    except ValueError:
        raise ConfigError(key, line, f"cannot parse value {raw!r}") from None


def parse_electrodes(text: str) -> tuple[Electrode, ...]:
    """``plate x0 x1 voltage; ...``"""
    out = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        parts = item.split()
        if len(parts) != 4:
            raise ValueError(f"electrode {item!r} needs 'plate x0 x1 voltage'")
        out.append(Electrode(parts[0], float(parts[1]), float(parts[2]), float(parts[3])))
    return tuple(out)


_SHAPES = {"circle": (Circle, 3), "ellipse": (Ellipse, 4), "halfplane": (HalfPlane, 4)}


def parse_droplets(text: str) -> tuple:
    """``[-]circle cx cy r; [-]ellipse cx cy a b; [-]halfplane px py nx ny``"""
    out = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        parts = item.split()
        name, sign = parts[0].lower(), 1
        if name.startswith("-"):
            name, sign = name[1:], -1
        if name not in _SHAPES or len(parts) - 1 != _SHAPES[name][1]:
            raise ValueError(f"droplet primitive {item!r} not understood")
        cls, _ = _SHAPES[name]
        out.append(cls(*map(float, parts[1:]), sign=sign))
    return tuple(out)


def format_electrodes(els) -> str:
    return "; ".join(f"{e.plate} {e.x0!r} {e.x1!r} {e.voltage!r}" for e in els)


def format_droplets(drops) -> str:
    items = []
    for d in drops:
        name = {Circle: "circle", Ellipse: "ellipse", HalfPlane: "halfplane"}[type(d)]
        vals = {Circle: ("cx", "cy", "r"), Ellipse: ("cx", "cy", "a", "b"),
                HalfPlane: ("px", "py", "nx", "ny")}[type(d)]
        items.append(("-" if d.sign < 0 else "") + name + " " + " ".join(repr(getattr(d, v)) for v in vals))
    return "; ".join(items)


def _guess_key(message: str, section: str, lines: dict) -> tuple[str, int | None]:
    for key, line in lines.items():
        if key.startswith(section + ".") and re.search(rf"\b{re.escape(key.split('.', 1)[1])}\b", message):
            return key, line
    return section, None


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    lines: dict = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        m = _LINE.match(body)
        if not m:
            raise ConfigError(None, no, f"expected 'key = value', got {body!r}")
        key, val = m.group(1), m.group(2)
        if key not in KNOWN_KEYS:
            raise ConfigError(key, no, "unknown key")
        if key in values:
            raise ConfigError(key, no, "duplicate key")
        values[key] = _convert(key, val, no)
        lines[key] = no
    return _build(values, lines)


def _build(values: dict, lines: dict) -> RunConfig:
    def get(key, default):
        return values.get(key, default)

    preset = get("run.preset", "move")
    if preset not in PRESET_NAMES:
        raise ConfigError("run.preset", lines.get("run.preset"), f"unknown preset {preset!r}")
    desk = get("run.desk_scale", True)
    scale = scale_defaults(preset, desk)
    V00 = get("run.V00", 20.0)
    cfg = RunConfig(preset=preset, desk_scale=desk, V00=V00)

    for k in ("nx", "ny_fluid", "ny_plate"):
        v = get(f"mesh.{k}", scale[k])
        if v < 1:
            raise ConfigError(f"mesh.{k}", lines.get(f"mesh.{k}"), "must be a positive integer")
        setattr(cfg, k, v)

    try:
        els = parse_electrodes(values["geometry.electrodes"]) if "geometry.electrodes" in values \
            else PRESETS[preset].electrodes(V00)
    except ValueError as e:
        raise ConfigError("geometry.electrodes", lines.get("geometry.electrodes"), str(e)) from None
    gkw = {k: values[f"geometry.{k}"] for k in _GEOM_KEYS if f"geometry.{k}" in values}
    try:
        cfg.geometry = ChannelGeometry(**gkw, electrodes=els)
    except ValueError as e:
        if "electrode" in str(e) and "geometry.electrodes" in lines:
            key, line = "geometry.electrodes", lines["geometry.electrodes"]
        else:
            key, line = _guess_key(str(e), "geometry", lines)
        raise ConfigError(key, line, str(e)) from None

    try:
        cfg.droplets = parse_droplets(values["geometry.droplets"]) if "geometry.droplets" in values \
            else PRESETS[preset].droplets
    except ValueError as e:
        raise ConfigError("geometry.droplets", lines.get("geometry.droplets"), str(e)) from None
    if not cfg.droplets:
        raise ConfigError("geometry.droplets", lines.get("geometry.droplets"),
                          "custom preset needs droplet primitives")

    mkw = {k: values[f"material.{k}"] for k in _MAT_KEYS if f"material.{k}" in values}
    mkw.setdefault("delta", scale["delta"])
    if "material.theta_s_degrees" in values and "material.theta_s" in values:
        raise ConfigError("material.theta_s_degrees", lines["material.theta_s_degrees"],
                          "give the angle once, in degrees or radians")
    if "material.theta_s_degrees" in values:
        mkw["theta_s"] = math.radians(values["material.theta_s_degrees"])
    elif "material.theta_s" in values:
        mkw["theta_s"] = values["material.theta_s"]
    if "material.pinning_T_p" in values or "material.pinning_width" in values:
        try:
            mkw["pinning"] = PinningParams(get("material.pinning_T_p", 1.0), get("material.pinning_width", 1.0))
        except ValueError as e:
            key = "material.pinning_T_p" if "material.pinning_T_p" in values else "material.pinning_width"
            raise ConfigError(key, lines.get(key), str(e)) from None
    try:
        cfg.material = MaterialParams(**mkw)
    except ValueError as e:
        key, line = _guess_key(str(e), "material", lines)
        raise ConfigError(key, line, str(e)) from None

    skw = {k: values[f"scheme.{k}"] for k in _SCHEME_KEYS if f"scheme.{k}" in values}
    try:
        cfg.scheme = SchemeParams(**skw)
    except ValueError as e:
        key, line = _guess_key(str(e), "scheme", lines)
        raise ConfigError(key, line, str(e)) from None
    for key in ("scheme.picard_tol", "scheme.tol_spd", "scheme.tol_nonsym", "scheme.tol_charge",
                "scheme.picard_max", "scheme.max_iter", "scheme.cfl_c1", "scheme.cfl_c2"):
        if key in values and not values[key] > 0:
            raise ConfigError(key, lines[key], "must be positive")

    cfg.steps = get("run.steps", cfg.steps)
    cfg.vtk_every = get("run.vtk_every", cfg.vtk_every)
    for key in ("run.steps", "run.vtk_every"):
        if get(key, 0) < 0:
            raise ConfigError(key, lines[key], "must be nonnegative")
    cfg.out = get("run.out", cfg.out)
    cfg.seed = get("run.seed", cfg.seed)
    cfg.init_potential = get("run.init_potential", cfg.init_potential)
    return cfg


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Every resolved setting, so that the text reproduces ``cfg`` exactly."""
    out = [f"run.preset = {cfg.preset}", f"run.desk_scale = {_fmt(cfg.desk_scale)}",
           f"run.V00 = {_fmt(float(cfg.V00))}", f"run.steps = {cfg.steps}",
           f"run.vtk_every = {cfg.vtk_every}", f"run.out = {cfg.out}", f"run.seed = {cfg.seed}",
           f"run.init_potential = {_fmt(cfg.init_potential)}",
           f"mesh.nx = {cfg.nx}", f"mesh.ny_fluid = {cfg.ny_fluid}", f"mesh.ny_plate = {cfg.ny_plate}"]
    g = cfg.geometry
    out += [f"geometry.{k} = {_fmt(float(getattr(g, k)))}" for k in _GEOM_KEYS]
    out.append(f"geometry.electrodes = {format_electrodes(g.electrodes)}")
    out.append(f"geometry.droplets = {format_droplets(cfg.droplets)}")
    m = cfg.material
    for k in _MAT_KEYS:
        v = getattr(m, k)
        out.append(f"material.{k} = {_fmt(float(v) if isinstance(v, int) and not isinstance(v, bool) else v)}")
    out.append(f"material.theta_s = {_fmt(m.theta_s)}")
    if m.pinning is not None:
        out.append(f"material.pinning_T_p = {_fmt(m.pinning.T_p)}")
        out.append(f"material.pinning_width = {_fmt(m.pinning.transition_width)}")
    for k in _SCHEME_KEYS:
        out.append(f"scheme.{k} = {_fmt(getattr(cfg.scheme, k))}")
    return "\n".join(out) + "\n"
