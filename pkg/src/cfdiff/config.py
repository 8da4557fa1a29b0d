"""Simulation configuration: defaults, validation and text/JSON I/O.

The text format is INI-like: ``[section]`` headers followed by
``key = value`` lines; ``#`` and ``;`` start comments. Every key belongs to
exactly one section, listed in :data:`SECTIONS`. A JSON object with
either the same nesting or flat keys is accepted as well, and so is a run
manifest written by the CLI (its ``config`` snapshot is used).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass, fields
from pathlib import Path

__all__ = [
    "ConfigError",
    "ParseError",
    "SECTIONS",
    "SimConfig",
    "ValidationError",
    "config_from_dict",
    "emit_config",
    "parse_config",
    "parse_config_text",
]

SCHEMES = ("coherent-sync", "coherent-async", "dstbc", "dpsk")
PROCESSING = ("centralized", "distributed")
DESIGN_ROWS = {"alamouti": 2, "rate34": 4}


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(ConfigError):
    pass


@dataclass(frozen=True)
class SimConfig:
    # network
    L: int = 40
    K: int = 20
    N: int = 4
    L_k: int = 4
    side_m: float = 500.0
    h_ap_m: float = 11.65
    h_ue_m: float = 1.65
    # frame
    tau_c: int = 200
    tau_p: int = 10
    tau_d: int = 190
    # scheme
    scheme: str = "dstbc"
    processing: str = "distributed"
    design: str = "auto"
    M_o: int = 8
    phase_mode: str = "static"
    increment_std: float = 0.0
    force_sync: bool = False
    # propagation
    fc_ghz: float = 3.5
    bandwidth_mhz: float = 20.0
    noise_figure_db: float = 8.0
    sigma_sf_db: float = 4.0
    shadow_decorr_m: float = 9.0
    asd_deg: float = 15.0
    antenna_spacing: float = 0.5
    # power
    p_ul_mw: float = 100.0
    rho_d_mw: float = 200.0
    upsilon: float = -0.5
    norm_batch: int = 100
    # run
    setups: int = 20
    blocks: int = 100
    seed: int = 1
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("L", "K", "N", "L_k", "tau_c", "tau_p", "tau_d", "M_o",
                     "norm_batch", "setups", "blocks", "workers"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        if self.tau_p + self.tau_d > self.tau_c:
            raise ValidationError(
                f"tau_p + tau_d = {self.tau_p + self.tau_d} exceeds tau_c = {self.tau_c}")
        if self.L_k > self.L:
            raise ValidationError(f"L_k = {self.L_k} exceeds L = {self.L}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.processing not in PROCESSING:
            raise ValidationError(f"processing must be one of {PROCESSING}")
        if self.phase_mode not in ("static", "wiener"):
            raise ValidationError("phase_mode must be 'static' or 'wiener'")
        if self.increment_std < 0:
            raise ValidationError("increment_std must be non-negative")
        if self.M_o < 2 or self.M_o & (self.M_o - 1):
            raise ValidationError("M_o must be a power of two >= 2")
        if self.design not in ("auto",) + tuple(DESIGN_ROWS):
            raise ValidationError(f"design must be auto, alamouti or rate34, got {self.design!r}")
        for name in ("side_m", "fc_ghz", "bandwidth_mhz", "asd_deg", "antenna_spacing",
                     "p_ul_mw", "rho_d_mw", "shadow_decorr_m"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.sigma_sf_db < 0:
            raise ValidationError("sigma_sf_db must be non-negative")
        if self.scheme == "dstbc":
            rows = self.stbc_rows()
            if rows != self.L_k:
                raise ValidationError(
                    f"dstbc needs L_k equal to the design rows; L_k = {self.L_k}, "
                    f"design rows = {rows}")
            if self.tau_d // rows < 2:
                raise ValidationError("tau_d must hold at least two DSTBC codewords")
        if self.scheme == "dpsk" and self.tau_d < 2:
            raise ValidationError("dpsk needs tau_d >= 2")

    def stbc_rows(self) -> int | None:
        if self.design != "auto":
            return DESIGN_ROWS[self.design]
        if self.L_k in DESIGN_ROWS.values():
            return self.L_k
        raise ValidationError(f"no orthogonal design shipped for L_k = {self.L_k}")

    @property
    def design_name(self) -> str:
        if self.design != "auto":
            return self.design
        return {v: k for k, v in DESIGN_ROWS.items()}[self.stbc_rows()]

    @property
    def precoder(self) -> str:
        return "pmmse" if self.processing == "centralized" else "lpmmse"

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


SECTIONS = {
    "network": ("L", "K", "N", "L_k", "side_m", "h_ap_m", "h_ue_m"),
    "frame": ("tau_c", "tau_p", "tau_d"),
    "scheme": ("scheme", "processing", "design", "M_o", "phase_mode", "increment_std",
               "force_sync"),
    "propagation": ("fc_ghz", "bandwidth_mhz", "noise_figure_db", "sigma_sf_db",
                    "shadow_decorr_m", "asd_deg", "antenna_spacing"),
    "power": ("p_ul_mw", "rho_d_mw", "upsilon", "norm_batch"),
    "run": ("setups", "blocks", "seed", "workers"),
}
_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}
_SECTION_OF = {key: sec for sec, keys in SECTIONS.items() for key in keys}
assert set(_SECTION_OF) == set(_FIELD_TYPES)


def _coerce(key, raw, line=None):
    typ = _FIELD_TYPES[key]
    try:
        if typ == "bool":
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "int":
            if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                raise ValueError(raw)
            return int(raw)
        if typ == "float":
            if isinstance(raw, bool):
                raise ValueError(raw)
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ParseError(f"cannot read {raw!r} as {typ}", line=line, key=key) from None


def config_from_dict(values: dict, base: SimConfig | None = None) -> SimConfig:
    """Build a config from flat or sectioned mappings; unknown keys fail."""
    flat = {}
    for key, value in values.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                raise ParseError("unknown section", key=key)
            for sub, v in value.items():
                if sub not in SECTIONS[key]:
                    raise ParseError(f"unknown key in section [{key}]", key=sub)
                flat[sub] = _coerce(sub, v)
        elif key in _FIELD_TYPES:
            flat[key] = _coerce(key, value)
        else:
            raise ParseError("unknown key", key=key)
    base = base or SimConfig()
    try:
        return base.replace(**flat)
    except ValidationError:
        raise


_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")


def parse_config_text(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse the sectioned key-value format (or JSON if it looks like JSON)."""
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError(f"invalid JSON: {err.msg}", line=err.lineno) from None
        if not isinstance(data, dict):
            raise ParseError("JSON config must be an object")
        if "tool" in data and isinstance(data.get("config"), dict):
            data = data["config"]   # a run manifest: rerun its snapshot
        return config_from_dict(data, base)
    section = None
    flat = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = re.split(r"\s[#;]|^[#;]", raw, maxsplit=1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1)
            if section not in SECTIONS:
                raise ParseError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ParseError("unknown key", line=lineno, key=key)
        if section is not None and _SECTION_OF[key] != section:
            raise ParseError(f"key belongs to section [{_SECTION_OF[key]}], not [{section}]",
                             line=lineno, key=key)
        if key in flat:
            raise ParseError("duplicate key", line=lineno, key=key)
        flat[key] = _coerce(key, value, line=lineno)
    return (base or SimConfig()).replace(**flat)


def parse_config(path=None, overrides: dict | None = None) -> SimConfig:
    """Read a config file (``None`` means all defaults), then apply overrides."""
    cfg = SimConfig()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ParseError(f"config file not found: {p}")
        cfg = parse_config_text(p.read_text(encoding="utf-8"))
    if overrides:
        cfg = config_from_dict({k: v for k, v in overrides.items() if v is not None}, cfg)
    return cfg


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: SimConfig) -> str:
    """Render ``cfg`` in the sectioned text format; round-trips exactly."""
    out = []
    for section, keys in SECTIONS.items():
        out.append(f"[{section}]")
        out.extend(f"{key} = {_format(getattr(cfg, key))}" for key in keys)
        out.append("")
    return "\n".join(out)
