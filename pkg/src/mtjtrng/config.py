"""Experiment configuration: dataclasses plus TOML device profiles and configs.

A config file names a device profile (``device_profile = "device_c.toml"``)
or lists devices explicitly under ``[[devices]]``. Profile lookup order:
the config file's directory, ``$MTJTRNG_PROFILE_DIR``, the packaged
``profiles/`` directory.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import tomli
import tomli_w

from .magnetics import (
    DeviceInstance,
    Environment,
    FieldSpec,
    MtjElectrical,
    MtjGeometry,
    MtjMaterial,
)

PROFILE_DIR_ENV = "MTJTRNG_PROFILE_DIR"

# Table I series resistances per topology
TABLE_I_R_SERIES = {2: 4450.0, 4: 3440.0, 6: 2640.0, 8: 1960.0}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CircuitParams:
    capacitance: float = 10e-12
    v_init: float = 0.8
    r_series: float = 1960.0
    passgate_resistance: float = 1500.0
    topology: str = "per_module"  # or "shared"

    def __post_init__(self):
        for name in ("capacitance", "v_init", "r_series", "passgate_resistance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"circuit parameter {name} must be positive")
        if self.topology not in ("per_module", "shared"):
            raise ValueError(f"unknown topology {self.topology!r}")


@dataclass(frozen=True)
class CostModel:
    """Read latency and per-device write/read energies charged to each word."""

    t_read: float = 2.8e-9
    e_write_per_device: float = 4.5e-12
    e_read_per_device: float = 0.7e-12


@dataclass(frozen=True)
class TrngConfig:
    devices: tuple[DeviceInstance, ...]
    circuit: CircuitParams = field(default_factory=CircuitParams)
    environment: Environment = field(default_factory=Environment)
    t_enable: float = 10e-9
    dt: float = 1e-12
    reset_burn_in: float = 1e-9
    read_threshold: float = 0.0
    stt_scale: float = 1.0
    costs: CostModel = field(default_factory=CostModel)

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        if not self.devices:
            raise ValueError("need at least one device")
        if self.t_enable <= 0 or self.dt <= 0 or self.reset_burn_in < 0:
            raise ValueError("t_enable and dt must be positive, reset_burn_in >= 0")
        if not -1 < self.read_threshold < 1:
            raise ValueError("read_threshold must lie in (-1, 1)")

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_enable / self.dt))

    @property
    def n_burn(self) -> int:
        return int(round(self.reset_burn_in / self.dt))

    @property
    def identical_devices(self) -> bool:
        return all(d == self.devices[0] for d in self.devices)

    def replace(self, **changes) -> "TrngConfig":
        return replace(self, **changes)

    def with_circuit(self, **changes) -> "TrngConfig":
        return replace(self, circuit=replace(self.circuit, **changes))

    def with_environment(self, **changes) -> "TrngConfig":
        return replace(self, environment=replace(self.environment, **changes))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["devices"] = [device_to_dict(dev) for dev in self.devices]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- (de)serialization

def device_to_dict(dev: DeviceInstance) -> dict:
    mat = {"ms": dev.material.ms, "alpha": dev.material.alpha,
           "polarization": dev.material.polarization}
    if dev.material.demag is not None:
        mat["demag"] = list(dev.material.demag)
    return {
        "provenance": dev.provenance,
        "geometry": dataclasses.asdict(dev.geometry),
        "material": mat,
        "electrical": {"r_on": dev.electrical.r_on, "r_off": dev.electrical.r_off},
    }


def _section(d: dict, key: str, where: str) -> dict:
    try:
        sub = d[key]
    except KeyError:
        raise ConfigError(f"{where}: missing table [{key}]") from None
    if not isinstance(sub, dict):
        raise ConfigError(f"{where}: [{key}] must be a table")
    return sub


def _build(cls, d: dict, where: str):
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def device_from_dict(d: dict, where: str = "device") -> DeviceInstance:
    geo = _build(MtjGeometry, _section(d, "geometry", where), f"{where}.geometry")
    mat = dict(_section(d, "material", where))
    if "demag" in mat:
        mat["demag"] = tuple(float(x) for x in mat["demag"])
    material = _build(MtjMaterial, mat, f"{where}.material")
    elec = _build(MtjElectrical, _section(d, "electrical", where), f"{where}.electrical")
    return DeviceInstance(geo, material, elec, d.get("provenance", "nominal"))


def _read_toml(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def find_profile(name: str | os.PathLike, base: Path | None = None) -> Path:
    p = Path(name)
    candidates = [p] if p.is_absolute() else []
    if not p.is_absolute():
        if base is not None:
            candidates.append(base / p)
        env = os.environ.get(PROFILE_DIR_ENV)
        if env:
            candidates.append(Path(env) / p)
        candidates.append(Path(str(resources.files("mtjtrng") / "profiles")) / p)
        candidates.append(p)
    for c in candidates:
        if c.is_file():
            return c
    raise FileNotFoundError(f"device profile {str(name)!r} not found (searched {[str(c) for c in candidates]})")


def load_device_profile(name: str | os.PathLike, base: Path | None = None) -> DeviceInstance:
    path = find_profile(name, base)
    return device_from_dict(_read_toml(path), where=str(path))


def config_from_dict(d: dict, base: Path | None = None, where: str = "config") -> TrngConfig:
    d = dict(d)
    if "devices" in d:
        devices = [device_from_dict(x, f"{where}.devices[{i}]") for i, x in enumerate(d.pop("devices"))]
        n = d.pop("n_devices", len(devices))
        if n != len(devices):
            raise ConfigError(f"{where}: n_devices={n} but {len(devices)} devices listed")
    else:
        try:
            profile = d.pop("device_profile")
            n = d.pop("n_devices")
        except KeyError as exc:
            raise ConfigError(f"{where}: missing key {exc.args[0]!r}") from None
        devices = [load_device_profile(profile, base)] * int(n)
    circuit = _build(CircuitParams, d.pop("circuit", {}), f"{where}.circuit")
    env = dict(d.pop("environment", {}))
    env["field"] = _build(FieldSpec, env.get("field", {}), f"{where}.environment.field")
    environment = _build(Environment, env, f"{where}.environment")
    costs = _build(CostModel, d.pop("costs", {}), f"{where}.costs")
    return _build(TrngConfig, dict(devices=devices, circuit=circuit, environment=environment,
                                   costs=costs, **d), where)


def load_config(path: str | os.PathLike) -> TrngConfig:
    path = Path(path)
    return config_from_dict(_read_toml(path), base=path.parent, where=str(path))


def save_config(config: TrngConfig, path: str | os.PathLike) -> None:
    """Write a self-contained config (devices listed explicitly)."""
    d = config.to_dict()
    d["n_devices"] = config.n_devices
    with open(path, "wb") as fh:
        tomli_w.dump(d, fh)


def nominal_config(n_devices: int = 8, profile: str = "device_c.toml", **overrides) -> TrngConfig:
    """Nominal topology with the shipped device profile and per-topology series resistance."""
    path = find_profile(f"trng{n_devices}.toml") if n_devices in TABLE_I_R_SERIES else None
    if path is not None and profile == "device_c.toml":
        cfg = load_config(path)
    else:
        dev = load_device_profile(profile)
        r_series = TABLE_I_R_SERIES.get(n_devices, 1960.0)
        cfg = TrngConfig(devices=(dev,) * n_devices, circuit=CircuitParams(r_series=r_series))
    return replace(cfg, **overrides) if overrides else cfg
