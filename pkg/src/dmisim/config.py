"""Scenario files (TOML or JSON) and their round trip through run manifests."""
from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .dmi import DmiConfig
from .dts import DtsConfig
from .engine import Scenario, WorkloadConfig
from .propagation import NetworkParams
from .workload import FeeDist

BUNDLED = ("sim1", "sim2", "sim3", "sim4", "sim5")


class ConfigError(ValueError):
    pass


# section name -> (dataclass, fields that are not plain keys)
_SECTIONS = {
    "dmi": (DmiConfig, {"network"}),
    "dts": (DtsConfig, set()),
    "network": (NetworkParams, set()),
    "workload": (WorkloadConfig, {"fees"}),
    "workload.fees": (FeeDist, set()),
}
_TYPES = {int: (int,), float: (int, float), bool: (bool,), str: (str,)}


def _field_types(cls) -> dict[str, tuple]:
    out = {}
    for f in dataclasses.fields(cls):
        t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
        base = t.split("|")[0].strip()
        out[f.name] = (_TYPES.get({"int": int, "float": float, "bool": bool, "str": str}.get(base)),
                       "None" in t)
    return out


def _check(path: str, cls, data: dict, skip: set) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a table")
    types = _field_types(cls)
    out = {}
    for key, value in data.items():
        kp = f"{path}.{key}" if path else key
        if key in skip:
            continue
        if key not in types:
            raise ConfigError(f"{kp}: unknown key")
        allowed, nullable = types[key]
        if value is None and nullable:
            out[key] = None
            continue
        if allowed is not None:
            ok = isinstance(value, allowed) and not (bool not in allowed and isinstance(value, bool))
            if not ok:
                raise ConfigError(f"{kp}: expected {allowed[-1].__name__}, got {type(value).__name__}")
        out[key] = float(value) if allowed == (int, float) else value
    return out


def _build(path: str, cls, kwargs: dict):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _resolve(p: str | None, base: Path | None) -> str | None:
    if p is None or p == "default" or base is None or Path(p).is_absolute():
        return p
    return str((base / p).resolve())


def scenario_from_dict(data: dict, base_dir: Path | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    sections = {k: v for k, v in data.items() if k in ("dmi", "dts", "network", "workload")}
    top = {k: v for k, v in data.items() if k not in sections}

    network = _build("network", NetworkParams, _check("network", NetworkParams,
                                                       sections.get("network", {}), set()))
    dmi = _build("dmi", DmiConfig, {**_check("dmi", DmiConfig, sections.get("dmi", {}), {"network"}),
                                    "network": network})
    dts = _build("dts", DtsConfig, _check("dts", DtsConfig, sections.get("dts", {}), set()))

    wl = sections.get("workload", {})
    if not isinstance(wl, dict):
        raise ConfigError("workload: expected a table")
    fee_kw = _check("workload.fees", FeeDist, wl.get("fees", {}), set())
    if "path" in fee_kw:
        fee_kw["path"] = _resolve(fee_kw["path"], base_dir)
    fees = _build("workload.fees", FeeDist, fee_kw)
    wl_kw = _check("workload", WorkloadConfig, wl, {"fees"})
    if "profile" in wl_kw:
        wl_kw["profile"] = _resolve(wl_kw["profile"], base_dir)
    workload = _build("workload", WorkloadConfig, {**wl_kw, "fees": fees})

    kw = _check("", Scenario, top, {"dmi", "dts", "network", "workload"})
    return _build("scenario", Scenario, {**kw, "dmi": dmi, "dts": dts, "network": network,
                                         "workload": workload})


def scenario_to_dict(s: Scenario) -> dict:
    d = dataclasses.asdict(s)
    d["dmi"].pop("network")
    return d


def _parse(path: Path) -> dict:
    text = path.read_text()
    try:
        if path.suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def bundled_path(name: str) -> Path:
    from importlib import resources
    return Path(str(resources.files("dmisim").joinpath(f"scenarios/{name}.toml")))


def load_config(path: str | Path) -> Scenario:
    """Load a scenario file, a bundled scenario name, or a run manifest."""
    if isinstance(path, str) and path in BUNDLED:
        path = bundled_path(path)
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such file")
    data = _parse(path)
    if isinstance(data, dict) and data.get("kind") == "dmisim-manifest":
        data = data.get("config")
    return scenario_from_dict(data, path.parent.resolve())


def with_overrides(s: Scenario, **changes: Any) -> Scenario:
    return dataclasses.replace(s, **{k: v for k, v in changes.items() if v is not None})
