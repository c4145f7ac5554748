"""
Experiment configuration.

Every setting has a dotted key (``train.lr``, ``model.integration.steps``,
``model.encoder_channels``). Values are resolved in this order, later
sources winning:

    dataclass defaults < config file < environment < explicit overrides

Config files are either ``key=value`` lines (``#`` starts a comment) or YAML
(``.yaml`` / ``.yml``), whose nested mappings flatten to dotted keys.
Environment variables are named ``IUKAN_<SECTION>__<FIELD>`` with ``__``
separating levels, e.g. ``IUKAN_MODEL__INTEGRATION__STEPS=8``; a ``.env``
file in the working directory is read first.
"""
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union, get_args, get_origin, get_type_hints

import yaml
from dotenv import load_dotenv

from src.net.config import ModelConfig
from src.training.trainer import TrainConfig

from .errors import ConfigError

ENV_PREFIX = "IUKAN_"
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    log_level: str = "INFO"
    json_logs: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def flat(self) -> Dict[str, Any]:
        return flatten(self.to_dict())


def flatten(tree: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def _field_type(key: str) -> Any:
    """Annotation of the field a dotted key addresses."""
    cls: Any = ExperimentConfig
    parts = key.split(".")
    for depth, part in enumerate(parts):
        hints = get_type_hints(cls) if dataclasses.is_dataclass(cls) else {}
        fields = {f.name for f in dataclasses.fields(cls)} if dataclasses.is_dataclass(cls) else set()
        if part not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        cls = hints[part]
        if dataclasses.is_dataclass(cls) and depth == len(parts) - 1:
            raise ConfigError(f"config key {key!r} names a section, not a value")
    return cls


def coerce(key: str, raw: Any, annotation: Any) -> Any:
    origin = get_origin(annotation)
    if origin is Union:
        if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none", "null")):
            return None
        inner = [a for a in get_args(annotation) if a is not type(None)]
        return coerce(key, raw, inner[0])
    if origin in (list, List):
        (item,) = get_args(annotation) or (str,)
        if isinstance(raw, str):
            parts: List[Any] = [p.strip() for p in raw.split(",") if p.strip()]
        elif isinstance(raw, (list, tuple)):
            parts = list(raw)
        else:
            parts = [raw]
        return [coerce(key, p, item) for p in parts]
    if annotation is bool:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        raise ConfigError(f"config key {key!r} expects a boolean, got {raw!r}")
    if annotation is int:
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} expects an integer, got {raw!r}") from None
        if value != int(value):
            raise ConfigError(f"config key {key!r} expects an integer, got {raw!r}")
        return int(value)
    if annotation is float:
        try:
            return float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} expects a number, got {raw!r}") from None
    return str(raw)


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Flat dotted-key mapping from a key=value or YAML file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            tree = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(tree, Mapping):
            raise ConfigError(f"{path} must hold a mapping at the top level")
        return flatten(tree)

    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    environ = os.environ if environ is None else environ
    return {
        key[len(ENV_PREFIX):].lower().replace("__", "."): value
        for key, value in environ.items()
        if key.startswith(ENV_PREFIX) and "__" in key[len(ENV_PREFIX):]
    }


def parse_assignments(items: Optional[List[str]]) -> Dict[str, str]:
    """``["train.lr=0.01", ...]`` from repeated --set flags."""
    values: Dict[str, str] = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _unflatten(flat: Mapping[str, Any]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for key, value in flat.items():
        node = tree
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return tree


def build_config(values: Mapping[str, Any]) -> ExperimentConfig:
    """ExperimentConfig from defaults updated by a flat dotted-key mapping."""
    flat = ExperimentConfig().flat()
    for key, raw in values.items():
        flat[key] = coerce(key, raw, _field_type(key))
    tree = _unflatten(flat)
    try:
        return ExperimentConfig(
            model=ModelConfig.from_dict(tree["model"]),
            train=TrainConfig(**tree["train"]),
            log_level=str(tree["log_level"]).upper(),
            json_logs=bool(tree["json_logs"]),
        )
    except TypeError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    use_env: bool = True,
    dotenv_path: Optional[Union[str, Path]] = None,
) -> ExperimentConfig:
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
    if use_env:
        load_dotenv(dotenv_path=dotenv_path or Path.cwd() / ".env", override=False)
        values.update(env_overrides())
    values.update(overrides or {})
    return build_config(values)
