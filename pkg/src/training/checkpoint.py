"""
Binary checkpoint format.

    b"IUK2" | u16 version | u32 metadata length | metadata JSON | payload

All integers are little-endian. The payload holds every parameter as
little-endian float32 in manifest order; manifest offsets are byte offsets
into the payload. Metadata JSON is written with sorted keys so identical
models produce identical files.
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.net import ImplicitUKan, ModelConfig, build_model
from src.utils.errors import CheckpointError, ConfigError
from src.utils.monitoring import get_logger

MAGIC = b"IUK2"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")

logger = get_logger("checkpoint")


class ManifestEntry(BaseModel):
    name: str
    shape: List[int]
    offset: int


class CheckpointMeta(BaseModel):
    format_version: int = FORMAT_VERSION
    architecture: Dict[str, Any]
    epoch: int = 0
    best_metric: Optional[float] = None
    best_epoch: Optional[int] = None
    seed: int = 0
    image_size: List[int] = Field(default_factory=lambda: [64, 64])
    splits: Dict[str, List[str]] = Field(default_factory=dict)
    manifest: List[ManifestEntry] = Field(default_factory=list)

    @property
    def model_cfg(self) -> ModelConfig:
        return ModelConfig.from_dict(self.architecture)


def _encode(meta: CheckpointMeta, payload: bytes) -> bytes:
    body = json.dumps(meta.model_dump(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(body)) + body + payload


def save_checkpoint(path: Union[str, Path], model: ImplicitUKan, **meta: Any) -> Path:
    path = Path(path)
    manifest, chunks, offset = [], [], 0
    for name, p in model.named_parameters():
        raw = np.ascontiguousarray(p.data, dtype="<f4").tobytes()
        manifest.append(ManifestEntry(name=name, shape=list(p.shape), offset=offset))
        chunks.append(raw)
        offset += len(raw)
    record = CheckpointMeta(architecture=model.cfg.to_dict(), manifest=manifest, **meta)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(_encode(record, b"".join(chunks)))
    logger.info("checkpoint_saved", path=str(path), n_params=len(manifest), bytes=offset)
    return path


def read_checkpoint(path: Union[str, Path]) -> Tuple[CheckpointMeta, bytes]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise CheckpointError(f"checkpoint is truncated (header): {path}")
    magic, version, meta_len = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r} in {path}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    start = _HEADER.size
    if len(blob) < start + meta_len:
        raise CheckpointError(f"checkpoint is truncated (metadata): {path}")
    try:
        meta = CheckpointMeta.model_validate(json.loads(blob[start:start + meta_len].decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, ValidationError) as exc:
        raise CheckpointError(f"corrupt checkpoint metadata in {path}: {exc}") from exc
    payload = blob[start + meta_len:]
    expected = sum(int(np.prod(e.shape)) * 4 for e in meta.manifest)
    if len(payload) != expected:
        raise CheckpointError(
            f"checkpoint payload is {len(payload)} bytes, manifest needs {expected} (truncated or corrupt): {path}"
        )
    return meta, payload


def load_checkpoint(path: Union[str, Path]) -> Tuple[ImplicitUKan, CheckpointMeta]:
    meta, payload = read_checkpoint(path)
    try:
        model = build_model(meta.model_cfg)
    except (ConfigError, TypeError) as exc:
        raise CheckpointError(f"checkpoint model config is invalid: {exc}") from exc
    params = dict(model.named_parameters())
    if sorted(e.name for e in meta.manifest) != sorted(params):
        raise CheckpointError("checkpoint manifest does not name exactly the model's parameters")

    offset = 0
    for entry in meta.manifest:
        param = params.get(entry.name)
        if param is None:
            raise CheckpointError(f"unknown parameter {entry.name!r} in manifest")
        if tuple(entry.shape) != param.shape:
            raise CheckpointError(
                f"shape mismatch for {entry.name!r}: manifest {tuple(entry.shape)}, model {param.shape}"
            )
        if entry.offset != offset:
            raise CheckpointError(f"manifest offset for {entry.name!r} is {entry.offset}, expected {offset}")
        count = int(np.prod(entry.shape))
        values = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(entry.shape)
        param.assign(values.astype(param.dtype))
        offset += count * 4
    return model, meta


def run_metadata(meta: CheckpointMeta) -> Dict[str, Any]:
    """Fields of ``meta`` that save_checkpoint accepts, for re-saving a loaded model."""
    return meta.model_dump(include={"epoch", "best_metric", "best_epoch", "seed", "image_size", "splits"})
