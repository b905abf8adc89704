"""
Binary checkpoint format for trained PFGC models.

Layout: magic PFGCCKPT, little-endian u32 version, u64 header length, UTF-8
JSON header, then every tensor as little-endian f64 in header order.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
import structlog

from models.base_models import ModelConfig, ModelState
from models.errors import DataError

logger = structlog.get_logger(__name__)

MAGIC = b"PFGCCKPT"
VERSION = 1
_PREAMBLE = struct.Struct("<8sIQ")
_F64 = np.dtype("<f8")


def _named_tensors(state: ModelState) -> List[Tuple[str, np.ndarray]]:
    tensors = list(state.parameters().items())
    for name, (exp_avg, exp_avg_sq) in state.optimizer_moments.items():
        tensors.append((f"adam.{name}.exp_avg", exp_avg))
        tensors.append((f"adam.{name}.exp_avg_sq", exp_avg_sq))
    return tensors


def save_checkpoint(path: Path, state: ModelState, config: ModelConfig, seed: int) -> None:
    """
    Write a checkpoint.

    Args:
        path: Output file
        state: Trained weights and optimizer moments
        config: Echoed into the header so the checkpoint is self-describing
        seed: Seed of the run that produced the state
    """
    tensors = _named_tensors(state)
    header: Dict[str, Any] = {
        "tensors": [{"name": name, "shape": list(array.shape)} for name, array in tensors],
        "config": config.to_dict(),
        "seed": seed,
        "n_clusters": state.n_clusters,
        "optimizer_step": state.optimizer_step,
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(_PREAMBLE.pack(MAGIC, VERSION, len(encoded)))
        handle.write(encoded)
        for _, array in tensors:
            handle.write(np.ascontiguousarray(array, dtype=_F64).tobytes())
    logger.debug("checkpoint written", path=str(path), tensors=len(tensors))


def load_checkpoint(path: Path) -> Tuple[ModelState, ModelConfig, int]:
    """
    Read a checkpoint written by save_checkpoint.

    Returns:
        Tuple[ModelState, ModelConfig, int]: State, echoed config and seed

    Raises:
        DataError: On a missing file, wrong magic, unsupported version or truncated payload
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e
    if len(raw) < _PREAMBLE.size:
        raise DataError(f"truncated checkpoint: {path}")
    magic, version, header_len = _PREAMBLE.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"not a PFGC checkpoint: {path}")
    if version != VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    offset = _PREAMBLE.size + header_len
    header = json.loads(raw[_PREAMBLE.size:offset].decode("utf-8"))

    tensors: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        if offset + 8 * count > len(raw):
            raise DataError(f"checkpoint {path} ends inside tensor '{entry['name']}'")
        tensors[entry["name"]] = np.frombuffer(raw, dtype=_F64, count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count

    n_layers = sum(1 for name in tensors if name.startswith("layer_weights."))
    moments = {
        name[len("adam."):-len(".exp_avg")]: (value, tensors[name + "_sq"])
        for name, value in tensors.items()
        if name.startswith("adam.") and name.endswith(".exp_avg")
    }
    state = ModelState(
        layer_weights=[tensors[f"layer_weights.{i}"] for i in range(n_layers)],
        se_down=tensors["se_down"],
        se_up=tensors["se_up"],
        decoder_weights=tensors["decoder"],
        n_clusters=int(header["n_clusters"]),
        centers=tensors.get("centers"),
        optimizer_moments=moments,
        optimizer_step=int(header["optimizer_step"]),
    )
    return state, ModelConfig.from_dict(header["config"]), int(header["seed"])
