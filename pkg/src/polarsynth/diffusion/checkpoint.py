"""Binary checkpoint format for trained noise predictors.

Layout (all integers little-endian)::

    8 bytes   magic b"POLDIFF\\0"
    uint32    format version (1)
    uint32    length N of the descriptor
    N bytes   UTF-8 JSON descriptor: architecture, representation, schedule,
              and the ordered list of (parameter name, shape)
    uint64    number of parameter values M
    M * 8     float64 parameter values, concatenated in descriptor order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..errors import FormatError
from .data import TargetRepresentation
from .model import Architecture, ConditionalNoisePredictor, build_model
from .schedule import NoiseSchedule, make_schedule

MAGIC = b"POLDIFF\x00"
VERSION = 1


def save_checkpoint(path, model: ConditionalNoisePredictor, rep: TargetRepresentation, schedule_args: dict) -> None:
    state = model.state_dict()
    descriptor = {
        "architecture": model.arch.to_dict(),
        "representation": TargetRepresentation(rep).value,
        "schedule": schedule_args,
        "params": [[name, list(t.shape)] for name, t in state.items()],
    }
    desc = json.dumps(descriptor, sort_keys=True).encode()
    blob = np.concatenate([t.detach().cpu().double().numpy().ravel() for t in state.values()])
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(desc)))
        f.write(desc)
        f.write(struct.pack("<Q", blob.size))
        f.write(blob.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[ConditionalNoisePredictor, TargetRepresentation, NoiseSchedule, dict]:
    """Return (model, representation, schedule, descriptor)."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing checkpoint {path}")
    raw = path.read_bytes()
    if raw[:8] != MAGIC:
        raise FormatError(f"{path}: not a polarsynth checkpoint")
    try:
        version, n = struct.unpack_from("<II", raw, 8)
        if version != VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        descriptor = json.loads(raw[16 : 16 + n].decode())
        (count,) = struct.unpack_from("<Q", raw, 16 + n)
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint header ({exc})") from exc
    start = 24 + n
    if len(raw) - start != 8 * count:
        raise FormatError(f"{path}: expected {count} parameters, file size disagrees")
    blob = np.frombuffer(raw[start:], dtype="<f8")

    arch = Architecture.from_dict(descriptor["architecture"])
    model = build_model(arch)
    state = {}
    offset = 0
    for name, shape in descriptor["params"]:
        size = int(np.prod(shape)) if shape else 1
        state[name] = torch.from_numpy(blob[offset : offset + size].reshape(shape).copy()).float()
        offset += size
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise FormatError(f"{path}: parameters do not match architecture ({exc})") from exc
    model.eval()
    sched = descriptor["schedule"]
    schedule = make_schedule(sched["T"], sched["beta_start"], sched["beta_end"])
    return model, TargetRepresentation(descriptor["representation"]), schedule, descriptor
