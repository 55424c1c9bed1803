"""Files: JSON documents, numeric CSV tables and fitted-model round trips.

Floats are written with ``repr`` (shortest string that parses back to the
same double), so every saved array reloads bit-exactly.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .interpolant import Schedule
from .numerics import mlp_from_dict, mlp_to_dict
from .trainer import EnsembleModel, EnsembleSpec, GenSdrModel

SCHEMA_VERSION = 1


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    _atomic_write(path, dumps(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns: Sequence[str], rows) -> None:
    """``rows`` is any iterable of sequences, or a 2-D array."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row] for row in reader if row]
    return header, np.asarray(data, dtype=np.float64).reshape(len(data), len(header))


# ---------------------------------------------------------------------------
# models


def _opt(a):
    return None if a is None else np.asarray(a, dtype=np.float64)


def model_to_dict(model, config: dict | None = None) -> dict:
    header = {
        "schema_version": SCHEMA_VERSION,
        "schedule": model.sched.to_dict(),
        "tau": model.tau,
        "config": config or {},
        "x_shift": model.x_shift,
        "x_scale": model.x_scale,
        "r_net": mlp_to_dict(model.r_net),
    }
    if isinstance(model, GenSdrModel):
        header.update(kind="gensdr", shapes={"d_x": model.d_x, "d": model.d, "d_y": model.d_y},
                      g_net=mlp_to_dict(model.g_net))
        return header
    spec = model.spec
    header.update(
        kind="ensemble",
        mode=model.mode,
        shapes={"d_x": model.r_net.spec.d_in, "d": model.d, "m": spec.m},
        ensemble={"references": spec.references.reshape(len(spec.references), -1),
                  "reference_shape": list(spec.references.shape[1:]),
                  "omega": spec.omega, "head_indices": spec.head_indices},
    )
    if model.mode == "exact":
        header["heads"] = [mlp_to_dict(h) for h in model.heads]
    else:
        header["trunk"] = mlp_to_dict(model.trunk)
        header["embeddings"] = model.embeddings
    return header


def model_from_dict(d: dict):
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported model schema_version {d.get('schema_version')!r}")
    sched = Schedule.from_dict(d["schedule"])
    r_net = mlp_from_dict(d["r_net"])
    shift, scale = _opt(d.get("x_shift")), _opt(d.get("x_scale"))
    if d["kind"] == "gensdr":
        return GenSdrModel(r_net, mlp_from_dict(d["g_net"]), sched, d["tau"], shift, scale)
    if d["kind"] != "ensemble":
        raise ConfigError(f"unknown model kind {d['kind']!r}")
    e = d["ensemble"]
    refs = np.asarray(e["references"], dtype=np.float64).reshape(-1, *e["reference_shape"])
    spec = EnsembleSpec(refs, e["omega"], e["head_indices"])
    model = EnsembleModel(r_net, spec, d["mode"], sched=sched, tau=d["tau"], x_shift=shift, x_scale=scale)
    if d["mode"] == "exact":
        model.heads = [mlp_from_dict(h) for h in d["heads"]]
    else:
        model.trunk = mlp_from_dict(d["trunk"])
        model.embeddings = np.asarray(d["embeddings"], dtype=np.float64)
    return model


def save_model(path, model, config: dict | None = None) -> None:
    write_json(path, model_to_dict(model, config))


def load_model(path):
    return model_from_dict(read_json(path))
