"""Flat named-tensor weight archive with a JSON manifest.

Weights go into one ``weights.npz`` keyed by parameter name; the manifest
records the seed, hyperparameters, and every name/shape so a load can verify
the archive before touching the model.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .model import VelocityModel

MANIFEST_NAME = "manifest.json"
ARCHIVE_NAME = "weights.npz"


def save_weights(model: VelocityModel, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    params = model.param_dict()
    np.savez(directory / ARCHIVE_NAME, **params)
    manifest = {
        "seed": model.seed if isinstance(model.seed, int) else list(model.seed),
        "hyper": {
            "depth": model.depth,
            "channels": model.channels,
            "heads": model.heads,
            "condition_dim": model.condition_dim,
            "init_scale": model.init_scale,
            "site_prefix": model.site_prefix,
            "site_names": model.site_names,
        },
        "tensors": {name: list(p.shape) for name, p in params.items()},
    }
    with open(directory / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return directory


def load_weights(directory) -> VelocityModel:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    archive_path = directory / ARCHIVE_NAME
    if not manifest_path.exists() or not archive_path.exists():
        raise ConfigError(f"weight archive incomplete under {directory}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    seed = manifest["seed"]
    model = VelocityModel(seed=seed, **manifest["hyper"])
    with np.load(archive_path) as archive:
        names = set(archive.files)
        declared = set(manifest["tensors"])
        if names != declared:
            raise ConfigError(
                f"archive tensors {sorted(names)} do not match manifest {sorted(declared)}"
            )
        params = {}
        for name in archive.files:
            arr = archive[name]
            if list(arr.shape) != manifest["tensors"][name]:
                raise ConfigError(
                    f"tensor {name} shape {arr.shape} != manifest "
                    f"{manifest['tensors'][name]}"
                )
            params[name] = arr
    model.load_params(params)
    return model
