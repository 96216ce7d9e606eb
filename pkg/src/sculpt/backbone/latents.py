"""Latent containers for the two-stage flow backbone.

Stage 1 denoises a dense grid of patch features; stage 2 denoises per-voxel
feature rows over the sparse structure decoded from stage 1. Both carry the
flow time ``t`` in [0, 1], t=1 being pure noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ContractViolationError


@dataclass(frozen=True)
class DenseLatent:
    """Regular grid latent: [R^3, C] feature rows in raster order."""

    grid_resolution: int
    features: np.ndarray
    timestep: float

    def __post_init__(self):
        r = self.grid_resolution
        if self.features.ndim != 2 or self.features.shape[0] != r**3:
            raise ContractViolationError(
                f"dense latent needs [R^3={r**3}, C] features, got {self.features.shape}"
            )
        if not np.isfinite(self.features).all():
            raise ContractViolationError("non-finite dense latent features")
        if not -1e-9 <= self.timestep <= 1 + 1e-9:
            raise ContractViolationError(f"timestep {self.timestep} outside [0, 1]")

    @property
    def channels(self) -> int:
        return self.features.shape[1]

    def with_features(self, features: np.ndarray, timestep: float) -> "DenseLatent":
        return replace(self, features=features, timestep=timestep)


@dataclass(frozen=True)
class SparseLatent:
    """Sparse voxel latent: unique integer coords [L, 3] plus [L, C] features."""

    voxel_coords: np.ndarray
    features: np.ndarray
    timestep: float
    grid_resolution: int

    def __post_init__(self):
        coords = self.voxel_coords
        if coords.ndim != 2 or coords.shape[1] != 3 or coords.shape[0] < 1:
            raise ContractViolationError(
                f"voxel coords must be [L>=1, 3], got {coords.shape}"
            )
        if not np.issubdtype(coords.dtype, np.integer):
            raise ContractViolationError("voxel coords must be integers")
        if coords.min() < 0 or coords.max() >= self.grid_resolution:
            raise ContractViolationError(
                f"voxel coords outside [0, {self.grid_resolution})"
            )
        if np.unique(coords, axis=0).shape[0] != coords.shape[0]:
            raise ContractViolationError("duplicate voxel coordinates")
        if self.features.ndim != 2 or self.features.shape[0] != coords.shape[0]:
            raise ContractViolationError(
                f"features must align 1:1 with voxels, got {self.features.shape} "
                f"for {coords.shape[0]} voxels"
            )
        if not np.isfinite(self.features).all():
            raise ContractViolationError("non-finite sparse latent features")

    @property
    def channels(self) -> int:
        return self.features.shape[1]

    @property
    def num_voxels(self) -> int:
        return self.voxel_coords.shape[0]

    def with_features(self, features: np.ndarray, timestep: float) -> "SparseLatent":
        return replace(self, features=features, timestep=timestep)


@dataclass(frozen=True)
class TimeSchedule:
    """Descending timesteps from 1 to 0 with per-step sizes that telescope.

    ``timesteps`` has num_steps + 1 entries; step i integrates from
    timesteps[i] to timesteps[i+1] with dt = dts[i].
    """

    num_steps: int
    timesteps: np.ndarray = field(repr=False)
    dts: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.num_steps < 1:
            raise ContractViolationError("schedule needs at least one step")
        t = self.timesteps
        if t.shape != (self.num_steps + 1,):
            raise ContractViolationError("timesteps length must be num_steps + 1")
        if t[0] != 1.0 or t[-1] != 0.0:
            raise ContractViolationError("schedule must run from t=1 to t=0")
        if not (np.diff(t) < 0).all():
            raise ContractViolationError("timesteps must be strictly decreasing")
        if abs(float(self.dts.sum()) - 1.0) > 1e-12:
            raise ContractViolationError("step sizes must telescope to 1")

    @property
    def step_size(self) -> float:
        return 1.0 / self.num_steps

    @classmethod
    def uniform(cls, num_steps: int) -> "TimeSchedule":
        timesteps = np.linspace(1.0, 0.0, num_steps + 1)
        return cls(num_steps=num_steps, timesteps=timesteps, dts=-np.diff(timesteps))

    def __iter__(self):
        for i in range(self.num_steps):
            yield i, float(self.timesteps[i]), float(self.dts[i])


def grid_coordinates(resolution: int) -> np.ndarray:
    """All [R^3, 3] integer grid coordinates in raster (row-major) order."""
    idx = np.arange(resolution**3)
    return np.stack(np.unravel_index(idx, (resolution,) * 3), axis=1).astype(np.int64)


def flatten_coords(coords: np.ndarray, resolution: int) -> np.ndarray:
    """Raster-order flat index of each coordinate triple."""
    return np.ravel_multi_index(
        (coords[:, 0], coords[:, 1], coords[:, 2]), (resolution,) * 3
    )
