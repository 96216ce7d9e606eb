"""Rectified-flow sampling: Euler integration from t=1 noise to t=0 data.

Each step subtracts the predicted velocity times the step size,
x_{t-dt} = x_t - v(c, x_t, t) dt, for both the dense stage-1 grid and the
sparse stage-2 voxel latents. Classifier-free guidance extrapolates between
conditional and unconditional velocities before stepping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolationError, NumericError, PipelineError
from ..hooks import SiteCall
from .latents import DenseLatent, SparseLatent, TimeSchedule, grid_coordinates


def euler_step(latent, velocity: np.ndarray, dt: float):
    """One explicit Euler step: features - velocity * dt, timestep - dt.

    Works on dense and sparse latents alike; sparse voxel coordinates are
    never touched.
    """
    if velocity.shape != latent.features.shape:
        raise ContractViolationError(
            f"velocity shape {velocity.shape} != latent features {latent.features.shape}"
        )
    if dt <= 0:
        raise ContractViolationError(f"dt must be positive, got {dt}")
    if latent.timestep - dt < -1e-9:
        raise ContractViolationError(
            f"step of {dt} from t={latent.timestep} would cross t=0"
        )
    if not np.isfinite(velocity).all():
        raise NumericError(f"non-finite velocity at t={latent.timestep:.6g}")
    return latent.with_features(
        latent.features - velocity * dt, latent.timestep - dt
    )


def cfg_velocity(v_cond: np.ndarray, v_uncond: np.ndarray, scale: float) -> np.ndarray:
    """Classifier-free guidance: v_uncond + scale * (v_cond - v_uncond).

    The collapse points are exact: scale 0 returns the unconditional
    velocity and scale 1 the conditional one, bit for bit.
    """
    if v_cond.shape != v_uncond.shape:
        raise ContractViolationError(
            f"CFG shapes differ: {v_cond.shape} vs {v_uncond.shape}"
        )
    if scale < 0:
        raise ContractViolationError(f"CFG scale must be >= 0, got {scale}")
    if scale == 0.0:
        return v_uncond
    if scale == 1.0:
        return v_cond
    return v_uncond + scale * (v_cond - v_uncond)


def sample_stage1(model, condition, noise: DenseLatent, schedule: TimeSchedule,
                  attn_processor, stage: str = "stage1") -> DenseLatent:
    """Integrate the dense stage from t=1 to t=0 with one branch, no CFG.

    Deterministic given (model weights, noise, condition, processor state);
    processor failures propagate with the step index attached.
    """
    if abs(noise.timestep - 1.0) > 1e-12:
        raise ContractViolationError("stage-1 sampling must start at t=1")
    positions = (grid_coordinates(noise.grid_resolution) + 0.5) / noise.grid_resolution
    latent = noise
    for i, t, dt in schedule:
        try:
            v = model.velocity(latent.features, positions, condition.tokens, t,
                               SiteCall(stage=stage, step=i, branch="content"),
                               processor=attn_processor)
        except Exception as exc:
            raise PipelineError(f"velocity model failed at {stage} step {i}") from exc
        latent = euler_step(latent, v, dt)
    return latent


def sample_stage2(model, condition, voxels: np.ndarray, noise: SparseLatent,
                  schedule: TimeSchedule, attn_processor,
                  stage: str = "stage2") -> SparseLatent:
    """Integrate the sparse stage over a fixed voxel set; rows never reorder."""
    if abs(noise.timestep - 1.0) > 1e-12:
        raise ContractViolationError("stage-2 sampling must start at t=1")
    if noise.voxel_coords.shape != voxels.shape or not (noise.voxel_coords == voxels).all():
        raise ContractViolationError(
            "noise rows must align 1:1 with the decoded voxel set"
        )
    positions = (noise.voxel_coords + 0.5) / noise.grid_resolution
    latent = noise
    for i, t, dt in schedule:
        try:
            v = model.velocity(latent.features, positions, condition.tokens, t,
                               SiteCall(stage=stage, step=i, branch="content"),
                               processor=attn_processor)
        except Exception as exc:
            raise PipelineError(f"velocity model failed at {stage} step {i}") from exc
        latent = euler_step(latent, v, dt)
    return latent


@dataclass(frozen=True)
class OccupancyReadout:
    """Fixed seeded linear readout scoring each patch's occupancy."""

    w: np.ndarray
    b: float

    @classmethod
    def seeded(cls, channels: int, seed) -> "OccupancyReadout":
        # zero bias keeps the decoded voxel count roughly balanced
        rng = np.random.default_rng(seed)
        return cls(w=rng.standard_normal(channels) / np.sqrt(channels), b=0.0)

    def scores(self, features: np.ndarray) -> np.ndarray:
        logits = features @ self.w + self.b
        return 1.0 / (1.0 + np.exp(-logits))


def decode_sparse_structure(latent: DenseLatent, threshold: float,
                            readout: OccupancyReadout) -> np.ndarray:
    """Decode the active voxel set from a fully denoised dense latent.

    Keeps patches whose sigmoid readout exceeds ``threshold``; if none pass,
    returns the single highest-scoring voxel so the set is never empty.
    Coordinates come back in raster order.
    """
    if abs(latent.timestep) > 1e-9:
        raise ContractViolationError(
            f"sparse decode requires t=0, got t={latent.timestep}"
        )
    scores = readout.scores(latent.features)
    keep = np.flatnonzero(scores > threshold)
    if keep.size == 0:
        keep = np.array([int(np.argmax(scores))])
    coords = grid_coordinates(latent.grid_resolution)
    return coords[keep]
