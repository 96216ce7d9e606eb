"""The two-stage toy reference backbone.

Desk-scale stand-in for a production image-to-3D flow model: a dense-grid
flow transformer for stage 1, a sparse flow transformer for stage 2, a fixed
seeded occupancy readout decoding the stage-1 output into active voxels, and
a color readout for export. Defaults are R=8 (512 patches), C=32, 4 heads,
depth 4 per stage -- small enough for brute-force oracles, large enough that
channel-count sweeps are meaningful. Production backbones run at C=1024;
that scale is honored in config validation, never instantiated here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ContractViolationError
from ..hooks import AttentionSite, SiteCall
from .latents import DenseLatent, SparseLatent, grid_coordinates
from .model import VelocityModel
from .sampler import OccupancyReadout, decode_sparse_structure

# sub-seed tags for the independent parameter streams
_STAGE1_TAG, _STAGE2_TAG, _OCC_TAG, _COLOR_TAG = 1, 2, 3, 4


@dataclass(frozen=True)
class ToyBackboneConfig:
    grid_resolution: int = 8
    channels: int = 32
    heads: int = 4
    depth: int = 4
    condition_dim: int = 48
    image_resolution: int = 64
    patch_size: int = 16
    weights_seed: int = 7
    embed_seed: int = 101
    occupancy_threshold: float = 0.5
    init_scale: float = 1.0

    def __post_init__(self):
        if self.channels % self.heads != 0:
            raise ConfigError("channels must be divisible by heads")
        if self.image_resolution % self.patch_size != 0:
            raise ConfigError("image resolution must be divisible by patch size")
        if self.image_resolution % self.grid_resolution != 0:
            raise ConfigError(
                "image resolution must be divisible by the grid resolution "
                "(projection renders one cell per voxel column)"
            )


@dataclass(frozen=True)
class ColorReadout:
    """Fixed linear readout mapping voxel features to RGB in [0, 1]."""

    w: np.ndarray
    b: np.ndarray

    @classmethod
    def seeded(cls, channels: int, seed) -> "ColorReadout":
        rng = np.random.default_rng(seed)
        return cls(w=rng.standard_normal((channels, 3)) / np.sqrt(channels),
                   b=rng.standard_normal(3))

    def colors(self, features: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-(features @ self.w + self.b)))


class ToyBackbone:
    """Reference host: implements the attention-site surface and both stages."""

    def __init__(self, config: ToyBackboneConfig | None = None):
        self.config = config or ToyBackboneConfig()
        c = self.config
        self.stage1_model = VelocityModel(
            depth=c.depth, channels=c.channels, heads=c.heads,
            condition_dim=c.condition_dim, seed=[c.weights_seed, _STAGE1_TAG],
            init_scale=c.init_scale, site_prefix="stage1.block",
        )
        self.stage2_model = VelocityModel(
            depth=c.depth, channels=c.channels, heads=c.heads,
            condition_dim=c.condition_dim, seed=[c.weights_seed, _STAGE2_TAG],
            init_scale=c.init_scale, site_prefix="stage2.block",
        )
        self.occupancy = OccupancyReadout.seeded(c.channels, [c.weights_seed, _OCC_TAG])
        self.color = ColorReadout.seeded(c.channels, [c.weights_seed, _COLOR_TAG])

    # -- basic properties ---------------------------------------------------

    @property
    def grid_resolution(self) -> int:
        return self.config.grid_resolution

    @property
    def channels(self) -> int:
        return self.config.channels

    @property
    def condition_dim(self) -> int:
        return self.config.condition_dim

    @property
    def image_resolution(self) -> int:
        return self.config.image_resolution

    @property
    def patch_size(self) -> int:
        return self.config.patch_size

    @property
    def embed_seed(self) -> int:
        return self.config.embed_seed

    def declared_site_count(self) -> int:
        return 2 * self.config.depth

    # -- host surface ---------------------------------------------------------

    def _model_for(self, site_id: str) -> VelocityModel:
        if site_id.startswith("stage1."):
            return self.stage1_model
        if site_id.startswith("stage2."):
            return self.stage2_model
        raise ConfigError(f"unknown attention site {site_id!r}")

    def attention_sites(self) -> list[AttentionSite]:
        return self.stage1_model.attention_sites() + self.stage2_model.attention_sites()

    def stage_site_ids(self, stage: str) -> list[str]:
        model = self.stage1_model if stage == "stage1" else self.stage2_model
        return [s.site_id for s in model.attention_sites()]

    def set_processor(self, site_id: str, processor) -> None:
        self._model_for(site_id).set_processor(site_id, processor)

    def get_processor(self, site_id: str):
        return self._model_for(site_id).get_processor(site_id)

    def reset_processors(self) -> None:
        self.stage1_model.reset_processors()
        self.stage2_model.reset_processors()

    # -- pipeline surface -------------------------------------------------------

    def velocity(self, stage: str, latent, cond_tokens: np.ndarray,
                 call: SiteCall) -> np.ndarray:
        r = self.grid_resolution
        if stage == "stage1":
            if not isinstance(latent, DenseLatent):
                raise ContractViolationError("stage1 velocity needs a dense latent")
            positions = (grid_coordinates(r) + 0.5) / r
            return self.stage1_model.velocity(
                latent.features, positions, cond_tokens, latent.timestep, call)
        if stage == "stage2":
            if not isinstance(latent, SparseLatent):
                raise ContractViolationError("stage2 velocity needs a sparse latent")
            positions = (latent.voxel_coords + 0.5) / r
            return self.stage2_model.velocity(
                latent.features, positions, cond_tokens, latent.timestep, call)
        raise ConfigError(f"unknown stage {stage!r}")

    def decode_voxels(self, latent: DenseLatent) -> np.ndarray:
        return decode_sparse_structure(latent, self.config.occupancy_threshold,
                                       self.occupancy)

    def voxel_colors(self, features: np.ndarray) -> np.ndarray:
        return self.color.colors(features)

    def embedder(self):
        from ..conditioning import PatchLinearEmbedder

        return PatchLinearEmbedder(
            resolution=self.image_resolution,
            patch_size=self.patch_size,
            embed_dim=self.condition_dim,
            seed=self.embed_seed,
        )
