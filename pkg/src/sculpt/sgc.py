"""Style Guidance Control: user intent -> per-stage splice plans.

The single knob is K, the number of style-aware channels per stage. Dual
guidance runs both stages at the full defaults; texture-only runs both at a
quarter of them; geometry-only is a two-pass procedure: a dual-K first pass
captures texture and geometry style, then the rendered first-pass asset
becomes the new content image and the original content image becomes the
new style image for a second pass whose stage-1 splice is disabled (plain
self-attention only) and whose stage 2 runs at the texture-only K.

Defaults scale the full-scale reference values (K=80 for stage 1, K=800 for
stage 2 at C=1024) proportionally to the active backbone's channel count,
preserving the selection fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError, ContractViolationError, PipelineError
from .hooks import StagePlan
from .sdfs import POLICIES

GUIDANCE_MODES = ("dual", "texture_only", "geometry_only", "off")

FULL_SCALE_CHANNELS = 1024
FULL_SCALE_K_STAGE1 = 80
FULL_SCALE_K_STAGE2 = 800
DEFAULT_CFG_STAGE1 = 6.5
DEFAULT_CFG_STAGE2 = 3.5
DEFAULT_STEPS = 100


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def default_k(stage: int, channels: int) -> int:
    """Dual-guidance K default for the given backbone width."""
    full = FULL_SCALE_K_STAGE1 if stage == 1 else FULL_SCALE_K_STAGE2
    return _round_half_up(full * channels / FULL_SCALE_CHANNELS)


def texture_only_k(stage: int, channels: int) -> int:
    """Texture-only K default: a quarter of the dual default."""
    return _round_half_up(default_k(stage, channels) / 4)


@dataclass(frozen=True)
class GuidanceConfig:
    """All guidance knobs of one run.

    ``k_stage1``/``k_stage2`` of None resolve to the channel-scaled defaults;
    ``policy_stage2`` of None follows ``policy``. ``carry_structure`` makes
    geometry-only pass 2 denoise over the first pass's decoded voxel set
    instead of re-decoding its own stage 1 (desk-scale geometry guarantee).
    """

    mode: str = "dual"
    k_stage1: int | None = None
    k_stage2: int | None = None
    cfg_stage1: float = DEFAULT_CFG_STAGE1
    cfg_stage2: float = DEFAULT_CFG_STAGE2
    steps_stage1: int = DEFAULT_STEPS
    steps_stage2: int = DEFAULT_STEPS
    policy: str = "low_variance"
    policy_stage2: str | None = None
    seed: int = 0
    freeze_masks: bool = False
    pass2_k_stage2: int | None = None
    carry_structure: bool = False

    def __post_init__(self):
        if self.mode not in GUIDANCE_MODES:
            raise ConfigError(f"unknown guidance mode {self.mode!r}; one of {GUIDANCE_MODES}")
        if self.steps_stage1 < 1 or self.steps_stage2 < 1:
            raise ConfigError("step counts must be >= 1")
        if self.cfg_stage1 < 0 or self.cfg_stage2 < 0:
            raise ConfigError("CFG scales must be >= 0")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; one of {POLICIES}")
        if self.policy_stage2 is not None and self.policy_stage2 not in POLICIES:
            raise ConfigError(f"unknown stage-2 policy {self.policy_stage2!r}")
        for name in ("k_stage1", "k_stage2", "pass2_k_stage2"):
            k = getattr(self, name)
            if k is not None and k < 0:
                raise ConfigError(f"{name} must be >= 0, got {k}")


@dataclass(frozen=True)
class PassPlan:
    stage1: StagePlan
    stage2: StagePlan


@dataclass(frozen=True)
class GuidancePlan:
    """Resolved per-stage plans; two passes only for geometry-only mode."""

    passes: int
    pass1: PassPlan
    pass2: PassPlan | None = None

    @property
    def stage1(self) -> StagePlan:
        return self.pass1.stage1

    @property
    def stage2(self) -> StagePlan:
        return self.pass1.stage2


def resolve_stage_plan(config: GuidanceConfig, channels: int) -> GuidancePlan:
    """Map (mode, K overrides) to concrete per-stage splice plans.

    K values are validated against the active backbone's channel count, so a
    full-scale config (K=800 at C=1024) passes here while the same K against
    the toy backbone is rejected.
    """
    p1 = config.policy
    p2 = config.policy_stage2 or config.policy
    k1 = config.k_stage1 if config.k_stage1 is not None else default_k(1, channels)
    k2 = config.k_stage2 if config.k_stage2 is not None else default_k(2, channels)
    for name, k in (("k_stage1", k1), ("k_stage2", k2)):
        if not 0 <= k <= channels:
            raise ConfigError(f"{name}={k} outside [0, {channels}] for this backbone")

    if config.mode == "off":
        off = StagePlan(False, 0, p1)
        return GuidancePlan(passes=1, pass1=PassPlan(off, StagePlan(False, 0, p2)))
    if config.mode == "dual":
        return GuidancePlan(passes=1, pass1=PassPlan(
            StagePlan(True, k1, p1), StagePlan(True, k2, p2)))
    if config.mode == "texture_only":
        tk1 = config.k_stage1 if config.k_stage1 is not None else texture_only_k(1, channels)
        tk2 = config.k_stage2 if config.k_stage2 is not None else texture_only_k(2, channels)
        for name, k in (("k_stage1", tk1), ("k_stage2", tk2)):
            if not 0 <= k <= channels:
                raise ConfigError(f"{name}={k} outside [0, {channels}]")
        return GuidancePlan(passes=1, pass1=PassPlan(
            StagePlan(True, tk1, p1), StagePlan(True, tk2, p2)))
    if config.mode == "geometry_only":
        p2k = config.pass2_k_stage2 if config.pass2_k_stage2 is not None \
            else texture_only_k(2, channels)
        if not 0 <= p2k <= channels:
            raise ConfigError(f"pass2_k_stage2={p2k} outside [0, {channels}]")
        return GuidancePlan(
            passes=2,
            pass1=PassPlan(StagePlan(True, k1, p1), StagePlan(True, k2, p2)),
            pass2=PassPlan(StagePlan(False, 0, p1), StagePlan(True, p2k, p2)),
        )
    raise ConfigError(f"unknown guidance mode {config.mode!r}")


def geometry_only_pipeline(content_image, style_images, config, backbone=None):
    """Two-pass geometry-only stylization.

    Pass 1 runs dual guidance at the full K. Its asset is rendered to a
    single canonical orthographic view; pass 2 then re-runs with that render
    as the new content image and the original content image as the new style
    image, stage-1 splice disabled, stage-2 at the smaller K. Returns the
    pass-2 export with both passes' run records attached.
    """
    from . import pipeline as pl

    if config.guidance.mode != "geometry_only":
        raise ContractViolationError("geometry_only_pipeline requires mode=geometry_only")
    backbone = backbone if backbone is not None else pl.build_backbone(config)
    plan = resolve_stage_plan(config.guidance, backbone.channels)
    pass1 = pl.execute_run(config, backbone, content_image, style_images,
                           plan.pass1, pass_index=1)
    try:
        render = pl.render_projection_image(pass1.stage2["content"], backbone)
    except Exception as exc:
        raise PipelineError("geometry-only pass 1 rendering failed") from exc
    structure = pass1.voxel_coords["content"] if config.guidance.carry_structure else None
    pass2 = pl.execute_run(config, backbone, render, [content_image],
                           plan.pass2, pass_index=2, structure_override=structure)
    return pl.finalize_export(config, backbone, [pass1, pass2])


def intensity_sweep(content_image, style_images, k_values, config, backbone=None):
    """One dual-guidance run per K, all sharing the seed and initial noise.

    Each run applies K to both stages and traces its channel masks; returns
    the list of (k, export) pairs in the given order.
    """
    from . import pipeline as pl

    backbone = backbone if backbone is not None else pl.build_backbone(config)
    for k in k_values:
        if not 0 <= k <= backbone.channels:
            raise ConfigError(f"sweep K={k} outside [0, {backbone.channels}]")
    results = []
    base_out = config.output_dir
    for k in k_values:
        guidance = replace(config.guidance, mode="dual", k_stage1=int(k), k_stage2=int(k))
        run_cfg = replace(config, guidance=guidance, trace_masks=True,
                          output_dir=None if base_out is None else
                          str(base_out) + f"/k{int(k)}")
        plan = resolve_stage_plan(guidance, backbone.channels)
        out = pl.execute_run(run_cfg, backbone, content_image, style_images,
                             plan.pass1, pass_index=1)
        results.append((int(k), pl.finalize_export(run_cfg, backbone, [out])))
    return results
