"""End-to-end orchestration: four-branch lock-step denoising over two stages.

Within each denoising step the style and edge branches advance first (plain
self-attention, capturing what the content branch's splice needs), then a
content-preserve copy of the content latent runs one plain forward, and
finally the content branch runs with the masked cross/self splice at every
hooked site. All persistent branches then take the same Euler step, so
content, style, and edge features always exist at the same t. Each branch
gets classifier-free guidance with the stage's scale; the unconditional
forwards always use plain self-attention.

Stage handoff decodes the content branch's t=0 grid into the active voxel
set; stage 2 repeats the scheme over sparse latents, the style branch on its
own decoded voxel set and the edge branch sharing it (configurable). Both
stages draw their initial noise from one seeded field per stage, gathered by
voxel coordinate, so content and style branches start from identical noise.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backbone.latents import DenseLatent, SparseLatent, TimeSchedule, flatten_coords
from .backbone.sampler import cfg_velocity, euler_step
from .backbone.toy import ToyBackbone, ToyBackboneConfig
from .conditioning import (
    ConditionEmbedding,
    ImageInput,
    edge_map_to_image,
    extract_edges,
    load_image,
    null_condition,
    preprocess,
    save_image,
)
from .errors import ConfigError, ContractViolationError, NumericError
from .hooks import RunAttentionContext, SiteCall, StagePlan, install_hooks
from .sdfs import content_preserve_copy
from .sgc import GuidanceConfig, PassPlan, resolve_stage_plan

OUTPUT_ROOT_ENV = "SCULPT_ROOT"

# sub-seed tag separating noise draws from every other seeded stream
_NOISE_STREAM = 4099

VOXEL_FILE = "voxels.bin"
COLOR_FILE = "colors.bin"
MANIFEST_FILE = "manifest.json"
PROJECTION_FILE = "projection.png"
MASK_TRACE_FILE = "mask_trace.jsonl"


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """One run's full configuration; JSON document <-> this object."""

    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    backbone: dict = field(default_factory=lambda: {"kind": "toy"})
    content_image: str = ""
    style_images: tuple = ()
    output_dir: str | None = None
    stage2_noise: str = "fresh"
    edge_branch_voxels: str = "style"
    edge_extractor: str = "sobel"
    trace_masks: bool = False
    export_projection: bool = True

    def __post_init__(self):
        if self.stage2_noise not in ("fresh", "reuse_stage1"):
            raise ConfigError(
                f"stage2_noise must be 'fresh' or 'reuse_stage1', got {self.stage2_noise!r}"
            )
        if self.edge_branch_voxels not in ("style", "content"):
            raise ConfigError(
                f"edge_branch_voxels must be 'style' or 'content', got "
                f"{self.edge_branch_voxels!r}"
            )
        if not isinstance(self.backbone, dict) or "kind" not in self.backbone:
            raise ConfigError("exactly one backbone must be selected via backbone.kind")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        guidance_data = data.pop("guidance", {})
        try:
            guidance = GuidanceConfig(**guidance_data)
        except TypeError as exc:
            raise ConfigError(f"bad guidance section: {exc}") from exc
        style_images = tuple(data.pop("style_images", ()))
        try:
            return cls(guidance=guidance, style_images=style_images, **data)
        except TypeError as exc:
            raise ConfigError(f"bad config fields: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        g = self.guidance
        return {
            "guidance": {
                "mode": g.mode, "k_stage1": g.k_stage1, "k_stage2": g.k_stage2,
                "cfg_stage1": g.cfg_stage1, "cfg_stage2": g.cfg_stage2,
                "steps_stage1": g.steps_stage1, "steps_stage2": g.steps_stage2,
                "policy": g.policy, "policy_stage2": g.policy_stage2,
                "seed": g.seed, "freeze_masks": g.freeze_masks,
                "pass2_k_stage2": g.pass2_k_stage2,
                "carry_structure": g.carry_structure,
            },
            "backbone": dict(self.backbone),
            "content_image": str(self.content_image),
            "style_images": [str(p) for p in self.style_images],
            "output_dir": None if self.output_dir is None else str(self.output_dir),
            "stage2_noise": self.stage2_noise,
            "edge_branch_voxels": self.edge_branch_voxels,
            "edge_extractor": self.edge_extractor,
            "trace_masks": self.trace_masks,
            "export_projection": self.export_projection,
        }

    def config_hash(self) -> str:
        """Hash of the generation-defining fields.

        Output location and trace/export toggles do not change the generated
        asset, so they stay out of the hash.
        """
        data = self.to_dict()
        for key in ("output_dir", "trace_masks", "export_projection"):
            data.pop(key)
        blob = json.dumps(data, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def validate_paths(self) -> None:
        if not self.content_image or not Path(self.content_image).exists():
            raise ConfigError(f"content image not found: {self.content_image!r}")
        if self.guidance.mode != "off" and not self.style_images:
            raise ConfigError(f"mode {self.guidance.mode!r} requires style images")
        for p in self.style_images:
            if not Path(p).exists():
                raise ConfigError(f"style image not found: {p!r}")

    def resolved_output_dir(self) -> Path | None:
        if self.output_dir is None:
            return None
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out


# --------------------------------------------------------------------------
# backbone registry


def _build_toy(params: dict) -> ToyBackbone:
    return ToyBackbone(ToyBackboneConfig(**params))


BACKBONE_BUILDERS = {"toy": _build_toy}


def register_backbone(kind: str, builder) -> None:
    BACKBONE_BUILDERS[kind] = builder


def build_backbone(config: RunConfig):
    params = dict(config.backbone)
    kind = params.pop("kind")
    if kind not in BACKBONE_BUILDERS:
        raise ConfigError(
            f"unknown backbone {kind!r}; registered: {sorted(BACKBONE_BUILDERS)}"
        )
    try:
        return BACKBONE_BUILDERS[kind](params)
    except TypeError as exc:
        raise ConfigError(f"bad backbone parameters for {kind!r}: {exc}") from exc


# --------------------------------------------------------------------------
# conditions


@dataclass
class BranchConditions:
    """Per-branch condition embeddings plus the source images."""

    content: ConditionEmbedding
    null: ConditionEmbedding
    style: ConditionEmbedding | None
    edge: ConditionEmbedding | None
    content_image: ImageInput
    style_images: list


def prepare_conditions(backbone, content_image: ImageInput, style_images,
                       *, edge_extractor: str = "sobel",
                       need_style: bool = True, need_edge: bool = True) -> BranchConditions:
    """Preprocess and embed the content, style, and edge-map conditions.

    Edge maps are extracted from the raw style images and aligned by
    replaying each style image's preprocessing record. Multiple style images
    fuse by averaging their token embeddings (same for their edge maps).
    """
    embedder = backbone.embedder()
    res = backbone.image_resolution
    content_pp, _ = preprocess(content_image, resolution=res)
    cond_content = embedder(content_pp, origin="content")
    cond_style = None
    cond_edge = None
    if need_style:
        if not style_images:
            raise ConfigError("style guidance requires at least one style image")
        style_tokens, edge_tokens = [], []
        for img in style_images:
            pp, record = preprocess(img, resolution=res)
            style_tokens.append(embedder(pp, origin="style").tokens)
            if need_edge:
                raw_edges = extract_edges(img, edge_extractor)
                aligned = np.clip(record.apply(raw_edges.pixels), 0.0, 1.0)
                peak = aligned.max()
                if peak > 0:   # restore the extractor's unit-peak scaling
                    aligned = aligned / peak
                edge_img = edge_map_to_image(
                    type(raw_edges)(pixels=aligned), source_id=f"edges:{img.source_id}"
                )
                edge_tokens.append(embedder(edge_img, origin="edge").tokens)
        cond_style = ConditionEmbedding(
            tokens=np.mean(style_tokens, axis=0), origin="style"
        )
        if need_edge:
            cond_edge = ConditionEmbedding(
                tokens=np.mean(edge_tokens, axis=0), origin="edge"
            )
    return BranchConditions(
        content=cond_content,
        null=null_condition(backbone.condition_dim),
        style=cond_style,
        edge=cond_edge,
        content_image=content_image,
        style_images=list(style_images),
    )


# --------------------------------------------------------------------------
# the lock-step engine


def noise_field(seed: int, stage_tag: int, resolution: int, channels: int) -> np.ndarray:
    """The per-stage shared noise field [R^3, C], gathered by voxel coordinate."""
    rng = np.random.default_rng([seed, _NOISE_STREAM, stage_tag])
    return rng.standard_normal((resolution**3, channels))


@dataclass
class PassOutput:
    """Everything one pass produced, for export and for assertions."""

    pass_index: int
    stage1: dict
    stage2: dict
    stage1_noise: dict
    stage2_noise: dict
    stage1_field: np.ndarray
    stage2_field: np.ndarray
    voxel_coords: dict
    context: RunAttentionContext
    registry: object
    conditions: BranchConditions
    cp_copies: list
    plan: PassPlan


def _branch_velocity(backbone, stage, latent, cond, null_cond, step, scale, branch):
    try:
        v_cond = backbone.velocity(stage, latent, cond.tokens,
                                   SiteCall(stage=stage, step=step, branch=branch))
        v_uncond = backbone.velocity(
            stage, latent, null_cond.tokens,
            SiteCall(stage=stage, step=step, branch=f"{branch}_uncond"))
    except NumericError as exc:
        raise NumericError(
            f"aborting run: non-finite values at {stage} step {step} branch {branch}"
        ) from exc
    return cfg_velocity(v_cond, v_uncond, scale)


def _step_branch(latents, name, velocity, dt, stage, step):
    try:
        latents[name] = euler_step(latents[name], velocity, dt)
    except (NumericError, ContractViolationError) as exc:
        if "non-finite" in str(exc):
            raise NumericError(
                f"aborting run: non-finite values at {stage} step {step} "
                f"branch {name}"
            ) from exc
        raise


def _run_stage(backbone, stage, plan_stage: StagePlan, latents, conds,
               schedule, cfg_scale, ctx, cp_copies, *, run_style: bool):
    use_edge = plan_stage.sd_attn_enabled and not ctx.full_cross and "edge" in latents
    use_cp = plan_stage.sd_attn_enabled and not ctx.full_cross
    for i, t, dt in schedule:
        ctx.begin_step(stage, i)
        velocities = {}
        if run_style and "style" in latents:
            velocities["style"] = _branch_velocity(
                backbone, stage, latents["style"], conds.style, conds.null,
                i, cfg_scale, "style")
        if use_edge:
            velocities["edge"] = _branch_velocity(
                backbone, stage, latents["edge"], conds.edge, conds.null,
                i, cfg_scale, "edge")
        if use_cp:
            content = latents["content"]
            cp_latent = content.with_features(
                content_preserve_copy(content.features), content.timestep)
            try:
                backbone.velocity(stage, cp_latent, conds.content.tokens,
                                  SiteCall(stage=stage, step=i, branch="cp"))
            except NumericError as exc:
                raise NumericError(
                    f"aborting run: non-finite values at {stage} step {i} branch cp"
                ) from exc
            cp_copies.append((stage, i))
        velocities["content"] = _branch_velocity(
            backbone, stage, latents["content"], conds.content, conds.null,
            i, cfg_scale, "content")
        for name, v in velocities.items():
            _step_branch(latents, name, v, dt, stage, i)


def execute_run(config: RunConfig, backbone, content_image: ImageInput,
                style_images, pass_plan: PassPlan, *,
                attention_variant: str = "sd", pass_index: int = 1,
                structure_override: np.ndarray | None = None) -> PassOutput:
    """Run one full two-stage pass of the style-guided pipeline."""
    if attention_variant not in ("sd", "full_cross"):
        raise ConfigError(f"unknown attention variant {attention_variant!r}")
    g = config.guidance
    full_cross = attention_variant == "full_cross"
    r, c = backbone.grid_resolution, backbone.channels
    any_guided = pass_plan.stage1.sd_attn_enabled or pass_plan.stage2.sd_attn_enabled
    conds = prepare_conditions(
        backbone, content_image, style_images,
        edge_extractor=config.edge_extractor,
        need_style=any_guided, need_edge=any_guided and not full_cross,
    )
    ctx = RunAttentionContext(
        channels=c, seed=g.seed, policy=g.policy, freeze_masks=g.freeze_masks,
        full_cross=full_cross, trace_masks=config.trace_masks, pass_index=pass_index,
    )
    declared = backbone.declared_site_count() if hasattr(backbone, "declared_site_count") else None
    registry = install_hooks(backbone, ctx, expected_sites=declared)
    cp_copies: list = []

    # stage 1: dense grid
    ctx.configure_stage("stage1", pass_plan.stage1)
    field1 = noise_field(g.seed, 1, r, c)
    style_in_stage1 = pass_plan.stage1.sd_attn_enabled or pass_plan.stage2.sd_attn_enabled
    latents1 = {"content": DenseLatent(r, field1.copy(), 1.0)}
    if style_in_stage1:
        latents1["style"] = DenseLatent(r, field1.copy(), 1.0)
    if pass_plan.stage1.sd_attn_enabled and not full_cross:
        latents1["edge"] = DenseLatent(r, field1.copy(), 1.0)
    noise1 = {name: lat.features.copy() for name, lat in latents1.items()}
    _run_stage(backbone, "stage1", pass_plan.stage1, latents1, conds,
               TimeSchedule.uniform(g.steps_stage1), g.cfg_stage1, ctx, cp_copies,
               run_style=style_in_stage1)

    # handoff: decode the sparse structure, re-noise, denoise per voxel
    voxel_coords = {"content": structure_override if structure_override is not None
                    else backbone.decode_voxels(latents1["content"])}
    field2 = field1 if config.stage2_noise == "reuse_stage1" else noise_field(g.seed, 2, r, c)

    def sparse_from(coords):
        return SparseLatent(coords, field2[flatten_coords(coords, r)].copy(), 1.0, r)

    ctx.configure_stage("stage2", pass_plan.stage2)
    latents2 = {"content": sparse_from(voxel_coords["content"])}
    if pass_plan.stage2.sd_attn_enabled:
        voxel_coords["style"] = backbone.decode_voxels(latents1["style"])
        latents2["style"] = sparse_from(voxel_coords["style"])
        if not full_cross:
            voxel_coords["edge"] = voxel_coords[config.edge_branch_voxels].copy()
            latents2["edge"] = sparse_from(voxel_coords["edge"])
    noise2 = {name: lat.features.copy() for name, lat in latents2.items()}
    _run_stage(backbone, "stage2", pass_plan.stage2, latents2, conds,
               TimeSchedule.uniform(g.steps_stage2), g.cfg_stage2, ctx, cp_copies,
               run_style=pass_plan.stage2.sd_attn_enabled)

    return PassOutput(
        pass_index=pass_index, stage1=latents1, stage2=latents2,
        stage1_noise=noise1, stage2_noise=noise2,
        stage1_field=field1, stage2_field=field2,
        voxel_coords=voxel_coords, context=ctx, registry=registry,
        conditions=conds, cp_copies=cp_copies, plan=pass_plan,
    )


# --------------------------------------------------------------------------
# export


@dataclass
class RunDebug:
    """Non-serialized run internals kept on the export for verification."""

    passes: list
    config: RunConfig

    @property
    def final(self) -> PassOutput:
        return self.passes[-1]


@dataclass
class AssetExport:
    """Decoded asset: occupancy voxels, per-voxel colors, and the manifest."""

    voxel_coords: np.ndarray
    colors: np.ndarray
    manifest: dict
    files: dict
    output_dir: Path | None
    debug: RunDebug | None = None

    def __post_init__(self):
        if self.voxel_coords.shape[0] < 1:
            raise ContractViolationError("export needs at least one voxel")
        if self.colors.min() < 0 or self.colors.max() > 1:
            raise ContractViolationError("export colors must lie in [0, 1]")


def render_projection(coords: np.ndarray, colors: np.ndarray, resolution: int,
                      cell: int = 8, background: float = 1.0) -> np.ndarray:
    """Orthographic +z view: one cell per (x, y) column, nearest voxel wins."""
    img = np.full((resolution * cell, resolution * cell, 3), background)
    order = np.argsort(coords[:, 2], kind="stable")
    for idx in order:
        x, y, _ = coords[idx]
        img[x * cell:(x + 1) * cell, y * cell:(y + 1) * cell] = colors[idx]
    return img


def render_projection_image(latent: SparseLatent, backbone) -> ImageInput:
    """Render the asset to the backbone's image resolution for re-embedding."""
    cell = backbone.image_resolution // backbone.grid_resolution
    colors = backbone.voxel_colors(latent.features)
    pixels = render_projection(latent.voxel_coords, colors,
                               backbone.grid_resolution, cell)
    return ImageInput(pixels=pixels, source_id="projection-render")


def export_asset(latent: SparseLatent, backbone, *, output_dir=None,
                 manifest_extra: dict | None = None,
                 mask_trace: list | None = None,
                 projection: bool = True,
                 debug: RunDebug | None = None) -> AssetExport:
    """Write the asset as little-endian binary arrays plus a JSON manifest."""
    if abs(latent.timestep) > 1e-9:
        raise ContractViolationError("export requires a fully denoised latent (t=0)")
    colors = backbone.voxel_colors(latent.features)
    manifest = {
        "format": "sculpt-asset-v1",
        "voxel_count": int(latent.num_voxels),
        "grid_resolution": int(latent.grid_resolution),
        "voxel_dtype": "<i4",
        "color_dtype": "<f4",
        "files": {},
        "mask_trace": None,
    }
    manifest.update(manifest_extra or {})
    files: dict = {}
    out = None
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        try:
            (out / VOXEL_FILE).write_bytes(
                latent.voxel_coords.astype("<i4").tobytes())
            files["voxels"] = out / VOXEL_FILE
            (out / COLOR_FILE).write_bytes(colors.astype("<f4").tobytes())
            files["colors"] = out / COLOR_FILE
            if mask_trace:
                with open(out / MASK_TRACE_FILE, "w") as fh:
                    for entry in mask_trace:
                        fh.write(json.dumps(entry) + "\n")
                files["mask_trace"] = out / MASK_TRACE_FILE
                manifest["mask_trace"] = MASK_TRACE_FILE
            if projection:
                cell = max(backbone.image_resolution // backbone.grid_resolution, 1)
                img = render_projection(latent.voxel_coords, colors,
                                        latent.grid_resolution, cell)
                save_image(ImageInput(pixels=img, source_id="projection"),
                           out / PROJECTION_FILE)
                files["projection"] = out / PROJECTION_FILE
            manifest["files"] = {k: str(v.name) for k, v in files.items()}
            with open(out / MANIFEST_FILE, "w") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
            files["manifest"] = out / MANIFEST_FILE
        except OSError as exc:
            raise ConfigError(f"export write failed under {out}: {exc}") from exc
    return AssetExport(voxel_coords=latent.voxel_coords, colors=colors,
                       manifest=manifest, files=files, output_dir=out, debug=debug)


def finalize_export(config: RunConfig, backbone, passes: list) -> AssetExport:
    final = passes[-1]
    g = config.guidance
    counters = final.context.counters
    manifest_extra = {
        "config_hash": config.config_hash(),
        "seed": g.seed,
        "mode": g.mode,
        "policy": g.policy,
        "passes": len(passes),
        "k_stage1": final.plan.stage1.k,
        "k_stage2": final.plan.stage2.k,
        "sd_attn_stage1": final.plan.stage1.sd_attn_enabled,
        "sd_attn_stage2": final.plan.stage2.sd_attn_enabled,
        "steps": [g.steps_stage1, g.steps_stage2],
        "cfg": [g.cfg_stage1, g.cfg_stage2],
        "stage2_noise": config.stage2_noise,
        "counters": {"self": counters.total("self"), "cross": counters.total("cross")},
    }
    mask_trace = []
    for p in passes:
        mask_trace.extend(p.context.mask_trace)
    return export_asset(
        final.stage2["content"], backbone,
        output_dir=config.resolved_output_dir(),
        manifest_extra=manifest_extra,
        mask_trace=mask_trace if config.trace_masks else None,
        projection=config.export_projection,
        debug=RunDebug(passes=passes, config=config),
    )


# --------------------------------------------------------------------------
# entry points


def run_style_guided(config: RunConfig, backbone=None, *,
                     attention_variant: str = "sd",
                     content_image: ImageInput | None = None,
                     style_images: list | None = None) -> AssetExport:
    """Run the full style-guided pipeline described by ``config``.

    Images load from the configured paths unless passed in-memory. Geometry-
    only mode dispatches to the two-pass procedure; every other mode is a
    single pass.
    """
    backbone = backbone if backbone is not None else build_backbone(config)
    plan = resolve_stage_plan(config.guidance, backbone.channels)
    if content_image is None:
        config.validate_paths()
        content_image = load_image(config.content_image)
    if style_images is None:
        style_images = [load_image(p) for p in config.style_images]
    if plan.passes == 2:
        from .sgc import geometry_only_pipeline

        return geometry_only_pipeline(content_image, style_images, config,
                                      backbone=backbone)
    out = execute_run(config, backbone, content_image, style_images, plan.pass1,
                      attention_variant=attention_variant, pass_index=1)
    return finalize_export(config, backbone, [out])


def run_plain_backbone(config: RunConfig, backbone=None,
                       content_image: ImageInput | None = None) -> AssetExport:
    """The raw backbone's image-to-3D path: one branch, no hooks, no splice.

    Kept as a deliberately plain, separate loop so the mode-off pipeline has
    an independent comparator for its bitwise-identity contract.
    """
    backbone = backbone if backbone is not None else build_backbone(config)
    backbone.reset_processors()
    g = config.guidance
    r, c = backbone.grid_resolution, backbone.channels
    if content_image is None:
        config.validate_paths()
        content_image = load_image(config.content_image)
    embedder = backbone.embedder()
    content_pp, _ = preprocess(content_image, resolution=backbone.image_resolution)
    cond = embedder(content_pp, origin="content")
    null = null_condition(backbone.condition_dim)

    field1 = noise_field(g.seed, 1, r, c)
    latent1 = DenseLatent(r, field1.copy(), 1.0)
    noise1 = {"content": latent1.features.copy()}
    for i, t, dt in TimeSchedule.uniform(g.steps_stage1):
        v = cfg_velocity(
            backbone.velocity("stage1", latent1, cond.tokens,
                              SiteCall("stage1", i, "content")),
            backbone.velocity("stage1", latent1, null.tokens,
                              SiteCall("stage1", i, "content_uncond")),
            g.cfg_stage1,
        )
        latent1 = euler_step(latent1, v, dt)

    coords = backbone.decode_voxels(latent1)
    field2 = field1 if config.stage2_noise == "reuse_stage1" else noise_field(g.seed, 2, r, c)
    latent2 = SparseLatent(coords, field2[flatten_coords(coords, r)].copy(), 1.0, r)
    noise2 = {"content": latent2.features.copy()}
    for i, t, dt in TimeSchedule.uniform(g.steps_stage2):
        v = cfg_velocity(
            backbone.velocity("stage2", latent2, cond.tokens,
                              SiteCall("stage2", i, "content")),
            backbone.velocity("stage2", latent2, null.tokens,
                              SiteCall("stage2", i, "content_uncond")),
            g.cfg_stage2,
        )
        latent2 = euler_step(latent2, v, dt)

    conds = BranchConditions(content=cond, null=null, style=None, edge=None,
                             content_image=content_image, style_images=[])
    ctx = RunAttentionContext(channels=c, seed=g.seed)
    out = PassOutput(
        pass_index=1, stage1={"content": latent1}, stage2={"content": latent2},
        stage1_noise=noise1, stage2_noise=noise2,
        stage1_field=field1, stage2_field=field2,
        voxel_coords={"content": coords}, context=ctx, registry=None,
        conditions=conds, cp_copies=[],
        plan=PassPlan(StagePlan(False, 0), StagePlan(False, 0)),
    )
    manifest_extra = {
        "config_hash": config.config_hash(), "seed": g.seed, "mode": "raw",
        "passes": 1, "steps": [g.steps_stage1, g.steps_stage2],
        "cfg": [g.cfg_stage1, g.cfg_stage2], "stage2_noise": config.stage2_noise,
    }
    return export_asset(
        latent2, backbone, output_dir=config.resolved_output_dir(),
        manifest_extra=manifest_extra, projection=config.export_projection,
        debug=RunDebug(passes=[out], config=config),
    )
