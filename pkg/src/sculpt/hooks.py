"""Hook protocol: how the style-guidance machinery attaches to a backbone.

A host backbone exposes its self-attention sites (id + original QKV/output
weights); ``install_hooks`` binds one branch-dispatching processor to every
site, exactly once. During a run the processor routes each call by branch:
style / edge / content-preserve / unconditional branches run plain
self-attention (capturing what the content branch will need), and the
content branch runs the masked cross/self splice whenever the active stage
plan enables it. Cross-attention and FFN layers of the host are untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .attention import SiteWeights, cross_3d_attention, qkv_project, self_attention
from .errors import ConfigError, PipelineError
from .sdfs import ChannelMask, build_style_mask, channel_variance


@dataclass(frozen=True)
class AttentionSite:
    """One self-attention site of a host model."""

    site_id: str
    weights: SiteWeights
    w_out: np.ndarray
    heads: int


@dataclass(frozen=True)
class SiteCall:
    """Per-call context handed to a processor: which stage/step/branch."""

    stage: str
    step: int
    branch: str


@runtime_checkable
class AttentionHost(Protocol):
    """Minimal surface a backbone must expose for hook installation."""

    def attention_sites(self) -> Sequence[AttentionSite]: ...

    def set_processor(self, site_id: str, processor) -> None: ...

    def get_processor(self, site_id: str): ...


class AttentionCounters:
    """Monotone per-site invocation counters, keyed by attention kind."""

    def __init__(self):
        self._counts: dict[str, dict[str, int]] = {}

    def register(self, site_id: str) -> None:
        self._counts.setdefault(site_id, {"self": 0, "cross": 0})

    def count(self, site_id: str, kind: str) -> None:
        self._counts.setdefault(site_id, {"self": 0, "cross": 0})[kind] += 1

    def get(self, site_id: str, kind: str) -> int:
        return self._counts.get(site_id, {}).get(kind, 0)

    def total(self, kind: str, site_ids: Sequence[str] | None = None) -> int:
        ids = self._counts.keys() if site_ids is None else site_ids
        return sum(self._counts.get(s, {}).get(kind, 0) for s in ids)

    def snapshot(self) -> dict[str, dict[str, int]]:
        return {s: dict(kinds) for s, kinds in self._counts.items()}

    @property
    def site_ids(self) -> list[str]:
        return list(self._counts)


class SelfAttnProcessor:
    """Plain multi-head self-attention at a site (the backbone's default)."""

    def __init__(self, counters: AttentionCounters | None = None):
        self.counters = counters

    def __call__(self, site: AttentionSite, hidden: np.ndarray, call: SiteCall) -> np.ndarray:
        if self.counters is not None:
            self.counters.count(site.site_id, "self")
        return self_attention(qkv_project(hidden, site.weights, site.heads))


# stream tag separating mask-selection randomness from noise randomness
_MASK_STREAM = 7919


@dataclass(frozen=True)
class StagePlan:
    """Per-stage guidance switch: splice on/off, K, and selection policy."""

    sd_attn_enabled: bool
    k: int
    policy: str = "low_variance"


@dataclass
class RunAttentionContext:
    """Mutable per-run state shared by all bound processors.

    Captures are cleared at the start of every denoising step; the content
    branch's splice then consumes the style hidden state, the edge branch's
    attention output (variance ranking), and the content-preserve attention
    output recorded earlier in the same step.
    """

    channels: int
    seed: int
    policy: str = "low_variance"
    freeze_masks: bool = False
    full_cross: bool = False
    trace_masks: bool = False
    pass_index: int = 1

    counters: AttentionCounters = field(default_factory=AttentionCounters)
    stage_plans: dict[str, StagePlan] = field(default_factory=dict)
    site_index: dict[str, int] = field(default_factory=dict)
    mask_trace: list[dict] = field(default_factory=list)
    # relative displacement the splice injects at each guided site call,
    # ||fused - content_preserve|| / ||content_preserve||, keyed by stage
    displacements: dict[str, list] = field(default_factory=dict)

    _style_hidden: dict[str, np.ndarray] = field(default_factory=dict)
    _edge_attn: dict[str, np.ndarray] = field(default_factory=dict)
    _cp_attn: dict[str, np.ndarray] = field(default_factory=dict)
    _frozen_masks: dict[tuple[str, str], ChannelMask] = field(default_factory=dict)

    def configure_stage(self, stage: str, plan: StagePlan) -> None:
        self.stage_plans[stage] = plan

    def sd_enabled(self, stage: str) -> bool:
        plan = self.stage_plans.get(stage)
        return plan is not None and plan.sd_attn_enabled

    def k_for(self, stage: str) -> int:
        return self.stage_plans[stage].k

    def begin_step(self, stage: str, step: int) -> None:
        self._style_hidden.clear()
        self._edge_attn.clear()
        self._cp_attn.clear()

    def capture_style(self, site_id: str, hidden: np.ndarray) -> None:
        self._style_hidden[site_id] = hidden.copy()

    def capture_edge(self, site_id: str, attn_out: np.ndarray) -> None:
        self._edge_attn[site_id] = attn_out.copy()

    def capture_cp(self, site_id: str, attn_out: np.ndarray) -> None:
        self._cp_attn[site_id] = attn_out.copy()

    def _capture(self, kind: str, site_id: str) -> np.ndarray:
        store = {"style": self._style_hidden, "edge": self._edge_attn, "cp": self._cp_attn}[kind]
        if site_id not in store:
            raise PipelineError(
                f"{kind} capture missing at site {site_id}; the {kind} branch must "
                "run before the content branch within each step"
            )
        return store[site_id]

    def _mask_rng(self, stage: str, site_id: str, step: int) -> np.random.Generator:
        stage_tag = 1 if stage.endswith("1") else 2
        return np.random.default_rng(
            [self.seed, _MASK_STREAM, self.pass_index, stage_tag,
             self.site_index.get(site_id, 0), step]
        )

    def mask_for(self, stage: str, site_id: str, step: int, variances: np.ndarray) -> ChannelMask:
        key = (stage, site_id)
        if self.freeze_masks and key in self._frozen_masks:
            return self._frozen_masks[key]
        policy = self.stage_plans[stage].policy
        mask = build_style_mask(
            variances, self.k_for(stage), policy,
            rng=self._mask_rng(stage, site_id, step) if policy == "random" else None,
        )
        if self.freeze_masks and step == 0:
            self._frozen_masks[key] = mask
        if self.trace_masks:
            self.mask_trace.append({
                "pass": self.pass_index,
                "stage": stage,
                "step": step,
                "site": site_id,
                "k": mask.k,
                "policy": mask.policy,
                "selected": mask.selected.tolist(),
            })
        return mask


class StyleGuidedProcessor:
    """The branch-dispatching processor bound to every host attention site."""

    def __init__(self, context: RunAttentionContext):
        self.ctx = context

    def __call__(self, site: AttentionSite, hidden: np.ndarray, call: SiteCall) -> np.ndarray:
        ctx = self.ctx
        if call.branch == "content" and ctx.sd_enabled(call.stage):
            return self._guided(site, hidden, call)
        ctx.counters.count(site.site_id, "self")
        out = self_attention(qkv_project(hidden, site.weights, site.heads))
        if ctx.sd_enabled(call.stage):
            if call.branch == "style":
                ctx.capture_style(site.site_id, hidden)
            elif call.branch == "edge" and not ctx.full_cross:
                ctx.capture_edge(site.site_id, out)
            elif call.branch == "cp" and not ctx.full_cross:
                ctx.capture_cp(site.site_id, out)
        return out

    def _guided(self, site: AttentionSite, hidden: np.ndarray, call: SiteCall) -> np.ndarray:
        ctx = self.ctx
        ctx.counters.count(site.site_id, "cross")
        t_c = qkv_project(hidden, site.weights, site.heads)
        style_hidden = ctx._capture("style", site.site_id)
        t_s = qkv_project(style_hidden, site.weights, site.heads)
        crossed = cross_3d_attention(t_c.q, (t_s.k, t_s.v), site.heads)
        if ctx.full_cross:
            return crossed
        variances = channel_variance(ctx._capture("edge", site.site_id))
        mask = ctx.mask_for(call.stage, site.site_id, call.step, variances)
        kept = ctx._capture("cp", site.site_id)
        fused = np.where(mask.bits.astype(bool)[None, :], crossed, kept)
        denom = float(np.linalg.norm(kept))
        ctx.displacements.setdefault(call.stage, []).append(
            float(np.linalg.norm(fused - kept)) / max(denom, 1e-12))
        return fused


@dataclass
class HookRegistry:
    """Result of installing hooks: the bound sites and their shared counters."""

    site_ids: list[str]
    processor: StyleGuidedProcessor
    context: RunAttentionContext

    @property
    def counters(self) -> AttentionCounters:
        return self.context.counters

    def cross_total(self, site_ids: Sequence[str] | None = None) -> int:
        return self.counters.total("cross", site_ids)

    def self_total(self, site_ids: Sequence[str] | None = None) -> int:
        return self.counters.total("self", site_ids)


def install_hooks(host: AttentionHost, context: RunAttentionContext,
                  expected_sites: int | None = None) -> HookRegistry:
    """Bind a StyleGuidedProcessor to every self-attention site of ``host``.

    Every enumerated site is bound exactly once; duplicate site ids, a count
    mismatch against the declared backbone configuration, or a site that
    fails
    verification after binding are hard configuration errors.
    """
    sites = list(host.attention_sites())
    ids = [s.site_id for s in sites]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ConfigError(f"duplicate attention site ids: {dupes}")
    if expected_sites is not None and len(ids) != expected_sites:
        raise ConfigError(
            f"host enumerates {len(ids)} attention sites but the backbone "
            f"configuration declares {expected_sites}"
        )
    processor = StyleGuidedProcessor(context)
    for index, site in enumerate(sites):
        context.site_index[site.site_id] = index
        context.counters.register(site.site_id)
        host.set_processor(site.site_id, processor)
    for site in host.attention_sites():
        if host.get_processor(site.site_id) is not processor:
            raise ConfigError(f"site {site.site_id} not bound after installation")
    return HookRegistry(site_ids=ids, processor=processor, context=context)
