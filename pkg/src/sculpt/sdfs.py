"""Style-disentangled feature selection.

Channels of a 3D latent split into style- and content-significant groups by
the per-channel population variance of the edge branch's attention output:
style information is globally consistent across patches, so style channels
have low variance. The binary mask built from that ranking splices
cross-branch attention (masked channels) with content-preserve
self-attention (the rest) -- exact selection, never blending.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import SiteWeights, cross_3d_attention, qkv_project, self_attention
from .errors import ContractViolationError

POLICIES = ("low_variance", "high_variance", "random")


@dataclass(frozen=True)
class ChannelMask:
    """Binary vector over C channels with exactly ``k`` ones."""

    bits: np.ndarray
    k: int
    policy: str

    def __post_init__(self):
        if self.bits.ndim != 1:
            raise ContractViolationError("mask bits must be a vector")
        if not np.isin(self.bits, (0, 1)).all():
            raise ContractViolationError("mask bits must be 0 or 1")
        if int(self.bits.sum()) != self.k:
            raise ContractViolationError(
                f"mask popcount {int(self.bits.sum())} != k={self.k}"
            )
        if self.policy not in POLICIES:
            raise ContractViolationError(f"unknown policy {self.policy!r}")

    @property
    def selected(self) -> np.ndarray:
        """Indices of the style-significant channels, ascending."""
        return np.flatnonzero(self.bits)


@dataclass(frozen=True)
class BranchFeatures:
    """The four lock-stepped branches' token features at one attention site.

    ``f_cp`` is the content-preserve copy and must match ``f_c``'s row count;
    style and edge branches may have different token counts.
    """

    f_c: np.ndarray
    f_s: np.ndarray
    f_e: np.ndarray
    f_cp: np.ndarray

    def __post_init__(self):
        c = self.f_c.shape[1]
        for name in ("f_c", "f_s", "f_e", "f_cp"):
            f = getattr(self, name)
            if f.ndim != 2 or f.shape[1] != c:
                raise ContractViolationError(
                    f"{name} must be [N, {c}], got {f.shape}"
                )
            if not np.isfinite(f).all():
                raise ContractViolationError(f"non-finite entries in {name}")
        if self.f_cp.shape[0] != self.f_c.shape[0]:
            raise ContractViolationError(
                "content-preserve copy must match content row count"
            )

    @property
    def channels(self) -> int:
        return self.f_c.shape[1]


def channel_variance(features: np.ndarray) -> np.ndarray:
    """Per-channel population variance over patches: (1/N) sum (f - mu)^2."""
    if features.ndim != 2 or features.shape[0] < 1:
        raise ContractViolationError(
            f"need at least one patch row, got shape {features.shape}"
        )
    mu = features.mean(axis=0)
    return np.mean((features - mu) ** 2, axis=0)


def build_style_mask(
    variances: np.ndarray,
    k: int,
    policy: str = "low_variance",
    rng: np.random.Generator | None = None,
) -> ChannelMask:
    """Mark k channels as style-significant.

    low_variance takes the k smallest-variance channels (the default,
    style-selecting behavior); high_variance the k largest; random draws k
    from ``rng``. Ties break toward the lower channel index.
    """
    c = variances.shape[0]
    if not 0 <= k <= c:
        raise ContractViolationError(f"k={k} out of range [0, {c}]")
    if not np.isfinite(variances).all():
        raise ContractViolationError("non-finite variances")
    if policy == "low_variance":
        selected = np.argsort(variances, kind="stable")[:k]
    elif policy == "high_variance":
        selected = np.argsort(-variances, kind="stable")[:k]
    elif policy == "random":
        if rng is None:
            raise ContractViolationError("random policy requires a seeded generator")
        selected = rng.choice(c, size=k, replace=False)
    else:
        raise ContractViolationError(f"unknown policy {policy!r}")
    bits = np.zeros(c, dtype=np.uint8)
    bits[selected] = 1
    return ChannelMask(bits=bits, k=k, policy=policy)


def content_preserve_copy(f_c: np.ndarray) -> np.ndarray:
    """Independently mutable copy of the content features.

    Taken once per denoising step, before any cross-branch mutation, so the
    complement channels are computed from uncontaminated content.
    """
    if not np.isfinite(f_c).all():
        raise ContractViolationError("non-finite content features")
    return np.array(f_c, copy=True)


def sd_attention(
    branches: BranchFeatures,
    mask: ChannelMask,
    site_weights: SiteWeights,
    heads: int = 1,
) -> np.ndarray:
    """Masked fusion of cross-branch and content-preserve attention.

    Masked channels carry exclusively the cross-attention result (queries
    from f_c, keys/values from f_s); complement channels carry exclusively
    the self-attention of the content-preserve copy, projected with the same
    site weights. Channel-wise selection is exact: no blending.
    """
    if mask.bits.shape[0] != branches.channels:
        raise ContractViolationError(
            f"mask length {mask.bits.shape[0]} != channels {branches.channels}"
        )
    t_c = qkv_project(branches.f_c, site_weights, heads)
    t_s = qkv_project(branches.f_s, site_weights, heads)
    crossed = cross_3d_attention(t_c.q, (t_s.k, t_s.v), heads)
    kept = self_attention(qkv_project(branches.f_cp, site_weights, heads))
    return np.where(mask.bits.astype(bool)[None, :], crossed, kept)


def edge_filter_variances(
    f_e: np.ndarray, site_weights: SiteWeights, heads: int = 1
) -> np.ndarray:
    """Variance vector of the edge branch after its self-attention pass.

    This is the ranking signal consumed by build_style_mask: the edge
    features are processed by plain self-attention, then each channel's
    patch-wise variance is measured.
    """
    return channel_variance(self_attention(qkv_project(f_e, site_weights, heads)))
