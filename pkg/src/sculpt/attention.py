"""Attention kernels.

Three primitives shared by every attention site in the toolkit:

* ``qkv_project``    -- project token features into Q/K/V with a site's
  original projection triple,
* ``self_attention`` -- multi-head softmax(Q K^T / sqrt(d_k)) V over one
  token set,
* ``cross_3d_attention`` -- the same kernel with queries from the content
  branch and keys/values from the style branch, whose token counts may
  differ (stage-2 voxel sets are per-branch).

All kernels are pure functions of their inputs. Softmax logits are shifted
by their row max before exponentiation (shift-invariant, prevents overflow).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, NumericError


@dataclass(frozen=True)
class SiteWeights:
    """The QKV projection triple of one attention site, each [C, C]."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray

    def __post_init__(self):
        c = self.w_q.shape[0] if self.w_q.ndim == 2 else -1
        for name in ("w_q", "w_k", "w_v"):
            w = getattr(self, name)
            if w.ndim != 2 or w.shape != (c, c):
                raise ContractViolationError(
                    f"site weight {name} must be square [C, C], got {w.shape}"
                )

    @property
    def channels(self) -> int:
        return self.w_q.shape[0]


@dataclass(frozen=True)
class AttentionTensors:
    """Projected Q/K/V for one attention call.

    Q is [N_q, C]; K and V share [N_kv, C]. ``heads`` must divide C.
    """

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    heads: int = 1

    def __post_init__(self):
        if self.q.ndim != 2 or self.k.ndim != 2 or self.v.ndim != 2:
            raise ContractViolationError("Q, K, V must be rank-2 [N, C]")
        c = self.q.shape[1]
        if self.k.shape[1] != c or self.v.shape[1] != c:
            raise ContractViolationError(
                f"channel mismatch: Q has C={c}, K has {self.k.shape[1]}, "
                f"V has {self.v.shape[1]}"
            )
        if self.k.shape[0] != self.v.shape[0]:
            raise ContractViolationError(
                f"K and V must share N_kv, got {self.k.shape[0]} vs {self.v.shape[0]}"
            )
        if self.heads < 1 or c % self.heads != 0:
            raise ContractViolationError(
                f"C={c} not divisible by heads={self.heads}"
            )
        for name, t in (("Q", self.q), ("K", self.k), ("V", self.v)):
            if not np.isfinite(t).all():
                raise NumericError(f"non-finite entries in {name}")

    @property
    def head_dim(self) -> int:
        return self.q.shape[1] // self.heads


def qkv_project(features: np.ndarray, weights: SiteWeights, heads: int = 1) -> AttentionTensors:
    """Project [N, C] features through the site's original QKV matrices."""
    if features.ndim != 2:
        raise ContractViolationError(f"features must be [N, C], got {features.shape}")
    if features.shape[1] != weights.channels:
        raise ContractViolationError(
            f"feature channels {features.shape[1]} != weight channels {weights.channels}"
        )
    return AttentionTensors(
        q=features @ weights.w_q,
        k=features @ weights.w_k,
        v=features @ weights.w_v,
        heads=heads,
    )


def _headed_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray, heads: int) -> np.ndarray:
    n_q, c = q.shape
    n_kv = k.shape[0]
    d = c // heads
    # folding the 1/sqrt(d_k) scale into Q avoids a pass over the logits;
    # the python-float scale keeps float32 inputs in float32
    qh = (q * (1.0 / math.sqrt(d))).reshape(n_q, heads, d).transpose(1, 0, 2)
    kh = k.reshape(n_kv, heads, d).transpose(1, 0, 2)
    vh = v.reshape(n_kv, heads, d).transpose(1, 0, 2)
    logits = qh @ kh.transpose(0, 2, 1)
    # a NaN or +inf anywhere in a row surfaces in that row's max
    row_max = logits.max(axis=-1, keepdims=True)
    if not np.isfinite(row_max).all():
        raise NumericError("non-finite attention logits")
    logits -= row_max
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=-1, keepdims=True)
    out = logits @ vh
    return out.transpose(1, 0, 2).reshape(n_q, c)


def self_attention(tensors: AttentionTensors) -> np.ndarray:
    """Multi-head self-attention; requires N_q == N_kv.

    Per head: softmax(Q K^T / sqrt(d_k)) V, heads concatenated along channels.
    """
    if tensors.q.shape[0] != tensors.k.shape[0]:
        raise ContractViolationError(
            f"self-attention requires N_q == N_kv, got {tensors.q.shape[0]} vs "
            f"{tensors.k.shape[0]}"
        )
    return _headed_attention(tensors.q, tensors.k, tensors.v, tensors.heads)


def cross_3d_attention(
    q_from_content: np.ndarray,
    kv_from_style: tuple[np.ndarray, np.ndarray],
    heads: int = 1,
) -> np.ndarray:
    """Attention with content-branch queries over style-branch keys/values.

    Token counts may differ between the branches; output has the content
    branch's row count. Degenerates to self-attention when the style K/V
    come from the same tokens as Q.
    """
    k, v = kv_from_style
    tensors = AttentionTensors(q=q_from_content, k=k, v=v, heads=heads)
    return _headed_attention(tensors.q, tensors.k, tensors.v, tensors.heads)
