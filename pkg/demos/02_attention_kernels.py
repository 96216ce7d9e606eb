"""Walkthrough: the attention kernels underneath the style machinery.

Shows QKV projection with a site's weight triple, plain self-attention, and
cross-branch attention between token sets of different lengths, plus the
properties the rest of the toolkit leans on.
"""

import numpy as np

from sculpt import SiteWeights, cross_3d_attention, qkv_project, self_attention

rng = np.random.default_rng(7)
C, HEADS = 16, 4
weights = SiteWeights(*(rng.standard_normal((C, C)) / np.sqrt(C) for _ in range(3)))

content = rng.standard_normal((10, C))   # ten content tokens
style = rng.standard_normal((6, C))      # six style tokens - counts may differ

t_content = qkv_project(content, weights, heads=HEADS)
t_style = qkv_project(style, weights, heads=HEADS)
print(f"projected content Q {t_content.q.shape}, style K/V {t_style.k.shape}")

own = self_attention(t_content)
crossed = cross_3d_attention(t_content.q, (t_style.k, t_style.v), heads=HEADS)
print(f"self-attention out {own.shape}; cross-attention out {crossed.shape} "
      "(row count follows the queries)")

# degenerate case: style == content makes cross-attention ordinary self-attention
same = cross_3d_attention(t_content.q, (t_content.k, t_content.v), heads=HEADS)
print("cross(content, content) == self(content):", np.array_equal(same, own))

# attention is set-like over the keys: permuting style tokens changes nothing
perm = rng.permutation(style.shape[0])
t_perm = qkv_project(style[perm], weights, heads=HEADS)
shuffled = cross_3d_attention(t_content.q, (t_perm.k, t_perm.v), heads=HEADS)
print("permutation invariance max |diff|:", np.abs(shuffled - crossed).max())

# one style token: every content row receives that token's value
single = qkv_project(style[:1], weights, heads=HEADS)
broadcast = cross_3d_attention(t_content.q, (single.k, single.v), heads=HEADS)
print("single style token broadcast:", np.allclose(broadcast, broadcast[0]))
