"""Walkthrough: variance-ranked channel masks and the masked fusion.

Channels whose values barely vary across patches carry globally consistent
(style) information; channels that swing carry content. The mask selects the
K lowest-variance channels of the edge branch's attention output, and the
fusion splices cross-attention into exactly those channels.
"""

import numpy as np

from sculpt import (
    BranchFeatures,
    SiteWeights,
    build_style_mask,
    channel_variance,
    edge_filter_variances,
    sd_attention,
)

rng = np.random.default_rng(21)
C = 12

# synthetic feature matrix with three deliberately flat channels
features = rng.standard_normal((40, C))
features[:, [2, 5, 9]] = [0.5, -1.0, 2.0] + 0.01 * rng.standard_normal((40, 3))
variances = channel_variance(features)
print("channel variances:", np.array2string(variances, precision=3))

mask = build_style_mask(variances, k=3)
print("k=3 low-variance mask selects channels:", mask.selected, "(expected [2 5 9])")
print("high-variance alternative:", build_style_mask(variances, 3, "high_variance").selected)
print("seeded random alternative:",
      build_style_mask(variances, 3, "random", rng=np.random.default_rng(0)).selected)

# nesting: growing K only ever adds channels
for k in (2, 4, 6):
    print(f"k={k}:", build_style_mask(variances, k).selected)

# the full selection pipeline runs on the edge branch's attention output
weights = SiteWeights(*(rng.standard_normal((C, C)) / np.sqrt(C) for _ in range(3)))
edge_tokens = rng.standard_normal((25, C))
ranked = edge_filter_variances(edge_tokens, weights, heads=2)
mask = build_style_mask(ranked, k=4)
print("edge-filtered selection:", mask.selected)

branches = BranchFeatures(
    f_c=rng.standard_normal((8, C)),
    f_s=rng.standard_normal((5, C)),
    f_e=edge_tokens,
    f_cp=rng.standard_normal((8, C)),
)
fused = sd_attention(branches, mask, weights, heads=2)
print("fused output:", fused.shape)

# the two endpoints collapse the fusion
all_content = sd_attention(branches, build_style_mask(ranked, 0), weights, heads=2)
all_style = sd_attention(branches, build_style_mask(ranked, C), weights, heads=2)
print("k=0 ignores the style branch; k=C ignores content preserve:",
      not np.array_equal(all_content, all_style))
