"""Walkthrough: installing the style machinery into a host backbone.

Any model that can enumerate its self-attention sites (with their original
QKV/output weights) and accept a processor per site can run the full style
pipeline. Here the toy backbone plays host; the counters then audit exactly
where cross-attention happened.
"""

import numpy as np

from sculpt import (
    RunAttentionContext,
    StagePlan,
    ToyBackbone,
    ToyBackboneConfig,
    install_hooks,
)
from sculpt.hooks import SiteCall

backbone = ToyBackbone(ToyBackboneConfig(grid_resolution=4, channels=16, heads=2,
                                         depth=2, condition_dim=24,
                                         image_resolution=32, patch_size=8))
print("host enumerates sites:", [s.site_id for s in backbone.attention_sites()])

context = RunAttentionContext(channels=backbone.channels, seed=0)
context.configure_stage("stage1", StagePlan(sd_attn_enabled=True, k=4))
registry = install_hooks(backbone, context,
                         expected_sites=backbone.declared_site_count())
print("bound", len(registry.site_ids), "sites exactly once")

# drive one attention site by hand through each branch of a step
site = backbone.attention_sites()[0]
rng = np.random.default_rng(0)
hidden_style = rng.standard_normal((10, 16))
hidden_edge = rng.standard_normal((10, 16))
hidden_content = rng.standard_normal((10, 16))

context.begin_step("stage1", 0)
processor = registry.processor
processor(site, hidden_style, SiteCall("stage1", 0, "style"))      # captures K/V source
processor(site, hidden_edge, SiteCall("stage1", 0, "edge"))        # captures variances
processor(site, hidden_content.copy(), SiteCall("stage1", 0, "cp"))
fused = processor(site, hidden_content, SiteCall("stage1", 0, "content"))
print("fused content attention:", fused.shape)

print("counters:", registry.counters.snapshot()[site.site_id])
print("splice displacement this call:",
      round(context.displacements["stage1"][0], 4))

# binding mistakes are hard errors
try:
    install_hooks(backbone, context, expected_sites=99)
except Exception as exc:
    print("site-count mismatch rejected:", type(exc).__name__)
