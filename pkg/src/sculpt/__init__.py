"""sculpt: zero-shot style-guided 3D generation toolkit.

Backbone-agnostic attention-injection machinery (cross-branch attention,
variance-ranked channel masks, content preservation, guidance control) plus
a desk-scale two-stage rectified-flow reference backbone on which every
algorithm is exactly verifiable, and a hook protocol for installing the same
machinery into other 3D generative hosts.
"""

from .attention import (
    AttentionTensors,
    SiteWeights,
    cross_3d_attention,
    qkv_project,
    self_attention,
)
from .backbone import (
    DenseLatent,
    SparseLatent,
    TimeSchedule,
    ToyBackbone,
    ToyBackboneConfig,
    VelocityModel,
    cfg_velocity,
    decode_sparse_structure,
    euler_step,
    sample_stage1,
    sample_stage2,
)
from .conditioning import (
    ConditionEmbedding,
    EdgeMap,
    ImageInput,
    PatchLinearEmbedder,
    TransformRecord,
    embed_image,
    extract_edges,
    load_image,
    null_condition,
    preprocess,
    register_edge_extractor,
    save_image,
)
from .errors import (
    ConfigError,
    ContractViolationError,
    NumericError,
    PipelineError,
    SculptError,
)
from .hooks import (
    AttentionCounters,
    AttentionSite,
    HookRegistry,
    RunAttentionContext,
    SelfAttnProcessor,
    SiteCall,
    StagePlan,
    StyleGuidedProcessor,
    install_hooks,
)
from .insight import validate_insight
from .pipeline import (
    AssetExport,
    RunConfig,
    build_backbone,
    export_asset,
    register_backbone,
    run_plain_backbone,
    run_style_guided,
)
from .sdfs import (
    BranchFeatures,
    ChannelMask,
    build_style_mask,
    channel_variance,
    content_preserve_copy,
    edge_filter_variances,
    sd_attention,
)
from .sgc import (
    GuidanceConfig,
    GuidancePlan,
    PassPlan,
    geometry_only_pipeline,
    intensity_sweep,
    resolve_stage_plan,
)

__version__ = "0.1.0"
