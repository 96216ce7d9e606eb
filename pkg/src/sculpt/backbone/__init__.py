from .latents import (
    DenseLatent,
    SparseLatent,
    TimeSchedule,
    flatten_coords,
    grid_coordinates,
)
from .model import VelocityModel, position_embedding, sinusoidal_time_embedding
from .sampler import (
    OccupancyReadout,
    cfg_velocity,
    decode_sparse_structure,
    euler_step,
    sample_stage1,
    sample_stage2,
)
from .toy import ColorReadout, ToyBackbone, ToyBackboneConfig
from .weights_io import load_weights, save_weights

__all__ = [
    "ColorReadout",
    "DenseLatent",
    "OccupancyReadout",
    "SparseLatent",
    "TimeSchedule",
    "ToyBackbone",
    "ToyBackboneConfig",
    "VelocityModel",
    "cfg_velocity",
    "decode_sparse_structure",
    "euler_step",
    "flatten_coords",
    "grid_coordinates",
    "load_weights",
    "position_embedding",
    "sample_stage1",
    "sample_stage2",
    "save_weights",
    "sinusoidal_time_embedding",
]
