import numpy as np
import pytest

from sculpt import synthetic
from sculpt.backbone import ToyBackbone, ToyBackboneConfig
from sculpt.conditioning import save_image
from sculpt.pipeline import RunConfig
from sculpt.sgc import GuidanceConfig

# small backbone for unit tests; the acceptance suite uses the real defaults
SMALL = ToyBackboneConfig(
    grid_resolution=4, channels=16, heads=2, depth=2, condition_dim=24,
    image_resolution=32, patch_size=8, weights_seed=5,
)


@pytest.fixture(scope="session")
def small_backbone():
    return ToyBackbone(SMALL)


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("images")
    save_image(synthetic.content_image(0), d / "content.png")
    save_image(synthetic.style_image(0), d / "style.png")
    save_image(synthetic.style_image(1), d / "style2.png")
    return d


@pytest.fixture
def small_config(image_dir):
    return RunConfig(
        guidance=GuidanceConfig(mode="dual", steps_stage1=3, steps_stage2=3, seed=0),
        backbone={"kind": "toy", **SMALL.__dict__},
        content_image=str(image_dir / "content.png"),
        style_images=(str(image_dir / "style.png"),),
    )


def rng(seed=0):
    return np.random.default_rng(seed)
