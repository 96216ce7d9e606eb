"""Input preparation: images, edge maps, and condition embeddings.

The preprocessing pipeline (background masking, square foreground crop,
resize to model resolution) records every applied operation into a
TransformRecord so the identical transform can be replayed onto the edge map
extracted from the raw image -- keeping both modalities spatially aligned,
which is what the variance-based channel ranking relies on.

The image embedder here is a deterministic reference (seeded patchify +
fixed linear projection); a production adapter would delegate to the host
model's own encoder. Edge extraction is pluggable by string id, with a
classical gradient-magnitude fallback registered as ``"sobel"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ConfigError, ContractViolationError

CONDITION_ORIGINS = ("content", "style", "edge", "null")

# foreground detection: luminance distance from the border-median background;
# the dilation must swallow whatever faint tail sits below the threshold so
# masking never cuts through live gradients
BG_LUMINANCE_THRESHOLD = 0.01
MASK_DILATION_PX = 4
CROP_MARGIN_PX = 4

_LUMA = np.array([0.2126, 0.7152, 0.0722])


@dataclass(frozen=True)
class ImageInput:
    """RGB image in [0, 1], [H, W, 3]."""

    pixels: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise ContractViolationError(f"image must be [H, W, 3], got {p.shape}")
        if p.shape[0] < 8 or p.shape[1] < 8:
            raise ContractViolationError(f"image too small: {p.shape[:2]}")
        if p.min() < 0 or p.max() > 1:
            raise ContractViolationError("pixel values must lie in [0, 1]")

    @property
    def size(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]


@dataclass(frozen=True)
class EdgeMap:
    """Single-channel edge-strength map in [0, 1], [H, W, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 1:
            raise ContractViolationError(f"edge map must be [H, W, 1], got {p.shape}")
        if p.min() < -1e-12 or p.max() > 1 + 1e-12:
            raise ContractViolationError("edge values must lie in [0, 1]")


@dataclass(frozen=True)
class ConditionEmbedding:
    """Token matrix [T, D] conditioning a generation branch."""

    tokens: np.ndarray
    origin: str

    def __post_init__(self):
        if self.tokens.ndim != 2 or self.tokens.shape[0] < 1:
            raise ContractViolationError(
                f"tokens must be [T>=1, D], got {self.tokens.shape}"
            )
        if not np.isfinite(self.tokens).all():
            raise ContractViolationError("non-finite condition tokens")
        if self.origin not in CONDITION_ORIGINS:
            raise ContractViolationError(f"unknown origin {self.origin!r}")


@dataclass
class TransformRecord:
    """Ordered, replayable log of the preprocessing operations."""

    input_size: tuple[int, int]
    ops: list[tuple[str, dict]] = field(default_factory=list)
    masks: dict[str, np.ndarray] = field(default_factory=dict)

    def apply(self, pixels: np.ndarray) -> np.ndarray:
        """Replay the recorded ops on [H, W, ch] pixels of the recorded size.

        Background masks multiply single-channel maps to zero and fill RGB
        images with the recorded background color; crops and resizes apply
        identically to both.
        """
        if pixels.shape[:2] != self.input_size:
            raise ContractViolationError(
                f"replay input size {pixels.shape[:2]} != recorded {self.input_size}"
            )
        out = pixels
        for name, params in self.ops:
            if name == "background_mask":
                mask = self.masks[params["mask_id"]][..., None]
                if out.shape[2] == 1:
                    out = out * mask
                else:
                    fill = np.asarray(params["fill"])
                    out = np.where(mask.astype(bool), out, fill)
            elif name == "crop":
                y0, x0, y1, x1 = params["box"]
                out = out[y0:y1, x0:x1]
            elif name == "resize":
                out = resize_bilinear(out, params["size"], params["size"])
            else:
                raise ContractViolationError(f"unknown transform op {name!r}")
        return out


def luminance(pixels: np.ndarray) -> np.ndarray:
    return pixels @ _LUMA


def resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel-center alignment; identity when sizes match."""
    h, w = pixels.shape[:2]
    if (h, w) == (out_h, out_w):
        return pixels.copy()
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    out = np.empty((out_h, out_w, pixels.shape[2]))
    for ch in range(pixels.shape[2]):
        out[..., ch] = ndimage.map_coordinates(
            pixels[..., ch], [grid_y, grid_x], order=1, mode="nearest"
        )
    return out


def _foreground_box(mask: np.ndarray, margin: int) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(mask)
    h, w = mask.shape
    y0 = max(int(ys.min()) - margin, 0)
    y1 = min(int(ys.max()) + 1 + margin, h)
    x0 = max(int(xs.min()) - margin, 0)
    x1 = min(int(xs.max()) + 1 + margin, w)
    side = min(max(y1 - y0, x1 - x0), min(h, w))
    cy, cx = (y0 + y1) // 2, (x0 + x1) // 2
    y0 = int(np.clip(cy - side // 2, 0, h - side))
    x0 = int(np.clip(cx - side // 2, 0, w - side))
    return y0, x0, y0 + side, x0 + side


def _center_box(h: int, w: int) -> tuple[int, int, int, int]:
    side = min(h, w)
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    return y0, x0, y0 + side, x0 + side


def preprocess(image: ImageInput, *, resolution: int,
               bg_threshold: float = BG_LUMINANCE_THRESHOLD) -> tuple[ImageInput, TransformRecord]:
    """Square-crop around the foreground and resize to the model resolution.

    Every applied operation is appended to the returned record in order, and
    the returned image is produced by replaying that record, so a second
    replay on a copy reproduces it bitwise. Images already square at the
    model resolution pass through with a single no-op resize entry. A
    degenerate (empty) foreground falls back to a center crop, recorded as
    such.
    """
    h, w = image.size
    record = TransformRecord(input_size=(h, w))
    if h == w == resolution:
        record.ops.append(("resize", {"size": resolution, "noop": True}))
        return ImageInput(image.pixels.copy(), image.source_id), record

    lum = luminance(image.pixels)
    border = np.concatenate([lum[0, :], lum[-1, :], lum[:, 0], lum[:, -1]])
    bg_lum = float(np.median(border))
    fg = np.abs(lum - bg_lum) > bg_threshold
    if fg.any():
        fg = ndimage.binary_dilation(fg, iterations=MASK_DILATION_PX)
        border_px = np.concatenate([
            image.pixels[0, :], image.pixels[-1, :],
            image.pixels[:, 0], image.pixels[:, -1],
        ])
        fill = np.median(border_px, axis=0)
        mask_id = "fg0"
        record.masks[mask_id] = fg
        record.ops.append(("background_mask", {"mask_id": mask_id, "fill": fill.tolist()}))
        box = _foreground_box(fg, CROP_MARGIN_PX)
        record.ops.append(("crop", {"box": list(box), "fallback": "foreground"}))
    else:
        box = _center_box(h, w)
        record.ops.append(("crop", {"box": list(box), "fallback": "center"}))
    record.ops.append(("resize", {"size": resolution}))
    out = np.clip(record.apply(image.pixels), 0.0, 1.0)
    return ImageInput(out, image.source_id), record


class PatchLinearEmbedder:
    """Deterministic reference embedder: patchify + fixed seeded projection."""

    def __init__(self, *, resolution: int, patch_size: int, embed_dim: int, seed: int = 101):
        if resolution % patch_size != 0:
            raise ContractViolationError(
                f"resolution {resolution} not divisible by patch size {patch_size}"
            )
        self.resolution = resolution
        self.patch_size = patch_size
        self.embed_dim = embed_dim
        self.seed = seed
        fan_in = 3 * patch_size * patch_size
        rng = np.random.default_rng(seed)
        self.w = rng.standard_normal((fan_in, embed_dim)) / np.sqrt(fan_in)

    @property
    def num_tokens(self) -> int:
        return (self.resolution // self.patch_size) ** 2

    def __call__(self, image: ImageInput, origin: str = "content") -> ConditionEmbedding:
        h, w = image.size
        if h != self.resolution or w != self.resolution:
            raise ContractViolationError(
                f"embedder expects a preprocessed {self.resolution}^2 image, got {h}x{w}"
            )
        p = self.patch_size
        g = self.resolution // p
        patches = (
            image.pixels.reshape(g, p, g, p, 3)
            .transpose(0, 2, 1, 3, 4)
            .reshape(g * g, 3 * p * p)
        )
        return ConditionEmbedding(tokens=patches @ self.w, origin=origin)


def embed_image(image: ImageInput, *, patch_size: int, embed_dim: int,
                seed: int = 101, origin: str = "content") -> ConditionEmbedding:
    """One-shot reference embedding of an already-preprocessed square image."""
    embedder = PatchLinearEmbedder(
        resolution=image.size[0], patch_size=patch_size, embed_dim=embed_dim, seed=seed
    )
    return embedder(image, origin)


def null_condition(embed_dim: int) -> ConditionEmbedding:
    """The learned-null (all-zeros) unconditional embedding."""
    return ConditionEmbedding(tokens=np.zeros((1, embed_dim)), origin="null")


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T.copy()

# peaks below this are float cancellation residue, not signal
_EDGE_EPS = 1e-12


def _sobel_edges(image: ImageInput) -> EdgeMap:
    lum = luminance(image.pixels)
    gx = ndimage.convolve(lum, _SOBEL_X, mode="nearest")
    gy = ndimage.convolve(lum, _SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak > _EDGE_EPS:
        mag = mag / peak
    else:
        mag = np.zeros_like(mag)
    return EdgeMap(pixels=mag[..., None])


EDGE_EXTRACTORS: dict[str, object] = {"sobel": _sobel_edges}


def register_edge_extractor(name: str, fn) -> None:
    EDGE_EXTRACTORS[name] = fn


def extract_edges(image: ImageInput, extractor: str = "sobel") -> EdgeMap:
    """Extract a normalized edge map with the registered extractor plugin."""
    if extractor not in EDGE_EXTRACTORS:
        raise ConfigError(
            f"unknown edge extractor {extractor!r}; registered: "
            f"{sorted(EDGE_EXTRACTORS)}"
        )
    return EDGE_EXTRACTORS[extractor](image)


def edge_map_to_image(edge: EdgeMap, source_id: str = "edges") -> ImageInput:
    """Replicate the single edge channel to RGB for the embedding interface."""
    return ImageInput(
        pixels=np.clip(np.repeat(edge.pixels, 3, axis=2), 0.0, 1.0),
        source_id=source_id,
    )


def load_image(path, source_id: str | None = None) -> ImageInput:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return ImageInput(pixels=arr, source_id=source_id or str(path))


def save_image(image: ImageInput, path) -> None:
    arr = np.clip(np.round(image.pixels * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)
