"""Deterministic synthetic test images.

Smooth cosine-squared bumps on a constant white background: compactly
supported, so the preprocessing crop always sees a flat border, and smooth
enough that edge extraction nearly commutes with resampling. Used by the
demos, the CLI examples, and the conditioning alignment tests.
"""

from __future__ import annotations

import numpy as np

from .conditioning import ImageInput


def bump_image(seed, *, size: tuple[int, int] = (128, 128), n_bumps: int = 3,
               radius: tuple[float, float] = (14.0, 26.0),
               amplitude: tuple[float, float] = (0.35, 0.9),
               margin: int = 34, source_id: str | None = None) -> ImageInput:
    """Random smooth bumps darkening a white canvas, kept inside ``margin``."""
    h, w = size
    seed_list = [seed] if isinstance(seed, int) else list(seed)
    rng = np.random.default_rng(seed_list + [2718])
    margin = min(margin, (min(h, w) - 4) // 3)
    r_hi = max(min(radius[1], margin), 3.0)
    r_lo = min(radius[0], r_hi)
    pixels = np.ones((h, w, 3))
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(n_bumps):
        cy = rng.uniform(margin, h - margin)
        cx = rng.uniform(margin, w - margin)
        rho = rng.uniform(r_lo, r_hi)
        amp = rng.uniform(*amplitude, size=3)
        dist = np.hypot(yy - cy, xx - cx)
        weight = np.where(dist < rho, np.cos(np.pi * dist / (2 * rho)) ** 2, 0.0)
        pixels -= weight[..., None] * amp[None, None, :]
    return ImageInput(pixels=np.clip(pixels, 0.0, 1.0),
                      source_id=source_id or f"bumps:{seed}")


def alignment_image(seed: int, *, resolution_hint: int = 64) -> ImageInput:
    """Synthetic input for the edge-alignment round-trip suite.

    Three bumps anchor the corners of the content region (plus one roaming
    bump), so the foreground bounding box always spans most of the frame and
    the crop-to-model rescale stays near unity; sharper rescales make the
    fixed-support gradient operator and the resampler disagree beyond the
    interpolation tolerance the alignment check budgets for.
    """
    seed_list = [seed] if isinstance(seed, int) else list(seed)
    rng = np.random.default_rng(seed_list + [3141])
    side = resolution_hint + 1 + int(rng.integers(0, 4))
    margin = 20
    pixels = np.ones((side, side, 3))
    yy, xx = np.mgrid[0:side, 0:side]
    far = side - margin
    # two gentle bumps on disjoint supports at opposite corners: overlaps
    # would create gradient-cancellation saddles whose magnitude cusps do
    # not survive resampling, and the full-diagonal footprint keeps the
    # crop-to-model rescale near unity
    for cy, cx in ((margin, margin), (far, far)):
        rho = rng.uniform(12.0, 14.0)
        amp = rng.uniform(0.3, 0.6, size=3)
        dist = np.hypot(yy - (cy + rng.uniform(-2, 2)), xx - (cx + rng.uniform(-2, 2)))
        weight = np.where(dist < rho, np.cos(np.pi * dist / (2 * rho)) ** 2, 0.0)
        pixels -= weight[..., None] * amp[None, None, :]
    return ImageInput(pixels=np.clip(pixels, 0.0, 1.0), source_id=f"align:{seed}")


def content_image(seed: int = 0, size: int = 128) -> ImageInput:
    """A content-like subject: few large, mostly neutral shapes."""
    return bump_image([seed, 1], size=(size, size), n_bumps=3,
                      radius=(18.0, 26.0), amplitude=(0.4, 0.7),
                      source_id=f"content:{seed}")


def style_image(seed: int = 0, size: int = 128) -> ImageInput:
    """A style-like reference: more, smaller, strongly colored shapes."""
    return bump_image([seed, 2], size=(size, size), n_bumps=6,
                      radius=(10.0, 16.0), amplitude=(0.5, 0.95),
                      source_id=f"style:{seed}")
