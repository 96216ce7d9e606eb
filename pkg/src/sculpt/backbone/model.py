"""Desk-scale flow transformer predicting the denoising velocity field.

Pre-LN transformer over latent tokens. Each block holds one pluggable
self-attention site (where style guidance hooks in), a cross-attention to
the condition tokens, and an FFN; the latter two are never touched by the
hook machinery. Conditioning uses a single projected token set; time enters
as a sinusoidal embedding through a two-layer MLP; 3D positions enter as
fixed per-axis sinusoids. All weights come from one seeded generator in a
fixed draw order, so a model is fully reproducible from (seed, hyperparams).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from ..errors import ConfigError, ContractViolationError, NumericError
from ..attention import AttentionTensors, SiteWeights
from ..hooks import AttentionSite, SelfAttnProcessor, SiteCall

FFN_MULT = 4
_LN_EPS = 1e-6

# the model computes in single precision; kernels stay dtype-generic
MODEL_DTYPE = np.float32


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + _LN_EPS)


_INV_SQRT2 = float(1.0 / np.sqrt(2.0))


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def sinusoidal_time_embedding(t: float, dim: int) -> np.ndarray:
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = t * freqs
    emb = np.concatenate([np.cos(angles), np.sin(angles)])
    if emb.shape[0] < dim:
        emb = np.concatenate([emb, np.zeros(dim - emb.shape[0])])
    return emb


def position_embedding(positions: np.ndarray, dim: int) -> np.ndarray:
    """Fixed sinusoids over normalized [0, 1] xyz positions, [N, dim]."""
    n_freq = dim // 6
    if n_freq == 0:
        raise ContractViolationError(f"channel dim {dim} too small for 3D sinusoids")
    freqs = np.pi * (2.0 ** np.arange(n_freq))
    angles = positions[:, :, None] * freqs[None, None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=2).reshape(
        positions.shape[0], 6 * n_freq
    )
    if emb.shape[1] < dim:
        emb = np.concatenate(
            [emb, np.zeros((positions.shape[0], dim - emb.shape[1]))], axis=1
        )
    return emb


@dataclass
class _Block:
    site: AttentionSite
    cross_wq: np.ndarray
    cross_wk: np.ndarray
    cross_wv: np.ndarray
    cross_wo: np.ndarray
    ffn_w1: np.ndarray
    ffn_b1: np.ndarray
    ffn_w2: np.ndarray
    ffn_b2: np.ndarray


class VelocityModel:
    """Seeded toy transformer; the substrate every guidance hook operates on."""

    def __init__(self, *, depth: int, channels: int, heads: int, condition_dim: int,
                 seed, init_scale: float = 1.0, site_prefix: str = "block",
                 site_names: list[str] | None = None):
        if channels % heads != 0:
            raise ContractViolationError(
                f"channels {channels} not divisible by heads {heads}"
            )
        if site_names is not None and (
            len(site_names) != depth or len(set(site_names)) != depth
        ):
            raise ConfigError("site_names must give one unique name per block")
        self.depth = depth
        self.channels = channels
        self.heads = heads
        self.condition_dim = condition_dim
        self.seed = seed
        self.init_scale = init_scale
        self.site_prefix = site_prefix
        self.site_names = site_names
        self._params = self._draw_params(np.random.default_rng(seed))
        self.blocks = self._build_blocks()
        self._processors = {
            b.site.site_id: SelfAttnProcessor() for b in self.blocks
        }

    # -- parameters -------------------------------------------------------

    def _draw_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        c, d, s = self.channels, self.condition_dim, self.init_scale

        def w(fan_in: int, *shape: int) -> np.ndarray:
            return (s * rng.standard_normal(shape) / np.sqrt(fan_in)).astype(MODEL_DTYPE)

        zeros = lambda n: np.zeros(n, dtype=MODEL_DTYPE)
        params: dict[str, np.ndarray] = {
            "input.w": w(c, c, c),
            "cond.w": w(d, d, c),
            "time.w1": w(c, c, c),
            "time.b1": zeros(c),
            "time.w2": w(c, c, c),
            "time.b2": zeros(c),
        }
        h = FFN_MULT * c
        for i in range(self.depth):
            p = f"{self.site_prefix}{i}"
            for name in ("attn.wq", "attn.wk", "attn.wv", "attn.wo"):
                params[f"{p}.{name}"] = w(c, c, c)
            for name in ("cross.wq", "cross.wk", "cross.wv", "cross.wo"):
                params[f"{p}.{name}"] = w(c, c, c)
            params[f"{p}.ffn.w1"] = w(c, c, h)
            params[f"{p}.ffn.b1"] = zeros(h)
            params[f"{p}.ffn.w2"] = w(h, h, c)
            params[f"{p}.ffn.b2"] = zeros(c)
        params["out.w"] = w(c, c, c)
        return params

    def _build_blocks(self) -> list[_Block]:
        blocks = []
        for i in range(self.depth):
            p = f"{self.site_prefix}{i}"
            g = self._params
            site = AttentionSite(
                site_id=self.site_names[i] if self.site_names else f"{p}.attn",
                weights=SiteWeights(
                    w_q=g[f"{p}.attn.wq"], w_k=g[f"{p}.attn.wk"], w_v=g[f"{p}.attn.wv"]
                ),
                w_out=g[f"{p}.attn.wo"],
                heads=self.heads,
            )
            blocks.append(_Block(
                site=site,
                cross_wq=g[f"{p}.cross.wq"], cross_wk=g[f"{p}.cross.wk"],
                cross_wv=g[f"{p}.cross.wv"], cross_wo=g[f"{p}.cross.wo"],
                ffn_w1=g[f"{p}.ffn.w1"], ffn_b1=g[f"{p}.ffn.b1"],
                ffn_w2=g[f"{p}.ffn.w2"], ffn_b2=g[f"{p}.ffn.b2"],
            ))
        return blocks

    def param_dict(self) -> dict[str, np.ndarray]:
        return dict(self._params)

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        if set(params) != set(self._params):
            missing = sorted(set(self._params) - set(params))
            extra = sorted(set(params) - set(self._params))
            raise ConfigError(f"parameter name mismatch: missing={missing}, extra={extra}")
        for name, value in params.items():
            if value.shape != self._params[name].shape:
                raise ConfigError(
                    f"parameter {name} shape {value.shape} != expected "
                    f"{self._params[name].shape}"
                )
            self._params[name] = np.asarray(value, dtype=MODEL_DTYPE)
        self.blocks = self._build_blocks()

    # -- host surface -------------------------------------------------------

    def attention_sites(self) -> list[AttentionSite]:
        return [b.site for b in self.blocks]

    def set_processor(self, site_id: str, processor) -> None:
        if site_id not in self._processors:
            raise ConfigError(f"unknown attention site {site_id!r}")
        self._processors[site_id] = processor

    def get_processor(self, site_id: str):
        if site_id not in self._processors:
            raise ConfigError(f"unknown attention site {site_id!r}")
        return self._processors[site_id]

    def reset_processors(self) -> None:
        for sid in self._processors:
            self._processors[sid] = SelfAttnProcessor()

    # -- forward --------------------------------------------------------------

    def _cross_to_condition(self, block: _Block, x: np.ndarray, cond_h: np.ndarray) -> np.ndarray:
        t = AttentionTensors(
            q=x @ block.cross_wq,
            k=cond_h @ block.cross_wk,
            v=cond_h @ block.cross_wv,
            heads=self.heads,
        )
        from ..attention import _headed_attention

        return _headed_attention(t.q, t.k, t.v, t.heads) @ block.cross_wo

    def velocity(self, features: np.ndarray, positions: np.ndarray,
                 cond_tokens: np.ndarray, t: float, call: SiteCall,
                 processor=None) -> np.ndarray:
        """Predict the velocity for [N, C] tokens at normalized [0,1]^3 positions.

        ``processor`` overrides the per-site installed processors when given
        (used by the standalone samplers); otherwise each site dispatches to
        whatever was installed on it.
        """
        if features.shape[1] != self.channels:
            raise ContractViolationError(
                f"features have {features.shape[1]} channels, model has {self.channels}"
            )
        if cond_tokens.ndim != 2 or cond_tokens.shape[1] != self.condition_dim:
            raise ContractViolationError(
                f"condition tokens must be [T, {self.condition_dim}], got {cond_tokens.shape}"
            )
        g = self._params
        features = np.ascontiguousarray(features, dtype=MODEL_DTYPE)
        cond_h = np.ascontiguousarray(cond_tokens, dtype=MODEL_DTYPE) @ g["cond.w"]
        time_emb = sinusoidal_time_embedding(t, self.channels).astype(MODEL_DTYPE)
        time_h = _gelu(time_emb @ g["time.w1"] + g["time.b1"]) @ g["time.w2"] + g["time.b2"]
        h = features @ g["input.w"]
        h = h + position_embedding(positions, self.channels).astype(MODEL_DTYPE)
        h = h + time_h[None, :]
        for block in self.blocks:
            x = _layer_norm(h)
            proc = processor if processor is not None else self._processors[block.site.site_id]
            attn = proc(block.site, x, call)
            h = h + attn @ block.site.w_out
            x = _layer_norm(h)
            h = h + self._cross_to_condition(block, x, cond_h)
            x = _layer_norm(h)
            h = h + _gelu(x @ block.ffn_w1 + block.ffn_b1) @ block.ffn_w2 + block.ffn_b2
        v = _layer_norm(h) @ g["out.w"]
        if not np.isfinite(v).all():
            raise NumericError("model produced non-finite velocity")
        return v
