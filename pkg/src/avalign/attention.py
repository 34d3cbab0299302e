"""Cross-modal attention over image patches and the box-consistency loss.

A single-head block attends audio tokens over image patches, produces
residual-updated embeddings for both modalities plus a spatial attention
map, and the consistency loss pushes that map's mass inside a rasterized
ground-truth box while draining everything outside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from avalign import tensor as T
from avalign.tensor import Tensor
from avalign.codec import BoundingBox

__all__ = [
    "CrossAttentionBlock",
    "AttentionMap",
    "BoxMask",
    "AvaceConfig",
    "cross_attend",
    "rasterize_mask",
    "attention_consistency_loss",
    "minmax_normalize",
]


@dataclass(frozen=True)
class AvaceConfig:
    """Loss weights and stability epsilons for the consistency objective.

    The epsilons only guard empty masks; 1e-9 keeps the closed-form anchor
    values (0, 1, and the 2x2 worked case) accurate to 1e-9.
    """

    lambda1: float = 0.5
    lambda2: float = 0.5
    eps1: float = 1e-9
    eps2: float = 1e-9

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda weights must be non-negative")
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ValueError("epsilons must be positive")


@dataclass(frozen=True)
class AttentionMap:
    """Spatial attention grid normalized to [0, 1] (all zero if constant)."""

    grid: Tensor

    def __post_init__(self):
        g = self.grid.data
        if self.grid.ndim != 2:
            raise ValueError("attention map must be 2-D")
        if g.min() < -1e-12 or g.max() > 1.0 + 1e-12:
            raise ValueError("attention values must lie in [0, 1]")


@dataclass(frozen=True)
class BoxMask:
    """Binary grid whose 1-cells form an axis-aligned rectangle (or nothing)."""

    grid: Tensor

    def __post_init__(self):
        g = self.grid.data
        if self.grid.ndim != 2:
            raise ValueError("mask must be 2-D")
        if not np.all((g == 0.0) | (g == 1.0)):
            raise ValueError("mask must be binary")
        rows = np.flatnonzero(g.any(axis=1))
        cols = np.flatnonzero(g.any(axis=0))
        if rows.size:
            block = g[rows.min(): rows.max() + 1, cols.min(): cols.max() + 1]
            if not np.all(block == 1.0):
                raise ValueError("mask 1-cells must form a solid rectangle")

    @property
    def is_empty(self) -> bool:
        return not bool(self.grid.data.any())


class CrossAttentionBlock:
    """Single-head projections shared by both attention directions.

    Holds query/key/value maps (model width to attention width) and output
    projections back to the image and audio widths. Parameters live as
    plain arrays; ``taped()`` lifts them onto a tape for training.
    """

    FIELDS = ("w_query", "w_key", "w_value", "w_out_image", "w_out_audio")

    def __init__(self, w_query, w_key, w_value, w_out_image, w_out_audio):
        self.w_query = T.as_tensor(w_query)
        self.w_key = T.as_tensor(w_key)
        self.w_value = T.as_tensor(w_value)
        self.w_out_image = T.as_tensor(w_out_image)
        self.w_out_audio = T.as_tensor(w_out_audio)
        d_attn = self.w_query.shape[1]
        if d_attn < 1:
            raise ValueError("attention width must be >= 1")
        for name in ("w_key", "w_value"):
            if getattr(self, name).shape != self.w_query.shape:
                raise ValueError("query/key/value projections must share shape")

    @classmethod
    def initialized(cls, dim: int, d_attn: int, rng: np.random.Generator,
                    scale: float = 0.3) -> "CrossAttentionBlock":
        """Near-identity init so aligned embedding spaces score high at start."""
        def eye_ish(rows, cols):
            base = np.eye(rows, cols)
            return base + scale * rng.normal(size=(rows, cols)) / math.sqrt(rows)

        return cls(
            eye_ish(dim, d_attn),
            eye_ish(dim, d_attn),
            eye_ish(dim, d_attn),
            eye_ish(d_attn, dim) * scale,
            eye_ish(d_attn, dim) * scale,
        )


def minmax_normalize(raw: Tensor) -> Tensor:
    """Rescale to [0, 1]; a constant input maps to all zeros."""
    lo = T.tmin(raw)
    hi = T.tmax(raw)
    span = hi.item() - lo.item()
    if span == 0.0:
        return T.mul(raw, 0.0)
    return T.div(T.sub(raw, lo), T.sub(hi, lo))


def cross_attend(
    z_img: Tensor,
    z_aud: Tensor,
    block: CrossAttentionBlock,
    grid_hw: tuple[int, int],
):
    """Single-head cross-attention between patch and token embeddings.

    The audio query is the mean of the projected audio tokens; its scaled
    dot products with the image keys give raw per-patch scores whose
    min-max normalization is the attention map. Image patches receive an
    attention-weighted residual of the pooled audio value; audio tokens
    receive a residual of their own attention over image values.

    Returns ``(z_img_updated, z_aud_updated, AttentionMap)``.
    """
    h, w = grid_hw
    s_img = z_img.shape[0]
    if h * w != s_img:
        raise ValueError(f"grid {h}x{w} does not factor patch count {s_img}")
    d_attn = block.w_query.shape[1]
    scale = 1.0 / math.sqrt(d_attn)

    q_aud = T.tmean(T.matmul(z_aud, block.w_query), axis=0, keepdims=True)
    k_img = T.matmul(z_img, block.w_key)
    raw = T.mul(T.matmul(k_img, T.transpose(q_aud)), scale)
    attn = minmax_normalize(T.reshape(raw, (h, w)))

    v_aud = T.tmean(T.matmul(z_aud, block.w_value), axis=0, keepdims=True)
    audio_ctx = T.matmul(v_aud, block.w_out_image)
    z_img_new = T.add(z_img, T.matmul(T.reshape(attn, (s_img, 1)), audio_ctx))

    q_tok = T.matmul(z_aud, block.w_query)
    scores = T.mul(T.matmul(q_tok, T.transpose(k_img)), scale)
    weights = T.softmax(scores, axis=1)
    v_img = T.matmul(z_img, block.w_value)
    z_aud_new = T.add(z_aud, T.matmul(T.matmul(weights, v_img), block.w_out_audio))

    return z_img_new, z_aud_new, AttentionMap(attn)


def rasterize_mask(box: BoundingBox, grid_hw: tuple[int, int]) -> BoxMask:
    """Mask cell (i, j) is 1 iff the cell's center lies inside the box."""
    h, w = grid_hw
    ys = (np.arange(h) + 0.5) / h
    xs = (np.arange(w) + 0.5) / w
    inside_y = (ys >= box.y_top) & (ys <= box.y_bottom)
    inside_x = (xs >= box.x_left) & (xs <= box.x_right)
    grid = (inside_y[:, None] & inside_x[None, :]).astype(np.float64)
    return BoxMask(Tensor(grid))


def attention_consistency_loss(
    attn: AttentionMap | Tensor,
    mask: BoxMask | Tensor,
    cfg: AvaceConfig = AvaceConfig(),
) -> Tensor:
    """Weighted in-box shortfall plus out-of-box leakage of attention mass.

    loss = l1 * (1 - sum(M*A) / (sum(M) + e1))
         + l2 * (sum((1-M)*A) / (sum(1-M) + e2))

    Differentiable in the attention values; the mask is a constant.
    """
    a = attn.grid if isinstance(attn, AttentionMap) else attn
    m = (mask.grid if isinstance(mask, BoxMask) else mask).data
    if a.shape != m.shape:
        raise ValueError(f"attention {a.shape} and mask {m.shape} differ in shape")
    m_t = Tensor(m)
    inv_t = Tensor(1.0 - m)
    inside = T.div(T.tsum(T.mul(m_t, a)), float(m.sum()) + cfg.eps1)
    outside = T.div(T.tsum(T.mul(inv_t, a)), float((1.0 - m).sum()) + cfg.eps2)
    return T.add(
        T.mul(T.sub(Tensor(1.0), inside), cfg.lambda1),
        T.mul(outside, cfg.lambda2),
    )
