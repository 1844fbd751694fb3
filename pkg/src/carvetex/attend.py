"""Spatially decoupled cross-attention, in plain numpy.

A hidden feature map (C, W, H) is split into positive and negative channel
halves, each half replicated once per guidance view:
channels [f x N | b x N], shape (C*N, W, H).  Guidance tokens stack the
same way into (C*N, F).  Attention then runs independently per channel
group: group i's spatial tokens attend only to guidance block i, so view
j's tokens can influence nothing outside group j (for either half).
Aggregation reads each view's groups back only inside that view's canvas
rectangle, which is what confines every view's guidance to its own region
of the output.

All operations are pure functions; no projection biases, heads, or
normalization layers, so the locality property is exact rather than
approximate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "AttentionWeights",
    "RegionLayout",
    "replicate_hidden",
    "assemble_guidance",
    "decoupled_cross_attention",
    "aggregate_regions",
    "cross_attention",
    "decoupled_pass",
]


def _check_hidden(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 3:
        raise InvalidArgumentError("hidden features must be (C, W, H)")
    if h.shape[0] % 2 != 0:
        raise InvalidArgumentError("channel count must be even")
    if not np.isfinite(h).all():
        raise InvalidArgumentError("hidden features must be finite")
    return h


@dataclass(frozen=True)
class AttentionWeights:
    """Square query/key/value projections over the half-channel dimension."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray

    def __post_init__(self):
        for name in ("wq", "wk", "wv"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise InvalidArgumentError(f"{name} must be square")
            if m.shape != np.asarray(self.wq).shape:
                raise InvalidArgumentError("projection shapes must agree")
            if not np.isfinite(m).all():
                raise InvalidArgumentError(f"{name} must be finite")
            object.__setattr__(self, name, m)

    @property
    def dim(self) -> int:
        return self.wq.shape[0]

    @classmethod
    def seeded(cls, dim: int, seed: int = 0) -> "AttentionWeights":
        """Gaussian projections scaled by 1/sqrt(dim), reproducible by seed."""
        if dim < 1:
            raise InvalidArgumentError("dim must be >= 1")
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(dim)
        return cls(
            wq=rng.normal(size=(dim, dim)) * scale,
            wk=rng.normal(size=(dim, dim)) * scale,
            wv=rng.normal(size=(dim, dim)) * scale,
        )


@dataclass(frozen=True)
class RegionLayout:
    """Axis-aligned rectangles (x0, y0, w, h), one per view, tiling the canvas."""

    width: int
    height: int
    rects: tuple[tuple[int, int, int, int], ...]

    def __post_init__(self):
        covered = np.zeros((self.height, self.width), dtype=np.int64)
        for x0, y0, w, h in self.rects:
            if w <= 0 or h <= 0 or x0 < 0 or y0 < 0 or x0 + w > self.width or y0 + h > self.height:
                raise InvalidArgumentError("rectangle out of canvas bounds")
            covered[y0 : y0 + h, x0 : x0 + w] += 1
        if (covered != 1).any():
            raise InvalidArgumentError("rectangles must tile the canvas exactly")

    @property
    def n_views(self) -> int:
        return len(self.rects)

    @classmethod
    def grid(cls, n_views: int, width: int, height: int) -> "RegionLayout":
        """Default layout: one full-canvas rect for N=1, else two rows of
        ceil(N/2) and floor(N/2) rectangles."""
        if n_views < 1:
            raise InvalidArgumentError("n_views must be >= 1")
        if n_views == 1:
            return cls(width, height, ((0, 0, width, height),))
        top = (n_views + 1) // 2
        bottom = n_views - top
        h_top = height // 2
        rects = []
        for row, count, y0, h in ((0, top, 0, h_top), (1, bottom, h_top, height - h_top)):
            if count == 0:
                continue
            edges = [round(i * width / count) for i in range(count + 1)]
            for i in range(count):
                rects.append((edges[i], y0, edges[i + 1] - edges[i], h))
        return cls(width, height, tuple(rects))


def replicate_hidden(h: np.ndarray, n_views: int) -> np.ndarray:
    """Stack N copies of each channel half: [f x N | b x N], (C*N, W, H)."""
    h = _check_hidden(h)
    if n_views < 1:
        raise InvalidArgumentError("n_views must be >= 1")
    half = h.shape[0] // 2
    f, b = h[:half], h[half:]
    return np.concatenate([np.tile(f, (n_views, 1, 1)), np.tile(b, (n_views, 1, 1))])


def assemble_guidance(views: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Stack per-view guidance (g_f, g_b), each (C/2, F), into (C*N, F)."""
    if not views:
        raise InvalidArgumentError("need at least one guidance view")
    fs, bs = [], []
    shape = None
    for g_f, g_b in views:
        g_f = np.asarray(g_f, dtype=np.float64)
        g_b = np.asarray(g_b, dtype=np.float64)
        for g in (g_f, g_b):
            if g.ndim != 2:
                raise InvalidArgumentError("guidance blocks must be (C/2, F)")
            if shape is None:
                shape = g.shape
            elif g.shape != shape:
                raise InvalidArgumentError("all guidance blocks must share (C/2, F)")
            if not np.isfinite(g).all():
                raise InvalidArgumentError("guidance must be finite")
        fs.append(g_f)
        bs.append(g_b)
    return np.concatenate(fs + bs)


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_attention(tokens: np.ndarray, guidance: np.ndarray, weights: AttentionWeights) -> np.ndarray:
    """Plain scaled dot-product attention: tokens (T, D) query guidance (F, D)."""
    tokens = np.asarray(tokens, dtype=np.float64)
    guidance = np.asarray(guidance, dtype=np.float64)
    d = weights.dim
    if tokens.shape[1] != d or guidance.shape[1] != d:
        raise InvalidArgumentError("token dimension must match projections")
    q = tokens @ weights.wq
    k = guidance @ weights.wk
    v = guidance @ weights.wv
    return _softmax(q @ k.T / np.sqrt(d)) @ v


def decoupled_cross_attention(
    h_rep: np.ndarray, guidance: np.ndarray, weights: AttentionWeights
) -> np.ndarray:
    """Attend each channel group to its own guidance block.

    `h_rep` is (C*N, W, H) from replicate_hidden, `guidance` (C*N, F) from
    assemble_guidance with the same block layout; the output keeps the
    input shape with group g's spatial tokens attending only to guidance
    block g.
    """
    h_rep = np.asarray(h_rep, dtype=np.float64)
    guidance = np.asarray(guidance, dtype=np.float64)
    if h_rep.ndim != 3:
        raise InvalidArgumentError("replicated hidden must be (C*N, W, H)")
    if guidance.ndim != 2:
        raise InvalidArgumentError("guidance must be (C*N, F)")
    d = weights.dim
    cn, w, h = h_rep.shape
    if cn % (2 * d) != 0:
        raise InvalidArgumentError("channel count must be a multiple of 2*(C/2)")
    if guidance.shape[0] != cn:
        raise InvalidArgumentError("hidden and guidance block layouts disagree")
    groups = cn // d
    out = np.empty_like(h_rep)
    for g in range(groups):
        rows = slice(g * d, (g + 1) * d)
        tokens = h_rep[rows].reshape(d, w * h).T
        block = guidance[rows].T
        z = cross_attention(tokens, block, weights)
        out[rows] = z.T.reshape(d, w, h)
    assert out.shape == h_rep.shape
    return out


def aggregate_regions(z: np.ndarray, layout: RegionLayout) -> np.ndarray:
    """Collapse (C*N, W, H) to (C, W, H): rectangle i reads view i's groups."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 3:
        raise InvalidArgumentError("attention output must be (C*N, W, H)")
    cn, w, h = z.shape
    n = layout.n_views
    if cn % (2 * n) != 0:
        raise InvalidArgumentError("channels do not divide into 2N blocks")
    half = cn // (2 * n)
    if (w, h) != (layout.width, layout.height):
        raise InvalidArgumentError("layout canvas does not match feature size")
    out = np.zeros((2 * half, w, h))
    for i, (x0, y0, rw, rh) in enumerate(layout.rects):
        xs = slice(x0, x0 + rw)
        ys = slice(y0, y0 + rh)
        # Spatial axes are (W, H): x first, y second.
        out[:half, xs, ys] = z[i * half : (i + 1) * half, xs, ys]
        out[half:, xs, ys] = z[(n + i) * half : (n + i + 1) * half, xs, ys]
    return out


def decoupled_pass(
    h: np.ndarray,
    guidance_views: list[tuple[np.ndarray, np.ndarray]],
    layout: RegionLayout | None = None,
    weights: AttentionWeights | None = None,
) -> np.ndarray:
    """replicate -> assemble -> attend -> aggregate, composed."""
    h = _check_hidden(h)
    n = len(guidance_views)
    if n < 1:
        raise InvalidArgumentError("need at least one guidance view")
    c, w, hh = h.shape
    if layout is None:
        layout = RegionLayout.grid(n, w, hh)
    if layout.n_views != n:
        raise InvalidArgumentError("layout view count must match guidance")
    if weights is None:
        weights = AttentionWeights.seeded(c // 2)
    if weights.dim != c // 2:
        raise InvalidArgumentError("projection dimension must be C/2")
    h_rep = replicate_hidden(h, n)
    g = assemble_guidance(guidance_views)
    if g.shape[0] != h_rep.shape[0]:
        raise InvalidArgumentError("guidance dimension C/2 must match hidden")
    z = decoupled_cross_attention(h_rep, g, weights)
    return aggregate_regions(z, layout)
