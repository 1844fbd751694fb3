"""Decoupled cross-attention: replication, block attention, region aggregation."""

from __future__ import annotations

import math

import numpy as np
import pytest

from carvetex import InvalidArgumentError, decoupled_pass
from carvetex.attend import (
    AttentionWeights,
    RegionLayout,
    aggregate_regions,
    assemble_guidance,
    cross_attention,
    decoupled_cross_attention,
    replicate_hidden,
)


def make_views(rng, n, half, f):
    return [
        (rng.normal(size=(half, f)), rng.normal(size=(half, f))) for _ in range(n)
    ]


def test_attention_weights_validation():
    eye = np.eye(3)
    with pytest.raises(InvalidArgumentError):
        AttentionWeights(wq=np.ones((2, 3)), wk=eye, wv=eye)
    with pytest.raises(InvalidArgumentError):
        AttentionWeights(wq=eye, wk=np.eye(2), wv=eye)
    bad = eye.copy()
    bad[0, 0] = np.nan
    with pytest.raises(InvalidArgumentError):
        AttentionWeights(wq=eye, wk=bad, wv=eye)
    w = AttentionWeights(wq=eye, wk=eye, wv=eye)
    assert w.dim == 3


def test_attention_weights_seeded_reproducible():
    a = AttentionWeights.seeded(4, seed=11)
    b = AttentionWeights.seeded(4, seed=11)
    c = AttentionWeights.seeded(4, seed=12)
    assert np.array_equal(a.wq, b.wq)
    assert np.array_equal(a.wk, b.wk)
    assert np.array_equal(a.wv, b.wv)
    assert not np.array_equal(a.wq, c.wq)
    with pytest.raises(InvalidArgumentError):
        AttentionWeights.seeded(0)


def test_region_layout_must_tile_exactly():
    RegionLayout(4, 4, ((0, 0, 2, 4), (2, 0, 2, 4)))
    with pytest.raises(InvalidArgumentError):
        RegionLayout(4, 4, ((0, 0, 3, 4), (2, 0, 2, 4)))  # overlap
    with pytest.raises(InvalidArgumentError):
        RegionLayout(4, 4, ((0, 0, 1, 4), (2, 0, 2, 4)))  # gap
    with pytest.raises(InvalidArgumentError):
        RegionLayout(4, 4, ((0, 0, 2, 4), (2, 0, 3, 4)))  # out of bounds
    with pytest.raises(InvalidArgumentError):
        RegionLayout(4, 4, ((0, 0, 0, 4), (0, 0, 4, 4)))  # empty rect


def test_region_layout_grid():
    one = RegionLayout.grid(1, 16, 12)
    assert one.rects == ((0, 0, 16, 12),)
    four = RegionLayout.grid(4, 16, 16)
    assert four.rects == (
        (0, 0, 8, 8),
        (8, 0, 8, 8),
        (0, 8, 8, 8),
        (8, 8, 8, 8),
    )
    three = RegionLayout.grid(3, 10, 6)
    assert three.rects == ((0, 0, 5, 3), (5, 0, 5, 3), (0, 3, 10, 3))
    five = RegionLayout.grid(5, 16, 16)
    assert five.n_views == 5
    widths = [r[2] for r in five.rects[:3]]
    assert sum(widths) == 16
    with pytest.raises(InvalidArgumentError):
        RegionLayout.grid(0, 8, 8)


def test_replicate_hidden_block_layout():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(4, 2, 2))
    out = replicate_hidden(h, 3)
    assert out.shape == (12, 2, 2)
    f, b = h[:2], h[2:]
    for i in range(3):
        assert np.array_equal(out[2 * i : 2 * i + 2], f)
        assert np.array_equal(out[6 + 2 * i : 6 + 2 * i + 2], b)
    assert np.array_equal(replicate_hidden(h, 1), h)


def test_replicate_hidden_validation():
    with pytest.raises(InvalidArgumentError):
        replicate_hidden(np.zeros((3, 2, 2)), 2)  # odd channels
    with pytest.raises(InvalidArgumentError):
        replicate_hidden(np.zeros((4, 2)), 2)
    with pytest.raises(InvalidArgumentError):
        replicate_hidden(np.full((4, 2, 2), np.inf), 2)
    with pytest.raises(InvalidArgumentError):
        replicate_hidden(np.zeros((4, 2, 2)), 0)


def test_assemble_guidance_block_order():
    f1 = np.full((2, 3), 1.0)
    b1 = np.full((2, 3), 2.0)
    f2 = np.full((2, 3), 3.0)
    b2 = np.full((2, 3), 4.0)
    g = assemble_guidance([(f1, b1), (f2, b2)])
    assert g.shape == (8, 3)
    assert np.array_equal(g, np.concatenate([f1, f2, b1, b2]))


def test_assemble_guidance_validation():
    with pytest.raises(InvalidArgumentError):
        assemble_guidance([])
    with pytest.raises(InvalidArgumentError):
        assemble_guidance([(np.zeros((2, 3)), np.zeros((2, 4)))])
    with pytest.raises(InvalidArgumentError):
        assemble_guidance([(np.zeros(3), np.zeros(3))])
    with pytest.raises(InvalidArgumentError):
        assemble_guidance([(np.zeros((2, 3)), np.full((2, 3), np.nan))])


def test_cross_attention_matches_loop_oracle():
    rng = np.random.default_rng(3)
    d, t, f = 3, 5, 4
    tokens = rng.normal(size=(t, d))
    guidance = rng.normal(size=(f, d))
    w = AttentionWeights.seeded(d, seed=9)
    out = cross_attention(tokens, guidance, w)
    # Token-by-token recomputation with explicit softmax sums.
    for i in range(t):
        q = tokens[i] @ w.wq
        scores = [float(q @ (guidance[j] @ w.wk)) / math.sqrt(d) for j in range(f)]
        m = max(scores)
        ws = [math.exp(s - m) for s in scores]
        total = sum(ws)
        expect = sum(
            (ws[j] / total) * (guidance[j] @ w.wv) for j in range(f)
        )
        assert np.allclose(out[i], expect, atol=1e-12)
    with pytest.raises(InvalidArgumentError):
        cross_attention(np.zeros((2, d + 1)), guidance, w)


def test_cross_attention_single_token():
    rng = np.random.default_rng(4)
    d = 4
    tokens = rng.normal(size=(7, d))
    guidance = rng.normal(size=(1, d))
    w = AttentionWeights.seeded(d, seed=1)
    out = cross_attention(tokens, guidance, w)
    expect = guidance[0] @ w.wv
    assert np.allclose(out, expect[None, :], atol=1e-12)


def test_zero_guidance_gives_zero_output():
    rng = np.random.default_rng(5)
    h = rng.normal(size=(4, 3, 3))
    h_rep = replicate_hidden(h, 2)
    g = np.zeros((8, 3))
    w = AttentionWeights.seeded(2, seed=2)
    z = decoupled_cross_attention(h_rep, g, w)
    assert z.shape == h_rep.shape
    assert np.allclose(z, 0.0)


def test_decoupled_groups_are_independent():
    rng = np.random.default_rng(6)
    c, n, f = 4, 2, 3
    half = c // 2
    h_rep = replicate_hidden(rng.normal(size=(c, 4, 4)), n)
    g = assemble_guidance(make_views(rng, n, half, f))
    w = AttentionWeights.seeded(half, seed=3)
    base = decoupled_cross_attention(h_rep, g, w)
    # Perturbing one block's guidance only changes that group's channels.
    for group in range(2 * n):
        g2 = g.copy()
        g2[group * half : (group + 1) * half] += rng.normal(size=(half, f))
        out = decoupled_cross_attention(h_rep, g2, w)
        for other in range(2 * n):
            rows = slice(other * half, (other + 1) * half)
            if other == group:
                assert not np.array_equal(out[rows], base[rows])
            else:
                assert np.array_equal(out[rows], base[rows])


def test_decoupled_equal_views_give_equal_groups():
    rng = np.random.default_rng(7)
    c, f = 6, 2
    half = c // 2
    h_rep = replicate_hidden(rng.normal(size=(c, 3, 5)), 2)
    gf = rng.normal(size=(half, f))
    gb = rng.normal(size=(half, f))
    g = assemble_guidance([(gf, gb), (gf, gb)])
    w = AttentionWeights.seeded(half, seed=4)
    z = decoupled_cross_attention(h_rep, g, w)
    assert np.array_equal(z[:half], z[half : 2 * half])
    assert np.array_equal(z[2 * half : 3 * half], z[3 * half :])


def test_decoupled_cross_attention_validation():
    w = AttentionWeights.seeded(2)
    with pytest.raises(InvalidArgumentError):
        decoupled_cross_attention(np.zeros((4, 4)), np.zeros((4, 3)), w)
    with pytest.raises(InvalidArgumentError):
        decoupled_cross_attention(np.zeros((6, 2, 2)), np.zeros((6, 3)), w)
    with pytest.raises(InvalidArgumentError):
        decoupled_cross_attention(np.zeros((8, 2, 2)), np.zeros((4, 3)), w)


def test_aggregate_regions_constant_oracle():
    n, half, w, h = 2, 2, 4, 4
    layout = RegionLayout.grid(n, w, h)
    z = np.zeros((2 * n * half, w, h))
    for group in range(2 * n):
        z[group * half : (group + 1) * half] = group + 1.0
    out = aggregate_regions(z, layout)
    assert out.shape == (2 * half, w, h)
    expect = np.zeros_like(out)
    for i, (x0, y0, rw, rh) in enumerate(layout.rects):
        expect[:half, x0 : x0 + rw, y0 : y0 + rh] = i + 1.0
        expect[half:, x0 : x0 + rw, y0 : y0 + rh] = n + i + 1.0
    assert np.array_equal(out, expect)


def test_aggregate_regions_validation():
    layout = RegionLayout.grid(2, 4, 4)
    with pytest.raises(InvalidArgumentError):
        aggregate_regions(np.zeros((8, 4)), layout)
    with pytest.raises(InvalidArgumentError):
        aggregate_regions(np.zeros((6, 4, 4)), layout)  # not 2N blocks
    with pytest.raises(InvalidArgumentError):
        aggregate_regions(np.zeros((8, 4, 5)), layout)  # canvas mismatch


def test_single_view_pass_is_plain_cross_attention():
    rng = np.random.default_rng(8)
    c, w, h, f = 6, 3, 4, 2
    half = c // 2
    hid = rng.normal(size=(c, w, h))
    gf = rng.normal(size=(half, f))
    gb = rng.normal(size=(half, f))
    wt = AttentionWeights.seeded(half, seed=5)
    out = decoupled_pass(hid, [(gf, gb)], weights=wt)
    tok_f = hid[:half].reshape(half, w * h).T
    tok_b = hid[half:].reshape(half, w * h).T
    exp_f = cross_attention(tok_f, gf.T, wt).T.reshape(half, w, h)
    exp_b = cross_attention(tok_b, gb.T, wt).T.reshape(half, w, h)
    assert np.array_equal(out[:half], exp_f)
    assert np.array_equal(out[half:], exp_b)


def test_decoupled_pass_region_locality():
    c, w, h, f, n = 8, 16, 16, 3, 4
    half = c // 2
    layout = RegionLayout.grid(n, w, h)
    for trial in range(20):
        rng = np.random.default_rng(100 + trial)
        hid = rng.normal(size=(c, w, h))
        views = make_views(rng, n, half, f)
        wt = AttentionWeights.seeded(half, seed=trial)
        base = decoupled_pass(hid, views, layout, wt)
        j = trial % n
        bumped = list(views)
        bumped[j] = (
            views[j][0] + rng.normal(size=(half, f)),
            views[j][1] + rng.normal(size=(half, f)),
        )
        out = decoupled_pass(hid, bumped, layout, wt)
        for i, (x0, y0, rw, rh) in enumerate(layout.rects):
            a = base[:, x0 : x0 + rw, y0 : y0 + rh]
            b = out[:, x0 : x0 + rw, y0 : y0 + rh]
            if i == j:
                assert not np.array_equal(a, b)
            else:
                assert np.array_equal(a, b)


def test_decoupled_pass_uniform_guidance_matches_single_view():
    rng = np.random.default_rng(9)
    c, w, h, f, n = 8, 8, 8, 3, 4
    half = c // 2
    hid = rng.normal(size=(c, w, h))
    gf = rng.normal(size=(half, f))
    gb = rng.normal(size=(half, f))
    wt = AttentionWeights.seeded(half, seed=6)
    out_n = decoupled_pass(hid, [(gf, gb)] * n, weights=wt)
    out_1 = decoupled_pass(hid, [(gf, gb)], weights=wt)
    assert np.array_equal(out_n, out_1)


def test_decoupled_pass_validation():
    rng = np.random.default_rng(10)
    hid = rng.normal(size=(4, 4, 4))
    view = (rng.normal(size=(2, 3)), rng.normal(size=(2, 3)))
    with pytest.raises(InvalidArgumentError):
        decoupled_pass(hid, [])
    with pytest.raises(InvalidArgumentError):
        decoupled_pass(hid, [view], layout=RegionLayout.grid(2, 4, 4))
    with pytest.raises(InvalidArgumentError):
        decoupled_pass(hid, [view], weights=AttentionWeights.seeded(3))
    bad = (rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
    with pytest.raises(InvalidArgumentError):
        decoupled_pass(hid, [bad])
