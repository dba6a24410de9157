"""Non-local positioning module: attention maps, identities, and oracle
agreement."""

import numpy as np
import pytest
import torch

from camseg.positioning import ChannelAttention, PositioningModule, SpatialAttention

from conftest import to_np
from oracles import channel_attention_oracle, spatial_attention_oracle


def test_channel_attention_matches_oracle():
    rng = np.random.default_rng(11)
    ca = ChannelAttention().double()
    for _ in range(20):
        c = int(rng.integers(1, 7))
        h = int(rng.integers(1, 6))
        w = int(rng.integers(1, 6))
        x = rng.standard_normal((1, c, h, w))
        gamma = float(rng.standard_normal())
        with torch.no_grad():
            ca.gamma.fill_(gamma)
            out = ca(torch.from_numpy(x))
        ref = channel_attention_oracle(x[0], gamma)
        assert np.max(np.abs(to_np(out)[0] - ref)) < 1e-6


def test_spatial_attention_matches_oracle():
    rng = np.random.default_rng(12)
    for _ in range(10):
        c = int(rng.integers(1, 6))
        h = int(rng.integers(1, 5))
        w = int(rng.integers(1, 5))
        sa = SpatialAttention(c).double()
        x = rng.standard_normal((1, c, h, w))
        gamma = float(rng.standard_normal())
        with torch.no_grad():
            sa.gamma.fill_(gamma)
            out = sa(torch.from_numpy(x))
        ref = spatial_attention_oracle(
            x[0],
            to_np(sa.query.weight)[:, :, 0, 0],
            to_np(sa.key.weight)[:, :, 0, 0],
            to_np(sa.value.weight)[:, :, 0, 0],
            gamma,
        )
        assert np.max(np.abs(to_np(out)[0] - ref)) < 1e-6


def test_channel_attention_rows_are_stochastic():
    rng = np.random.default_rng(13)
    ca = ChannelAttention()
    for _ in range(25):
        c = int(rng.integers(1, 12))
        x = torch.from_numpy(rng.standard_normal((2, c, 4, 4)).astype(np.float32))
        attn = ca.attention_map(x)
        assert attn.shape == (2, c, c)
        assert torch.all(attn >= 0)
        sums = attn.sum(dim=-1)
        assert torch.max(torch.abs(sums - 1.0)).item() < 1e-6


def test_spatial_attention_rows_are_stochastic():
    rng = np.random.default_rng(14)
    for _ in range(25):
        c = int(rng.integers(1, 10))
        h = int(rng.integers(1, 6))
        w = int(rng.integers(1, 6))
        sa = SpatialAttention(c)
        x = torch.from_numpy(rng.standard_normal((2, c, h, w)).astype(np.float32))
        attn = sa.attention_map(x)
        n = h * w
        assert attn.shape == (2, n, n)
        assert torch.all(attn >= 0)
        sums = attn.sum(dim=-1)
        assert torch.max(torch.abs(sums - 1.0)).item() < 1e-6


def test_channel_attention_gamma_zero_is_identity():
    rng = np.random.default_rng(15)
    ca = ChannelAttention()
    with torch.no_grad():
        ca.gamma.zero_()
    x = torch.from_numpy(rng.standard_normal((3, 8, 5, 7)).astype(np.float32))
    assert torch.equal(ca(x), x)


def test_spatial_attention_gamma_zero_is_identity():
    rng = np.random.default_rng(16)
    sa = SpatialAttention(8)
    with torch.no_grad():
        sa.gamma.zero_()
    x = torch.from_numpy(rng.standard_normal((3, 8, 5, 7)).astype(np.float32))
    assert torch.equal(sa(x), x)


def test_channel_attention_single_channel_doubles():
    # with one channel the attention weight is exactly 1, so out = gamma*x + x
    rng = np.random.default_rng(17)
    ca = ChannelAttention()
    x = torch.from_numpy(rng.standard_normal((2, 1, 6, 6)).astype(np.float32))
    assert torch.equal(ca(x), 2.0 * x)


def test_spatial_attention_single_position_scales_value():
    rng = np.random.default_rng(18)
    sa = SpatialAttention(4).double()
    x = torch.from_numpy(rng.standard_normal((2, 4, 1, 1)))
    out = sa(x)
    expected = sa.gamma * sa.value(x) + x
    assert torch.max(torch.abs(out - expected)).item() < 1e-12


def test_channel_attention_stable_under_large_magnitudes():
    # the stabilised softmax must not overflow for large activations
    ca = ChannelAttention()
    x = torch.full((1, 4, 8, 8), 100.0)
    out = ca(x)
    assert torch.isfinite(out).all()
    attn = ca.attention_map(x)
    assert torch.isfinite(attn).all()


def test_spatial_attention_position_permutation_equivariance():
    # permuting spatial positions permutes the output the same way
    rng = np.random.default_rng(19)
    sa = SpatialAttention(6).double()
    x = torch.from_numpy(rng.standard_normal((1, 6, 2, 3)))
    n = 6
    perm = torch.from_numpy(rng.permutation(n))
    flat = x.view(1, 6, n)
    x_perm = flat[:, :, perm].view(1, 6, 2, 3)
    out = sa(x).view(1, 6, n)
    out_perm = sa(x_perm).view(1, 6, n)
    assert torch.max(torch.abs(out[:, :, perm] - out_perm)).item() < 1e-10


def test_attention_gradcheck():
    rng = np.random.default_rng(20)
    ca = ChannelAttention().double()
    sa = SpatialAttention(3).double()
    x = torch.from_numpy(rng.standard_normal((1, 3, 3, 3))).requires_grad_(True)
    assert torch.autograd.gradcheck(ca, (x,), eps=1e-6, atol=1e-4)
    x2 = torch.from_numpy(rng.standard_normal((1, 3, 3, 3))).requires_grad_(True)
    assert torch.autograd.gradcheck(sa, (x2,), eps=1e-6, atol=1e-4)


def test_attention_input_gradients_match_finite_differences():
    # d(loss)/d(input) against central differences, step 1e-5; the attention
    # blocks are smooth so the coarse step is safe
    rng = np.random.default_rng(23)
    probe = torch.from_numpy(rng.standard_normal((1, 8, 3, 3)))
    for block in (ChannelAttention().double(), SpatialAttention(8).double()):
        x = torch.from_numpy(rng.standard_normal((1, 8, 3, 3))).requires_grad_(True)
        (block(x) * probe).sum().backward()
        analytic = x.grad.view(-1).numpy().copy()
        h = 1e-5
        flat = x.detach().view(-1)
        numeric = np.empty(flat.numel())
        with torch.no_grad():
            for i in range(flat.numel()):
                orig = float(flat[i])
                flat[i] = orig + h
                fp = float((block(x) * probe).sum())
                flat[i] = orig - h
                fm = float((block(x) * probe).sum())
                flat[i] = orig
                numeric[i] = (fp - fm) / (2 * h)
        denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        assert np.linalg.norm(analytic - numeric) / denom < 1e-4


def test_positioning_module_output_contract():
    pm = PositioningModule(16)
    x = torch.randn(2, 16, 4, 4)
    feat, logits = pm(x)
    assert feat.shape == (2, 16, 4, 4)
    assert logits.shape == (2, 1, 4, 4)


def test_positioning_module_head_kernel_is_7x7():
    pm = PositioningModule(16)
    assert tuple(pm.head.kernel_size) == (7, 7)
    x = torch.randn(1, 16, 7, 7)
    _, logits = pm(x)
    assert logits.shape[-2:] == (7, 7)


def test_positioning_module_ablation_drops_blocks():
    pm = PositioningModule(16, use_channel_attention=False, use_spatial_attention=False)
    assert pm.channel_attention is None
    assert pm.spatial_attention is None
    x = torch.randn(2, 16, 4, 4)
    feat, logits = pm(x)
    # with both attentions off the feature path is the identity
    assert torch.equal(feat, x)
    assert logits.shape == (2, 1, 4, 4)


def test_positioning_module_order_channel_then_spatial():
    rng = np.random.default_rng(21)
    pm = PositioningModule(5).double()
    x = torch.from_numpy(rng.standard_normal((1, 5, 3, 3)))
    feat, _ = pm(x)
    expected = pm.spatial_attention(pm.channel_attention(x))
    assert torch.max(torch.abs(feat - expected)).item() == 0.0


@pytest.mark.parametrize("flag", ["channel", "spatial"])
def test_positioning_module_single_attention_paths(flag):
    kwargs = {
        "use_channel_attention": flag == "channel",
        "use_spatial_attention": flag == "spatial",
    }
    pm = PositioningModule(8, **kwargs).double()
    rng = np.random.default_rng(22)
    x = torch.from_numpy(rng.standard_normal((1, 8, 3, 3)))
    feat, _ = pm(x)
    block = pm.channel_attention if flag == "channel" else pm.spatial_attention
    assert torch.equal(feat, block(x))
