import numpy as np
import pytest
import torch


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(0)
    yield


def rand_image(rng: np.random.Generator, b: int = 1, size: int = 64) -> torch.Tensor:
    return torch.from_numpy(rng.standard_normal((b, 3, size, size)).astype(np.float32))


def rand_mask(rng: np.random.Generator, b: int = 1, size: int = 64) -> torch.Tensor:
    return torch.from_numpy((rng.random((b, 1, size, size)) > 0.5).astype(np.float32))


def to_np(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().astype(np.float64)


def dr_params(dr) -> dict:
    """Numpy copies of a DistractionRemoval module's tensors, keyed the way
    the straight-line oracle expects them."""
    return {
        "adapt_w": to_np(dr.adapt.conv.weight),
        "adapt_bn_mean": to_np(dr.adapt.bn.running_mean),
        "adapt_bn_var": to_np(dr.adapt.bn.running_var),
        "adapt_bn_weight": to_np(dr.adapt.bn.weight),
        "adapt_bn_bias": to_np(dr.adapt.bn.bias),
        "alpha": float(dr.alpha.detach()),
        "beta": float(dr.beta.detach()),
        "sub_bn_mean": to_np(dr.bn_sub.running_mean),
        "sub_bn_var": to_np(dr.bn_sub.running_var),
        "sub_bn_weight": to_np(dr.bn_sub.weight),
        "sub_bn_bias": to_np(dr.bn_sub.bias),
        "add_bn_mean": to_np(dr.bn_add.running_mean),
        "add_bn_var": to_np(dr.bn_add.running_var),
        "add_bn_weight": to_np(dr.bn_add.weight),
        "add_bn_bias": to_np(dr.bn_add.bias),
    }


def randomize_bn_stats(rng: np.random.Generator, *bns) -> None:
    for bn in bns:
        c = bn.running_mean.numel()
        with torch.no_grad():
            bn.running_mean.copy_(torch.from_numpy(rng.standard_normal(c) * 0.1))
            bn.running_var.copy_(torch.from_numpy(rng.random(c) + 0.5))
            bn.weight.copy_(torch.from_numpy(rng.random(c) + 0.5))
            bn.bias.copy_(torch.from_numpy(rng.standard_normal(c) * 0.1))
