"""Central finite-difference checks of the pre-training losses."""

from __future__ import annotations

import numpy as np
import torch

from slpretrain.config import RunConfig
from slpretrain.data import collate_pretrain
from slpretrain.pretrain import SignTextModel
from slpretrain.synthetic import SynthesisConfig, generate_samples
from slpretrain.training import build_vocab, fit_input_norm, mean_pose


def desk_problem(seed: int = 0):
    """Desk-preset model in float64 plus a fixed 2-sample masked, paired batch."""
    torch.manual_seed(seed)
    samples = generate_samples(SynthesisConfig(seed=seed, jitter_std=0.02), 2, "multi")
    vocab = build_vocab(samples)
    rc = RunConfig()
    model = SignTextModel(rc.model_config(), vocab)
    model.decoder.set_mean_pose(mean_pose(samples))
    fit_input_norm(model.encoder, samples)
    model = model.double().eval()  # eval: dropout off, so the loss is a fixed function
    batch = collate_pretrain(samples, vocab, np.random.default_rng(seed), 0.4).to(torch.float64)
    return model, batch


def loss_fn(model, batch, which: str):
    def f():
        parts = model(batch, lam=1.0)
        return getattr(parts, which)
    return f


def fd_check(model, f, coords_per_tensor: int = 2, eps: float = 1e-5, seed: int = 0,
             floor: float = 1e-6):
    """Max relative error between autograd and central differences over a
    random sample of coordinates of every trainable tensor.

    Relative error is |a - n| / max(|a|, |n|, floor). The floor only matters
    for coordinates whose gradient is structurally zero (attention key biases,
    for one): there the central difference returns pure round-off, about
    |L| * 2**-52 / eps ~ 1e-11, and a 0/0 ratio would be meaningless.
    """
    params = [(n, p) for n, p in model.named_parameters() if p.requires_grad]
    model.zero_grad(set_to_none=True)
    f().backward()
    rng = np.random.default_rng(seed)
    worst, where, checked = 0.0, None, 0
    with torch.no_grad():
        for name, p in params:
            grad = p.grad if p.grad is not None else torch.zeros_like(p)
            flat = p.view(-1)
            for i in rng.choice(flat.numel(), size=min(coords_per_tensor, flat.numel()), replace=False):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = f().item()
                flat[i] = orig - eps
                down = f().item()
                flat[i] = orig
                num = (up - down) / (2 * eps)
                ana = grad.view(-1)[i].item()
                err = abs(ana - num) / max(abs(ana), abs(num), floor)
                checked += 1
                if err > worst:
                    worst, where = err, (name, int(i), ana, num)
    return worst, where, checked
