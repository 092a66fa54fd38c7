"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np


def fd_max_rel_error(
    loss_fn,
    tensors: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    eps: float = 1e-5,
    coords_per_tensor: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between analytic gradients and central differences.

    `loss_fn` is re-evaluated after in-place perturbation of each checked
    coordinate; `coords_per_tensor` limits the check to a seeded sample
    (None checks every coordinate).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, tensor in tensors.items():
        grad = analytic[name]
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        idx = np.arange(flat.size)
        if coords_per_tensor is not None and flat.size > coords_per_tensor:
            idx = rng.choice(flat.size, size=coords_per_tensor, replace=False)
        for j in idx:
            orig = flat[j]
            flat[j] = orig + eps
            up = loss_fn()
            flat[j] = orig - eps
            down = loss_fn()
            flat[j] = orig
            fd = (up - down) / (2.0 * eps)
            denom = max(abs(fd), abs(gflat[j]), 1e-6)
            worst = max(worst, abs(fd - gflat[j]) / denom)
    return worst
