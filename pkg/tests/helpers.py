"""Finite-difference gradient checking shared by the ARN, model and acceptance tests."""

import numpy as np
import torch

# below this magnitude central differences are dominated by round-off
# (~eps * |loss| / step), so the error is taken relative to the floor instead
GRAD_FLOOR = 1e-5


def sample_param_entries(params, n, rng):
    """Pick ``n`` (param_index, flat_index) pairs, spread uniformly over all scalars."""
    sizes = np.array([p.numel() for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    flat = rng.choice(offsets[-1], size=min(n, offsets[-1]), replace=False)
    out = []
    for i in flat:
        k = int(np.searchsorted(offsets, i, side="right") - 1)
        out.append((k, int(i - offsets[k])))
    return out


def fd_gradient_errors(loss_fn, params, entries, step=1e-5):
    """Relative errors between autograd and central differences at ``entries``.

    ``loss_fn`` must be deterministic. Returns ``(errors, analytic, numeric)``.
    """
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = np.array([params[k].grad.reshape(-1)[i].item() for k, i in entries])
    numeric = []
    with torch.no_grad():
        for k, i in entries:
            flat = params[k].data.view(-1)
            orig = flat[i].item()
            flat[i] = orig + step
            up = loss_fn().item()
            flat[i] = orig - step
            down = loss_fn().item()
            flat[i] = orig
            numeric.append((up - down) / (2 * step))
    numeric = np.array(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), GRAD_FLOOR)
    return np.abs(analytic - numeric) / denom, analytic, numeric
