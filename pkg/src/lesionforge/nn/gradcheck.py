"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

import numpy as np

__all__ = ["gradcheck"]

MAX_PARAMS = 10_000  # finite differencing above this is impractically slow


def gradcheck(net, x: np.ndarray, loss_fn, step: float = 1e-4) -> dict[str, float]:
    """Compare analytic parameter gradients against central finite differences.

    ``loss_fn(output) -> (scalar loss, grad wrt output)`` closes over any
    targets.  The network is cast to float64 in place so the finite
    differences are not drowned in float32 rounding.  Returns the max
    relative error per parameter tensor; empty dict for a parameter-free net.

    Elements where both gradients are below 1e-6 in magnitude count as exact:
    directions the loss provably ignores (e.g. a conv bias feeding a
    mean-subtracting normalization) would otherwise divide FD noise by itself.
    """
    n_params = net.num_params()
    if n_params > MAX_PARAMS:
        raise ValueError(f"network has {n_params} parameters; gradcheck caps at {MAX_PARAMS}")
    net.cast(np.float64)
    x = x.astype(np.float64)

    def eval_loss() -> float:
        return loss_fn(net.forward(x, training=True))[0]

    net.zero_grad()
    out = net.forward(x, training=True)
    _, dout = loss_fn(out)
    net.backward(dout)
    analytic = {k: v.copy() for k, v in net.grads().items()}

    report: dict[str, float] = {}
    for name, p in net.params().items():
        a = analytic[name]
        worst = 0.0
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = eval_loss()
            flat[i] = orig - step
            down = eval_loss()
            flat[i] = orig
            fd = (up - down) / (2 * step)
            av = a.reshape(-1)[i]
            denom = max(abs(av), abs(fd))
            err = 0.0 if denom < 1e-6 else abs(av - fd) / denom
            worst = max(worst, err)
        report[name] = worst
    return report
