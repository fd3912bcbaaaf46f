"""Parameter update rules: SGD with momentum, and Adam."""
from __future__ import annotations

import numpy as np

__all__ = ["SGDMomentum", "Adam", "make_optimizer"]


class _Optimizer:
    kind = "base"

    def __init__(self, learning_rate: float):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.learning_rate = learning_rate
        self.step_count = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
            if params[name].shape != g.shape:
                raise ValueError(f"gradient shape mismatch for parameter {name!r}")
        self.step_count += 1
        self._update(params, grads)

    def _update(self, params, grads):
        raise NotImplementedError


class SGDMomentum(_Optimizer):
    """v <- momentum * v + g;  p <- p - lr * v."""

    kind = "sgd-momentum"

    def __init__(self, learning_rate: float, momentum: float = 0.9):
        super().__init__(learning_rate)
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def _update(self, params, grads):
        for name, g in grads.items():
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros_like(params[name])
                self.velocity[name] = v
            v *= self.momentum
            v += g
            params[name] -= (self.learning_rate * v).astype(params[name].dtype)


class Adam(_Optimizer):
    """Bias-corrected first/second moment update (Kingma-Ba)."""

    kind = "adam"

    def __init__(
        self,
        learning_rate: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        super().__init__(learning_rate)
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise ValueError("betas must be in [0, 1)")
        self.betas = betas
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def _update(self, params, grads):
        b1, b2 = self.betas
        t = self.step_count
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(params[name]))
            v = self.v.setdefault(name, np.zeros_like(params[name]))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            params[name] -= (
                self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
            ).astype(params[name].dtype)


def make_optimizer(kind: str, learning_rate: float, momentum: float = 0.9,
                   betas: tuple[float, float] = (0.9, 0.999)) -> _Optimizer:
    if kind == "sgd-momentum":
        return SGDMomentum(learning_rate, momentum)
    if kind == "adam":
        return Adam(learning_rate, betas)
    raise ValueError(f"unknown optimizer kind {kind!r}")
