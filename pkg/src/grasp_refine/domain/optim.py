"""Adaptive-moment gradient descent over a flat parameter vector.

m_t = b1 m_{t-1} + (1 - b1) g
v_t = b2 v_{t-1} + (1 - b2) g^2
x_t = x_{t-1} - lr * m_hat / (sqrt(v_hat) + eps)

with bias-corrected moments m_hat, v_hat. Parameter groups are index ranges
of the vector, each with its own learning rate.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ParamGroup:
    name: str
    start: int
    stop: int
    lr: float


class Adam:
    """Adam with per-group learning rates."""

    def __init__(self, size: int, groups: Sequence[ParamGroup], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.groups = list(groups)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.lr = np.zeros(size)
        for group in self.groups:
            self.lr[group.start:group.stop] = group.lr

    @classmethod
    def single(cls, size: int, lr: float, **kwargs) -> "Adam":
        return cls(size, [ParamGroup("all", 0, size, lr)], **kwargs)

    def step(self, grad: np.ndarray) -> np.ndarray:
        """Advance the moments and return the update to add to the parameters."""
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad ** 2
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return -self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
