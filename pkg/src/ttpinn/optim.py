"""Adam with a multiplicative step-decay learning-rate schedule.

TT cores, dense matrices and biases are all updated identically, as flat
arrays in the parameter registry; the factorized structure never reaches the
optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonFiniteGradient(RuntimeError):
    pass


@dataclass(frozen=True)
class LrSchedule:
    lr0: float = 1e-3
    decay: float = 0.9
    period: int = 1000


def lr_at(schedule: LrSchedule, iteration: int) -> float:
    """lr0 * decay^floor(iteration / period); piecewise constant, non-increasing."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return schedule.lr0 * schedule.decay ** (iteration // schedule.period)


class Adam:
    """Bias-corrected Adam over a parameter registry (updates in place).

    The step counter doubles as the schedule iteration: step t (0-based) uses
    lr_at(schedule, t).
    """

    def __init__(self, params, schedule: LrSchedule = LrSchedule(),
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.schedule = schedule
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        lr = lr_at(self.schedule, self.t)
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, _ in self.params.items():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradient(
                    f"non-finite gradient for {name!r} at step {self.t - 1}"
                )
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p = self.params[name]
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self):
        """Moment arrays in registry order, for checkpointing."""
        for name, _ in self.params.items():
            yield name, self.m[name], self.v[name]
