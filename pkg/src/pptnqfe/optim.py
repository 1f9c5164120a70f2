"""AMSGrad, the optimizer used by every trainer in the package."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AMSGrad", "AMSGradState", "amsgrad_step"]


@dataclass(frozen=True)
class AMSGrad:
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")

    def init(self, params: np.ndarray) -> AMSGradState:
        params = np.asarray(params, dtype=float).copy()
        zeros = np.zeros_like(params)
        return AMSGradState(params, zeros, zeros.copy(), zeros.copy(), 0)


@dataclass(frozen=True)
class AMSGradState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    v_max: np.ndarray
    t: int = field(default=0)


def amsgrad_step(opt: AMSGrad, state: AMSGradState, grad: np.ndarray) -> AMSGradState:
    """One update; returns a fresh state.

    Bias-corrected first moment; the running maximum is taken over the raw
    second moment and bias-corrected afterwards.
    """
    grad = np.asarray(grad, dtype=float)
    t = state.t + 1
    m = opt.beta1 * state.m + (1.0 - opt.beta1) * grad
    v = opt.beta2 * state.v + (1.0 - opt.beta2) * grad * grad
    v_max = np.maximum(state.v_max, v)
    m_hat = m / (1.0 - opt.beta1**t)
    denom = np.sqrt(v_max / (1.0 - opt.beta2**t)) + opt.eps
    params = state.params - opt.lr * m_hat / denom
    return AMSGradState(params, m, v, v_max, t)
