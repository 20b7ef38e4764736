"""Adam and the step-halving learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError


def lr_schedule(epoch: int, lr0: float = 1e-3, every: int = 5, max_halvings: int = 10) -> float:
    """Halve every ``every`` epochs for the first ``every * max_halvings`` epochs, then hold."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return lr0 / 2 ** min(epoch // every, max_halvings)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for '{k}' at step {state.t + 1}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for k, g in grads.items():
        if k not in state.m:
            state.m[k] = np.zeros_like(params[k])
            state.v[k] = np.zeros_like(params[k])
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[k] -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
