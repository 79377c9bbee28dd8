"""AdamW with decoupled weight decay, and the mutable training state."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..curriculum import LossStats
from ..errors import ConfigurationError, DimensionError, NumericError
from ..model import ParameterSet

__all__ = ["TrainState", "adamw_step"]


@dataclass
class TrainState:
    """Everything the optimizer and resume logic need to continue a run.

    ``stage_index`` and ``iteration`` locate the next training step;
    together with ``seed`` they determine every future random draw, so
    they are the complete RNG state.  ``step`` counts optimizer updates
    across all stages.
    """

    params: ParameterSet
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step: int = 0
    seed: int = 0
    stage_index: int = 1
    iteration: int = 0
    loss_stats: LossStats | None = None

    @classmethod
    def fresh(cls, params: ParameterSet, seed: int) -> "TrainState":
        return cls(params=params,
                   first_moment={n: np.zeros_like(t.data) for n, t in params.items()},
                   second_moment={n: np.zeros_like(t.data) for n, t in params.items()},
                   step=0, seed=int(seed), stage_index=1, iteration=0)


def adamw_step(state: TrainState, grads: Mapping[str, np.ndarray], lr: float,
               beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
               weight_decay: float = 1e-4) -> TrainState:
    """One bias-corrected AdamW update, mutating ``state`` in place.

    Weight decay is decoupled: parameters shrink by lr * decay * theta
    independently of the gradient path.  Any non-finite gradient rejects
    the whole step before any buffer is touched.
    """
    if lr <= 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ConfigurationError(f"betas must be in [0, 1), got {beta1}, {beta2}")
    if eps <= 0 or weight_decay < 0:
        raise ConfigurationError("eps must be positive and weight_decay non-negative")

    for name, tensor in state.params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != tensor.data.shape:
            raise DimensionError(
                f"gradient for {name!r} has shape {g.shape}, parameter is "
                f"{tensor.data.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name!r}; step rejected")

    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for name, tensor in state.params.items():
        g = grads.get(name)
        m = state.first_moment[name]
        v = state.second_moment[name]
        if g is None:
            m *= beta1
            v *= beta2
        else:
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        tensor.data -= lr * (update + weight_decay * tensor.data)
    return state
