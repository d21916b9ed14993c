"""Adam optimizer over a flat list of numpy parameters."""
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np


@dataclass
class AdamState:
    beta_1: float = 0.9
    beta_2: float = 0.99
    epsilon: float = 1e-7
    step: int = 0
    first_moments: List[np.ndarray] = field(default_factory=list)
    second_moments: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_parameters(cls, params: Sequence[np.ndarray], beta_1: float = 0.9,
                       beta_2: float = 0.99, epsilon: float = 1e-7) -> "AdamState":
        if not (0.0 < beta_1 < 1.0 and 0.0 < beta_2 < 1.0):
            raise ValueError(f"betas must lie in (0, 1), got {beta_1}, {beta_2}")
        return cls(beta_1, beta_2, epsilon, 0,
                   [np.zeros_like(p, dtype=np.float64) for p in params],
                   [np.zeros_like(p, dtype=np.float64) for p in params])


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              learning_rate: float = 0.001) -> List[np.ndarray]:
    """One bias-corrected Adam update.

    ``state`` is advanced in place; the updated parameters are returned as new
    arrays in the input order.
    """
    if len(params) != len(grads) or len(params) != len(state.first_moments):
        raise ValueError("optimizer state, parameters and gradients must align")

    state.step += 1
    t = state.step
    correction_1 = 1.0 - state.beta_1 ** t
    correction_2 = 1.0 - state.beta_2 ** t

    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape or p.shape != state.first_moments[i].shape:
            raise ValueError(f"parameter {i}: shape {p.shape} does not match gradient {g.shape}")
        m = state.beta_1 * state.first_moments[i] + (1.0 - state.beta_1) * g
        v = state.beta_2 * state.second_moments[i] + (1.0 - state.beta_2) * (g * g)
        state.first_moments[i] = m
        state.second_moments[i] = v
        m_hat = m / correction_1
        v_hat = v / correction_2
        updated.append(p - learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
    return updated
