"""First-order stochastic optimization for tensor parameters."""

from __future__ import annotations

from typing import Dict, List, Sequence

import numpy as np

from .autodiff import GradientMap, ShapeError, Tensor


class Adam:
    """Bias-corrected Adam. Updates parameters in place; one instance per group."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 3e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params: List[Tensor] = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: List[np.ndarray] = [np.zeros(p.shape) for p in self.params]
        self.v: List[np.ndarray] = [np.zeros(p.shape) for p in self.params]

    def step(self, grads: GradientMap) -> None:
        """Apply one update. ``grads`` must cover every managed parameter."""
        for p in self.params:
            if p not in grads:
                raise KeyError("gradient map does not cover all parameters")
            if grads[p].shape != p.values.shape:
                raise ShapeError(
                    f"gradient shape {grads[p].shape} != parameter shape {p.values.shape}"
                )
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = grads[p]
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> Dict[str, object]:
        return {
            "t": self.t,
            "m": [m.copy() for m in self.m],
            "v": [v.copy() for v in self.v],
        }

    def load_state_dict(self, state: Dict[str, object]) -> None:
        self.t = int(state["t"])
        self.m = [np.asarray(m, dtype=np.float64).reshape(p.shape) for m, p in zip(state["m"], self.params)]
        self.v = [np.asarray(v, dtype=np.float64).reshape(p.shape) for v, p in zip(state["v"], self.params)]
