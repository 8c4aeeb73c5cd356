"""Policy and value network definitions.

Networks are plain MLPs expressed as parameter lists over the autodiff
engine. The head kind decides the output width and the initialization of
the last layer: policy heads (plain, gaussian, deterministic-bounded) get
a 0.01-scaled final layer so the initial policy is nearly uniform, value
heads (q-value) keep the standard scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .autodiff import NonFiniteError, ShapeError, Tensor, matmul
from .rng import Rng

ACTIVATIONS = ("relu", "tanh")
HEADS = ("plain", "gaussian", "deterministic-bounded", "q-value")
POLICY_HEADS = ("plain", "gaussian", "deterministic-bounded")

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
TANH_EPS = 1e-6  # keeps the squash correction finite at saturation
FINAL_POLICY_SCALE = 0.01
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class MLPSpec:
    input_dim: int
    hidden: List[int]
    output_dim: int
    activation: str = "relu"
    head: str = "plain"

    def __post_init__(self):
        widths = [self.input_dim, *self.hidden, self.output_dim]
        if any(w < 1 for w in widths):
            raise ValueError(f"all layer widths must be >= 1, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")

    @property
    def layer_dims(self) -> List[Tuple[int, int]]:
        out = self.output_dim * (2 if self.head == "gaussian" else 1)
        dims = [self.input_dim, *self.hidden, out]
        return list(zip(dims[:-1], dims[1:]))


def init_mlp(spec: MLPSpec, rng: Rng) -> List[Tensor]:
    """Create parameters [W0, b0, W1, b1, ...], weights uniform +-1/sqrt(fan_in)."""
    params: List[Tensor] = []
    last = len(spec.layer_dims) - 1
    for i, (fan_in, fan_out) in enumerate(spec.layer_dims):
        bound = 1.0 / math.sqrt(fan_in)
        w = rng.uniform(-bound, bound, (fan_in, fan_out))
        if i == last and spec.head in POLICY_HEADS:
            w = w * FINAL_POLICY_SCALE
        params.append(Tensor(w, requires_grad=True))
        params.append(Tensor(np.zeros(fan_out), requires_grad=True))
    return params


def mlp_forward(params: List[Tensor], spec: MLPSpec, batch: Tensor) -> Tensor:
    """Affine-activation chain; returns the raw final affine output."""
    if batch.values.ndim != 2 or batch.shape[1] != spec.input_dim:
        raise ShapeError(f"batch shape {batch.shape} does not match input_dim {spec.input_dim}")
    x = batch
    n_layers = len(spec.layer_dims)
    for i in range(n_layers):
        x = matmul(x, params[2 * i]) + params[2 * i + 1]
        if i < n_layers - 1:
            x = x.relu() if spec.activation == "relu" else x.tanh()
    return x


@dataclass
class GaussianHeadOutput:
    """One draw from a tanh-squashed Gaussian policy head.

    All fields are graph tensors; call sites that only need numbers read
    ``.values``. ``log_prob`` has shape (n,), the rest (n, action_dim).
    """

    action: Tensor
    log_prob: Tensor
    pre_tanh: Tensor
    mean_action: Tensor


def _check_finite_inputs(mean: Tensor, log_std: Tensor) -> None:
    if not (np.isfinite(mean.values).all() and np.isfinite(log_std.values).all()):
        raise NonFiniteError("gaussian head received non-finite mean or log_std")


def _squash_log_prob(u: Tensor, mean: Tensor, log_std_c: Tensor,
                     scale: Optional[np.ndarray]) -> Tensor:
    z = (u - mean) * (-log_std_c).exp()
    logpdf = z.square() * -0.5 - log_std_c - LOG_SQRT_2PI
    correction = (u.tanh().square() * -1.0 + (1.0 + TANH_EPS)).log()
    lp = (logpdf - correction).sum(axis=1)
    if scale is not None:
        lp = lp - float(np.log(scale).sum())
    return lp


def _bounds_affine(bounds, d: int):
    """Return (center, scale) arrays or (None, None) for the unit box."""
    if bounds is None:
        return None, None
    low = np.asarray(bounds[0], dtype=np.float64).reshape(-1)
    high = np.asarray(bounds[1], dtype=np.float64).reshape(-1)
    if low.shape != (d,) or high.shape != (d,):
        raise ShapeError(f"bounds must have dim {d}")
    if np.allclose(low, -1.0) and np.allclose(high, 1.0):
        return None, None
    return (low + high) / 2.0, (high - low) / 2.0


def gaussian_log_prob(mean: Tensor, log_std: Tensor, pre_tanh: Tensor,
                      bounds=None) -> Tensor:
    """Log-density of the squashed draw whose pre-tanh value is ``pre_tanh``."""
    _check_finite_inputs(mean, log_std)
    log_std_c = log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)
    _, scale = _bounds_affine(bounds, mean.shape[1])
    return _squash_log_prob(pre_tanh, mean, log_std_c, scale)


def gaussian_sample(mean: Tensor, log_std: Tensor, rng: Optional[Rng],
                    deterministic: bool = False, bounds=None) -> GaussianHeadOutput:
    """Sample (or take the mode of) a tanh-squashed Gaussian.

    Stochastic: u = mean + exp(log_std) * eps with eps ~ N(0, I); action is
    tanh(u) rescaled to the bounds. Deterministic: u = mean, no noise drawn.
    Either way log_prob is reported for the u actually used.
    """
    _check_finite_inputs(mean, log_std)
    log_std_c = log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)
    center, scale = _bounds_affine(bounds, mean.shape[1])

    if deterministic:
        u = mean
    else:
        eps = Tensor(rng.normal(mean.shape))
        u = mean + log_std_c.exp() * eps

    squashed = u.tanh()
    mean_squashed = mean.tanh()
    if center is None:
        action, mean_action = squashed, mean_squashed
    else:
        action = squashed * Tensor(np.broadcast_to(scale, mean.shape).copy()) \
            + Tensor(np.broadcast_to(center, mean.shape).copy())
        mean_action = mean_squashed * Tensor(np.broadcast_to(scale, mean.shape).copy()) \
            + Tensor(np.broadcast_to(center, mean.shape).copy())

    lp = _squash_log_prob(u, mean, log_std_c, scale)
    return GaussianHeadOutput(action=action, log_prob=lp, pre_tanh=u, mean_action=mean_action)
