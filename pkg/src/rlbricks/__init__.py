"""rlbricks: an object-oriented deep RL toolkit on a self-contained autodiff engine."""

from .autodiff import Tensor, backward, grad_enabled, no_grad
from .config import ConfigTree, defaults, load_file, merge
from .experiment import evaluate, report, train

__version__ = "0.1.0"

__all__ = [
    "Tensor", "backward", "no_grad", "grad_enabled",
    "ConfigTree", "defaults", "load_file", "merge",
    "train", "evaluate", "report",
    "__version__",
]
