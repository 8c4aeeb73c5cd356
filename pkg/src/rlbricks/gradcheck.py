"""Gradient verification against central finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

from .autodiff import Tensor, backward, no_grad

# Components smaller than this are compared absolutely instead of relatively.
SMALL = 1e-6
ABS_TOL = 1e-7


@dataclass
class GradCheckReport:
    passed: bool
    worst_rel_error: float
    # (param index, flat component index, analytic, numeric) per failing component
    failures: List[Tuple[int, int, float, float]] = field(default_factory=list)


def grad_check(
    f: Callable[[Sequence[Tensor]], Tensor],
    point: Sequence[Tensor],
    rtol: float = 1e-4,
    h: float = 1e-5,
) -> GradCheckReport:
    """Compare the reverse-mode gradient of ``f`` at ``point`` with central differences.

    ``f`` takes the parameter list and returns a scalar tensor; it is re-evaluated
    at perturbed points, so it must be a pure function of the parameters.
    """
    params = list(point)
    for p in params:
        p.requires_grad = True
    grads = backward(f(params), params=params)

    worst = 0.0
    failures: List[Tuple[int, int, float, float]] = []
    for pi, p in enumerate(params):
        analytic = grads[p].reshape(-1)
        flat = p.values.reshape(-1)
        for ci in range(flat.size):
            orig = flat[ci]
            flat[ci] = orig + h
            with no_grad():
                up = f(params).item()
            flat[ci] = orig - h
            with no_grad():
                down = f(params).item()
            flat[ci] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic[ci]
            if abs(numeric) < SMALL:
                ok = abs(a - numeric) < ABS_TOL
                rel = abs(a - numeric) / SMALL
            else:
                rel = abs(a - numeric) / abs(numeric)
                ok = rel < rtol
            worst = max(worst, rel)
            if not ok:
                failures.append((pi, ci, float(a), float(numeric)))
    return GradCheckReport(passed=not failures, worst_rel_error=worst, failures=failures)
