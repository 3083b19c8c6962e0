"""Full-batch gradient descent with Armijo backtracking."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)


def gradient_descent(fun: Callable, grad: Callable, x0, *, max_iters=5000,
                     step_size=1.0, tolerance=1e-8, armijo=1e-4,
                     min_step=1e-20, keep_trace=False) -> DescentResult:
    """Minimise ``fun`` from ``x0``.

    Each iteration starts its line search at twice the previously accepted
    step (capped at ``step_size``) and halves until the Armijo condition
    holds, so accepted iterates never increase ``fun``. Stops when the
    decrease falls to ``tolerance * max(1, |f|)`` or the step underflows
    ``min_step``.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    fx = float(fun(x))
    trace = [fx] if keep_trace else []
    t = step_size
    for it in range(1, max_iters + 1):
        g = grad(x)
        gg = float(g @ g)
        if gg == 0.0:
            return DescentResult(x, fx, it - 1, True, trace)
        t = min(step_size, 2.0 * t)
        while True:
            cand = x - t * g
            fc = float(fun(cand))
            if fc <= fx - armijo * t * gg:
                break
            t *= 0.5
            if t < min_step:
                return DescentResult(x, fx, it - 1, True, trace)
        decrease = fx - fc
        x, fx = cand, fc
        if keep_trace:
            trace.append(fx)
        if decrease <= tolerance * max(1.0, abs(fx)):
            return DescentResult(x, fx, it, True, trace)
    return DescentResult(x, fx, max_iters, False, trace)
