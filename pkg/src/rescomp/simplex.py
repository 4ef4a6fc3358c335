"""Derivative-free simplex minimizer.

Standard Nelder-Mead with reflection, expansion, contraction and shrink
coefficients 1, 2, 0.5, 0.5.  Termination is by simplex diameter; the
reported minimizer is the centroid of the final simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NelderMeadResult", "NonFiniteObjectiveError", "nelder_mead"]


class NonFiniteObjectiveError(RuntimeError):
    """The objective returned NaN or infinity at some simplex point."""

    def __init__(self, point: np.ndarray, value: float):
        self.point = np.asarray(point)
        self.value = value
        super().__init__(
            f"objective returned non-finite value {value!r} at {self.point.tolist()}"
        )


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool


def _checked(objective, x) -> float:
    value = float(objective(x))
    if not np.isfinite(value):
        raise NonFiniteObjectiveError(x, value)
    return value


def nelder_mead(objective, x0, initial_step=0.1, tol=1e-8,
                max_iter=1000) -> NelderMeadResult:
    """Minimize ``objective`` starting from ``x0``.

    ``initial_step`` sets the size of the starting simplex (scalar or
    per-coordinate).  Iteration stops when the simplex diameter drops below
    ``tol`` or after ``max_iter`` sweeps; the centroid of the final simplex
    is returned together with the objective evaluated there.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dim = x0.shape[0]
    steps = np.broadcast_to(np.asarray(initial_step, dtype=float), (dim,))

    simplex = [x0.copy()]
    for i in range(dim):
        vertex = x0.copy()
        vertex[i] += steps[i] if steps[i] != 0.0 else 0.1
        simplex.append(vertex)
    values = [_checked(objective, v) for v in simplex]

    iterations = 0
    converged = False
    while iterations < max_iter:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]

        diameter = max(
            float(np.linalg.norm(v - simplex[0])) for v in simplex[1:]
        )
        if diameter < tol:
            converged = True
            break
        iterations += 1

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = centroid + (centroid - worst)
        f_reflected = _checked(objective, reflected)

        if values[0] <= f_reflected < values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
            continue
        if f_reflected < values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_expanded = _checked(objective, expanded)
            if f_expanded < f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
            continue
        if f_reflected < values[-1]:
            contracted = centroid + 0.5 * (reflected - centroid)
        else:
            contracted = centroid - 0.5 * (centroid - worst)
        f_contracted = _checked(objective, contracted)
        if f_contracted < min(f_reflected, values[-1]):
            simplex[-1], values[-1] = contracted, f_contracted
            continue

        best = simplex[0]
        simplex = [best] + [best + 0.5 * (v - best) for v in simplex[1:]]
        values = [values[0]] + [_checked(objective, v) for v in simplex[1:]]

    centroid = np.mean(simplex, axis=0)
    return NelderMeadResult(
        x=centroid,
        fun=_checked(objective, centroid),
        iterations=iterations,
        converged=converged,
    )
