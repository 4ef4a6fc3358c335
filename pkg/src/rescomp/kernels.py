"""Scalar activations and their Gaussian-weight kernel functions.

For a nonlinearity ``f`` and a standard-normal random vector ``w``, the
expectation ``E[f(w.u) f(w.v)]`` depends on ``u`` and ``v`` only through
``(|u|^2, |v|^2, u.v)``.  This module evaluates that three-argument kernel
two ways:

* ``kernel_closed_form`` -- analytic expressions (arcsine kernel for erf,
  arc-cosine kernels for ReLU and sign);
* ``kernel_quadrature`` -- a generic two-dimensional Gauss-Hermite sum that
  works for any element-wise activation.

The quadrature path is the generic reference; the closed forms are the fast
paths used by the recurrent-kernel iteration.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf as _erf
from scipy.special import roots_hermitenorm

__all__ = [
    "Activation",
    "KernelArgs",
    "KernelDomainError",
    "KernelFunction",
    "QuadratureRule",
    "activate",
    "kernel_closed_form",
    "kernel_quadrature",
]

#: Relative slack allowed on the Cauchy-Schwarz constraint uv^2 <= nu*nv.
CAUCHY_SCHWARZ_TOL = 1e-9

#: Slack for clamping arcsin/arccos arguments that rounding pushed past +-1.
CLAMP_TOL = 1e-9


class KernelDomainError(ValueError):
    """Raised when kernel arguments violate their domain constraints."""


class Activation(enum.Enum):
    """Element-wise reservoir nonlinearity."""

    ERF = "erf"
    RELU = "relu"
    SIGN = "sign"

    def apply(self, x):
        """Apply the activation element-wise to an array (or scalar)."""
        if self is Activation.ERF:
            return _erf(x)
        if self is Activation.RELU:
            return np.maximum(x, 0.0)
        return np.sign(x)

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant (infinite for the discontinuous sign map)."""
        if self is Activation.ERF:
            return 2.0 / math.sqrt(math.pi)
        if self is Activation.RELU:
            return 1.0
        return math.inf

    @property
    def bounded(self) -> bool:
        return self is not Activation.RELU


def activate(f: Activation, x: float) -> float:
    """Scalar activation value ``f(x)``.

    Sign returns -1, 0, +1 for negative, zero and positive inputs; the zero
    case never matters under continuous weight distributions.
    """
    if not math.isfinite(x):
        raise KernelDomainError(f"activation input must be finite, got {x!r}")
    if f is Activation.ERF:
        return math.erf(x)
    if f is Activation.RELU:
        return x if x > 0.0 else 0.0
    return float(np.sign(x))


def _validate_args(nu: float, nv: float, uv: float) -> None:
    if not (math.isfinite(nu) and math.isfinite(nv) and math.isfinite(uv)):
        raise KernelDomainError(
            f"kernel arguments must be finite, got ({nu!r}, {nv!r}, {uv!r})"
        )
    if nu < 0.0 or nv < 0.0:
        raise KernelDomainError(f"squared norms must be nonnegative, got ({nu}, {nv})")
    if uv * uv > nu * nv * (1.0 + CAUCHY_SCHWARZ_TOL):
        raise KernelDomainError(
            f"Cauchy-Schwarz violated: uv^2={uv * uv!r} > nu*nv={nu * nv!r}"
        )


@dataclass(frozen=True)
class KernelArgs:
    """The three scalar arguments of an iterable kernel.

    ``nu`` and ``nv`` are squared norms, ``uv`` the scalar product; they must
    satisfy Cauchy-Schwarz up to a 1e-9 relative slack.
    """

    nu: float
    nv: float
    uv: float

    def __post_init__(self):
        _validate_args(self.nu, self.nv, self.uv)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite rule for the standard normal weight exp(-w^2/2)/sqrt(2 pi).

    Weights sum to one, so the rule integrates the normal density exactly.
    """

    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.order < 2:
            raise ValueError(f"quadrature order must be >= 2, got {self.order}")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("quadrature weights must sum to 1 within 1e-12")
        if np.max(np.abs(self.nodes + self.nodes[::-1])) > 1e-12:
            raise ValueError("quadrature nodes must be symmetric about 0")

    @classmethod
    def gauss_hermite(cls, order: int = 100) -> "QuadratureRule":
        nodes, weights = roots_hermitenorm(order)
        return cls(order=order, nodes=nodes, weights=weights / math.sqrt(2.0 * math.pi))


_DEFAULT_RULES: dict[int, QuadratureRule] = {}


def _default_rule(order: int) -> QuadratureRule:
    rule = _DEFAULT_RULES.get(order)
    if rule is None:
        rule = QuadratureRule.gauss_hermite(order)
        _DEFAULT_RULES[order] = rule
    return rule


def kernel_quadrature(
    f: Activation, args: KernelArgs, rule: QuadratureRule | None = None
) -> float:
    """Evaluate the kernel by a tensor Gauss-Hermite sum over two variables.

    The pair (u, v) is rotated so that u lies along the first basis vector,
    leaving a two-dimensional Gaussian integral
    ``sum_ij w_i w_j f(x_i u1) f(x_i v1 + x_j v2)`` with ``u1 = |u|``,
    ``v1 = u.v/|u|`` and ``v2 = sqrt(|v|^2 - v1^2)``.
    """
    if rule is None:
        rule = _default_rule(100)
    nu, nv, uv = args.nu, args.nv, args.uv
    # Orient the larger norm along the rotated axis; the kernel is symmetric
    # in (nu, nv), and a canonical orientation makes that symmetry exact.
    if nv > nu:
        nu, nv = nv, nu
    x, w = rule.nodes, rule.weights
    if nu == 0.0 and nv == 0.0:
        f0 = activate(f, 0.0)
        return f0 * f0
    if nu == 0.0 or nv == 0.0:
        big = nu if nu > 0.0 else nv
        f0 = activate(f, 0.0)
        return f0 * float(w @ f.apply(x * math.sqrt(big)))
    u1 = math.sqrt(nu)
    v1 = uv / u1
    v2 = math.sqrt(max(nv - v1 * v1, 0.0))
    fu = f.apply(x * u1)
    fv = f.apply(np.add.outer(x * v1, x * v2))
    return float((w * fu) @ fv @ w)


def _clamped(value, limit_name: str):
    """Clamp arcsin/arccos arguments to [-1, 1] within CLAMP_TOL, else raise."""
    arr = np.asarray(value, dtype=float)
    if np.any(np.abs(arr) > 1.0 + CLAMP_TOL):
        worst = float(arr.flat[np.argmax(np.abs(arr))])
        raise KernelDomainError(f"{limit_name} argument {worst!r} outside [-1, 1]")
    return np.clip(arr, -1.0, 1.0)


def _closed_erf(nu, nv, uv):
    arg = _clamped(2.0 * uv / np.sqrt((1.0 + 2.0 * nu) * (1.0 + 2.0 * nv)), "arcsine")
    return (2.0 / math.pi) * np.arcsin(arg)


def _closed_relu(nu, nv, uv):
    norm = np.sqrt(nu * nv)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(norm > 0.0, uv / np.where(norm > 0.0, norm, 1.0), 0.0)
    theta = np.arccos(_clamped(rho, "arc-cosine"))
    value = norm * (np.sin(theta) + (math.pi - theta) * np.cos(theta)) / (2.0 * math.pi)
    return np.where(norm > 0.0, value, 0.0)


def _closed_sign(nu, nv, uv):
    norm = np.sqrt(nu * nv)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(norm > 0.0, uv / np.where(norm > 0.0, norm, 1.0), 0.0)
    theta = np.arccos(_clamped(rho, "arc-cosine"))
    return np.where(norm > 0.0, 1.0 - 2.0 * theta / math.pi, 0.0)


_CLOSED_FORMS = {
    Activation.ERF: _closed_erf,
    Activation.RELU: _closed_relu,
    Activation.SIGN: _closed_sign,
}


def kernel_closed_form(f: Activation, args: KernelArgs) -> float:
    """Analytic kernel value for activations with a known closed form.

    With a vanishing norm the kernel degenerates to ``f(0) E[f(.)]``, which is
    zero for every supported activation since they all map 0 to 0.
    """
    if args.nu == 0.0 or args.nv == 0.0:
        return 0.0
    return float(_CLOSED_FORMS[f](args.nu, args.nv, args.uv))


def _pairwise_validate(sq_norms: np.ndarray, products: np.ndarray) -> None:
    bound = np.multiply.outer(sq_norms, sq_norms)
    if np.any(products * products > bound * (1.0 + CAUCHY_SCHWARZ_TOL)):
        raise KernelDomainError("Cauchy-Schwarz violated in pairwise kernel arguments")


@dataclass(frozen=True)
class KernelFunction:
    """An activation bundled with an evaluation strategy for its kernel.

    ``evaluator`` selects the closed form (default, exists for all supported
    activations) or the generic Gauss-Hermite sum of the given order.
    """

    activation: Activation
    evaluator: str = "closed"
    order: int = 100

    def __post_init__(self):
        if self.evaluator not in ("closed", "quadrature"):
            raise ValueError(f"unknown evaluator {self.evaluator!r}")

    def __call__(self, nu: float, nv: float, uv: float) -> float:
        args = KernelArgs(nu, nv, uv)
        if self.evaluator == "closed":
            return kernel_closed_form(self.activation, args)
        return kernel_quadrature(self.activation, args, _default_rule(self.order))

    def pairwise(self, sq_norms: np.ndarray, products: np.ndarray) -> np.ndarray:
        """Kernel matrix for all argument pairs.

        ``sq_norms[n]`` holds the first two arguments for pair (n, m) and
        ``products[n, m]`` the third; symmetry of ``products`` is assumed and
        the result is exactly symmetric.
        """
        sq_norms = np.asarray(sq_norms, dtype=float)
        products = np.asarray(products, dtype=float)
        if not np.all(np.isfinite(sq_norms)) or not np.all(np.isfinite(products)):
            raise KernelDomainError("non-finite pairwise kernel arguments")
        _pairwise_validate(sq_norms, products)
        if self.evaluator == "closed":
            nu = sq_norms[:, None]
            nv = sq_norms[None, :]
            out = np.asarray(_CLOSED_FORMS[self.activation](nu, nv, products))
            zero = (sq_norms == 0.0)[:, None] | (sq_norms == 0.0)[None, :]
            if np.any(zero):
                out = np.where(zero, 0.0, out)
            return np.tril(out) + np.tril(out, -1).T
        rule = _default_rule(self.order)
        m = sq_norms.shape[0]
        out = np.empty((m, m))
        for n in range(m):
            for k in range(n, m):
                args = KernelArgs(sq_norms[n], sq_norms[k], products[n, k])
                out[n, k] = out[k, n] = kernel_quadrature(self.activation, args, rule)
        return out
