"""Kernel evaluator tests.

The closed forms are validated against two independent references: the
generic Gauss-Hermite sum (tight for erf, whose integrand is smooth) and
the semi-analytic oracle in ``oracles.py`` (tight for every activation).
"""

import math

import numpy as np
import pytest

from rescomp.kernels import (
    Activation,
    KernelArgs,
    KernelDomainError,
    KernelFunction,
    QuadratureRule,
    activate,
    kernel_closed_form,
    kernel_quadrature,
)

from oracles import kernel_oracle

RULE_100 = QuadratureRule.gauss_hermite(100)
RULE_200 = QuadratureRule.gauss_hermite(200)


def random_args(rng, cap):
    nu = rng.uniform(1e-6, cap)
    nv = rng.uniform(1e-6, cap)
    uv = rng.uniform(-1.0, 1.0) * math.sqrt(nu * nv)
    return KernelArgs(nu, nv, uv)


class TestActivate:
    def test_erf_at_origin(self):
        assert activate(Activation.ERF, 0.0) == 0.0

    def test_relu_negative_branch(self):
        assert activate(Activation.RELU, -3.5) == 0.0

    def test_sign_positive_branch(self):
        assert activate(Activation.SIGN, 2.0) == 1.0

    def test_sign_zero_and_negative(self):
        assert activate(Activation.SIGN, 0.0) == 0.0
        assert activate(Activation.SIGN, -1e-300) == -1.0

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(KernelDomainError):
            activate(Activation.ERF, bad)

    def test_erf_lipschitz_bound(self):
        xs = np.linspace(-4, 4, 2001)
        slopes = np.diff(Activation.ERF.apply(xs)) / np.diff(xs)
        assert slopes.max() <= 2.0 / math.sqrt(math.pi) + 1e-6


class TestQuadratureRule:
    def test_weights_sum_to_one(self):
        for order in (2, 10, 100, 200):
            rule = QuadratureRule.gauss_hermite(order)
            assert abs(rule.weights.sum() - 1.0) <= 1e-12

    def test_nodes_symmetric(self):
        rule = QuadratureRule.gauss_hermite(100)
        assert np.max(np.abs(rule.nodes + rule.nodes[::-1])) <= 1e-12

    def test_order_below_two_rejected(self):
        with pytest.raises(ValueError):
            QuadratureRule.gauss_hermite(1)

    def test_integrates_normal_moments(self):
        rule = QuadratureRule.gauss_hermite(30)
        assert rule.weights @ rule.nodes == pytest.approx(0.0, abs=1e-13)
        assert rule.weights @ rule.nodes**2 == pytest.approx(1.0, abs=1e-12)
        assert rule.weights @ rule.nodes**4 == pytest.approx(3.0, abs=1e-11)


class TestKernelArgs:
    def test_cauchy_schwarz_enforced(self):
        with pytest.raises(KernelDomainError):
            KernelArgs(1.0, 1.0, 1.1)

    def test_boundary_within_tolerance_accepted(self):
        KernelArgs(1.0, 1.0, 1.0 + 4e-10)

    def test_negative_norm_rejected(self):
        with pytest.raises(KernelDomainError):
            KernelArgs(-1.0, 1.0, 0.0)

    def test_non_finite_rejected(self):
        with pytest.raises(KernelDomainError):
            KernelArgs(math.inf, 1.0, 0.0)


class TestQuadratureExamples:
    def test_erf_independent_arguments(self):
        # odd integrand factorizes into two zero-mean sums
        value = kernel_quadrature(Activation.ERF, KernelArgs(1, 1, 0), RULE_100)
        assert abs(value) <= 1e-12

    def test_sign_identical_arguments(self):
        value = kernel_quadrature(Activation.SIGN, KernelArgs(1, 1, 1), RULE_100)
        assert value == pytest.approx(1.0, abs=1e-10)

    def test_relu_second_moment(self):
        value = kernel_quadrature(Activation.RELU, KernelArgs(1, 1, 1), RULE_100)
        assert value == pytest.approx(0.5, abs=1e-10)

    def test_degenerate_norms(self):
        for act in Activation:
            assert kernel_quadrature(act, KernelArgs(0.0, 2.0, 0.0), RULE_100) == 0.0
            assert kernel_quadrature(act, KernelArgs(2.0, 0.0, 0.0), RULE_100) == 0.0
            assert kernel_quadrature(act, KernelArgs(0.0, 0.0, 0.0), RULE_100) == 0.0


class TestClosedFormExamples:
    def test_erf_unit_overlap(self):
        value = kernel_closed_form(Activation.ERF, KernelArgs(1, 1, 1))
        assert value == pytest.approx((2 / math.pi) * math.asin(2 / 3), abs=1e-15)
        # frozen from the order-100 quadrature evaluation of the same point
        assert value == pytest.approx(0.46455905439753986, abs=1e-12)

    def test_relu_orthogonal(self):
        value = kernel_closed_form(Activation.RELU, KernelArgs(4, 1, 0))
        assert value == pytest.approx(1.0 / math.pi, abs=1e-15)

    def test_sign_orthogonal(self):
        assert kernel_closed_form(Activation.SIGN, KernelArgs(1, 1, 0)) == 0.0

    def test_degenerate_norms_are_zero(self):
        for act in Activation:
            assert kernel_closed_form(act, KernelArgs(0.0, 3.0, 0.0)) == 0.0

    def test_frozen_oracle_values(self):
        # values computed with oracles.kernel_oracle (adaptive 1-D reduction)
        cases = [
            (Activation.ERF, (2.5, 0.3, -0.5), -0.20921367781226585),
            (Activation.RELU, (2.5, 0.3, -0.5), 0.036517858523464175),
            (Activation.SIGN, (2.0, 3.0, -1.0), -0.26772047280123),
        ]
        for act, (nu, nv, uv), expected in cases:
            assert kernel_closed_form(act, KernelArgs(nu, nv, uv)) == pytest.approx(
                expected, abs=1e-9
            )


class TestOracleEquivalence:
    """Closed forms against the independent evaluators."""

    @pytest.mark.parametrize("act", list(Activation))
    def test_against_semianalytic_oracle(self, act):
        rng = np.random.default_rng(101)
        for _ in range(40):
            args = random_args(rng, 10.0)
            expected = kernel_oracle(act.value, args.nu, args.nv, args.uv)
            assert kernel_closed_form(act, args) == pytest.approx(expected, abs=1e-9)

    def test_erf_against_quadrature_small_norms(self):
        # the erf integrand is smooth: order 100 resolves norms up to 4
        rng = np.random.default_rng(7)
        for _ in range(300):
            args = random_args(rng, 4.0)
            closed = kernel_closed_form(Activation.ERF, args)
            quad = kernel_quadrature(Activation.ERF, args, RULE_100)
            assert closed == pytest.approx(quad, abs=1e-7)

    def test_erf_against_quadrature_full_range(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            args = random_args(rng, 10.0)
            closed = kernel_closed_form(Activation.ERF, args)
            quad = kernel_quadrature(Activation.ERF, args, RULE_200)
            assert closed == pytest.approx(quad, abs=2e-6)

    @pytest.mark.parametrize("act,tol", [(Activation.RELU, 2e-2), (Activation.SIGN, 2e-1)])
    def test_nonsmooth_quadrature_consistency(self, act, tol):
        # kinked/discontinuous integrands limit the tensor rule to O(1/order)
        rng = np.random.default_rng(9)
        for _ in range(200):
            args = random_args(rng, 10.0)
            closed = kernel_closed_form(act, args)
            quad = kernel_quadrature(act, args, RULE_100)
            assert closed == pytest.approx(quad, abs=tol)


class TestKernelProperties:
    @pytest.mark.parametrize("act", list(Activation))
    def test_symmetry_closed_form(self, act):
        rng = np.random.default_rng(11)
        for _ in range(100):
            args = random_args(rng, 10.0)
            swapped = KernelArgs(args.nv, args.nu, args.uv)
            assert kernel_closed_form(act, args) == kernel_closed_form(act, swapped)

    @pytest.mark.parametrize("act", list(Activation))
    def test_symmetry_quadrature(self, act):
        # exact: the evaluator uses a canonical argument orientation
        rng = np.random.default_rng(12)
        for _ in range(50):
            args = random_args(rng, 10.0)
            swapped = KernelArgs(args.nv, args.nu, args.uv)
            assert kernel_quadrature(act, args, RULE_100) == kernel_quadrature(
                act, swapped, RULE_100
            )

    def test_bounded_activations_bounded_kernel(self):
        rng = np.random.default_rng(13)
        for act in (Activation.ERF, Activation.SIGN):
            for _ in range(200):
                args = random_args(rng, 10.0)
                assert abs(kernel_closed_form(act, args)) <= 1.0 + 1e-12

    def test_sign_self_kernel_is_one(self):
        for a in (1e-6, 0.5, 1.0, 7.3):
            assert kernel_closed_form(Activation.SIGN, KernelArgs(a, a, a)) == 1.0

    @pytest.mark.parametrize("act", list(Activation))
    def test_positive_semidefinite(self, act):
        rng = np.random.default_rng(14)
        kernel = KernelFunction(act)
        for _ in range(20):
            vectors = rng.standard_normal((6, 5))
            sq_norms = np.einsum("md,md->m", vectors, vectors)
            products = vectors @ vectors.T
            gram = kernel.pairwise(sq_norms, products)
            assert np.array_equal(gram, gram.T)
            assert np.linalg.eigvalsh(gram).min() >= -1e-8

    def test_pairwise_matches_scalar(self):
        rng = np.random.default_rng(15)
        vectors = rng.standard_normal((4, 3))
        sq_norms = np.einsum("md,md->m", vectors, vectors)
        products = vectors @ vectors.T
        for evaluator in ("closed", "quadrature"):
            kernel = KernelFunction(Activation.ERF, evaluator=evaluator)
            gram = kernel.pairwise(sq_norms, products)
            for a in range(4):
                for b in range(4):
                    assert gram[a, b] == pytest.approx(
                        kernel(sq_norms[a], sq_norms[b], products[a, b]), abs=1e-12
                    )


class TestMonteCarloConsistency:
    @pytest.mark.parametrize("act", list(Activation))
    def test_feature_average_converges(self, act):
        # (1/n) f(Wu).f(Wv) -> k for i.i.d. standard normal rows of W
        d = 6
        rng = np.random.default_rng(20)
        u = rng.standard_normal(d)
        v = 0.6 * u + 0.8 * rng.standard_normal(d)
        expected = kernel_closed_form(
            act, KernelArgs(float(u @ u), float(v @ v), float(u @ v))
        )
        n = 100_000
        rel_errors = []
        for seed in range(100):
            w = np.random.default_rng(1000 + seed).standard_normal((n, d))
            estimate = float(act.apply(w @ u) @ act.apply(w @ v)) / n
            rel_errors.append(abs(estimate - expected) / abs(expected))
        assert np.mean(rel_errors) < 0.02


class TestKernelFunction:
    def test_unknown_evaluator_rejected(self):
        with pytest.raises(ValueError):
            KernelFunction(Activation.ERF, evaluator="magic")

    def test_callable_closed(self):
        kernel = KernelFunction(Activation.SIGN)
        assert kernel(1.0, 1.0, 0.0) == 0.0

    def test_pairwise_rejects_cauchy_schwarz_violation(self):
        kernel = KernelFunction(Activation.ERF)
        with pytest.raises(KernelDomainError):
            kernel.pairwise(np.array([1.0, 1.0]), np.array([[1.0, 2.0], [2.0, 1.0]]))
