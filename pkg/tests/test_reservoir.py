"""Finite-reservoir simulator tests."""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.sparse import csr_matrix, issparse

from rescomp import backend
from rescomp.kernels import Activation
from rescomp.reservoir import (
    DeepConfig,
    DivergenceError,
    NumericalRankError,
    ReservoirConfig,
    deep_run,
    init_state,
    make_rng,
    rc_gram,
    run,
    run_batch,
    sample_weights,
    step,
    train_readout,
)


def config(**kwargs) -> ReservoirConfig:
    base = dict(n=100, d=20, sigma_r=1.0, sigma_i=1.0, activation=Activation.ERF)
    base.update(kwargs)
    return ReservoirConfig(**base)


def inputs_for(cfg, t, rng):
    return rng.standard_normal((t, cfg.d)) / math.sqrt(cfg.d)


class TestConfigValidation:
    def test_rejects_bad_leak(self):
        with pytest.raises(ValueError):
            config(leak=1.5)

    def test_rejects_zero_sparsity(self):
        with pytest.raises(ValueError):
            config(sparsity=0.0)

    def test_rejects_nonpositive_scales(self):
        with pytest.raises(ValueError):
            config(sigma_r=0.0)

    def test_deep_dimension_chaining(self):
        good = DeepConfig((config(n=50), config(n=30, d=50)))
        assert len(good.layers) == 2
        with pytest.raises(ValueError):
            DeepConfig((config(n=50), config(n=30, d=40)))


class TestSampleWeights:
    def test_dense_variance(self):
        w = sample_weights(config(n=500), make_rng(0))
        assert not issparse(w.w_r)
        assert abs(np.var(w.w_r) - 1.0) < 0.05
        assert w.w_i.shape == (500, 20)

    def test_sparse_nonzero_fraction(self):
        w = sample_weights(config(n=1000, sparsity=0.05), make_rng(1))
        assert issparse(w.w_r)
        fraction = w.w_r.nnz / 1000**2
        assert 0.045 <= fraction <= 0.055

    def test_sparse_nonzero_variance(self):
        w = sample_weights(config(n=1000, sparsity=0.1), make_rng(2))
        nonzeros = w.w_r.data
        assert abs(np.var(nonzeros) - 10.0) / 10.0 < 0.05

    def test_moderate_sparsity_stays_dense(self):
        w = sample_weights(config(n=200, sparsity=0.5), make_rng(3))
        assert not issparse(w.w_r)
        assert abs((w.w_r == 0).mean() - 0.5) < 0.02

    def test_same_seed_bit_identical(self):
        a = sample_weights(config(n=120, sparsity=0.1), make_rng(7))
        b = sample_weights(config(n=120, sparsity=0.1), make_rng(7))
        assert np.array_equal(a.w_r.toarray(), b.w_r.toarray())
        assert np.array_equal(a.w_i, b.w_i)

    def test_dense_sampler_is_gaussian(self):
        # s = 1 reduces the sparse law to plain standard normal entries
        w = sample_weights(config(n=320, sparsity=1.0), make_rng(11))
        assert w.w_r.size >= 100_000
        result = stats.kstest(w.w_r.ravel(), "norm")
        assert result.pvalue > 0.01


class TestInitState:
    def test_unit_norm(self):
        x = init_state(10, make_rng(0))
        assert abs(x @ x - 1.0) <= 1e-12

    def test_single_neuron(self):
        values = {float(init_state(1, make_rng(seed))[0]) for seed in range(8)}
        assert values <= {1.0, -1.0}

    def test_independent_directions(self):
        rng = make_rng(5)
        for _ in range(200):
            x = init_state(1000, rng)
            y = init_state(1000, rng)
            assert abs(x @ y) < 0.15


def eq1_reference_step(x, u, w, cfg):
    """Direct transcription of the plain update, matching operation order."""
    z = (cfg.sigma_r * w.w_r) @ x
    z += (cfg.sigma_i * w.w_i) @ u
    return cfg.activation.apply(z) * (1.0 / math.sqrt(cfg.n))


class TestStep:
    def test_leak_one_matches_plain_update(self):
        cfg = config(leak=1.0)
        rng = make_rng(0)
        w = sample_weights(cfg, rng)
        x = init_state(cfg.n, rng)
        u = rng.standard_normal(cfg.d)
        expected = eq1_reference_step(x, u, w, cfg)
        got = step(x, u, w, cfg)
        np.testing.assert_allclose(got, expected, rtol=0, atol=1e-13)
        if backend.backend_name() == "numpy":
            assert np.array_equal(got, expected)

    def test_leak_zero_freezes_state(self):
        cfg = config(leak=0.0)
        rng = make_rng(1)
        w = sample_weights(cfg, rng)
        x = init_state(cfg.n, rng)
        got = step(x, rng.standard_normal(cfg.d), w, cfg)
        assert np.array_equal(got, x)

    def test_sign_output_unit_norm(self):
        cfg = config(activation=Activation.SIGN)
        rng = make_rng(2)
        w = sample_weights(cfg, rng)
        x = init_state(cfg.n, rng)
        got = step(x, rng.standard_normal(cfg.d), w, cfg)
        assert abs(got @ got - 1.0) <= 1e-12

    def test_intermediate_leak_blend(self):
        cfg = config(leak=0.3)
        rng = make_rng(3)
        w = sample_weights(cfg, rng)
        x = init_state(cfg.n, rng)
        u = rng.standard_normal(cfg.d)
        plain = step(x, u, w, config(leak=1.0))
        blended = step(x, u, w, cfg)
        np.testing.assert_allclose(blended, 0.7 * x + 0.3 * plain, atol=1e-13)


class TestRun:
    def test_single_step_equals_step(self):
        cfg = config()
        rng = make_rng(0)
        w = sample_weights(cfg, rng)
        x0 = init_state(cfg.n, rng)
        u = inputs_for(cfg, 1, rng)
        traj = run(u, w, cfg, x0)
        assert np.array_equal(traj.states[0], x0)
        assert np.array_equal(traj.states[1], step(x0, u[0], w, cfg))

    def test_zero_inputs_keep_erf_bounded(self):
        cfg = config()
        rng = make_rng(1)
        w = sample_weights(cfg, rng)
        traj = run(np.zeros((8, cfg.d)), w, cfg, init_state(cfg.n, rng))
        norms = np.linalg.norm(traj.states, axis=1)
        assert np.all(norms <= 1.0 + 1e-12)

    def test_fixed_seed_bit_identical(self):
        cfg = config()

        def trajectory():
            rng = make_rng(9)
            w = sample_weights(cfg, rng)
            x0 = init_state(cfg.n, rng)
            return run(inputs_for(cfg, 6, rng), w, cfg, x0).states

        assert np.array_equal(trajectory(), trajectory())

    def test_erf_norm_bound_random_inputs(self):
        cfg = config()
        rng = make_rng(2)
        w = sample_weights(cfg, rng)
        traj = run(inputs_for(cfg, 10, rng), w, cfg, init_state(cfg.n, rng))
        assert np.all((traj.states[1:] ** 2).sum(axis=1) <= 1.0 + 1e-12)

    def test_sign_norms_exactly_one(self):
        cfg = config(activation=Activation.SIGN)
        rng = make_rng(3)
        w = sample_weights(cfg, rng)
        traj = run(inputs_for(cfg, 10, rng), w, cfg, init_state(cfg.n, rng))
        np.testing.assert_allclose((traj.states[1:] ** 2).sum(axis=1), 1.0, atol=1e-12)

    def test_empty_inputs_rejected(self):
        cfg = config()
        rng = make_rng(4)
        w = sample_weights(cfg, rng)
        with pytest.raises(ValueError):
            run(np.zeros((0, cfg.d)), w, cfg, init_state(cfg.n, rng))

    def test_divergence_reports_time_index(self):
        cfg = config(activation=Activation.RELU, sigma_r=1e200)
        rng = make_rng(5)
        w = sample_weights(cfg, rng)
        with pytest.raises(DivergenceError) as info:
            run(inputs_for(cfg, 6, rng), w, cfg, init_state(cfg.n, rng))
        assert 1 <= info.value.time_index <= 6

    def test_resampled_mode_is_deterministic(self):
        cfg = config()
        rng = make_rng(6)
        w = sample_weights(cfg, rng)
        u = inputs_for(cfg, 5, rng)
        x0 = init_state(cfg.n, rng)
        a = run(u, w, cfg, x0, resample_weights=True, rng=make_rng(77)).states
        b = run(u, w, cfg, x0, resample_weights=True, rng=make_rng(77)).states
        fixed = run(u, w, cfg, x0).states
        assert np.array_equal(a, b)
        assert not np.array_equal(a, fixed)

    def test_resampled_mode_requires_rng(self):
        cfg = config()
        rng = make_rng(7)
        w = sample_weights(cfg, rng)
        with pytest.raises(ValueError):
            run(inputs_for(cfg, 3, rng), w, cfg, init_state(cfg.n, rng),
                resample_weights=True)


class TestScalingSubstitution:
    def test_prescaled_weights_bit_exact(self):
        cfg = config(sigma_r=1.7, sigma_i=0.3)
        rng = make_rng(0)
        w = sample_weights(cfg, rng)
        x0 = init_state(cfg.n, rng)
        u = inputs_for(cfg, 7, rng)
        scaled = type(w)(w_r=cfg.sigma_r * w.w_r, w_i=cfg.sigma_i * w.w_i,
                         sparsity_used=1.0)
        unit_cfg = config(sigma_r=1.0, sigma_i=1.0)
        a = run(u, w, cfg, x0).states
        b = run(u, scaled, unit_cfg, x0).states
        assert np.array_equal(a, b)

    def test_prescaled_sparse_bit_exact(self):
        cfg = config(n=150, sparsity=0.1, sigma_r=0.8, sigma_i=1.2)
        rng = make_rng(1)
        w = sample_weights(cfg, rng)
        x0 = init_state(cfg.n, rng)
        u = inputs_for(cfg, 7, rng)
        scaled = type(w)(w_r=csr_matrix(cfg.sigma_r * w.w_r), w_i=cfg.sigma_i * w.w_i,
                         sparsity_used=w.sparsity_used)
        unit_cfg = config(n=150, sparsity=0.1, sigma_r=1.0, sigma_i=1.0)
        assert np.array_equal(run(u, w, cfg, x0).states,
                              run(u, scaled, unit_cfg, x0).states)


class TestDeepRun:
    def layer_setup(self, sizes, rng, activation=Activation.ERF):
        configs = []
        prev = 20
        for n in sizes:
            configs.append(ReservoirConfig(n=n, d=prev, sigma_r=1.0, sigma_i=1.0,
                                           activation=activation))
            prev = n
        deep = DeepConfig(tuple(configs))
        weights = [sample_weights(c, rng) for c in configs]
        x0s = [init_state(c.n, rng) for c in configs]
        return deep, weights, x0s

    def test_single_layer_equals_run(self):
        rng = make_rng(0)
        deep, weights, x0s = self.layer_setup([80], rng)
        u = rng.standard_normal((6, 20))
        from_deep = deep_run(u, deep, weights, x0s)[0].states
        direct = run(u, weights[0], deep.layers[0], x0s[0]).states
        assert np.array_equal(from_deep, direct)

    def test_two_layer_sign_unit_norms(self):
        rng = make_rng(1)
        deep, weights, x0s = self.layer_setup([60, 40], rng, Activation.SIGN)
        u = rng.standard_normal((5, 20))
        for traj in deep_run(u, deep, weights, x0s):
            np.testing.assert_allclose((traj.states[1:] ** 2).sum(axis=1), 1.0,
                                       atol=1e-12)

    def test_deterministic(self):
        def total():
            rng = make_rng(2)
            deep, weights, x0s = self.layer_setup([50, 30], rng)
            u = rng.standard_normal((4, 20))
            return np.concatenate([t.states.ravel()
                                   for t in deep_run(u, deep, weights, x0s)])

        assert np.array_equal(total(), total())

    def test_second_layer_driven_by_first(self):
        # layer 2 at step t consumes layer 1's state at step t + 1
        rng = make_rng(3)
        deep, weights, x0s = self.layer_setup([50, 30], rng)
        u = rng.standard_normal((4, 20))
        trajs = deep_run(u, deep, weights, x0s)
        manual = run(trajs[0].states[1:], weights[1], deep.layers[1], x0s[1])
        assert np.array_equal(trajs[1].states, manual.states)


class TestGram:
    def test_single_state(self):
        x = np.array([[0.6, 0.8]])
        gram = rc_gram(x)
        assert gram.shape == (1, 1)
        assert gram[0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_sign_diagonal(self):
        cfg = config(activation=Activation.SIGN)
        rng = make_rng(0)
        w = sample_weights(cfg, rng)
        x0s = np.stack([init_state(cfg.n, rng) for _ in range(3)])
        u = rng.standard_normal((3, 5, cfg.d)) / math.sqrt(cfg.d)
        states = run_batch(u, w, cfg, x0s)
        gram = rc_gram(states[-1])
        np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-12)

    def test_deep_equals_concatenation(self):
        rng = make_rng(1)
        layer_a = rng.standard_normal((4, 30))
        layer_b = rng.standard_normal((4, 20))
        summed = rc_gram([layer_a, layer_b])
        concatenated = rc_gram(np.hstack([layer_a, layer_b]))
        np.testing.assert_allclose(summed, concatenated, atol=1e-12)

    def test_symmetric(self):
        rng = make_rng(2)
        states = rng.standard_normal((5, 40))
        gram = rc_gram(states)
        np.testing.assert_allclose(gram, gram.T, atol=0)


class TestReadout:
    def test_identity_states_reproduce_targets(self):
        targets = np.arange(12.0).reshape(4, 3)
        readout = train_readout(np.eye(4), targets, ridge=0.0)
        np.testing.assert_allclose(readout, targets, atol=1e-12)

    def test_huge_ridge_shrinks_to_zero(self):
        rng = make_rng(0)
        states = rng.standard_normal((30, 10))
        targets = rng.standard_normal((30, 2))
        readout = train_readout(states, targets, ridge=1e9)
        assert np.max(np.abs(readout)) <= 1e-6

    def test_square_full_rank_interpolates(self):
        rng = make_rng(1)
        states = rng.standard_normal((20, 20))
        targets = rng.standard_normal((20, 4))
        readout = train_readout(states, targets, ridge=0.0)
        assert np.max(np.abs(states @ readout - targets)) <= 1e-8

    def test_rank_deficient_raises(self):
        states = np.zeros((5, 8))
        states[:, :5] = np.eye(5)
        with pytest.raises(NumericalRankError):
            train_readout(states, np.ones((5, 1)), ridge=0.0)

    def test_negative_ridge_rejected(self):
        with pytest.raises(ValueError):
            train_readout(np.eye(3), np.ones((3, 1)), ridge=-1.0)
