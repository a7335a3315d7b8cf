import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import adam_reference, adamod_reference, adamw_reference
from wirecal.errors import InvalidArgumentError
from wirecal.optimizer import (
    VARIANTS,
    OptimizerConfig,
    OptimizerState,
    bias_correct,
    bounded_rate,
    ema_closed_form,
    moments_update,
    step,
    variant_config,
)


def quadratic(seed, dim=24):
    """Shared objective ``1/2 (x - c)^T A (x - c)`` with a well-spread spectrum."""
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(dim, dim))
    A = M @ M.T / dim + np.diag(rng.uniform(0.1, 5.0, dim))
    c = rng.normal(size=dim)
    x0 = rng.normal(size=dim) * 3
    return (lambda x: A @ (x - c)), x0


def run(config, grad_fn, x0, steps):
    x = np.array(x0, dtype=float)
    state = OptimizerState.zeros(x.size)
    path = []
    for _ in range(steps):
        res = step(x, state, grad_fn(x), config)
        x, state = np.array(res.new_params), res.new_state
        path.append(x.copy())
    return np.array(path)


class TestConfig:
    def test_defaults(self):
        c = OptimizerConfig()
        assert (c.eta, c.beta1, c.beta2, c.beta3, c.sigma, c.zeta) == (1e-3, 0.9, 0.999, 0.999, 1e-8, 1e-4)

    @pytest.mark.parametrize("field,value", [
        ("eta", 0.0), ("beta1", 1.0), ("beta2", -0.1), ("beta3", 1.5),
        ("sigma", -1e-8), ("zeta", -1.0), ("eta", float("nan")),
    ])
    def test_out_of_range_rejected(self, field, value):
        with pytest.raises(InvalidArgumentError):
            OptimizerConfig(**{field: value})

    def test_variants(self):
        base = OptimizerConfig(beta3=0.99, zeta=0.01)
        assert variant_config("adam", base).beta3 == 0 and variant_config("adam", base).zeta == 0
        assert variant_config("adamw", base).beta3 == 0 and variant_config("adamw", base).zeta == 0.01
        assert variant_config("adamod", base).beta3 == 0.99 and variant_config("adamod", base).zeta == 0
        assert variant_config("adamodw", base) == base
        assert set(VARIANTS) == {"adam", "adamw", "adamod", "adamodw"}
        with pytest.raises(InvalidArgumentError):
            variant_config("sgd")


class TestMoments:
    def test_zero_grad_zero_state(self):
        m, z = moments_update(OptimizerState.zeros(3), np.zeros(3), OptimizerConfig())
        assert np.array_equal(m, np.zeros(3)) and np.array_equal(z, np.zeros(3))

    def test_first_step_from_zero(self):
        g = np.array([0.5, -2.0, 3.0])
        m, z = moments_update(OptimizerState.zeros(3), g, OptimizerConfig())
        np.testing.assert_allclose(m, 0.1 * g, rtol=1e-15)
        np.testing.assert_allclose(z, 0.001 * g * g, rtol=1e-12)

    def test_no_memory(self):
        cfg = OptimizerConfig(beta1=0.0, beta2=0.0)
        state = OptimizerState(np.ones(2), np.ones(2), np.zeros(2), 4)
        g = np.array([0.3, -0.7])
        m, z = moments_update(state, g, cfg)
        assert np.array_equal(m, g) and np.array_equal(z, g * g)

    def test_non_finite_grad(self):
        with pytest.raises(InvalidArgumentError):
            moments_update(OptimizerState.zeros(2), np.array([1.0, np.inf]), OptimizerConfig())


class TestBiasCorrection:
    def test_first_step_hand_value(self):
        m_hat, _ = bias_correct(np.array([0.1]), np.array([0.0]), 1, OptimizerConfig())
        assert m_hat[0] == pytest.approx(1.0, abs=1e-15)

    def test_large_t(self):
        m = np.array([0.37])
        m_hat, _ = bias_correct(m, np.array([0.0]), 10**6, OptimizerConfig())
        assert abs(m_hat[0] - m[0]) < 1e-12

    def test_beta1_zero(self):
        m = np.array([0.2, -4.0])
        for t in (1, 2, 50):
            m_hat, _ = bias_correct(m, np.zeros(2), t, OptimizerConfig(beta1=0.0))
            assert np.array_equal(m_hat, m)

    def test_t_zero_rejected(self):
        with pytest.raises(InvalidArgumentError):
            bias_correct(np.zeros(1), np.zeros(1), 0, OptimizerConfig())


class TestBoundedRate:
    def test_no_bound_when_beta3_zero(self):
        kappa, b, rate = bounded_rate(np.array([4.0, 0.25]), np.array([7.0, 7.0]), OptimizerConfig(beta3=0.0))
        assert np.array_equal(b, kappa) and np.array_equal(rate, kappa)

    def test_first_step_throttled(self):
        cfg = OptimizerConfig(eta=0.01, beta3=0.9, sigma=0.0)
        kappa, b, rate = bounded_rate(np.array([1.0]), np.array([0.0]), cfg)
        assert kappa[0] == pytest.approx(0.01, abs=1e-15)
        assert b[0] == pytest.approx(0.001, abs=1e-15)
        assert rate[0] == pytest.approx(0.001, abs=1e-15)

    def test_constant_kappa_bound_converges(self):
        cfg = OptimizerConfig(eta=0.01, beta3=0.9, sigma=0.0)
        b = np.zeros(1)
        for _ in range(400):
            kappa, b, rate = bounded_rate(np.array([1.0]), b, cfg)
        assert rate[0] == pytest.approx(kappa[0], rel=1e-12)

    @settings(max_examples=200)
    @given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=8),
           st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_rate_is_elementwise_min(self, z_hat, b_scale, beta3):
        z_hat = np.array(z_hat)
        cfg = OptimizerConfig(beta3=beta3)
        kappa, b, rate = bounded_rate(z_hat, b_scale * np.ones_like(z_hat), cfg)
        assert np.all(rate >= 0)
        assert np.all(rate <= kappa) and np.all(rate <= b)
        assert np.array_equal(rate, np.minimum(kappa, b))


class TestStep:
    def test_hand_step_no_bound(self):
        cfg = OptimizerConfig(eta=0.01, beta1=0.9, beta2=0.999, beta3=0.0, sigma=0.0, zeta=0.0)
        res = step(np.array([1.0]), OptimizerState.zeros(1), np.array([1.0]), cfg)
        assert abs(res.new_params[0] - 0.99) < 1e-12
        assert abs(res.effective_lr[0] - 0.01) < 1e-12
        assert res.new_state.t == 1

    def test_hand_step_with_bound(self):
        cfg = OptimizerConfig(eta=0.01, beta1=0.9, beta2=0.999, beta3=0.9, sigma=0.0, zeta=0.0)
        res = step(np.array([1.0]), OptimizerState.zeros(1), np.array([1.0]), cfg)
        assert abs(res.new_params[0] - 0.999) < 1e-12
        assert abs(res.effective_lr[0] - 0.001) < 1e-12

    def test_no_signal_no_decay(self):
        x = np.array([0.5, -1.0, 2.0])
        res = step(x, OptimizerState.zeros(3), np.zeros(3), OptimizerConfig(zeta=0.0))
        assert np.array_equal(res.new_params, x)
        assert res.new_state.t == 1

    def test_decay_term_is_rate_times_params(self):
        cfg = OptimizerConfig(zeta=0.5)
        x = np.array([1.0, -2.0])
        res = step(x, OptimizerState.zeros(2), np.zeros(2), cfg)
        assert np.array_equal(res.new_state.m, np.zeros(2))
        assert np.array_equal(res.new_params, x - res.effective_lr * (0.5 * x))

    def test_decay_pulls_toward_zero_without_gradient(self):
        # with no gradient the raw rate is eta / sigma, so a sigma of 1 keeps the pull gentle
        cfg = OptimizerConfig(eta=0.01, sigma=1.0, zeta=0.5, beta3=0.0)
        x = np.array([1.0, -2.0])
        state = OptimizerState.zeros(2)
        for _ in range(20):
            res = step(x, state, np.zeros(2), cfg)
            assert np.array_equal(res.new_state.m, np.zeros(2))
            assert np.array_equal(res.new_state.z, np.zeros(2))
            assert np.all(np.abs(res.new_params) < np.abs(x))
            assert np.all(np.sign(res.new_params) == np.sign(x))
            x, state = np.array(res.new_params), res.new_state

    def test_zero_decay_fixed_point(self):
        x = np.array([1.0, -2.0])
        state = OptimizerState.zeros(2)
        for _ in range(5):
            res = step(x, state, np.zeros(2), OptimizerConfig(zeta=0.0))
            assert np.array_equal(res.new_params, x)
            state = res.new_state

    def test_pure_function(self):
        rng = np.random.default_rng(0)
        x, g = rng.normal(size=24), rng.normal(size=24)
        state = OptimizerState(rng.normal(size=24), rng.uniform(size=24), rng.uniform(size=24), 7)
        before = (state.m.copy(), state.z.copy(), state.b.copy())
        a = step(x, state, g, OptimizerConfig())
        b = step(x, state, g, OptimizerConfig())
        assert np.array_equal(a.new_params, b.new_params)
        assert np.array_equal(a.new_state.b, b.new_state.b)
        assert all(np.array_equal(u, v) for u, v in zip(before, (state.m, state.z, state.b)))
        with pytest.raises(ValueError):
            state.m[0] = 1.0

    def test_state_invariants(self):
        grad_fn, x = quadratic(1)
        state = OptimizerState.zeros(24)
        for _ in range(50):
            res = step(x, state, grad_fn(x), OptimizerConfig())
            x, state = np.array(res.new_params), res.new_state
            assert np.all(state.z >= 0) and np.all(state.b >= 0)
            assert np.all(res.effective_lr >= 0)

    def test_state_frozen(self):
        s = OptimizerState.zeros(2)
        with pytest.raises(dataclasses.FrozenInstanceError):
            s.t = 3


class TestReductionIdentities:
    STEPS = 150

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_adam(self, seed):
        grad_fn, x0 = quadratic(seed)
        cfg = OptimizerConfig(eta=0.01, beta3=0.0, zeta=0.0)
        ours = run(cfg, grad_fn, x0, self.STEPS)
        ref = adam_reference(x0, grad_fn, self.STEPS, 0.01, 0.9, 0.999, 1e-8)
        assert np.abs(ours - ref).max() < 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_adamw(self, seed):
        grad_fn, x0 = quadratic(seed)
        cfg = OptimizerConfig(eta=0.01, beta3=0.0, zeta=0.05)
        ours = run(cfg, grad_fn, x0, self.STEPS)
        ref = adamw_reference(x0, grad_fn, self.STEPS, 0.01, 0.9, 0.999, 1e-8, 0.05)
        assert np.abs(ours - ref).max() < 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_adamod(self, seed):
        grad_fn, x0 = quadratic(seed)
        cfg = OptimizerConfig(eta=0.01, beta3=0.99, zeta=0.0)
        ours = run(cfg, grad_fn, x0, self.STEPS)
        ref = adamod_reference(x0, grad_fn, self.STEPS, 0.01, 0.9, 0.999, 0.99, 1e-8)
        assert np.abs(ours - ref).max() < 1e-12

    def test_bound_changes_the_path(self):
        grad_fn, x0 = quadratic(0)
        a = run(OptimizerConfig(beta3=0.0, zeta=0.0), grad_fn, x0, 3)
        b = run(OptimizerConfig(zeta=0.0), grad_fn, x0, 3)
        assert not np.array_equal(a[0], b[0])


class TestClosedForm:
    def test_single_entry(self):
        assert ema_closed_form([0.3], 0.9) == pytest.approx(0.1 * 0.3, abs=1e-15)

    def test_beta3_zero(self):
        assert ema_closed_form([0.3, 0.8, 0.5], 0.0) == 0.5

    @pytest.mark.parametrize("seed", range(10))
    def test_recurrence_matches_closed_form(self, seed):
        rng = np.random.default_rng(seed)
        beta3 = rng.uniform(0.0, 0.9999)
        kappas = rng.uniform(0.0, 1.0, size=(50, 24)) * 10 ** rng.uniform(-4, 0)
        b = np.zeros(24)
        for k in kappas:
            b = beta3 * b + (1 - beta3) * k
        assert np.abs(b - ema_closed_form(kappas, beta3)).max() < 1e-12

    def test_recurrence_through_bounded_rate(self):
        rng = np.random.default_rng(42)
        cfg = OptimizerConfig(beta3=0.95)
        b = np.zeros(5)
        kappas = []
        for _ in range(50):
            kappa, b, _ = bounded_rate(rng.uniform(0, 10, 5), b, cfg)
            kappas.append(kappa)
        assert np.abs(b - ema_closed_form(np.array(kappas), 0.95)).max() < 1e-12

    def test_empty_history(self):
        with pytest.raises(InvalidArgumentError):
            ema_closed_form(np.zeros((0, 3)), 0.9)
