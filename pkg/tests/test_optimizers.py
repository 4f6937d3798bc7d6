import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nmgrn.optimizers import (
    AdamHyper,
    AdamState,
    SgdHyper,
    SgdState,
    adam_step,
    baseline_presets,
    decayed_lr,
    sgd_step,
)


def one(x):
    return np.array([float(x)])


class TestSgd:
    def test_plain_step(self):
        theta, state = sgd_step(one(0), SgdState.zeros_like(one(0)), one(1), SgdHyper(0.01, 0.0))
        assert state.velocity[0] == pytest.approx(-0.01)
        assert theta[0] == pytest.approx(-0.01)

    def test_momentum_recurrence(self):
        theta, state = one(0), SgdState.zeros_like(one(0))
        h = SgdHyper(0.01, 0.9)
        theta, state = sgd_step(theta, state, one(2), h)
        assert state.velocity[0] == pytest.approx(-0.02)
        theta, state = sgd_step(theta, state, one(2), h)
        assert state.velocity[0] == pytest.approx(-0.038)
        assert theta[0] == pytest.approx(-0.058)

    def test_decay_halves(self):
        assert decayed_lr(0.1, 1.0, 1) == pytest.approx(0.05)
        state = SgdState(np.zeros(1), step_count=1)
        _, s = sgd_step(one(0), state, one(1), SgdHyper(0.1, 0.0, decay=1.0))
        assert s.velocity[0] == pytest.approx(-0.05)
        assert s.step_count == 2

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 1))
    def test_reduces_to_gradient_descent(self, th, g, eta):
        theta, _ = sgd_step(one(th), SgdState.zeros_like(one(0)), one(g), SgdHyper(eta, 0.0, 0.0))
        assert theta[0] == th + (0.0 * 0.0 - eta * g)
        assert theta[0] == pytest.approx(th - eta * g)

    def test_decay_strictly_decreasing(self):
        lrs = [decayed_lr(0.1, 0.01, t) for t in range(50)]
        assert all(a > b for a, b in zip(lrs, lrs[1:]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            sgd_step(np.zeros(2), SgdState.zeros_like(np.zeros(2)), np.zeros(3), SgdHyper())


class TestAdam:
    def test_first_step_closed_form(self):
        theta, state = adam_step(one(0), AdamState.zeros_like(one(0)), one(1), AdamHyper())
        # m_hat = v_hat = 1 -> step = -eta / (1 + eps)
        assert theta[0] == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-18)
        assert abs(theta[0] + 0.001) < 1e-11
        assert state.step_count == 1

    def test_zero_gradient_fixed_point(self):
        theta, state = adam_step(one(3.0), AdamState.zeros_like(one(0)), one(0), AdamHyper())
        assert theta[0] == 3.0
        theta, state = sgd_step(one(3.0), SgdState.zeros_like(one(0)), one(0), SgdHyper(0.5, 0.9))
        assert theta[0] == 3.0

    def test_constant_gradient_limit(self):
        theta, state = one(0), AdamState.zeros_like(one(0))
        h = AdamHyper()
        g = 0.5
        for _ in range(2000):
            prev = theta.copy()
            theta, state = adam_step(theta, state, one(g), h)
            assert abs(theta[0] - prev[0]) <= h.eta * (1 + 1e-9)
        # m_hat -> g, v_hat -> g^2: step -> eta * g / (g + eps)
        assert prev[0] - theta[0] == pytest.approx(h.eta * g / (g + h.epsilon), rel=1e-6)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=20))
    def test_v_nonnegative(self, grads):
        theta, state = one(0), AdamState.zeros_like(one(0))
        for g in grads:
            theta, state = adam_step(theta, state, one(g), AdamHyper())
            assert state.v[0] >= 0


class TestPresets:
    @pytest.mark.parametrize("model", ["m0", "m1", "m2"])
    def test_defaults(self, model):
        assert baseline_presets("SGD", model) == SgdHyper(0.01, 0.0, 0.0)
        assert baseline_presets("Adam", model) == AdamHyper(0.001, 0.9, 0.999, 1e-8, 0.0)

    def test_starred(self):
        assert baseline_presets("SGD*", "m0") == SgdHyper(0.01, 0.75, 0.0)
        assert baseline_presets("SGD*", "m1") == SgdHyper(0.1, 0.0, 0.001)
        assert baseline_presets("SGD*", "m2") == SgdHyper(0.01, 0.5, 0.0)
        assert baseline_presets("Adam*", "m0") == AdamHyper(0.001, 0.9, 0.999, 0.001, 0.0)
        assert baseline_presets("Adam*", "m1") == AdamHyper(0.1, 0.99, 0.9, 1.0, 0.001)
        assert baseline_presets("Adam*", "m2") == AdamHyper(0.1, 0.99, 0.999, 1.0, 0.001)

    def test_unknown(self):
        with pytest.raises(KeyError):
            baseline_presets("RMSprop", "m0")
        with pytest.raises(KeyError):
            baseline_presets("SGD", "m9")
