import numpy as np
import pytest

from alignlab.optim import AdamWState, adamw_step


def test_single_step_hand_check():
    # f(w) = w^2 at w=1: grad 2. Bias-corrected m-hat = 2, v-hat = 4, so the
    # update is lr * 2 / (2 + eps) ~= lr, and w moves from 1.0 to 0.9.
    state = AdamWState(lr=0.1)
    params = {"w": np.array([1.0])}
    adamw_step(state, params, {"w": np.array([2.0])})
    np.testing.assert_allclose(params["w"], [0.9], atol=1e-8)


def test_two_steps_closed_form():
    state = AdamWState(lr=0.1)
    params = {"w": np.array([1.0])}
    w = 1.0
    m = v = 0.0
    for t in (1, 2):
        g = 2.0 * w
        adamw_step(state, {"w": params["w"]}, {"w": np.array([2.0 * w])})
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        mh = m / (1 - 0.9**t)
        vh = v / (1 - 0.999**t)
        w -= 0.1 * mh / (np.sqrt(vh) + 1e-8)
        np.testing.assert_allclose(params["w"], [w], rtol=1e-12)


def test_weight_decay_is_decoupled():
    # with zero gradient-moment update the decay shrinks the weight by
    # lr * wd * w before the Adam step
    state = AdamWState(lr=0.1, weight_decay=0.5)
    params = {"w": np.array([1.0])}
    adamw_step(state, params, {"w": np.array([2.0])})
    # decay: 1 - 0.1*0.5*1 = 0.95; Adam step: -0.1 * 2/(2+eps) ~= -0.1
    np.testing.assert_allclose(params["w"], [0.85], atol=1e-8)


def test_parameters_without_gradient_untouched():
    state = AdamWState(lr=0.1)
    params = {"w": np.array([1.0]), "frozen": np.array([5.0])}
    adamw_step(state, params, {"w": np.array([1.0])})
    assert params["frozen"][0] == 5.0


def test_nonfinite_gradient_raises_with_name():
    state = AdamWState()
    with pytest.raises(FloatingPointError, match="'w'"):
        adamw_step(state, {"w": np.array([1.0])}, {"w": np.array([np.nan])})


def test_updates_in_place_and_deterministic():
    def run():
        state = AdamWState(lr=0.01, weight_decay=0.1)
        params = {"w": np.linspace(-1, 1, 10)}
        for _ in range(25):
            adamw_step(state, params, {"w": 2.0 * params["w"]})
        return params["w"]

    np.testing.assert_array_equal(run(), run())


def test_converges_on_quadratic():
    state = AdamWState(lr=0.05)
    params = {"w": np.array([3.0, -2.0])}
    for _ in range(2000):
        adamw_step(state, params, {"w": 2.0 * params["w"]})
    np.testing.assert_allclose(params["w"], [0.0, 0.0], atol=1e-4)
