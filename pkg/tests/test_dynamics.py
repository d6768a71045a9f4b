import numpy as np
import pytest

from driveplan import diffcore as dc
from driveplan import dynamics
from driveplan.diffcore import Tensor

RNG = np.random.default_rng(99)


def random_states(n):
    s = RNG.normal(size=(n, 5))
    s[:, 2:4] /= np.linalg.norm(s[:, 2:4], axis=1, keepdims=True)
    s[:, 4] = np.abs(s[:, 4]) * 4.0
    return s


def test_straight_coasting():
    out = dynamics.step(np.array([0.0, 0.0, 1.0, 0.0, 1.0]), np.zeros(2), 0.1)
    assert np.allclose(out, [0.1, 0.0, 1.0, 0.0, 1.0], atol=1e-15)


def test_action_clamp_equivalence():
    s = np.array([0.0, 0.0, 1.0, 0.0, 2.0])
    a_hot = dynamics.step(s, np.array([7.0, 0.0]), 0.1)
    a_max = dynamics.step(s, np.array([5.0, 0.0]), 0.1)
    assert np.array_equal(a_hot, a_max)


def test_clamped_rollouts_identical():
    s0 = random_states(3)
    raw = RNG.normal(size=(20, 3, 2)) * 4.0
    assert np.array_equal(dynamics.rollout(s0, raw, 0.1),
                          dynamics.rollout(s0, dynamics.clamp_action(raw), 0.1))


def test_curved_step_matches_scalar_oracle():
    # independent scalar integration in angle form
    s = np.array([0.0, 0.0, 1.0, 0.0, 2.0])
    a = np.array([0.0, 0.5])
    dt = 0.1
    out = dynamics.step(s, a, dt)
    phi = 0.0
    x = 0.0 + dt * 2.0 * np.cos(phi)
    y = 0.0 + dt * 2.0 * np.sin(phi)
    phi_new = phi + dt * 0.5
    expected = np.array([x, y, np.cos(phi_new), np.sin(phi_new), 2.0])
    assert np.max(np.abs(out - expected)) <= 1e-12


def test_rollout_fixed_point_and_euler_sum():
    s0 = np.array([0.0, 0.0, 1.0, 0.0, 0.0])
    const = dynamics.rollout(s0, np.zeros((10, 2)), 0.1)
    assert np.array_equal(const, np.tile(s0, (11, 1)))

    accel = np.tile(np.array([1.0, 0.0]), (10, 1))
    out = dynamics.rollout(s0, accel, 0.1)
    assert abs(out[-1, 4] - 1.0) < 1e-12
    assert abs(out[-1, 0] - 0.45) < 1e-12  # 0.1 * (0 + 0.1 + ... + 0.9)


def test_rollout_equals_iterated_step_bitwise():
    s0 = random_states(2)
    actions = RNG.normal(size=(15, 2, 2))
    roll = dynamics.rollout(s0, actions, 0.1)
    s = s0
    for k in range(15):
        s = dynamics.step(s, actions[k], 0.1)
        assert np.array_equal(roll[k + 1], s)


def test_rollout_empty_actions():
    with pytest.raises(dynamics.DynamicsError, match="empty"):
        dynamics.rollout(np.zeros(5), np.zeros((0, 2)), 0.1)


def test_heading_norm_after_long_rollout():
    s0 = random_states(4)
    actions = RNG.uniform(-1, 1, size=(1000, 4, 2)) * np.array([5.0, 1.0])
    out = dynamics.rollout(s0, actions, 0.1)
    norms = np.linalg.norm(out[..., 2:4], axis=-1)
    assert np.max(np.abs(norms - 1.0)) < 1e-9


def test_nonfinite_state_rejected():
    s = np.array([np.nan, 0.0, 1.0, 0.0, 1.0])
    with pytest.raises(dynamics.DynamicsError, match="non-finite"):
        dynamics.step(s, np.zeros(2), 0.1)
    with pytest.raises(dynamics.DynamicsError):
        dynamics.step_tensor(Tensor(s.reshape(1, 5)), Tensor(np.zeros((1, 2))))


def test_bad_dt_rejected():
    with pytest.raises(dynamics.DynamicsError, match="dt"):
        dynamics.step(np.zeros(5), np.zeros(2), 0.0)


def test_tensor_path_matches_array_path():
    s0 = random_states(5)
    a = RNG.normal(size=(5, 2)) * np.array([4.0, 0.8])
    out_t = dynamics.step_tensor(Tensor(s0), Tensor(a), 0.1)
    assert np.array_equal(out_t.data, dynamics.step(s0, a, 0.1))


def test_final_position_gradient_vs_fd():
    # interior (unclamped) actions; gradient of terminal position wrt actions
    s0 = random_states(1)
    actions = RNG.uniform(-0.5, 0.5, size=(8, 2))
    dt = 0.1

    def terminal(a):
        return float(dynamics.rollout(s0[0], a, dt)[-1, :2].sum())

    tape = dc.Tape()
    at = tape.leaf(actions.copy())
    s = Tensor(s0)
    for k in range(8):
        s = dynamics.step_tensor(s, dc.narrow(at, 0, k, 1), dt)
    out = dc.sum_all(dc.narrow(s, 1, 0, 2))
    dc.backward(tape, out)
    num = dc.numeric_gradient(terminal, actions.copy())
    assert dc.max_relative_error(at.grad, num) < 1e-6


def test_invert_and_reproduce():
    s0 = random_states(6)
    a = dynamics.clamp_action(RNG.normal(size=(6, 2)) * np.array([3.0, 0.7]))
    s1 = dynamics.step(s0, a, 0.1)
    rec = dynamics.invert_step(s0, s1, 0.1)
    assert np.allclose(rec, a, atol=1e-9)
    for i in range(6):
        assert dynamics.reproduces(s0[i], s1[i], 0.1)
    # a lateral teleport is not reproducible
    s_jump = s1[0].copy()
    s_jump[1] += 1.0
    assert not dynamics.reproduces(s0[0], s_jump, 0.1)
