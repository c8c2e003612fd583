import numpy as np
import pytest

from safe_ars._validation import ContractError
from safe_ars.toy_env import ToyEnv, ToyParams, ToyScenario, toy_observe, toy_reset, toy_step

P = ToyParams()


def test_reset_without_rng_is_exact_start():
    s = toy_reset(ToyScenario())
    assert s.x == (0.0, 0.0) and s.step == 0
    np.testing.assert_array_equal(toy_observe(s), [-0.8, 0.0])


def test_jitter_bounded_and_seeded():
    a = toy_reset(ToyScenario(jitter=0.05), rng=np.random.default_rng(1))
    b = toy_reset(ToyScenario(jitter=0.05), rng=np.random.default_rng(1))
    assert a == b and max(map(abs, a.x)) <= 0.05


def test_step_geometry():
    s, r, f, done = toy_step(toy_reset(ToyScenario()), (1.0, 0.0))
    assert s.x == pytest.approx((0.1, 0.0))
    assert r == pytest.approx(-0.49)
    assert f == pytest.approx(0.2 ** 2 - 0.1 ** 2)  # 0.3 away, capped at 0.2
    assert not done


def test_safety_negative_inside_hazard():
    s = toy_reset(ToyScenario(start=(0.3, 0.0), jitter=0.0))
    _, _, f, _ = toy_step(s, (1.0, 0.0))
    assert f == pytest.approx(-0.01)


def test_safety_zero_on_boundary():
    s = toy_reset(ToyScenario(start=(0.2, 0.0), jitter=0.0))
    _, _, f, _ = toy_step(s, (1.0, 0.0))
    assert f == pytest.approx(0.0, abs=1e-15)


def test_actions_clipped():
    s, *_ = toy_step(toy_reset(ToyScenario()), (5.0, -5.0))
    assert s.x == pytest.approx((0.1, -0.1))


def test_horizon():
    env = ToyEnv(ToyParams(horizon=3))
    env.reset(ToyScenario(), seed=0)
    dones = [env.step(np.zeros(2))[3] for _ in range(3)]
    assert dones == [False, False, True]
    with pytest.raises(ContractError):
        env.step(np.zeros(2))


def test_params_validated():
    with pytest.raises(ContractError):
        ToyParams(safety_cap=0.05)


def test_start_at_goal_zero_action():
    s = toy_reset(ToyScenario(start=P.goal, jitter=0.0))
    for _ in range(5):
        s, r, _, _ = toy_step(s, (0.0, 0.0))
        assert r == 0.0


def test_straight_path_enters_hazard():
    s = toy_reset(ToyScenario(jitter=0.0))
    fs = []
    for _ in range(8):
        s, _, f, _ = toy_step(s, (1.0, 0.0))
        fs.append(f)
    assert min(fs) < 0


def test_skirting_path_stays_safe():
    s = toy_reset(ToyScenario(jitter=0.0))
    plan = [(0.5, 1.0)] * 2 + [(1.0, 0.0)] * 6 + [(0.5, -1.0)] * 2
    for a in plan:
        s, _, f, _ = toy_step(s, a)
        assert f >= 0
    assert s.x == pytest.approx(P.goal)
