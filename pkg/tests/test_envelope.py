import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from safe_ars._validation import ContractError
from safe_ars.envelope import (
    CRITERION,
    RECOVERY_ENVELOPE,
    InsufficientHorizonError,
    RewardWeights,
    SafetyWindowSpec,
    StepOutcome,
    check_recovery_criterion,
    combined_reward,
    delta_v,
    safety_value,
    step_reward,
    window_index,
)

T_PF = 1.15
TOL = 1e-12
voltages = st.lists(st.floats(0.0, 1.6), min_size=1, max_size=6)
offsets = st.floats(1e-3, 6.0)


class TestSafetyValue:
    def test_window_center(self):
        assert safety_value([1.1] * 4, T_PF + 0.1, T_PF) == pytest.approx(0.16, abs=TOL)

    def test_lower_boundary_first_window(self):
        assert safety_value([0.7, 1.1, 1.1, 1.1], T_PF + 0.1, T_PF) == pytest.approx(0.0, abs=TOL)

    def test_last_window_nominal(self):
        # 0.275^2 - 0.225^2
        assert safety_value([1.0] * 4, T_PF + 2.0, T_PF) == pytest.approx(0.025, abs=TOL)

    def test_upper_ceiling(self):
        assert safety_value([1.5, 1.0, 1.0], T_PF + 2.0, T_PF) == pytest.approx(0.0, abs=TOL)

    def test_pre_fault_is_rejected(self):
        with pytest.raises(ContractError):
            safety_value([1.0], T_PF, T_PF)

    def test_empty_voltages_rejected(self):
        with pytest.raises(ContractError):
            safety_value([], T_PF + 1, T_PF)

    @pytest.mark.parametrize("k,s", [(0, 0.2), (1, 0.4), (2, 1.0), (3, 3.0)])
    def test_corridor_edges_are_zero(self, k, s):
        spec = SafetyWindowSpec()
        low, high = spec.corridor(k)
        assert safety_value([low], T_PF + s, T_PF) == pytest.approx(0.0, abs=TOL)
        assert safety_value([high], T_PF + s, T_PF) == pytest.approx(0.0, abs=TOL)

    def test_window_constants_match_fig_bounds(self):
        spec = SafetyWindowSpec()
        for k, low in enumerate((0.7, 0.8, 0.9, 0.95)):
            c, r = spec.centers[k], spec.radii[k]
            assert c + r == pytest.approx(1.5, abs=TOL)
            assert c - r == pytest.approx(low, abs=TOL)

    @given(voltages, offsets)
    def test_permutation_invariance(self, v, s):
        base = safety_value(v, T_PF + s, T_PF)
        assert safety_value(list(reversed(v)), T_PF + s, T_PF) == base
        assert safety_value(sorted(v), T_PF + s, T_PF) == base

    @given(voltages, offsets)
    def test_sign_matches_corridor(self, v, s):
        k = window_index(s)
        low, high = SafetyWindowSpec().corridor(k)
        f = safety_value(v, T_PF + s, T_PF)
        inside = all(low <= x <= high for x in v)
        if f > TOL:
            assert inside
        if f < -TOL:
            assert not inside


def test_window_index_boundaries():
    assert window_index(0.33) == 0
    assert window_index(0.3300001) == 1
    assert window_index(0.5) == 1
    assert window_index(1.5) == 2
    assert window_index(1.5000001) == 3


class TestDeltaV:
    def test_above_bound(self):
        assert delta_v(0.75, T_PF + 0.2, T_PF) == 0.0

    def test_first_window(self):
        assert delta_v(0.6, T_PF + 0.2, T_PF) == pytest.approx(-0.1, abs=TOL)

    def test_last_window(self):
        assert delta_v(0.92, T_PF + 2.0, T_PF) == pytest.approx(-0.03, abs=TOL)

    def test_pre_fault_rejected(self):
        with pytest.raises(ContractError):
            delta_v(0.9, 0.5, T_PF)

    @given(st.floats(0, 1.5), st.floats(0, 1.5), offsets)
    def test_monotone_and_nonpositive(self, a, b, s):
        lo, hi = sorted((a, b))
        assert delta_v(lo, T_PF + s, T_PF) <= delta_v(hi, T_PF + s, T_PF) <= 0.0

    @given(offsets)
    def test_zero_above_bound(self, s):
        bound = (0.7, 0.8, 0.9, 0.95)[window_index(s)]
        assert delta_v(bound, T_PF + s, T_PF) == 0.0
        assert delta_v(bound + 0.3, T_PF + s, T_PF) == 0.0


class TestStepReward:
    def test_default_weights_example(self):
        out = StepOutcome(T_PF + 1.0, (0.85, 0.92, 0.95, 0.88), (0.1, 0.0, 0.05), 0)
        r, blackout = step_reward(out, T_PF, RewardWeights(1.0, 0.5, 1.0))
        assert not blackout
        assert r == pytest.approx(-0.145, abs=TOL)

    def test_blackout_branch(self):
        out = StepOutcome(T_PF + 4.5, (0.94, 1.0, 1.0, 1.0), (0, 0, 0), 0)
        assert step_reward(out, T_PF) == (-1000.0, True)

    def test_healthy_noop(self):
        for s in (0.1, 0.4, 1.0, 3.0, 6.0):
            out = StepOutcome(T_PF + s, (1.0,) * 4, (0.0,) * 3, 0)
            assert step_reward(out, T_PF) == (0.0, False)

    def test_pre_fault_voltage_term_ignored(self):
        out = StepOutcome(0.5, (0.3,) * 4, (0.2, 0.0, 0.0), 1)
        r, _ = step_reward(out, T_PF)
        assert r == pytest.approx(-0.5 * 0.2 - 1.0, abs=TOL)

    def test_invalid_penalty(self):
        out = StepOutcome(T_PF + 1.0, (1.0,) * 4, (0.0,) * 3, 2)
        assert step_reward(out, T_PF)[0] == pytest.approx(-2.0, abs=TOL)

    @given(
        st.lists(st.floats(0.5, 1.2), min_size=4, max_size=4),
        st.lists(st.floats(0, 0.2), min_size=3, max_size=3),
        st.floats(0, 0.2),
        st.integers(0, 3),
        st.integers(0, 3),
        st.floats(0.01, 3.9),
    )
    def test_non_increasing_in_shed_and_invalid(self, v, shed, extra, n, dn, s):
        t = T_PF + s
        base = step_reward(StepOutcome(t, tuple(v), tuple(shed), n), T_PF)[0]
        more_shed = list(shed)
        more_shed[0] += extra
        assert step_reward(StepOutcome(t, tuple(v), tuple(more_shed), n), T_PF)[0] <= base
        assert step_reward(StepOutcome(t, tuple(v), tuple(shed), n + dn), T_PF)[0] <= base

    def test_weights_validated(self):
        with pytest.raises(ContractError):
            RewardWeights(c1=0.0)
        with pytest.raises(ContractError):
            RewardWeights(blackout_penalty=1.0)


class TestCombinedReward:
    def test_examples(self):
        assert combined_reward(-0.145, 0.025, 2.0) == pytest.approx(-0.095, abs=TOL)
        assert combined_reward(3.25, 0.0, 7.0) == 3.25
        assert combined_reward(0.0, -0.1, 4.0) == pytest.approx(-0.4, abs=TOL)

    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_nonpositive_multiplier_rejected(self, lam):
        with pytest.raises(ContractError):
            combined_reward(1.0, 1.0, lam)

    @given(st.floats(-10, 10), st.floats(-1, 1), st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0]),
           st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0]))
    def test_linear_in_multiplier(self, r, f, l1, l2):
        diff = combined_reward(r, f, l1 + l2) - combined_reward(r, f, l1)
        assert diff == pytest.approx(l2 * f, abs=1e-12)


def _flat(times, v=1.0, n=4):
    return [StepOutcome(t, (v,) * n) for t in times]


TIMES = [round(0.1 * k, 10) for k in range(1, 101)]


class TestRecoveryCriterion:
    def test_all_nominal_passes(self):
        rep = check_recovery_criterion(_flat(TIMES), T_PF)
        assert rep.passed and rep.first_violation_time is None

    def test_dip_inside_tolerated_window(self):
        traj = _flat(TIMES)
        # t - t_pf = 1.0 falls in (0.5, 1.5] where only 0.9 is required
        idx = [i for i, o in enumerate(traj) if abs(o.t - (1.0 + 1.0)) < 1e-9][0]
        traj[idx] = StepOutcome(traj[idx].t, (1.0, 0.93, 1.0, 1.0))
        assert check_recovery_criterion(traj, 1.0).passed

    def test_late_dip_fails(self):
        traj = _flat(TIMES)
        idx = [i for i, o in enumerate(traj) if abs(o.t - 3.0) < 1e-9][0]
        traj[idx] = StepOutcome(traj[idx].t, (1.0, 1.0, 0.93, 1.0))
        rep = check_recovery_criterion(traj, 1.0)
        assert not rep.passed
        assert rep.first_violation_time == pytest.approx(3.0)
        assert rep.violating_bus == 2
        assert rep.n_violating_samples == 1

    def test_ceiling(self):
        traj = _flat(TIMES)
        traj[50] = StepOutcome(traj[50].t, (1.0, 1.51, 1.0, 1.0))
        assert not check_recovery_criterion(traj, 1.0).passed

    def test_insufficient_horizon(self):
        with pytest.raises(InsufficientHorizonError):
            check_recovery_criterion(_flat([0.1, 0.2, 1.0, 2.0]), 1.0)
        with pytest.raises(InsufficientHorizonError):
            check_recovery_criterion([], 1.0)


def test_envelope_lower_bound_lookup():
    assert RECOVERY_ENVELOPE.lower_bound(-0.1) is None
    assert RECOVERY_ENVELOPE.lower_bound(0.1) == 0.7
    assert RECOVERY_ENVELOPE.lower_bound(0.4) == 0.8
    assert RECOVERY_ENVELOPE.lower_bound(1.0) == 0.9
    assert RECOVERY_ENVELOPE.lower_bound(2.0) == 0.95
    assert CRITERION.lower_bound(0.2) == 0.0


def test_safety_nonnegative_implies_criterion_pass():
    """Cross-check over random trajectories, including exact corridor edges."""
    rng = np.random.default_rng(7)
    spec = SafetyWindowSpec()
    t_pf = 1.0
    times = [0.1 * k for k in range(1, 101)]
    checked = 0
    for trial in range(1000):
        traj = []
        for t in times:
            s = t - t_pf
            if s > 0:
                low, high = spec.corridor(window_index(s))
                if trial % 4 == 0:
                    v = rng.choice([low, high, 1.0], size=4)
                else:
                    v = rng.uniform(low - 0.05, high + 0.02, size=4) if trial % 3 else \
                        rng.uniform(low, high, size=4)
            else:
                v = rng.uniform(0.2, 1.0, size=4)
            traj.append(StepOutcome(t, tuple(float(x) for x in v)))
        f_min = min(safety_value(o.voltages, o.t, t_pf) for o in traj if o.t > t_pf)
        rep = check_recovery_criterion(traj, t_pf)
        if f_min >= -1e-12:
            checked += 1
            assert rep.passed, f"trial {trial}"
    assert checked > 250


def test_rounded_offsets_stay_in_their_window():
    # 1.48 - 1.15 is 0.33000000000000007 in binary floating point
    assert window_index(1.48 - 1.15) == 0
    assert delta_v(0.7, 1.48, 1.15) == 0.0
    assert CRITERION.lower_bound(1.48 - 1.15) == 0.0
    assert CRITERION.lower_bound(0.34) == 0.8
