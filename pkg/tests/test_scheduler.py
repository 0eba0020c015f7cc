import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffusionx.core import default_grid
from diffusionx.scheduler import (
    DenoisePlan,
    InfeasibleSchedule,
    contiguous_schedule,
    skip_schedule,
    steps_for_strength,
)


class TestStepsForStrength:
    @pytest.mark.parametrize(
        "strength,base,expected",
        [(0.60, 25, 15), (0.40, 1, 1), (0.90, 50, 45), (0.45, 10, 5), (0.90, 25, 23)],
    )
    def test_examples(self, strength, base, expected):
        assert steps_for_strength(strength, base) == expected

    def test_floor_of_one(self):
        assert steps_for_strength(0.40, 1) == 1

    def test_rejects_bad_base(self):
        with pytest.raises(ValueError):
            steps_for_strength(0.5, 0)

    def test_monotone_in_strength_over_grid(self):
        grid = default_grid()
        for base in range(1, 101):
            counts = [steps_for_strength(s, base) for s in grid]
            assert counts == sorted(counts)


class TestSkipSchedule:
    def test_uniform_example(self):
        plan = skip_schedule(0.50, 5, t_max=1000)
        assert plan.t_start == 500
        assert plan.timesteps == (500, 375, 250, 125, 0)

    def test_single_step_convention(self):
        plan = skip_schedule(0.50, 1, t_max=1000)
        assert plan.timesteps == (500,)
        assert plan.steps == 1

    def test_infeasible(self):
        with pytest.raises(InfeasibleSchedule):
            skip_schedule(0.90, 9, t_max=8)

    def test_infeasible_boundary_is_exact(self):
        # t_start = round(0.9 * 8) = 7: 8 steps fit, 9 do not
        plan = skip_schedule(0.90, 8, t_max=8)
        assert plan.timesteps == (7, 6, 5, 4, 3, 2, 1, 0)
        with pytest.raises(InfeasibleSchedule):
            skip_schedule(0.90, 9, t_max=8)

    def test_plan_invariants_over_grid(self):
        for s in default_grid():
            for steps in (1, 2, 3, 7, 20, 50):
                plan = skip_schedule(s, steps, t_max=999)
                assert len(plan.timesteps) == steps
                assert plan.timesteps[0] == plan.t_start == round(s * 999)
                assert all(a > b for a, b in zip(plan.timesteps, plan.timesteps[1:]))
                if steps > 1:
                    assert plan.timesteps[-1] == 0
                assert all(0 <= t <= 999 for t in plan.timesteps)

    @settings(max_examples=300, deadline=None)
    @given(
        s=st.floats(min_value=0.40, max_value=0.90),
        steps=st.integers(min_value=1, max_value=200),
        t_max=st.integers(min_value=200, max_value=2000),
    )
    def test_property_strict_subsequence(self, s, steps, t_max):
        t_start = int(s * t_max + 0.5)
        if steps > t_start + 1:
            with pytest.raises(InfeasibleSchedule):
                skip_schedule(s, steps, t_max)
            return
        plan = skip_schedule(s, steps, t_max)
        assert len(plan.timesteps) == steps
        assert all(a > b for a, b in zip(plan.timesteps, plan.timesteps[1:]))
        assert 0 <= plan.timesteps[-1] <= plan.timesteps[0] <= t_max


class TestContiguousSchedule:
    def test_edge_ladder(self):
        plan = contiguous_schedule(0.6, 4)
        assert plan.timesteps == (3, 2, 1, 0)
        assert plan.t_start == 3
        assert plan.strength == 0.6

    def test_single(self):
        assert contiguous_schedule(0.4, 1).timesteps == (0,)


class TestDenoisePlanValidation:
    def test_rejects_non_decreasing(self):
        with pytest.raises(ValueError):
            DenoisePlan(strength=0.5, steps=3, timesteps=(5, 5, 0), t_start=5)

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            DenoisePlan(strength=0.5, steps=2, timesteps=(5, 3, 0), t_start=5)

    def test_rejects_nonzero_tail(self):
        with pytest.raises(ValueError):
            DenoisePlan(strength=0.5, steps=2, timesteps=(5, 3), t_start=5)
