import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffusionx.core import (
    CandidateSet,
    EventKind,
    IllegalTransition,
    InvalidStrength,
    LatencyBreakdown,
    NegativeComponent,
    Phase,
    SessionEvent,
    SessionState,
    clip_strength,
    default_grid,
    transition,
)


class TestGrid:
    def test_default_grid_contents(self):
        grid = default_grid()
        assert grid.values == (0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9)
        assert len(grid) == 11
        assert grid.min == 0.40 and grid.max == 0.90

    def test_grid_rejects_non_ascending(self):
        with pytest.raises(ValueError):
            CandidateSet((0.4, 0.4, 0.5))
        with pytest.raises(ValueError):
            CandidateSet(())


class TestClipStrength:
    def test_upper_clip(self):
        assert clip_strength(1.30, default_grid()) == 0.90

    def test_lower_clip(self):
        assert clip_strength(0.10, default_grid()) == 0.40

    def test_identity_inside_range(self):
        # no snapping to the lattice: 0.47 is not a grid point
        assert clip_strength(0.47, default_grid()) == 0.47

    def test_nan_rejected(self):
        with pytest.raises(InvalidStrength):
            clip_strength(float("nan"), default_grid())

    @given(st.floats(allow_nan=False, allow_infinity=True, width=64))
    def test_idempotent(self, x):
        grid = default_grid()
        once = clip_strength(x, grid)
        assert clip_strength(once, grid) == once
        assert grid.min <= once <= grid.max


class TestLatencyBreakdown:
    def test_sum_identity(self):
        lb = LatencyBreakdown.build(0.01, 11.71, 0.20)
        assert lb.total_s == pytest.approx(11.92, abs=1e-9)
        assert abs(lb.total_s - (lb.predict_s + lb.generate_s + lb.transmit_s)) <= 1e-9

    def test_rejects_negative(self):
        with pytest.raises(NegativeComponent):
            LatencyBreakdown.build(-0.1, 1.0, 0.0)

    def test_rejects_broken_total(self):
        with pytest.raises(ValueError):
            LatencyBreakdown(1.0, 1.0, 1.0, 5.0)

    def test_round_trip(self):
        lb = LatencyBreakdown.build(0.5, 1.5, 0.25)
        assert LatencyBreakdown.from_dict(lb.to_dict()) == lb


def _submit(prompt="a cat"):
    return SessionEvent(EventKind.SUBMIT_PROMPT, prompt)


class TestTransitions:
    def test_first_prompt(self):
        state = transition(SessionState("s"), _submit("a cat"))
        assert state.phase is Phase.PREVIEW_READY
        assert state.round_index == 1
        assert state.current_prompt == "a cat"

    def test_finalize_on_created_is_illegal(self):
        with pytest.raises(IllegalTransition):
            transition(SessionState("s"), SessionEvent(EventKind.FINALIZE))

    def test_finalize_does_not_consume_a_round(self):
        state = SessionState("s", phase=Phase.PREVIEW_READY, round_index=3)
        out = transition(state, SessionEvent(EventKind.FINALIZE))
        assert out.phase is Phase.CLOUD_REFINING
        assert out.round_index == 3

    def test_refinement_loop_increments(self):
        state = SessionState("s")
        for i in range(1, 5):
            state = transition(state, _submit(f"prompt {i}"))
            assert state.round_index == i
            assert state.phase is Phase.PREVIEW_READY

    def test_cloud_done_only_from_refining(self):
        state = SessionState("s", phase=Phase.CLOUD_REFINING, round_index=1)
        assert transition(state, SessionEvent(EventKind.CLOUD_DONE)).phase is Phase.REFINED
        with pytest.raises(IllegalTransition):
            transition(SessionState("s"), SessionEvent(EventKind.CLOUD_DONE))

    def test_close_from_any_phase(self):
        for phase in Phase:
            state = SessionState("s", phase=phase, round_index=1)
            assert transition(state, SessionEvent(EventKind.CLOSE)).phase is Phase.CLOSED

    def test_submit_requires_prompt(self):
        with pytest.raises(ValueError):
            transition(SessionState("s"), SessionEvent(EventKind.SUBMIT_PROMPT, "   "))

    def test_refined_is_terminal_until_close(self):
        state = SessionState("s", phase=Phase.REFINED, round_index=2)
        for kind in (EventKind.SUBMIT_PROMPT, EventKind.FINALIZE, EventKind.CLOUD_DONE):
            with pytest.raises(IllegalTransition):
                transition(state, SessionEvent(kind, "x" if kind is EventKind.SUBMIT_PROMPT else None))


_EVENTS = st.lists(
    st.sampled_from(
        [
            SessionEvent(EventKind.SUBMIT_PROMPT, "p"),
            SessionEvent(EventKind.FINALIZE),
            SessionEvent(EventKind.CLOUD_DONE),
            SessionEvent(EventKind.CLOSE),
        ]
    ),
    max_size=30,
)


@settings(max_examples=300, deadline=None)
@given(_EVENTS)
def test_random_sequences_preserve_invariants(events):
    """Refined is reached only through exactly one Finalize; round_index counts
    accepted prompts; rejected events leave the state untouched."""
    state = SessionState("s")
    accepted_prompts = 0
    finalizes = 0
    for event in events:
        try:
            new_state = transition(state, event)
        except IllegalTransition:
            continue
        if event.kind is EventKind.SUBMIT_PROMPT:
            accepted_prompts += 1
        if event.kind is EventKind.FINALIZE:
            finalizes += 1
        state = new_state
    assert state.round_index == accepted_prompts
    assert finalizes <= 1  # PreviewReady is unreachable after a Finalize is accepted
    if state.phase is Phase.REFINED:
        assert finalizes == 1
