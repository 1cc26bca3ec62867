import pytest

from streamcoach.core import (
    EXERCISE_NONE,
    VARIANT_CORRECT,
    VARIANT_TRANSITION,
    ObservationEvent,
    ObservationSymbol,
    SegmentSpec,
    Session,
    TimedFeedback,
    TokenStream,
    Vocabulary,
    build_vocabulary,
    deinterleave,
    feedbacks_by_tick,
    interleave,
    is_on_grid,
    normalize_words,
    quantize,
    seconds_to_tick,
    session_from_jsonl,
    session_to_jsonl,
    validate_session,
)


def test_normalize_words():
    assert normalize_words("Keep your Back straight!") == (
        "keep",
        "your",
        "back",
        "straight",
    )
    assert normalize_words("do 3 more reps.") == ("do", "3", "more", "reps")
    assert normalize_words("") == ()


def test_tick_helpers():
    assert seconds_to_tick(0.0) == 0
    assert seconds_to_tick(0.24) == 0
    assert seconds_to_tick(0.25) == 1
    assert seconds_to_tick(1.0, tick_len=0.5) == 2
    assert quantize(0.3) == 0.25
    assert is_on_grid(0.75)
    assert not is_on_grid(0.3)
    with pytest.raises(ValueError):
        seconds_to_tick(-0.1)


def test_observation_symbol_sentinel():
    ObservationSymbol(0, VARIANT_TRANSITION)
    ObservationSymbol(3, VARIANT_CORRECT)
    with pytest.raises(ValueError):
        ObservationSymbol(3, VARIANT_TRANSITION)
    with pytest.raises(ValueError):
        ObservationSymbol(-1, 0)


def test_timed_feedback_validation():
    fb = TimedFeedback(1.0, ("good", "job"), "affirmative")
    assert fb.text == "good job"
    with pytest.raises(ValueError):
        TimedFeedback(1.0, (), "affirmative")
    with pytest.raises(ValueError):
        TimedFeedback(1.0, ("w",) * 21, "affirmative")
    with pytest.raises(ValueError):
        TimedFeedback(1.0, ("hi",), "question")


def test_vocabulary_reserved_tokens():
    v = Vocabulary(["good", "job"])
    assert v.id(Vocabulary.NEXT_TOKEN) == 0
    assert v.id(Vocabulary.FEEDBACK_TOKEN) == 1
    assert v.id("good") == 2
    assert v.word(3) == "job"
    assert v.size == 4
    assert "good" in v and "bad" not in v
    with pytest.raises(ValueError):
        v.id("bad")
    with pytest.raises(ValueError):
        v.word(4)


def test_build_vocabulary():
    v = build_vocabulary([("a", "b"), ("b", "c")])
    assert v.words == ("<next>", "<feedback>", "a", "b", "c")
    with pytest.raises(ValueError):
        build_vocabulary([])
    with pytest.raises(ValueError):
        build_vocabulary([("<next>",)])


def test_vocabulary_content_hash_is_order_sensitive():
    a = build_vocabulary([("x", "y")])
    b = build_vocabulary([("y", "x")])
    assert a.content_hash() != b.content_hash()
    assert a.content_hash() == build_vocabulary([("x", "y")]).content_hash()


def _tiny_session(feedback_words=("good", "job"), fb_t=0.25, n_ticks=3):
    segments = (SegmentSpec(1, 0.0, n_ticks * 0.25),)
    observations = tuple(
        ObservationEvent(k * 0.25, ObservationSymbol(1, VARIANT_CORRECT))
        for k in range(n_ticks)
    )
    fbs = (TimedFeedback(fb_t, tuple(feedback_words), "affirmative"),) if feedback_words else ()
    return Session("s", 0, segments, observations, fbs)


def test_interleave_worked_example():
    """3 ticks, feedback 'good job' inside tick 1."""
    session = _tiny_session()
    vocab = build_vocabulary([("good", "job")])
    stream = interleave(session, vocab)
    g, j = vocab.id("good"), vocab.id("job")
    N, F = Vocabulary.NEXT, Vocabulary.FEEDBACK
    assert stream.tokens == (N, F, g, j, N, N)
    assert stream.loss_weight == (0.1, 1.0, 1.0, 1.0, 0.1, 0.1)
    # the burst sees the last observation delivered before it (tick 0)
    assert stream.obs_index == (0, 0, 0, 0, 1, 2)


def test_interleave_no_feedback():
    session = _tiny_session(feedback_words=None)
    vocab = build_vocabulary([("good",)])
    stream = interleave(session, vocab)
    assert stream.tokens == (0, 0, 0)
    assert stream.obs_index == (0, 1, 2)


def test_interleave_feedback_at_tick_zero_clamps_obs():
    session = _tiny_session(fb_t=0.0)
    vocab = build_vocabulary([("good", "job")])
    stream = interleave(session, vocab)
    assert stream.tokens[0] == Vocabulary.FEEDBACK
    assert stream.obs_index[0] == 0


def test_deinterleave_roundtrip():
    session = _tiny_session()
    vocab = build_vocabulary([("good", "job")])
    stream = interleave(session, vocab)
    assert deinterleave(stream, vocab) == [(1, ("good", "job"))]


def test_deinterleave_rejects_stray_word():
    vocab = build_vocabulary([("good",)])
    stream = TokenStream((0, 2, 0), (0, 0, 1), (0.1, 1.0, 0.1))
    with pytest.raises(ValueError):
        deinterleave(stream, vocab)


def test_feedbacks_by_tick_collision():
    fbs = [
        TimedFeedback(0.25, ("a",), "corrective"),
        TimedFeedback(0.3, ("b",), "corrective"),
    ]
    with pytest.raises(ValueError):
        feedbacks_by_tick(fbs, 0.25, 4)
    with pytest.raises(ValueError):
        feedbacks_by_tick([TimedFeedback(2.0, ("a",), "corrective")], 0.25, 4)


def test_token_stream_validation():
    with pytest.raises(ValueError):
        TokenStream((0, 0), (0,), (0.1, 0.1))
    with pytest.raises(ValueError):
        TokenStream((0, 0), (1, 0), (0.1, 0.1))


def test_validate_session_catches_gaps():
    good = _tiny_session()
    assert validate_session(good) is good
    bad = Session(
        "s",
        0,
        (SegmentSpec(1, 0.0, 0.5), SegmentSpec(2, 0.75, 0.5)),
        good.observations,
        (),
    )
    with pytest.raises(ValueError):
        validate_session(bad)


def test_validate_session_off_grid_feedback():
    session = _tiny_session(fb_t=0.3)
    with pytest.raises(ValueError):
        validate_session(session)


def test_session_jsonl_roundtrip_is_byte_stable():
    session = _tiny_session()
    line = session_to_jsonl(session)
    back = session_from_jsonl(line)
    assert session_to_jsonl(back) == line
    assert back.gt_feedbacks == session.gt_feedbacks
    assert back.observations == session.observations
    assert back.segments[0].exercise_id == 1


def test_segment_at():
    session = _tiny_session()
    assert session.segment_at(0.0).exercise_id == 1
    assert session.segment_at(10.0) is None
    assert session.duration == 0.75
    assert session.n_ticks == 3
