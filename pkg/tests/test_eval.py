import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamcoach.core import TimedFeedback, normalize_words
from streamcoach.evaluation import (
    JUDGE_PROMPT_TEMPLATE,
    MatchResult,
    brute_force_match,
    evaluate,
    fluency_on_matches,
    llm_judge_prompt,
    match_events,
    match_events_greedy,
    parse_judge_response,
    report_table,
    rouge_l,
    temporal_f,
    unigram_f,
)
from streamcoach.synthgen import generate_session


def test_matching_worked_example():
    """gt [3,9,15] vs pred [4,16,20]: only (3,4) and (15,16) can pair."""
    match = match_events([3.0, 9.0, 15.0], [4.0, 16.0, 20.0], window=3.0)
    assert match.pairs == ((0, 0), (2, 1))
    assert match.unmatched_gt == (1,)
    assert match.unmatched_pred == (2,)
    p, r, f = temporal_f(match)
    assert p == pytest.approx(2 / 3)
    assert r == pytest.approx(2 / 3)
    assert f == pytest.approx(2 / 3)


def test_matching_prefers_more_pairs_then_lower_cost():
    # one pred between two gts: pairs with the closer gt
    match = match_events([0.0, 2.0], [1.5], window=3.0)
    assert match.pairs == ((1, 0),)
    # two preds, two gts: both pair despite one larger offset
    match = match_events([0.0, 1.0], [0.9, 1.1], window=3.0)
    assert match.pairs == ((0, 0), (1, 1))


def test_matching_shift_beyond_window_empties():
    gt = [1.0, 5.0, 9.0]
    pred = [t + 3.5 for t in gt]
    assert match_events(gt, pred, window=3.0).pairs != ()
    pred = [t + 20.0 for t in gt]
    assert match_events(gt, pred, window=3.0).pairs == ()


def test_matching_rejects_unsorted():
    with pytest.raises(ValueError):
        match_events([2.0, 1.0], [])
    with pytest.raises(ValueError):
        match_events([], [2.0, 1.0])


def test_temporal_f_empty_both():
    match = match_events([], [], window=3.0)
    assert temporal_f(match) == (1.0, 1.0, 1.0)


def test_temporal_f_one_side_empty():
    p, r, f = temporal_f(match_events([1.0], [], window=3.0))
    assert (p, r, f) == (0.0, 0.0, 0.0)


times = st.lists(
    st.floats(min_value=0.0, max_value=30.0, allow_nan=False), min_size=0, max_size=6
).map(sorted)


@given(gt=times, pred=times)
@settings(max_examples=300, deadline=None)
def test_dp_matches_brute_force(gt, pred):
    dp = match_events(gt, pred, window=3.0)
    bf = brute_force_match(gt, pred, window=3.0)

    def cost(match):
        return sum(abs(gt[i] - pred[j]) for i, j in match.pairs)

    assert len(dp.pairs) == len(bf.pairs)
    assert cost(dp) == pytest.approx(cost(bf))


@given(gt=times, pred=times)
@settings(max_examples=100, deadline=None)
def test_greedy_never_beats_dp(gt, pred):
    dp = match_events(gt, pred, window=3.0)
    greedy = match_events_greedy(gt, pred, window=3.0)
    assert len(greedy.pairs) <= len(dp.pairs)


def test_rouge_l_worked_example():
    ref = normalize_words("raise your knees higher")
    hyp = normalize_words("your knees")
    assert rouge_l(ref, hyp) == pytest.approx(2 / 3)
    assert rouge_l(ref, ref) == 1.0
    assert rouge_l(ref, ()) == 0.0
    assert rouge_l((), hyp) == 0.0


def test_rouge_l_is_order_sensitive_unigram_f_is_not():
    a = ("keep", "your", "back", "straight")
    b = ("straight", "back", "your", "keep")
    assert unigram_f(a, b) == 1.0
    assert rouge_l(a, b) < 1.0


def test_fluency_on_matches():
    match = MatchResult(((0, 0), (1, 1)), (), (), 3.0)
    gt = [
        TimedFeedback(1.0, ("a", "b"), "corrective"),
        TimedFeedback(2.0, ("c",), "corrective"),
    ]
    pred = [
        TimedFeedback(1.0, ("a", "b"), "corrective"),
        TimedFeedback(2.0, ("d",), "corrective"),
    ]
    mean, n = fluency_on_matches(match, gt, pred)
    assert n == 2
    assert mean == pytest.approx(0.5)
    empty = MatchResult((), (0, 1), (0, 1), 3.0)
    assert fluency_on_matches(empty, gt, pred) == (0.0, 0)


def test_judge_prompt_contents():
    prompt = llm_judge_prompt("lift your arms", "raise both arms")
    assert "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANATION." in prompt
    assert "-Ground truth feedback: lift your arms" in prompt
    assert "-Predicted feedback: raise both arms" in prompt
    assert '{"score": 3.2}' in prompt
    assert prompt == llm_judge_prompt("lift your arms", "raise both arms")
    assert prompt != llm_judge_prompt("other text", "raise both arms")
    # slots aside, the template is fixed
    assert prompt == JUDGE_PROMPT_TEMPLATE.format(
        gt="lift your arms", pred="raise both arms"
    )
    with pytest.raises(ValueError):
        llm_judge_prompt("", "x")


def test_parse_judge_response_forms():
    assert parse_judge_response('{"score": 3}') == 3
    assert parse_judge_response('Sure! {"score": 3.2}') == 3
    with pytest.raises(ValueError):
        parse_judge_response("no dict here")
    # rounding and clamping
    assert parse_judge_response('{"score": 3.5}') == 4
    assert parse_judge_response("{'score': 9}") == 5
    assert parse_judge_response('{"score": 0}') == 1


def test_evaluate_end_to_end(catalog):
    sessions = [generate_session(s, catalog) for s in (1, 2)]
    records = [(s.id, list(s.gt_feedbacks)) for s in sessions]
    report = evaluate(sessions, records, policy_name="oracle")
    assert report.f_score == pytest.approx(1.0)
    assert report.rouge_l == pytest.approx(1.0)
    assert report.similarity == pytest.approx(1.0)
    assert report.llm_accuracy is None
    assert report.n_pairs == sum(len(s.gt_feedbacks) for s in sessions)
    d = report.to_dict()
    assert d["policy"] == "oracle"
    assert len(d["sessions"]) == 2


def test_evaluate_jobs_matches_serial(catalog):
    sessions = [generate_session(s, catalog) for s in (1, 2, 3)]
    records = [(s.id, list(s.gt_feedbacks)[:-1]) for s in sessions]
    serial = evaluate(sessions, records, policy_name="p")
    parallel = evaluate(sessions, records, policy_name="p", jobs=2)
    assert serial.to_dict() == parallel.to_dict()


def test_evaluate_unknown_session_rejected(catalog):
    s = generate_session(1, catalog)
    with pytest.raises(ValueError):
        evaluate([s], [("nope", [])])


def test_evaluate_with_fake_judge(catalog):
    s = generate_session(1, catalog)
    calls = []

    def fake_judge(prompt):
        calls.append(prompt)
        return '{"score": 4}'

    report = evaluate([s], [(s.id, list(s.gt_feedbacks))], judge=fake_judge)
    assert report.llm_accuracy == pytest.approx(4.0)
    assert len(calls) == len(s.gt_feedbacks)


def test_report_table_alignment():
    text = report_table([])
    assert text.splitlines()[0].startswith("policy")
