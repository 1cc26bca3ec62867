"""Temporal matching and feedback-quality metrics.

Ground-truth and predicted feedbacks are paired order-preservingly within a
fixed time window (default 3 s), maximizing pair count and tie-breaking on
minimal total time offset. Fluency metrics are computed on matched pairs
only; temporal precision/recall/F come from the match counts.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

DEFAULT_WINDOW = 3.0


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple  # (gt_index, pred_index), strictly increasing in both
    unmatched_gt: tuple
    unmatched_pred: tuple
    window: float


def _check_sorted(times, name):
    for a, b in zip(times, times[1:]):
        if b < a:
            raise ValueError(f"{name} times are not sorted ascending")


def match_events(gt_times, pred_times, window=DEFAULT_WINDOW):
    """Best order-preserving matching within the window.

    Among all order-preserving matchings whose pairs satisfy
    |t_gt - t_pred| <= window, picks one with the maximum number of pairs,
    tie-broken by minimal total |dt|. Dynamic program over the (gt, pred)
    grid, O(n*m).
    """
    gt_times = list(gt_times)
    pred_times = list(pred_times)
    _check_sorted(gt_times, "gt")
    _check_sorted(pred_times, "pred")
    n, m = len(gt_times), len(pred_times)
    # dp[i][j]: (pairs, -cost) over gt[:i] x pred[:j], maximized lexically
    dp = [[(0, 0.0)] * (m + 1) for _ in range(n + 1)]
    move = [[0] * (m + 1) for _ in range(n + 1)]  # 1=skip gt, 2=skip pred, 3=pair
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best, mv = dp[i - 1][j], 1
            if dp[i][j - 1] > best:
                best, mv = dp[i][j - 1], 2
            d = abs(gt_times[i - 1] - pred_times[j - 1])
            if d <= window + 1e-9:
                p, c = dp[i - 1][j - 1]
                cand = (p + 1, c - d)
                if cand > best:
                    best, mv = cand, 3
            dp[i][j], move[i][j] = best, mv
    for j in range(1, m + 1):
        move[0][j] = 2
    for i in range(1, n + 1):
        move[i][0] = 1
    pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        mv = move[i][j]
        if mv == 3:
            pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif mv == 1:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    matched_gt = {a for a, _ in pairs}
    matched_pred = {b for _, b in pairs}
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_gt=tuple(k for k in range(n) if k not in matched_gt),
        unmatched_pred=tuple(k for k in range(m) if k not in matched_pred),
        window=window,
    )


def match_events_greedy(gt_times, pred_times, window=DEFAULT_WINDOW):
    """Left-to-right greedy matcher (sensitivity-analysis alternative)."""
    _check_sorted(gt_times, "gt")
    _check_sorted(pred_times, "pred")
    pairs = []
    j_start = 0
    for i, tg in enumerate(gt_times):
        best_j, best_d = None, None
        for j in range(j_start, len(pred_times)):
            d = abs(tg - pred_times[j])
            if d <= window + 1e-9 and (best_d is None or d < best_d):
                best_j, best_d = j, d
        if best_j is not None:
            pairs.append((i, best_j))
            j_start = best_j + 1
    matched_gt = {a for a, _ in pairs}
    matched_pred = {b for _, b in pairs}
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_gt=tuple(k for k in range(len(gt_times)) if k not in matched_gt),
        unmatched_pred=tuple(k for k in range(len(pred_times)) if k not in matched_pred),
        window=window,
    )


def brute_force_match(gt_times, pred_times, window=DEFAULT_WINDOW):
    """Exhaustive search over order-preserving matchings (test oracle).

    Only practical for small inputs (<= ~8 per side).
    """

    memo = {}

    def rec(i, j):
        if i >= len(gt_times) or j >= len(pred_times):
            return (0, 0.0, ())
        if (i, j) in memo:
            return memo[i, j]
        best = max(rec(i + 1, j), rec(i, j + 1))
        d = abs(gt_times[i] - pred_times[j])
        if d <= window + 1e-9:
            p, c, tail = rec(i + 1, j + 1)
            cand = (p + 1, c - d, ((i, j),) + tail)
            if cand[:2] > best[:2]:
                best = cand
        memo[i, j] = best
        return best

    pairs = rec(0, 0)[2]
    matched_gt = {a for a, _ in pairs}
    matched_pred = {b for _, b in pairs}
    return MatchResult(
        pairs=pairs,
        unmatched_gt=tuple(k for k in range(len(gt_times)) if k not in matched_gt),
        unmatched_pred=tuple(k for k in range(len(pred_times)) if k not in matched_pred),
        window=window,
    )


def temporal_f(match):
    """(precision, recall, f_score) from a MatchResult."""
    tp = len(match.pairs)
    fp = len(match.unmatched_pred)
    fn = len(match.unmatched_gt)
    if tp + fp + fn == 0:
        return 1.0, 1.0, 1.0
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def _lcs_len(a, b):
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[-1]))
        prev = cur
    return prev[-1]


def rouge_l(reference, hypothesis):
    """ROUGE-L F1 between two word sequences."""
    lcs = _lcs_len(reference, hypothesis)
    r = lcs / len(reference) if reference else 0.0
    p = lcs / len(hypothesis) if hypothesis else 0.0
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def unigram_f(reference, hypothesis):
    """Bag-of-words F1: the in-tree stand-in for external similarity metrics."""
    from collections import Counter

    ref, hyp = Counter(reference), Counter(hypothesis)
    overlap = sum((ref & hyp).values())
    r = overlap / len(reference) if reference else 0.0
    p = overlap / len(hypothesis) if hypothesis else 0.0
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


SIMILARITY_METRICS = {"rouge_l": rouge_l, "unigram_f": unigram_f}


def fluency_on_matches(match, gt_feedbacks, predictions, metric=rouge_l):
    """Mean metric over matched pairs; (0.0, 0) when nothing matched."""
    if not match.pairs:
        return 0.0, 0
    total = sum(
        metric(gt_feedbacks[i].words, predictions[j].words) for i, j in match.pairs
    )
    return total / len(match.pairs), len(match.pairs)


# ---------------------------------------------------------------------------
# LLM judge protocol

JUDGE_PROMPT_TEMPLATE = """<INST>
You are an intelligent chatbot designed for evaluating feedback sequences provided by a virtual fitness coach to a person. You always provide your responses as a python dictionary string.

Your task is to compare the accuracy of the the predicted feedback with the ground truth feedback. Here is how you can accomplish this:
-The predicted feedback must be factually accurate, relevant and align with the ground truth feedback.
-Consider synonyms or paraphrases as valid matches.
-Take into account repetition counts that can expressed both in numeric form or in words.

Please evaluate the following predicted feedback:
-Ground truth feedback: {gt}
-Predicted feedback: {pred}

Provide your evaluation as a python dictionary string with the accuracy score where the score is an integer value between 1 and 5, with 5 indicating the highest level of accuracy. Generate the response only in the form of a Python dictionary string with keys 'score', where its value is the accuracy score in INTEGER, not STRING. DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANATION.
For example, your response should look like this: {{"score": 3.2}}.
</INST>"""


def llm_judge_prompt(gt_text, pred_text):
    if not gt_text or not pred_text:
        raise ValueError("judge prompt needs non-empty ground truth and prediction")
    return JUDGE_PROMPT_TEMPLATE.format(gt=gt_text, pred=pred_text)


_SCORE_RE = re.compile(
    r"\{[^{}]*?['\"]score['\"]\s*:\s*(-?\d+(?:\.\d+)?)[^{}]*\}", re.DOTALL
)


def parse_judge_response(text):
    """First mapping literal with a 'score' key; round half-up, clamp to 1..5."""
    m = _SCORE_RE.search(text)
    if not m:
        raise ValueError(f"no parseable score in judge response: {text!r}")
    score = int(math.floor(float(m.group(1)) + 0.5))
    return min(5, max(1, score))


# ---------------------------------------------------------------------------
# Corpus-level aggregation


@dataclass
class SessionRow:
    session_id: str
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_score: float
    rouge_l_sum: float
    similarity_sum: float
    n_pairs: int
    llm_prompts: list = field(default_factory=list)
    llm_scores: list = field(default_factory=list)


def _session_row(args):
    """Match + score one session (module-level so it can run in a Pool)."""
    session, preds, window, similarity, matcher, want_prompts = args
    match_fn = match_events if matcher == "dp" else match_events_greedy
    sim_fn = SIMILARITY_METRICS[similarity] if isinstance(similarity, str) else similarity
    gt = list(session.gt_feedbacks)
    preds = sorted(preds, key=lambda f: f.t)
    match = match_fn([f.t for f in gt], [f.t for f in preds], window)
    p, r, f = temporal_f(match)
    row = SessionRow(
        session_id=session.id,
        tp=len(match.pairs),
        fp=len(match.unmatched_pred),
        fn=len(match.unmatched_gt),
        precision=p,
        recall=r,
        f_score=f,
        rouge_l_sum=sum(rouge_l(gt[i].words, preds[j].words) for i, j in match.pairs),
        similarity_sum=sum(sim_fn(gt[i].words, preds[j].words) for i, j in match.pairs),
        n_pairs=len(match.pairs),
    )
    if want_prompts:
        row.llm_prompts = [
            llm_judge_prompt(gt[i].text, preds[j].text) for i, j in match.pairs
        ]
    return row


@dataclass
class EvalReport:
    policy: str
    window: float
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_score: float
    rouge_l: float
    similarity: float
    similarity_name: str
    n_pairs: int
    llm_accuracy: float | None
    rows: list

    def to_dict(self):
        return {
            "policy": self.policy,
            "window": self.window,
            "counts": {"tp": self.tp, "fp": self.fp, "fn": self.fn},
            "temporal_precision": self.precision,
            "temporal_recall": self.recall,
            "temporal_f_score": self.f_score,
            "rouge_l": self.rouge_l,
            "similarity_metric": self.similarity_name,
            "similarity": self.similarity,
            "matched_pairs": self.n_pairs,
            "llm_accuracy": self.llm_accuracy,
            "sessions": [
                {
                    "session_id": r.session_id,
                    "tp": r.tp,
                    "fp": r.fp,
                    "fn": r.fn,
                    "f_score": r.f_score,
                }
                for r in self.rows
            ],
        }


def evaluate(
    sessions,
    prediction_records,
    window=DEFAULT_WINDOW,
    similarity="unigram_f",
    matcher="dp",
    judge=None,
    judge_concurrency=4,
    policy_name="",
    jobs=1,
):
    """Match and score predictions against ground truth, per session.

    sessions: iterable of Session; prediction_records: iterable of
    (session_id, [TimedFeedback...]). Temporal scores are micro-averaged over
    TP/FP/FN; fluency means are pair-weighted. llm_accuracy is filled only
    when a judge callable (prompt -> response text) is supplied. jobs > 1
    spreads the per-session matching over worker processes.
    """
    by_id = {s.id: s for s in sessions}
    sim_name = similarity if isinstance(similarity, str) else getattr(
        similarity, "__name__", "custom"
    )
    tasks = []
    for session_id, preds in prediction_records:
        if session_id not in by_id:
            raise ValueError(f"unknown session id {session_id!r}")
        tasks.append(
            (by_id[session_id], preds, window, similarity, matcher, judge is not None)
        )
    if jobs > 1 and len(tasks) > 1:
        import multiprocessing

        with multiprocessing.Pool(jobs) as pool:
            rows = pool.map(_session_row, tasks)
    else:
        rows = [_session_row(t) for t in tasks]

    if judge is not None:
        from concurrent.futures import ThreadPoolExecutor

        all_prompts = [(r, p) for r in rows for p in r.llm_prompts]
        with ThreadPoolExecutor(max_workers=judge_concurrency) as pool:
            responses = list(pool.map(judge, (p for _, p in all_prompts)))
        for (row, _), resp in zip(all_prompts, responses):
            row.llm_scores.append(parse_judge_response(resp))

    tp = sum(r.tp for r in rows)
    fp = sum(r.fp for r in rows)
    fn = sum(r.fn for r in rows)
    if tp + fp + fn == 0:
        prec = rec = f1 = 1.0
    else:
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    n_pairs = sum(r.n_pairs for r in rows)
    rouge_mean = sum(r.rouge_l_sum for r in rows) / n_pairs if n_pairs else 0.0
    sim_mean = sum(r.similarity_sum for r in rows) / n_pairs if n_pairs else 0.0
    llm_scores = [s for r in rows for s in r.llm_scores]
    llm_mean = sum(llm_scores) / len(llm_scores) if llm_scores else None
    return EvalReport(
        policy=policy_name,
        window=window,
        tp=tp,
        fp=fp,
        fn=fn,
        precision=prec,
        recall=rec,
        f_score=f1,
        rouge_l=rouge_mean,
        similarity=sim_mean,
        similarity_name=sim_name,
        n_pairs=n_pairs,
        llm_accuracy=llm_mean,
        rows=rows,
    )


def report_table(reports):
    """Aligned plain-text table, one row per report."""
    headers = ["policy", "T-P", "T-R", "T-F", "ROUGE-L", "SIM", "pairs", "LLM-Acc"]
    rows = []
    for rep in reports:
        rows.append(
            [
                rep.policy or "-",
                f"{rep.precision:.3f}",
                f"{rep.recall:.3f}",
                f"{rep.f_score:.3f}",
                f"{rep.rouge_l:.3f}",
                f"{rep.similarity:.3f}",
                str(rep.n_pairs),
                f"{rep.llm_accuracy:.2f}" if rep.llm_accuracy is not None else "-",
            ]
        )
    widths = [
        max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(headers)
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines)
