"""Streaming policy contract, non-learned baselines, and the replay loop."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .core import (
    TimedFeedback,
    Vocabulary,
    normalize_words,
    seconds_to_tick,
)

_WORD_OK = re.compile(r"^[a-z0-9]+$")


@dataclass(frozen=True)
class Action:
    """What a policy does at one tick: stay silent (NEXT) or speak."""

    words: tuple = ()

    @property
    def is_feedback(self):
        return bool(self.words)

    @classmethod
    def next(cls):
        return cls(())

    @classmethod
    def feedback(cls, words):
        words = tuple(words)
        if not words:
            raise ValueError("feedback action needs at least one word")
        if len(words) > 20:
            raise ValueError("feedback action longer than 20 words")
        return cls(words)


class Policy:
    """Base contract: step() is called exactly once per tick, in order."""

    name = "policy"

    def reset(self):
        pass

    def step(self, event):
        raise NotImplementedError


def run_policy(session, policy):
    """Replay a session through a policy; collect its feedbacks.

    The policy sees observations strictly tick by tick; every FEEDBACK action
    is stamped with the current tick's time. Malformed words are rejected.
    """
    policy.reset()
    out = []
    for event in session.observations:
        action = policy.step(event)
        if action.is_feedback:
            for w in action.words:
                if not _WORD_OK.match(w):
                    raise ValueError(f"policy emitted malformed word {w!r}")
            out.append(TimedFeedback(event.t, action.words, "corrective"))
    return sorted(out, key=lambda f: f.t)


class SilentPolicy(Policy):
    name = "silent"

    def step(self, event):
        return Action.next()


class OraclePolicy(Policy):
    """Privileged upper bound: replays the session's ground truth feedbacks.

    Excluded from benchmark tables; the only policy allowed to read ahead.
    """

    name = "oracle"

    def __init__(self, session, shift_s=0.0):
        self._by_tick = {}
        n = session.n_ticks
        for fb in session.gt_feedbacks:
            t = fb.t + shift_s
            if t < 0:
                continue
            k = seconds_to_tick(t, session.tick_len)
            if k < n:
                self._by_tick[k] = fb.words
        self._tick = 0

    def reset(self):
        self._tick = 0

    def step(self, event):
        words = self._by_tick.get(self._tick)
        self._tick += 1
        if words is None:
            return Action.next()
        return Action.feedback(words)


class TemplateSampler:
    """Feedback-word source for turn-based baselines: seeded draw from the
    current segment's exercise templates (corrective or affirmative)."""

    def __init__(self, session, catalog, seed=0):
        self.session = session
        self.catalog = catalog
        self.seed = seed
        self.reset()

    def reset(self):
        self.rng = np.random.Generator(np.random.PCG64(self.seed))

    def __call__(self, event):
        seg = self.session.segment_at(event.t)
        ex = self.catalog.exercise(seg.exercise_id)
        if self.rng.random() < 0.5:
            mistake = ex.mistakes[int(self.rng.integers(len(ex.mistakes)))]
            pool = mistake.correctives
        else:
            pool = ex.affirmatives
        return normalize_words(pool[int(self.rng.integers(len(pool)))])


class FixedIntervalPolicy(Policy):
    """Turn-based baseline: speaks on a fixed schedule, never in between.

    Emits at the last tick before each interval boundary, so a 30 s session
    with a 5 s interval yields exactly 6 emissions. Emission times are
    independent of observation content; only the words come from the
    pluggable generator.
    """

    name = "fixed_interval"

    def __init__(self, interval=5.0, generator=None, tick_len=0.25):
        interval_ticks = int(round(interval / tick_len))
        if interval_ticks < 1:
            raise ValueError("interval must be at least one tick")
        self.interval_ticks = interval_ticks
        self.generator = generator
        self._tick = 0

    def reset(self):
        self._tick = 0
        if self.generator is not None and hasattr(self.generator, "reset"):
            self.generator.reset()

    def step(self, event):
        self._tick += 1
        if self._tick % self.interval_ticks != 0:
            return Action.next()
        if self.generator is None:
            return Action.feedback(("keep", "going"))
        return Action.feedback(self.generator(event))


# ---------------------------------------------------------------------------
# Predictions JSONL interchange


def predictions_to_jsonl(session_id, policy_name, feedbacks):
    preds = ", ".join(
        '{"t": %.3f, "text": %s}' % (f.t, json.dumps(f.text)) for f in feedbacks
    )
    return '{"session_id": %s, "policy": %s, "predictions": [%s]}' % (
        json.dumps(session_id),
        json.dumps(policy_name),
        preds,
    )


def predictions_from_jsonl(line):
    rec = json.loads(line)
    feedbacks = [
        TimedFeedback(p["t"], normalize_words(p["text"]), "corrective")
        for p in rec["predictions"]
    ]
    return rec["session_id"], rec["policy"], feedbacks


def load_predictions(path):
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(predictions_from_jsonl(line))
    return out


def save_predictions(records, path):
    """records: iterable of (session_id, policy_name, feedbacks)."""
    with open(path, "w") as f:
        for session_id, policy_name, feedbacks in records:
            f.write(predictions_to_jsonl(session_id, policy_name, feedbacks) + "\n")
