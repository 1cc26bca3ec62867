"""Seeded synthetic coaching sessions: workout plans, user behavior, coach
feedback. All outputs are pure functions of (seed, catalog, config)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    EXERCISE_NONE,
    VARIANT_CORRECT,
    VARIANT_FAST,
    VARIANT_MISTAKE_BASE,
    VARIANT_SLOW,
    VARIANT_TRANSITION,
    ObservationEvent,
    ObservationSymbol,
    SegmentSpec,
    Session,
    TimedFeedback,
    normalize_words,
    validate_session,
)

_MISTAKE_VARIANTS = (VARIANT_FAST, VARIANT_SLOW)  # plus VARIANT_MISTAKE_BASE + k


@dataclass(frozen=True)
class SynthConfig:
    session_len_target: float = 210.0
    segment_len: float = 30.0
    exercises_per_session: tuple = (5, 6)
    tick_len: float = 0.25

    # published-statistics targets the generator is calibrated against
    mean_silence: float = 5.2
    silence_sd: float = 1.4
    feedbacks_per_segment_mean: float = 5.0

    # user behavior
    transition_ticks: tuple = (6, 12)  # uniform range at segment start
    correct_dwell_ticks: float = 130.0  # geometric mean
    mistake_dwell_ticks: float = 12.0  # geometric mean (uncoached)
    mistake_onset_prob: float = 0.7  # per correct-phase end
    pacing_prob: float = 0.3  # mistake is fast/slow rather than form
    compliance_prob: float = 0.8
    comply_delay_ticks: tuple = (1, 3)
    max_mistake_ticks: int = 48
    # right after fixing one mistake, users often slip into another
    chain_mistake_prob: float = 0.8
    chain_pause_ticks: tuple = (3, 6)

    # coach behavior
    feedback_latency_ticks: int = 2
    min_feedback_gap_ticks: int = 4
    ack_delay_ticks: int = 3
    corrective_retry_ticks: int = 10
    timed_gap_ticks_mean: float = 85.0
    timed_gap_ticks_sd: float = 5.0

    def __post_init__(self):
        if tuple(self.exercises_per_session) not in ((5,), (6,), (5, 6)):
            raise ValueError("exercises_per_session must be within {5, 6}")
        for name in (
            "session_len_target",
            "segment_len",
            "tick_len",
            "mean_silence",
            "correct_dwell_ticks",
            "mistake_dwell_ticks",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.mistake_onset_prob <= 1.0:
            raise ValueError("mistake_onset_prob must be a probability")


def _rngs(seed):
    ss = np.random.SeedSequence(seed)
    plan, user, coach = ss.spawn(3)
    return (
        np.random.Generator(np.random.PCG64(plan)),
        np.random.Generator(np.random.PCG64(user)),
        np.random.Generator(np.random.PCG64(coach)),
    )


def sample_workout(seed, catalog, cfg=SynthConfig()):
    """Contiguous 30 s segments: warmup -> main -> cooldown, no repeats."""
    rng, _, _ = _rngs(seed)
    n = int(rng.choice(list(cfg.exercises_per_session)))
    # fixed section shape: 1 warmup, n-2 main, 1 cooldown
    n_main = n - 2
    picks = []
    for section, count in (("warmup", 1), ("main", n_main), ("cooldown", 1)):
        pool = catalog.pool(section)
        if len(pool) < count:
            raise ValueError(
                f"section {section!r} pool has {len(pool)} exercises, need {count}"
            )
        picks.extend(int(i) for i in rng.choice(pool, size=count, replace=False))
    return [
        SegmentSpec(ex, i * cfg.segment_len, cfg.segment_len)
        for i, ex in enumerate(picks)
    ]


class _UserMachine:
    """Semi-Markov user behavior within one segment.

    Phases: transition -> correct <-> mistake. When coached, a mistake
    persists until a corrective lands (then ends 1-3 ticks later with the
    configured compliance probability) or until the safety cap.
    """

    def __init__(self, segment, catalog, cfg, rng, coached):
        self.ex_id = segment.exercise_id
        self.n_mistakes = len(catalog.exercise(self.ex_id).mistakes)
        self.cfg = cfg
        self.rng = rng
        self.coached = coached
        self.phase = "transition"
        self.remaining = int(rng.integers(cfg.transition_ticks[0], cfg.transition_ticks[1] + 1))
        self.mistake_variant = None
        self.mistake_age = 0
        self.force_next_mistake = False

    def _geom(self, mean):
        return int(self.rng.geometric(1.0 / mean))

    def _enter_correct(self, dwell=None):
        self.phase = "correct"
        self.remaining = dwell if dwell is not None else self._geom(
            self.cfg.correct_dwell_ticks
        )
        self.mistake_variant = None

    def _enter_mistake(self):
        self.phase = "mistake"
        self.mistake_age = 0
        if self.rng.random() < self.cfg.pacing_prob:
            self.mistake_variant = int(self.rng.choice(_MISTAKE_VARIANTS))
        else:
            self.mistake_variant = VARIANT_MISTAKE_BASE + int(
                self.rng.integers(self.n_mistakes)
            )
        if self.coached:
            self.remaining = self.cfg.max_mistake_ticks
        else:
            self.remaining = self._geom(self.cfg.mistake_dwell_ticks)

    def _advance(self):
        if self.phase == "transition":
            self._enter_correct()
        elif self.phase == "correct":
            if self.force_next_mistake or (
                self.rng.random() < self.cfg.mistake_onset_prob
            ):
                self.force_next_mistake = False
                self._enter_mistake()
            else:
                self._enter_correct()
        else:
            # leaving a mistake: maybe chain straight into the next one
            if self.rng.random() < self.cfg.chain_mistake_prob:
                lo, hi = self.cfg.chain_pause_ticks
                self.force_next_mistake = True
                self._enter_correct(dwell=int(self.rng.integers(lo, hi + 1)))
            else:
                self._enter_correct()

    def step(self):
        """Return the ObservationSymbol for the current tick."""
        while self.remaining <= 0:
            self._advance()
        self.remaining -= 1
        if self.phase == "transition":
            return ObservationSymbol(EXERCISE_NONE, VARIANT_TRANSITION)
        if self.phase == "mistake":
            self.mistake_age += 1
            return ObservationSymbol(self.ex_id, self.mistake_variant)
        return ObservationSymbol(self.ex_id, VARIANT_CORRECT)

    def on_corrective(self, now_tick):
        """Coach corrected the ongoing mistake; maybe comply in 1-3 ticks."""
        if self.phase != "mistake":
            return
        if self.rng.random() < self.cfg.compliance_prob:
            lo, hi = self.cfg.comply_delay_ticks
            self.remaining = min(self.remaining, int(self.rng.integers(lo, hi + 1)))


class _CoachRules:
    """Rule coach over an observation stream of one segment.

    observe(k, symbol) consumes the tick-k observation and may return a
    feedback scheduled for tick k+1, so every feedback is predictable from
    observations that precede it.
    """

    def __init__(self, segment, catalog, cfg, rng, first_tick, last_fb_tick):
        self.seg = segment
        self.catalog = catalog
        self.cfg = cfg
        self.rng = rng
        self.first_tick = first_tick
        self.end_tick = first_tick + int(round(segment.duration / cfg.tick_len))
        self.last_fb_tick = last_fb_tick
        self.instructed = False
        self.mistake_variant = None
        self.mistake_run = 0
        self.corrected_at = None
        self.ack_due = None
        self.timed_due = None

    def _pick(self, templates):
        return normalize_words(templates[int(self.rng.integers(len(templates)))])

    def _gap_ok(self, tick):
        return tick - self.last_fb_tick >= self.cfg.min_feedback_gap_ticks

    def _emit(self, tick, kind, templates):
        self.last_fb_tick = tick
        self.timed_due = tick + max(
            1,
            int(
                round(
                    self.rng.normal(
                        self.cfg.timed_gap_ticks_mean, self.cfg.timed_gap_ticks_sd
                    )
                )
            ),
        )
        return TimedFeedback(tick * self.cfg.tick_len, self._pick(templates), kind)

    def observe(self, k, symbol):
        cfg = self.cfg
        ex = self.catalog.exercise(self.seg.exercise_id)
        fb_tick = k + 1
        if fb_tick >= self.end_tick:
            return None

        if symbol.variant_id >= VARIANT_FAST:
            if symbol.variant_id == self.mistake_variant:
                self.mistake_run += 1
            else:
                self.mistake_variant = symbol.variant_id
                self.mistake_run = 1
                self.corrected_at = None
        else:
            if self.mistake_variant is not None and self.corrected_at is not None:
                # mistake just ended after a corrective: acknowledge shortly
                self.ack_due = k + cfg.ack_delay_ticks
            self.mistake_variant = None
            self.mistake_run = 0
            self.corrected_at = None

        # instructional once the exercise becomes visible
        if not self.instructed and symbol.variant_id >= VARIANT_CORRECT:
            self.instructed = True
            if self._gap_ok(fb_tick):
                return self._emit(fb_tick, "instructional", ex.instructionals)

        # corrective after a persistent mistake (with retries on defiance)
        if (
            self.mistake_variant is not None
            and self.mistake_run >= cfg.feedback_latency_ticks
            and self._gap_ok(fb_tick)
        ):
            due = self.corrected_at is None or (
                fb_tick - self.corrected_at >= cfg.corrective_retry_ticks
            )
            if due:
                self.corrected_at = fb_tick
                templates = self.catalog.corrective_templates(
                    self.seg.exercise_id, self.mistake_variant
                )
                return self._emit(fb_tick, "corrective", templates)

        # affirmative acknowledging a correction
        if (
            self.ack_due is not None
            and fb_tick >= self.ack_due
            and symbol.variant_id == VARIANT_CORRECT
            and self._gap_ok(fb_tick)
        ):
            self.ack_due = None
            return self._emit(fb_tick, "affirmative", ex.affirmatives)

        # timed affirmative during a sustained-correct stretch
        if (
            self.timed_due is not None
            and fb_tick >= self.timed_due
            and symbol.variant_id == VARIANT_CORRECT
            and self._gap_ok(fb_tick)
        ):
            return self._emit(fb_tick, "affirmative", ex.affirmatives)
        return None


def _segment_ticks(segment, cfg):
    return int(round(segment.duration / cfg.tick_len))


def _script_from_variants(variants):
    """Run-length encode a segment's variant stream into (phase, dwell) pairs."""
    names = {
        0: "idle",
        VARIANT_TRANSITION: "transition",
        VARIANT_CORRECT: "correct",
        VARIANT_FAST: "fast",
        VARIANT_SLOW: "slow",
    }
    script = []
    for v in variants:
        name = names.get(v, f"mistake_{v - VARIANT_MISTAKE_BASE}")
        if script and script[-1][0] == name:
            script[-1][1] += 1
        else:
            script.append([name, 1])
    return tuple((n, d) for n, d in script)


def simulate_user(segments, seed, cfg=SynthConfig(), catalog=None):
    """Uncoached observation stream: one event per tick over the segments."""
    from .catalog import default_catalog

    catalog = catalog or default_catalog()
    _, rng, _ = _rngs(seed)
    events = []
    tick = 0
    for seg in segments:
        user = _UserMachine(seg, catalog, cfg, rng, coached=False)
        for _ in range(_segment_ticks(seg, cfg)):
            events.append(ObservationEvent(tick * cfg.tick_len, user.step()))
            tick += 1
    return events


def coach_oracle(observations, segments, catalog, cfg=SynthConfig(), seed=0):
    """Rule-coach feedbacks for a fixed observation stream."""
    _, _, rng = _rngs(seed)
    feedbacks = []
    tick = 0
    last_fb_tick = -10**9
    for seg in segments:
        n = _segment_ticks(seg, cfg)
        coach = _CoachRules(seg, catalog, cfg, rng, tick, last_fb_tick)
        for k in range(tick, tick + n):
            fb = coach.observe(k, observations[k].symbol)
            if fb is not None:
                feedbacks.append(fb)
        last_fb_tick = coach.last_fb_tick
        tick += n
    return feedbacks


def generate_session(seed, catalog, cfg=SynthConfig()):
    """Coupled user/coach simulation; returns a fully validated Session."""
    _, user_rng, coach_rng = _rngs(seed)
    segments = sample_workout(seed, catalog, cfg)
    events = []
    feedbacks = []
    realized = []
    tick = 0
    last_fb_tick = -10**9
    for seg in segments:
        n = _segment_ticks(seg, cfg)
        user = _UserMachine(seg, catalog, cfg, user_rng, coached=True)
        coach = _CoachRules(seg, catalog, cfg, coach_rng, tick, last_fb_tick)
        variants = []
        for k in range(tick, tick + n):
            sym = user.step()
            variants.append(sym.variant_id)
            events.append(ObservationEvent(k * cfg.tick_len, sym))
            fb = coach.observe(k, sym)
            if fb is not None:
                feedbacks.append(fb)
                if fb.kind == "corrective":
                    user.on_corrective(k + 1)
        realized.append(replace(seg, behavior_script=_script_from_variants(variants)))
        last_fb_tick = coach.last_fb_tick
        tick += n
    session = Session(
        id=f"sess-{seed:016x}",
        seed=seed,
        segments=tuple(realized),
        observations=tuple(events),
        gt_feedbacks=tuple(feedbacks),
        tick_len=cfg.tick_len,
    )
    return validate_session(session)


def generate_corpus(n, base_seed, catalog, cfg=SynthConfig()):
    root = np.random.SeedSequence(base_seed)
    seeds = [int(s.generate_state(1)[0]) for s in root.spawn(n)]
    return [generate_session(s, catalog, cfg) for s in seeds]


def corpus_stats(sessions):
    """Summary statistics over a session corpus.

    Silence is measured within segments, between consecutive feedbacks.
    """
    sessions = list(sessions)
    if not sessions:
        raise ValueError("corpus_stats needs at least one session")
    silences = []
    per_segment = []
    lengths = []
    n_feedbacks = 0
    for s in sessions:
        n_feedbacks += len(s.gt_feedbacks)
        lengths.extend(len(f.words) for f in s.gt_feedbacks)
        for seg in s.segments:
            inside = [
                f.t for f in s.gt_feedbacks if seg.start - 1e-9 <= f.t < seg.end - 1e-9
            ]
            per_segment.append(len(inside))
            silences.extend(b - a for a, b in zip(inside, inside[1:]))

    def _mean_sd(xs):
        if not xs:
            return 0.0, 0.0
        m = sum(xs) / len(xs)
        var = sum((x - m) ** 2 for x in xs) / len(xs)
        return m, math.sqrt(var)

    sil_m, sil_sd = _mean_sd(silences)
    fps_m, fps_sd = _mean_sd(per_segment)
    len_m, len_sd = _mean_sd(lengths)
    return {
        "n_sessions": len(sessions),
        "n_segments": len(per_segment),
        "n_feedbacks": n_feedbacks,
        "mean_silence_s": sil_m,
        "sd_silence_s": sil_sd,
        "mean_feedbacks_per_segment": fps_m,
        "sd_feedbacks_per_segment": fps_sd,
        "mean_feedback_length_words": len_m,
        "sd_feedback_length_words": len_sd,
    }
