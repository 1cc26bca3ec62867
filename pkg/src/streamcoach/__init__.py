"""Seeded symbolic coaching sessions, a streaming action-token sequence
model, baselines, and temporal evaluation, all behind one small package."""

from .catalog import ExerciseCatalog, default_catalog
from .core import (
    ObservationEvent,
    ObservationSymbol,
    SegmentSpec,
    Session,
    TimedFeedback,
    TokenStream,
    Vocabulary,
    build_vocabulary,
    deinterleave,
    interleave,
    load_sessions,
    save_sessions,
    validate_session,
)
from .evaluation import (
    evaluate,
    llm_judge_prompt,
    match_events,
    parse_judge_response,
    report_table,
    rouge_l,
    temporal_f,
    unigram_f,
)
from .judge import HttpJudge, judge_from_env
from .model import (
    ModelDims,
    ModelParams,
    StreamingModelPolicy,
    TrainConfig,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .policy import (
    Action,
    FixedIntervalPolicy,
    OraclePolicy,
    Policy,
    SilentPolicy,
    load_predictions,
    run_policy,
    save_predictions,
)
from .synthgen import (
    SynthConfig,
    corpus_stats,
    generate_corpus,
    generate_session,
    simulate_user,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ExerciseCatalog",
    "FixedIntervalPolicy",
    "HttpJudge",
    "ModelDims",
    "ModelParams",
    "ObservationEvent",
    "ObservationSymbol",
    "OraclePolicy",
    "Policy",
    "SegmentSpec",
    "Session",
    "SilentPolicy",
    "StreamingModelPolicy",
    "SynthConfig",
    "TimedFeedback",
    "TokenStream",
    "TrainConfig",
    "Vocabulary",
    "backward",
    "build_vocabulary",
    "corpus_stats",
    "default_catalog",
    "deinterleave",
    "evaluate",
    "forward",
    "generate_corpus",
    "generate_session",
    "init_params",
    "interleave",
    "judge_from_env",
    "llm_judge_prompt",
    "load_checkpoint",
    "load_predictions",
    "load_sessions",
    "match_events",
    "parse_judge_response",
    "report_table",
    "rouge_l",
    "run_policy",
    "save_checkpoint",
    "save_predictions",
    "save_sessions",
    "simulate_user",
    "temporal_f",
    "train",
    "unigram_f",
    "validate_session",
]
