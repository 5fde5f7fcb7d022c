"""Debug buggy programs by refining natural-language representations.

The pipeline backtranslates a buggy candidate into a natural-language form
(sketch, pseudocode, or keypoints), refines that representation against
execution feedback from visible tests, and regenerates code from the refined
representation, iterating until the candidate passes or the budget runs out.
Hidden tests score the final program exactly once.
"""

__version__ = "0.1.0"

from .corpus import Problem, ProblemSet, TestCase, load_problems
from .judge import Judge, Outcome, RunLimits, Verdict, render_feedback
from .llm import (LLMParams, MockScriptClient, RecordingClient, ReplayClient,
                  extract_code, request_digest)
from .loop import (FinalStatus, LoopConfig, SamplingConfig, SamplingMode,
                   SessionTrace, run_experiment, run_session)
from .prompts import TemplateId, render_prompt
from .strategy import (FeedbackMode, NLFormat, NLRepr, SessionState,
                       StrategyConfig, StrategyKind)

__all__ = [
    "FeedbackMode", "FinalStatus", "Judge", "LLMParams", "LoopConfig",
    "MockScriptClient", "NLFormat", "NLRepr", "Outcome", "Problem",
    "ProblemSet", "RecordingClient", "ReplayClient", "RunLimits",
    "SamplingConfig", "SamplingMode", "SessionState", "SessionTrace",
    "StrategyConfig", "StrategyKind", "TemplateId", "TestCase", "Verdict",
    "extract_code", "load_problems", "render_feedback", "render_prompt",
    "request_digest", "run_experiment", "run_session", "__version__",
]
