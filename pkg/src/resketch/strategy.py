"""Debugging strategies over one shared session-state shape.

Each strategy maps (state, scripted/live LLM) to a new candidate program via a
single ``step`` call.  The three-phase natural-language method backtranslates
buggy code into one of three NL formats, refines the NL from execution
feedback (optionally routed through an explicit analysis call), and
regenerates code from the refined NL.  Baselines (self-edit, self-debug) and
the long-chain variants reuse the same plumbing.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum

from .corpus import Problem
from .judge import FeedbackText
from .llm import LLMClient, LLMParams, extract_code
from .prompts import TemplateId, render_prompt

NO_FEEDBACK_TEXT = "No execution feedback available."

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_LABEL_RE = re.compile(r"^Thought-(\d+)$")


class StrategyError(RuntimeError):
    pass


class KeypointsParseError(StrategyError):
    """Malformed keypoint structure; eligible for one repair re-prompt."""


class KeypointsValidationError(StrategyError):
    """Label/count rule violation; not repairable."""


class NLFormat(str, Enum):
    SKETCH = "Sketch"
    PSEUDOCODE = "Pseudocode"
    KEYPOINTS = "Keypoints"

    def __str__(self) -> str:
        return self.value


class FeedbackMode(str, Enum):
    NONE = "None"
    RAW = "Raw"
    RAW_PLUS_ANALYSIS = "RawPlusAnalysis"

    def __str__(self) -> str:
        return self.value


class StrategyKind(str, Enum):
    NL_DEBUG = "NLDebug"
    SELF_EDIT = "SelfEdit"
    SELF_DEBUG_EXPLAIN = "SelfDebugExplain"
    SELF_DEBUG_TRACE = "SelfDebugTrace"
    LONG_COT_DIRECT = "LongCoTDirect"
    LONG_COT_SKETCH = "LongCoTSketch"

    def __str__(self) -> str:
        return self.value


def validate_keypoint_labels(pairs: tuple[tuple[str, str], ...] | list,
                             start: int = 1) -> None:
    """Check labels are exactly Thought-<start>, Thought-<start+1>, ..."""
    for offset, (label, _content) in enumerate(pairs):
        expected = f"Thought-{start + offset}"
        if label != expected:
            raise KeypointsValidationError(
                f"keypoint label mismatch: expected '{expected}', got "
                f"'{label}'")


@dataclass(frozen=True)
class NLRepr:
    """One natural-language representation of a program.

    For the keypoints format ``text`` holds the canonical list-of-dicts JSON
    and ``keypoints`` the parsed (label, content) pairs; the other formats
    carry free text only.
    """

    format: NLFormat
    text: str
    keypoints: tuple[tuple[str, str], ...] | None = None

    def __post_init__(self) -> None:
        if self.format is NLFormat.KEYPOINTS:
            if not self.keypoints:
                raise KeypointsValidationError(
                    "Keypoints representation requires at least one keypoint")
            validate_keypoint_labels(self.keypoints)
        else:
            if self.keypoints is not None:
                raise StrategyError(
                    f"{self.format} representation must not carry keypoints")
            if not self.text.strip():
                raise StrategyError(f"empty {self.format} text")

    @staticmethod
    def from_text(format: NLFormat, text: str) -> "NLRepr":
        return NLRepr(format=NLFormat(format), text=text.strip())

    @staticmethod
    def from_keypoints(pairs: list[tuple[str, str]]) -> "NLRepr":
        frozen = tuple((label, content) for label, content in pairs)
        text = json.dumps([{label: content} for label, content in frozen],
                          ensure_ascii=False)
        return NLRepr(format=NLFormat.KEYPOINTS, text=text, keypoints=frozen)

    def regeneration_text(self) -> str:
        """Slot value for code regeneration: keypoints as a numbered list."""
        if self.format is NLFormat.KEYPOINTS:
            assert self.keypoints is not None
            return "\n".join(f"{i}. {content}"
                             for i, (_label, content)
                             in enumerate(self.keypoints, start=1))
        return self.text


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind
    nl_format: NLFormat | None = None
    feedback_mode: FeedbackMode = FeedbackMode.RAW
    rebacktranslate: bool = False

    def __post_init__(self) -> None:
        kind = StrategyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.nl_format is not None:
            object.__setattr__(self, "nl_format", NLFormat(self.nl_format))
        object.__setattr__(self, "feedback_mode",
                           FeedbackMode(self.feedback_mode))
        needs_format = kind in (StrategyKind.NL_DEBUG,
                                StrategyKind.LONG_COT_SKETCH)
        if needs_format and self.nl_format is None:
            raise ValueError(f"nl_format is required for kind={kind}")
        if not needs_format and self.nl_format is not None:
            raise ValueError(f"nl_format must be unset for kind={kind}")
        if (kind is StrategyKind.LONG_COT_SKETCH
                and self.nl_format is not NLFormat.SKETCH):
            raise ValueError(
                "LongCoTSketch distills the chain into a sketch; nl_format "
                f"must be Sketch, got {self.nl_format}")


@dataclass
class SessionState:
    """Mutable per-session state; owned by exactly one session at a time."""

    problem: Problem
    current_code: str
    current_nl: NLRepr | None = None
    feedback: FeedbackText | None = None
    analysis: str | None = None
    cot_chain: tuple[str, ...] = ()
    iteration: int = 0


# --- slot helpers ---------------------------------------------------------

def feedback_slot(mode: FeedbackMode, feedback: FeedbackText | None) -> str:
    if mode is FeedbackMode.NONE:
        return NO_FEEDBACK_TEXT
    if feedback is None:
        raise StrategyError(
            f"execution feedback required for feedback_mode={mode}")
    return feedback.rendered


def bug_analysis_slot(mode: FeedbackMode, feedback: FeedbackText | None,
                      analysis: str | None) -> str:
    """Value for the refine templates' combined feedback/analysis slot."""
    if mode is FeedbackMode.NONE:
        return NO_FEEDBACK_TEXT
    if feedback is None:
        raise StrategyError(
            f"execution feedback required for feedback_mode={mode}")
    if mode is FeedbackMode.RAW_PLUS_ANALYSIS:
        if not analysis:
            raise StrategyError(
                "analysis text required for feedback_mode=RawPlusAnalysis")
        return f"{feedback.rendered}\n\nExpert analysis:\n{analysis}"
    return feedback.rendered


def render_chain(chain: tuple[str, ...]) -> str:
    if not chain:
        return "(no prior reasoning)"
    return "\n\n".join(f"{i}. {entry}"
                       for i, entry in enumerate(chain, start=1))


# --- keypoints parsing ----------------------------------------------------

def parse_keypoints_block(response: str) -> list[tuple[str, str]]:
    """Extract the list-of-dicts keypoint block from a model reply.

    Raises :class:`KeypointsParseError` for anything that is not a JSON list
    of single-key string dicts; label ordering is checked separately.
    """
    text = response.strip()
    fence = _FENCE_RE.search(response)
    if fence:
        blob = fence.group(1).strip()
    else:
        start, end = text.find("["), text.rfind("]")
        blob = text[start:end + 1] if (start != -1 and end > start) else text
    try:
        data = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise KeypointsParseError(
            f"could not parse keypoints JSON: {exc}") from exc
    if not isinstance(data, list):
        raise KeypointsParseError(
            f"expected a JSON list of dicts, got {type(data).__name__}")
    if not data:
        raise KeypointsParseError("empty keypoint list")
    pairs: list[tuple[str, str]] = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or len(item) != 1:
            raise KeypointsParseError(
                f"entry {i} is not a single-key dict: {item!r}")
        [(label, content)] = item.items()
        if not isinstance(content, str):
            raise KeypointsParseError(
                f"entry {i} value is not a string: {content!r}")
        pairs.append((label, content))
    return pairs


def _complete_keypoints(template_id: TemplateId, prompt: str,
                        client: LLMClient,
                        params: LLMParams) -> list[tuple[str, str]]:
    """One LLM call plus at most one repair re-prompt on parse failure."""
    raw = client.complete(template_id, prompt, params)[0]
    try:
        return parse_keypoints_block(raw)
    except KeypointsParseError as exc:
        repair = (f"{prompt}\n\nYour previous reply could not be parsed: "
                  f"{exc}\nReply with only the corrected list of dicts.")
        raw = client.complete(template_id, repair, params)[0]
        return parse_keypoints_block(raw)


# --- pipeline operations --------------------------------------------------

_BACKTRANSLATE_TEMPLATE = {
    NLFormat.SKETCH: TemplateId.BACKTRANSLATE_SKETCH,
    NLFormat.PSEUDOCODE: TemplateId.BACKTRANSLATE_PSEUDOCODE,
    NLFormat.KEYPOINTS: TemplateId.BACKTRANSLATE_KEYPOINTS,
}

_REFINE_TEMPLATE = {
    NLFormat.SKETCH: TemplateId.REFINE_SKETCH,
    NLFormat.PSEUDOCODE: TemplateId.REFINE_PSEUDOCODE,
    NLFormat.KEYPOINTS: TemplateId.REFINE_KEYPOINTS,
}


def _require_text(response: str, what: str) -> str:
    text = response.strip()
    if not text:
        raise StrategyError(f"empty response for {what}")
    return text


def backtranslate(problem: Problem, code: str, nl_format: NLFormat,
                  client: LLMClient, params: LLMParams) -> NLRepr:
    if not code.strip():
        raise StrategyError("cannot backtranslate empty code")
    nl_format = NLFormat(nl_format)
    template_id = _BACKTRANSLATE_TEMPLATE[nl_format]
    prompt = render_prompt(template_id, {
        "description": problem.description, "code": code})
    if nl_format is NLFormat.KEYPOINTS:
        pairs = _complete_keypoints(template_id, prompt, client, params)
        return NLRepr.from_keypoints(pairs)
    response = client.complete(template_id, prompt, params)[0]
    return NLRepr.from_text(
        nl_format, _require_text(response, f"backtranslate/{nl_format}"))


def analyze(problem: Problem, code: str, nl: NLRepr,
            feedback: FeedbackText | None, client: LLMClient,
            params: LLMParams) -> str:
    if feedback is None:
        raise StrategyError("analyze requires execution feedback")
    prompt = render_prompt(TemplateId.EXEC_ANALYSIS, {
        "description": problem.description,
        "code": code,
        "feedback": feedback.rendered,
        "nl": nl.text,
    })
    response = client.complete(TemplateId.EXEC_ANALYSIS, prompt, params)[0]
    return _require_text(response, "analysis")


def refine(problem: Problem, nl: NLRepr, code: str, bug_analysis: str,
           client: LLMClient, params: LLMParams) -> NLRepr:
    template_id = _REFINE_TEMPLATE[nl.format]
    prompt = render_prompt(template_id, {
        "description": problem.description,
        "nl": nl.text,
        "code": code,
        "bug_analysis": bug_analysis,
    })
    if nl.format is NLFormat.KEYPOINTS:
        assert nl.keypoints is not None
        new_pairs = _complete_keypoints(template_id, prompt, client, params)
        if not 1 <= len(new_pairs) <= 2:
            raise KeypointsValidationError(
                f"refinement must add 1-2 new thoughts, got {len(new_pairs)}")
        validate_keypoint_labels(new_pairs, start=len(nl.keypoints) + 1)
        return NLRepr.from_keypoints(list(nl.keypoints) + new_pairs)
    response = client.complete(template_id, prompt, params)[0]
    return NLRepr.from_text(
        nl.format, _require_text(response, f"refine/{nl.format}"))


def regenerate(problem: Problem, nl: NLRepr, client: LLMClient,
               params: LLMParams) -> str:
    prompt = render_prompt(TemplateId.REGENERATE, {
        "description": problem.description,
        "sketch": nl.regeneration_text(),
    })
    response = client.complete(TemplateId.REGENERATE, prompt, params)[0]
    return extract_code(response)


# --- per-kind steps -------------------------------------------------------

def _step_nl_debug(state: SessionState, cfg: StrategyConfig,
                   client: LLMClient, params: LLMParams
                   ) -> tuple[str, NLRepr, str | None]:
    assert cfg.nl_format is not None
    if state.current_nl is None or cfg.rebacktranslate:
        nl = backtranslate(state.problem, state.current_code, cfg.nl_format,
                           client, params)
    else:
        nl = state.current_nl
    analysis = None
    if cfg.feedback_mode is FeedbackMode.RAW_PLUS_ANALYSIS:
        analysis = analyze(state.problem, state.current_code, nl,
                           state.feedback, client, params)
    slot = bug_analysis_slot(cfg.feedback_mode, state.feedback, analysis)
    new_nl = refine(state.problem, nl, state.current_code, slot, client,
                    params)
    new_code = regenerate(state.problem, new_nl, client, params)
    return new_code, new_nl, analysis


def _step_self_edit(state: SessionState, cfg: StrategyConfig,
                    client: LLMClient, params: LLMParams) -> str:
    prompt = render_prompt(TemplateId.SELF_EDIT, {
        "description": state.problem.description,
        "code": state.current_code,
        "feedback": feedback_slot(cfg.feedback_mode, state.feedback),
    })
    response = client.complete(TemplateId.SELF_EDIT, prompt, params)[0]
    return extract_code(response)


def _step_self_debug(state: SessionState, cfg: StrategyConfig,
                     client: LLMClient, params: LLMParams
                     ) -> tuple[str, str]:
    fb = feedback_slot(cfg.feedback_mode, state.feedback)
    if cfg.kind is StrategyKind.SELF_DEBUG_EXPLAIN:
        first_id = TemplateId.SELF_DEBUG_EXPLAIN
        first_slots = {"description": state.problem.description,
                       "code": state.current_code}
    else:
        first_id = TemplateId.SELF_DEBUG_TRACE
        first_slots = {"description": state.problem.description,
                       "code": state.current_code,
                       "feedback": fb}
    first_prompt = render_prompt(first_id, first_slots)
    analysis = _require_text(
        client.complete(first_id, first_prompt, params)[0],
        f"{cfg.kind} analysis")
    fix_prompt = render_prompt(TemplateId.SELF_DEBUG_FIX, {
        "description": state.problem.description,
        "code": state.current_code,
        "analysis": analysis,
        "feedback": fb,
    })
    response = client.complete(TemplateId.SELF_DEBUG_FIX, fix_prompt,
                               params)[0]
    return extract_code(response), analysis


def _grow_chain(state: SessionState, cfg: StrategyConfig, client: LLMClient,
                params: LLMParams) -> tuple[str, ...]:
    prompt = render_prompt(TemplateId.LONG_COT_GROW, {
        "description": state.problem.description,
        "code": state.current_code,
        "feedback": feedback_slot(cfg.feedback_mode, state.feedback),
        "nl": render_chain(state.cot_chain),
    })
    insight = _require_text(
        client.complete(TemplateId.LONG_COT_GROW, prompt, params)[0],
        "chain growth")
    return state.cot_chain + (insight,)


def _regenerate_from_text(problem: Problem, sketch_text: str,
                          client: LLMClient, params: LLMParams) -> str:
    prompt = render_prompt(TemplateId.REGENERATE, {
        "description": problem.description, "sketch": sketch_text})
    response = client.complete(TemplateId.REGENERATE, prompt, params)[0]
    return extract_code(response)


def step(state: SessionState, cfg: StrategyConfig, client: LLMClient,
         params: LLMParams) -> tuple[str, SessionState]:
    """Run one debugging step; mutates *state* only on success."""
    if cfg.feedback_mode is not FeedbackMode.NONE and state.feedback is None:
        raise StrategyError(
            f"feedback_mode={cfg.feedback_mode} requires state.feedback")
    if cfg.kind is StrategyKind.NL_DEBUG:
        new_code, new_nl, analysis = _step_nl_debug(state, cfg, client,
                                                    params)
        state.current_nl = new_nl
        state.analysis = analysis
    elif cfg.kind is StrategyKind.SELF_EDIT:
        new_code = _step_self_edit(state, cfg, client, params)
    elif cfg.kind in (StrategyKind.SELF_DEBUG_EXPLAIN,
                      StrategyKind.SELF_DEBUG_TRACE):
        new_code, analysis = _step_self_debug(state, cfg, client, params)
        state.analysis = analysis
    elif cfg.kind is StrategyKind.LONG_COT_DIRECT:
        new_chain = _grow_chain(state, cfg, client, params)
        new_code = _regenerate_from_text(state.problem,
                                         render_chain(new_chain), client,
                                         params)
        state.cot_chain = new_chain
        state.analysis = new_chain[-1]
    elif cfg.kind is StrategyKind.LONG_COT_SKETCH:
        new_chain = _grow_chain(state, cfg, client, params)
        to_sketch_prompt = render_prompt(TemplateId.LONG_COT_TO_SKETCH, {
            "description": state.problem.description,
            "chain": render_chain(new_chain),
        })
        sketch_text = _require_text(
            client.complete(TemplateId.LONG_COT_TO_SKETCH, to_sketch_prompt,
                            params)[0],
            "chain-to-sketch")
        new_nl = NLRepr.from_text(NLFormat.SKETCH, sketch_text)
        new_code = regenerate(state.problem, new_nl, client, params)
        state.cot_chain = new_chain
        state.current_nl = new_nl
        state.analysis = new_chain[-1]
    else:  # pragma: no cover - enum is closed
        raise StrategyError(f"unknown strategy kind {cfg.kind}")
    state.current_code = new_code
    return new_code, state
