"""Prompt templates stored as text assets, plus slot-based rendering.

Templates live in ``resketch/templates/*.txt`` so they can be diffed against
golden files mechanically.  Slots use a ``{{name}}`` marker syntax chosen so
that literal JSON braces inside template bodies never collide with a slot.
"""
from __future__ import annotations

import re
from enum import Enum
from importlib import resources
from typing import Mapping

_SLOT_RE = re.compile(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")


class TemplateError(ValueError):
    """Raised for unknown templates, missing slots, or extra slots."""


class TemplateId(str, Enum):
    BACKTRANSLATE_SKETCH = "BacktranslateSketch"
    BACKTRANSLATE_KEYPOINTS = "BacktranslateKeypoints"
    BACKTRANSLATE_PSEUDOCODE = "BacktranslatePseudocode"
    EXEC_ANALYSIS = "ExecAnalysis"
    REFINE_SKETCH = "RefineSketch"
    REFINE_KEYPOINTS = "RefineKeypoints"
    REFINE_PSEUDOCODE = "RefinePseudocode"
    REGENERATE = "Regenerate"
    SEED_GENERATE = "SeedGenerate"
    SELF_EDIT = "SelfEdit"
    SELF_DEBUG_EXPLAIN = "SelfDebugExplain"
    SELF_DEBUG_TRACE = "SelfDebugTrace"
    SELF_DEBUG_FIX = "SelfDebugFix"
    LONG_COT_GROW = "LongCoTGrow"
    LONG_COT_TO_SKETCH = "LongCoTToSketch"

    def __str__(self) -> str:  # keep log/cassette output readable
        return self.value


# template_id -> (asset filename, declared slot names)
# LongCoTGrow deliberately shares the ExecAnalysis body: the chain-growth call
# is an execution analysis whose output gets appended to the reasoning chain.
_REGISTRY: dict[TemplateId, tuple[str, frozenset[str]]] = {
    TemplateId.BACKTRANSLATE_SKETCH: (
        "backtranslate_sketch.txt", frozenset({"description", "code"})),
    TemplateId.BACKTRANSLATE_KEYPOINTS: (
        "backtranslate_keypoints.txt", frozenset({"description", "code"})),
    TemplateId.BACKTRANSLATE_PSEUDOCODE: (
        "backtranslate_pseudocode.txt", frozenset({"description", "code"})),
    TemplateId.EXEC_ANALYSIS: (
        "exec_analysis.txt",
        frozenset({"description", "code", "feedback", "nl"})),
    TemplateId.REFINE_SKETCH: (
        "refine_sketch.txt",
        frozenset({"description", "nl", "code", "bug_analysis"})),
    TemplateId.REFINE_KEYPOINTS: (
        "refine_keypoints.txt",
        frozenset({"description", "nl", "code", "bug_analysis"})),
    TemplateId.REFINE_PSEUDOCODE: (
        "refine_pseudocode.txt",
        frozenset({"description", "nl", "code", "bug_analysis"})),
    TemplateId.REGENERATE: (
        "regenerate.txt", frozenset({"description", "sketch"})),
    TemplateId.SEED_GENERATE: (
        "seed_generate.txt", frozenset({"description"})),
    TemplateId.SELF_EDIT: (
        "self_edit.txt", frozenset({"description", "code", "feedback"})),
    TemplateId.SELF_DEBUG_EXPLAIN: (
        "self_debug_explain.txt", frozenset({"description", "code"})),
    TemplateId.SELF_DEBUG_TRACE: (
        "self_debug_trace.txt",
        frozenset({"description", "code", "feedback"})),
    TemplateId.SELF_DEBUG_FIX: (
        "self_debug_fix.txt",
        frozenset({"description", "code", "analysis", "feedback"})),
    TemplateId.LONG_COT_GROW: (
        "exec_analysis.txt",
        frozenset({"description", "code", "feedback", "nl"})),
    TemplateId.LONG_COT_TO_SKETCH: (
        "long_cot_to_sketch.txt", frozenset({"description", "chain"})),
}

_BODY_CACHE: dict[TemplateId, str] = {}


def template_body(template_id: TemplateId) -> str:
    """Load (and cache) the raw template text for *template_id*."""
    template_id = TemplateId(template_id)
    body = _BODY_CACHE.get(template_id)
    if body is None:
        filename, declared = _REGISTRY[template_id]
        body = (resources.files("resketch") / "templates" / filename).read_text(
            encoding="utf-8")
        found = set(_SLOT_RE.findall(body))
        if found != declared:
            raise TemplateError(
                f"template {template_id} declares slots {sorted(declared)} "
                f"but asset {filename} contains {sorted(found)}")
        _BODY_CACHE[template_id] = body
    return body


def declared_slots(template_id: TemplateId) -> frozenset[str]:
    return _REGISTRY[TemplateId(template_id)][1]


def render_prompt(template_id: TemplateId, slots: Mapping[str, str]) -> str:
    """Substitute *slots* into the template body verbatim.

    Every declared slot must be bound, and no undeclared names may appear;
    violations raise :class:`TemplateError` naming the offending slot.
    """
    template_id = TemplateId(template_id)
    declared = declared_slots(template_id)
    provided = set(slots)
    missing = sorted(declared - provided)
    if missing:
        raise TemplateError(
            f"{template_id}: missing slot "
            + ", ".join(f"'{name}'" for name in missing))
    extra = sorted(provided - declared)
    if extra:
        raise TemplateError(
            f"{template_id}: unexpected slot "
            + ", ".join(f"'{name}'" for name in extra))
    body = template_body(template_id)
    # template_body() has already checked that the asset's markers equal the
    # declared slot set, so substitution cannot leave an unbound marker.
    return _SLOT_RE.sub(lambda m: str(slots[m.group(1)]), body)


def all_template_ids() -> tuple[TemplateId, ...]:
    return tuple(_REGISTRY)
