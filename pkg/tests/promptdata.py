"""Canonical slot values shared by the golden-prompt checks."""
from __future__ import annotations

from resketch.prompts import TemplateId

DESCRIPTION = "Given two integers a and b, print a + b."
CODE = "a, b = map(int, input().split())\nprint(a - b)"
FEEDBACK = ("1 of 2 visible tests failed.\n"
            "Test 1 failed (Wrong Answer):\n"
            "Input:\n1 2\n"
            "Expected output:\n3\n"
            "Actual output:\n-1")
NL = "The code reads two integers and prints their difference."
BUG_ANALYSIS = "The sketch subtracts the numbers instead of adding them."
SKETCH = "Read two integers from input and print their sum."
ANALYSIS = "The code subtracts the numbers instead of adding them."
CHAIN = "1. The code subtracts instead of adding; the fix is to use addition."

_BACKTRANSLATE = {"description": DESCRIPTION, "code": CODE}
_REFINE = {"description": DESCRIPTION, "nl": NL, "code": CODE,
           "bug_analysis": BUG_ANALYSIS}

GOLDEN_SLOTS: dict[TemplateId, dict[str, str]] = {
    TemplateId.BACKTRANSLATE_SKETCH: _BACKTRANSLATE,
    TemplateId.BACKTRANSLATE_KEYPOINTS: _BACKTRANSLATE,
    TemplateId.BACKTRANSLATE_PSEUDOCODE: _BACKTRANSLATE,
    TemplateId.EXEC_ANALYSIS: {"description": DESCRIPTION, "code": CODE,
                               "feedback": FEEDBACK, "nl": NL},
    TemplateId.REFINE_SKETCH: _REFINE,
    TemplateId.REFINE_KEYPOINTS: _REFINE,
    TemplateId.REFINE_PSEUDOCODE: _REFINE,
    TemplateId.REGENERATE: {"description": DESCRIPTION, "sketch": SKETCH},
    TemplateId.SEED_GENERATE: {"description": DESCRIPTION},
    TemplateId.SELF_EDIT: {"description": DESCRIPTION, "code": CODE,
                           "feedback": FEEDBACK},
    TemplateId.SELF_DEBUG_EXPLAIN: {"description": DESCRIPTION, "code": CODE},
    TemplateId.SELF_DEBUG_TRACE: {"description": DESCRIPTION, "code": CODE,
                                  "feedback": FEEDBACK},
    TemplateId.SELF_DEBUG_FIX: {"description": DESCRIPTION, "code": CODE,
                                "analysis": ANALYSIS, "feedback": FEEDBACK},
    TemplateId.LONG_COT_GROW: {"description": DESCRIPTION, "code": CODE,
                               "feedback": FEEDBACK, "nl": CHAIN},
    TemplateId.LONG_COT_TO_SKETCH: {"description": DESCRIPTION,
                                    "chain": CHAIN},
}
