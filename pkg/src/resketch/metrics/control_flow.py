"""Maximum control-flow nesting depth of Python source.

Depth counts statement-level control constructs only: loops, conditionals,
pattern matches, and (toggleably) exception handlers.  Top-level straight
line code has depth 0; a loop whose body holds a conditional has depth 2.
Expression-level branching (ternaries, comprehensions, boolean operators)
does not count.
"""
from __future__ import annotations

import ast

from .tree_distance import UnparseableSource

_LOOP_AND_BRANCH: tuple[type, ...] = (
    ast.For, ast.AsyncFor, ast.While, ast.If, ast.Match)
_EXCEPTION: tuple[type, ...] = (ast.Try,)
if hasattr(ast, "TryStar"):  # 3.11+
    _EXCEPTION = _EXCEPTION + (ast.TryStar,)


def max_control_depth(source: str, count_exceptions: bool = True) -> int:
    try:
        tree = ast.parse(source)
    except (SyntaxError, ValueError) as exc:
        raise UnparseableSource(str(exc)) from exc
    nesting = _LOOP_AND_BRANCH + _EXCEPTION if count_exceptions \
        else _LOOP_AND_BRANCH

    def walk(node: ast.AST, depth: int) -> int:
        deepest = depth
        for child in ast.iter_child_nodes(node):
            child_depth = depth + 1 if isinstance(child, nesting) else depth
            deepest = max(deepest, walk(child, child_depth))
        return deepest

    return walk(tree, 0)


def cfg_depth_diff(src_a: str, src_b: str,
                   count_exceptions: bool = True) -> int:
    return abs(max_control_depth(src_a, count_exceptions)
               - max_control_depth(src_b, count_exceptions))
