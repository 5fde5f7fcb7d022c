"""Ordered labeled tree edit distance over Python ASTs (Zhang-Shasha).

Node labels default to the AST node kind, with identifier and literal text
abstracted away, so the distance measures structural change rather than
renames; ``raw_labels=True`` folds the text back in.  Expression-context
nodes (Load/Store/Del) carry no structure and are skipped entirely.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, field


class UnparseableSource(ValueError):
    """The source text does not parse; structural metrics are undefined."""


@dataclass(frozen=True)
class TreeNode:
    label: str
    children: tuple["TreeNode", ...] = field(default_factory=tuple)


def tree_size(node: TreeNode) -> int:
    return 1 + sum(tree_size(child) for child in node.children)


def _node_label(node: ast.AST, raw_labels: bool) -> str:
    kind = type(node).__name__
    if not raw_labels:
        return kind
    if isinstance(node, ast.Name):
        return f"{kind}:{node.id}"
    if isinstance(node, ast.Constant):
        return f"{kind}:{node.value!r}"
    if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
        return f"{kind}:{node.name}"
    if isinstance(node, ast.Attribute):
        return f"{kind}:{node.attr}"
    if isinstance(node, ast.arg):
        return f"{kind}:{node.arg}"
    if isinstance(node, ast.keyword) and node.arg is not None:
        return f"{kind}:{node.arg}"
    if isinstance(node, ast.alias):
        return f"{kind}:{node.name}"
    return kind


def _convert(node: ast.AST, raw_labels: bool) -> TreeNode:
    children = tuple(
        _convert(child, raw_labels)
        for child in ast.iter_child_nodes(node)
        if not isinstance(child, ast.expr_context)
    )
    return TreeNode(label=_node_label(node, raw_labels), children=children)


def ast_to_tree(source: str, raw_labels: bool = False) -> TreeNode:
    try:
        parsed = ast.parse(source)
    except (SyntaxError, ValueError) as exc:
        raise UnparseableSource(str(exc)) from exc
    return _convert(parsed, raw_labels)


def _postorder(root: TreeNode) -> tuple[list[str], list[int]]:
    """Postorder labels plus each node's leftmost-leaf postorder index."""
    labels: list[str] = []
    lmost: list[int] = []

    def walk(node: TreeNode) -> int:
        if not node.children:
            labels.append(node.label)
            lmost.append(len(labels) - 1)
            return len(labels) - 1
        first_leaf = -1
        for child in node.children:
            leaf = walk(child)
            if first_leaf < 0:
                first_leaf = leaf
        labels.append(node.label)
        lmost.append(first_leaf)
        return first_leaf

    walk(root)
    return labels, lmost


def _keyroots(lmost: list[int]) -> list[int]:
    last_for_leaf: dict[int, int] = {}
    for index, leaf in enumerate(lmost):
        last_for_leaf[leaf] = index
    return sorted(last_for_leaf.values())


def tree_distance(tree_a: TreeNode, tree_b: TreeNode) -> int:
    """Zhang-Shasha edit distance with unit insert/delete/relabel costs."""
    labels_a, lmost_a = _postorder(tree_a)
    labels_b, lmost_b = _postorder(tree_b)
    size_a, size_b = len(labels_a), len(labels_b)
    treedist = [[0] * size_b for _ in range(size_a)]

    for i in _keyroots(lmost_a):
        for j in _keyroots(lmost_b):
            _fill_treedist(i, j, labels_a, lmost_a, labels_b, lmost_b,
                           treedist)
    return treedist[size_a - 1][size_b - 1]


def _fill_treedist(i: int, j: int, labels_a: list[str], lmost_a: list[int],
                   labels_b: list[str], lmost_b: list[int],
                   treedist: list[list[int]]) -> None:
    m = i - lmost_a[i] + 2
    n = j - lmost_b[j] + 2
    ioff = lmost_a[i] - 1
    joff = lmost_b[j] - 1
    fd = [[0] * n for _ in range(m)]
    for x in range(1, m):
        fd[x][0] = fd[x - 1][0] + 1
    for y in range(1, n):
        fd[0][y] = fd[0][y - 1] + 1
    for x in range(1, m):
        for y in range(1, n):
            ax, by = x + ioff, y + joff
            if lmost_a[ax] == lmost_a[i] and lmost_b[by] == lmost_b[j]:
                cost = 0 if labels_a[ax] == labels_b[by] else 1
                fd[x][y] = min(fd[x - 1][y] + 1,
                               fd[x][y - 1] + 1,
                               fd[x - 1][y - 1] + cost)
                treedist[ax][by] = fd[x][y]
            else:
                p = lmost_a[ax] - 1 - ioff
                q = lmost_b[by] - 1 - joff
                fd[x][y] = min(fd[x - 1][y] + 1,
                               fd[x][y - 1] + 1,
                               fd[p][q] + treedist[ax][by])


def ast_edit_distance(src_a: str, src_b: str, raw_labels: bool = False) -> int:
    return tree_distance(ast_to_tree(src_a, raw_labels),
                         ast_to_tree(src_b, raw_labels))
