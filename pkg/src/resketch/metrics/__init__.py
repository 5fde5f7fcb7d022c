"""Scoring and structural-change metrics."""
from .bleu import bleu_from_tokens, code_bleu, token_stream
from .control_flow import cfg_depth_diff, max_control_depth
from .report import (BucketReport, GrowthSplitReport, ProblemScore,
                     StructuralDelta, aggregate, growth_split, pass_at_1,
                     pass_rate, render_report, report_records, score_trace,
                     structural_delta, trace_delta)
from .tree_distance import (TreeNode, UnparseableSource, ast_edit_distance,
                            ast_to_tree, tree_distance, tree_size)

__all__ = [
    "BucketReport", "GrowthSplitReport", "ProblemScore", "StructuralDelta",
    "TreeNode", "UnparseableSource", "aggregate", "ast_edit_distance",
    "ast_to_tree", "bleu_from_tokens", "cfg_depth_diff", "code_bleu",
    "growth_split", "max_control_depth", "pass_at_1", "pass_rate",
    "render_report", "report_records", "score_trace", "structural_delta",
    "token_stream", "trace_delta", "tree_distance", "tree_size",
]
