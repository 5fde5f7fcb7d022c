"""Sentence-level BLEU over lexical Python token streams.

Tokens come from the stdlib tokenizer: NAME/NUMBER/STRING/OP strings only,
so comments and pure layout (newlines, indentation) never affect the score.
Smoothing replaces a zero n-gram match count with epsilon before dividing,
and the order cap ``min(4, len(ref), len(cand))`` keeps identity pairs at
exactly 1.0 even for very short programs.
"""
from __future__ import annotations

import io
import math
import tokenize
from collections import Counter

_KEPT_TOKEN_TYPES = frozenset(
    {tokenize.NAME, tokenize.NUMBER, tokenize.STRING, tokenize.OP})

DEFAULT_EPSILON = 0.1
MAX_ORDER = 4


def token_stream(source: str) -> list[str]:
    """Lexical tokens of *source*; collects what it can on tokenize errors."""
    tokens: list[str] = []
    reader = io.StringIO(source).readline
    try:
        for tok in tokenize.generate_tokens(reader):
            if tok.type in _KEPT_TOKEN_TYPES:
                tokens.append(tok.string)
    except (tokenize.TokenError, IndentationError, SyntaxError):
        pass
    return tokens


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n])
                   for i in range(len(tokens) - n + 1))


def code_bleu(reference: str, candidate: str, max_order: int = MAX_ORDER,
              epsilon: float = DEFAULT_EPSILON) -> float:
    """BLEU in [0,1] between two sources; 0 when either side has no tokens."""
    ref = token_stream(reference)
    cand = token_stream(candidate)
    return bleu_from_tokens(ref, cand, max_order=max_order, epsilon=epsilon)


def bleu_from_tokens(ref: list[str], cand: list[str],
                     max_order: int = MAX_ORDER,
                     epsilon: float = DEFAULT_EPSILON) -> float:
    if not ref or not cand:
        return 0.0
    effective_order = min(max_order, len(ref), len(cand))
    log_sum = 0.0
    for n in range(1, effective_order + 1):
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        matched = sum(min(count, ref_counts[gram])
                      for gram, count in cand_counts.items())
        total = sum(cand_counts.values())
        precision = (matched if matched > 0 else epsilon) / total
        log_sum += math.log(precision)
    geo_mean = math.exp(log_sum / effective_order)
    c, r = len(cand), len(ref)
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * geo_mean
