"""Turn an n-gram LM and a keyword list into one costed context graph.

LM n-grams get a per-arc cost of ``exp_base ** logprob`` (logprob as stored,
in log10). Keywords get ``exp_base ** logprob + alpha_in_lm`` when the exact
n-gram is in the LM and ``alpha_out_lm`` otherwise. Every arc of an entry's
subword path carries the full cost unless ``divide_by_pieces`` is set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .arpa import RESERVED, ArpaModel
from .context_graph import ContextEntry, ContextGraph, Provenance, canonical_entries
from .errors import ConfigError
from .subword import SubwordVocab

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BiasingConfig:
    alpha_in_lm: float = 0.5
    alpha_out_lm: float = 1.5
    exp_base: float = math.e
    lm_min_order: int = 1
    lm_max_order: Optional[int] = None  # None: up to the model's max order
    divide_by_pieces: bool = False

    def __post_init__(self) -> None:
        if self.alpha_in_lm < 0 or self.alpha_out_lm < 0:
            raise ConfigError("bias alphas must be >= 0")
        if not self.exp_base > 1:
            raise ConfigError(f"exp_base must be > 1, got {self.exp_base}")
        if self.lm_min_order < 1:
            raise ConfigError("lm_min_order must be >= 1")
        if self.lm_max_order is not None and self.lm_max_order < self.lm_min_order:
            raise ConfigError("lm_max_order must be >= lm_min_order")

    def lm_cost(self, log10_weight: float) -> float:
        return self.exp_base ** log10_weight


def _entry(tokens: Sequence[int], cost: float, provenance: Provenance, surface: str, cfg: BiasingConfig) -> ContextEntry:
    arc = cost / len(tokens) if cfg.divide_by_pieces else cost
    return ContextEntry.make(tokens, arc, provenance, surface)


def lm_entries(model: ArpaModel, vocab: SubwordVocab, cfg: BiasingConfig = BiasingConfig()) -> list[ContextEntry]:
    """One entry per n-gram in the configured orders, skipping reserved symbols."""
    top = model.max_order if cfg.lm_max_order is None else min(cfg.lm_max_order, model.max_order)
    out = []
    for order in range(cfg.lm_min_order, top + 1):
        for words, (logprob, _) in model.ngrams(order).items():
            if RESERVED.intersection(words):
                continue
            tokens = vocab.segment_phrase(words)
            out.append(_entry(tokens, cfg.lm_cost(logprob), Provenance.LM, " ".join(words), cfg))
    return out


def keyword_entries(
    keywords: Iterable[Sequence[str]],
    model: Optional[ArpaModel],
    vocab: SubwordVocab,
    cfg: BiasingConfig = BiasingConfig(),
    strict: bool = False,
) -> list[ContextEntry]:
    """Cost each keyword phrase by whether its exact n-gram is in ``model``.

    Keywords that segment to nothing are skipped with a warning, or raise
    ``ValueError`` when ``strict``.
    """
    out = []
    for words in keywords:
        words = tuple(words)
        surface = " ".join(words)
        tokens = vocab.segment_phrase(words) if words else []
        if not tokens:
            if strict:
                raise ValueError(f"keyword {surface!r} segments to no tokens")
            logger.warning("skipping keyword %r: no tokens", surface)
            continue
        hit = None
        if model is not None and len(words) <= model.max_order:
            hit = model.lookup(words)
        if hit is None:
            out.append(_entry(tokens, cfg.alpha_out_lm, Provenance.KEYWORD_OUT_LM, surface, cfg))
        else:
            cost = cfg.lm_cost(hit[0]) + cfg.alpha_in_lm
            out.append(_entry(tokens, cost, Provenance.KEYWORD_IN_LM, surface, cfg))
    return out


def merge(lm: Iterable[ContextEntry], kw: Iterable[ContextEntry]) -> list[ContextEntry]:
    """LM entries first, then keywords; a keyword replaces an LM entry on the same path.

    Duplicates within either list keep the highest cost. The result is sorted
    by token path.
    """
    merged = {e.tokens: e for e in canonical_entries(lm)}
    for e in canonical_entries(kw):
        merged[e.tokens] = e
    return [merged[k] for k in sorted(merged)]


def build_context_graph(
    model: Optional[ArpaModel],
    keywords: Optional[Iterable[Sequence[str]]],
    vocab: SubwordVocab,
    cfg: BiasingConfig = BiasingConfig(),
) -> ContextGraph:
    lm = lm_entries(model, vocab, cfg) if model is not None else []
    kw = keyword_entries(keywords, model, vocab, cfg) if keywords is not None else []
    return ContextGraph.build(merge(lm, kw))


def read_keywords(source: Union[str, Path, Iterable[str]]) -> list[tuple[str, ...]]:
    """One phrase per line, whitespace-separated; blank and ``#`` lines are skipped."""
    if isinstance(source, (str, Path)):
        source = Path(source).read_text(encoding="utf-8").splitlines()
    phrases = []
    for line in source:
        line = line.strip()
        if line and not line.startswith("#"):
            phrases.append(tuple(line.split()))
    return phrases
