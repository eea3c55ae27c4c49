"""Shallow fusion of a context graph into beam search and n-best rescoring.

The acoustic model is replaced by a precomputed emission matrix of per-frame
log probabilities. Each frame every hypothesis emits exactly one symbol:
blank (context state untouched) or a non-blank token (context advanced).
Hypotheses are ranked by ``base_score + lam * ctx_score``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from .arpa import ArpaModel
from .context_graph import ROOT_STATE, ContextGraph, MatchState
from .errors import ConfigError, FormatError
from .subword import SubwordVocab

# combined scores closer than this are a tie, broken by token sequence
TIE_TOL = 1e-9
LN10 = math.log(10.0)


@dataclass(frozen=True)
class EmissionMatrix:
    logprobs: np.ndarray  # (T, V) natural-log probabilities
    blank_id: int = 0
    frame_shift_s: float = 0.01
    norm_tol: Optional[float] = field(default=1e-3, compare=False)

    def __post_init__(self) -> None:
        lp = np.asarray(self.logprobs, dtype=np.float64)
        if lp.ndim != 2 or lp.shape[1] < 1:
            raise FormatError(f"emission matrix must be T x V, got shape {lp.shape}")
        if not 0 <= self.blank_id < lp.shape[1]:
            raise FormatError(f"blank id {self.blank_id} outside vocabulary of size {lp.shape[1]}")
        if not self.frame_shift_s > 0:
            raise FormatError("frame_shift_s must be > 0")
        if self.norm_tol is not None and lp.shape[0]:
            row_mass = np.logaddexp.reduce(lp, axis=1)
            worst = float(np.max(np.abs(row_mass)))
            if not worst <= self.norm_tol:
                raise FormatError(f"emission rows are not normalized (|logsumexp| up to {worst:.3g})")
        object.__setattr__(self, "logprobs", lp)

    @property
    def num_frames(self) -> int:
        return self.logprobs.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.logprobs.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_frames * self.frame_shift_s


def read_emissions(path: Union[str, Path], norm_tol: Optional[float] = 1e-3) -> EmissionMatrix:
    """Header ``T V blank_id frame_shift_s`` then T rows of V floats."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty emission file")
    head = lines[0].split()
    try:
        T, V, blank = int(head[0]), int(head[1]), int(head[2])
        shift = float(head[3])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: bad header {lines[0]!r}") from exc
    if len(lines) - 1 != T:
        raise FormatError(f"{path}: header says {T} frames, found {len(lines) - 1}")
    rows = []
    for i, ln in enumerate(lines[1:], start=1):
        vals = ln.split()
        if len(vals) != V:
            raise FormatError(f"{path}: frame {i} has {len(vals)} values, expected {V}")
        try:
            rows.append([float(v) for v in vals])
        except ValueError as exc:
            raise FormatError(f"{path}: frame {i}: {exc}") from exc
    lp = np.array(rows, dtype=np.float64).reshape(T, V)
    return EmissionMatrix(lp, blank_id=blank, frame_shift_s=shift, norm_tol=norm_tol)


def write_emissions(em: EmissionMatrix, path: Union[str, Path]) -> None:
    out = [f"{em.num_frames} {em.vocab_size} {em.blank_id} {em.frame_shift_s!r}"]
    out.extend(" ".join(repr(float(x)) for x in row) for row in em.logprobs)
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    base_score: float
    ctx_state: MatchState = ROOT_STATE
    ctx_score: float = 0.0
    combined: float = 0.0


@dataclass(frozen=True)
class DecodeResult:
    best: Hypothesis
    nbest: list[Hypothesis]
    num_frames: int


def _logaddexp(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if b == -math.inf:
        return a
    return a + math.log1p(math.exp(b - a))


def _rank_key(h: Hypothesis) -> tuple:
    return (-h.combined, h.tokens)


def select_best(hyps: Iterable[Hypothesis]) -> Hypothesis:
    """Highest combined score; near-ties go to the lexicographically smallest tokens."""
    hyps = list(hyps)
    top = max(h.combined for h in hyps)
    return min((h for h in hyps if h.combined >= top - TIE_TOL), key=lambda h: h.tokens)


def beam_search_fuse(
    em: EmissionMatrix,
    graph: Optional[ContextGraph] = None,
    beam: Optional[int] = 8,
    lam: float = 1.0,
    bias_in_pruning: bool = True,
    nbest: int = 1,
) -> DecodeResult:
    """Frame-synchronous beam search with the graph's bias added per token.

    ``beam=None`` disables pruning. With ``bias_in_pruning`` off, pruning
    only sees credit for completed matches, never the provisional prefix
    credit. Finalize deltas are applied to every survivor before ranking.
    """
    if beam is not None and beam < 1:
        raise ConfigError("beam must be >= 1")
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    use_ctx = graph is not None
    blank = em.blank_id
    labels = [v for v in range(em.vocab_size) if v != blank]

    # tokens -> [base, state, ctx]
    hyps: dict[tuple[int, ...], list] = {(): [0.0, ROOT_STATE, 0.0]}
    for row in em.logprobs.tolist():
        nxt: dict[tuple[int, ...], list] = {}
        for toks, (base, state, ctx) in hyps.items():
            cand = [(toks, base + row[blank], state, ctx)]
            for v in labels:
                if use_ctx:
                    st, delta = graph.advance(state, v)
                    cand.append((toks + (v,), base + row[v], st, ctx + delta))
                else:
                    cand.append((toks + (v,), base + row[v], state, ctx))
            for key, b, st, c in cand:
                old = nxt.get(key)
                if old is None:
                    nxt[key] = [b, st, c]
                else:
                    old[0] = _logaddexp(old[0], b)
        if beam is not None and len(nxt) > beam:
            def prune_score(item) -> float:
                b, st, c = item[1]
                if use_ctx and not bias_in_pruning:
                    c += graph.finalize(st)
                return b + lam * c
            ranked = sorted(nxt.items(), key=lambda it: (-prune_score(it), it[0]))
            nxt = dict(ranked[:beam])
        hyps = nxt

    final = []
    for toks, (base, state, ctx) in hyps.items():
        if use_ctx:
            ctx += graph.finalize(state)
            state = ROOT_STATE
        final.append(Hypothesis(toks, base, state, ctx, base + lam * ctx))
    best = select_best(final)
    ranked = sorted(final, key=_rank_key)
    ranked.remove(best)
    return DecodeResult(best, [best] + ranked[: max(nbest, 1) - 1], em.num_frames)


# n-best rescoring


@dataclass(frozen=True)
class Candidate:
    base_score: float
    tokens: Optional[tuple[int, ...]] = None
    words: Optional[tuple[str, ...]] = None
    context_score: float = 0.0
    score: Optional[float] = None

    def __post_init__(self) -> None:
        if self.tokens is None and self.words is None:
            raise FormatError("candidate needs tokens or words")
        if not math.isfinite(self.base_score):
            raise FormatError(f"non-finite base score {self.base_score}")


@dataclass(frozen=True)
class NBestList:
    utt_id: str
    candidates: tuple[Candidate, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.candidates:
            raise FormatError(f"{self.utt_id}: empty n-best list")


def _graph_score(graph: ContextGraph, cand: Candidate, vocab: Optional[SubwordVocab]) -> float:
    if cand.tokens is not None:
        return graph.score_sequence(cand.tokens)
    if vocab is None:
        raise ConfigError("word-level candidates need a vocabulary to score against a graph")
    return graph.score_sequence(vocab.segment_phrase(cand.words))


def _lm_score(model: ArpaModel, cand: Candidate, vocab: Optional[SubwordVocab]) -> float:
    words = cand.words
    if words is None:
        if vocab is None:
            raise ConfigError("token-level candidates need a vocabulary to score with a word LM")
        words = vocab.decode_ids(cand.tokens)
    if not words:
        return 0.0
    return model.sequence_logprob(words) * LN10


def rescore_nbest(
    nbest: NBestList,
    scorer: Union[ContextGraph, ArpaModel],
    lam: float = 1.0,
    vocab: Optional[SubwordVocab] = None,
) -> NBestList:
    """Add ``lam`` times the contextual score and stable-sort descending.

    A word LM contributes its log10 sequence probability converted to natural
    log (factor ln 10), recorded in the returned metadata.
    """
    if isinstance(scorer, ContextGraph):
        score_fn, meta = _graph_score, {"scorer": "context_graph"}
    elif isinstance(scorer, ArpaModel):
        score_fn, meta = _lm_score, {"scorer": "arpa", "log10_to_ln": LN10}
    else:
        raise ConfigError(f"unsupported scorer {type(scorer).__name__}")
    rescored = []
    for c in nbest.candidates:
        ctx = score_fn(scorer, c, vocab)
        rescored.append(replace(c, context_score=ctx, score=c.base_score + lam * ctx))
    rescored.sort(key=lambda c: -c.score)
    return NBestList(nbest.utt_id, tuple(rescored), {**nbest.metadata, **meta, "lambda": lam})


def read_nbest(path: Union[str, Path]) -> list[NBestList]:
    """JSON lines: ``{"utt_id", "base_score", "text" | "tokens"}``; grouped by utt_id in file order."""
    groups: dict[str, list[Candidate]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                cand = Candidate(
                    base_score=float(rec["base_score"]),
                    tokens=tuple(int(t) for t in rec["tokens"]) if "tokens" in rec else None,
                    words=tuple(rec["text"].split()) if "text" in rec else None,
                )
                groups.setdefault(str(rec["utt_id"]), []).append(cand)
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return [NBestList(utt, tuple(cands)) for utt, cands in groups.items()]


def nbest_records(lists: Iterable[NBestList]) -> Iterator[dict]:
    for nb in lists:
        for rank, c in enumerate(nb.candidates):
            rec: dict = {"utt_id": nb.utt_id, "rank": rank, "base_score": c.base_score}
            if c.tokens is not None:
                rec["tokens"] = list(c.tokens)
            if c.words is not None:
                rec["text"] = " ".join(c.words)
            rec["context_score"] = c.context_score
            rec["score"] = c.score
            yield rec
