"""A small synthetic ASR world for end-to-end checks.

Words are built from syllables; the "acoustic model" is an emission matrix
in which every piece competes with a confusable partner piece and sometimes
loses. Sentences follow a sparse bigram chain, so a bigram LM estimated on
training text knows which word sequences are plausible. Named entities are
multi-word phrases of rarer words, half of them seen in LM training text.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .arpa import BOS, EOS, UNK, ArpaModel, to_arpa
from .decoder import EmissionMatrix, beam_search_fuse, write_emissions
from .context_graph import ContextGraph
from .evaluation import corpus_wer, ne_accuracy
from .graph_builder import BiasingConfig, build_context_graph
from .subword import MARKER, SubwordVocab

SYLLABLES = ("ba", "ko", "mi", "ru", "te", "sa", "lo", "ni", "pe", "du", "ga", "vi", "zo", "fe")
BLANK = "<blank>"


def estimate_bigram(sentences: list[tuple[str, ...]], discount: float = 0.5, unk_prob: float = 1e-4) -> ArpaModel:
    """Absolute-discount bigram LM with back-off weights normalized per history."""
    uni: Counter = Counter()
    bi: Counter = Counter()
    for s in sentences:
        seq = (BOS,) + s + (EOS,)
        uni.update(seq[1:])
        bi.update(zip(seq[:-1], seq[1:]))
    total = sum(uni.values())
    p_uni = {w: (1 - unk_prob) * c / total for w, c in uni.items()}
    p_uni[UNK] = unk_prob

    hist: Counter = Counter()
    followers: dict[str, list[str]] = {}
    for (h, w), c in bi.items():
        hist[h] += c
        followers.setdefault(h, []).append(w)

    unigrams: dict[tuple[str, ...], tuple[float, Optional[float]]] = {}
    bigrams: dict[tuple[str, ...], tuple[float, Optional[float]]] = {}
    for (h, w), c in sorted(bi.items()):
        bigrams[(h, w)] = (math.log10((c - discount) / hist[h]), None)
    for w in sorted(set(p_uni) | {BOS}):
        bo = None
        if w in hist:
            left = discount * len(followers[w]) / hist[w]
            seen = sum(p_uni[f] for f in followers[w])
            bo = math.log10(left / (1 - seen))
        lp = -99.0 if w == BOS else math.log10(p_uni[w])
        unigrams[(w,)] = (lp, bo)
    return ArpaModel(counts={1: len(unigrams), 2: len(bigrams)}, tables={1: unigrams, 2: bigrams})


@dataclass
class SyntheticWorld:
    vocab: SubwordVocab
    lm: ArpaModel
    entities: list[tuple[str, ...]]
    refs: list[tuple[str, ...]]
    emissions: list[EmissionMatrix]
    words: list[str]

    @property
    def blank_id(self) -> int:
        return self.vocab.ids[BLANK]


def make_world(
    seed: int = 0,
    n_words: int = 40,
    n_entities: int = 12,
    n_train: int = 3000,
    n_test: int = 80,
    p_hard: float = 0.15,
    p_entity: float = 0.5,
) -> SyntheticWorld:
    rng = random.Random(seed)
    pieces = [BLANK] + [MARKER + s for s in SYLLABLES] + list(SYLLABLES)
    vocab = SubwordVocab(tuple(pieces))

    def new_word(n_syl: int, taken: set[str]) -> str:
        while True:
            w = "".join(rng.choice(SYLLABLES) for _ in range(n_syl))
            if w not in taken:
                taken.add(w)
                return w

    taken: set[str] = set()
    words = [new_word(2, taken) for _ in range(n_words)]
    entities = [(new_word(3, taken), new_word(3, taken)) for _ in range(n_entities)]
    in_lm_entities = entities[: n_entities // 2]
    successors = {w: rng.sample(words, 3) for w in words}

    def sentence(with_entity: Optional[tuple[str, ...]]) -> tuple[str, ...]:
        w = rng.choice(words)
        out = [w]
        for _ in range(rng.randint(3, 6)):
            w = rng.choice(successors[w]) if rng.random() < 0.9 else rng.choice(words)
            out.append(w)
        if with_entity:
            pos = rng.randint(0, len(out))
            out[pos:pos] = with_entity
        return tuple(out)

    train = [sentence(rng.choice(in_lm_entities) if rng.random() < 0.1 else None) for _ in range(n_train)]
    lm = estimate_bigram(train)
    refs = [sentence(rng.choice(entities) if rng.random() < p_entity else None) for _ in range(n_test)]

    partner = {s: SYLLABLES[i ^ 1] for i, s in enumerate(SYLLABLES)}
    emissions = [_emissions(vocab, r, partner, p_hard, rng) for r in refs]
    return SyntheticWorld(vocab, lm, entities, refs, emissions, words)


def _emissions(vocab: SubwordVocab, words: tuple[str, ...], partner: dict[str, str], p_hard: float, rng: random.Random) -> EmissionMatrix:
    V = len(vocab)
    blank = vocab.ids[BLANK]
    rows = []
    for w in words:
        for piece in vocab.segment_word(w):
            body = piece[len(MARKER):] if piece.startswith(MARKER) else piece
            rival = (MARKER if piece.startswith(MARKER) else "") + partner[body]
            hard = rng.random() < p_hard
            p_true, p_rival = (0.35, 0.45) if hard else (0.7, 0.15)
            rows.append(_row(V, {vocab.ids[piece]: p_true, vocab.ids[rival]: p_rival, blank: 0.05}))
        rows.append(_row(V, {blank: 0.9}))
    return EmissionMatrix(np.log(np.array(rows)), blank_id=blank, frame_shift_s=0.04)


def _row(V: int, mass: dict[int, float]) -> list[float]:
    rest = (1.0 - sum(mass.values())) / (V - len(mass))
    return [mass.get(v, rest) for v in range(V)]


def decode_world(world: SyntheticWorld, graph: Optional[ContextGraph], beam: int = 8, lam: float = 1.0) -> list[tuple[str, ...]]:
    return [world.vocab.decode_ids(beam_search_fuse(em, graph, beam=beam, lam=lam).best.tokens) for em in world.emissions]


def run_demo(seed: int = 0, beam: int = 8, cfg: BiasingConfig = BiasingConfig()) -> dict[str, dict[str, float]]:
    """WER and NE accuracy for the no-context, LM-only, keyword-only and combined graphs."""
    world = make_world(seed)
    graphs = {
        "baseline": None,
        "lm": build_context_graph(world.lm, None, world.vocab, cfg),
        "keywords": build_context_graph(None, world.entities, world.vocab, cfg),
        "combined": build_context_graph(world.lm, world.entities, world.vocab, cfg),
    }
    results = {}
    for name, graph in graphs.items():
        hyps = decode_world(world, graph, beam=beam)
        results[name] = {
            "wer": corpus_wer(world.refs, hyps).ratio,
            "ne_accuracy": ne_accuracy(world.refs, hyps, world.entities),
        }
    return results


def write_world(world: SyntheticWorld, out_dir: Union[str, Path]) -> Path:
    """Lay the world out as CLI input files: LM, vocab, keywords, emissions, references."""
    out = Path(out_dir)
    (out / "emissions").mkdir(parents=True, exist_ok=True)
    (out / "lm.arpa").write_text(to_arpa(world.lm), encoding="utf-8")
    (out / "vocab.txt").write_text("\n".join(world.vocab.pieces) + "\n", encoding="utf-8")
    (out / "keywords.txt").write_text("".join(" ".join(e) + "\n" for e in world.entities), encoding="utf-8")
    refs = []
    for i, (ref, em) in enumerate(zip(world.refs, world.emissions)):
        utt = f"utt{i:04d}"
        write_emissions(em, out / "emissions" / f"{utt}.emis")
        refs.append(f"{utt}\t{' '.join(ref)}\n")
    (out / "refs.txt").write_text("".join(refs), encoding="utf-8")
    return out
