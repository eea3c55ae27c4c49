"""WER, named-entity accuracy, NE-WER, OOV-entity accuracy and RTFX."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

logger = logging.getLogger(__name__)

Words = Sequence[str]


@dataclass(frozen=True)
class WerResult:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    ref_words: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def correct(self) -> int:
        return self.ref_words - self.substitutions - self.deletions

    @property
    def empty_ref(self) -> bool:
        """No reference words: ``ratio`` then counts insertions, not a rate."""
        return self.ref_words == 0

    @property
    def ratio(self) -> float:
        if self.ref_words == 0:
            return float(self.insertions)
        return self.errors / self.ref_words

    def __add__(self, other: "WerResult") -> "WerResult":
        return WerResult(
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.ref_words + other.ref_words,
        )


def wer(ref: Words, hyp: Words) -> WerResult:
    """Unit-cost Levenshtein alignment.

    Among minimum-cost alignments the one with the most substitutions wins,
    then the most insertions, so counts are reproducible. At a fixed cell
    I - D is fixed, so minimising (cost, -substitutions) pins down all three.
    """
    n, m = len(ref), len(hyp)
    # cell value: (cost, -substitutions)
    prev = [(j, 0) for j in range(m + 1)]
    for i in range(1, n + 1):
        r = ref[i - 1]
        row = [(i, 0)]
        for j in range(1, m + 1):
            dc, ds = prev[j - 1]
            if r != hyp[j - 1]:
                dc, ds = dc + 1, ds - 1
            ic, is_ = row[j - 1]
            uc, us = prev[j]
            row.append(min((dc, ds), (ic + 1, is_), (uc + 1, us)))
        prev = row
    cost, neg_s = prev[m]
    s = -neg_s
    # I + D = cost - S and I - D = m - n
    ins = (cost - s + m - n) // 2
    return WerResult(s, ins, cost - s - ins, n)


def corpus_wer(refs: Iterable[Words], hyps: Iterable[Words]) -> WerResult:
    total = WerResult()
    for r, h in zip(refs, hyps, strict=True):
        total = total + wer(r, h)
    return total


def count_occurrences(words: Words, phrase: Words) -> int:
    """Contiguous (possibly overlapping) occurrences of ``phrase`` in ``words``."""
    k = len(phrase)
    if k == 0:
        return 0
    phrase = tuple(phrase)
    return sum(tuple(words[i:i + k]) == phrase for i in range(len(words) - k + 1))


def _unique(entities: Iterable[Words]) -> list[tuple[str, ...]]:
    return list(dict.fromkeys(tuple(e) for e in entities if e))


def ne_counts(refs: Iterable[Words], hyps: Iterable[Words], entities: Iterable[Words]) -> tuple[int, int]:
    """(correct, total) over reference entity occurrences.

    The k-th occurrence of an entity in a reference is correct when the paired
    hypothesis holds at least k occurrences of it.
    """
    ents = _unique(entities)
    correct = total = 0
    for r, h in zip(refs, hyps, strict=True):
        for e in ents:
            n_ref = count_occurrences(r, e)
            if n_ref:
                total += n_ref
                correct += min(n_ref, count_occurrences(h, e))
    return correct, total


def ne_accuracy(refs: Sequence[Words], hyps: Sequence[Words], entities: Iterable[Words]) -> Optional[float]:
    """Fraction of entity occurrences recognised exactly; None when there are none."""
    correct, total = ne_counts(refs, hyps, entities)
    return correct / total if total else None


def ne_wer(refs: Sequence[Words], hyps: Sequence[Words], entities: Iterable[Words]) -> Optional[WerResult]:
    """Corpus WER over the utterances whose reference contains an entity."""
    ents = _unique(entities)
    pairs = [(r, h) for r, h in zip(refs, hyps, strict=True) if any(count_occurrences(r, e) for e in ents)]
    if not pairs:
        return None
    return corpus_wer([r for r, _ in pairs], [h for _, h in pairs])


def oov_entities(entities: Iterable[Words], known_vocab: Iterable[str]) -> list[tuple[str, ...]]:
    known = set(known_vocab)
    return [e for e in _unique(entities) if any(w not in known for w in e)]


def oov_accuracy(
    refs: Sequence[Words], hyps: Sequence[Words], entities: Iterable[Words], known_vocab: Iterable[str]
) -> Optional[float]:
    oov = oov_entities(entities, known_vocab)
    if not oov:
        return None
    return ne_accuracy(refs, hyps, oov)


def rtfx(audio_seconds: float, wall_seconds: float) -> float:
    """Inverse real-time factor: audio duration over decoding time."""
    if not wall_seconds > 0:
        raise ValueError(f"decode time must be > 0, got {wall_seconds}")
    return audio_seconds / wall_seconds


@dataclass(frozen=True)
class EvalReport:
    substitutions: int
    insertions: int
    deletions: int
    ref_words: int
    wer: float
    utterances: int
    ne_correct: Optional[int] = None
    ne_total: Optional[int] = None
    ne_accuracy: Optional[float] = None
    ne_wer: Optional[float] = None
    ne_utterances: Optional[int] = None
    oov_accuracy: Optional[float] = None
    oov_entities: Optional[int] = None
    audio_seconds: Optional[float] = None
    decode_seconds: Optional[float] = None
    rtfx: Optional[float] = None
    ne_counting: str = "per_occurrence"

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name}: {'absent' if value is None else _fmt(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EvalReport":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, raw = line.partition(":")
            key, raw = key.strip(), raw.strip()
            if key not in types:
                raise ValueError(f"unknown report field {key!r}")
            values[key] = None if raw == "absent" else _parse(types[key], raw)
        return cls(**values)

    def as_dict(self) -> dict:
        return asdict(self)


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _parse(type_name: str, raw: str):
    if "int" in type_name:
        return int(raw)
    if "float" in type_name:
        return float(raw)
    return raw


def evaluate(
    refs: Sequence[Words],
    hyps: Sequence[Words],
    entities: Optional[Iterable[Words]] = None,
    known_vocab: Optional[Iterable[str]] = None,
    audio_seconds: Optional[float] = None,
    decode_seconds: Optional[float] = None,
) -> EvalReport:
    total = corpus_wer(refs, hyps)
    ents = _unique(entities or [])
    extra: dict = {}
    if ents:
        correct, count = ne_counts(refs, hyps, ents)
        subset = ne_wer(refs, hyps, ents)
        extra.update(
            ne_correct=correct,
            ne_total=count,
            ne_accuracy=correct / count if count else None,
            ne_wer=subset.ratio if subset else None,
            ne_utterances=sum(any(count_occurrences(r, e) for e in ents) for r in refs),
        )
        if known_vocab is not None:
            oov = oov_entities(ents, known_vocab)
            extra.update(oov_entities=len(oov), oov_accuracy=ne_accuracy(refs, hyps, oov) if oov else None)
    if audio_seconds is not None and decode_seconds is not None:
        extra.update(audio_seconds=audio_seconds, decode_seconds=decode_seconds, rtfx=rtfx(audio_seconds, decode_seconds))
    return EvalReport(
        substitutions=total.substitutions,
        insertions=total.insertions,
        deletions=total.deletions,
        ref_words=total.ref_words,
        wer=total.ratio,
        utterances=len(refs),
        **extra,
    )


def read_transcripts(path: Union[str, Path]) -> dict[str, tuple[str, ...]]:
    """``utt_id<TAB>text`` per line; a line with only an id is an empty transcript."""
    out: dict[str, tuple[str, ...]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        utt, _, text = line.partition("\t")
        out[utt.strip()] = tuple(text.split())
    return out


def pair_transcripts(
    refs: dict[str, tuple[str, ...]], hyps: dict[str, tuple[str, ...]]
) -> tuple[list[tuple[str, ...]], list[tuple[str, ...]]]:
    """Align by utterance id in sorted order; a missing hypothesis counts as empty."""
    missing = [u for u in refs if u not in hyps]
    extra = [u for u in hyps if u not in refs]
    if missing:
        logger.warning("%d reference utterances have no hypothesis", len(missing))
    if extra:
        logger.warning("ignoring %d hypotheses without a reference", len(extra))
    ids = sorted(refs)
    return [refs[u] for u in ids], [hyps.get(u, ()) for u in ids]
