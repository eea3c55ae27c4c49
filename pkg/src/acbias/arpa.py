"""ARPA back-off n-gram language models.

Parsing, exact n-gram lookup, Katz back-off scoring and serialization back
to ARPA text. Words are matched byte-exact; no case folding happens here.
"""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Union

from .errors import FormatError

logger = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
RESERVED = frozenset({BOS, EOS, UNK})

# used when neither the word nor <unk> is a unigram (SRILM's "log zero")
LOG10_FLOOR = -99.0

_NGRAM_COUNT = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
_SECTION = re.compile(r"^\\(\d+)-grams:$")

Entry = tuple[float, Optional[float]]


@dataclass(frozen=True)
class ArpaModel:
    """Parsed back-off LM.

    ``tables[n]`` maps a word tuple of length ``n`` to ``(logprob, backoff)``
    with both values in log10. ``counts`` holds the header counts as read.
    """

    counts: dict[int, int]
    tables: dict[int, dict[tuple[str, ...], Entry]]
    warnings: tuple[str, ...] = ()
    vocab: frozenset[str] = field(init=False)

    def __post_init__(self) -> None:
        unigrams = self.tables.get(1, {})
        object.__setattr__(self, "vocab", frozenset(w for (w,) in unigrams))

    @property
    def max_order(self) -> int:
        return max(self.counts) if self.counts else 0

    def __len__(self) -> int:
        return sum(len(t) for t in self.tables.values())

    def ngrams(self, order: int) -> dict[tuple[str, ...], Entry]:
        return self.tables.get(order, {})

    def lookup(self, words: Sequence[str]) -> Optional[Entry]:
        """Exact match in the table of order ``len(words)``; no back-off."""
        n = len(words)
        if n < 1:
            raise ValueError("lookup needs at least one word")
        if n > self.max_order:
            raise ValueError(f"{n}-gram requested from an order-{self.max_order} model")
        return self.tables[n].get(tuple(words))

    def _conditional(self, context: tuple[str, ...], word: str) -> float:
        acc = 0.0
        while context:
            hit = self.tables[len(context) + 1].get(context + (word,))
            if hit is not None:
                return acc + hit[0]
            ctx_entry = self.tables[len(context)].get(context)
            if ctx_entry is not None and ctx_entry[1] is not None:
                acc += ctx_entry[1]
            context = context[1:]
        hit = self.tables[1].get((word,))
        if hit is None:
            hit = self.tables[1].get((UNK,))
        return acc + (hit[0] if hit is not None else LOG10_FLOOR)

    def sequence_logprob(self, words: Sequence[str]) -> float:
        """Total log10 probability of ``words`` under Katz back-off.

        Out-of-vocabulary words are mapped to ``<unk>``. Sentence boundaries
        are not added and every position is scored, including any ``<s>``
        the caller passes.
        """
        if not words:
            raise ValueError("sequence_logprob needs a non-empty word sequence")
        mapped = [w if w in self.vocab else UNK for w in words]
        history = self.max_order - 1
        total = 0.0
        for i, word in enumerate(mapped):
            context = tuple(mapped[max(0, i - history) : i])
            total += self._conditional(context, word)
        return total


def parse_arpa(source: Union[str, TextIO, Iterable[str]]) -> ArpaModel:
    """Parse ARPA text from a string, an open text stream or an iterable of lines."""
    if isinstance(source, str):
        source = io.StringIO(source)

    counts: dict[int, int] = {}
    tables: dict[int, dict[tuple[str, ...], Entry]] = {}
    warnings: list[str] = []
    state = "preamble"
    order = 0

    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if state == "preamble":
            if line == "\\data\\":
                state = "header"
            continue
        if not line:
            continue
        if line == "\\end\\":
            state = "done"
            break
        section = _SECTION.match(line)
        if section:
            order = int(section.group(1))
            if order not in counts:
                raise FormatError(f"line {lineno}: section for undeclared order {order}")
            if order in tables:
                raise FormatError(f"line {lineno}: duplicate {order}-grams section")
            tables[order] = {}
            state = "body"
            continue
        if state == "header":
            m = _NGRAM_COUNT.match(line)
            if not m:
                raise FormatError(f"line {lineno}: expected 'ngram N=count', got {line!r}")
            counts[int(m.group(1))] = int(m.group(2))
            continue

        fields = line.split()
        if len(fields) not in (order + 1, order + 2):
            raise FormatError(f"line {lineno}: expected {order}-gram row, got {line!r}")
        try:
            logprob = float(fields[0])
            backoff = float(fields[order + 1]) if len(fields) == order + 2 else None
        except ValueError as exc:
            raise FormatError(f"line {lineno}: bad number in {line!r}") from exc
        if logprob > 0:
            raise FormatError(f"line {lineno}: positive log probability {logprob}")
        tables[order][tuple(fields[1 : order + 1])] = (logprob, backoff)

    if state == "preamble":
        raise FormatError("missing \\data\\ header")
    if state != "done":
        raise FormatError("truncated model: no \\end\\ marker")
    if not counts:
        raise FormatError("no 'ngram N=count' lines in header")

    max_order = max(counts)
    for n in sorted(counts):
        table = tables.setdefault(n, {})
        if len(table) != counts[n]:
            warnings.append(f"{n}-grams: header declares {counts[n]}, found {len(table)}")
    top = tables[max_order]
    if any(bo is not None for _, bo in top.values()):
        warnings.append(f"{max_order}-grams: dropped back-off weights on highest order")
        tables[max_order] = {k: (lp, None) for k, (lp, _) in top.items()}
    for w in warnings:
        logger.warning("ARPA: %s", w)

    return ArpaModel(counts=counts, tables=tables, warnings=tuple(warnings))


def load_arpa(path: Union[str, Path]) -> ArpaModel:
    with open(path, encoding="utf-8") as fh:
        return parse_arpa(fh)


def to_arpa(model: ArpaModel) -> str:
    """Serialize a model to ARPA text; floats are written in shortest round-trip form."""
    out = ["", "\\data\\"]
    for n in sorted(model.counts):
        out.append(f"ngram {n}={len(model.tables.get(n, {}))}")
    for n in sorted(model.counts):
        out.append("")
        out.append(f"\\{n}-grams:")
        for words, (lp, bo) in model.tables.get(n, {}).items():
            row = f"{lp!r}\t{' '.join(words)}"
            if bo is not None:
                row += f"\t{bo!r}"
            out.append(row)
    out.append("")
    out.append("\\end\\")
    return "\n".join(out) + "\n"
