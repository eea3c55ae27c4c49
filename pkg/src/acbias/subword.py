"""Greedy longest-match subword segmentation.

Words are segmented left to right over their marker-prefixed form
(``"▁" + word``), always taking the longest vocabulary piece that matches.
Characters no piece covers become one unknown id each. A lexicon of
externally produced segmentations, when given, takes precedence word by word.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import FormatError

MARKER = "▁"
UNK_PIECE = "<unk>"


@dataclass(frozen=True)
class SubwordVocab:
    pieces: tuple[str, ...]
    word_start_marker: str = MARKER
    unk_piece: str = UNK_PIECE
    lexicon: dict[str, tuple[str, ...]] = field(default_factory=dict, compare=False)
    ids: dict[str, int] = field(init=False, repr=False, compare=False)
    unk_id: int = field(init=False)
    _max_len: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        ids: dict[str, int] = {}
        for i, piece in enumerate(self.pieces):
            if piece in ids:
                raise FormatError(f"duplicate piece {piece!r} at ids {ids[piece]} and {i}")
            if not piece:
                raise FormatError(f"empty piece at id {i}")
            if self.word_start_marker in piece[1:]:
                raise FormatError(f"word-start marker inside piece {piece!r}")
            ids[piece] = i
        for word, pieces in self.lexicon.items():
            if not pieces:
                raise FormatError(f"lexicon entry for {word!r} has no pieces")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "unk_id", ids.get(self.unk_piece, len(self.pieces)))
        object.__setattr__(self, "_max_len", max((len(p) for p in self.pieces), default=0))

    def __len__(self) -> int:
        return len(self.pieces)

    def piece(self, token_id: int) -> str:
        if token_id == self.unk_id:
            return self.unk_piece
        return self.pieces[token_id]

    def segment_word(self, word: str) -> list[str]:
        """Split one word into pieces; the first piece always carries the marker."""
        if not word or any(ch.isspace() for ch in word):
            raise ValueError(f"cannot segment {word!r}: empty or contains whitespace")
        if word in self.lexicon:
            return list(self.lexicon[word])
        text = self.word_start_marker + word
        out: list[str] = []
        pos = 0
        while pos < len(text):
            for end in range(min(len(text), pos + self._max_len), pos, -1):
                if text[pos:end] in self.ids:
                    out.append(text[pos:end])
                    pos = end
                    break
            else:
                out.append(self.unk_piece)
                # an unmatched marker is swallowed with the first character
                pos += 2 if pos == 0 else 1
        return out

    def segment_phrase(self, words: Iterable[str]) -> list[int]:
        ids = self.ids
        unk = self.unk_id
        return [ids.get(p, unk) for w in words for p in self.segment_word(w)]

    def detokenize(self, pieces: Iterable[str]) -> tuple[str, ...]:
        """Rejoin pieces into words, starting a new word at every marker."""
        marker = self.word_start_marker
        words: list[str] = []
        for p in pieces:
            if p.startswith(marker) or not words:
                words.append(p[len(marker):] if p.startswith(marker) else p)
            else:
                words[-1] += p
        return tuple(words)

    def decode_ids(self, token_ids: Iterable[int]) -> tuple[str, ...]:
        return self.detokenize(self.piece(t) for t in token_ids)


def load_vocab(
    lines: Union[Iterable[str], str, Path],
    marker: str = MARKER,
    unk_piece: str = UNK_PIECE,
    lexicon: Optional[dict[str, tuple[str, ...]]] = None,
) -> SubwordVocab:
    """Build a vocabulary from one piece per line; ids follow line order.

    Anything after a TAB is ignored, so SentencePiece ``.vocab`` files with a
    score column load unchanged.
    """
    if isinstance(lines, (str, Path)):
        lines = Path(lines).read_text(encoding="utf-8").splitlines()
    pieces = [line.rstrip("\r\n").split("\t", 1)[0] for line in lines]
    while pieces and not pieces[-1]:
        pieces.pop()
    if not pieces:
        raise FormatError("empty vocabulary")
    return SubwordVocab(tuple(pieces), word_start_marker=marker, unk_piece=unk_piece, lexicon=lexicon or {})


def read_lexicon(path: Union[str, Path]) -> dict[str, tuple[str, ...]]:
    """``word<TAB>piece piece ...`` per line, e.g. dumped from a SentencePiece model."""
    lexicon = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        word, sep, pieces = line.partition("\t")
        if not sep or not pieces.split():
            raise FormatError(f"{path}:{lineno}: expected 'word<TAB>pieces'")
        lexicon[word.strip()] = tuple(pieces.split())
    return lexicon
