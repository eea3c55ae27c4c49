"""Weighted Aho-Corasick context graph over token ids.

Scoring while matching a token stream:

* every arc carries a cost; a node's *path cost* is the sum of arc costs from
  the root, and is handed out provisionally as the match grows;
* reaching a node pays its *output sum*: the entry costs of every entry that
  ends there or at a node on its output chain;
* falling back along fail links, or finalizing, takes back the path cost of
  the abandoned prefix.

With this bookkeeping the advance deltas plus the finalize delta add up to
the sum of ``entry_cost`` over every occurrence of every entry in the stream.
"""

from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import FormatError

ROOT = 0
NO_NODE = -1


class Provenance(str, enum.Enum):
    LM = "lm"
    KEYWORD_IN_LM = "keyword_in_lm"
    KEYWORD_OUT_LM = "keyword_out_lm"


_PROVENANCE_CODES = {p: i for i, p in enumerate(Provenance)}
_PROVENANCE_BY_CODE = list(Provenance)


@dataclass(frozen=True)
class ContextEntry:
    tokens: tuple[int, ...]
    arc_cost: float
    entry_cost: float
    provenance: Provenance = Provenance.LM
    surface: str = ""

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError(f"context entry {self.surface!r} has no tokens")
        if not self.arc_cost >= 0:
            raise ValueError(f"negative arc cost {self.arc_cost} for {self.surface!r}")
        if abs(self.entry_cost - self.arc_cost * len(self.tokens)) > 1e-12 * max(1.0, self.entry_cost):
            raise ValueError(f"entry_cost {self.entry_cost} != arc_cost x length for {self.surface!r}")

    @classmethod
    def make(
        cls,
        tokens: Iterable[int],
        arc_cost: float,
        provenance: Provenance = Provenance.LM,
        surface: str = "",
    ) -> "ContextEntry":
        tokens = tuple(tokens)
        return cls(tokens, arc_cost, arc_cost * len(tokens), provenance, surface)


class MatchState(NamedTuple):
    """Cursor into a graph. ``accumulated`` is the running bias, for diagnostics."""

    node: int = ROOT
    accumulated: float = 0.0


ROOT_STATE = MatchState()
_new_state = tuple.__new__


class Node(NamedTuple):
    """Read-only view of one node, for inspection and tests."""

    index: int
    token: int
    parent: int
    arc_cost: float
    children: dict[int, int]
    fail: int
    output: int
    path_cost: float
    entry: Optional[ContextEntry]
    output_sum: float

    @property
    def is_end(self) -> bool:
        return self.entry is not None


def canonical_entries(entries: Iterable[ContextEntry]) -> list[ContextEntry]:
    """Deduplicate by token path (highest ``entry_cost`` wins) and sort by path."""
    best: dict[tuple[int, ...], ContextEntry] = {}
    for e in entries:
        old = best.get(e.tokens)
        if old is None or _rank(e) > _rank(old):
            best[e.tokens] = e
    return [best[k] for k in sorted(best)]


def _rank(e: ContextEntry) -> tuple:
    return (e.entry_cost, _PROVENANCE_CODES[e.provenance], e.surface)


@dataclass(eq=False)
class ContextGraph:
    """Immutable Aho-Corasick automaton; build with :meth:`build`.

    Nodes are numbered in BFS order with children visited by ascending token
    id, so the numbering depends only on the entry set. Per-node data lives in
    parallel lists indexed by node number.
    """

    token: list[int]
    parent: list[int]
    arc_cost: list[float]
    fail: list[int]
    output: list[int]
    entries: list[Optional[ContextEntry]]
    children: list[dict[int, int]] = field(init=False)
    path_cost: list[float] = field(init=False)
    output_sum: list[float] = field(init=False)
    _memo: dict[tuple[int, int], tuple[int, float]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = len(self.token)
        children: list[dict[int, int]] = [{} for _ in range(n)]
        path = [0.0] * n
        out_sum = [0.0] * n
        for u in range(1, n):
            p = self.parent[u]
            children[p][self.token[u]] = u
            path[u] = path[p] + self.arc_cost[u]
        # BFS numbering puts fail/output targets (shallower) before u
        for u in range(1, n):
            e = self.entries[u]
            o = self.output[u]
            out_sum[u] = (e.entry_cost if e is not None else 0.0) + (out_sum[o] if o != NO_NODE else 0.0)
        self.children = children
        self.path_cost = path
        self.output_sum = out_sum
        self._memo = {}

    # construction

    @classmethod
    def build(cls, entries: Iterable[ContextEntry]) -> "ContextGraph":
        entries = canonical_entries(entries)

        # trie with provisional numbering; shared arcs keep the max arc cost
        kids: list[dict[int, int]] = [{}]
        arc: list[float] = [0.0]
        ends: list[Optional[ContextEntry]] = [None]
        for e in entries:
            u = ROOT
            for t in e.tokens:
                v = kids[u].get(t)
                if v is None:
                    v = len(kids)
                    kids.append({})
                    arc.append(e.arc_cost)
                    ends.append(None)
                    kids[u][t] = v
                elif e.arc_cost > arc[v]:
                    arc[v] = e.arc_cost
                u = v
            ends[u] = e

        # renumber in BFS order, children by ascending token
        order = [ROOT]
        new_id = {ROOT: ROOT}
        token = [NO_NODE]
        parent = [NO_NODE]
        for u in order:
            for t in sorted(kids[u]):
                v = kids[u][t]
                new_id[v] = len(order)
                order.append(v)
                token.append(t)
                parent.append(new_id[u])
        n = len(order)
        children = [{t: new_id[v] for t, v in kids[old].items()} for old in order]

        fail = [ROOT] * n
        output = [NO_NODE] * n
        is_end = [ends[old] is not None for old in order]
        for u in range(1, n):
            p = parent[u]
            t = token[u]
            if p != ROOT:
                f = fail[p]
                while f != ROOT and t not in children[f]:
                    f = fail[f]
                fail[u] = children[f].get(t, ROOT)
            f = fail[u]
            output[u] = f if is_end[f] else output[f]

        return cls(
            token=token,
            parent=parent,
            arc_cost=[arc[old] for old in order],
            fail=fail,
            output=output,
            entries=[ends[old] for old in order],
        )

    # inspection

    def __len__(self) -> int:
        return len(self.token)

    @property
    def num_entries(self) -> int:
        return sum(e is not None for e in self.entries)

    def node(self, u: int) -> Node:
        return Node(
            u, self.token[u], self.parent[u], self.arc_cost[u], self.children[u],
            self.fail[u], self.output[u], self.path_cost[u], self.entries[u], self.output_sum[u],
        )

    def path(self, u: int) -> tuple[int, ...]:
        toks = []
        while u != ROOT:
            toks.append(self.token[u])
            u = self.parent[u]
        return tuple(reversed(toks))

    def find(self, tokens: Sequence[int]) -> Optional[int]:
        """Node whose trie path is exactly ``tokens``, if any."""
        u = ROOT
        for t in tokens:
            u = self.children[u].get(t)
            if u is None:
                return None
        return u

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContextGraph):
            return NotImplemented
        return (
            self.token == other.token
            and self.parent == other.parent
            and self.arc_cost == other.arc_cost
            and self.fail == other.fail
            and self.output == other.output
            and self.entries == other.entries
        )

    # matching

    def goto(self, node: int, token: int) -> tuple[int, int]:
        """Uncached transition: ``(next_node, fail_links_followed)``."""
        children = self.children
        fail = self.fail
        steps = 0
        while True:
            nxt = children[node].get(token)
            if nxt is not None:
                return nxt, steps
            if node == ROOT:
                return ROOT, steps
            node = fail[node]
            steps += 1

    def _resolve(self, node: int, token: int) -> tuple[int, float]:
        nxt, _ = self.goto(node, token)
        hit = (nxt, self.path_cost[nxt] - self.path_cost[node] + self.output_sum[nxt])
        # memo writes are idempotent, so concurrent readers are safe
        self._memo[node, token] = hit
        return hit

    def advance(self, state: MatchState, token: int) -> tuple[MatchState, float]:
        """Consume one token; return the new state and the score delta."""
        hit = self._memo.get((state[0], token))
        if hit is None:
            hit = self._resolve(state[0], token)
        return _new_state(MatchState, (hit[0], state[1] + hit[1])), hit[1]

    def finalize(self, state: MatchState) -> float:
        """Delta that takes back the provisional credit of an unfinished match."""
        return -self.path_cost[state[0]]

    def trace(self, tokens: Iterable[int]) -> tuple[list[float], float]:
        """Per-token advance deltas and the closing finalize delta."""
        state = ROOT_STATE
        deltas = []
        for t in tokens:
            state, d = self.advance(state, t)
            deltas.append(d)
        return deltas, self.finalize(state)

    def score_sequence(self, tokens: Iterable[int]) -> float:
        deltas, closing = self.trace(tokens)
        return sum(deltas) + closing

    # serialization

    def serialize(self) -> bytes:
        return serialize(self)

    @classmethod
    def deserialize(cls, data: bytes) -> "ContextGraph":
        return deserialize(data)


MAGIC = b"ACGR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")
_NODE = struct.Struct("<iidiiB")
_ENTRY = struct.Struct("<ddBI")
_CRC = struct.Struct("<I")


def serialize(graph: ContextGraph) -> bytes:
    """Versioned little-endian binary form with a trailing CRC32."""
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, len(graph))]
    for u in range(len(graph)):
        e = graph.entries[u]
        parts.append(_NODE.pack(
            graph.token[u], graph.parent[u], graph.arc_cost[u],
            graph.fail[u], graph.output[u], e is not None,
        ))
        if e is not None:
            surface = e.surface.encode("utf-8")
            parts.append(_ENTRY.pack(e.arc_cost, e.entry_cost, _PROVENANCE_CODES[e.provenance], len(surface)))
            parts.append(surface)
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def deserialize(data: bytes) -> ContextGraph:
    if len(data) < _HEADER.size + _CRC.size:
        raise FormatError("graph file too short")
    body, (crc,) = data[:-_CRC.size], _CRC.unpack(data[-_CRC.size:])
    if zlib.crc32(body) != crc:
        raise FormatError("graph checksum mismatch")
    magic, version, n = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"graph format version {version}, expected {FORMAT_VERSION}")
    if n < 1:
        raise FormatError("graph has no root record")

    token, parent, arc, fail, output = [], [], [], [], []
    entries: list[Optional[ContextEntry]] = []
    pos = _HEADER.size
    try:
        for u in range(n):
            t, p, a, f, o, flag = _NODE.unpack_from(body, pos)
            pos += _NODE.size
            if (p == NO_NODE) != (u == ROOT) or not (p < u and 0 <= f < max(u, 1) and -1 <= o < max(u, 1)):
                raise FormatError(f"node {u}: link out of range")
            token.append(t)
            parent.append(p)
            arc.append(a)
            fail.append(f)
            output.append(o)
            entry = None
            if flag:
                ea, ec, code, length = _ENTRY.unpack_from(body, pos)
                pos += _ENTRY.size
                if pos + length > len(body) or code >= len(_PROVENANCE_BY_CODE):
                    raise FormatError(f"node {u}: bad entry record")
                surface = body[pos:pos + length].decode("utf-8")
                pos += length
                entry = (ea, ec, _PROVENANCE_BY_CODE[code], surface)
            entries.append(entry)
    except struct.error as exc:
        raise FormatError(f"graph file truncated: {exc}") from exc
    if pos != len(body):
        raise FormatError(f"{len(body) - pos} trailing bytes after node records")

    built: list[Optional[ContextEntry]] = []
    for u, rec in enumerate(entries):
        if rec is None:
            built.append(None)
            continue
        ea, ec, prov, surface = rec
        toks = []
        v = u
        while v > ROOT:
            toks.append(token[v])
            v = parent[v]
        try:
            built.append(ContextEntry(tuple(reversed(toks)), ea, ec, prov, surface))
        except ValueError as exc:
            raise FormatError(f"node {u}: {exc}") from exc
    return ContextGraph(token, parent, arc, fail, output, built)
