import itertools
import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acbias.context_graph import ContextEntry, ContextGraph, Provenance
from acbias.decoder import (
    TIE_TOL,
    Candidate,
    EmissionMatrix,
    NBestList,
    beam_search_fuse,
    nbest_records,
    read_emissions,
    read_nbest,
    rescore_nbest,
    write_emissions,
)
from acbias.errors import ConfigError, FormatError

import oracles

BLANK, A, B = 0, 1, 2


def normalize(rows):
    rows = np.asarray(rows, dtype=float)
    return rows - np.logaddexp.reduce(rows, axis=1, keepdims=True)


def flip_matrix():
    """Two frames over {blank, a, b}; frame 1 keeps the relative scores a -0.6, b -0.9, blank -2.0."""
    rest = math.log((1 - math.exp(-0.1)) / 2)
    return EmissionMatrix(normalize([[-2.0, -0.6, -0.9], [-0.1, rest, rest]]))


def random_matrix(rng, T, V):
    return normalize([[rng.uniform(-4, 0) for _ in range(V)] for _ in range(T)])


def table(entries):
    return {e.tokens: e.entry_cost for e in entries}


def test_greedy_blank_row():
    em = EmissionMatrix(normalize([[-0.1, -3.0, -3.0]]))
    res = beam_search_fuse(em, beam=1)
    assert res.best.tokens == ()
    assert res.best.base_score == pytest.approx(em.logprobs[0, 0])


def test_fusion_flip_matches_enumeration():
    em = flip_matrix()
    base = beam_search_fuse(em, beam=8)
    assert base.best.tokens == (A,)

    entries = [ContextEntry.make((B,), 2.0)]
    fused = beam_search_fuse(em, ContextGraph.build(entries), beam=8, lam=1.0)
    assert fused.best.tokens == (B,)

    want_tokens, want_score, _ = oracles.exhaustive_decode(em.logprobs.tolist(), BLANK, table(entries), 1.0, TIE_TOL)
    assert fused.best.tokens == want_tokens
    assert fused.best.combined == pytest.approx(want_score, abs=1e-9)


def test_lambda_zero_equals_no_graph():
    rng = random.Random(3)
    for _ in range(20):
        em = EmissionMatrix(random_matrix(rng, 5, 4))
        g = ContextGraph.build([ContextEntry.make((rng.randrange(1, 4),), 2.0), ContextEntry.make((1, 2), 1.0)])
        with_g = beam_search_fuse(em, g, beam=4, lam=0.0, nbest=4)
        without = beam_search_fuse(em, None, beam=4, nbest=4)
        assert [h.tokens for h in with_g.nbest] == [h.tokens for h in without.nbest]


def test_combined_recomputable():
    em = flip_matrix()
    res = beam_search_fuse(em, ContextGraph.build([ContextEntry.make((B,), 2.0)]), lam=0.7, nbest=5)
    for h in res.nbest:
        assert h.combined == pytest.approx(h.base_score + 0.7 * h.ctx_score, abs=1e-9)


def test_nbest_sorted_and_best_first():
    rng = random.Random(5)
    em = EmissionMatrix(random_matrix(rng, 4, 3))
    res = beam_search_fuse(em, beam=None, nbest=6)
    assert res.nbest[0] == res.best
    scores = [h.combined for h in res.nbest[1:]]
    assert scores == sorted(scores, reverse=True)


def test_precondition_errors():
    em = flip_matrix()
    with pytest.raises(ConfigError):
        beam_search_fuse(em, beam=0)
    with pytest.raises(ConfigError):
        beam_search_fuse(em, lam=-1.0)


def test_emission_validation():
    with pytest.raises(FormatError):
        EmissionMatrix(np.zeros((2, 3)))  # rows sum to 3, not 1
    with pytest.raises(FormatError):
        EmissionMatrix(normalize([[0.0, 0.0]]), blank_id=2)
    with pytest.raises(FormatError):
        EmissionMatrix(normalize([[0.0, 0.0]]), frame_shift_s=0)
    with pytest.raises(FormatError):
        EmissionMatrix(np.zeros(3))


def test_emission_file_round_trip(tmp_path):
    em = EmissionMatrix(flip_matrix().logprobs, frame_shift_s=0.04)
    path = tmp_path / "u.emis"
    write_emissions(em, path)
    again = read_emissions(path)
    assert np.array_equal(again.logprobs, em.logprobs)
    assert again.frame_shift_s == 0.04
    assert again.duration_s == pytest.approx(0.08)


@pytest.mark.parametrize(
    "body",
    ["2 3 0 0.01\n-0.1 -3 -3\n", "1 3 0 0.01\n-0.1 -3\n", "1 3 0\n-0.1 -3 -3\n", "1 3 0 0.01\n-0.1 x -3\n"],
    ids=["frame-count", "row-size", "header", "bad-float"],
)
def test_malformed_emission_file(tmp_path, body):
    path = tmp_path / "bad.emis"
    path.write_text(body)
    with pytest.raises(FormatError):
        read_emissions(path, norm_tol=None)


# exhaustive oracle on tiny instances

cost_choices = st.sampled_from([0.5, 1.0, 1.5, 2.0])


@settings(max_examples=150, deadline=None)
@given(
    st.integers(1, 4),
    st.integers(2, 4),
    st.randoms(use_true_random=False),
    st.lists(st.tuples(st.lists(st.integers(1, 3), min_size=1, max_size=3), cost_choices), max_size=4),
    st.sampled_from([0.0, 0.5, 1.0]),
)
def test_unpruned_equals_exhaustive(T, V, rnd, raw, lam):
    em = EmissionMatrix(random_matrix(rnd, T, V))
    entries = [ContextEntry.make(tuple(t for t in toks if t < V) or (1,), c) for toks, c in raw]
    g = ContextGraph.build(entries)
    res = beam_search_fuse(em, g, beam=None, lam=lam)
    costs = {g.path(u): e.entry_cost for u, e in enumerate(g.entries) if e is not None}
    want, score, _ = oracles.exhaustive_decode(em.logprobs.tolist(), 0, costs, lam, TIE_TOL)
    assert res.best.tokens == want
    assert res.best.combined == pytest.approx(score, abs=1e-9)


def test_exact_tie_goes_to_smallest_tokens():
    em = EmissionMatrix(np.log(np.array([[1 / 3, 1 / 3, 1 / 3]])))
    assert beam_search_fuse(em, beam=None).best.tokens == ()
    g = ContextGraph.build([ContextEntry.make((1,), 1.0), ContextEntry.make((2,), 1.0)])
    assert beam_search_fuse(em, g, beam=None).best.tokens == (1,)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(2, 4), st.randoms(use_true_random=False), st.integers(1, 6))
def test_pruned_never_beats_unpruned(T, V, rnd, k):
    em = EmissionMatrix(random_matrix(rnd, T, V))
    g = ContextGraph.build([ContextEntry.make((1, V - 1), 1.5), ContextEntry.make((1,), 0.5)])
    full = beam_search_fuse(em, g, beam=None).best.combined
    for flag in (True, False):
        assert beam_search_fuse(em, g, beam=k, bias_in_pruning=flag).best.combined <= full + 1e-9


def test_wide_enough_beam_equals_unpruned():
    rng = random.Random(11)
    for _ in range(10):
        em = EmissionMatrix(random_matrix(rng, 3, 3))
        g = ContextGraph.build([ContextEntry.make((2,), 1.0)])
        assert beam_search_fuse(em, g, beam=27).best == beam_search_fuse(em, g, beam=None).best


def test_decode_deterministic():
    rng = random.Random(2)
    em = EmissionMatrix(random_matrix(rng, 12, 5))
    g = ContextGraph.build([ContextEntry.make((1, 2), 1.0), ContextEntry.make((3,), 0.5)])
    runs = {beam_search_fuse(em, g, beam=3, nbest=3).nbest.__repr__() for _ in range(3)}
    assert len(runs) == 1


# n-best rescoring


@pytest.fixture
def ab_keyword_graph():
    # word_vocab ids: a=0, b=1, c=2
    return ContextGraph.build([ContextEntry.make((0, 1), 1.5, Provenance.KEYWORD_OUT_LM, "a b")])


def two_candidates():
    return NBestList("u1", (Candidate(-1.0, words=("c", "a")), Candidate(-1.2, words=("a", "b"))))


def test_rescore_flip(ab_keyword_graph, word_vocab):
    out = rescore_nbest(two_candidates(), ab_keyword_graph, 1.0, word_vocab)
    assert out.candidates[0].words == ("a", "b")
    assert out.candidates[0].score == pytest.approx(-1.2 + 3.0)
    assert out.candidates[1].score == pytest.approx(-1.0)
    # matches enumeration of the two candidate sequences
    costs = {(0, 1): 3.0}
    brute = max(two_candidates().candidates, key=lambda c: c.base_score + oracles.occurrence_score(costs, word_vocab.segment_phrase(c.words)))
    assert brute.words == out.candidates[0].words


def test_rescore_lambda_zero_keeps_order(ab_keyword_graph, word_vocab):
    out = rescore_nbest(two_candidates(), ab_keyword_graph, 0.0, word_vocab)
    assert [c.words for c in out.candidates] == [("c", "a"), ("a", "b")]


def test_rescore_single_candidate(ab_keyword_graph):
    nb = NBestList("u", (Candidate(-2.0, tokens=(0, 1)),))
    out = rescore_nbest(nb, ab_keyword_graph, 1.0)
    assert len(out.candidates) == 1
    assert out.candidates[0].score == pytest.approx(1.0)


def test_rescore_with_word_lm(f1):
    nb = NBestList("u", (Candidate(-1.0, words=("a", "c")), Candidate(-1.1, words=("a", "b"))))
    out = rescore_nbest(nb, f1, 1.0)
    assert out.metadata["log10_to_ln"] == pytest.approx(math.log(10))
    top = out.candidates[0]
    assert top.words == ("a", "b")
    assert top.context_score == pytest.approx(-0.903090 * math.log(10))


def test_rescore_config_errors(f1, ab_keyword_graph):
    with pytest.raises(ConfigError):
        rescore_nbest(NBestList("u", (Candidate(0.0, tokens=(0,)),)), f1, 1.0)
    with pytest.raises(ConfigError):
        rescore_nbest(two_candidates(), ab_keyword_graph, 1.0)


def test_rescore_is_stable_on_ties(ab_keyword_graph):
    nb = NBestList("u", tuple(Candidate(-1.0, tokens=(2, i)) for i in range(3, 8)))
    out = rescore_nbest(nb, ab_keyword_graph, 1.0)
    assert [c.tokens for c in out.candidates] == [c.tokens for c in nb.candidates]


def test_nbest_validation():
    with pytest.raises(FormatError):
        NBestList("u", ())
    with pytest.raises(FormatError):
        Candidate(float("nan"), tokens=(1,))
    with pytest.raises(FormatError):
        Candidate(0.0)


def test_nbest_file_round_trip(tmp_path, ab_keyword_graph, word_vocab):
    path = tmp_path / "nb.jsonl"
    path.write_text(
        "\n".join(
            json.dumps(r)
            for r in [
                {"utt_id": "u1", "base_score": -1.0, "text": "c a"},
                {"utt_id": "u1", "base_score": -1.2, "text": "a b"},
                {"utt_id": "u2", "base_score": -0.5, "tokens": [2]},
            ]
        )
        + "\n"
    )
    lists = read_nbest(path)
    assert [nb.utt_id for nb in lists] == ["u1", "u2"]
    recs = list(nbest_records(rescore_nbest(nb, ab_keyword_graph, 1.0, word_vocab) for nb in lists))
    assert [(r["utt_id"], r["rank"]) for r in recs] == [("u1", 0), ("u1", 1), ("u2", 0)]
    assert recs[0]["text"] == "a b"


def test_nbest_file_errors(tmp_path):
    path = tmp_path / "nb.jsonl"
    path.write_text('{"utt_id": "u"}\n')
    with pytest.raises(FormatError):
        read_nbest(path)


def test_flip_enumeration_is_complete():
    """Sanity for the oracle itself: every label sequence of the flip matrix is scored."""
    em = flip_matrix()
    _, _, scored = oracles.exhaustive_decode(em.logprobs.tolist(), BLANK, {(B,): 2.0}, 1.0, TIE_TOL)
    expected = {tuple(v for v in p if v) for p in itertools.product(range(3), repeat=2)}
    assert set(scored) == expected
