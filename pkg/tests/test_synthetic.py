import math

import numpy as np

from acbias.arpa import parse_arpa, to_arpa
from acbias.bench import random_entries, random_stream, run_bench
from acbias.synthetic import estimate_bigram, make_world


def test_bigram_distributions_normalize():
    lm = estimate_bigram([("x", "y", "z"), ("x", "z"), ("y", "y")])
    words = [w for (w,) in lm.ngrams(1) if w != "<s>"]
    for h in ["<s>", "x", "y", "z"]:
        mass = sum(10 ** lm.sequence_logprob((h, w)) / 10 ** lm.sequence_logprob((h,)) for w in words)
        assert math.isclose(mass, 1.0, abs_tol=1e-9), (h, mass)


def test_bigram_round_trips_through_arpa():
    lm = estimate_bigram([("x", "y"), ("y", "x", "x")])
    assert parse_arpa(to_arpa(lm)).tables == lm.tables


def test_world_is_seeded():
    a, b = make_world(4, n_test=5), make_world(4, n_test=5)
    assert a.refs == b.refs
    assert all(np.array_equal(x.logprobs, y.logprobs) for x, y in zip(a.emissions, b.emissions))
    assert make_world(5, n_test=5).refs != a.refs


def test_world_emissions_are_distributions():
    w = make_world(0, n_test=10)
    for em in w.emissions:
        assert np.allclose(np.logaddexp.reduce(em.logprobs, axis=1), 0.0)
        assert em.blank_id == w.blank_id


def test_bench_helpers():
    pool = random_entries(50, 20, 4, seed=0)
    assert len(pool) == 50 and all(1 <= len(e.tokens) <= 4 for e in pool)
    stream = random_stream(pool, 500, 20, seed=1)
    assert len(stream) == 500 and max(stream) < 20
    rep = run_bench(sizes=(0, 10, 50), stream_len=500, alphabet=20, repeats=1, min_throughput=1)
    assert [r.entries for r in rep.rows] == [0, 10, 50]
    assert rep.degradation > 0
