"""Throughput of ``ContextGraph.advance`` across graph sizes.

    python3 scripts/bench_matcher.py --sizes 0 100 1000 10000 --stream-len 200000
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

from acbias.bench import run_bench


@dataclass
class BenchConfig:
    sizes: list[int] = field(default_factory=lambda: [0, 100, 1000, 10_000])
    stream_len: int = 200_000
    alphabet: int = 1000
    max_len: int = 6
    repeats: int = 5
    seed: int = 0


def main() -> int:
    d = BenchConfig()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=d.sizes)
    ap.add_argument("--stream-len", type=int, default=d.stream_len)
    ap.add_argument("--alphabet", type=int, default=d.alphabet)
    ap.add_argument("--max-len", type=int, default=d.max_len)
    ap.add_argument("--repeats", type=int, default=d.repeats)
    ap.add_argument("--seed", type=int, default=d.seed)
    cfg = BenchConfig(**vars(ap.parse_args()))
    report = run_bench(cfg.sizes, cfg.stream_len, cfg.alphabet, cfg.max_len, cfg.seed, cfg.repeats)
    print(report.to_text(), end="")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
