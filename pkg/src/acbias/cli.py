"""Command-line entry point: ``acbias <subcommand> ...``.

Knob precedence is command-line flag, then ``--config`` JSON file, then the
built-in defaults. Exit codes: 0 success, 2 configuration error, 3 malformed
input, 4 runtime error, 5 benchmark below its thresholds.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Optional, Sequence

from . import bench, synthetic
from .arpa import load_arpa
from .context_graph import ContextGraph, deserialize
from .decoder import beam_search_fuse, nbest_records, read_emissions, read_nbest, rescore_nbest
from .errors import AcbiasError, ConfigError
from .evaluation import evaluate, pair_transcripts, read_transcripts
from .graph_builder import BiasingConfig, keyword_entries, lm_entries, merge, read_keywords
from .subword import MARKER, SubwordVocab, load_vocab, read_lexicon

logger = logging.getLogger("acbias")

EXIT_BENCH_FAILED = 5


@dataclass
class RunConfig:
    alpha_in_lm: float = 0.5
    alpha_out_lm: float = 1.5
    exp_base: float = math.e
    lam: float = 1.0
    beam: int = 8
    lm_min_order: int = 1
    lm_max_order: Optional[int] = None
    frame_shift_s: Optional[float] = None  # None: use the emission file header
    divide_by_pieces: bool = False
    bias_in_pruning: bool = True
    marker: str = MARKER
    jobs: int = 1
    seed: int = 0

    def biasing(self) -> BiasingConfig:
        return BiasingConfig(
            alpha_in_lm=self.alpha_in_lm,
            alpha_out_lm=self.alpha_out_lm,
            exp_base=self.exp_base,
            lm_min_order=self.lm_min_order,
            lm_max_order=self.lm_max_order,
            divide_by_pieces=self.divide_by_pieces,
        )


_KNOBS = {f.name for f in fields(RunConfig)}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags over the optional JSON config file over defaults."""
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        path = _existing(args.config)
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        unknown = set(loaded) - _KNOBS
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        for key, value in loaded.items():
            _check_type(path, key, value)
        values.update(loaded)
    for name in _KNOBS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    cfg = RunConfig(**values)
    if cfg.beam < 1 or cfg.jobs < 1:
        raise ConfigError("beam and jobs must be >= 1")
    if cfg.lam < 0:
        raise ConfigError("lambda must be >= 0")
    cfg.biasing()  # validates the biasing knobs
    return cfg


_TYPES = {"alpha_in_lm": float, "alpha_out_lm": float, "exp_base": float, "lam": float, "frame_shift_s": float,
          "beam": int, "lm_min_order": int, "lm_max_order": int, "jobs": int, "seed": int,
          "divide_by_pieces": bool, "bias_in_pruning": bool, "marker": str}


def _check_type(path: Path, key: str, value: Any) -> None:
    want = _TYPES[key]
    if value is None and key in ("lm_max_order", "frame_shift_s"):
        return
    ok = isinstance(value, want) and not (want is not bool and isinstance(value, bool))
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        ok = True
    if not ok:
        raise ConfigError(f"{path}: {key} must be {want.__name__}, got {value!r}")


def _existing(path: Optional[str], what: str = "input") -> Path:
    if path is None:
        raise ConfigError(f"missing {what} path")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _vocab(args: argparse.Namespace, cfg: RunConfig, required: bool = True) -> Optional[SubwordVocab]:
    if args.vocab is None:
        if required:
            raise ConfigError("--vocab is required")
        return None
    lexicon = read_lexicon(_existing(args.lexicon, "lexicon")) if getattr(args, "lexicon", None) else None
    return load_vocab(_existing(args.vocab, "vocab"), marker=cfg.marker, lexicon=lexicon)


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# subcommands


def cmd_build_graph(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.arpa is None and args.keywords is None:
        raise ConfigError("build-graph needs --arpa, --keywords or both")
    model = load_arpa(_existing(args.arpa, "ARPA file")) if args.arpa else None
    keywords = read_keywords(_existing(args.keywords, "keyword list")) if args.keywords else None
    vocab = _vocab(args, cfg)
    bias = cfg.biasing()
    lm = lm_entries(model, vocab, bias) if model is not None else []
    kw = keyword_entries(keywords, model, vocab, bias) if keywords is not None else []
    entries = merge(lm, kw)
    graph = ContextGraph.build(entries)
    Path(args.output).write_bytes(graph.serialize())
    by_source: dict[str, int] = {}
    for e in entries:
        by_source[e.provenance.value] = by_source.get(e.provenance.value, 0) + 1
    summary = {"entries": len(entries), "nodes": len(graph), "by_provenance": dict(sorted(by_source.items()))}
    print(json.dumps(summary, sort_keys=True))
    return 0


def _load_graph(path: Optional[str]) -> Optional[ContextGraph]:
    if path is None:
        return None
    return deserialize(_existing(path, "graph file").read_bytes())


def cmd_score(args: argparse.Namespace, cfg: RunConfig) -> int:
    graph = _load_graph(args.graph)
    if graph is None:
        raise ConfigError("score needs --graph")
    if args.tokens is not None:
        tokens = [int(t) for t in args.tokens.split()]
    elif args.text is not None:
        tokens = _vocab(args, cfg).segment_phrase(args.text.split())
    else:
        raise ConfigError("score needs --tokens or --text")
    deltas, closing = graph.trace(tokens)
    out = {
        "tokens": tokens,
        "deltas": deltas,
        "finalize": closing,
        "total": sum(deltas) + closing,
    }
    print(json.dumps(out))
    return 0


def _decode_one(job: tuple) -> tuple[str, tuple[int, ...], float, float, float]:
    utt, path, graph, beam, lam, bias_in_pruning, frame_shift = job
    em = read_emissions(path)
    if frame_shift is not None:
        em = type(em)(em.logprobs, em.blank_id, frame_shift)
    t0 = time.perf_counter()
    res = beam_search_fuse(em, graph, beam=beam, lam=lam, bias_in_pruning=bias_in_pruning)
    wall = time.perf_counter() - t0
    return utt, res.best.tokens, res.best.combined, em.duration_s, wall


def cmd_decode(args: argparse.Namespace, cfg: RunConfig) -> int:
    src = _existing(args.emissions, "emissions")
    files = sorted(src.glob("*.emis")) if src.is_dir() else [src]
    if not files:
        raise ConfigError(f"no *.emis files in {src}")
    graph = _load_graph(args.graph)
    vocab = _vocab(args, cfg, required=False)
    jobs = [(f.stem, f, graph, cfg.beam, cfg.lam, cfg.bias_in_pruning, cfg.frame_shift_s) for f in files]

    t0 = time.perf_counter()
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_decode_one, jobs))
    else:
        results = [_decode_one(j) for j in jobs]
    total_wall = time.perf_counter() - t0

    results.sort(key=lambda r: r[0])
    lines = []
    for utt, tokens, _, _, _ in results:
        text = " ".join(vocab.decode_ids(tokens)) if vocab else " ".join(map(str, tokens))
        lines.append(f"{utt}\t{text}\n")
    _write(args.output, "".join(lines))

    audio = sum(r[3] for r in results)
    decode_s = sum(r[4] for r in results)
    timing = {
        "audio_seconds": audio,
        "decode_seconds": decode_s,
        "wall_seconds": total_wall,
        "rtfx": audio / decode_s if decode_s > 0 else None,
        "utterances": [
            {"utt_id": u, "audio_seconds": a, "decode_seconds": w, "rtfx": a / w if w > 0 else None}
            for u, _, _, a, w in results
        ],
    }
    if args.timing:
        Path(args.timing).write_text(json.dumps(timing, indent=1) + "\n", encoding="utf-8")
    logger.info("decoded %d utterances, %.2f s audio, RTFX %.1f", len(results), audio, timing["rtfx"] or 0.0)
    return 0


def cmd_rescore(args: argparse.Namespace, cfg: RunConfig) -> int:
    lists = read_nbest(_existing(args.nbest_file, "n-best file"))
    if (args.graph is None) == (args.arpa is None):
        raise ConfigError("rescore needs exactly one of --graph or --arpa")
    scorer = _load_graph(args.graph) if args.graph else load_arpa(_existing(args.arpa, "ARPA file"))
    vocab = _vocab(args, cfg, required=False)
    rescored = [rescore_nbest(nb, scorer, cfg.lam, vocab) for nb in lists]
    _write(args.output, "".join(json.dumps(rec) + "\n" for rec in nbest_records(rescored)))
    return 0


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    refs_by_id = read_transcripts(_existing(args.refs, "references"))
    hyps_by_id = read_transcripts(_existing(args.hyps, "hypotheses"))
    refs, hyps = pair_transcripts(refs_by_id, hyps_by_id)
    entities = read_keywords(_existing(args.entities, "entity list")) if args.entities else None
    known = None
    if args.known_vocab:
        known = read_keywords(_existing(args.known_vocab, "known vocabulary"))
        known = {w for line in known for w in line}
    elif args.arpa:
        known = set(load_arpa(_existing(args.arpa, "ARPA file")).vocab)
    audio = decode_s = None
    if args.timing:
        timing = json.loads(_existing(args.timing, "timing file").read_text(encoding="utf-8"))
        audio, decode_s = timing["audio_seconds"], timing["decode_seconds"]
    report = evaluate(refs, hyps, entities, known, audio, decode_s)
    _write(args.output, report.to_text())
    return 0


def cmd_bench(args: argparse.Namespace, cfg: RunConfig) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    report = bench.run_bench(
        sizes=sizes,
        stream_len=args.stream_len,
        seed=cfg.seed,
        repeats=args.repeats,
        min_throughput=args.min_throughput,
        max_degradation=args.max_degradation,
    )
    _write(args.output, report.to_text())
    return 0 if report.passed else EXIT_BENCH_FAILED


def cmd_demo(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.workdir:
        synthetic.write_world(synthetic.make_world(cfg.seed), args.workdir)
        print(f"wrote synthetic corpus to {args.workdir}")
    results = synthetic.run_demo(cfg.seed, beam=cfg.beam, cfg=cfg.biasing())
    print(f"{'graph':<10} {'WER':>8} {'NE-acc':>8}")
    for name, r in results.items():
        print(f"{name:<10} {r['wer']:>8.4f} {r['ne_accuracy']:>8.3f}")
    better = results["combined"]["wer"] < results["keywords"]["wer"]
    print(f"combined LM+keywords beats keywords-only on WER: {'yes' if better else 'no'}")
    return 0


# argument parsing


def _add_knobs(p: argparse.ArgumentParser, *groups: str) -> None:
    if "bias" in groups:
        p.add_argument("--alpha-in-lm", dest="alpha_in_lm", type=float, help="bias added to in-LM keywords (default 0.5)")
        p.add_argument("--alpha-out-lm", dest="alpha_out_lm", type=float, help="cost of keywords absent from the LM (default 1.5)")
        p.add_argument("--exp-base", dest="exp_base", type=float, help="base applied to log10 LM weights (default e)")
        p.add_argument("--lm-min-order", dest="lm_min_order", type=int)
        p.add_argument("--lm-max-order", dest="lm_max_order", type=int)
        p.add_argument("--divide-by-pieces", dest="divide_by_pieces", action="store_const", const=True,
                       help="split each entry's cost across its subword arcs")
    if "vocab" in groups:
        p.add_argument("--vocab", help="subword vocabulary, one piece per line")
        p.add_argument("--lexicon", help="word<TAB>pieces overrides for segmentation")
        p.add_argument("--marker", help=f"word-start marker glyph (default {MARKER!r})")
    if "search" in groups:
        p.add_argument("--beam", type=int, help="beam width (default 8)")
        p.add_argument("--lambda", dest="lam", type=float, help="context score scale (default 1.0)")
        p.add_argument("--no-bias-in-pruning", dest="bias_in_pruning", action="store_const", const=False,
                       help="prune on completed-match credit only")
        p.add_argument("--frame-shift", dest="frame_shift_s", type=float, help="override seconds per frame")
        p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--config", help="JSON file of knob defaults")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acbias", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="build a context graph from an ARPA LM and/or keyword list")
    p.add_argument("--arpa", help="word-level ARPA LM")
    p.add_argument("--keywords", help="bias phrases, one per line")
    p.add_argument("--output", "-o", required=True, help="graph file to write")
    _add_knobs(p, "bias", "vocab")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("score", help="per-token bias deltas of a token or word sequence")
    p.add_argument("--graph", required=True)
    p.add_argument("--tokens", help="space-separated token ids")
    p.add_argument("--text", help="space-separated words (needs --vocab)")
    _add_knobs(p, "vocab")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("decode", help="beam search over emission matrices with optional context fusion")
    p.add_argument("--emissions", required=True, help="*.emis file or directory of them")
    p.add_argument("--graph", help="context graph file")
    p.add_argument("--output", "-o", help="hypothesis file (utt_id<TAB>text); stdout if omitted")
    p.add_argument("--timing", help="write timing/RTFX JSON here")
    _add_knobs(p, "search", "vocab")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("rescore", help="rerank n-best lists with a context graph or word LM")
    p.add_argument("--nbest", dest="nbest_file", required=True, help="JSON-lines n-best file")
    p.add_argument("--graph")
    p.add_argument("--arpa")
    p.add_argument("--output", "-o")
    p.add_argument("--lambda", dest="lam", type=float)
    _add_knobs(p, "vocab")
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("evaluate", help="WER, NE accuracy, NE-WER, OOV accuracy and RTFX")
    p.add_argument("--refs", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--entities", help="entity phrases, one per line")
    p.add_argument("--known-vocab", help="words known to the model, whitespace-separated")
    p.add_argument("--arpa", help="take the known vocabulary from this LM")
    p.add_argument("--timing", help="timing JSON written by decode")
    p.add_argument("--output", "-o")
    _add_knobs(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="advance() throughput across graph sizes")
    p.add_argument("--sizes", default="0,100,1000,10000")
    p.add_argument("--stream-len", type=int, default=200_000)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--min-throughput", type=float, default=1e6, help="tokens/s required on the largest graph")
    p.add_argument("--max-degradation", type=float, default=2.0, help="allowed smallest/largest throughput ratio")
    p.add_argument("--output", "-o")
    _add_knobs(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("demo", help="synthetic end-to-end comparison of graph variants")
    p.add_argument("--workdir", help="also write the synthetic corpus as CLI input files")
    _add_knobs(p, "bias")
    p.add_argument("--beam", type=int)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=os.environ.get("ACBIAS_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except AcbiasError as exc:
        print(f"acbias {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"acbias {args.command}: {exc}", file=sys.stderr)
        return AcbiasError.exit_code


if __name__ == "__main__":
    sys.exit(main())
