"""Aho-Corasick contextual biasing with word n-gram LMs and keyword lists."""

from .arpa import ArpaModel, load_arpa, parse_arpa, to_arpa
from .context_graph import ROOT_STATE, ContextEntry, ContextGraph, MatchState, Provenance
from .decoder import EmissionMatrix, Hypothesis, NBestList, beam_search_fuse, rescore_nbest
from .evaluation import EvalReport, evaluate, wer
from .graph_builder import BiasingConfig, build_context_graph, keyword_entries, lm_entries, merge
from .subword import SubwordVocab, load_vocab

__all__ = [
    "ArpaModel", "BiasingConfig", "ContextEntry", "ContextGraph", "EmissionMatrix", "EvalReport",
    "Hypothesis", "MatchState", "NBestList", "Provenance", "ROOT_STATE", "SubwordVocab",
    "beam_search_fuse", "build_context_graph", "evaluate", "keyword_entries", "lm_entries",
    "load_arpa", "load_vocab", "merge", "parse_arpa", "rescore_nbest", "to_arpa", "wer",
]
