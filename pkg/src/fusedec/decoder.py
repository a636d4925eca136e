"""Beam decoding over scorer outputs, with optional word-lattice fusion.

A word-level language model can enter the search three ways: rescoring an
n-best list after a plain beam search, adding lattice prefix costs inside
the search, or both at once.  Lattice costs come from the composed
lexicon-grammar machine; the scorer supplies the per-step distributions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fst import (
    FstError,
    SymbolTable,
    WeightedFst,
    _eps_closure,
    compose,
    linear_fst,
    relabel,
    shortest_paths,
)
from .scorer import (
    EOS,
    TableScorer,
    ToyLasModel,
    Utterance,
    coverage_count,
    step_distributions,
)

FUSION_MODES = ("none", "nbest", "beam", "both")
EOW_MODES = ("required", "optional")
SPACE = "<space>"

# Paths requested per hypothesis when recovering word sequences; generous
# headroom over nbest_size so homophone fan-out is not cut off early.
_WORD_PATHS_PER_HYP = 64


class DecodeError(ValueError):
    """Raised for an invalid decoding configuration or incompatible inputs."""


@dataclass(frozen=True)
class DecodeConfig:
    """Knobs for one decoding run.

    ``lm_weight`` scales lattice costs inside the search (fusion beam/both),
    ``lm_weight_nbest`` scales them during rescoring (fusion nbest/both) and
    must be set exactly for those strategies.  ``coverage_weight`` rewards
    attended encoder frames and only makes sense when the search itself is
    fused.  ``max_steps`` caps the token length of a hypothesis, the final
    <eos> not counted.
    """

    beam_width: int = 8
    max_steps: int = 64
    fusion: str = "none"
    lm_weight: float = 0.0
    lm_weight_nbest: float | None = None
    coverage_weight: float = 0.0
    coverage_threshold: float = 0.5
    eow_mode: str = "required"
    nbest_size: int = 8

    def __post_init__(self):
        if self.fusion not in FUSION_MODES:
            raise DecodeError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")
        if self.eow_mode not in EOW_MODES:
            raise DecodeError(f"eow_mode must be one of {EOW_MODES}, got {self.eow_mode!r}")
        for name in ("beam_width", "max_steps", "nbest_size"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise DecodeError(f"{name} must be a positive integer, got {v!r}")
        for name in ("lm_weight", "coverage_weight", "coverage_threshold"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DecodeError(f"{name} must be finite, got {v!r}")
        if self.lm_weight < 0 or self.coverage_weight < 0:
            raise DecodeError("weights must be non-negative")
        rescored = self.fusion in ("nbest", "both")
        if rescored:
            if self.lm_weight_nbest is None:
                raise DecodeError(f"fusion {self.fusion!r} requires lm_weight_nbest")
            if not math.isfinite(self.lm_weight_nbest) or self.lm_weight_nbest < 0:
                raise DecodeError(
                    f"lm_weight_nbest must be finite and non-negative, got {self.lm_weight_nbest!r}"
                )
        elif self.lm_weight_nbest is not None:
            raise DecodeError(f"lm_weight_nbest has no effect with fusion {self.fusion!r}")
        if self.fusion in ("none", "nbest") and self.lm_weight != 0.0:
            raise DecodeError(f"lm_weight has no effect with fusion {self.fusion!r}")
        if self.fusion in ("none", "nbest") and self.coverage_weight != 0.0:
            raise DecodeError("coverage_weight applies only when the search is fused")


@dataclass(frozen=True)
class Hypothesis:
    """One token-level hypothesis.

    ``tokens`` excludes the terminating <eos>, but ``model_score`` (sum of
    natural-log probabilities) includes the <eos> step once finished.
    ``lm_cost`` is the lattice cost: for a finished hypothesis the best
    accepting-path weight, for a live one the best prefix weight.
    """

    tokens: tuple[int, ...]
    model_score: float
    lm_cost: float
    coverage: int
    total_cost: float
    finished: bool
    lm_state: tuple[tuple[int, float], ...] | None = field(default=None, repr=False)


@dataclass(frozen=True)
class NBestList:
    """Ranked token hypotheses; ``complete`` is False when nothing finished
    and the entries are the best live prefixes instead."""

    entries: tuple[Hypothesis, ...]
    complete: bool


@dataclass(frozen=True)
class WordHypothesis:
    """A word sequence with the components of its combined cost."""

    words: tuple[str, ...]
    total_cost: float
    model_score: float
    lm_cost: float
    coverage: int
    source_tokens: tuple[int, ...]


@dataclass(frozen=True)
class RescoreResult:
    hypotheses: tuple[WordHypothesis, ...]
    unparsed: int


class FusionGraph:
    """The lexicon-grammar machine, relabeled to a scorer's token ids.

    Decoding tracks weighted state sets closed under input epsilons, so
    backoff and word-boundary arcs never block a token transition.
    """

    def __init__(self, lg: WeightedFst, alphabet: SymbolTable):
        emittable = {alphabet.sym(i) for i in range(1, len(alphabet))}
        used = {lg.isyms.sym(a.ilabel) for a in lg.arcs if a.ilabel != 0}
        if not used & emittable:
            raise DecodeError("the fusion graph consumes no symbol the scorer can emit")
        try:
            self.fst = relabel(lg, isyms=alphabet)
        except FstError as e:
            raise DecodeError(f"fusion graph incompatible with the scorer alphabet: {e}") from e
        self.alphabet = alphabet
        self.start = _freeze(_eps_closure(self.fst, {self.fst.start: 0.0}))

    def advance(
        self, states: tuple[tuple[int, float], ...], label: int
    ) -> tuple[tuple[int, float], ...] | None:
        """Consume one token; None when no state survives."""
        seeds: dict[int, float] = {}
        for q, w in states:
            for arc in self.fst.arcs_from(q):
                if arc.ilabel != label:
                    continue
                cand = w + arc.weight
                if cand < seeds.get(arc.dst, math.inf):
                    seeds[arc.dst] = cand
        if not seeds:
            return None
        return _freeze(_eps_closure(self.fst, seeds))

    def best(self, states: tuple[tuple[int, float], ...]) -> float:
        return min(w for _, w in states)

    def final_best(self, states: tuple[tuple[int, float], ...]) -> float | None:
        """Best cost of stopping here, final weights included; None if the
        set contains no final state."""
        best = math.inf
        for q, w in states:
            best = min(best, w + self.fst.final(q))
        return None if math.isinf(best) else best


def _freeze(dist: dict[int, float]) -> tuple[tuple[int, float], ...]:
    return tuple(sorted(dist.items()))


class DecodeResources:
    """Lexicon and grammar prepared for decoding.

    Composes L with G once up front (words relabeled into the grammar's
    vocabulary) and caches one relabeled graph per scorer alphabet.
    """

    def __init__(
        self,
        lexicon_fst: WeightedFst | None = None,
        lm_fst: WeightedFst | None = None,
    ):
        if (lexicon_fst is None) != (lm_fst is None):
            raise DecodeError("lexicon and language model must be provided together")
        self.lexicon_fst = lexicon_fst
        self.lm_fst = lm_fst
        self.lg: WeightedFst | None = None
        if lexicon_fst is not None and lm_fst is not None:
            try:
                self.lg = compose(relabel(lexicon_fst, osyms=lm_fst.isyms), lm_fst)
            except FstError as e:
                raise DecodeError(
                    f"lexicon does not match the language model vocabulary: {e}"
                ) from e
        self._graphs: dict[SymbolTable, FusionGraph] = {}

    def graph_for(self, alphabet: SymbolTable) -> FusionGraph:
        if self.lg is None:
            raise DecodeError("fusion requires both a lexicon and a language model")
        graph = self._graphs.get(alphabet)
        if graph is None:
            graph = FusionGraph(self.lg, alphabet)
            self._graphs[alphabet] = graph
        return graph


def _token_limit(scorer, utt: Utterance) -> int:
    """Longest token string (<eos> excluded) the scorer can grade."""
    if isinstance(scorer, TableScorer):
        return scorer.max_prefix(utt) - 1
    if isinstance(scorer, ToyLasModel):
        return scorer.max_prefix
    raise DecodeError(f"unsupported scorer type {type(scorer).__name__}")


def _hyp_key(h: Hypothesis) -> tuple[float, tuple[int, ...]]:
    return (h.total_cost, h.tokens)


def _expand(scorer, utt: Utterance, config: DecodeConfig, graph: FusionGraph | None) -> NBestList:
    """Shared beam core; ``graph`` None gives the plain model-score search."""
    alphabet = scorer.alphabet
    try:
        eos = alphabet.id(EOS)
    except FstError as e:
        raise DecodeError(f"scorer alphabet lacks {EOS}: {e}") from e
    lam = config.lm_weight if graph is not None else 0.0
    eta = config.coverage_weight
    steps = min(config.max_steps, _token_limit(scorer, utt))
    start_state = graph.start if graph is not None else None
    start_cost = graph.best(start_state) if graph is not None else 0.0
    live = [Hypothesis((), 0.0, start_cost, 0, lam * start_cost, False, start_state)]
    finished: list[Hypothesis] = []
    for depth in range(steps + 1):
        extend = depth < steps
        candidates: list[Hypothesis] = []
        for hyp in live:
            dist = step_distributions(scorer, utt, hyp.tokens)
            cov = (
                coverage_count(scorer, utt, (*hyp.tokens, eos), config.coverage_threshold)
                if eta > 0.0
                else 0
            )
            for tid in np.flatnonzero(dist > 0.0):
                tid = int(tid)
                score = hyp.model_score + math.log(dist[tid])
                if tid == eos:
                    if graph is not None:
                        stop = graph.final_best(hyp.lm_state)
                        if stop is None:
                            continue
                    else:
                        stop = 0.0
                    total = -score + lam * stop - eta * cov
                    finished.append(Hypothesis(hyp.tokens, score, stop, cov, total, True))
                elif extend:
                    if graph is not None:
                        nxt = graph.advance(hyp.lm_state, tid)
                        if nxt is None:
                            continue
                        ahead = graph.best(nxt)
                    else:
                        nxt, ahead = None, 0.0
                    total = -score + lam * ahead - eta * cov
                    candidates.append(
                        Hypothesis((*hyp.tokens, tid), score, ahead, cov, total, False, nxt)
                    )
        if not extend or not candidates:
            break
        candidates.sort(key=_hyp_key)
        live = candidates[: config.beam_width]
    finished.sort(key=_hyp_key)
    if finished:
        return NBestList(tuple(finished[: config.nbest_size]), True)
    live = sorted(live, key=_hyp_key)
    return NBestList(tuple(live[: config.nbest_size]), False)


def beam_search(scorer, utt: Utterance, config: DecodeConfig) -> NBestList:
    """Plain beam search over scorer distributions, no lattice involved."""
    if config.fusion in ("beam", "both"):
        raise DecodeError(f"beam_search does not fuse; got fusion {config.fusion!r}")
    return _expand(scorer, utt, config, None)


def fused_beam_search(
    scorer, lg: WeightedFst | FusionGraph, utt: Utterance, config: DecodeConfig
) -> NBestList:
    """Beam search with lattice prefix costs folded into the ranking.

    Hypotheses whose token prefix leaves the lattice are pruned, and <eos>
    is only allowed where the state set can stop.
    """
    if config.fusion not in ("beam", "both"):
        raise DecodeError(f"fused_beam_search requires fusion beam or both, got {config.fusion!r}")
    graph = lg if isinstance(lg, FusionGraph) else FusionGraph(lg, scorer.alphabet)
    return _expand(scorer, utt, config, graph)


def _word_paths(tokens: tuple[int, ...], graph: FusionGraph, n: int):
    """Accepting word paths for one token string, cheapest first."""
    chain = linear_fst(tokens, graph.fst.isyms)
    return shortest_paths(compose(chain, graph.fst), n)


def nbest_rescore(
    nbest: NBestList,
    graph: FusionGraph,
    lm_weight: float,
    *,
    nbest_size: int = 8,
    coverage_weight: float = 0.0,
) -> RescoreResult:
    """Turn token hypotheses into ranked word hypotheses.

    Every distinct word path of a hypothesis competes separately, each with
    its own lattice cost, so homophones are resolved by the combined cost
    rather than collapsed before ranking.  Hypotheses with no accepting path
    are dropped and counted.
    """
    pool: list[WordHypothesis] = []
    unparsed = 0
    for entry in nbest.entries:
        paths = _word_paths(entry.tokens, graph, _WORD_PATHS_PER_HYP)
        if not paths:
            unparsed += 1
            continue
        seen: set[tuple[int, ...]] = set()
        for p in paths:
            if p.olabels in seen:
                continue
            seen.add(p.olabels)
            total = -entry.model_score + lm_weight * p.weight - coverage_weight * entry.coverage
            pool.append(
                WordHypothesis(
                    words=graph.fst.osyms.decode(p.olabels),
                    total_cost=total,
                    model_score=entry.model_score,
                    lm_cost=p.weight,
                    coverage=entry.coverage,
                    source_tokens=entry.tokens,
                )
            )
    pool.sort(key=lambda h: (h.total_cost, h.words, h.source_tokens))
    return RescoreResult(tuple(pool[:nbest_size]), unparsed)


def _split_graphemes(entry: Hypothesis, alphabet: SymbolTable) -> WordHypothesis:
    """Words from a grapheme token string, split at <space>."""
    space = alphabet.id(SPACE)
    words: list[str] = []
    piece: list[str] = []
    for tid in entry.tokens:
        if tid == space:
            if piece:
                words.append("".join(piece))
            piece = []
        else:
            piece.append(alphabet.sym(tid))
    if piece:
        words.append("".join(piece))
    return WordHypothesis(
        words=tuple(words),
        total_cost=entry.total_cost,
        model_score=entry.model_score,
        lm_cost=0.0,
        coverage=entry.coverage,
        source_tokens=entry.tokens,
    )


def _best_words(entry: Hypothesis, graph: FusionGraph) -> WordHypothesis | None:
    """The cheapest word path for one fused hypothesis; None if none accepts."""
    paths = _word_paths(entry.tokens, graph, 1)
    if not paths:
        return None
    return WordHypothesis(
        words=graph.fst.osyms.decode(paths[0].olabels),
        total_cost=entry.total_cost,
        model_score=entry.model_score,
        lm_cost=entry.lm_cost,
        coverage=entry.coverage,
        source_tokens=entry.tokens,
    )


@dataclass(frozen=True)
class DecodeResult:
    """Decoded words for one utterance plus the ranked alternatives."""

    uid: str
    strategy: str
    config: DecodeConfig
    hypotheses: tuple[WordHypothesis, ...]
    complete: bool
    unparsed: int

    @property
    def words(self) -> tuple[str, ...]:
        return self.hypotheses[0].words if self.hypotheses else ()

    def to_dict(self) -> dict:
        return {
            "uid": self.uid,
            "strategy": self.strategy,
            "config": {
                "lm_weight": self.config.lm_weight,
                "lm_weight_nbest": self.config.lm_weight_nbest,
                "coverage_weight": self.config.coverage_weight,
                "beam_width": self.config.beam_width,
                "eow_mode": self.config.eow_mode,
            },
            "nbest": [
                {
                    "words": list(h.words),
                    "total_cost": h.total_cost,
                    "model_score": h.model_score,
                    "lm_cost": h.lm_cost,
                    "coverage": h.coverage,
                }
                for h in self.hypotheses
            ],
            "words": list(self.words),
            "complete": self.complete,
            "unparsed": self.unparsed,
        }


def decode(
    scorer,
    resources: DecodeResources | None,
    utt: Utterance,
    config: DecodeConfig,
) -> DecodeResult:
    """Run one utterance through the configured strategy."""
    if config.fusion == "none":
        if SPACE not in scorer.alphabet:
            raise DecodeError(f"fusion 'none' splits words at {SPACE}, absent from the alphabet")
        nb = _expand(scorer, utt, config, None)
        hyps = tuple(_split_graphemes(e, scorer.alphabet) for e in nb.entries)
        return DecodeResult(utt.uid, config.fusion, config, hyps, nb.complete, 0)
    if resources is None:
        raise DecodeError(f"fusion {config.fusion!r} requires decode resources")
    graph = resources.graph_for(scorer.alphabet)
    if config.fusion == "nbest":
        nb = _expand(scorer, utt, config, None)
        res = nbest_rescore(nb, graph, config.lm_weight_nbest, nbest_size=config.nbest_size)
    elif config.fusion == "beam":
        nb = _expand(scorer, utt, config, graph)
        kept: list[WordHypothesis] = []
        unparsed = 0
        for entry in nb.entries:
            wh = _best_words(entry, graph)
            if wh is None:
                unparsed += 1
            else:
                kept.append(wh)
        res = RescoreResult(tuple(kept), unparsed)
    else:
        nb = _expand(scorer, utt, config, graph)
        res = nbest_rescore(
            nb,
            graph,
            config.lm_weight + config.lm_weight_nbest,
            nbest_size=config.nbest_size,
            coverage_weight=config.coverage_weight,
        )
    return DecodeResult(utt.uid, config.fusion, config, res.hypotheses, nb.complete, res.unparsed)


def decode_batch(
    scorer,
    resources: DecodeResources | None,
    utts: list[Utterance],
    config: DecodeConfig,
    jobs: int = 1,
) -> list[DecodeResult]:
    """Decode many utterances; results follow input order regardless of
    how many workers run."""
    if jobs < 1:
        raise DecodeError(f"jobs must be positive, got {jobs}")
    if config.fusion != "none" and resources is not None:
        resources.graph_for(scorer.alphabet)
    if jobs == 1 or len(utts) <= 1:
        return [decode(scorer, resources, u, config) for u in utts]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(decode, scorer, resources, u, config) for u in utts]
        return [f.result() for f in futures]
