from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest

from fusedec.ngram import (
    NGramError,
    lm_to_fst,
    read_arpa,
    score_sequence,
    train_ngram,
    write_arpa,
)
from fusedec.fst import string_weight
from oracles import absdisc_conditional, mle_conditional, ngram_counts_bruteforce

LN = math.log


def random_corpus(rng: random.Random, words=("a", "b", "c", "d"), max_sents=8, max_len=6):
    n = rng.randint(1, max_sents)
    return [
        " ".join(rng.choice(words) for _ in range(rng.randint(0, max_len)))
        for _ in range(n)
    ]


def ids_of(lm, *syms):
    return tuple(lm.vocab.id(s) for s in syms)


class TestValidation:
    def test_order_out_of_range(self):
        for bad in (0, 5, -1, 2.0):
            with pytest.raises(NGramError, match="order"):
                train_ngram(["a"], bad)

    def test_unknown_smoothing(self):
        with pytest.raises(NGramError, match="smoothing"):
            train_ngram(["a"], 2, smoothing="kneser")

    def test_discount_bounds(self):
        for bad in (0.0, 1.0, -0.3):
            with pytest.raises(NGramError, match="discount"):
                train_ngram(["a"], 2, discount=bad)

    def test_empty_corpus(self):
        with pytest.raises(NGramError, match="empty"):
            train_ngram([], 2)

    def test_reserved_symbols_rejected(self):
        for bad in ("x </s>", "<s> x", "<unk> y"):
            with pytest.raises(NGramError, match="reserved"):
                train_ngram([bad], 2)

    def test_score_rejects_sentence_markers(self):
        lm = train_ngram(["a b"], 2)
        with pytest.raises(NGramError, match="reserved"):
            score_sequence(lm, ["a", "</s>"])


class TestMleHandCounts:
    def test_bigram_fixture(self):
        lm = train_ngram(["a b", "a c"], 2, smoothing="mle")
        a, b = ids_of(lm, "a", "b")
        assert lm.conditional_logp((lm.bos_id,), a) == pytest.approx(LN(1.0))
        assert lm.conditional_logp((a,), b) == pytest.approx(LN(0.5))
        assert lm.conditional_logp((b,), lm.eos_id) == pytest.approx(LN(1.0))
        # unigram level: a:2 b:1 c:1 </s>:2 out of 6
        assert lm.conditional_logp((), a) == pytest.approx(LN(2 / 6))
        assert score_sequence(lm, ["a", "b"]) == pytest.approx(LN(0.5))

    def test_unigram_fixture(self):
        lm = train_ngram(["a"], 1, smoothing="mle")
        a = lm.vocab.id("a")
        assert lm.conditional_logp((), a) == pytest.approx(LN(0.5))
        assert lm.conditional_logp((), lm.eos_id) == pytest.approx(LN(0.5))
        assert score_sequence(lm, ["a"]) == pytest.approx(LN(0.25))
        assert lm.backoffs == {}

    def test_unseen_gram_is_impossible(self):
        lm = train_ngram(["a b", "a c"], 2, smoothing="mle")
        a, b = ids_of(lm, "a", "b")
        # context (b) was observed (b </s>), so an unseen continuation is hard zero
        assert lm.conditional_logp((b,), a) == -math.inf
        assert score_sequence(lm, ["a", "b", "a"]) == -math.inf

    def test_unseen_context_shortens_freely(self):
        lm = train_ngram(["a b", "a c"], 2, smoothing="mle")
        a, b, c = ids_of(lm, "a", "b", "c")
        # (c, b) never appears as a bigram context pairing; query trims to (b)
        assert lm.conditional_logp((c, b), lm.eos_id) == lm.conditional_logp((b,), lm.eos_id)

    def test_context_trimmed_to_model_order(self):
        lm = train_ngram(["a b", "a c"], 2, smoothing="mle")
        a, b = ids_of(lm, "a", "b")
        assert lm.conditional_logp((b, b, b, a), b) == lm.conditional_logp((a,), b)

    def test_more_evidence_never_hurts(self):
        rng = random.Random(13)
        for _ in range(15):
            corpus = random_corpus(rng)
            target = rng.choice(corpus).split()
            order = rng.randint(1, 3)
            before = score_sequence(train_ngram(corpus, order, smoothing="mle"), target)
            boosted = corpus + [" ".join(target)] * rng.randint(1, 4)
            after = score_sequence(train_ngram(boosted, order, smoothing="mle"), target)
            assert after >= before - 1e-12

    def test_matches_fraction_oracle_on_observed_grams(self):
        rng = random.Random(11)
        for _ in range(30):
            corpus = random_corpus(rng)
            order = rng.randint(1, 4)
            lm = train_ngram(corpus, order, smoothing="mle")
            counts = ngram_counts_bruteforce([s.split() for s in corpus], order)
            for gram_syms, want in (
                (g, mle_conditional(counts, g)) for g in counts
            ):
                gram = tuple(lm.vocab.id(s) for s in gram_syms)
                got = lm.conditional_logp(gram[:-1], gram[-1])
                assert got == pytest.approx(math.log(want), abs=1e-12)


class TestAbsdiscHandCounts:
    def test_bigram_fixture_fractions(self):
        lm = train_ngram(["a b", "a c"], 2, smoothing="absdisc", discount=0.4)
        a, b = ids_of(lm, "a", "b")
        # events {a,b,c,</s>}; unigram total 6, four distinct
        assert lm.conditional_logp((), a) == pytest.approx(LN(1 / 3), abs=1e-12)
        assert lm.conditional_logp((), b) == pytest.approx(LN(1 / 6), abs=1e-12)
        # ctx (a): (1-0.4)/2 + 0.4 * 1/6
        assert lm.conditional_logp((a,), b) == pytest.approx(LN(Fraction(11, 30)), abs=1e-12)
        # ctx (<s>): (2-0.4)/2 + 0.2 * 1/3
        assert lm.conditional_logp((lm.bos_id,), a) == pytest.approx(LN(Fraction(13, 15)), abs=1e-12)
        assert lm.backoffs[(a,)] == pytest.approx(LN(0.4), abs=1e-12)
        # unseen continuation of a seen context goes through the backoff
        assert lm.conditional_logp((a,), a) == pytest.approx(LN(0.4) + LN(1 / 3), abs=1e-12)

    def test_matches_recursive_fraction_oracle(self):
        rng = random.Random(23)
        for _ in range(25):
            corpus = random_corpus(rng)
            order = rng.randint(1, 4)
            lm = train_ngram(corpus, order, smoothing="absdisc", discount=0.4)
            counts = ngram_counts_bruteforce([s.split() for s in corpus], order)
            n_events = len(lm.vocab) - 2
            events = [lm.vocab.sym(i) for i in lm.event_ids()]
            in_vocab = [w for w in events if w != "</s>"]
            ctx_pool = [g[:-1] for g in counts if len(g) > 1] + [()]
            # unseen-context probes, built from words the model has ids for
            if in_vocab:
                ctx_pool += [
                    tuple(rng.choice(in_vocab) for _ in range(rng.randint(1, 3)))
                    for _ in range(4)
                ]
            for _ in range(40):
                ctx_syms = rng.choice(ctx_pool)[: order - 1] if order > 1 else ()
                w = rng.choice(events)
                want = absdisc_conditional(counts, Fraction(2, 5), n_events, (*ctx_syms, w))
                got = lm.conditional_logp(
                    tuple(lm.vocab.id(s) for s in ctx_syms), lm.vocab.id(w)
                )
                assert got == pytest.approx(math.log(want), abs=1e-10)

    def test_distributions_normalize_everywhere(self):
        rng = random.Random(37)
        for _ in range(20):
            corpus = random_corpus(rng)
            order = rng.randint(1, 4)
            smoothing = rng.choice(["mle", "absdisc"])
            lm = train_ngram(corpus, order, smoothing=smoothing)
            events = lm.event_ids()
            contexts = {(), (lm.bos_id,)} | set(lm.contexts)
            for _ in range(5):
                contexts.add(tuple(rng.choice(events) for _ in range(rng.randint(1, 3))))
            for ctx in contexts:
                mass = sum(math.exp(lm.conditional_logp(ctx, w)) for w in events)
                assert mass == pytest.approx(1.0, abs=1e-9), (ctx, smoothing)

    def test_oov_maps_to_unk_only_when_trained(self):
        corpus = ["a a b", "a c c"]
        plain = train_ngram(corpus, 2, smoothing="absdisc")
        assert score_sequence(plain, ["a", "zzz"]) == -math.inf
        with_unk = train_ngram(corpus, 2, smoothing="absdisc", unk=True)
        # b and the unseen word both land on <unk> now
        got = score_sequence(with_unk, ["a", "zzz"])
        assert math.isfinite(got)
        assert got == score_sequence(with_unk, ["a", "b"])


class TestFstExport:
    def test_structure_bigram(self):
        lm = train_ngram(["a b", "a c"], 2, smoothing="absdisc")
        g = lm_to_fst(lm)
        assert g.finals == {g.num_states - 1: 0.0}
        assert g.isyms == lm.vocab and g.osyms == lm.vocab
        eps_in = [arc for arc in g.arcs if arc.ilabel == 0]
        assert all(arc.olabel == 0 for arc in eps_in)
        # five contexts: (), (<s>), (a), (b), (c); plus the final state
        assert g.num_states == 6

    def test_unigram_model_topology(self):
        lm = train_ngram(["a", "b"], 1, smoothing="mle")
        g = lm_to_fst(lm)
        assert g.num_states == 2
        assert g.start == 0
        a = lm.vocab.id("a")
        self_loops = [arc for arc in g.arcs if arc.ilabel == a]
        assert self_loops and all(arc.dst == 0 for arc in self_loops)

    def test_empty_sentence_accepted(self):
        lm = train_ngram(["", "a"], 2, smoothing="mle")
        g = lm_to_fst(lm)
        assert string_weight(g, []) == pytest.approx(-score_sequence(lm, []))

    def test_path_weight_equals_score_mle(self):
        # no backoff arcs, so every sentence has at most one route
        rng = random.Random(51)
        for _ in range(25):
            self._agreement(rng, "mle", rng.randint(1, 4), exact=True)

    def test_path_weight_equals_score_absdisc_low_order(self):
        # direct and backed-off arcs re-enter the same state at order <= 2,
        # so the tropical min reproduces the query rule exactly
        rng = random.Random(52)
        checked = 0
        while checked < 100:
            checked += self._agreement(rng, "absdisc", rng.randint(1, 2), exact=True)

    def test_path_weight_bounds_score_absdisc_high_order(self):
        # at higher orders an early backoff may find a cheaper route; the
        # best path can only undercut the query rule, never exceed it
        rng = random.Random(53)
        for _ in range(20):
            self._agreement(rng, "absdisc", rng.randint(3, 4), exact=False)

    @staticmethod
    def _agreement(rng: random.Random, smoothing: str, order: int, exact: bool) -> int:
        words = ("a", "b", "c", "d")
        corpus = random_corpus(rng, words=words)
        lm = train_ngram(corpus, order, smoothing=smoothing)
        g = lm_to_fst(lm)
        probes = [s.split() for s in corpus[:3]]
        probes += [[rng.choice(words) for _ in range(rng.randint(0, 5))] for _ in range(6)]
        compared = 0
        for sent in probes:
            if any(lm.vocab.find(w) is None for w in sent):
                continue
            score = score_sequence(lm, sent)
            weight = string_weight(g, sent)
            compared += 1
            if score == -math.inf:
                assert weight is None
            elif exact:
                assert weight == pytest.approx(-score, abs=1e-9)
            else:
                assert weight <= -score + 1e-9
        return compared

    def test_direct_arc_never_beaten_by_backoff(self):
        # the tropical min only matches the query rule if stored grams are
        # at least as probable as their own backoff route
        rng = random.Random(67)
        for _ in range(20):
            lm = train_ngram(random_corpus(rng), rng.randint(2, 4), smoothing="absdisc")
            for gram, lnp in lm.probs.items():
                if len(gram) == 1 or gram[-1] == lm.bos_id:
                    continue
                ctx = gram[:-1]
                bow = lm.backoffs.get(ctx)
                if bow is None:
                    continue
                via_backoff = bow + lm.conditional_logp(gram[1:-1], gram[-1])
                assert lnp >= via_backoff - 1e-12


class TestArpaRoundTrip:
    def test_tables_and_scores_survive(self, tmp_path):
        rng = random.Random(71)
        for i in range(12):
            corpus = random_corpus(rng)
            order = rng.randint(1, 4)
            smoothing = rng.choice(["mle", "absdisc"])
            lm = train_ngram(corpus, order, smoothing=smoothing)
            path = tmp_path / f"model{i}.arpa"
            write_arpa(lm, path)
            back = read_arpa(path)
            assert back.order == lm.order
            assert back.vocab == lm.vocab
            assert set(back.probs) == set(lm.probs)
            assert set(back.backoffs) == set(lm.backoffs)
            for gram, lnp in lm.probs.items():
                assert back.probs[gram] == pytest.approx(lnp, abs=1e-9)
            probes = [s.split() for s in corpus] + [["a", "d", "d"], []]
            for sent in probes:
                a, b = score_sequence(lm, sent), score_sequence(back, sent)
                if a == -math.inf:
                    assert b == -math.inf
                else:
                    assert b == pytest.approx(a, abs=1e-9)

    def test_start_symbol_placeholder(self, tmp_path):
        lm = train_ngram(["a b"], 2, smoothing="mle")
        path = tmp_path / "m.arpa"
        write_arpa(lm, path)
        lines = path.read_text().splitlines()
        assert any(line.endswith("\t<s>") and line.startswith("-99") for line in lines)
        assert "\\data\\" == lines[0]
        assert lines[-1] == "\\end\\"

    def test_declared_count_mismatch(self, tmp_path):
        lm = train_ngram(["a b"], 2, smoothing="absdisc")
        path = tmp_path / "m.arpa"
        write_arpa(lm, path)
        text = path.read_text().replace("ngram 1=", "ngram 1=9")
        bad = tmp_path / "bad.arpa"
        bad.write_text(text)
        with pytest.raises(NGramError, match="declared"):
            read_arpa(bad)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "m.arpa"
        path.write_text("\\data\\\nngram 1=1\n\n\\1-grams:\nnot a number here at all\n\n\\end\\\n")
        with pytest.raises(NGramError, match="line"):
            read_arpa(path)

    def test_missing_sentence_end(self, tmp_path):
        path = tmp_path / "m.arpa"
        path.write_text("\\data\\\nngram 1=1\n\n\\1-grams:\n-99\t<s>\n\n\\end\\\n")
        with pytest.raises(NGramError, match="</s>"):
            read_arpa(path)
