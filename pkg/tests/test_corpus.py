import io
from collections import Counter
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codemix.corpus import (DEFAULT_LEXICONS, CorpusFormatError, LangTag, Sentiment, SyntheticConfigError,
                            SyntheticSpec, TweetRecord, generate_synthetic, parse_conll, split, write_conll)

FIXTURES = Path(__file__).parent / "fixtures"


def roundtrip(records):
    buf = io.StringIO()
    write_conll(records, buf)
    return parse_conll(io.StringIO(buf.getvalue())), buf.getvalue()


class TestEnums:
    @pytest.mark.parametrize("tag", list(LangTag))
    def test_langtag_roundtrip(self, tag):
        assert LangTag.parse(tag.value) is tag

    @pytest.mark.parametrize("s", list(Sentiment))
    def test_sentiment_roundtrip(self, s):
        assert Sentiment.parse(s.value) is s

    def test_pertinent_means_neutral(self):
        assert Sentiment.parse("pertinent") is Sentiment.NEUTRAL

    def test_indices(self):
        assert [t.index for t in LangTag] == [0, 1, 2, 3, 4]
        assert [s.index for s in Sentiment] == [0, 1, 2]


class TestRecord:
    def test_arity_enforced(self):
        with pytest.raises(ValueError):
            TweetRecord("1", ["a", "b"], [LangTag.EN])

    def test_tokens_nonempty(self):
        with pytest.raises(ValueError):
            TweetRecord("1", [], [])
        with pytest.raises(ValueError):
            TweetRecord("1", ["a b"], [LangTag.EN])


class TestParse:
    def test_minimal_block(self):
        recs = parse_conll(io.StringIO("meta\t1\tpositive\ni\ten\nlove\ten\n"))
        assert recs == [TweetRecord("1", ["i", "love"], [LangTag.EN, LangTag.EN], Sentiment.POSITIVE)]

    def test_empty_input(self):
        assert parse_conll(io.StringIO("")) == []

    def test_unlabelled_meta(self):
        (rec,) = parse_conll(io.StringIO("meta\tx9\nhola\tspa\n"))
        assert rec.sentiment is None and rec.tags == [LangTag.SPA]

    def test_pertinent_normalised(self):
        (rec,) = parse_conll(io.StringIO("meta\t1\tpertinent\nok\ten\n"))
        assert rec.sentiment is Sentiment.NEUTRAL

    @pytest.mark.parametrize("name,line,fragment", [
        ("malformed_tag.conll", 3, "'fr'"),
        ("malformed_meta.conll", 4, "meta"),
        ("malformed_arity.conll", 6, "token"),
    ])
    def test_errors_name_line(self, name, line, fragment):
        with open(FIXTURES / name, encoding="utf-8") as fh, pytest.raises(CorpusFormatError) as exc:
            parse_conll(fh)
        assert exc.value.lineno == line
        assert str(exc.value).startswith(f"line {line}:")
        assert fragment in str(exc.value)

    def test_unknown_sentiment(self):
        with pytest.raises(CorpusFormatError) as exc:
            parse_conll(io.StringIO("meta\t1\thappy\nok\ten\n"))
        assert exc.value.lineno == 1


class TestWrite:
    def test_single_roundtrip(self):
        rec = TweetRecord("7", ["hola", "friend", "!"], [LangTag.SPA, LangTag.EN, LangTag.UNIV], Sentiment.NEGATIVE)
        assert roundtrip([rec])[0] == [rec]

    def test_unlabelled_meta_omits_label(self):
        rec = TweetRecord("t1", ["aaj"], [LangTag.HI])
        back, text = roundtrip([rec])
        assert text.splitlines()[0] == "meta\tt1"
        assert back[0].sentiment is None

    def test_synthetic_roundtrip_and_bytes(self):
        recs = generate_synthetic(SyntheticSpec(seed=3, num_records=100))
        back, text = roundtrip(recs)
        assert back == recs
        assert roundtrip(back)[1] == text

    @settings(max_examples=50)
    @given(st.lists(st.tuples(
        st.lists(st.text(alphabet=st.characters(blacklist_categories=("Z", "C")), min_size=1), min_size=1, max_size=6),
        st.sampled_from(list(LangTag)),
        st.one_of(st.none(), st.sampled_from(list(Sentiment))),
    ), max_size=8))
    def test_roundtrip_property(self, items):
        recs = [TweetRecord(f"r{i}", toks, [tag] * len(toks), s) for i, (toks, tag, s) in enumerate(items)]
        assert roundtrip(recs)[0] == recs


class TestSynthetic:
    def test_zero_records(self):
        assert generate_synthetic(SyntheticSpec(seed=1, num_records=0)) == []

    def test_deterministic(self):
        spec = SyntheticSpec(seed=7, num_records=50)
        assert generate_synthetic(spec) == generate_synthetic(spec)
        assert generate_synthetic(spec) != generate_synthetic(SyntheticSpec(seed=8, num_records=50))

    def test_ratio_zero_is_english_only(self):
        recs = generate_synthetic(SyntheticSpec(seed=2, num_records=200, code_mix_ratio=0.0))
        tags = {t for r in recs for t in r.tags if t is not LangTag.UNIV}
        assert tags == {LangTag.EN}

    def test_ratio_controls_mixture(self):
        def share(ratio):
            recs = generate_synthetic(SyntheticSpec(seed=2, num_records=300, code_mix_ratio=ratio))
            c = Counter(t for r in recs for t in r.tags if t is not LangTag.UNIV)
            return 1 - c[LangTag.EN] / sum(c.values())
        assert share(1.0) == 1.0
        assert abs(share(0.5) - 0.5) < 0.05

    def test_tags_match_source_lexicon(self):
        owner = {w: lang for (lang, _), words in DEFAULT_LEXICONS.items() for w in words}
        for rec in generate_synthetic(SyntheticSpec(seed=4, num_records=200)):
            for tok, tag in zip(rec.tokens, rec.tags):
                assert tag is owner.get(tok, LangTag.UNIV)

    def test_label_separable_by_lexicon(self):
        # bag-of-lexicon-words classifier: 100% accuracy by construction
        owner = {w: s for (_, s), words in DEFAULT_LEXICONS.items() for w in words}
        recs = generate_synthetic(SyntheticSpec(seed=5, num_records=500))
        for rec in recs:
            votes = Counter(owner[t] for t in rec.tokens if t in owner)
            assert votes.most_common(1)[0][0] is rec.sentiment

    def test_empty_lexicon_rejected(self):
        lex = dict(DEFAULT_LEXICONS)
        lex[(LangTag.HI, Sentiment.NEUTRAL)] = []
        with pytest.raises(SyntheticConfigError):
            generate_synthetic(SyntheticSpec(seed=1, num_records=3, lexicons=lex))

    def test_overlapping_lexicons_rejected(self):
        lex = dict(DEFAULT_LEXICONS)
        lex[(LangTag.EN, Sentiment.NEGATIVE)] = ["good"]
        with pytest.raises(SyntheticConfigError):
            generate_synthetic(SyntheticSpec(seed=1, num_records=3, lexicons=lex))

    @pytest.mark.parametrize("ratio", [-0.1, 1.5])
    def test_ratio_range(self, ratio):
        with pytest.raises(SyntheticConfigError):
            generate_synthetic(SyntheticSpec(seed=1, num_records=3, code_mix_ratio=ratio))


class TestSplit:
    def _recs(self, n):
        return generate_synthetic(SyntheticSpec(seed=11, num_records=n))

    def test_sizes(self):
        parts = split(self._recs(10), (0.8, 0.1, 0.1), seed=0)
        assert tuple(len(p) for p in parts) == (8, 1, 1)

    def test_partition(self):
        recs = self._recs(37)
        parts = split(recs, (0.5, 0.3, 0.2), seed=4)
        assert sorted(r.id for p in parts for r in p) == sorted(r.id for r in recs)

    def test_seeded(self):
        recs = self._recs(100)
        a = split(recs, (0.8, 0.2), seed=1)
        assert a == split(recs, (0.8, 0.2), seed=1)
        assert [r.id for r in a[0]] != [r.id for r in split(recs, (0.8, 0.2), seed=2)[0]]

    def test_too_few_records(self):
        with pytest.raises(ValueError):
            split(self._recs(2), (0.5, 0.3, 0.2), seed=0)

    @pytest.mark.parametrize("fractions", [(0.5, 0.4), (0.0, 1.0), (1.2, -0.2)])
    def test_bad_fractions(self, fractions):
        with pytest.raises(ValueError):
            split(self._recs(10), fractions, seed=0)
