"""Code-mixed tweet records: the tagged-token file format, a seeded
synthetic corpus generator and train/dev/test splitting."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np


class LangTag(enum.Enum):
    EN = "en"
    SPA = "spa"
    HI = "hi"
    MIXED = "mixed"
    UNIV = "univ"

    @property
    def index(self) -> int:
        return _LANG_INDEX[self]

    @classmethod
    def parse(cls, text: str) -> "LangTag":
        return cls(text)


_LANG_INDEX = {tag: i for i, tag in enumerate(LangTag)}


class Sentiment(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"

    @property
    def index(self) -> int:
        return _SENT_INDEX[self]

    @classmethod
    def parse(cls, text: str) -> "Sentiment":
        # the task description also spells the third class "pertinent"
        if text == "pertinent":
            return cls.NEUTRAL
        return cls(text)


_SENT_INDEX = {s: i for i, s in enumerate(Sentiment)}
LANG_TAGS = list(LangTag)
SENTIMENTS = list(Sentiment)


@dataclass
class TweetRecord:
    id: str
    tokens: list[str]
    tags: list[LangTag]
    sentiment: Sentiment | None = None

    def __post_init__(self):
        self.tokens = list(self.tokens)
        self.tags = list(self.tags)
        if not self.id or any(c.isspace() for c in self.id):
            raise ValueError(f"record id must be non-empty without whitespace: {self.id!r}")
        if not self.tokens:
            raise ValueError(f"record {self.id}: no tokens")
        if len(self.tokens) != len(self.tags):
            raise ValueError(f"record {self.id}: {len(self.tokens)} tokens but {len(self.tags)} tags")
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise ValueError(f"record {self.id}: bad token {tok!r}")


class CorpusFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


# ------------------------------------------------------------------- file IO

def _finish_block(meta, rows, start_line) -> TweetRecord:
    rec_id, sentiment = meta
    if not rows:
        raise CorpusFormatError(start_line, f"record {rec_id} has no token lines")
    return TweetRecord(rec_id, [t for t, _ in rows], [g for _, g in rows], sentiment)


def parse_conll(stream: Iterable[str]) -> list[TweetRecord]:
    """Read blank-line separated blocks of ``meta`` + ``token<TAB>tag`` lines."""
    records: list[TweetRecord] = []
    meta = None
    rows: list[tuple[str, LangTag]] = []
    start = 0
    lineno = 0
    for lineno, raw in enumerate(stream, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if meta is not None:
                records.append(_finish_block(meta, rows, start))
                meta, rows = None, []
            continue
        fields = line.split("\t")
        if meta is None:
            if fields[0] != "meta" or len(fields) not in (2, 3) or not fields[1]:
                raise CorpusFormatError(lineno, "expected 'meta<TAB><id>[<TAB><sentiment>]'")
            sentiment = None
            if len(fields) == 3:
                try:
                    sentiment = Sentiment.parse(fields[2])
                except ValueError:
                    raise CorpusFormatError(lineno, f"unknown sentiment {fields[2]!r}") from None
            meta, start = (fields[1], sentiment), lineno
            continue
        if len(fields) != 2 or not fields[0] or any(c.isspace() for c in fields[0]):
            raise CorpusFormatError(lineno, "expected '<token><TAB><langtag>'")
        try:
            tag = LangTag.parse(fields[1])
        except ValueError:
            raise CorpusFormatError(lineno, f"unknown language tag {fields[1]!r}") from None
        rows.append((fields[0], tag))
    if meta is not None:
        records.append(_finish_block(meta, rows, start))
    return records


def write_conll(records: Iterable[TweetRecord], stream: TextIO) -> None:
    for rec in records:
        meta = f"meta\t{rec.id}"
        if rec.sentiment is not None:
            meta += f"\t{rec.sentiment.value}"
        stream.write(meta + "\n")
        for tok, tag in zip(rec.tokens, rec.tags):
            stream.write(f"{tok}\t{tag.value}\n")
        stream.write("\n")


def read_corpus(path) -> list[TweetRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_conll(fh)


def save_corpus(records: Iterable[TweetRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_conll(records, fh)


# ---------------------------------------------------------- synthetic data

DEFAULT_LEXICONS: dict[tuple[LangTag, Sentiment], list[str]] = {
    (LangTag.EN, Sentiment.POSITIVE): ["good", "love", "happy", "great", "awesome", "best"],
    (LangTag.EN, Sentiment.NEGATIVE): ["bad", "hate", "sad", "worst", "angry", "boring"],
    (LangTag.EN, Sentiment.NEUTRAL): ["today", "going", "office", "news", "weather", "train"],
    (LangTag.SPA, Sentiment.POSITIVE): ["bueno", "amor", "feliz", "genial", "bonito", "excelente"],
    (LangTag.SPA, Sentiment.NEGATIVE): ["malo", "odio", "triste", "peor", "feo", "horrible"],
    (LangTag.SPA, Sentiment.NEUTRAL): ["hoy", "casa", "trabajo", "noticias", "tiempo", "calle"],
    (LangTag.HI, Sentiment.POSITIVE): ["accha", "pyaar", "khush", "badhiya", "mast", "shandaar"],
    (LangTag.HI, Sentiment.NEGATIVE): ["bura", "nafrat", "dukhi", "bekaar", "ganda", "gussa"],
    (LangTag.HI, Sentiment.NEUTRAL): ["aaj", "ghar", "kaam", "khabar", "mausam", "raasta"],
}
DEFAULT_UNIV = ["!", "?", ".", "#ipl", "#tbt", "http"]


class SyntheticConfigError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    """Knobs for :func:`generate_synthetic`.

    Each record gets one sentiment and one partner language. Its words come
    from that sentiment's lexicons only; ``code_mix_ratio`` is the expected
    share of partner-language words, which form one contiguous switched span.
    """
    seed: int
    num_records: int
    lexicons: dict[tuple[LangTag, Sentiment], list[str]] = field(default_factory=lambda: dict(DEFAULT_LEXICONS))
    univ_tokens: list[str] = field(default_factory=lambda: list(DEFAULT_UNIV))
    min_len: int = 6
    max_len: int = 12
    code_mix_ratio: float = 0.3
    univ_prob: float = 0.1
    zipf_exponent: float = 1.5
    partner_langs: tuple[LangTag, ...] = (LangTag.SPA, LangTag.HI)

    def validate(self) -> None:
        if self.num_records < 0:
            raise SyntheticConfigError("num_records must be >= 0")
        if not 0.0 <= self.code_mix_ratio <= 1.0:
            raise SyntheticConfigError("code_mix_ratio must lie in [0, 1]")
        if not 0.0 <= self.univ_prob < 1.0:
            raise SyntheticConfigError("univ_prob must lie in [0, 1)")
        if not 1 <= self.min_len <= self.max_len:
            raise SyntheticConfigError("need 1 <= min_len <= max_len")
        if not self.partner_langs:
            raise SyntheticConfigError("need at least one partner language")
        if self.univ_prob > 0 and not self.univ_tokens:
            raise SyntheticConfigError("univ_prob > 0 with an empty univ lexicon")
        needed = {(lang, s) for lang in (LangTag.EN, *self.partner_langs) for s in Sentiment}
        for key in sorted(needed, key=lambda k: (k[0].index, k[1].index)):
            if not self.lexicons.get(key):
                raise SyntheticConfigError(f"empty lexicon for {key[0].value}/{key[1].value}")
        owner: dict[str, tuple[LangTag, Sentiment]] = {}
        for key, words in self.lexicons.items():
            for w in words:
                if w in owner and owner[w] != key:
                    raise SyntheticConfigError(f"word {w!r} appears in two lexicons")
                owner[w] = key
        if owner.keys() & set(self.univ_tokens):
            raise SyntheticConfigError("univ tokens overlap the word lexicons")


def _zipf_weights(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def generate_synthetic(spec: SyntheticSpec) -> list[TweetRecord]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    weights = {k: _zipf_weights(len(v), spec.zipf_exponent) for k, v in spec.lexicons.items()}
    univ_w = _zipf_weights(len(spec.univ_tokens), spec.zipf_exponent) if spec.univ_tokens else None
    records = []
    for i in range(spec.num_records):
        sentiment = SENTIMENTS[rng.integers(len(SENTIMENTS))]
        partner = spec.partner_langs[rng.integers(len(spec.partner_langs))]
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        is_univ = rng.random(length) < spec.univ_prob
        n_words = int((~is_univ).sum())
        n_switched = int(rng.binomial(n_words, spec.code_mix_ratio))
        switch_at = int(rng.integers(0, n_words - n_switched + 1))
        tokens, tags = [], []
        word_pos = 0
        for univ in is_univ:
            if univ:
                tokens.append(spec.univ_tokens[rng.choice(len(spec.univ_tokens), p=univ_w)])
                tags.append(LangTag.UNIV)
                continue
            lang = partner if switch_at <= word_pos < switch_at + n_switched else LangTag.EN
            key = (lang, sentiment)
            lex = spec.lexicons[key]
            tokens.append(lex[rng.choice(len(lex), p=weights[key])])
            tags.append(lang)
            word_pos += 1
        if n_words == 0:
            # keep every record label-recoverable from at least one lexicon word
            key = (LangTag.EN, sentiment)
            tokens[0], tags[0] = spec.lexicons[key][0], LangTag.EN
        records.append(TweetRecord(f"syn{spec.seed}-{i:05d}", tokens, tags, sentiment))
    return records


# ----------------------------------------------------------------- splitting

def split(records: Sequence[TweetRecord], fractions: Sequence[float], seed: int) -> tuple[list[TweetRecord], ...]:
    """Shuffle under ``seed`` and cut into ``len(fractions)`` disjoint parts.

    Part sizes use the largest-remainder rule, so 10 records at
    (0.8, 0.1, 0.1) give exactly (8, 1, 1).
    """
    if not fractions or any(f <= 0 for f in fractions):
        raise ValueError("fractions must be positive")
    if abs(math.fsum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {math.fsum(fractions)}")
    n = len(records)
    if n < len(fractions):
        raise ValueError(f"cannot split {n} records into {len(fractions)} parts")
    exact = [f * n for f in fractions]
    sizes = [math.floor(x + 1e-9) for x in exact]
    leftovers = sorted(range(len(exact)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in leftovers[: n - sum(sizes)]:
        sizes[i] += 1
    order = np.random.default_rng(seed).permutation(n)
    parts, start = [], 0
    for size in sizes:
        parts.append([records[j] for j in order[start:start + size]])
        start += size
    return tuple(parts)
