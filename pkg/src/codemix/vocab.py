"""Word-level vocabulary with TF-IDF pruning, plus sequence encoding.

Tokens are ranked by their best TF-IDF score over all documents
(tf = count/|doc|, idf = ln(N/df)). Words that occur in every document
score 0 and fall below any positive floor, so they map to [UNK].
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import LangTag, TweetRecord
from .tensor import IGNORE_INDEX

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(5)
NUM_SPECIAL = len(SPECIAL_TOKENS)


@dataclass
class TfidfStats:
    num_docs: int
    doc_freq: dict[str, int]
    term_freq: Counter
    max_score: dict[str, float]


def compute_tfidf_stats(docs: Sequence[Sequence[str]]) -> TfidfStats:
    n = len(docs)
    df: Counter = Counter()
    tf: Counter = Counter()
    for doc in docs:
        tf.update(doc)
        df.update(set(doc))
    stats = TfidfStats(n, dict(df), tf, {})
    best: dict[str, float] = {}
    for doc in docs:
        counts = Counter(doc)
        for tok, c in counts.items():
            score = (c / len(doc)) * math.log(n / df[tok])
            if score > best.get(tok, -1.0):
                best[tok] = score
    stats.max_score = best
    return stats


def tfidf_score(token: str, doc: Sequence[str], stats: TfidfStats) -> float:
    if token not in stats.doc_freq:
        raise KeyError(f"token {token!r} does not occur in the corpus")
    if not doc:
        raise ValueError("document is empty")
    tf = sum(1 for t in doc if t == token) / len(doc)
    return tf * math.log(stats.num_docs / stats.doc_freq[token])


class Vocabulary:
    """Bijective token <-> id map; ids 0..4 are the special tokens."""

    def __init__(self, tokens: Iterable[str]):
        tokens = list(tokens)
        if tuple(tokens[:NUM_SPECIAL]) != SPECIAL_TOKENS:
            raise ValueError(f"vocabulary must start with {' '.join(SPECIAL_TOKENS)}")
        self.itos = tokens
        self.stoi = {t: i for i, t in enumerate(tokens)}
        if len(self.stoi) != len(tokens):
            raise ValueError("duplicate token in vocabulary")

    @classmethod
    def from_corpus_tokens(cls, tokens: Iterable[str]) -> "Vocabulary":
        return cls([*SPECIAL_TOKENS, *tokens])

    def __len__(self) -> int:
        return len(self.itos)

    @property
    def size(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self.itos[idx]

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(t + "\n" for t in self.itos)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls(line.rstrip("\n") for line in fh if line.rstrip("\n"))


def build_vocabulary(corpus: Sequence[TweetRecord], max_size: int, tfidf_floor: float = 0.0) -> Vocabulary:
    if not corpus:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    if max_size <= NUM_SPECIAL:
        raise ValueError(f"max_size must exceed {NUM_SPECIAL}")
    stats = compute_tfidf_stats([rec.tokens for rec in corpus])
    kept = [t for t, s in stats.max_score.items() if s >= tfidf_floor and t not in SPECIAL_TOKENS]
    kept.sort(key=lambda t: (-stats.max_score[t], -stats.term_freq[t], t))
    return Vocabulary.from_corpus_tokens(kept[: max_size - NUM_SPECIAL])


def encode(tokens: Sequence[str], vocab: Vocabulary, max_len: int) -> tuple[list[int], list[int]]:
    """[CLS] tokens [SEP], truncated to ``max_len`` and right-padded."""
    if max_len < 3:
        raise ValueError("max_len must be at least 3")
    body = [vocab.id(t) for t in tokens[: max_len - 2]]
    ids = [CLS_ID, *body, SEP_ID]
    mask = [1] * len(ids)
    pad = max_len - len(ids)
    return ids + [PAD_ID] * pad, mask + [0] * pad


def decode(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    """Content tokens of an encoded sequence (specials other than UNK dropped)."""
    return [vocab.token(i) for i in ids if i == UNK_ID or i >= NUM_SPECIAL]


def align_tags(tags: Sequence[LangTag], max_len: int, num_tokens: int | None = None) -> list[int]:
    """Per-position language targets matching :func:`encode`'s layout."""
    if max_len < 3:
        raise ValueError("max_len must be at least 3")
    if num_tokens is not None and num_tokens != len(tags):
        raise ValueError(f"{len(tags)} tags for {num_tokens} tokens")
    body = [t.index for t in tags[: max_len - 2]]
    out = [IGNORE_INDEX, *body, IGNORE_INDEX]
    return out + [IGNORE_INDEX] * (max_len - len(out))
