"""Tweet text cleanup: emoji -> English phrase substitution, then character
filtering (lowercase, URL placeholder, '@'/'https' removal, closed alphabet).
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping

PUNCTUATION = frozenset(".,!?'#")
_PHRASE_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz ")


class EmojiTable:
    """Immutable emoji-sequence -> phrase map with longest-match lookup."""

    def __init__(self, mapping: Mapping[str, str], version: str = ""):
        for seq, phrase in mapping.items():
            if not seq:
                raise ValueError("empty emoji sequence")
            if not phrase or not set(phrase) <= _PHRASE_CHARS:
                raise ValueError(f"phrase for {seq!r} must be non-empty [a-z ] text, got {phrase!r}")
        self._map = dict(mapping)
        self._max_len = max((len(k) for k in self._map), default=0)
        self.version = version

    def __len__(self) -> int:
        return len(self._map)

    def __contains__(self, seq: str) -> bool:
        return seq in self._map

    def __getitem__(self, seq: str) -> str:
        return self._map[seq]

    def longest_match(self, text: str, start: int) -> tuple[str, str] | None:
        for size in range(min(self._max_len, len(text) - start), 0, -1):
            seq = text[start:start + size]
            if seq in self._map:
                return seq, self._map[seq]
        return None

    @classmethod
    def parse(cls, lines) -> "EmojiTable":
        mapping: dict[str, str] = {}
        version = ""
        for lineno, raw in enumerate(lines, 1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#") and "\t" not in line:
                if line.startswith("# emoji-table version"):
                    version = line.split()[-1]
                continue
            seq, sep, phrase = line.partition("\t")
            if not sep:
                raise ValueError(f"line {lineno}: expected '<emoji>\\t<phrase>'")
            mapping[seq] = phrase
        return cls(mapping, version)

    @classmethod
    def load(cls, path: str | Path) -> "EmojiTable":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh)


@lru_cache(maxsize=1)
def default_emoji_table() -> EmojiTable:
    """The shipped CLDR short-name table."""
    with resources.files("codemix").joinpath("data/emoji_table.tsv").open(encoding="utf-8") as fh:
        return EmojiTable.parse(fh)


def _is_emoji_char(ch: str) -> bool:
    cp = ord(ch)
    if cp in (0x200D, 0xFE0E, 0xFE0F, 0x20E3):
        return True
    if 0x1F000 <= cp <= 0x1FAFF or 0x2600 <= cp <= 0x27BF or 0xE0020 <= cp <= 0xE007F:
        return True
    return unicodedata.category(ch) == "So"


def substitute_emoji(text: str, table: EmojiTable | None = None) -> str:
    """Replace each known emoji sequence with ``" " + phrase + " "``.

    Matching is greedy longest-first, so ZWJ sequences and skin-tone
    variants win over their components. Emoji characters not covered by
    the table are dropped; everything else passes through.
    """
    table = table or default_emoji_table()
    out: list[str] = []
    i = 0
    while i < len(text):
        hit = table.longest_match(text, i)
        if hit is not None:
            seq, phrase = hit
            out.append(f" {phrase} ")
            i += len(seq)
            continue
        if not _is_emoji_char(text[i]):
            out.append(text[i])
        i += 1
    return "".join(out)


@dataclass(frozen=True)
class FilterPolicy:
    lowercase: bool = True
    url_token_replacement: str = "http"
    delete_tokens: frozenset[str] = frozenset({"https"})
    delete_chars: frozenset[str] = frozenset({"@"})
    extra_allowed: frozenset[str] = field(default=PUNCTUATION)

    def __post_init__(self):
        rep = self.url_token_replacement
        if not rep or not rep.isascii() or rep != rep.lower() or any(c.isspace() for c in rep):
            raise ValueError("url_token_replacement must be a non-empty lowercase ASCII word")

    def allows(self, ch: str) -> bool:
        return ch == " " or ch.isalpha() or ch.isdigit() or ch in self.extra_allowed


DEFAULT_POLICY = FilterPolicy()


def filter_characters(text: str, policy: FilterPolicy = DEFAULT_POLICY) -> str:
    if policy.lowercase:
        text = text.lower()
    # Character deletion runs before token matching so that, e.g., "ur@l"
    # cannot turn into a fresh "url" token on a second pass.
    text = "".join(
        " " if ch.isspace() else ch
        for ch in text
        if ch.isspace() or (ch not in policy.delete_chars and policy.allows(ch))
    )
    tokens = []
    for tok in text.split():
        if tok == "url":
            tok = policy.url_token_replacement
        if tok in policy.delete_tokens:
            continue
        tokens.append(tok)
    return " ".join(tokens)


def preprocess_text(text: str, table: EmojiTable | None = None,
                    policy: FilterPolicy = DEFAULT_POLICY) -> str:
    """Emoji substitution followed by character filtering."""
    return filter_characters(substitute_emoji(text, table), policy)
