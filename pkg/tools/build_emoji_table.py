"""Regenerate src/codemix/data/emoji_table.tsv from the CLDR short names
bundled with the ``emoji`` package.

Only needed when bumping the table version; the package itself reads the
checked-in TSV and does not depend on ``emoji`` at runtime.

    pip install emoji==2.16.0
    python tools/build_emoji_table.py
"""
import re
import sys
import unicodedata
from pathlib import Path

import emoji

TABLE_VERSION = 1
OUT = Path(__file__).resolve().parents[1] / "src" / "codemix" / "data" / "emoji_table.tsv"

_DIGITS = "zero one two three four five six seven eight nine".split()
_ALLOWED_TEXT = set("abcdefghijklmnopqrstuvwxyz0123456789 .,!?'#")


def phrase_for(short_name: str) -> str:
    text = short_name.strip(":").replace("_", " ")
    text = unicodedata.normalize("NFKD", text)
    text = "".join(c for c in text if not unicodedata.combining(c)).lower()
    text = re.sub(r"\d", lambda m: " " + _DIGITS[int(m.group())] + " ", text)
    text = re.sub(r"[^a-z ]", " ", text)
    return " ".join(text.split())


def main() -> int:
    rows = []
    for seq, info in emoji.EMOJI_DATA.items():
        # keys made only of ordinary text characters would break idempotence
        if all(c.lower() in _ALLOWED_TEXT or c.isalpha() for c in seq):
            continue
        phrase = phrase_for(info["en"])
        if phrase:
            rows.append((seq, phrase))
    rows.sort(key=lambda r: [ord(c) for c in r[0]])
    with OUT.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# emoji-table version {TABLE_VERSION}\n")
        fh.write(f"# source: Unicode CLDR short names via emoji {emoji.__version__}\n")
        fh.write("# format: <emoji sequence>\\t<phrase>\n")
        for seq, phrase in rows:
            fh.write(f"{seq}\t{phrase}\n")
    print(f"wrote {len(rows)} entries to {OUT}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
