"""Review text cleanup: emoji/asterisk stripping, contraction expansion,
whitespace collapsing.

The pipeline is idempotent: running it twice yields the same text. Order
matters for that guarantee: pictographs and asterisks are stripped before
contractions are expanded (removal can join fragments into a contraction),
and whitespace is collapsed last (removal can leave double spaces behind).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

from .errors import ValidationError

# Pictograph and emoji blocks stripped from reviews, plus the combining
# characters emoji sequences are built from (variation selectors, ZWJ).
EMOJI_RANGES: tuple[tuple[int, int], ...] = (
    (0x1F300, 0x1F5FF),  # Miscellaneous Symbols and Pictographs
    (0x1F600, 0x1F64F),  # Emoticons
    (0x1F680, 0x1F6FF),  # Transport and Map Symbols
    (0x1F900, 0x1F9FF),  # Supplemental Symbols and Pictographs
    (0x2700, 0x27BF),    # Dingbats
    (0xFE00, 0xFE0F),    # Variation Selectors
    (0x200D, 0x200D),    # Zero Width Joiner
)

_EMOJI_RE = re.compile(
    "[" + "".join(f"{chr(lo)}-{chr(hi)}" for lo, hi in EMOJI_RANGES) + "]"
)

# Curly single quotes normalize to an ASCII apostrophe so contractions
# typed either way hit the table.
_APOSTROPHE_RE = re.compile("[‘’]")

_WS_RE = re.compile(r"\s+")


def _collapse_ws(match: re.Match) -> str:
    return "\n" if "\n" in match.group() else " "


@dataclass(frozen=True)
class ContractionTable:
    """Ordered contraction -> expansion pairs, longest match first.

    The ordering invariant (no entry is a prefix of a later entry) makes a
    single alternation regex match the longest applicable contraction, and
    expansions are required to contain no contraction themselves so one
    pass is stable.
    """

    entries: tuple[tuple[str, str], ...]
    version: int = 1

    def __post_init__(self):
        lowered = [c.lower() for c, _ in self.entries]
        for i, c in enumerate(lowered):
            for later in lowered[i + 1:]:
                if later.startswith(c):
                    raise ValidationError(
                        f"contraction table entry {c!r} precedes {later!r}, "
                        "breaking longest-match-first ordering"
                    )
        pattern = self._pattern()
        for _, expansion in self.entries:
            if pattern.search(expansion):
                raise ValidationError(
                    f"expansion {expansion!r} itself contains a contraction"
                )

    def _pattern(self) -> re.Pattern:
        alternation = "|".join(re.escape(c) for c, _ in self.entries)
        return re.compile(rf"\b(?:{alternation})\b", re.IGNORECASE)

    def expand(self, text: str) -> str:
        """Replace table contractions at word boundaries, case-insensitively,
        carrying the matched word's leading-letter case onto the expansion."""
        lookup = {c.lower(): e for c, e in self.entries}

        def repl(match: re.Match) -> str:
            expansion = lookup[match.group().lower()]
            if match.group()[0].isupper():
                return expansion[0].upper() + expansion[1:]
            return expansion[0].lower() + expansion[1:]

        return self._pattern().sub(repl, text)


def load_contraction_table() -> ContractionTable:
    """Load the contraction table bundled with the package."""
    raw = resources.files("trailbot.data").joinpath("contractions.json").read_text("utf-8")
    data = json.loads(raw)
    return ContractionTable(
        entries=tuple((c, e) for c, e in data["entries"]),
        version=data["version"],
    )


_DEFAULT_TABLE: ContractionTable | None = None


def default_contraction_table() -> ContractionTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_contraction_table()
    return _DEFAULT_TABLE


def normalize_review_text(raw: str, table: ContractionTable | None = None) -> str:
    """Normalize one review.

    Strips pictograph/emoji codepoints and asterisks, expands table
    contractions, collapses horizontal whitespace runs to a single space and
    any run containing a newline to a single newline, and trims the ends.
    Empty output is legal when the input was all-removable.
    """
    if table is None:
        table = default_contraction_table()
    text = raw.replace("\r\n", "\n").replace("\r", "\n")
    text = _APOSTROPHE_RE.sub("'", text)
    text = _EMOJI_RE.sub("", text)
    text = text.replace("*", "")
    text = table.expand(text)
    text = _WS_RE.sub(_collapse_ws, text)
    return text.strip()
