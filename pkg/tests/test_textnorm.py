import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trailbot.errors import ValidationError
from trailbot.textnorm import (
    EMOJI_RANGES,
    ContractionTable,
    default_contraction_table,
    load_contraction_table,
    normalize_review_text,
)

# Independent character-class oracle: the same forbidden ranges declared
# directly, used only to cross-check the implementation's regex.
FORBIDDEN = [
    (0x1F300, 0x1F5FF), (0x1F600, 0x1F64F), (0x1F680, 0x1F6FF),
    (0x1F900, 0x1F9FF), (0x2700, 0x27BF), (0xFE00, 0xFE0F), (0x200D, 0x200D),
]


def contains_forbidden(text: str) -> bool:
    return any(
        lo <= ord(ch) <= hi for ch in text for lo, hi in FORBIDDEN
    ) or "*" in text


def oracle_strip(text: str) -> str:
    """Character-class oracle: strip forbidden codepoints and asterisks,
    collapse whitespace the declared way."""
    kept = "".join(
        ch for ch in text
        if ch != "*" and not any(lo <= ord(ch) <= hi for lo, hi in FORBIDDEN)
    )
    kept = kept.replace("\r\n", "\n").replace("\r", "\n")
    kept = re.sub(r"\s+", lambda m: "\n" if "\n" in m.group() else " ", kept)
    return kept.strip()


def test_ranges_match_declared_constant():
    assert tuple(FORBIDDEN) == EMOJI_RANGES


def test_contraction_from_cleaning_rules():
    # "I've" -> "I have" with the emoji stripped
    assert normalize_review_text("I've hiked here ❤️") == "I have hiked here"


def test_already_normalized_is_identity():
    assert normalize_review_text("plain sentence") == "plain sentence"


def test_asterisks_blank_lines_emoji_and_contraction():
    raw = "Great***   trail\n\n\nDon't miss it \U0001F436"
    want = "Great trail\nDo not miss it"
    assert normalize_review_text(raw) == want
    # cross-check the removal part with the character-class oracle
    assert oracle_strip(raw.replace("Don't", "Do not")) == want


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("don't", "do not"),
        ("Don't", "Do not"),
        ("DON'T", "Do not"),
        ("it’s fine", "it is fine"),  # curly apostrophe
        ("WON'T budge", "Will not budge"),
        ("y'all come back", "you all come back"),
    ],
)
def test_contraction_case_handling(raw, expected):
    assert normalize_review_text(raw) == expected


def test_whitespace_policy():
    assert normalize_review_text("a\t\tb  c") == "a b c"
    assert normalize_review_text("a \n \n\n b") == "a\nb"
    assert normalize_review_text("  padded  ") == "padded"
    assert normalize_review_text("a\r\nb\rc") == "a\nb\nc"


def test_all_removable_input_gives_empty():
    assert normalize_review_text("\U0001F600\U0001F680 ** ❤️") == ""


def test_table_invariants_enforced():
    with pytest.raises(ValidationError):
        # prefix precedes its extension: breaks longest-match-first
        ContractionTable(entries=(("can't", "cannot"), ("can't've", "cannot have")))
    with pytest.raises(ValidationError):
        # expansion contains a table contraction: not one-pass stable
        ContractionTable(entries=(("it's", "it's really"),))


def test_bundled_table_roundtrips_every_entry():
    table = load_contraction_table()
    assert len(table.entries) >= 40
    assert ("I've", "I have") in table.entries
    for contraction, expansion in table.entries:
        if contraction[0].isupper():
            expected = expansion[0].upper() + expansion[1:]
        else:
            expected = expansion[0].lower() + expansion[1:]
        normalized = normalize_review_text(f"well {contraction} indeed", table)
        assert normalized == f"well {expected} indeed"
        # expansions never re-normalize into something else
        assert normalize_review_text(expansion, table) == expansion


# Fuzz alphabet biased toward the interesting codepoints.
_fuzz_chars = st.one_of(
    st.characters(),
    st.sampled_from("*  \n\n\t'"),
    st.sampled_from("❤️\U0001F436\U0001F600\U0001F680\U0001F97E‍"),
    st.sampled_from(["don't", "I've", "it's", "WON'T"]),
)
_fuzz_text = st.lists(_fuzz_chars, max_size=40).map("".join)


@settings(max_examples=300, deadline=None)
@given(_fuzz_text)
def test_idempotent_and_clean(text):
    once = normalize_review_text(text)
    assert normalize_review_text(once) == once
    assert not contains_forbidden(once)


@settings(max_examples=300, deadline=None)
@given(_fuzz_text)
def test_contraction_closure(text):
    table = default_contraction_table()
    once = normalize_review_text(text)
    for contraction, _ in table.entries:
        assert not re.search(
            rf"\b{re.escape(contraction)}\b", once, flags=re.IGNORECASE
        ), (text, once, contraction)
