"""Tokenization and normalization helpers.

Three token vocabularies coexist in this package and must not be mixed up:

* *words*: maximal runs of non-whitespace after Unicode NFC normalization.
  Used for word counts, span mapping, and length controls.
* *overlap tokens*: lowercased words with punctuation characters removed.
  Used by the ROUGE-1 overlap measure (no stemming, no stopword removal).
* *content tokens*: overlap tokens minus stopwords, reduced by a crude
  suffix-stripping stemmer.  Used by the deterministic lexical judge.
"""
from __future__ import annotations

import re
import unicodedata

_WORD_RE = re.compile(r"\S+")
_PUNCT_RE = re.compile(r"[^\w\s]")

# Small closed-class vocabulary; enough to make the lexical judge behave
# sensibly on English fixtures. Not intended as a linguistic resource.
STOPWORDS = frozenset(
    """
    a an the this that these those there here
    i you he she it we they me him her us them my your his its our their
    is are was were be been being am
    do does did done have has had having
    will would shall should can could may might must
    and or but nor so yet if then than as
    to of in on at by for with from into onto over under about against
    between through during before after above below up down out off
    not no any all both each few more most other some such only own same
    too very just when where which who whom what how while
    """.split()
)

_SUFFIXES = ("ing", "edly", "ed", "es", "ly", "s")


def nfc(text: str) -> str:
    """Return ``text`` in Unicode NFC form."""
    return unicodedata.normalize("NFC", text)


def words(text: str) -> list[str]:
    """Split into words: maximal non-whitespace runs after NFC normalization."""
    return _WORD_RE.findall(nfc(text))


def word_count(text: str) -> int:
    return len(words(text))


def word_spans(text: str) -> list[tuple[int, int]]:
    """Character ranges of each word in ``text``.

    Offsets refer to ``text`` exactly as given; callers that need NFC
    semantics must normalize before computing offsets.
    """
    return [(m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def normalize_ws(text: str) -> str:
    """Collapse internal whitespace runs to single spaces and trim."""
    return " ".join(nfc(text).split())


def stem(token: str) -> str:
    """Strip one common English suffix, keeping at least 3 characters.

    This is a determinism device, not morphology: the only requirement is
    that related surface forms ("dismissed"/"dismisses") collapse to the
    same key when both sides of a comparison run through it.
    """
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            return token[: -len(suffix)]
    return token


def overlap_tokens(text: str) -> list[str]:
    """Lowercased, punctuation-stripped tokens; the ROUGE-1 vocabulary."""
    cleaned = _PUNCT_RE.sub("", nfc(text).lower())
    return cleaned.split()


def content_tokens(text: str) -> list[str]:
    """Stemmed, stopword-free tokens used by the lexical judge."""
    return [stem(t) for t in overlap_tokens(text) if t not in STOPWORDS]


def content_token_set(text: str) -> frozenset[str]:
    return frozenset(content_tokens(text))
