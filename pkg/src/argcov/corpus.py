"""Corpus model: documents, role annotations, and salient-argument extraction.

Input corpora are JSONL, one document per line:

    {"doc_id": "...",
     "sentences": [{"idx": 0, "text": "...", "roles": ["issue"], "relevance": 5}],
     "reference_summaries": [{"system": "reference", "text": "..."}],
     "generated_summaries": [{"system": "modelA", "text": "..."}],
     "spans": [{"start": 0, "end": 17, "role": "issue"}]}

``relevance`` and ``spans`` are optional.  Summary records may optionally
carry their own ``sentences`` array (same shape as document sentences) when
summary-side role annotations exist; role-share statistics over summaries
are only reported in that case.

All text is normalized to Unicode NFC at load time.  A document's *plain
text* is the space-join of its sentence texts; span offsets refer to that
plain text.  A *word* is a maximal run of non-whitespace characters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateDocId,
    MalformedRecord,
    PolicyInapplicable,
    SpanOutOfBounds,
    UnknownRole,
)
from . import text as T


# --- roles and schemes --------------------------------------------------------


@dataclass(frozen=True, order=True)
class RoleLabel:
    """A role name qualified by the scheme that defines it."""

    name: str
    registry_id: str

    def __post_init__(self) -> None:
        if not self.name or self.name != self.name.strip().lower():
            raise ValueError(f"role names are lowercase and trimmed: {self.name!r}")


@dataclass(frozen=True)
class RoleScheme:
    """A closed set of role names under a scheme identifier."""

    scheme_id: str
    roles: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.roles:
            raise ValueError("a role scheme needs at least one role")
        if len(set(self.roles)) != len(self.roles):
            raise ValueError("duplicate role names in scheme")

    def label(self, name: str) -> RoleLabel:
        """Resolve ``name`` to a label, or raise :class:`UnknownRole`."""
        if name not in self.roles:
            raise UnknownRole(
                f"role {name!r} is not in scheme {self.scheme_id!r} "
                f"(known: {', '.join(self.roles)})"
            )
        return RoleLabel(name, self.scheme_id)

    @classmethod
    def from_file(cls, path: str | Path) -> "RoleScheme":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(scheme_id=data["scheme_id"], roles=tuple(data["roles"]))


#: Schemes shipped with the package: legal Issue/Reason/Conclusion sentence
#: roles and the scientific own-claim/background-claim/data component roles.
BUILTIN_SCHEMES: Mapping[str, RoleScheme] = {
    "irc": RoleScheme("irc", ("issue", "reason", "conclusion")),
    "sciarg": RoleScheme("sciarg", ("own_claim", "background_claim", "data")),
}


def get_scheme(scheme: "str | Path | RoleScheme") -> RoleScheme:
    """Resolve a scheme argument: an id of a built-in, a file path, or a scheme."""
    if isinstance(scheme, RoleScheme):
        return scheme
    if isinstance(scheme, Path) or (isinstance(scheme, str) and scheme.endswith(".json")):
        return RoleScheme.from_file(scheme)
    if scheme in BUILTIN_SCHEMES:
        return BUILTIN_SCHEMES[scheme]
    raise UnknownRole(f"unknown role scheme {scheme!r}")


# --- records ------------------------------------------------------------------


@dataclass(frozen=True)
class Sentence:
    idx: int
    text: str
    roles: frozenset[RoleLabel] = frozenset()
    relevance: int | None = None

    def __post_init__(self) -> None:
        if self.idx < 0:
            raise ValueError("sentence idx must be >= 0")
        if not self.text.strip():
            raise ValueError("sentence text must be non-empty")
        if self.relevance is not None and not 1 <= self.relevance <= 5:
            raise ValueError(f"relevance must be in 1..5, got {self.relevance}")


@dataclass(frozen=True)
class SummaryRecord:
    """A summary attributed to a producing system.

    ``word_count`` is derived from ``text``; use :meth:`make` instead of the
    raw constructor unless deserializing a value that already carries it.
    """

    system: str
    text: str
    word_count: int
    sentences: tuple[Sentence, ...] = ()

    def __post_init__(self) -> None:
        if not self.system:
            raise ValueError("summary system tag must be non-empty")
        if not self.text.strip():
            raise ValueError("summary text must be non-empty")
        if self.word_count != T.word_count(self.text):
            raise ValueError("word_count does not match text")

    @classmethod
    def make(
        cls, system: str, text: str, sentences: tuple[Sentence, ...] = ()
    ) -> "SummaryRecord":
        normalized = T.nfc(text)
        return cls(system, normalized, T.word_count(normalized), sentences)


@dataclass(frozen=True)
class SpanAnnotation:
    """A role-bearing character span over a document's plain text."""

    char_start: int
    char_end: int
    role: RoleLabel

    def __post_init__(self) -> None:
        if not 0 <= self.char_start < self.char_end:
            raise ValueError("span needs 0 <= start < end")


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    sentences: tuple[Sentence, ...]
    reference_summaries: tuple[SummaryRecord, ...] = ()
    generated_summaries: tuple[SummaryRecord, ...] = ()
    spans: tuple[SpanAnnotation, ...] = ()

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not self.sentences:
            raise ValueError("a document needs at least one sentence")
        indices = [s.idx for s in self.sentences]
        if indices != list(range(len(self.sentences))):
            raise ValueError("sentence indices must be contiguous from 0")
        end = len(self.plain_text())
        for span in self.spans:
            if span.char_end > end:
                raise SpanOutOfBounds(
                    f"{self.doc_id}: span [{span.char_start}, {span.char_end}) "
                    f"exceeds document length {end}"
                )

    def plain_text(self) -> str:
        """Sentence texts joined by single spaces."""
        return " ".join(s.text for s in self.sentences)

    def sentence_bounds(self) -> list[tuple[int, int]]:
        """Character range of each sentence within :meth:`plain_text`."""
        bounds = []
        offset = 0
        for s in self.sentences:
            bounds.append((offset, offset + len(s.text)))
            offset += len(s.text) + 1
        return bounds

    def word_count(self) -> int:
        return sum(T.word_count(s.text) for s in self.sentences)

    def summary(self, system: str) -> SummaryRecord:
        for rec in self.reference_summaries + self.generated_summaries:
            if rec.system == system:
                return rec
        raise KeyError(f"{self.doc_id}: no summary from system {system!r}")

    def with_generated(self, summary: SummaryRecord) -> "DocumentRecord":
        """Return a copy with ``summary`` added, replacing any same-system one."""
        kept = tuple(g for g in self.generated_summaries if g.system != summary.system)
        return replace(self, generated_summaries=kept + (summary,))


@dataclass(frozen=True)
class ArgumentUnit:
    """A salient argument: one role over one or more adjacent sentences."""

    arg_id: str
    doc_id: str
    role: RoleLabel
    text: str
    sentence_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.sentence_indices:
            raise ValueError("an argument unit covers at least one sentence")
        if list(self.sentence_indices) != sorted(set(self.sentence_indices)):
            raise ValueError("sentence_indices must be strictly increasing")
        if not self.text.strip():
            raise ValueError("argument text must be non-empty")

    def word_count(self) -> int:
        return T.word_count(self.text)


# --- saliency policies ----------------------------------------------------------


@dataclass(frozen=True)
class SaliencyPolicy:
    """Which sentences count as salient arguments.

    * ``all_roles``: every maximal run of adjacent sentences sharing a role
      becomes one unit (role annotations mark whole arguments, which may
      span sentences).
    * ``role_sentences_only``: one unit per (sentence, role), no merging.
    * ``relevance_eq``: one unit per (sentence, role) among sentences whose
      relevance score equals ``relevance``.
    * ``greedy_reference``: not an extraction policy; position analyses use
      it to mean "sentences greedily attributed to the reference summary".
    """

    kind: str
    relevance: int | None = None

    def __post_init__(self) -> None:
        kinds = {"all_roles", "role_sentences_only", "relevance_eq", "greedy_reference"}
        if self.kind not in kinds:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if (self.kind == "relevance_eq") != (self.relevance is not None):
            raise ValueError("relevance_eq takes a relevance level; others do not")


ALL_ROLES = SaliencyPolicy("all_roles")
ROLE_SENTENCES_ONLY = SaliencyPolicy("role_sentences_only")
GREEDY_REFERENCE = SaliencyPolicy("greedy_reference")


def relevance_eq(level: int) -> SaliencyPolicy:
    return SaliencyPolicy("relevance_eq", level)


def parse_policy(value: str) -> SaliencyPolicy:
    """Parse a policy from its CLI spelling, e.g. ``relevance_eq:5``."""
    if value.startswith("relevance_eq:"):
        return relevance_eq(int(value.split(":", 1)[1]))
    return SaliencyPolicy(value)


# --- loading and serialization ----------------------------------------------


def _parse_sentence(obj: object, scheme: RoleScheme) -> Sentence:
    if not isinstance(obj, dict):
        raise ValueError("sentence entries must be objects")
    roles = frozenset(scheme.label(r) for r in obj.get("roles", []))
    relevance = obj.get("relevance")
    if relevance is not None and not isinstance(relevance, int):
        raise ValueError("relevance must be an integer")
    return Sentence(
        idx=obj["idx"],
        text=T.nfc(obj["text"]),
        roles=roles,
        relevance=relevance,
    )


def _parse_summary(obj: object, scheme: RoleScheme) -> SummaryRecord:
    if not isinstance(obj, dict):
        raise ValueError("summary entries must be objects")
    sentences = tuple(_parse_sentence(s, scheme) for s in obj.get("sentences", []))
    return SummaryRecord.make(obj["system"], obj["text"], sentences)


def _parse_record(obj: object, scheme: RoleScheme) -> DocumentRecord:
    if not isinstance(obj, dict):
        raise ValueError("record must be a JSON object")
    for key in ("doc_id", "sentences"):
        if key not in obj:
            raise ValueError(f"record is missing {key!r}")
    sentences = tuple(_parse_sentence(s, scheme) for s in obj["sentences"])
    refs = tuple(_parse_summary(s, scheme) for s in obj.get("reference_summaries", []))
    gens = tuple(_parse_summary(s, scheme) for s in obj.get("generated_summaries", []))
    spans = tuple(
        SpanAnnotation(sp["start"], sp["end"], scheme.label(sp["role"]))
        for sp in obj.get("spans", [])
    )
    return DocumentRecord(obj["doc_id"], sentences, refs, gens, spans)


def load_corpus(path: str | Path, scheme: "str | Path | RoleScheme") -> list[DocumentRecord]:
    """Load a JSONL corpus, validating every record against ``scheme``.

    Raises :class:`MalformedRecord` (with the 1-based line number) on shape
    errors, :class:`UnknownRole` on out-of-scheme role names, and
    :class:`DuplicateDocId` when two lines share an id.
    """
    scheme = get_scheme(scheme)
    docs: list[DocumentRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(lineno, f"invalid JSON: {exc.msg}") from exc
            try:
                doc = _parse_record(obj, scheme)
            except (UnknownRole, SpanOutOfBounds):
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedRecord(lineno, str(exc)) from exc
            if doc.doc_id in seen:
                raise DuplicateDocId(f"line {lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            docs.append(doc)
    return docs


def _sentence_to_json(s: Sentence) -> dict:
    obj: dict = {"idx": s.idx, "text": s.text, "roles": sorted(r.name for r in s.roles)}
    if s.relevance is not None:
        obj["relevance"] = s.relevance
    return obj


def _summary_to_json(s: SummaryRecord) -> dict:
    obj: dict = {"system": s.system, "text": s.text}
    if s.sentences:
        obj["sentences"] = [_sentence_to_json(x) for x in s.sentences]
    return obj


def document_to_json(doc: DocumentRecord) -> dict:
    obj: dict = {
        "doc_id": doc.doc_id,
        "sentences": [_sentence_to_json(s) for s in doc.sentences],
        "reference_summaries": [_summary_to_json(s) for s in doc.reference_summaries],
        "generated_summaries": [_summary_to_json(s) for s in doc.generated_summaries],
    }
    if doc.spans:
        obj["spans"] = [
            {"start": sp.char_start, "end": sp.char_end, "role": sp.role.name}
            for sp in doc.spans
        ]
    return obj


def serialize_corpus(docs: Iterable[DocumentRecord], path: str | Path) -> None:
    """Write JSONL that :func:`load_corpus` reads back to equal records."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for doc in docs:
            handle.write(json.dumps(document_to_json(doc), ensure_ascii=False))
            handle.write("\n")


# --- span mapping ----------------------------------------------------------------


def map_spans_to_sentences(
    doc: DocumentRecord, spans: Sequence[SpanAnnotation]
) -> list[tuple[int, RoleLabel]]:
    """Project character spans onto sentences by strict word-majority.

    A sentence receives a span's role iff strictly more than half of the
    span's words belong to it, where a word belongs to the sentence whose
    character range contains the word's midpoint.  At most one sentence can
    win a given span; spans whose words split evenly assign nothing.
    """
    plain = doc.plain_text()
    bounds = doc.sentence_bounds()
    out: list[tuple[int, RoleLabel]] = []
    seen: set[tuple[int, str]] = set()
    for span in spans:
        if span.char_end > len(plain):
            raise SpanOutOfBounds(
                f"{doc.doc_id}: span [{span.char_start}, {span.char_end}) "
                f"exceeds document length {len(plain)}"
            )
        word_ranges = [
            (span.char_start + a, span.char_start + b)
            for a, b in T.word_spans(plain[span.char_start : span.char_end])
        ]
        total = len(word_ranges)
        if total == 0:
            continue
        for idx, (lo, hi) in enumerate(bounds):
            # midpoint (ws+we)/2 in [lo, hi) without leaving integer arithmetic
            inside = sum(1 for ws, we in word_ranges if 2 * lo <= ws + we < 2 * hi)
            if 2 * inside > total:
                key = (idx, span.role.name)
                if key not in seen:
                    seen.add(key)
                    out.append((idx, span.role))
                break
    return out


# --- salient-argument extraction ---------------------------------------------


def _unit(doc: DocumentRecord, role: RoleLabel, indices: Sequence[int]) -> ArgumentUnit:
    body = T.normalize_ws(" ".join(doc.sentences[i].text for i in indices))
    return ArgumentUnit(
        arg_id=f"{doc.doc_id}:{role.name}:{indices[0]}",
        doc_id=doc.doc_id,
        role=role,
        text=body,
        sentence_indices=tuple(indices),
    )


def extract_salient(doc: DocumentRecord, policy: SaliencyPolicy) -> list[ArgumentUnit]:
    """Extract the document's salient argument units under ``policy``.

    Output is ordered by (first sentence index, role name).  Raises
    :class:`PolicyInapplicable` when the policy cannot be evaluated: a
    relevance policy on a document with no relevance scores at all, or the
    ``greedy_reference`` pseudo-policy, which extracts nothing by itself.
    """
    if policy.kind == "greedy_reference":
        raise PolicyInapplicable(
            "greedy_reference attributes summaries to sentences; "
            "it does not extract argument units"
        )
    if policy.kind == "relevance_eq":
        if all(s.relevance is None for s in doc.sentences):
            raise PolicyInapplicable(
                f"{doc.doc_id}: no sentence carries a relevance score"
            )
        picked = [
            (s.idx, role)
            for s in doc.sentences
            if s.relevance == policy.relevance
            for role in sorted(s.roles)
        ]
        return [_unit(doc, role, [idx]) for idx, role in picked]
    if policy.kind == "role_sentences_only":
        picked = [(s.idx, role) for s in doc.sentences for role in sorted(s.roles)]
        return [_unit(doc, role, [idx]) for idx, role in picked]

    # all_roles: merge maximal runs of adjacent sentences sharing the role.
    roles = sorted({r for s in doc.sentences for r in s.roles})
    units: list[ArgumentUnit] = []
    for role in roles:
        run: list[int] = []
        for s in doc.sentences:
            if role in s.roles:
                if run and s.idx != run[-1] + 1:
                    units.append(_unit(doc, role, run))
                    run = []
                run.append(s.idx)
            elif run:
                units.append(_unit(doc, role, run))
                run = []
        if run:
            units.append(_unit(doc, role, run))
    units.sort(key=lambda u: (u.sentence_indices[0], u.role.name))
    return units


# --- corpus statistics ------------------------------------------------------------


@dataclass(frozen=True)
class CorpusStats:
    """Descriptive statistics over a corpus; fractions are exact."""

    docs: int
    input_len_min: int
    input_len_mean: Fraction
    input_len_max: int
    summary_len_min: int
    summary_len_mean: Fraction
    summary_len_max: int
    pct_roles_input: Fraction
    pct_roles_summary: Fraction | None = None


def _role_word_share(sentence_groups: Iterable[Sequence[Sentence]]) -> Fraction:
    role_words = 0
    total_words = 0
    for sentences in sentence_groups:
        for s in sentences:
            n = T.word_count(s.text)
            total_words += n
            if s.roles:
                role_words += n
    if total_words == 0:
        raise ValueError("no words to take a share over")
    return Fraction(role_words, total_words) * 100


def corpus_stats(docs: Sequence[DocumentRecord]) -> CorpusStats:
    """Word-count and role-share statistics.

    Summary lengths range over reference summaries.  The summary-side role
    share is only available when at least one reference summary carries
    sentence annotations; otherwise it is ``None``.
    """
    if not docs:
        raise ValueError("empty corpus")
    input_lens = [doc.word_count() for doc in docs]
    summary_lens = [s.word_count for doc in docs for s in doc.reference_summaries]
    if not summary_lens:
        raise ValueError("no reference summaries in corpus")
    annotated = [
        s.sentences for doc in docs for s in doc.reference_summaries if s.sentences
    ]
    return CorpusStats(
        docs=len(docs),
        input_len_min=min(input_lens),
        input_len_mean=Fraction(sum(input_lens), len(input_lens)),
        input_len_max=max(input_lens),
        summary_len_min=min(summary_lens),
        summary_len_mean=Fraction(sum(summary_lens), len(summary_lens)),
        summary_len_max=max(summary_lens),
        pct_roles_input=_role_word_share([doc.sentences for doc in docs]),
        pct_roles_summary=_role_word_share(annotated) if annotated else None,
    )
