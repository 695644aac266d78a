"""Positional analysis: where in the input do covered arguments live?

Summary content is attributed to source sentences by greedy selection:
repeatedly add the sentence that most improves ROUGE-1 F1 between the
selected sentences and the summary, stopping when no sentence strictly
improves it.  Selected-sentence positions are normalized to [0, 1] and
binned into a ten-bucket profile, overall and per role, which makes
lead/tail concentration visible.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .corpus import (
    ArgumentUnit,
    DocumentRecord,
    SaliencyPolicy,
    Sentence,
    SummaryRecord,
    extract_salient,
)
from .errors import IndexOutOfRange, NoSalientArguments
from . import text as T

N_BINS = 10


def _f1(overlap: int, candidate_total: int, target_total: int) -> float:
    if overlap == 0 or candidate_total == 0 or target_total == 0:
        return 0.0
    precision = overlap / candidate_total
    recall = overlap / target_total
    return 2 * precision * recall / (precision + recall)


def rouge1(candidate: str, target: str) -> float:
    """Unigram-overlap F1 with clipped multiset counts.

    Tokens are lowercased with punctuation stripped; no stemming and no
    stopword removal.  Symmetric in precision and recall, 1.0 only when
    the token multisets coincide, 0.0 on disjoint vocabulary.
    """
    cand = Counter(T.overlap_tokens(candidate))
    targ = Counter(T.overlap_tokens(target))
    overlap = sum(min(count, targ[token]) for token, count in cand.items())
    return _f1(overlap, sum(cand.values()), sum(targ.values()))


@dataclass(frozen=True)
class AttributionResult:
    """Greedy attribution of one summary to source sentences."""

    doc_id: str
    summary_system: str
    selected_indices: tuple[int, ...]
    final_rouge1: float
    step_scores: tuple[float, ...]


def greedy_select(
    sentences: Sequence[Sentence],
    target: SummaryRecord,
    restrict_to: Iterable[int] | None = None,
    doc_id: str = "",
) -> AttributionResult:
    """Select source sentences that greedily maximize ROUGE-1 to ``target``.

    Each step adds the sentence giving the largest strict improvement of
    ROUGE-1 between the concatenated selection and the summary (ties go to
    the lowest sentence index); selection stops when nothing improves.
    Only indices in ``restrict_to`` (all, if None) are candidates, so
    sentences outside it cannot influence the outcome.
    """
    allowed = sorted(
        {s.idx for s in sentences} if restrict_to is None else set(restrict_to)
    )
    by_idx = {s.idx: s for s in sentences}
    for idx in allowed:
        if idx not in by_idx:
            raise IndexOutOfRange(f"restrict_to index {idx} not in document")

    target_counts = Counter(T.overlap_tokens(target.text))
    target_total = sum(target_counts.values())
    sentence_counts = {idx: Counter(T.overlap_tokens(by_idx[idx].text)) for idx in allowed}

    selected: list[int] = []
    selected_counts: Counter[str] = Counter()
    step_scores: list[float] = []
    current = 0.0
    while True:
        best_idx = -1
        best_score = current
        for idx in allowed:
            if idx in selected:
                continue
            merged = selected_counts + sentence_counts[idx]
            overlap = sum(min(count, target_counts[token]) for token, count in merged.items())
            score = _f1(overlap, sum(merged.values()), target_total)
            if score > best_score:
                best_score = score
                best_idx = idx
        if best_idx < 0:
            break
        selected.append(best_idx)
        selected_counts += sentence_counts[best_idx]
        step_scores.append(best_score)
        current = best_score
    return AttributionResult(
        doc_id=doc_id,
        summary_system=target.system,
        selected_indices=tuple(selected),
        final_rouge1=step_scores[-1] if step_scores else 0.0,
        step_scores=tuple(step_scores),
    )


def relative_position(idx: int, n: int) -> float:
    """Normalize sentence index to [0, 1]; a single-sentence document is 0.5."""
    if n < 1 or not 0 <= idx < n:
        raise IndexOutOfRange(f"index {idx} out of range for {n} sentences")
    if n == 1:
        return 0.5
    return idx / (n - 1)


def position_bin(idx: int, n: int) -> int:
    """Histogram bin of a relative position, computed in exact arithmetic.

    Bins are [0, 0.1), ..., [0.8, 0.9), [0.9, 1.0]; the top bin is closed.
    """
    if n < 1 or not 0 <= idx < n:
        raise IndexOutOfRange(f"index {idx} out of range for {n} sentences")
    if n == 1:
        return N_BINS // 2
    return min((N_BINS * idx) // (n - 1), N_BINS - 1)


@dataclass(frozen=True)
class PositionProfile:
    """Positions plus their ten-bin histogram; counts sum to len(positions)."""

    positions: tuple[float, ...]
    histogram: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.histogram) != N_BINS:
            raise ValueError(f"histogram must have {N_BINS} bins")
        if sum(self.histogram) != len(self.positions):
            raise ValueError("histogram counts must sum to the position count")

    @property
    def mean_position(self) -> float:
        if not self.positions:
            raise NoSalientArguments("profile holds no positions")
        return sum(self.positions) / len(self.positions)

    def bin_share(self, bin_index: int) -> Fraction:
        if not self.positions:
            return Fraction(0)
        return Fraction(self.histogram[bin_index], len(self.positions))


def position_profile(
    items: Iterable[tuple[int, int, str | None]]
) -> dict[str, PositionProfile]:
    """Build per-role profiles from (sentence idx, doc length, role) items.

    Returns a profile per role name plus an ``overall`` profile covering
    every item once (role None contributes only to ``overall``).  Input
    order does not matter; positions are sorted within each profile.
    """
    grouped: dict[str, list[tuple[float, int]]] = {"overall": []}
    for idx, n, role in items:
        entry = (relative_position(idx, n), position_bin(idx, n))
        grouped["overall"].append(entry)
        if role is not None:
            grouped.setdefault(role, []).append(entry)
    out: dict[str, PositionProfile] = {}
    for name, entries in grouped.items():
        entries.sort()
        histogram = [0] * N_BINS
        for _, b in entries:
            histogram[b] += 1
        out[name] = PositionProfile(
            positions=tuple(p for p, _ in entries), histogram=tuple(histogram)
        )
    return out


def unit_positions(doc: DocumentRecord, units: Sequence[ArgumentUnit]) -> list[float]:
    """Relative position of each unit: mean over its sentences."""
    n = len(doc.sentences)
    out = []
    for unit in units:
        positions = [relative_position(i, n) for i in unit.sentence_indices]
        out.append(sum(positions) / len(positions))
    return out


def mean_salient_position(doc: DocumentRecord, policy: SaliencyPolicy) -> float:
    """Average relative position of the document's salient content.

    Extraction policies average over their argument units.  The
    ``greedy_reference`` policy instead attributes each reference summary
    to role-bearing sentences by greedy selection and pools the selected
    positions over all references.  Raises :class:`NoSalientArguments`
    when nothing qualifies.
    """
    n = len(doc.sentences)
    if policy.kind == "greedy_reference":
        role_indices = [s.idx for s in doc.sentences if s.roles]
        positions: list[float] = []
        if role_indices:
            for reference in doc.reference_summaries:
                result = greedy_select(
                    doc.sentences, reference, restrict_to=role_indices, doc_id=doc.doc_id
                )
                positions.extend(relative_position(i, n) for i in result.selected_indices)
        if not positions:
            raise NoSalientArguments(f"{doc.doc_id}: greedy attribution selected nothing")
        return sum(positions) / len(positions)
    units = extract_salient(doc, policy)
    if not units:
        raise NoSalientArguments(f"{doc.doc_id}: no salient units under {policy.kind}")
    positions = unit_positions(doc, units)
    return sum(positions) / len(positions)
