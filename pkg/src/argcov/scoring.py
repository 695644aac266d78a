"""Coverage scores over salient arguments, at three granularities.

All scores live in [0, 1] and are kept as exact rationals until rendered,
so aggregation order cannot perturb output bytes:

* *fullset*: one Likert rating of how well the summary covers the whole
  argument set, mapped to (rating - 1) / 3.
* *role*: one binary covered/not-covered decision per argument, averaged.
* *atomic*: per argument, the fraction of its atomic facts the summary
  supports; the per-argument fractions are then averaged, so every
  argument weighs equally regardless of how many facts it split into.

Items the judge never produced a usable verdict for are *unjudged*: they
are excluded from denominators and reported, never silently scored as 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .corpus import ArgumentUnit, SummaryRecord
from .decompose import FactSet
from .errors import (
    EmptyArgumentSet,
    NoArgumentsOfRole,
    OutOfRangeLikert,
    UnparseableVerdict,
)
from .judge import (
    CallBudget,
    JudgeBackend,
    TokenBucket,
    Verdict,
    VerdictCache,
    judge_call,
)

ERROR_TYPES = ("supported", "missing", "not_factual")


def phi_fullset(likert: int) -> Fraction:
    """Map a 1..4 coverage rating onto [0, 1]: (rating - 1) / 3."""
    if likert not in (1, 2, 3, 4):
        raise OutOfRangeLikert(f"rating must be in 1..4, got {likert!r}")
    return Fraction(likert - 1, 3)


def arc_role_score(decisions: Sequence[int]) -> Fraction:
    """Mean of binary per-argument decisions."""
    if not decisions:
        raise EmptyArgumentSet("no argument decisions to average")
    if any(d not in (0, 1) for d in decisions):
        raise ValueError("role decisions must be 0 or 1")
    return Fraction(sum(decisions), len(decisions))


def arc_atomic_score(decisions_by_arg: Mapping[str, Sequence[int]]) -> Fraction:
    """Macro-average over arguments of each argument's fact-support rate."""
    if not decisions_by_arg:
        raise EmptyArgumentSet("no arguments to average")
    total = Fraction(0)
    for arg_id, decisions in decisions_by_arg.items():
        if not decisions:
            raise EmptyArgumentSet(f"argument {arg_id} has no judged facts")
        if any(d not in (0, 1) for d in decisions):
            raise ValueError("fact decisions must be 0 or 1")
        total += Fraction(sum(decisions), len(decisions))
    return total / len(decisions_by_arg)


def format_score(value: Fraction | None, places: int = 4) -> str:
    """Render an exact rational with fixed decimals (ties to even); '' for None."""
    if value is None:
        return ""
    scaled = value * 10**places
    rounded = round(scaled)
    sign = "-" if rounded < 0 else ""
    int_part, frac_part = divmod(abs(rounded), 10**places)
    return f"{sign}{int_part}.{frac_part:0{places}d}"


# --- judged outcomes ---------------------------------------------------------


@dataclass(frozen=True)
class RoleDecision:
    arg_id: str
    decision: int
    explanation: str = ""


@dataclass(frozen=True)
class FactVerdict:
    fact_id: str
    arg_id: str
    decision: int
    error_type: str
    explanation: str = ""

    def __post_init__(self) -> None:
        if self.error_type not in ERROR_TYPES:
            raise ValueError(f"unknown error type {self.error_type!r}")
        if (self.decision == 1) != (self.error_type == "supported"):
            raise ValueError("decision and error type disagree")


@dataclass(frozen=True)
class VerdictRecord:
    """One judged item, addressable for replacement on re-judging."""

    target: str
    summary_system: str
    verdict: Verdict
    judged_by: str


class VerdictLog:
    """Keyed store of judged items; re-adding a key replaces the record."""

    def __init__(self) -> None:
        self._records: dict[tuple[str, str, str], VerdictRecord] = {}

    def add(self, record: VerdictRecord) -> None:
        self._records[(record.target, record.summary_system, record.judged_by)] = record

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(sorted(self._records.values(), key=lambda r: (r.target, r.summary_system)))


# --- judged scoring ------------------------------------------------------------


@dataclass(frozen=True)
class FullsetResult:
    score: Fraction
    rating: int
    explanation: str = ""


@dataclass(frozen=True)
class RoleScoreResult:
    score: Fraction | None
    decisions: tuple[RoleDecision, ...]
    unjudged: tuple[str, ...] = ()


@dataclass(frozen=True)
class AtomicScoreResult:
    score: Fraction | None
    verdicts: tuple[FactVerdict, ...]
    unjudged: tuple[str, ...] = ()


def render_argument_block(args: Sequence[ArgumentUnit]) -> str:
    """One argument per line, prefixed by role, for the fullset prompt."""
    return "\n".join(f"{arg.role.name}: {arg.text}" for arg in args)


def score_fullset(
    args: Sequence[ArgumentUnit],
    summary: SummaryRecord,
    backend: JudgeBackend,
    *,
    cache: VerdictCache | None = None,
    budget: CallBudget | None = None,
    limiter: TokenBucket | None = None,
) -> FullsetResult:
    """Judge coverage of the whole argument set with one Likert rating."""
    if not args:
        raise EmptyArgumentSet("cannot rate coverage of zero arguments")
    verdict = judge_call(
        backend,
        "fullset",
        {
            "reference_arguments": render_argument_block(args),
            "generated_summary": summary.text,
        },
        cache=cache,
        budget=budget,
        limiter=limiter,
    )
    assert verdict.rating is not None
    return FullsetResult(
        score=phi_fullset(verdict.rating),
        rating=verdict.rating,
        explanation=verdict.explanation,
    )


def score_role(
    args: Sequence[ArgumentUnit],
    summary: SummaryRecord,
    backend: JudgeBackend,
    *,
    cache: VerdictCache | None = None,
    budget: CallBudget | None = None,
    limiter: TokenBucket | None = None,
) -> RoleScoreResult:
    """Judge each argument's coverage independently and average.

    Arguments whose verdicts stay unparseable are reported in ``unjudged``
    and excluded from the mean; the score is None only if nothing parsed.
    """
    if not args:
        raise EmptyArgumentSet("no arguments to judge")
    decisions: list[RoleDecision] = []
    unjudged: list[str] = []
    for arg in args:
        try:
            verdict = judge_call(
                backend,
                "role",
                {"argument": arg.text, "summary": summary.text},
                cache=cache,
                budget=budget,
                limiter=limiter,
            )
        except (UnparseableVerdict, OutOfRangeLikert):
            unjudged.append(arg.arg_id)
            continue
        assert verdict.decision is not None
        decisions.append(RoleDecision(arg.arg_id, verdict.decision, verdict.explanation))
    score = (
        arc_role_score([d.decision for d in decisions]) if decisions else None
    )
    return RoleScoreResult(score=score, decisions=tuple(decisions), unjudged=tuple(unjudged))


def score_atomic(
    factset: FactSet,
    summary: SummaryRecord,
    backend: JudgeBackend,
    *,
    cache: VerdictCache | None = None,
    budget: CallBudget | None = None,
    limiter: TokenBucket | None = None,
) -> AtomicScoreResult:
    """Judge each atomic fact against the summary; nest means per argument.

    Unjudged facts drop out of their argument's denominator; an argument
    with no judged facts drops out of the outer mean.  Both are reported.
    """
    if not factset.facts:
        raise EmptyArgumentSet("fact set is empty")
    verdicts: list[FactVerdict] = []
    unjudged: list[str] = []
    decisions_by_arg: dict[str, list[int]] = {}
    for arg_id in sorted(factset.facts):
        for fact in factset.facts[arg_id]:
            try:
                verdict = judge_call(
                    backend,
                    "atomic",
                    {"argument": fact.text, "summary": summary.text},
                    cache=cache,
                    budget=budget,
                    limiter=limiter,
                )
            except (UnparseableVerdict, OutOfRangeLikert):
                unjudged.append(fact.fact_id)
                continue
            assert verdict.decision is not None and verdict.error_type is not None
            verdicts.append(
                FactVerdict(
                    fact_id=fact.fact_id,
                    arg_id=arg_id,
                    decision=verdict.decision,
                    error_type=verdict.error_type,
                    explanation=verdict.explanation,
                )
            )
            decisions_by_arg.setdefault(arg_id, []).append(verdict.decision)
    score = arc_atomic_score(decisions_by_arg) if decisions_by_arg else None
    return AtomicScoreResult(score=score, verdicts=tuple(verdicts), unjudged=tuple(unjudged))


# --- aggregation ----------------------------------------------------------------


@dataclass(frozen=True)
class ErrorDistribution:
    """Counts and shares of atomic verdict outcomes; shares are of all judged facts."""

    supported: int
    missing: int
    not_factual: int

    @property
    def total(self) -> int:
        return self.supported + self.missing + self.not_factual

    def share(self, error_type: str) -> Fraction:
        if error_type not in ERROR_TYPES:
            raise ValueError(f"unknown error type {error_type!r}")
        if self.total == 0:
            return Fraction(0)
        return Fraction(getattr(self, error_type), self.total)


def aggregate_errors(verdicts: Iterable[FactVerdict]) -> ErrorDistribution:
    counts = {name: 0 for name in ERROR_TYPES}
    for verdict in verdicts:
        counts[verdict.error_type] += 1
    return ErrorDistribution(**counts)


def per_role_atomic(factset: FactSet, verdicts: Iterable[FactVerdict], role: str) -> Fraction:
    """Recompute the atomic score over arguments of one role only.

    Role membership comes from ``factset.arg_roles`` (attach roles after
    loading a fact file).  Raises :class:`NoArgumentsOfRole` when the role
    has no judged arguments.
    """
    decisions_by_arg: dict[str, list[int]] = {}
    for verdict in verdicts:
        if factset.arg_roles.get(verdict.arg_id) == role:
            decisions_by_arg.setdefault(verdict.arg_id, []).append(verdict.decision)
    if not decisions_by_arg:
        raise NoArgumentsOfRole(f"no judged arguments with role {role!r}")
    return arc_atomic_score(decisions_by_arg)


@dataclass(frozen=True)
class ScoreCard:
    """All coverage results for one (document, summary system) pair."""

    doc_id: str
    summary_system: str
    arc_fullset: Fraction | None
    arc_role: Fraction | None
    arc_atomic: Fraction | None
    per_role_atomic: Mapping[str, Fraction] = field(default_factory=dict)
    errors: ErrorDistribution = ErrorDistribution(0, 0, 0)
    unjudged: int = 0
