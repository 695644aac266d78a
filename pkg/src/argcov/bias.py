"""Role-bias analysis: does coverage track how much of the input a role fills?

The bias score for a role divides its atomic coverage by a log-dampened
prior: beta = ARC_atomic(role) / ln(1 + prior_fraction), where the prior
fraction is the share of salient arguments carrying that role.  Rare roles
that are nonetheless well covered score high; abundant roles must earn
their coverage.  ``beta_raw`` (the identity) is the uncontrolled variant
kept for side-by-side reporting.

Two confound controls are provided: grouping arguments into comparable
word-length bands, and restricting to documents whose arguments sit near
the edges of the input (where lead/tail heuristics would find them).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .corpus import ALL_ROLES, ArgumentUnit, DocumentRecord, SaliencyPolicy, extract_salient
from .errors import NoArguments, ZeroFraction
from .position import relative_position


def prior_fraction(role: str, args: Sequence[ArgumentUnit]) -> Fraction:
    """Share of ``args`` whose role is ``role``; exact."""
    if not args:
        raise NoArguments("prior fraction over an empty argument scope")
    matching = sum(1 for arg in args if arg.role.name == role)
    return Fraction(matching, len(args))


def beta(arc_atomic_role: float | Fraction, fraction: float | Fraction) -> float:
    """Prior-normalized bias score: arc / ln(1 + fraction).

    Strictly decreasing in the prior fraction for fixed coverage.  A zero
    fraction has no defined score and raises :class:`ZeroFraction`.
    """
    fraction = float(fraction)
    if fraction <= 0.0:
        raise ZeroFraction("prior fraction must be positive")
    return float(arc_atomic_role) / math.log1p(fraction)


def beta_raw(arc_atomic_role: float | Fraction) -> float | Fraction:
    """Uncontrolled variant: the per-role atomic score unchanged."""
    return arc_atomic_role


def length_control_groups(
    args: Sequence[ArgumentUnit], ratio: float = 0.2
) -> list[list[ArgumentUnit]]:
    """Partition arguments into word-length bands with bounded spread.

    Arguments are sorted by word count; a greedy sweep keeps extending the
    current group while its maximum stays within (1 + ratio) times its
    minimum, then opens a new group.  Every argument lands in exactly one
    group.
    """
    if ratio < 0:
        raise ValueError("ratio must be non-negative")
    ordered = sorted(args, key=lambda a: (a.word_count(), a.arg_id))
    groups: list[list[ArgumentUnit]] = []
    group: list[ArgumentUnit] = []
    group_min = 0
    for arg in ordered:
        count = arg.word_count()
        if group and count > (1 + ratio) * group_min:
            groups.append(group)
            group = []
        if not group:
            group_min = count
        group.append(arg)
    if group:
        groups.append(group)
    return groups


def argument_position(doc: DocumentRecord, arg: ArgumentUnit) -> float:
    """Relative position of an argument: mean over its sentences."""
    n = len(doc.sentences)
    positions = [relative_position(idx, n) for idx in arg.sentence_indices]
    return sum(positions) / len(positions)


def position_control_filter(
    corpus: Sequence[DocumentRecord],
    edge: float = 0.2,
    mass: float = 0.8,
    policy: SaliencyPolicy = ALL_ROLES,
) -> list[DocumentRecord]:
    """Keep documents whose salient arguments concentrate at the edges.

    A document survives when at least ``mass`` of its arguments sit at
    relative position <= ``edge`` or >= 1 - ``edge``.  Documents with no
    salient arguments are dropped.
    """
    if not 0 < edge < 0.5:
        raise ValueError("edge must be in (0, 0.5)")
    if not 0 < mass <= 1:
        raise ValueError("mass must be in (0, 1]")
    kept: list[DocumentRecord] = []
    for doc in corpus:
        args = extract_salient(doc, policy)
        if not args:
            continue
        at_edge = sum(
            1
            for arg in args
            if (pos := argument_position(doc, arg)) <= edge or pos >= 1 - edge
        )
        if at_edge >= mass * len(args):
            kept.append(doc)
    return kept


@dataclass(frozen=True)
class BiasReport:
    """One bias measurement: a role's coverage against its prior."""

    role: str
    system: str
    arc_atomic_role: float
    prior_fraction: float
    beta: float
    variant: str
    control: str = "none"
    scope: str = "corpus"

    def __post_init__(self) -> None:
        if self.variant not in ("raw", "normalized"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.control not in ("none", "length", "length_and_position"):
            raise ValueError(f"unknown control {self.control!r}")
        if self.scope not in ("doc", "corpus"):
            raise ValueError(f"unknown scope {self.scope!r}")


def doc_averaged_prior(role: str, args: Sequence[ArgumentUnit]) -> Fraction:
    """Per-document role fractions, averaged over documents with arguments."""
    by_doc: dict[str, list[ArgumentUnit]] = {}
    for arg in args:
        by_doc.setdefault(arg.doc_id, []).append(arg)
    if not by_doc:
        raise NoArguments("prior fraction over an empty argument scope")
    total = Fraction(0)
    for doc_args in by_doc.values():
        total += prior_fraction(role, doc_args)
    return total / len(by_doc)


def bias_reports(
    system: str,
    role_scores: Mapping[str, float | Fraction],
    args: Sequence[ArgumentUnit],
    control: str = "none",
) -> list[BiasReport]:
    """Expand per-role coverage scores into raw and normalized bias rows.

    ``role_scores`` maps role name to its pooled atomic coverage within the
    scope that ``args`` describes.  Each role yields a raw row plus one
    normalized row per prior scope (corpus-pooled and document-averaged).
    Roles with a zero prior in some scope skip that normalized row rather
    than fail the run.
    """
    rows: list[BiasReport] = []
    for role in sorted(role_scores):
        arc = float(role_scores[role])
        pooled = prior_fraction(role, args)
        averaged = doc_averaged_prior(role, args)
        rows.append(
            BiasReport(
                role=role,
                system=system,
                arc_atomic_role=arc,
                prior_fraction=float(pooled),
                beta=arc,
                variant="raw",
                control=control,
                scope="corpus",
            )
        )
        for scope, fraction in (("corpus", pooled), ("doc", averaged)):
            if fraction == 0:
                continue
            rows.append(
                BiasReport(
                    role=role,
                    system=system,
                    arc_atomic_role=arc,
                    prior_fraction=float(fraction),
                    beta=beta(arc, fraction),
                    variant="normalized",
                    control=control,
                    scope=scope,
                )
            )
    return rows
