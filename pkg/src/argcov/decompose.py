"""Argument decomposition into atomic facts, with entailment filtering.

Each salient argument is decomposed by a judge into candidate atomic facts
(a ``fact1``/``fact2``/... map).  Candidates are deduplicated, then filtered
by a natural-language-inference check with the argument as premise and the
candidate as hypothesis; only candidates labeled *entailment* survive.  An
argument whose candidates are all rejected keeps a single fallback fact,
the argument text itself, so every argument stays scoreable.
"""
from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence
import json

from .corpus import ArgumentUnit
from .errors import OutOfRangeLikert, UnparseableVerdict
from .judge import CallBudget, JudgeBackend, TokenBucket, VerdictCache, judge_call
from . import text as T


@dataclass(frozen=True)
class AtomicFact:
    """One atomic fact extracted from an argument.

    ``ordinal`` is the fact's 1-based position in the judge's fact map
    (after deduplication); the fallback fact is ordinal 1 by convention.
    """

    fact_id: str
    arg_id: str
    ordinal: int
    text: str
    entailed: bool
    fallback: bool = False

    def __post_init__(self) -> None:
        if self.ordinal < 1:
            raise ValueError("ordinals start at 1")
        if not self.text.strip():
            raise ValueError("fact text must be non-empty")


def _dedupe_key(fact_text: str) -> str:
    return " ".join(re.sub(r"[^\w\s]", "", fact_text.casefold()).split())


def decompose_argument(
    arg: ArgumentUnit,
    backend: JudgeBackend,
    *,
    cache: VerdictCache | None = None,
    budget: CallBudget | None = None,
    limiter: TokenBucket | None = None,
) -> list[AtomicFact]:
    """Ask ``backend`` to split ``arg`` into candidate facts.

    Returns at least one fact, in fact-map order with contiguous ordinals;
    duplicates (same text up to case, punctuation, and whitespace) keep
    their first occurrence.
    """
    verdict = judge_call(
        backend,
        "decompose",
        {"argument": arg.text},
        cache=cache,
        budget=budget,
        limiter=limiter,
    )
    seen: set[str] = set()
    facts: list[AtomicFact] = []
    for fact_text in verdict.facts:
        key = _dedupe_key(fact_text)
        if key in seen:
            continue
        seen.add(key)
        ordinal = len(facts) + 1
        facts.append(
            AtomicFact(
                fact_id=f"{arg.arg_id}#f{ordinal}",
                arg_id=arg.arg_id,
                ordinal=ordinal,
                text=fact_text,
                entailed=False,
            )
        )
    return facts


def fallback_fact(arg: ArgumentUnit) -> AtomicFact:
    """The whole-argument fact used when every candidate is rejected."""
    return AtomicFact(
        fact_id=f"{arg.arg_id}#fallback",
        arg_id=arg.arg_id,
        ordinal=1,
        text=arg.text,
        entailed=True,
        fallback=True,
    )


def filter_entailed(
    arg: ArgumentUnit,
    facts: Sequence[AtomicFact],
    nli: JudgeBackend,
    *,
    cache: VerdictCache | None = None,
    budget: CallBudget | None = None,
    limiter: TokenBucket | None = None,
) -> list[AtomicFact]:
    """Keep the candidates the NLI judge says the argument entails.

    Every kept fact has ``entailed=True``.  When nothing survives, the
    result is exactly one fallback fact carrying the argument text, so the
    output is never empty.
    """
    kept: list[AtomicFact] = []
    for fact in facts:
        verdict = judge_call(
            nli,
            "nli",
            {"premise": arg.text, "hypothesis": fact.text},
            cache=cache,
            budget=budget,
            limiter=limiter,
        )
        if verdict.label == "entailment":
            kept.append(replace(fact, entailed=True))
    if not kept:
        return [fallback_fact(arg)]
    return kept


@dataclass
class FactSet:
    """Scoring-ready facts per argument, with extraction provenance.

    ``facts`` holds only entailed facts (or the fallback).  ``arg_roles``
    maps arguments to role names so per-role scores need no corpus lookup;
    it is rebuilt from the corpus after :meth:`load`, which reads the fact
    file alone.  Per-argument judge failures land in ``failures`` and leave
    the argument out of ``facts``.
    """

    facts: dict[str, tuple[AtomicFact, ...]] = field(default_factory=dict)
    arg_roles: dict[str, str] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)
    decompose_backend_id: str = ""
    nli_backend_id: str = ""
    created_at: str = ""

    def __len__(self) -> int:
        return len(self.facts)

    def all_facts(self) -> list[AtomicFact]:
        out: list[AtomicFact] = []
        for arg_id in sorted(self.facts):
            out.extend(self.facts[arg_id])
        return out

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for fact in self.all_facts():
                handle.write(
                    json.dumps(
                        {
                            "arg_id": fact.arg_id,
                            "fact_id": fact.fact_id,
                            "ordinal": fact.ordinal,
                            "text": fact.text,
                            "entailed": fact.entailed,
                            "fallback": fact.fallback,
                            "backend_id": self.decompose_backend_id,
                        },
                        ensure_ascii=False,
                    )
                )
                handle.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "FactSet":
        grouped: dict[str, list[AtomicFact]] = {}
        backend_id = ""
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                obj = json.loads(line)
                fact = AtomicFact(
                    fact_id=obj["fact_id"],
                    arg_id=obj["arg_id"],
                    ordinal=obj["ordinal"],
                    text=obj["text"],
                    entailed=obj["entailed"],
                    fallback=obj["fallback"],
                )
                grouped.setdefault(fact.arg_id, []).append(fact)
                backend_id = obj.get("backend_id", backend_id)
        facts = {
            arg_id: tuple(sorted(group, key=lambda f: f.ordinal))
            for arg_id, group in grouped.items()
        }
        return cls(facts=facts, decompose_backend_id=backend_id)

    def attach_roles(self, args: Iterable[ArgumentUnit]) -> None:
        for arg in args:
            if arg.arg_id in self.facts:
                self.arg_roles[arg.arg_id] = arg.role.name


def decompose_all(
    args: Sequence[ArgumentUnit],
    backend: JudgeBackend,
    nli: JudgeBackend,
    *,
    cache: VerdictCache | None = None,
    budget: CallBudget | None = None,
    limiter: TokenBucket | None = None,
    max_workers: int = 1,
    created_at: str = "",
) -> FactSet:
    """Decompose and filter every argument; failures do not stop the run.

    A judge response that stays unparseable after its retry budget marks
    that argument as failed (recorded in ``failures``) while the rest of
    the corpus proceeds.  Transport, auth, and budget errors propagate:
    those end the run.
    """
    factset = FactSet(
        decompose_backend_id=backend.backend_id,
        nli_backend_id=nli.backend_id,
        created_at=created_at,
    )

    def work(arg: ArgumentUnit) -> tuple[str, tuple[AtomicFact, ...] | None, str]:
        try:
            candidates = decompose_argument(
                arg, backend, cache=cache, budget=budget, limiter=limiter
            )
            kept = filter_entailed(
                arg, candidates, nli, cache=cache, budget=budget, limiter=limiter
            )
            return arg.arg_id, tuple(kept), ""
        except (UnparseableVerdict, OutOfRangeLikert) as exc:
            return arg.arg_id, None, str(exc)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(work, args))
    else:
        results = [work(arg) for arg in args]

    for arg in args:
        factset.arg_roles[arg.arg_id] = arg.role.name
    for arg_id, kept, reason in results:
        if kept is None:
            factset.failures[arg_id] = reason
        else:
            factset.facts[arg_id] = kept
    return factset
