"""Command-line pipeline: ingest, generate, decompose, score, bias,
position, correlate, report.

Each command reads and writes fixed-name artifacts under the ``--out``
directory, so a full run is a sequence of invocations sharing one
directory:

    argcov ingest --input corpus.jsonl --scheme irc --out run/
    argcov generate --judge lexical --out run/
    argcov decompose --judge lexical --nli lexical --out run/
    argcov score --out run/
    argcov bias --out run/
    argcov position --out run/
    argcov correlate --out run/
    argcov report --out run/

Exit codes: 0 on success, 2 on input validation failures, 3 on auth or
transport failures, 4 when the judge-call budget is exhausted.

Options may also come from a flat ``key = value`` config file (``--config``);
explicit flags win.  With lexical backends and a pinned ``--clock``, reruns
are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import bias as bias_mod
from . import corpus as corpus_mod
from . import position as position_mod
from . import stats as stats_mod
from .corpus import (
    DocumentRecord,
    RoleScheme,
    SaliencyPolicy,
    SummaryRecord,
    corpus_stats,
    extract_salient,
    get_scheme,
    load_corpus,
    parse_policy,
    serialize_corpus,
)
from .decompose import FactSet, decompose_all
from .errors import (
    ArgcovError,
    AuthError,
    BudgetExceeded,
    DegenerateSeries,
    EmptyArgumentSet,
    MalformedRecord,
    MissingUpstream,
    NoArgumentsOfRole,
    NoSalientArguments,
    OutOfRangeLikert,
    PolicyInapplicable,
    TransportError,
    UnparseableVerdict,
)
from .judge import CallBudget, JudgeBackend, TokenBucket, VerdictCache, invoke
from .scoring import (
    ScoreCard,
    aggregate_errors,
    arc_atomic_score,
    format_score,
    per_role_atomic,
    score_atomic,
    score_fullset,
    score_role,
)
from . import text as T

CORPUS_FILE = "corpus.jsonl"
SCHEME_FILE = "scheme.json"
STATS_FILE = "stats.csv"
FACTS_FILE = "facts.jsonl"
SCORES_FILE = "scores.csv"
BIAS_FILE = "bias.csv"
POSITIONS_FILE = "positions.csv"
HISTOGRAM_FILE = "histogram.csv"
CORRELATIONS_FILE = "correlations.csv"
REPORT_FILE = "report.json"
CACHE_FILE = "cache.jsonl"

# --- configuration ------------------------------------------------------------


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise MalformedRecord(lineno, "config lines take the form key = value")
        key, value = body.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


@dataclass
class RunConfig:
    """Resolved options shared by every pipeline command."""

    out: Path
    judge: JudgeBackend
    nli: JudgeBackend
    policy: SaliencyPolicy
    cache_path: Path
    parallelism: int = 1
    budget: int | None = None
    clock: str | None = None
    length_ratio: float = 0.2
    edge: float = 0.2
    mass: float = 0.8

    def __post_init__(self) -> None:
        if self.judge.backend_id == self.nli.backend_id:
            raise ValueError("judge and nli backends need distinct backend ids")

    def open_cache(self) -> VerdictCache:
        if self.clock:
            pinned = self.clock
            return VerdictCache(self.cache_path, clock=lambda: pinned)
        return VerdictCache(self.cache_path)

    def open_budget(self) -> CallBudget:
        return CallBudget(self.budget)

    def open_limiter(self) -> TokenBucket | None:
        if self.judge.requests_per_minute:
            return TokenBucket(self.judge.requests_per_minute)
        return None


def _parse_options(raw: str) -> tuple[tuple[str, str], ...]:
    pairs = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ValueError(f"backend options take key=value form, got {item!r}")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return tuple(sorted(pairs))


def _build_backend(prefix: str, kind: str, endpoint: str, model: str,
                   options: str, retries: int, rpm: float | None) -> JudgeBackend:
    option_pairs = _parse_options(options)
    suffix = "-".join(f"{k}={v}" for k, v in option_pairs)
    backend_id = f"{prefix}-{kind}" + (f"-{suffix}" if suffix else "")
    return JudgeBackend(
        backend_id=backend_id,
        kind=kind,
        endpoint=endpoint,
        model_name=model or ("lexical" if kind == "lexical" else ""),
        max_retries=retries,
        requests_per_minute=rpm,
        options=option_pairs,
    )


def _resolve(args: argparse.Namespace, config: Mapping[str, str], key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def build_run_config(args: argparse.Namespace) -> RunConfig:
    config: Mapping[str, str] = {}
    if getattr(args, "config", None):
        config = read_config_file(args.config)
    out = Path(_resolve(args, config, "out", "run"))
    out.mkdir(parents=True, exist_ok=True)
    judge_kind = _resolve(args, config, "judge", "lexical")
    nli_kind = _resolve(args, config, "nli", "lexical")
    judge = _build_backend(
        "judge",
        judge_kind,
        _resolve(args, config, "judge_endpoint", ""),
        _resolve(args, config, "judge_model", ""),
        _resolve(args, config, "judge_options", ""),
        int(_resolve(args, config, "max_retries", 2)),
        float(rpm) if (rpm := _resolve(args, config, "rpm", None)) is not None else None,
    )
    nli = _build_backend(
        "nli",
        nli_kind,
        _resolve(args, config, "nli_endpoint", ""),
        _resolve(args, config, "nli_model", ""),
        _resolve(args, config, "nli_options", ""),
        int(_resolve(args, config, "max_retries", 2)),
        None,
    )
    budget = _resolve(args, config, "budget", None)
    return RunConfig(
        out=out,
        judge=judge,
        nli=nli,
        policy=parse_policy(_resolve(args, config, "policy", "all_roles")),
        cache_path=Path(_resolve(args, config, "cache", out / CACHE_FILE)),
        parallelism=int(_resolve(args, config, "parallelism", 1)),
        budget=int(budget) if budget is not None else None,
        clock=_resolve(args, config, "clock", None),
        length_ratio=float(_resolve(args, config, "length_ratio", 0.2)),
        edge=float(_resolve(args, config, "edge", 0.2)),
        mass=float(_resolve(args, config, "mass", 0.8)),
    )


def _load_scheme(args: argparse.Namespace, run: RunConfig) -> RoleScheme:
    explicit = getattr(args, "scheme", None)
    if explicit:
        return get_scheme(explicit)
    stored = run.out / SCHEME_FILE
    if stored.exists():
        return RoleScheme.from_file(stored)
    return get_scheme("irc")


def _load_snapshot(run: RunConfig, scheme: RoleScheme) -> list[DocumentRecord]:
    path = run.out / CORPUS_FILE
    if not path.exists():
        raise MissingUpstream(f"{path} (run ingest first)")
    return load_corpus(path, scheme)


def _load_facts(run: RunConfig) -> FactSet:
    path = run.out / FACTS_FILE
    if not path.exists():
        raise MissingUpstream(f"{path} (run decompose first)")
    return FactSet.load(path)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: Path) -> list[dict[str, str]]:
    if not path.exists():
        raise MissingUpstream(str(path))
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _doc_args(
    docs: Sequence[DocumentRecord], policy: SaliencyPolicy
) -> dict[str, list[corpus_mod.ArgumentUnit]]:
    """Salient units per document; documents where the policy finds nothing
    (or does not apply) map to empty lists."""
    out: dict[str, list[corpus_mod.ArgumentUnit]] = {}
    for doc in docs:
        try:
            out[doc.doc_id] = extract_salient(doc, policy)
        except PolicyInapplicable:
            out[doc.doc_id] = []
    return out


def _doc_factset(factset: FactSet, arg_ids: Iterable[str]) -> FactSet:
    sub = FactSet(
        decompose_backend_id=factset.decompose_backend_id,
        nli_backend_id=factset.nli_backend_id,
    )
    for arg_id in arg_ids:
        if arg_id in factset.facts:
            sub.facts[arg_id] = factset.facts[arg_id]
            if arg_id in factset.arg_roles:
                sub.arg_roles[arg_id] = factset.arg_roles[arg_id]
    return sub


def _systems(docs: Sequence[DocumentRecord]) -> list[str]:
    names = {s.system for doc in docs for s in doc.reference_summaries + doc.generated_summaries}
    return sorted(names)


def default_length_policy(docs: Sequence[DocumentRecord]) -> str:
    """Word-target policy: longest reference when any document has several."""
    if any(len(doc.reference_summaries) > 1 for doc in docs):
        return "longest_reference"
    return "match_reference"


# --- ingest ---------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    scheme = get_scheme(getattr(args, "scheme", None) or "irc")
    docs = load_corpus(args.input, scheme)
    stats = corpus_stats(docs)
    serialize_corpus(docs, run.out / CORPUS_FILE)
    (run.out / SCHEME_FILE).write_text(
        json.dumps({"scheme_id": scheme.scheme_id, "roles": list(scheme.roles)}) + "\n",
        encoding="utf-8",
    )
    header = [
        "docs",
        "input_len_min", "input_len_mean", "input_len_max",
        "summary_len_min", "summary_len_mean", "summary_len_max",
        "pct_roles_input", "pct_roles_summary", "length_policy",
    ]
    row = [
        str(stats.docs),
        str(stats.input_len_min),
        format_score(stats.input_len_mean, 2),
        str(stats.input_len_max),
        str(stats.summary_len_min),
        format_score(stats.summary_len_mean, 2),
        str(stats.summary_len_max),
        format_score(stats.pct_roles_input, 2),
        format_score(stats.pct_roles_summary, 2) if stats.pct_roles_summary is not None else "",
        default_length_policy(docs),
    ]
    _write_csv(run.out / STATS_FILE, header, [row])
    print(f"ingested {stats.docs} documents -> {run.out / CORPUS_FILE}")
    return 0


# --- generate --------------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    scheme = _load_scheme(args, run)
    docs = _load_snapshot(run, scheme)
    policy = args.length_policy or default_length_policy(docs)
    system = args.system or run.judge.model_name or run.judge.backend_id
    cache = run.open_cache()
    budget = run.open_budget()
    limiter = run.open_limiter()
    updated: list[DocumentRecord] = []
    for doc in docs:
        if not doc.reference_summaries:
            raise EmptyArgumentSet(f"{doc.doc_id}: no reference summary to set a length target")
        counts = [ref.word_count for ref in doc.reference_summaries]
        target = max(counts) if policy == "longest_reference" else counts[0]
        raw = invoke(
            run.judge,
            "summarize",
            {"document": doc.plain_text(), "word_target": str(target)},
            cache=cache,
            budget=budget,
            limiter=limiter,
        )
        text = " ".join(raw.split())
        cap = math.ceil(target * 1.1)
        tokens = T.words(text)
        if len(tokens) > cap:
            print(
                f"warning: {doc.doc_id}: truncating summary from {len(tokens)} to {cap} words",
                file=sys.stderr,
            )
            text = " ".join(tokens[:cap])
        updated.append(doc.with_generated(SummaryRecord.make(system, text)))
    serialize_corpus(updated, run.out / CORPUS_FILE)
    print(f"generated {len(updated)} summaries as system {system!r}")
    return 0


# --- decompose -------------------------------------------------------------------


def cmd_decompose(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    scheme = _load_scheme(args, run)
    docs = _load_snapshot(run, scheme)
    args_by_doc = _doc_args(docs, run.policy)
    flat = [arg for doc in docs for arg in args_by_doc[doc.doc_id]]
    if not flat:
        raise EmptyArgumentSet("no salient arguments under the active policy")
    factset = decompose_all(
        flat,
        run.judge,
        run.nli,
        cache=run.open_cache(),
        budget=run.open_budget(),
        limiter=run.open_limiter(),
        max_workers=run.parallelism,
        created_at=run.clock or "",
    )
    factset.save(run.out / FACTS_FILE)
    n_facts = sum(len(v) for v in factset.facts.values())
    print(f"decomposed {len(factset.facts)} arguments into {n_facts} facts")
    if factset.failures:
        for arg_id in sorted(factset.failures):
            print(f"warning: unjudged argument {arg_id}: {factset.failures[arg_id]}", file=sys.stderr)
    return 0


# --- score -----------------------------------------------------------------------


def _judged_scorecard(
    doc: DocumentRecord,
    summary: SummaryRecord,
    doc_args: Sequence[corpus_mod.ArgumentUnit],
    factset: FactSet | None,
    levels: set[str],
    run: RunConfig,
    cache: VerdictCache,
    budget: CallBudget,
    limiter: TokenBucket | None,
) -> ScoreCard:
    kwargs = dict(cache=cache, budget=budget, limiter=limiter)
    arc_fullset = arc_role = arc_atomic = None
    per_role: dict[str, Fraction] = {}
    errors = aggregate_errors([])
    unjudged = 0
    if "fullset" in levels:
        try:
            arc_fullset = score_fullset(doc_args, summary, run.judge, **kwargs).score
        except (UnparseableVerdict, OutOfRangeLikert):
            unjudged += 1
    if "role" in levels:
        role_result = score_role(doc_args, summary, run.judge, **kwargs)
        arc_role = role_result.score
        unjudged += len(role_result.unjudged)
    if "atomic" in levels and factset is not None:
        doc_facts = _doc_factset(factset, [a.arg_id for a in doc_args])
        if doc_facts.facts:
            atomic_result = score_atomic(doc_facts, summary, run.judge, **kwargs)
            arc_atomic = atomic_result.score
            errors = aggregate_errors(atomic_result.verdicts)
            unjudged += len(atomic_result.unjudged)
            for role in sorted({a.role.name for a in doc_args}):
                try:
                    per_role[role] = per_role_atomic(doc_facts, atomic_result.verdicts, role)
                except NoArgumentsOfRole:
                    continue
    return ScoreCard(
        doc_id=doc.doc_id,
        summary_system=summary.system,
        arc_fullset=arc_fullset,
        arc_role=arc_role,
        arc_atomic=arc_atomic,
        per_role_atomic=per_role,
        errors=errors,
        unjudged=unjudged,
    )


def cmd_score(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    scheme = _load_scheme(args, run)
    docs = _load_snapshot(run, scheme)
    levels = {"fullset", "role", "atomic"} if args.level == "all" else {args.level}
    factset = None
    if "atomic" in levels:
        factset = _load_facts(run)
    args_by_doc = _doc_args(docs, run.policy)
    if factset is not None:
        factset.attach_roles(arg for units in args_by_doc.values() for arg in units)
    cache = run.open_cache()
    budget = run.open_budget()
    limiter = run.open_limiter()
    rows: list[list[str]] = []
    for doc in docs:
        doc_args = args_by_doc[doc.doc_id]
        if not doc_args:
            continue
        for summary in doc.reference_summaries + doc.generated_summaries:
            card = _judged_scorecard(
                doc, summary, doc_args, factset, levels, run, cache, budget, limiter
            )
            rows.append(
                [
                    card.doc_id,
                    card.summary_system,
                    format_score(card.arc_fullset),
                    format_score(card.arc_role),
                    format_score(card.arc_atomic),
                    "",
                    "",
                    str(card.errors.supported),
                    str(card.errors.missing),
                    str(card.errors.not_factual),
                    str(card.unjudged),
                ]
            )
            for role in sorted(card.per_role_atomic):
                rows.append(
                    [card.doc_id, card.summary_system, "", "", "", role,
                     format_score(card.per_role_atomic[role]), "", "", "", ""]
                )
    rows.sort(key=lambda r: (r[0], r[1], r[5]))
    header = [
        "doc_id", "system", "arc_fullset", "arc_role", "arc_atomic",
        "role", "per_role_atomic", "supported", "missing", "not_factual", "unjudged",
    ]
    _write_csv(run.out / SCORES_FILE, header, rows)
    print(f"scored {len(rows)} rows -> {run.out / SCORES_FILE}")
    return 0


# --- bias ------------------------------------------------------------------------


def _atomic_decisions_by_arg(
    docs: Sequence[DocumentRecord],
    args_by_doc: Mapping[str, Sequence[corpus_mod.ArgumentUnit]],
    factset: FactSet,
    system: str,
    run: RunConfig,
    cache: VerdictCache,
    budget: CallBudget,
    limiter: TokenBucket | None,
) -> dict[str, list[int]]:
    """Judge every fact against ``system``'s summaries; decisions per argument."""
    decisions: dict[str, list[int]] = {}
    for doc in docs:
        try:
            summary = doc.summary(system)
        except KeyError:
            continue
        doc_facts = _doc_factset(factset, [a.arg_id for a in args_by_doc[doc.doc_id]])
        if not doc_facts.facts:
            continue
        result = score_atomic(
            doc_facts, summary, run.judge, cache=cache, budget=budget, limiter=limiter
        )
        for verdict in result.verdicts:
            decisions.setdefault(verdict.arg_id, []).append(verdict.decision)
    return decisions


def _group_bias_rows(
    system: str,
    control: str,
    groups: Sequence[Sequence[corpus_mod.ArgumentUnit]],
    decisions: Mapping[str, list[int]],
) -> list[bias_mod.BiasReport]:
    """Average per-group bias measurements into one row set per role/scope."""
    accum: dict[tuple[str, str, str], list[bias_mod.BiasReport]] = {}
    for group in groups:
        judged = [arg for arg in group if arg.arg_id in decisions]
        if not judged:
            continue
        role_scores: dict[str, Fraction] = {}
        for role in sorted({arg.role.name for arg in judged}):
            role_args = {
                arg.arg_id: decisions[arg.arg_id]
                for arg in judged
                if arg.role.name == role
            }
            role_scores[role] = arc_atomic_score(role_args)
        for row in bias_mod.bias_reports(system, role_scores, judged, control):
            accum.setdefault((row.role, row.variant, row.scope), []).append(row)
    out: list[bias_mod.BiasReport] = []
    for (role, variant, scope), rows in sorted(accum.items()):
        out.append(
            bias_mod.BiasReport(
                role=role,
                system=system,
                arc_atomic_role=sum(r.arc_atomic_role for r in rows) / len(rows),
                prior_fraction=sum(r.prior_fraction for r in rows) / len(rows),
                beta=sum(r.beta for r in rows) / len(rows),
                variant=variant,
                control=control,
                scope=scope,
            )
        )
    return out


def cmd_bias(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    scheme = _load_scheme(args, run)
    docs = _load_snapshot(run, scheme)
    factset = _load_facts(run)
    args_by_doc = _doc_args(docs, run.policy)
    factset.attach_roles(arg for units in args_by_doc.values() for arg in units)
    controls = [c.strip() for c in args.controls.split(",") if c.strip()]
    cache = run.open_cache()
    budget = run.open_budget()
    limiter = run.open_limiter()
    rows: list[bias_mod.BiasReport] = []
    for system in _systems(docs):
        decisions = _atomic_decisions_by_arg(
            docs, args_by_doc, factset, system, run, cache, budget, limiter
        )
        if not decisions:
            continue
        for control in controls:
            scope_docs = docs
            if control == "length_and_position":
                scope_docs = bias_mod.position_control_filter(
                    docs, edge=run.edge, mass=run.mass, policy=run.policy
                )
            scope_args = [
                arg for doc in scope_docs for arg in args_by_doc[doc.doc_id]
            ]
            if not scope_args:
                continue
            if control == "none":
                groups: list[list[corpus_mod.ArgumentUnit]] = [list(scope_args)]
            else:
                groups = bias_mod.length_control_groups(scope_args, ratio=run.length_ratio)
            rows.extend(_group_bias_rows(system, control, groups, decisions))
    rows.sort(key=lambda r: (r.system, r.role, r.control, r.variant, r.scope))
    header = ["system", "role", "control", "variant", "scope",
              "arc_atomic_role", "prior_fraction", "beta"]
    _write_csv(
        run.out / BIAS_FILE,
        header,
        [
            [r.system, r.role, r.control, r.variant, r.scope,
             _fmt(r.arc_atomic_role), _fmt(r.prior_fraction), _fmt(r.beta)]
            for r in rows
        ],
    )
    print(f"wrote {len(rows)} bias rows -> {run.out / BIAS_FILE}")
    return 0


# --- position ---------------------------------------------------------------------


def _attributions(
    docs: Sequence[DocumentRecord],
) -> list[tuple[DocumentRecord, SummaryRecord, position_mod.AttributionResult]]:
    out = []
    for doc in docs:
        for summary in doc.reference_summaries + doc.generated_summaries:
            result = position_mod.greedy_select(doc.sentences, summary, doc_id=doc.doc_id)
            out.append((doc, summary, result))
    return out


def cmd_position(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    scheme = _load_scheme(args, run)
    docs = _load_snapshot(run, scheme)
    position_rows: list[list[str]] = []
    items: list[tuple[int, int, str | None]] = []
    for doc, summary, result in _attributions(docs):
        n = len(doc.sentences)
        for idx in sorted(result.selected_indices):
            sentence = doc.sentences[idx]
            roles = sorted(r.name for r in sentence.roles) or ["none"]
            rel = position_mod.relative_position(idx, n)
            for role in roles:
                position_rows.append([doc.doc_id, summary.system, role, _fmt(rel)])
            items.append((idx, n, None))
            for role in sorted(r.name for r in sentence.roles):
                items.append((idx, n, role))
    profiles = position_mod.position_profile(
        [(idx, n, role) for idx, n, role in items if role is not None]
    )
    # the per-role profiles double-count multi-role sentences by design; the
    # overall profile counts each selected sentence exactly once
    overall_items = [(idx, n, None) for idx, n, role in items if role is None]
    profiles["overall"] = position_mod.position_profile(overall_items)["overall"]
    histogram_rows: list[list[str]] = []
    for role in sorted(profiles):
        profile = profiles[role]
        total = len(profile.positions)
        for b in range(position_mod.N_BINS):
            histogram_rows.append(
                [
                    role,
                    f"{b / 10:.1f}",
                    f"{(b + 1) / 10:.1f}",
                    str(profile.histogram[b]),
                    format_score(profile.bin_share(b)) if total else format_score(Fraction(0)),
                ]
            )
    _write_csv(
        run.out / POSITIONS_FILE,
        ["doc_id", "system", "role", "relative_position"],
        position_rows,
    )
    _write_csv(
        run.out / HISTOGRAM_FILE,
        ["role", "bin_lo", "bin_hi", "count", "share"],
        histogram_rows,
    )
    print(f"wrote {len(position_rows)} position rows -> {run.out / POSITIONS_FILE}")
    return 0


# --- correlate --------------------------------------------------------------------


def _scores_by_item(rows: list[dict[str, str]], column: str) -> dict[tuple[str, str], float]:
    out: dict[tuple[str, str], float] = {}
    for row in rows:
        if row["role"]:
            continue
        if row[column]:
            out[(row["doc_id"], row["system"])] = float(row[column])
    return out


def _read_human_scores(path: Path) -> dict[str, dict[tuple[str, str], float]]:
    tables: dict[str, dict[tuple[str, str], float]] = {}
    for row in _read_csv(path):
        tables.setdefault(row["expert"], {})[(row["doc_id"], row["system"])] = float(
            row["rating"]
        )
    return tables


def cmd_correlate(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    scheme = _load_scheme(args, run)
    docs = _load_snapshot(run, scheme)
    score_rows = _read_csv(run.out / SCORES_FILE)
    position_policy = parse_policy(args.position_policy)
    out_rows: list[list[str]] = []

    atomic = _scores_by_item(score_rows, "arc_atomic")
    mean_positions: dict[str, float] = {}
    for doc in docs:
        try:
            mean_positions[doc.doc_id] = position_mod.mean_salient_position(
                doc, position_policy
            )
        except (NoSalientArguments, PolicyInapplicable):
            continue
    for system in _systems(docs):
        pairs = [
            (mean_positions[doc_id], atomic[(doc_id, system)])
            for doc_id in sorted(mean_positions)
            if (doc_id, system) in atomic
        ]
        try:
            result = stats_mod.position_coverage_correlation(pairs)
        except DegenerateSeries as exc:
            print(f"warning: {system}: {exc}", file=sys.stderr)
            continue
        out_rows.append(
            [
                result.method,
                f"position_coverage/{system}",
                "",
                _fmt(result.statistic),
                f"{result.p_value:.6g}",
                str(result.n),
                str(result.significant).lower(),
            ]
        )

    if args.human:
        human = _read_human_scores(Path(args.human))
        for column in ("arc_fullset", "arc_role", "arc_atomic"):
            metric = _scores_by_item(score_rows, column)
            if not metric:
                continue
            reports = stats_mod.metric_human_agreement(metric, human)
            for method in sorted(reports):
                report = reports[method]
                for expert in sorted(report.per_expert):
                    r = report.per_expert[expert]
                    out_rows.append(
                        [method, f"human_agreement/{column}", expert,
                         _fmt(r.statistic), f"{r.p_value:.6g}", str(r.n),
                         str(r.significant).lower()]
                    )
                r = report.corr_of_avg
                out_rows.append(
                    [method, f"human_agreement/{column}", "correlation_of_averages",
                     _fmt(r.statistic), f"{r.p_value:.6g}", str(r.n),
                     str(r.significant).lower()]
                )
                out_rows.append(
                    [method, f"human_agreement/{column}", "average_of_correlations",
                     _fmt(report.avg_of_corr), "", str(len(metric)), ""]
                )

    header = ["method", "scope", "expert", "statistic", "p_value", "n", "significant"]
    _write_csv(run.out / CORRELATIONS_FILE, header, out_rows)
    print(f"wrote {len(out_rows)} correlation rows -> {run.out / CORRELATIONS_FILE}")
    return 0


# --- report -----------------------------------------------------------------------


def _mean(values: Sequence[Fraction]) -> Fraction:
    return sum(values, Fraction(0)) / len(values)


def cmd_report(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    scheme = _load_scheme(args, run)
    docs = _load_snapshot(run, scheme)
    factset = _load_facts(run)
    args_by_doc = _doc_args(docs, run.policy)
    factset.attach_roles(arg for units in args_by_doc.values() for arg in units)
    score_rows = _read_csv(run.out / SCORES_FILE)
    bias_rows = _read_csv(run.out / BIAS_FILE)
    histogram_rows = _read_csv(run.out / HISTOGRAM_FILE)
    correlation_rows = _read_csv(run.out / CORRELATIONS_FILE)
    stats_rows = _read_csv(run.out / STATS_FILE)
    cache = run.open_cache()
    budget = run.open_budget()
    limiter = run.open_limiter()

    # Figure data: per-system atomic coverage, aggregated two ways. The
    # pooled variant weighs every argument equally corpus-wide, so it is
    # recomputed from per-fact verdicts (all cache hits on a warm cache)
    # rather than from the rounded per-document rows.
    fig2_rows: list[list[str]] = []
    for system in _systems(docs):
        decisions = _atomic_decisions_by_arg(
            docs, args_by_doc, factset, system, run, cache, budget, limiter
        )
        per_doc = [
            float(row["arc_atomic"])
            for row in score_rows
            if row["system"] == system and not row["role"] and row["arc_atomic"]
        ]
        if not decisions or not per_doc:
            continue
        pooled = arc_atomic_score(decisions)
        fig2_rows.append(
            [system, _fmt(sum(per_doc) / len(per_doc)), format_score(pooled)]
        )
    _write_csv(run.out / "fig2_arc_atomic.csv", ["system", "mean_doc", "pooled"], fig2_rows)

    fig3_rows: list[list[str]] = []
    for system in _systems(docs):
        rows = [r for r in score_rows if r["system"] == system and not r["role"]]
        if not rows:
            continue
        supported = sum(int(r["supported"]) for r in rows)
        missing = sum(int(r["missing"]) for r in rows)
        not_factual = sum(int(r["not_factual"]) for r in rows)
        total = supported + missing + not_factual
        share = lambda c: format_score(Fraction(c, total)) if total else format_score(Fraction(0))
        fig3_rows.append(
            [system, str(supported), str(missing), str(not_factual),
             share(supported), share(missing), share(not_factual)]
        )
    _write_csv(
        run.out / "fig3_errors.csv",
        ["system", "supported", "missing", "not_factual",
         "supported_share", "missing_share", "not_factual_share"],
        fig3_rows,
    )

    # Per-system position histograms recomputed from the (deterministic)
    # greedy attribution; the rendered positions.csv rounds positions too
    # coarsely to re-bin exactly.
    fig4_counts: dict[tuple[str, str], list[int]] = {}
    for doc, summary, result in _attributions(docs):
        n = len(doc.sentences)
        for idx in result.selected_indices:
            for role in sorted(r.name for r in doc.sentences[idx].roles) or ["none"]:
                bins = fig4_counts.setdefault(
                    (summary.system, role), [0] * position_mod.N_BINS
                )
                bins[position_mod.position_bin(idx, n)] += 1
    fig4_rows = []
    for (system, role), bins in sorted(fig4_counts.items()):
        total = sum(bins)
        for b, count in enumerate(bins):
            fig4_rows.append(
                [system, role, f"{b / 10:.1f}", f"{(b + 1) / 10:.1f}",
                 str(count), format_score(Fraction(count, total))]
            )
    _write_csv(
        run.out / "fig4_positions.csv",
        ["system", "role", "bin_lo", "bin_hi", "count", "share"],
        fig4_rows,
    )

    fig5_rows = [
        [r["system"], r["role"], r["control"], r["variant"], r["scope"], r["beta"]]
        for r in bias_rows
    ]
    _write_csv(
        run.out / "fig5_bias.csv",
        ["system", "role", "control", "variant", "scope", "beta"],
        fig5_rows,
    )

    report = {
        "corpus": stats_rows[0] if stats_rows else {},
        "scores": score_rows,
        "bias": bias_rows,
        "position_histogram": histogram_rows,
        "correlations": correlation_rows,
        "figures": {
            "arc_atomic_by_system": [
                {"system": s, "mean_doc": m, "pooled": p} for s, m, p in fig2_rows
            ],
            "error_distribution": [
                dict(zip(["system", "supported", "missing", "not_factual",
                          "supported_share", "missing_share", "not_factual_share"], row))
                for row in fig3_rows
            ],
            "positions_by_system": [
                dict(zip(["system", "role", "bin_lo", "bin_hi", "count", "share"], row))
                for row in fig4_rows
            ],
            "bias_by_system": [
                dict(zip(["system", "role", "control", "variant", "scope", "beta"], row))
                for row in fig5_rows
            ],
        },
        "run": {
            "policy": run.policy.kind
            + (f":{run.policy.relevance}" if run.policy.relevance else ""),
            "judge": run.judge.backend_id,
            "nli": run.nli.backend_id,
            "scheme": scheme.scheme_id,
            "systems": _systems(docs),
        },
    }
    with open(run.out / REPORT_FILE, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(report, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")
    print(f"wrote {run.out / REPORT_FILE}")
    return 0


# --- argument parsing ---------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--out", help="run directory (default: run)")
    parser.add_argument("--scheme", help="role scheme id or scheme JSON path")
    parser.add_argument("--policy", help="saliency policy (all_roles, role_sentences_only, relevance_eq:K)")
    parser.add_argument("--cache", help="judge response cache path (default: OUT/cache.jsonl)")
    parser.add_argument("--judge", choices=["lexical", "remote"], help="judge backend kind")
    parser.add_argument("--judge-endpoint", dest="judge_endpoint", help="chat-completions URL")
    parser.add_argument("--judge-model", dest="judge_model", help="judge model name")
    parser.add_argument("--judge-options", dest="judge_options", help="lexical judge options k=v[,k=v]")
    parser.add_argument("--nli", choices=["lexical", "remote"], help="entailment backend kind")
    parser.add_argument("--nli-endpoint", dest="nli_endpoint")
    parser.add_argument("--nli-model", dest="nli_model")
    parser.add_argument("--nli-options", dest="nli_options", help="lexical NLI options k=v[,k=v]")
    parser.add_argument("--parallelism", type=int, help="concurrent judge calls (default 1)")
    parser.add_argument("--budget", type=int, help="max judge invocations (cache hits are free)")
    parser.add_argument("--rpm", type=float, help="judge requests per minute")
    parser.add_argument("--max-retries", dest="max_retries", type=int, help="retries per judge call (default 2)")
    parser.add_argument("--clock", help="pin artifact timestamps to this ISO instant")
    parser.add_argument("--length-ratio", dest="length_ratio", type=float, help="length-control spread (default 0.2)")
    parser.add_argument("--edge", type=float, help="position-control edge band (default 0.2)")
    parser.add_argument("--mass", type=float, help="position-control mass threshold (default 0.8)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="argcov",
        description="Argument-coverage evaluation of generated summaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a corpus and snapshot it into the run directory")
    p.add_argument("--input", required=True, help="JSONL corpus to ingest")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("generate", help="generate summaries with the judge backend")
    p.add_argument("--length-policy", dest="length_policy",
                   choices=["match_reference", "longest_reference"],
                   help="word target (default: longest_reference when a document has several references)")
    p.add_argument("--system", help="system tag for generated summaries")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("decompose", help="split salient arguments into entailed atomic facts")
    _add_common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("score", help="judge coverage at fullset, role, and atomic level")
    p.add_argument("--level", choices=["fullset", "role", "atomic", "all"], default="all")
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bias", help="role-bias scores with length and position controls")
    p.add_argument("--controls", default="none,length,length_and_position",
                   help="comma-separated subset of none,length,length_and_position")
    _add_common(p)
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("position", help="attribute summaries to source sentences and profile positions")
    _add_common(p)
    p.set_defaults(func=cmd_position)

    p = sub.add_parser("correlate", help="position/coverage and metric/human correlations")
    p.add_argument("--position-policy", dest="position_policy", default="greedy_reference",
                   help="how salient positions are found (default greedy_reference)")
    p.add_argument("--human", help="CSV of expert ratings: doc_id,system,expert,rating")
    _add_common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("report", help="merge run artifacts into report.json and figure tables")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AuthError, TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ArgcovError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
