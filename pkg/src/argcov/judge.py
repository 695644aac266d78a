"""Judge backends: prompt rendering, invocation, caching, verdict parsing.

Two backend kinds share one calling convention:

* ``remote``: a chat-completions endpoint.  Requests are POSTed as
  ``{"model": ..., "temperature": ..., "messages": [{"role": "user",
  "content": prompt}]}`` with a bearer token taken from the ``ARC_API_KEY``
  environment variable; the reply text is the first choice's message
  content.  Transient failures are retried with exponential backoff.
* ``lexical``: a deterministic token-overlap judge used for tests and
  offline runs.  It answers every template kind by re-parsing the rendered
  prompt, so the full pipeline exercises the same code paths either way.

Responses are cached in an append-only JSONL file keyed by a SHA-256 hash
of (backend id, model name, temperature, rendered prompt); reloading keeps
the last entry per key, so re-judging replaces rather than duplicates.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping

import requests

from .errors import (
    AuthError,
    BudgetExceeded,
    EmptyFactMap,
    MissingBinding,
    OutOfRangeLikert,
    TransportError,
    UnparseableVerdict,
)
from . import text as T

API_KEY_ENV = "ARC_API_KEY"

TEMPLATE_IDS = ("decompose", "fullset", "role", "atomic", "nli", "summarize")

VERDICT_KINDS = ("fullset_rating", "role_decision", "atomic_decision", "nli_label", "fact_map")

#: template id -> verdict kind its responses parse into (summaries are raw text)
KIND_FOR_TEMPLATE = {
    "decompose": "fact_map",
    "fullset": "fullset_rating",
    "role": "role_decision",
    "atomic": "atomic_decision",
    "nli": "nli_label",
}

ERROR_TYPES = ("supported", "missing", "not_factual")
NLI_LABELS = ("entailment", "contradiction", "neutral")


# --- prompt templates --------------------------------------------------------

_PLACEHOLDER_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str

    def placeholders(self) -> tuple[str, ...]:
        seen: list[str] = []
        for match in _PLACEHOLDER_RE.finditer(self.body):
            if match.group(1) not in seen:
                seen.append(match.group(1))
        return tuple(seen)


_DECOMPOSE_BODY = """\
Task: Extract a set of atomic facts from the argument below. An atomic fact \
is a statement that can be directly inferred from the argument without \
interpretation, assumptions, or redundancy.

Guidelines:
- Extract only explicitly stated atomic facts.
- Do not repeat facts and do not infer facts from external knowledge.
- Maintain granularity: each fact should be minimal yet complete.
- Each argument must yield at least one atomic fact.
- Output a valid dictionary object where each key is "fact1", "fact2", and so \
on, and each value is the corresponding atomic fact.
- Do not generate any text beyond the dictionary object.

Example output format:
{
    "fact1": "First atomic fact",
    "fact2": "Second atomic fact"
}

Input:
{argument}

Output:"""

_FULLSET_BODY = """\
Task: Evaluate how well the summary covers the set of arguments provided. \
Rate the coverage on a scale of 1 to 4:
1 - The summary covers none of the arguments.
2 - The summary covers few of the arguments.
3 - The summary covers most of the arguments.
4 - The summary covers all of the arguments.

Output a JSON object with keys "explanation" and "rating". Do not generate \
any extra text beyond the JSON output.

Arguments:
{reference_arguments}

Summary:
{generated_summary}

Output:"""

_ROLE_BODY = """\
Task: Decide whether the summary fully supports the argument. Answer 1 if \
every part of the argument is covered by the summary, and 0 otherwise.

Output a JSON object with keys "explanation" and "decision". Do not generate \
any extra text beyond the JSON output.

Argument:
{argument}

Summary:
{summary}

Output:"""

_ATOMIC_BODY = """\
Task: Decide whether the atomic fact below, given as the argument, is \
supported by the summary. Answer with one of:
(1, "supported") - the summary states or entails the fact.
(0, "missing") - the summary omits the fact.
(0, "not-factual") - the summary contradicts or distorts the fact.

Output a JSON object with keys "explanation" and "decision". Do not generate \
any extra text beyond the JSON output.

Argument:
{argument}

Summary:
{summary}

Output:"""

_NLI_BODY = """\
Task: Decide whether the premise entails the hypothesis. Answer with one of \
the labels "entailment", "contradiction", or "neutral".

Output a JSON object with keys "explanation" and "label". Do not generate \
any extra text beyond the JSON output.

Premise:
{premise}

Hypothesis:
{hypothesis}

Output:"""

_SUMMARIZE_BODY = """\
Read the following text and summarize it: {document}. Summarize in \
{word_target} words. Summary:"""

TEMPLATES: Mapping[str, PromptTemplate] = {
    "decompose": PromptTemplate("decompose", _DECOMPOSE_BODY),
    "fullset": PromptTemplate("fullset", _FULLSET_BODY),
    "role": PromptTemplate("role", _ROLE_BODY),
    "atomic": PromptTemplate("atomic", _ATOMIC_BODY),
    "nli": PromptTemplate("nli", _NLI_BODY),
    "summarize": PromptTemplate("summarize", _SUMMARIZE_BODY),
}


def render_prompt(template: PromptTemplate | str, bindings: Mapping[str, str]) -> str:
    """Fill ``template`` placeholders from ``bindings``; byte-deterministic.

    Raises :class:`MissingBinding` naming the first unfilled placeholder.
    Extra bindings are ignored.  Literal braces in the template body that do
    not form a ``{lower_snake}`` placeholder pass through untouched.
    """
    if isinstance(template, str):
        template = TEMPLATES[template]

    def fill(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in bindings:
            raise MissingBinding(name)
        return str(bindings[name])

    return _PLACEHOLDER_RE.sub(fill, template.body)


# --- backend descriptors ------------------------------------------------------


@dataclass(frozen=True)
class JudgeBackend:
    """Configuration for one judge.

    ``options`` carries lexical-judge knobs as key/value pairs, e.g.
    ``(("mode", "bigram"),)`` or ``(("split_connectives", "and"),)``.  The
    backend id should reflect any options so cache keys stay distinct.
    """

    backend_id: str
    kind: str
    endpoint: str = ""
    model_name: str = ""
    temperature: float = 0.0
    max_retries: int = 2
    timeout: float = 60.0
    max_tokens: int | None = None
    requests_per_minute: float | None = None
    options: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("remote", "lexical"):
            raise ValueError(f"backend kind must be remote or lexical, got {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote backends need an endpoint")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def option(self, key: str, default: str = "") -> str:
        for k, v in self.options:
            if k == key:
                return v
        return default


def lexical_backend(backend_id: str = "lexical", **options: str) -> JudgeBackend:
    """Convenience constructor for the deterministic judge."""
    return JudgeBackend(
        backend_id=backend_id,
        kind="lexical",
        model_name="lexical",
        options=tuple(sorted(options.items())),
    )


# --- budget and rate limiting ----------------------------------------------------


class CallBudget:
    """Caps the number of cache-missing judge invocations in one run."""

    def __init__(self, max_calls: int | None):
        self.max_calls = max_calls
        self.used = 0
        self._lock = threading.Lock()

    def consume(self) -> None:
        with self._lock:
            if self.max_calls is not None and self.used >= self.max_calls:
                raise BudgetExceeded(
                    f"judge call budget of {self.max_calls} exhausted"
                )
            self.used += 1


class TokenBucket:
    """Simple token-bucket limiter; ``acquire`` blocks until a slot frees."""

    def __init__(self, requests_per_minute: float, clock: Callable[[], float] = time.monotonic):
        if requests_per_minute <= 0:
            raise ValueError("requests_per_minute must be positive")
        self.capacity = requests_per_minute
        self.rate = requests_per_minute / 60.0
        self.tokens = requests_per_minute
        self.clock = clock
        self.updated = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


# --- cache ----------------------------------------------------------------------


def cache_key(backend_id: str, model_name: str, temperature: float, prompt: str) -> str:
    """SHA-256 hex digest identifying one judged prompt."""
    payload = "\x00".join((backend_id, model_name, repr(float(temperature)), prompt))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    key: str
    raw_response: str
    kind: str
    created_at: str


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class VerdictCache:
    """Append-only JSONL store of raw judge responses.

    Records are ``{"key", "raw_response", "kind", "created_at"}``.  Loading
    keeps the last record per key, so replacing an entry is an append.  A
    ``clock`` callable may be supplied to pin timestamps for reproducible runs.
    """

    def __init__(self, path: str | Path | None, clock: Callable[[], str] = _utcnow):
        self.path = Path(path) if path is not None else None
        self.clock = clock
        self._entries: dict[str, CacheEntry] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    entry = CacheEntry(
                        obj["key"], obj["raw_response"], obj["kind"], obj["created_at"]
                    )
                    self._entries[entry.key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> CacheEntry | None:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, raw_response: str, kind: str) -> CacheEntry:
        entry = CacheEntry(key, raw_response, kind, self.clock())
        with self._lock:
            self._entries[key] = entry
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8", newline="\n") as handle:
                    handle.write(
                        json.dumps(
                            {
                                "key": entry.key,
                                "raw_response": entry.raw_response,
                                "kind": entry.kind,
                                "created_at": entry.created_at,
                            },
                            ensure_ascii=False,
                        )
                    )
                    handle.write("\n")
        return entry


# --- verdicts --------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    """A parsed judge response; exactly the fields for ``kind`` are set."""

    kind: str
    rating: int | None = None
    decision: int | None = None
    error_type: str | None = None
    label: str | None = None
    facts: tuple[str, ...] = ()
    explanation: str = ""

    def __post_init__(self) -> None:
        if self.kind not in VERDICT_KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")
        if self.kind == "fullset_rating":
            if self.rating not in (1, 2, 3, 4):
                raise OutOfRangeLikert(f"rating must be 1..4, got {self.rating}")
        elif self.kind == "role_decision":
            if self.decision not in (0, 1):
                raise ValueError(f"decision must be 0 or 1, got {self.decision}")
        elif self.kind == "atomic_decision":
            if self.decision not in (0, 1):
                raise ValueError(f"decision must be 0 or 1, got {self.decision}")
            if self.error_type not in ERROR_TYPES:
                raise ValueError(f"unknown error type {self.error_type!r}")
            if (self.decision == 1) != (self.error_type == "supported"):
                raise ValueError(
                    f"decision {self.decision} conflicts with error type {self.error_type!r}"
                )
        elif self.kind == "nli_label":
            if self.label not in NLI_LABELS:
                raise ValueError(f"unknown NLI label {self.label!r}")
        elif self.kind == "fact_map":
            if not self.facts:
                raise ValueError("a fact map carries at least one fact")


_TUPLE_DECISION_RE = re.compile(r'("decision"\s*:\s*)\(([^)]*)\)')


def _balanced_objects(raw: str) -> Iterable[str]:
    """Yield every balanced ``{...}`` substring of ``raw``, left to right."""
    idx = 0
    while True:
        start = raw.find("{", idx)
        if start < 0:
            return
        depth = 0
        in_string = False
        escaped = False
        for pos in range(start, len(raw)):
            ch = raw[pos]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield raw[start : pos + 1]
                    break
        idx = start + 1


def _first_json_object(raw: str) -> dict:
    """Extract the first balanced JSON object in ``raw``, tolerating preambles."""
    cleaned = _TUPLE_DECISION_RE.sub(lambda m: m.group(1) + "[" + m.group(2) + "]", raw)
    for candidate in _balanced_objects(cleaned):
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise UnparseableVerdict(raw)


def _coerce_int(value: object) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        stripped = value.strip()
        if re.fullmatch(r"-?\d+", stripped):
            return int(stripped)
    return None

def _normalize_error_type(value: object) -> str | None:
    if not isinstance(value, str):
        return None
    slug = re.sub(r"[\s_-]+", "_", value.strip().lower())
    if slug in ("supported", "missing"):
        return slug
    if slug in ("not_factual", "notfactual", "non_factual", "nonfactual"):
        return "not_factual"
    return None


_FACT_KEY_RE = re.compile(r"fact[_ ]?(\d+)", re.IGNORECASE)


def parse_verdict(kind: str, raw: str) -> Verdict:
    """Parse a raw judge response into a :class:`Verdict` of ``kind``.

    The accepted grammar is deliberately tolerant of the drift seen in model
    output: a preamble before the JSON object, string-typed numbers, the
    atomic decision as either a ``[d, "e"]`` pair (parenthesized tuples are
    normalized first) or separate decision and error fields.  Anything else
    raises :class:`UnparseableVerdict`; a rating outside 1..4 raises
    :class:`OutOfRangeLikert`.  Both signal the caller to re-invoke.
    """
    if kind not in VERDICT_KINDS:
        raise ValueError(f"unknown verdict kind {kind!r}")
    if not raw or not raw.strip():
        raise UnparseableVerdict(raw, reason="empty response")
    obj = _first_json_object(raw)
    explanation = obj.get("explanation", "")
    if not isinstance(explanation, str):
        explanation = json.dumps(explanation, ensure_ascii=False)

    if kind == "fullset_rating":
        rating = _coerce_int(obj.get("rating"))
        if rating is None:
            raise UnparseableVerdict(raw, reason="no usable rating field")
        if rating not in (1, 2, 3, 4):
            raise OutOfRangeLikert(f"rating {rating} outside 1..4")
        return Verdict("fullset_rating", rating=rating, explanation=explanation)

    if kind == "role_decision":
        decision = _coerce_int(obj.get("decision"))
        if decision not in (0, 1):
            raise UnparseableVerdict(raw, reason="no usable 0/1 decision")
        return Verdict("role_decision", decision=decision, explanation=explanation)

    if kind == "atomic_decision":
        decision_field = obj.get("decision")
        decision: int | None = None
        error_type: str | None = None
        if isinstance(decision_field, list) and len(decision_field) == 2:
            decision = _coerce_int(decision_field[0])
            error_type = _normalize_error_type(decision_field[1])
        else:
            decision = _coerce_int(decision_field)
            for key in ("error", "error_type", "label"):
                if key in obj:
                    error_type = _normalize_error_type(obj[key])
                    break
            if error_type is None and decision == 1:
                error_type = "supported"
        if decision not in (0, 1) or error_type is None:
            raise UnparseableVerdict(raw, reason="no usable (decision, error) pair")
        if (decision == 1) != (error_type == "supported"):
            raise UnparseableVerdict(
                raw, reason=f"decision {decision} conflicts with {error_type!r}"
            )
        return Verdict(
            "atomic_decision",
            decision=decision,
            error_type=error_type,
            explanation=explanation,
        )

    if kind == "nli_label":
        label = obj.get("label")
        if isinstance(label, str) and label.strip().lower() in NLI_LABELS:
            return Verdict("nli_label", label=label.strip().lower(), explanation=explanation)
        raise UnparseableVerdict(raw, reason="no usable NLI label")

    # fact_map
    numbered: list[tuple[int, str]] = []
    for key, value in obj.items():
        match = _FACT_KEY_RE.fullmatch(key.strip())
        if match and isinstance(value, str) and value.strip():
            numbered.append((int(match.group(1)), value.strip()))
    facts = [v for _, v in sorted(numbered, key=lambda kv: kv[0])]
    if not facts and isinstance(obj.get("facts"), list):
        facts = [v.strip() for v in obj["facts"] if isinstance(v, str) and v.strip()]
    if not facts:
        raise EmptyFactMap(raw)
    return Verdict("fact_map", facts=tuple(facts), explanation=explanation)


# --- lexical judge ---------------------------------------------------------------


def _contained(premise: str, hypothesis: str) -> bool:
    """Unigram containment over content tokens."""
    premise_tokens = T.content_token_set(premise)
    return all(tok in premise_tokens for tok in T.content_tokens(hypothesis))


def _bigram_contained(premise: str, hypothesis: str) -> bool:
    """Adjacent-pair containment over overlap tokens (stopwords kept).

    Word order matters here, which lets this mode reject recombinations of
    premise words ("applied for denial of access") that plain containment
    accepts.
    """
    p_tokens = T.overlap_tokens(premise)
    h_tokens = T.overlap_tokens(hypothesis)
    if not h_tokens:
        return True
    if len(h_tokens) == 1:
        return h_tokens[0] in p_tokens
    p_bigrams = {(a, b) for a, b in zip(p_tokens, p_tokens[1:])}
    return all((a, b) in p_bigrams for a, b in zip(h_tokens, h_tokens[1:]))


def lexical_entail(premise: str, hypothesis: str) -> Verdict:
    """Deterministic NLI double: entailment iff every content token of the
    hypothesis occurs in the premise, else neutral.

    Reflexive by construction, and monotone: extending the premise never
    flips entailment to neutral.
    """
    label = "entailment" if _contained(premise, hypothesis) else "neutral"
    return Verdict("nli_label", label=label, explanation="lexical containment")


_NEGATORS = frozenset({"not", "no", "never", "none", "neither", "nor", "without"})


def _negation_flip(fact: str, summary: str) -> bool:
    """True when the summary states the fact's tokens under negation."""
    fact_tokens = set(T.content_tokens(fact))
    if _NEGATORS & set(T.overlap_tokens(fact)):
        return False
    summary_tokens = T.overlap_tokens(summary)
    for pos, tok in enumerate(summary_tokens):
        if tok in _NEGATORS:
            window = summary_tokens[pos + 1 : pos + 3]
            if any(T.stem(w) in fact_tokens for w in window):
                return True
    return False


def _section(prompt: str, label: str, *stops: str) -> str:
    """Extract the text between ``label`` and the next stop label (or EOF)."""
    start = prompt.find(label)
    if start < 0:
        raise UnparseableVerdict(prompt, reason=f"lexical judge found no {label!r} section")
    start += len(label)
    end = len(prompt)
    for stop in stops:
        pos = prompt.find(stop, start)
        if 0 <= pos < end:
            end = pos
    return prompt[start:end].strip()


def _split_facts(argument: str, connectives: tuple[str, ...]) -> list[str]:
    """Clause-split an argument: sentence-final punctuation, then connectives."""
    pieces = re.split(r"(?<=[.;!?])\s+", argument.strip())
    if connectives:
        pattern = r"\s+(?:" + "|".join(re.escape(c) for c in connectives) + r")\s+"
        pieces = [part for piece in pieces for part in re.split(pattern, piece)]
    cleaned = [p.strip() for p in pieces if p.strip()]
    return cleaned or [argument.strip()]


def _json_reply(payload: dict) -> str:
    return json.dumps(payload, ensure_ascii=False)


def _lexical_response(backend: JudgeBackend, template_id: str, prompt: str) -> str:
    """Answer a rendered prompt deterministically.

    Sections are recovered from the prompt text via the template's own
    labels, so the lexical judge runs through the exact render/parse cycle
    the remote judge does.  Modes: the default judges by containment;
    ``accept_all`` and ``reject_all`` force the corresponding verdicts;
    ``bigram`` makes the NLI double order-sensitive.
    """
    mode = backend.option("mode")

    if template_id == "summarize":
        document = _section(prompt, "Read the following text and summarize it:", ". Summarize in")
        target_text = _section(prompt, ". Summarize in", "words. Summary:")
        target = int(target_text)
        return " ".join(T.words(document)[:target])

    if template_id == "decompose":
        argument = _section(prompt, "Input:\n", "\n\nOutput:")
        connectives = tuple(
            c for c in backend.option("split_connectives").split(",") if c
        )
        facts = _split_facts(argument, connectives)
        return _json_reply({f"fact{i}": fact for i, fact in enumerate(facts, start=1)})

    if template_id == "nli":
        premise = _section(prompt, "Premise:\n", "\n\nHypothesis:")
        hypothesis = _section(prompt, "Hypothesis:\n", "\n\nOutput:")
        if mode == "accept_all":
            label = "entailment"
        elif mode == "reject_all":
            label = "neutral"
        elif mode == "bigram":
            label = "entailment" if _bigram_contained(premise, hypothesis) else "neutral"
        else:
            label = lexical_entail(premise, hypothesis).label
        return _json_reply({"explanation": f"lexical {mode or 'unigram'}", "label": label})

    if template_id == "fullset":
        block = _section(prompt, "Arguments:\n", "\n\nSummary:")
        summary = _section(prompt, "Summary:\n", "\n\nOutput:")
        # argument lines arrive as "role: text"; judge the text alone
        items = [
            re.sub(r"^[a-z_]+:\s*", "", line.strip())
            for line in block.splitlines()
            if line.strip()
        ]
        if mode == "accept_all":
            covered, total = len(items), len(items)
        elif mode == "reject_all":
            covered, total = 0, len(items)
        else:
            total = len(items)
            covered = sum(1 for item in items if _contained(summary, item))
        if total and covered == total:
            rating = 4
        elif 2 * covered >= total and covered:
            rating = 3
        elif covered:
            rating = 2
        else:
            rating = 1
        return _json_reply(
            {"explanation": f"{covered}/{total} arguments covered", "rating": rating}
        )

    argument = _section(prompt, "Argument:\n", "\n\nSummary:")
    summary = _section(prompt, "Summary:\n", "\n\nOutput:")
    if mode == "accept_all":
        supported = True
    elif mode == "reject_all":
        supported = False
    else:
        supported = _contained(summary, argument)

    if template_id == "role":
        return _json_reply(
            {"explanation": "lexical containment", "decision": 1 if supported else 0}
        )
    if template_id == "atomic":
        if supported and mode != "accept_all" and _negation_flip(argument, summary):
            decision: list = [0, "not-factual"]
        elif supported:
            decision = [1, "supported"]
        elif mode != "reject_all" and _negation_flip(argument, summary):
            decision = [0, "not-factual"]
        else:
            decision = [0, "missing"]
        return _json_reply({"explanation": "lexical containment", "decision": decision})
    raise ValueError(f"unknown template id {template_id!r}")


# --- invocation -------------------------------------------------------------------


def _remote_call(backend: JudgeBackend, prompt: str) -> str:
    api_key = os.environ.get(API_KEY_ENV, "")
    if not api_key:
        raise AuthError(f"{API_KEY_ENV} is not set")
    body: dict = {
        "model": backend.model_name,
        "temperature": backend.temperature,
        "messages": [{"role": "user", "content": prompt}],
    }
    if backend.max_tokens is not None:
        body["max_tokens"] = backend.max_tokens
    headers = {"Authorization": f"Bearer {api_key}"}
    last_error = "no attempt made"
    for attempt in range(backend.max_retries + 1):
        if attempt:
            time.sleep(min(30.0, 2.0 ** (attempt - 1)))
        try:
            resp = requests.post(
                backend.endpoint, json=body, headers=headers, timeout=backend.timeout
            )
        except requests.RequestException as exc:
            last_error = f"request failed: {exc}"
            continue
        if resp.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credential (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            continue
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc
        if not isinstance(content, str):
            raise TransportError("completion content is not text")
        return content
    raise TransportError(
        f"{backend.backend_id}: giving up after {backend.max_retries + 1} attempts ({last_error})"
    )


def invoke(
    backend: JudgeBackend,
    template_id: str,
    bindings: Mapping[str, str],
    *,
    cache: VerdictCache | None = None,
    budget: CallBudget | None = None,
    limiter: TokenBucket | None = None,
    force_fresh: bool = False,
) -> str:
    """Render the template, consult the cache, and call the backend on a miss.

    Cache hits are free; only actual backend calls draw on ``budget`` and
    ``limiter``.  ``force_fresh`` skips the cache read (the fresh response
    still overwrites the cached entry), which is how re-judging after a
    parse failure avoids replaying the same bad response.
    """
    prompt = render_prompt(template_id, bindings)
    kind = KIND_FOR_TEMPLATE.get(template_id, "raw_text")
    key = cache_key(backend.backend_id, backend.model_name, backend.temperature, prompt)
    if cache is not None and not force_fresh:
        hit = cache.get(key)
        if hit is not None:
            return hit.raw_response
    if budget is not None:
        budget.consume()
    if backend.kind == "lexical":
        raw = _lexical_response(backend, template_id, prompt)
    else:
        if limiter is not None:
            limiter.acquire()
        raw = _remote_call(backend, prompt)
    if cache is not None:
        cache.put(key, raw, kind)
    return raw


def judge_call(
    backend: JudgeBackend,
    template_id: str,
    bindings: Mapping[str, str],
    *,
    cache: VerdictCache | None = None,
    budget: CallBudget | None = None,
    limiter: TokenBucket | None = None,
) -> Verdict:
    """Invoke and parse, re-invoking on unparseable output.

    Up to ``backend.max_retries`` fresh calls follow a failed parse; the
    final failure propagates so callers can record the item as unjudged
    rather than defaulting it.
    """
    kind = KIND_FOR_TEMPLATE[template_id]
    failure: UnparseableVerdict | OutOfRangeLikert | None = None
    for attempt in range(backend.max_retries + 1):
        raw = invoke(
            backend,
            template_id,
            bindings,
            cache=cache,
            budget=budget,
            limiter=limiter,
            force_fresh=attempt > 0,
        )
        try:
            return parse_verdict(kind, raw)
        except (UnparseableVerdict, OutOfRangeLikert) as exc:
            failure = exc
    assert failure is not None
    raise failure


# --- distillation export -----------------------------------------------------------


def export_distillation(
    items: Iterable[tuple[tuple[str, str], Verdict]], path: str | Path
) -> int:
    """Write judged pairs as JSONL training examples; returns the row count.

    Role verdicts become ``{"argument", "summary", "label"}`` rows with
    labels supported/unsupported; atomic verdicts become ``{"fact",
    "summary", "label"}`` rows with labels supported/missing/not-factual.
    Other verdict kinds are skipped.
    """
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for (left, summary), verdict in items:
            if verdict.kind == "role_decision":
                row = {
                    "argument": left,
                    "summary": summary,
                    "label": "supported" if verdict.decision == 1 else "unsupported",
                }
            elif verdict.kind == "atomic_decision":
                assert verdict.error_type is not None
                row = {
                    "fact": left,
                    "summary": summary,
                    "label": verdict.error_type.replace("_", "-"),
                }
            else:
                continue
            handle.write(json.dumps(row, ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count
