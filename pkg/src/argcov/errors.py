"""Exception types shared across the package.

Every failure mode that callers are expected to handle has a dedicated
class here so that the CLI can map exceptions to exit codes and tests can
assert on precise conditions instead of matching message strings.
"""
from __future__ import annotations


class ArgcovError(Exception):
    """Base class for all package-specific errors."""


# --- corpus -----------------------------------------------------------------

class MalformedRecord(ArgcovError):
    """A JSONL line could not be parsed into a document record."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DuplicateDocId(ArgcovError):
    """Two records in one corpus share a doc_id."""


class UnknownRole(ArgcovError):
    """A role name is not part of the active role scheme."""


class SpanOutOfBounds(ArgcovError):
    """A character span does not fit inside the document text."""


class PolicyInapplicable(ArgcovError):
    """A saliency policy cannot be evaluated on the given document."""


# --- judge ------------------------------------------------------------------

class MissingBinding(ArgcovError):
    """A prompt template placeholder has no value in the binding set."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no binding for placeholder {name!r}")


class TransportError(ArgcovError):
    """A remote judge call failed after exhausting its retry budget."""


class AuthError(ArgcovError):
    """The remote judge rejected or never received a credential."""


class BudgetExceeded(ArgcovError):
    """The run hit its configured cap on judge invocations."""


class UnparseableVerdict(ArgcovError):
    """The judge response could not be parsed into the expected verdict."""

    def __init__(self, raw: str, reason: str = "no parseable verdict"):
        self.raw = raw
        self.reason = reason
        super().__init__(f"{reason}: {raw[:200]!r}")


class OutOfRangeLikert(ArgcovError):
    """A coverage rating fell outside the 1..4 scale."""


class EmptyFactMap(UnparseableVerdict):
    """A decomposition response contained no usable facts."""

    def __init__(self, raw: str):
        super().__init__(raw, reason="fact map is empty")


# --- scoring ----------------------------------------------------------------

class EmptyArgumentSet(ArgcovError):
    """A score was requested over zero arguments."""


class NoArgumentsOfRole(ArgcovError):
    """A per-role score was requested for a role with no arguments."""


# --- bias -------------------------------------------------------------------

class NoArguments(ArgcovError):
    """A prior fraction was requested over an empty argument scope."""


class ZeroFraction(ArgcovError):
    """A bias score was requested with a zero role prior."""


# --- position ---------------------------------------------------------------

class IndexOutOfRange(ArgcovError):
    """A sentence index does not exist in a document of the given length."""


class NoSalientArguments(ArgcovError):
    """A position statistic was requested for a document with no salient units."""


# --- stats ------------------------------------------------------------------

class DegenerateSeries(ArgcovError):
    """A correlation was requested on a series with no usable variation."""


class AlignmentMismatch(ArgcovError):
    """Two score tables do not cover the same items."""


# --- cli --------------------------------------------------------------------

class MissingUpstream(ArgcovError):
    """A pipeline stage needs an artifact that an earlier stage has not produced."""

    def __init__(self, artifact: str):
        self.artifact = artifact
        super().__init__(f"missing upstream artifact: {artifact}")
