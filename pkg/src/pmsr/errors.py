"""Exception hierarchy shared across the package.

Every error that crosses a module boundary has a named class here so callers
can catch precisely what they expect instead of matching message strings.
"""


class PMSRError(Exception):
    """Base class for all package errors."""


# --- proposals / schemas ---

class InvalidProposal(PMSRError):
    """Proposal violates one of its structural invariants."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class SchemaViolation(PMSRError):
    """Map output does not conform to the declared output schema."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class InvalidSignature(PMSRError):
    pass


class ParseError(PMSRError):
    pass


# --- transport ---

class UnknownAddress(PMSRError):
    pass


# --- policy ---

class NotPending(PMSRError):
    """Approval requested when no approval is outstanding."""


class BudgetExhausted(PMSRError):
    """Charging the requested epsilon would overrun the privacy budget."""


class InvalidEpsilon(PMSRError):
    pass


# --- mapper ---

class MissingField(PMSRError):
    pass


class EmptyDataset(PMSRError):
    pass


class OutOfRange(PMSRError):
    """Value outside the fixed-point encodable range."""


# --- secret sharing ---

class MissingParty(PMSRError):
    pass


class DuplicateParty(PMSRError):
    pass


class PartyMismatch(PMSRError):
    pass


class InvalidThreshold(PMSRError):
    pass


class InsufficientShares(PMSRError):
    pass


class DuplicateX(PMSRError):
    pass


class EvaluationPointMismatch(PMSRError):
    pass


# --- homomorphic encryption ---

class PlaintextOutOfRange(PMSRError):
    pass


class MalformedCiphertext(PMSRError):
    pass


# --- reduce functions ---

class Empty(PMSRError):
    pass


class ZeroMean(PMSRError):
    pass


class ZeroTotal(PMSRError):
    pass


class DimensionMismatch(PMSRError):
    pass


# --- runtime ---

class UnknownComputation(PMSRError):
    pass


class PhaseClosed(PMSRError):
    pass


# --- sim / stats ---

class ConfigInvalid(PMSRError):
    pass


class CategoryMismatch(PMSRError):
    pass


class ZeroBaseline(PMSRError):
    pass
