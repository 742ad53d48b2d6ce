"""Exception hierarchy shared across the toolkit."""


class PairAugError(Exception):
    """Base class for all toolkit errors."""


class AnnotationParseError(PairAugError):
    """Annotation file is malformed (bad JSON, missing keys, wrong types)."""


class ValidationError(PairAugError):
    """A sample violates a structural invariant (span/box out of range, etc.)."""


class ContractViolation(PairAugError):
    """A caller broke an operation precondition."""


class ParameterError(PairAugError):
    """An out-of-range parameter value (e.g. non-positive temperature)."""
