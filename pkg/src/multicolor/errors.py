"""Exception hierarchy shared across the package."""


class MultiColorError(Exception):
    """Base class for all errors raised by this package."""


class EmptyPath(MultiColorError, ValueError):
    pass


class IllegalSegment(MultiColorError, ValueError):
    pass


class InvalidIssue(MultiColorError, ValueError):
    pass


class ConflictingKind(MultiColorError):
    """Same qualified id mapped to different entity kinds across merged graphs."""


class UnknownNode(MultiColorError, KeyError):
    pass


class DuplicateUnit(MultiColorError, ValueError):
    pass


class DuplicateIssueId(MultiColorError, ValueError):
    pass


class DimensionMismatch(MultiColorError, ValueError):
    pass


class FingerprintMismatch(MultiColorError):
    """A persisted index was built with a different embedder."""


class UnknownIssue(MultiColorError, KeyError):
    pass


class EmptyCandidateSet(MultiColorError, ValueError):
    pass


class IndexMismatch(MultiColorError):
    """Indexes and graph were built from different repository snapshots."""


class EmptyCorpus(MultiColorError, ValueError):
    pass


class IoError(MultiColorError, OSError):
    """Repository root or an artifact could not be read."""
