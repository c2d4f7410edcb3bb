"""Exception types shared across the engine."""


class CBRError(Exception):
    """Base class for all engine errors."""


class GraphParseError(CBRError, ValueError):
    """A graph record is malformed.

    ``locus`` names the offending field path (``nodes[2].concept``) and
    ``line`` the 1-based line in the input stream when known.
    """

    def __init__(self, message, locus=None, line=None):
        self.locus = locus
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if locus:
            where.append(locus)
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class GraphIntegrityError(GraphParseError):
    """A graph record parses but violates a graph invariant."""


class CaseRecordError(CBRError, ValueError):
    """A case corpus record is malformed; ``index`` is its 0-based position."""

    def __init__(self, message, index=None):
        self.index = index
        prefix = f"record {index}: " if index is not None else ""
        super().__init__(prefix + message)


class EmptyCaseBaseError(CBRError):
    """Retrieval was asked to run against an empty effective case base."""


class DegenerateDatasetError(CBRError, ValueError):
    """A ranking dataset cannot support training (no mixed-label question)."""


class ConfigError(CBRError, ValueError):
    """Invalid configuration key or value."""
