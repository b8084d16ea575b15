"""Exception hierarchy shared by all seldscape modules."""


class SeldscapeError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(SeldscapeError, ValueError):
    """A position lies outside the room or a geometric setup is degenerate."""


class DegenerateError(GeometryError):
    """Coincident points or an otherwise undefined direction."""


class RangeError(SeldscapeError, ValueError):
    """A scalar parameter is outside its admissible interval."""


class FormatError(SeldscapeError, ValueError):
    """Mismatched sample rates, channel counts or malformed file content."""


class ParseError(FormatError):
    """A text file (DCASE CSV) could not be parsed; carries the line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class SchemaError(FormatError):
    """Scene configuration violates the schema. ``violations`` holds (pointer, message) pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{ptr or '/'}: {msg}" for ptr, msg in self.violations]
        super().__init__("invalid scene config:\n  " + "\n  ".join(lines))


class AnalysisError(SeldscapeError):
    """A measurement (e.g. T60) cannot be computed from the given signal."""


class ConditioningError(SeldscapeError, ValueError):
    """Capsule layout too ill-conditioned for least-squares encoding."""

    def __init__(self, cond):
        self.cond = cond
        super().__init__(f"encoding matrix is ill-conditioned (condition number {cond:.3g})")


class NoEstimateError(SeldscapeError):
    """The analysis frame is silent, so no direction can be estimated."""


class CorpusError(SeldscapeError):
    """Audio corpus is empty or a label has no matching subdirectory."""


class SamplingError(SeldscapeError):
    """A distribution could not produce a value (e.g. truncation exhausted)."""


class LayoutError(SeldscapeError):
    """A dataset directory does not follow the expected layout."""


class PolyphonyError(SeldscapeError, ValueError):
    """Too many simultaneously active tracks in a frame."""
