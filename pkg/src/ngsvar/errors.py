"""Exception hierarchy shared by the pipeline stages."""


class NgsvarError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class IngestError(NgsvarError, ValueError):
    pass


class MissingCountry(IngestError):
    pass


class MalformedHeader(IngestError):
    pass


class MalformedRow(IngestError):
    pass


class EmptyFile(IngestError):
    pass


class DuplicateDate(IngestError):
    pass


class MissingSeries(IngestError):
    pass


class DuplicateSeries(IngestError):
    pass


class UnfillableGap(IngestError):
    pass


class LengthTooShort(NgsvarError, ValueError):
    pass


class SegmentTooShort(NgsvarError, ValueError):
    pass


class RankDeficient(NgsvarError, ValueError):
    def __init__(self, column: int, name: str | None = None):
        self.column = column
        self.name = name
        label = f" ({name})" if name else ""
        super().__init__(f"design matrix is rank deficient at column {column}{label}")


class SingularB(NgsvarError, ValueError):
    pass


class ZeroDiagonalUnresolvable(NgsvarError, ValueError):
    pass


class ConfigError(NgsvarError):
    """Bad or incomplete run configuration; the CLI maps this to exit code 2."""


class NoConvergence(UserWarning):
    """Issued when every NGML restart stopped without meeting the tolerances."""
