"""Exception hierarchy shared by all airgap modules."""

from __future__ import annotations


class AirgapError(Exception):
    """Base class for every error raised by this package."""


class WavFormatError(AirgapError, ValueError):
    """A RIFF/WAVE file is structurally broken."""

    def __init__(self, chunk: str, message: str):
        self.chunk = chunk
        super().__init__(f"malformed '{chunk}' chunk: {message}")


class UnsupportedEncodingError(AirgapError, ValueError):
    """A well-formed WAV file uses a sample encoding we do not read."""


class DomainError(AirgapError, ValueError):
    """Input outside the mathematical domain of an operation (silence, empty, zero power)."""


class RateMismatchError(AirgapError, ValueError):
    pass


class ManifestError(AirgapError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CellShortfallError(ManifestError):
    """A pool cell holds fewer files than the requested per-cell count."""

    def __init__(self, cell: tuple, available: int, requested: int):
        self.cell = cell
        self.available = available
        self.requested = requested
        super().__init__(
            f"pool cell {'/'.join(str(c) for c in cell)} has {available} files, "
            f"needs {requested} (short by {requested - available})"
        )


class JoinError(AirgapError, KeyError):
    """Score records that cannot be matched to any manifest entry."""

    def __init__(self, offenders: list[str]):
        self.offenders = list(offenders)
        shown = ", ".join(self.offenders[:10])
        more = "" if len(self.offenders) <= 10 else f" (+{len(self.offenders) - 10} more)"
        super().__init__(f"{len(self.offenders)} unjoinable file ids: {shown}{more}")

    def __str__(self) -> str:
        return self.args[0]


class UndefinedCorrelationError(DomainError):
    pass
