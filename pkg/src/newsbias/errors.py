"""Exception hierarchy.

Each family carries the process exit code used by the command-line driver.
"""

from __future__ import annotations


class NewsBiasError(Exception):
    exit_code = 1


class ConfigError(NewsBiasError):
    exit_code = 2


class MissingArtifact(NewsBiasError):
    exit_code = 3

    def __init__(self, path):
        super().__init__(f"missing artifact: {path}")
        self.path = path


# -- ingest ------------------------------------------------------------------

class IngestError(NewsBiasError):
    exit_code = 4


class MissingHeaderField(IngestError):
    def __init__(self, field: str, source: str = ""):
        where = f" in {source}" if source else ""
        super().__init__(f"missing header field {field!r}{where}")
        self.field = field


class UnparsableDate(IngestError):
    def __init__(self, value: str, source: str = ""):
        where = f" in {source}" if source else ""
        super().__init__(f"unparsable date {value!r}{where}")
        self.value = value


class EmptyBody(IngestError):
    def __init__(self, source: str = ""):
        super().__init__(f"transcript has no statement lines{(' (' + source + ')') if source else ''}")


class UnknownNetwork(IngestError):
    def __init__(self, network: str, allowed):
        super().__init__(f"network {network!r} not in configured set {sorted(allowed)}")
        self.network = network


# -- entities ----------------------------------------------------------------

class RecognizerUnavailable(NewsBiasError):
    exit_code = 4


# -- stance ------------------------------------------------------------------

class StanceError(NewsBiasError):
    exit_code = 5


class TransportError(StanceError):
    pass


class MalformedResponse(StanceError):
    def __init__(self, reply: str):
        super().__init__(f"could not parse classifier reply: {reply!r}")
        self.reply = reply


# -- matrices / clustering ---------------------------------------------------

class NumericalError(NewsBiasError):
    exit_code = 6


class EmptyMonth(NumericalError):
    pass


class DegenerateProgram(NumericalError):
    pass


class ProgramSetMismatch(NumericalError):
    pass


class IsolatedProgram(NumericalError):
    pass


class EigensolverFailure(NumericalError):
    pass


class KMismatch(NumericalError):
    pass


class ItemSetMismatch(NumericalError):
    pass


class InsufficientData(NumericalError):
    pass


class TooFewPrograms(NumericalError):
    pass


class SpecError(NewsBiasError):
    exit_code = 2
