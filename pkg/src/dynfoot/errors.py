"""Exception hierarchy.

Every error carries the process exit code the command line maps it to.
"""


class DynfootError(Exception):
    exit_code = 1


class ConfigError(DynfootError, ValueError):
    exit_code = 2


class DataError(DynfootError, ValueError):
    exit_code = 3


class SamplerError(DynfootError, RuntimeError):
    exit_code = 4


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing required column {name!r}")
        self.name = name


class BadRow(DataError):
    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class OddTeamCount(DataError):
    pass


class EmptyHoldout(DataError):
    pass


class UnknownTeam(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class PeriodOutOfRange(DataError, IndexError):
    pass


class UnmatchedFixture(DataError):
    pass


class EmptyInput(DynfootError, ValueError):
    pass


class NonFinite(DynfootError, FloatingPointError):
    pass


class NonFiniteInit(SamplerError):
    pass


class AllChainsDiverged(SamplerError):
    pass


class ArtifactMismatch(ConfigError):
    pass


class SchemaMismatch(DataError):
    pass
