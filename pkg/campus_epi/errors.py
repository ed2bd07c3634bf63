"""Exception hierarchy. Each error carries the exit code the CLI reports."""


class CampusEpiError(Exception):
    """Base class for all campus_epi failures."""

    exit_code = 1


class PgfDomainError(CampusEpiError):
    """Generating function or Lambert W called outside its domain."""

    exit_code = 2


class SupercriticalError(CampusEpiError):
    """Offspring mean >= 1: mean total progeny (and R0) is infinite."""

    exit_code = 3


class ConvergenceError(CampusEpiError):
    """An iterative solver stopped before reaching its tolerance."""

    exit_code = 3

    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations

    def __reduce__(self):
        return (self.__class__, (self.args[0], self.iterations))


class InvalidScheduleError(CampusEpiError):
    """Class schedule violates a structural invariant."""

    exit_code = 4


class ScheduleShapeError(InvalidScheduleError):
    """Schedule does not have the number of distinct sizes an operation needs."""


class InfeasibleScheduleError(InvalidScheduleError):
    """No enrollment with three distinct classes per student could be built."""


class ScheduleParseError(CampusEpiError):
    """Schedule file could not be parsed."""

    exit_code = 2


class SimulationError(CampusEpiError):
    """A Monte-Carlo run failed; the message names the run index."""

    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code

    def __reduce__(self):
        return (self.__class__, (self.args[0], self.exit_code))


class ManifestError(CampusEpiError):
    """Run manifest unreadable, or replay produced a different checksum."""
