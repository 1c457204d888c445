"""Exception hierarchy shared by every driftbench module."""


class DriftBenchError(Exception):
    """Base class for all errors raised by driftbench."""


class ConfigurationError(DriftBenchError):
    pass


class DimensionError(DriftBenchError):
    pass


class DataError(DriftBenchError):
    pass


class ParseError(DataError):
    def __init__(self, message, record_index=None):
        if record_index is not None:
            message = f"record {record_index}: {message}"
        super().__init__(message)
        self.record_index = record_index


class PartitionError(DriftBenchError):
    pass


class ShardError(DriftBenchError):
    pass


class AggregationError(DriftBenchError):
    pass


class EvaluationError(DriftBenchError):
    pass


class DegenerateSeriesError(DriftBenchError):
    pass


class PhaseError(DriftBenchError):
    """A trainer or data failure, annotated with where in the schedule it happened."""

    def __init__(self, permutation, phase_index, cause):
        self.permutation = tuple(permutation)
        self.phase_index = phase_index
        self.cause = cause
        super().__init__(
            f"permutation {''.join(self.permutation)} phase {phase_index}: "
            f"{type(cause).__name__}: {cause}"
        )


class ReportError(DriftBenchError):
    pass
