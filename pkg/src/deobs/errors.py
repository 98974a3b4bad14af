"""Exception taxonomy shared across the package."""


class DeobsError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(DeobsError):
    """Two frames (or a frame and a configured shape) disagree in size."""


class InvalidConfig(DeobsError):
    """Store or analytics configuration violates an invariant."""


class CorruptDiff(DeobsError):
    """A diff record cannot be applied: bad coordinates or out-of-range values."""


class OutOfOrderSet(DeobsError):
    """set() called with an index other than the current head."""


class Evicted(DeobsError):
    """Requested step was overwritten by the ring buffer."""


class NotYetWritten(DeobsError):
    """Requested step is at or beyond the write head."""


class EpisodeDiscipline(DeobsError):
    """episode_start flags contradict the recorded done flags."""


class EmptyBuffer(DeobsError):
    """Sampling from a buffer with no valid steps."""


class NoValidTransitions(DeobsError):
    """No stored step has a usable successor to sample."""


class InvalidParams(DeobsError):
    """Bad parameters for a trace generator or in-memory trace."""


class MalformedFile(DeobsError):
    """File fails structural validation (magic, lengths, record contents)."""


class VersionMismatch(DeobsError):
    """File declares an unsupported format version."""
