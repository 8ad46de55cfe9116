"""Exception taxonomy shared across the package.

Three failure classes matter operationally: bad arguments, queries
outside a stored window, and samples whose window was too short for the
requested functional (the caller is expected to resample wider).  A
replication that cannot be completed even at the maximum window is
abandoned with :class:`ReplicationAborted`.
"""


class ParameterError(ValueError):
    """Invalid argument (law parameters, sizes, thresholds)."""


class RangeError(IndexError):
    """Query outside the stored grid window."""


class WindowTooSmallError(RuntimeError):
    """The stored path window does not reach the requested event.

    Callers holding the generating stream should extend the window with
    fresh increments and retry; extension preserves the sampled law.
    """


class ReplicationAborted(RuntimeError):
    """A Monte Carlo replication could not be completed and was dropped.

    Experiments count these; they must never be silently discarded.
    """
