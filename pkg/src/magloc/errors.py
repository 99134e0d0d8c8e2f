"""Exception hierarchy shared by all magloc modules."""


class MaglocError(Exception):
    """Base class for every domain error raised by magloc."""


class GeometryError(MaglocError, ValueError):
    """Invalid wire, wire set or arrangement parameters."""


class SingularityError(MaglocError, ValueError):
    """A point lies on a wire axis, or a lateration system is singular."""


class ArityError(MaglocError, ValueError):
    """Wrong number of wires, measurements or distances."""


class InvalidMeasurementError(MaglocError, ValueError):
    """A measured flux density cannot be ranged (non-positive or non-finite)."""


class UnlocalizableError(MaglocError, ValueError):
    """A coordinate has no contributing wire family."""


class PhantomError(MaglocError, ValueError):
    """Bad phantom parameters or a malformed voxel file."""


class SaturationError(MaglocError):
    """The field inside the body exceeds the magnetometer range."""

    def __init__(self, report):
        super().__init__(
            f"max in-body field {report.max_field:.6g} T exceeds limit {report.limit:.6g} T "
            f"(wire {report.worst_wire}, voxel {tuple(report.worst_voxel)})"
        )
        self.report = report


class EmptySliceError(MaglocError, ValueError):
    """An error-map slice does not intersect any body voxel."""


class ConfigError(MaglocError, ValueError):
    """Malformed scenario configuration."""
