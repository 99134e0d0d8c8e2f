"""Localizing in-body magnetometers from the static fields of reference wires."""

__version__ = "0.1.0"

from magloc.body import BodyModel, BoundingBox, generate_phantom, load_voxels, save_voxels
from magloc.config import ScenarioConfig, load_config, parse_config
from magloc.errors import (
    ArityError,
    ConfigError,
    EmptySliceError,
    GeometryError,
    InvalidMeasurementError,
    MaglocError,
    PhantomError,
    SaturationError,
    SingularityError,
    UnlocalizableError,
)
from magloc.fieldmodel import (
    MU_0,
    EarthResidualBounds,
    FieldVector,
    SaturationReport,
    earth_residual,
    flux_density_at,
    validate_saturation,
)
from magloc.geometry import Rotation, Wire, WireSet, builtin_arrangement, random_rotation
from magloc.locate import Position, fuse, laterate_family, localize, range_from_field, trilaterate
from magloc.sensor import MagnetometerSpec, Measurement, measure
from magloc.simharness import (
    ErrorStats,
    PointResult,
    PointResults,
    export_error_map,
    export_projection,
    run_scenario,
    simulate_point,
    summarize,
)
