"""Lower bounds on an eavesdropper's localization error under delay-angle
information spoofing, and tools to choose the spoofing shifts."""

__version__ = "0.1.0"

from .geometry import (
    DegenerateGeometryError,
    GeometryError,
    InvalidIntervalError,
    PathParams,
    Paths,
    Position2D,
    Scenario,
    SpoofShift,
    apply_shift,
    forward_geometry,
    kmin_index,
    wrap_halfopen,
)
from .signal_model import (
    PilotSet,
    SystemConfig,
    VirtualChannelParams,
    build_precoder,
    default_gains,
    generate_pilots,
    steering_vector,
)
from .linalg import SingularMatrixError
from .fisher import compute_efim, compute_fim, geometry_jacobian, response_gradient
from .mismatch import (
    ClosedFormBound,
    McrbResult,
    PseudoTrueLocations,
    closed_form_bound,
    closed_form_intermediate,
    mcrb,
    pseudo_true_locations,
)
from .design import (
    BoundContext,
    GridSpec,
    choose_shift,
    delta_theta_singular_set,
    evaluate,
    optimize_delta_tau,
    sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
