"""Spectral boundary-integral simulation of 2D water waves through a splash.

The interface is evolved in the conformally mapped (tilde) frame, where the
two touching points of a splash curve are separated.
"""

from .birkhoff_rott import (
    SheetKernel,
    SolveOptions,
    br,
    interface_velocity,
    omega_from_phi,
    omega_from_psi,
    psi_from_omega,
)
from .conformal import (
    BranchSpec,
    grad_p2_inverse,
    grad_q,
    map_curve,
    map_from_tilde,
    map_to_tilde,
    p2_inverse,
    q_squared,
)
from .curve import (
    PeriodicCurve,
    arc_chord,
    fourier_tail,
    hilbert,
    krasny_filter,
    sobolev_norm,
    spectral_deriv,
    validate_splash_curve,
)
from .diagnostics import (
    EnergySnapshot,
    StabilityRecord,
    analyticity_radius,
    b_terms,
    energy,
    gronwall_fit,
    rayleigh_taylor_sigma,
    residuals,
    splash_detect,
    stability_energy,
    varphi,
)
from .errors import (
    SplashwaveError,
    BranchAmbiguity,
    PoleInput,
    SingularPointInput,
    BranchTrackingFailure,
    SelfIntersection,
    ArcChordFailure,
    DegenerateTangent,
    NonConvergence,
    ZeroMeanViolation,
    NaNDetected,
    MismatchedWindow,
    GridMismatch,
    ParseError,
    SchemaMismatch,
    IOFailure,
)
from .evolution import (
    RunConfig,
    Trajectory,
    WaveState,
    initial_state,
    physical_curve,
    reverse_time,
    rhs_bhl,
    rhs_omega_form,
    run,
    step_rk4,
    tangential_c,
)
from .persistence import load_snapshot, parse_config, save_snapshot
from .presets import preset_paper_splash

__version__ = "0.1.0"
