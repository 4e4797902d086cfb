"""Cone-envelope detection and hyperosculating tool positioning.

Decides whether a surface is (locally) enveloped by a one-parameter family
of congruent rotational cones — with the developable, ruled,
cylinder-envelope, channel, and pipe limit cases — and reconstructs the
cone placements with third-order plane contact used to initialize 5-axis
flank milling.
"""

from .classify import (
    ClassVerdict,
    ToolParams,
    channel_test,
    classify_field,
    cone_envelope_test,
    cylinder_envelope_test,
    developable_residual,
    millability_check,
    pipe_test,
    ruled_test,
)
from .contact import (
    ConicCandidate,
    ContactOrderEstimate,
    RootRecord,
    SolveReport,
    SolveTolerances,
    contact_order_estimate,
    hyper_residual,
    multiplicity_jacobian,
    oracle_solve,
    order4_residual,
    osculation_coeffs,
    solve_hyperosculating,
    theta_residual,
)
from .errors import ConeFlankError
from .isomap import (
    IsotropicPoint,
    IsotropicSample,
    OrientedPlane,
    ParaboloidCoeffs,
    SurfaceSample,
    align_to_mean_normal,
    inverse_stereographic,
    isotropic_to_contact_point,
    isotropic_to_plane,
    plane_to_isotropic,
    sample_to_isotropic,
    sphere_to_paraboloid,
)
from .jets import (
    ExprAst,
    Jet4,
    ScatterFitConfig,
    expression_jet_provider,
    fit_jet_scattered,
    jet_of_expression,
    parse_expression,
    scattered_jet_provider,
)
from .pipeline import (
    PerturbSpec,
    Report,
    Xorshift64Star,
    perturb_normals,
    run_analysis,
    sample_exact_envelope,
    sample_parametric,
    stability_experiment,
)
from .reconstruct import (
    BuildResult,
    ConeSpec,
    CurveTrace,
    ToolBounds,
    build_cone_at,
    cone_axis,
    cone_side,
    cone_vertex,
    integrate_isotropic_circle,
    integrate_ruling_developable,
    integrate_ruling_ruled,
    tool_length_check,
)

__version__ = "0.1.0"
