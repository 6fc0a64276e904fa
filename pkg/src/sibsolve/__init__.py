"""Smallest intersecting ball solver.

Finds the minimum-radius ball meeting every body in a family of compact
convex bodies (polytopes, reduced polytopes, boxes, balls, ellipsoids),
and the soft-margin variant that trades radius against per-body slack
penalties.  Both drivers run an oracle-based multiplicative-weights
iteration for a zero-sum game over a product of second-order cones and
return certified (1 + eps)-approximate solutions.
"""

from .bodies import (
    Aabb,
    Ball,
    BodyPack,
    ConvexBody,
    Ellipsoid,
    LmoResult,
    Polytope,
    ReducedPolytope,
    contains,
    crude_radius_bound,
    lmo,
    representative,
    support_max,
)
from .eja import (
    ProductElement,
    SocElement,
    SocSpectrum,
    in_cone,
    soc_exp,
    soc_identity,
    soc_jordan,
    spectral_decompose,
    spectral_norm,
    trace_inner,
)
from .errors import BudgetExceeded, DegenerateInstance, IterationCapExhausted, WidthBreach
from .mwu import (
    EarlyTermination,
    GameConfig,
    GameProblem,
    MaxPlayerState,
    NashCertificate,
    OracleResponse,
    Schedule,
    initial_state,
    mwu_update,
    schedule,
    solve_game,
)
from .sib import SibInstance, SibSolution, sib_oracle, solve_sib
from .soft import (
    FtpFeasible,
    FtpInfeasible,
    SoftSibInstance,
    SoftSibSolution,
    soft_ftp,
    solve_soft_sib,
    svdd_oracle,
    xi_r_suboracle,
)

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "Ball",
    "BodyPack",
    "BudgetExceeded",
    "ConvexBody",
    "DegenerateInstance",
    "EarlyTermination",
    "Ellipsoid",
    "FtpFeasible",
    "FtpInfeasible",
    "GameConfig",
    "GameProblem",
    "IterationCapExhausted",
    "LmoResult",
    "MaxPlayerState",
    "NashCertificate",
    "OracleResponse",
    "Polytope",
    "ProductElement",
    "ReducedPolytope",
    "Schedule",
    "SibInstance",
    "SibSolution",
    "SocElement",
    "SocSpectrum",
    "SoftSibInstance",
    "SoftSibSolution",
    "WidthBreach",
    "contains",
    "crude_radius_bound",
    "in_cone",
    "initial_state",
    "lmo",
    "mwu_update",
    "representative",
    "schedule",
    "sib_oracle",
    "soc_exp",
    "soc_identity",
    "soc_jordan",
    "soft_ftp",
    "solve_game",
    "solve_sib",
    "solve_soft_sib",
    "spectral_decompose",
    "spectral_norm",
    "support_max",
    "svdd_oracle",
    "trace_inner",
    "xi_r_suboracle",
]
