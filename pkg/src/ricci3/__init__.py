"""Curvature, Newman-Penrose kinematics and flows on Riemannian 3-manifolds."""

__version__ = "0.1.0"

from .chart import (DomainViolation, FrameField, MetricChart, NotPositiveDefinite,  # noqa: E402
                    RankDeficient, SpecError, dumps_spec, load_spec, loads_spec)
from .curvature import (PrincipalRicci, classify, curvature_pack, principal_ricci,  # noqa: E402
                        principal_ricci_batch, ricci, riemann, sectional)
from .triad import (FrameError, d_matrix, h_function, spin_coefficients,  # noqa: E402
                    triad_state)
from .identities import (curvature_identity_residuals, scenario_residuals)  # noqa: E402
from .flow import (integrate_flow, integrate_geodesic, evolution_residuals,  # noqa: E402
                   ode_case, ode_suite, parallel_transport)
from .catalog import catalog_metric, catalog_names, milnor_ricci  # noqa: E402

__all__ = [
    "MetricChart", "FrameField", "SpecError", "DomainViolation", "NotPositiveDefinite",
    "RankDeficient", "loads_spec", "load_spec", "dumps_spec",
    "PrincipalRicci", "classify", "curvature_pack", "principal_ricci", "principal_ricci_batch",
    "ricci", "riemann", "sectional",
    "FrameError", "d_matrix", "h_function", "spin_coefficients", "triad_state",
    "curvature_identity_residuals", "scenario_residuals",
    "integrate_flow", "integrate_geodesic", "evolution_residuals", "ode_case", "ode_suite",
    "parallel_transport", "catalog_metric", "catalog_names", "milnor_ricci",
]
