from .constants import SamplerConfig, centralizer_constant, quasi_linearity_constant
from .distance import (DistanceConfig, DistanceEstimate, ScanResult, canonical_families,
                       psi_upper_scan, triviality_distance)
from .nabla import NablaResult, kp_nabla_closed_form, nabla, sign_deviations, sign_patterns
from .params import (DualityResult, ParamResult, ParamTable, Strategy, duality_check,
                     param_table, parameter_M, parameter_m)
from .tracks import (ChainReport, analytic_parameter, estimate_chain_check, kp_lp_track,
                     pconvex_schreier_track, psi_lower_track, schreier_half_track)

__all__ = [
    "SamplerConfig", "centralizer_constant", "quasi_linearity_constant",
    "DistanceConfig", "DistanceEstimate", "ScanResult", "canonical_families",
    "psi_upper_scan", "triviality_distance",
    "NablaResult", "kp_nabla_closed_form", "nabla", "sign_deviations", "sign_patterns",
    "DualityResult", "ParamResult", "ParamTable", "Strategy", "duality_check",
    "param_table", "parameter_M", "parameter_m",
    "ChainReport", "analytic_parameter", "estimate_chain_check", "kp_lp_track",
    "pconvex_schreier_track", "psi_lower_track", "schreier_half_track",
]
