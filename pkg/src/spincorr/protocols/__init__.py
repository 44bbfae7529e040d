"""Measurement-protocol pipelines over the dense engine.

All pipelines are exact-probability computations: branch probabilities are
enumerated, never sampled (sampling lives in :mod:`spincorr.sampling`).
"""
from .config import (OutcomeDistribution, ProtocolConfig, Timing, correlate,
                     resolve)
from .snimp import (EstimatorComponents, SnimpEngine, assemble_estimator,
                    coupling_unitary, f_factor, snimp_component,
                    snimp_distribution, snimp_estimate, standard_coupling)
from .ancilla_free import (GammaReport, gamma_operator, projective_correlate,
                           projective_distribution, rotation_protocol)
from .cnimp import (CnimpEngine, CnimpEstimates, cnimp_distribution,
                    cnimp_estimators, cnimp_estimate, cnimp_runs)
from .tpm import ROTATION_TABLE, su2_rotation, tpm_rotated_coupling

__all__ = [
    "OutcomeDistribution", "ProtocolConfig", "Timing", "correlate", "resolve",
    "EstimatorComponents", "SnimpEngine", "assemble_estimator",
    "coupling_unitary", "f_factor", "snimp_component", "snimp_distribution",
    "snimp_estimate", "standard_coupling",
    "GammaReport", "gamma_operator", "projective_correlate",
    "projective_distribution", "rotation_protocol",
    "CnimpEngine", "CnimpEstimates", "cnimp_distribution", "cnimp_estimators",
    "cnimp_estimate", "cnimp_runs",
    "ROTATION_TABLE", "su2_rotation", "tpm_rotated_coupling",
]
