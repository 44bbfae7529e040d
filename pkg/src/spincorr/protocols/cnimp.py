"""Consecutive noninvasive measurements with two ancillas.

Ancilla 1 couples to the early site at t1, ancilla 2 to the late site at
t2, and everything (both ancillas, both sites) is read out projectively at
t3; the readout is deferred, which is provably equivalent to immediate
readout.  Three runs with different coupling-operator pairs yield the six
real components of the three correlations C(t1,t2), C(t1,t3), C(t2,t3).

The inversion constants assume spin-1/2 Pauli operators and uniform
ancilla states, matching the operator bookkeeping of the derivation; other
registers are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import core
from ..core import Convention, Operator, StateVector
from ..exceptions import EstimatorError, TimeOrderError
from .config import (CouplingKind, OutcomeDistribution, ProtocolConfig,
                     correlate, resolve)
from .snimp import standard_coupling

# marginal component indices into the (anc1, anc2, site_i, site_j) keys
MARGINAL_T1T2 = (0, 1)
MARGINAL_T1T3 = (0, 3)
MARGINAL_T2T3 = (1, 2)


class CnimpEngine:
    """Exact two-ancilla pipeline with shared precomputation across the
    coupling-strength grid."""

    def __init__(self, config: ProtocolConfig):
        reg = config.register
        if reg.ancilla_count != 2:
            raise ValueError("consecutive protocol needs exactly two ancillas")
        if reg.spin != 0.5 or reg.convention != Convention.PAULI:
            raise ValueError("consecutive protocol is implemented for "
                             "spin-1/2 Pauli registers")
        q = config.query
        if q.t3 is None:
            raise TimeOrderError("consecutive protocol needs three times")
        if not (q.t1 < q.t2 < q.t3):
            raise TimeOrderError(
                f"times must satisfy t1 < t2 < t3, got ({q.t1}, {q.t2}, {q.t3})")
        self.config = config
        self.res = resolve(config)
        self.reg, self.query = reg, q
        h = self.res.h_full
        self.psi_t1 = core.evolve(self.res.initial_full, h, q.t1)
        self.u21 = core.propagator(h, q.t2 - q.t1)
        self.u32 = core.propagator(h, q.t3 - q.t2)
        self._coupling_eigs: dict[tuple[int, CouplingKind],
                                  tuple[np.ndarray, np.ndarray]] = {}
        self.measurements = [
            (reg.ancilla_factor(1), q.axis_a),
            (reg.ancilla_factor(2), q.axis_b),
            (reg.site_factor(q.site_i), q.axis_a),
            (reg.site_factor(q.site_j), q.axis_b),
        ]

    def _coupling_eig(self, ancilla: int, kind: CouplingKind):
        key = (ancilla, CouplingKind(kind))
        if key not in self._coupling_eigs:
            reg, query = self.reg, self.query
            axis = query.axis_a if ancilla == 1 else query.axis_b
            site = query.site_i if ancilla == 1 else query.site_j
            b_local = standard_coupling(reg.spin, axis, kind)
            a_local = core.spin_component(reg.spin, axis).matrix
            a_local = a_local / core.operator_norm(a_local)
            gen = core.embed_ancilla(b_local, ancilla, reg).matrix @ \
                core.embed_site(a_local, site, reg).matrix
            self._coupling_eigs[key] = Operator(gen, reg,
                                                hermitian_hint=True).eig()
        return self._coupling_eigs[key]

    def _apply_coupling(self, vec: np.ndarray, ancilla: int,
                        kind: CouplingKind, lam: float) -> np.ndarray:
        w, v = self._coupling_eig(ancilla, kind)
        return v @ (np.exp(-1j * lam * w) * (v.conj().T @ vec))

    def distribution(self, lam1: float, lam2: float, kind1: CouplingKind,
                     kind2: CouplingKind) -> OutcomeDistribution:
        """Joint probabilities over (anc1, anc2, site_i, site_j) outcomes
        measured at t3."""
        vec = self._apply_coupling(self.psi_t1.amplitudes, 1, kind1, lam1)
        vec = self.u21 @ vec
        vec = self._apply_coupling(vec, 2, kind2, lam2)
        vec = self.u32 @ vec
        state = StateVector(vec, self.reg)
        return OutcomeDistribution(core.joint_born(state, self.measurements))

    def runs(self, lam1: float, lam2: float) -> dict[str, OutcomeDistribution]:
        """The three coupling-pair runs that yield all six components."""
        return {
            "c1": self.distribution(lam1, lam2, CouplingKind.B1, CouplingKind.B2),
            "c2": self.distribution(lam1, lam2, CouplingKind.B2, CouplingKind.B2),
            "c3": self.distribution(lam1, lam2, CouplingKind.B2, CouplingKind.B1),
        }


@dataclass
class CnimpEstimates:
    """Complex estimates of the three correlations (early-early,
    early-late, late-late pairings)."""

    c_t1t2: complex
    c_t1t3: complex
    c_t2t3: complex


def cnimp_distribution(config: ProtocolConfig,
                       kind1: CouplingKind = CouplingKind.B1,
                       kind2: CouplingKind = CouplingKind.B2
                       ) -> OutcomeDistribution:
    if config.lam2 is None:
        raise EstimatorError("consecutive protocol needs both coupling "
                             "strengths (lam, lam2)")
    return CnimpEngine(config).distribution(config.lam, config.lam2,
                                            kind1, kind2)


def cnimp_runs(config: ProtocolConfig) -> dict[str, OutcomeDistribution]:
    if config.lam2 is None:
        raise EstimatorError("consecutive protocol needs both coupling "
                             "strengths (lam, lam2)")
    return CnimpEngine(config).runs(config.lam, config.lam2)


def cnimp_estimators(runs: dict[str, OutcomeDistribution], lam1: float,
                     lam2: float) -> CnimpEstimates:
    """Assemble all three complex estimates from the three runs.

    The early-early estimate divides by both couplings, the other two by
    a single one; the latter are therefore defined also when the other
    coupling vanishes.
    """
    c1_12 = correlate(runs["c1"].marginal(MARGINAL_T1T2))
    c2_12 = correlate(runs["c2"].marginal(MARGINAL_T1T2))
    c1_13 = correlate(runs["c1"].marginal(MARGINAL_T1T3))
    c2_13 = correlate(runs["c2"].marginal(MARGINAL_T1T3))
    c3_23 = correlate(runs["c3"].marginal(MARGINAL_T2T3))
    c4_23 = correlate(runs["c2"].marginal(MARGINAL_T2T3))
    if lam1 == 0.0 or lam2 == 0.0:
        c_t1t2 = complex(float("nan"), float("nan"))
    else:
        c_t1t2 = (c2_12 + 1j * c1_12) / (4.0 * lam1 * lam2)
    if lam1 == 0.0:
        c_t1t3 = complex(float("nan"), float("nan"))
    else:
        c_t1t3 = -(c2_13 + 1j * c1_13) / (2.0 * lam1)
    if lam2 == 0.0:
        c_t2t3 = complex(float("nan"), float("nan"))
    else:
        c_t2t3 = -(c4_23 + 1j * c3_23) / (2.0 * lam2)
    return CnimpEstimates(c_t1t2, c_t1t3, c_t2t3)


def cnimp_estimate(config: ProtocolConfig) -> CnimpEstimates:
    """Run the three coupling pairs and assemble the three estimates."""
    return cnimp_estimators(cnimp_runs(config), config.lam, config.lam2)
