"""Single ancilla-based noninvasive measurement pipeline.

One ancilla is coupled briefly to the probed site at the early time, then
measured projectively; the system site is measured projectively at the
late time.  Running the pipeline once per coupling family (B1, B2) and
inverting the resulting outcome correlations yields a complex estimate of
the two-time correlation function.

Estimator prefactors are always computed from the actual ancilla state and
coupling matrices, so rescaled or sign-flipped coupling operators (as
produced by the rotated-coupling construction) invert correctly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import core
from ..core import Convention, Operator, SpinRegister, StateVector
from ..exceptions import EstimatorError, ZeroProbabilityError
from .config import (CouplingKind, OutcomeDistribution, ProtocolConfig,
                     Timing, correlate, resolve)

MIX_TOL = 1e-10
MEAN_TOL = 1e-12


def standard_coupling(s: float, axis: str, kind: CouplingKind) -> np.ndarray:
    """Standard ancilla coupling operator of unit spectral norm.

    ``B1`` is the spin component along the measured axis (symmetric in its
    eigenbasis); ``B2`` is the antisymmetric Hermitian combination of the
    ladder operators of that eigenbasis, -(i/2)(S+ - S-), normalized.  For
    spin 1/2 these are the sigma^a and sigma^y-like matrices of the axis
    eigenbasis.
    """
    kind = CouplingKind(kind)
    if kind == CouplingKind.B1:
        mat = core.spin_component(s, axis).matrix
    else:
        sp, sm = core.raising_lowering(s, axis)
        mat = -0.5j * (sp.matrix - sm.matrix)
    return mat / core.operator_norm(mat)


def coupling_unitary(b_local: np.ndarray, a_local: np.ndarray, lam: float,
                     register: SpinRegister, ancilla: int, site: int,
                     linearized: bool = False) -> Operator:
    """exp(-i lam B (x) A_i) with B on the ancilla and A on the site.

    With ``linearized`` the first-order approximation 1 - i lam B (x) A_i
    is returned instead (not unitary; for asymptotic checks only)."""
    gb = core.embed_ancilla(b_local, ancilla, register)
    ga = core.embed_site(a_local, site, register)
    gen = gb.matrix @ ga.matrix
    if linearized:
        return Operator(np.eye(register.dimension) - 1j * lam * gen, register)
    w, v = Operator(gen, register, hermitian_hint=True).eig()
    u = (v * np.exp(-1j * lam * w)) @ v.conj().T
    return Operator(u, register)


@dataclass
class EstimatorComponents:
    """The two measured outcome correlations and their inversion factors."""

    script_c1: float
    script_c2: float
    f1: float
    f2: float
    lam: float
    levels: int
    convention: Convention


def f_factor(b_local: np.ndarray, phi_local: np.ndarray, s: float, axis: str,
             convention: Convention, kind: CouplingKind) -> float:
    """Inversion prefactor for a coupling operator, computed from the
    actual matrices: f = levels * Re<phi| A B |phi> for the symmetric
    family and f = -levels * Im<phi| A B |phi> for the antisymmetric one
    (A is the measured ancilla observable)."""
    a_obs = core.spin_component(s, axis, convention).matrix
    g = complex(np.vdot(phi_local, a_obs @ b_local @ phi_local))
    scale = max(1.0, abs(g))
    kind = CouplingKind(kind)
    if kind == CouplingKind.B1:
        f, off = g.real, abs(g.imag)
    else:
        f, off = -g.imag, abs(g.real)
    if off > MIX_TOL * scale:
        raise EstimatorError(
            f"coupling operator mixes real and imaginary components "
            f"(<A B> = {g!r} for kind {kind.value})")
    f *= core.levels_of(s)
    if abs(f) < 1e-12:
        raise EstimatorError(f"degenerate inversion prefactor {f!r}")
    return f


def assemble_estimator(components: EstimatorComponents) -> complex:
    """Invert the two outcome correlations into the complex estimate
    -(levels / 2 lam) (C2/f2 + i C1/f1)."""
    if components.lam == 0.0:
        raise EstimatorError("coupling strength is zero; use the exact "
                             "correlator instead of the estimator")
    pref = -components.levels / (2.0 * components.lam)
    return pref * (components.script_c2 / components.f2
                   + 1j * components.script_c1 / components.f1)


class SnimpEngine:
    """Exact single-ancilla pipeline with shared precomputation.

    Everything independent of the coupling strength (initial state, the
    propagators to the two measurement times, the coupling generators'
    eigendecompositions) is computed once, so sweeps over lam are cheap.
    """

    def __init__(self, config: ProtocolConfig):
        if config.register.ancilla_count != 1:
            raise ValueError("single-ancilla protocol needs exactly one ancilla")
        self.config = config
        self.res = resolve(config)
        reg = self.res.register
        q = config.query
        self.reg = reg
        self.query = q
        self.anc_factor = reg.ancilla_factor(1)
        self.site_j_factor = reg.site_factor(q.site_j)
        self.psi_t1 = core.evolve(self.res.initial_full, self.res.h_full, q.t1)
        self.u_dt = core.propagator(self.res.h_full, q.t2 - q.t1)
        if config.coupling_a_matrix is not None:
            a = np.asarray(config.coupling_a_matrix, dtype=complex)
        else:
            a = core.spin_component(reg.spin, q.axis_a).matrix
        self.a_local = a / core.operator_norm(a)
        self.b_locals = {
            CouplingKind.B1: standard_coupling(reg.spin, q.axis_a, CouplingKind.B1),
            CouplingKind.B2: standard_coupling(reg.spin, q.axis_a, CouplingKind.B2),
        }
        if config.coupling_b_matrix is not None:
            self.b_locals[CouplingKind(config.coupling)] = \
                np.asarray(config.coupling_b_matrix, dtype=complex)
        self._coupling_eigs: dict[CouplingKind, tuple[np.ndarray, np.ndarray]] = {}
        self._obs_mean: float | None = None
        self._bj_expectation: float | None = None

    def _coupling_eig(self, kind: CouplingKind):
        kind = CouplingKind(kind)
        if kind not in self._coupling_eigs:
            gb = core.embed_ancilla(self.b_locals[kind], 1, self.reg)
            ga = core.embed_site(self.a_local, self.query.site_i, self.reg)
            gen = Operator(gb.matrix @ ga.matrix, self.reg, hermitian_hint=True)
            self._coupling_eigs[kind] = gen.eig()
        return self._coupling_eigs[kind]

    def _coupled_state(self, lam: float, kind: CouplingKind) -> StateVector:
        w, v = self._coupling_eig(kind)
        amps = v @ (np.exp(-1j * lam * w) * (v.conj().T @ self.psi_t1.amplitudes))
        return StateVector(amps, self.reg)

    def distribution(self, lam: float, kind: CouplingKind | None = None,
                     timing: Timing | None = None) -> OutcomeDistribution:
        """Joint outcome probabilities over (ancilla outcome, site outcome)."""
        kind = CouplingKind(kind if kind is not None else self.config.coupling)
        timing = Timing(timing if timing is not None else self.config.timing)
        q = self.query
        state = self._coupled_state(lam, kind)
        if timing == Timing.DEFERRED:
            evolved = StateVector(self.u_dt @ state.amplitudes, self.reg)
            probs = core.joint_born(evolved, [(self.anc_factor, q.axis_a),
                                              (self.site_j_factor, q.axis_b)])
            return OutcomeDistribution(probs)
        joint: dict[tuple[float, float], float] = {}
        p_anc = core.born_probabilities(state, self.anc_factor, q.axis_a)
        for m_a, pa in p_anc.items():
            if pa <= core.COLLAPSE_EPS:
                raise ZeroProbabilityError(
                    f"ancilla branch m={m_a} has probability {pa:.3e}; "
                    "immediate readout cannot proceed")
            branch = core.collapse(state, self.anc_factor, q.axis_a, m_a)
            branch = StateVector(self.u_dt @ branch.amplitudes, self.reg)
            p_site = core.born_probabilities(branch, self.site_j_factor, q.axis_b)
            for m_b, pb in p_site.items():
                joint[(m_a, m_b)] = pa * pb
        return OutcomeDistribution(joint)

    def observable_mean(self) -> float:
        """Measured ancilla component mean <A>_phi (zero for balanced states)."""
        if self._obs_mean is None:
            a_obs = core.spin_component(self.reg.spin, self.query.axis_a,
                                        self.reg.convention).matrix
            phi = self.res.ancilla_vectors[0]
            self._obs_mean = float(np.vdot(phi, a_obs @ phi).real)
        return self._obs_mean

    def late_observable_expectation(self) -> float:
        """<B_j(t2)> of the unperturbed evolution, used to remove the
        zeroth-order offset for unbalanced ancilla states."""
        if self._bj_expectation is None:
            psi2 = core.evolve(self.res.initial_full, self.res.h_full,
                               self.query.t2)
            op = core.site_spin_operator(self.reg, self.query.site_j,
                                         self.query.axis_b)
            self._bj_expectation = float(core.expectation(psi2, op).real)
        return self._bj_expectation

    def script_correlation(self, lam: float, kind: CouplingKind,
                           timing: Timing | None = None) -> float:
        """Outcome correlation with the zeroth-order offset removed."""
        value = correlate(self.distribution(lam, kind, timing))
        mean = self.observable_mean()
        if abs(mean) > MEAN_TOL:
            value -= mean * self.late_observable_expectation()
        return value

    def f_for(self, kind: CouplingKind) -> float:
        return f_factor(self.b_locals[CouplingKind(kind)],
                        self.res.ancilla_vectors[0], self.reg.spin,
                        self.query.axis_a, self.reg.convention, kind)

    def component(self, lam: float, kind: CouplingKind) -> float:
        """One real component of the estimate: Im C for B1, Re C for B2."""
        if lam == 0.0:
            raise EstimatorError("coupling strength is zero")
        script = self.script_correlation(lam, kind)
        return -self.reg.levels / (2.0 * lam) * script / self.f_for(kind)

    def components(self, lam: float) -> EstimatorComponents:
        return EstimatorComponents(
            script_c1=self.script_correlation(lam, CouplingKind.B1),
            script_c2=self.script_correlation(lam, CouplingKind.B2),
            f1=self.f_for(CouplingKind.B1),
            f2=self.f_for(CouplingKind.B2),
            lam=lam,
            levels=self.reg.levels,
            convention=self.reg.convention,
        )

    def estimate(self, lam: float) -> complex:
        """Complex finite-coupling estimate of the correlation function."""
        return assemble_estimator(self.components(lam))


def snimp_distribution(config: ProtocolConfig) -> OutcomeDistribution:
    """Exact joint outcome probabilities of the single-ancilla protocol."""
    return SnimpEngine(config).distribution(config.lam)


def snimp_component(config: ProtocolConfig, kind: CouplingKind | None = None) -> float:
    """One real component of the estimate for the configured coupling."""
    kind = CouplingKind(kind if kind is not None else config.coupling)
    return SnimpEngine(config).component(config.lam, kind)


def snimp_estimate(config: ProtocolConfig) -> complex:
    """Complex estimate from both coupling families at the configured lam."""
    return SnimpEngine(config).estimate(config.lam)


def linearized_ancilla_probabilities(config: ProtocolConfig,
                                     kind: CouplingKind | None = None
                                     ) -> dict[float, float]:
    """First-order (in lam) ancilla outcome probabilities, evaluated from
    the analytic expansion rather than the exact pipeline; used to check
    the pipeline's small-coupling behavior."""
    engine = SnimpEngine(config)
    kind = CouplingKind(kind if kind is not None else config.coupling)
    reg, q = engine.reg, engine.query
    lam = config.lam
    phi = engine.res.ancilla_vectors[0]
    v = core.axis_eigenbasis(reg.spin, q.axis_a)
    b = engine.b_locals[kind]
    # <A_i(t1)> of the unperturbed system evolution, for the normalized
    # coupling operator on the site side
    psi1 = core.evolve(engine.res.initial_full, engine.res.h_full, q.t1)
    a_emb = core.embed_site(engine.a_local, q.site_i, reg)
    exp_a = complex(core.expectation(psi1, a_emb)).real
    labels = reg.eigenvalue_labels()
    out: dict[float, float] = {}
    for k, m in enumerate(labels):
        vm = v[:, k]
        overlap = complex(np.vdot(vm, phi))
        bmat = complex(np.vdot(vm, b @ phi))
        term = overlap.conjugate() * bmat
        p = abs(overlap) ** 2 - 1j * lam * exp_a * (term - term.conjugate())
        out[float(m)] = float(p.real)
    return out
