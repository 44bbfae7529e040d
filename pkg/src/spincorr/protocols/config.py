"""Protocol configuration and exact outcome distributions."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .. import core, models
from ..core import Operator, SpinRegister, StateVector
from ..exceptions import ToleranceError

DIST_SUM_TOL = 1e-12


class Timing(str, Enum):
    IMMEDIATE = "immediate"
    DEFERRED = "deferred"


class CouplingKind(str, Enum):
    """Which ancilla-side coupling operator family is in use: ``B1`` is the
    measured spin component itself (symmetric; addresses the imaginary
    part), ``B2`` the antisymmetric ladder combination (real part)."""

    B1 = "b1"
    B2 = "b2"


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    """Complete description of one protocol experiment.

    ``hamiltonian`` and ``system_state`` accept either declarative specs
    (serializable from the CLI) or concrete engine objects;
    ``ancilla_states`` holds one entry per register ancilla, each a spec or
    an explicit local vector in the measured eigenbasis' computational
    representation.  ``lam`` is the first (or only) coupling strength,
    ``lam2`` the second for consecutive protocols.  Explicit
    ``coupling_*_matrix`` overrides replace the standard coupling operators
    for the configured ``coupling`` kind (used by the rotated-coupling
    construction).
    """

    register: SpinRegister
    hamiltonian: object
    system_state: object
    query: "object"
    ancilla_states: tuple = ()
    lam: float = 0.0
    lam2: float | None = None
    coupling: CouplingKind = CouplingKind.B1
    coupling_b_matrix: np.ndarray | None = None
    coupling_a_matrix: np.ndarray | None = None
    timing: Timing = Timing.DEFERRED

    def with_(self, **kwargs) -> "ProtocolConfig":
        return replace(self, **kwargs)


def _ancilla_axes(query, count: int) -> tuple[str, ...]:
    # ancilla 1 probes the early observable's component, ancilla 2 (if
    # present) the late one
    return (query.axis_a, query.axis_b)[:count]


@dataclass
class ResolvedProtocol:
    """Concrete engine objects materialized from a ProtocolConfig."""

    config: ProtocolConfig
    register: SpinRegister
    h_full: Operator
    system_state: StateVector
    ancilla_vectors: list[np.ndarray]
    initial_full: StateVector


def resolve(config: ProtocolConfig) -> ResolvedProtocol:
    reg = config.register
    config.query.validate_register(reg)

    if isinstance(config.system_state, StateVector):
        system_state = config.system_state
        if system_state.register != reg.system_only():
            raise ValueError("system_state register does not match the "
                             "system part of the protocol register")
    else:
        system_state = models.build_system_state(config.system_state, reg)

    if isinstance(config.hamiltonian, Operator):
        h = config.hamiltonian
        if h.register == reg:
            h_full = h
        elif h.register == reg.system_only():
            lift = np.kron(np.eye(reg.levels ** reg.ancilla_count), h.matrix)
            h_full = Operator(lift, reg, hermitian_hint=True)
        else:
            raise ValueError("hamiltonian register matches neither the full "
                             "nor the system-only register")
    else:
        h_full = models.build_hamiltonian(config.hamiltonian, reg)

    if len(config.ancilla_states) != reg.ancilla_count:
        raise ValueError(f"need {reg.ancilla_count} ancilla states, "
                         f"got {len(config.ancilla_states)}")
    axes = _ancilla_axes(config.query, reg.ancilla_count)
    vectors = []
    for spec, axis in zip(config.ancilla_states, axes):
        if isinstance(spec, models.AncillaStateSpec):
            vectors.append(models.build_ancilla_state(
                spec, reg.spin, axis, reg.convention))
        else:
            v = np.asarray(spec, dtype=complex).ravel()
            if v.size != reg.levels:
                raise ValueError(f"ancilla vector of length {v.size} does not "
                                 f"match {reg.levels} levels")
            vectors.append(v / np.linalg.norm(v))

    amps = system_state.amplitudes
    for v in reversed(vectors):
        amps = np.kron(v, amps)
    initial_full = StateVector(amps, reg)
    return ResolvedProtocol(config, reg, h_full, system_state, vectors,
                            initial_full)


@dataclass
class OutcomeDistribution:
    """Exact joint outcome probabilities keyed by eigenvalue tuples."""

    probabilities: dict[tuple[float, ...], float]

    def __post_init__(self) -> None:
        clean: dict[tuple[float, ...], float] = {}
        for key, p in self.probabilities.items():
            if p < -1e-12 or p > 1 + 1e-12:
                raise ToleranceError(f"probability {p} for outcome {key} "
                                     "outside the clamping window")
            clean[tuple(float(m) for m in key)] = min(max(p, 0.0), 1.0)
        total = sum(clean.values())
        if abs(total - 1.0) > DIST_SUM_TOL:
            raise ToleranceError(f"outcome probabilities sum to {total!r}")
        self.probabilities = clean

    def marginal(self, components: tuple[int, ...]) -> "OutcomeDistribution":
        out: dict[tuple[float, ...], float] = {}
        for key, p in self.probabilities.items():
            sub = tuple(key[c] for c in components)
            out[sub] = out.get(sub, 0.0) + p
        return OutcomeDistribution(out)

    def items(self):
        return self.probabilities.items()


def correlate(dist: OutcomeDistribution) -> float:
    """Product-of-outcomes average over a two-component distribution,
    using the eigenvalue labels carried by the keys."""
    total = 0.0
    for key, p in dist.probabilities.items():
        if len(key) != 2:
            raise ValueError("correlate expects two outcome components; "
                             "marginalize first")
        total += key[0] * key[1] * p
    return total
