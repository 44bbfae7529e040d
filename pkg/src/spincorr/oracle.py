"""Ground-truth correlation functions.

``exact_correlation`` evaluates the two-time correlator by direct matrix
algebra on the dense engine.  The ``closed_form_*`` functions are separate
code paths (plain trigonometry and 2x2 algebra) that share no evaluation
code with the engine; they serve as independent cross-checks throughout
the test suite.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import core
from .core import Operator, SpinRegister, StateVector
from .exceptions import TimeOrderError, ToleranceError, ZeroProbabilityError

SPLIT_TOL = 1e-10


@dataclass(frozen=True)
class CorrelationQuery:
    """Which correlation to evaluate: spin component ``axis_a`` at system
    site ``site_i`` and time ``t1``, correlated with ``axis_b`` at
    ``site_j`` and time ``t2`` (optionally a third time for consecutive
    protocols)."""

    site_i: int
    site_j: int
    axis_a: str = "z"
    axis_b: str = "z"
    t1: float = 0.0
    t2: float = 0.0
    t3: float | None = None

    def __post_init__(self) -> None:
        if self.t2 < self.t1:
            raise TimeOrderError(f"t2 = {self.t2} precedes t1 = {self.t1}")
        if self.t3 is not None and self.t3 < self.t2:
            raise TimeOrderError(f"t3 = {self.t3} precedes t2 = {self.t2}")

    def validate_register(self, register: SpinRegister) -> None:
        for site in (self.site_i, self.site_j):
            if not 1 <= site <= register.system_site_count:
                raise ValueError(f"site {site} outside register with "
                                 f"{register.system_site_count} sites")


def exact_correlation(state: StateVector, h: Operator,
                      query: CorrelationQuery) -> complex:
    """<psi| A_i(t1) B_j(t2) |psi> by direct operator evaluation
    (no sampling, no ancilla)."""
    reg = state.register
    query.validate_register(reg)
    a_op = core.site_spin_operator(reg, query.site_i, query.axis_a)
    b_op = core.site_spin_operator(reg, query.site_j, query.axis_b)
    va = _heisenberg_apply(a_op, h, query.t1, state.amplitudes)
    vb = _heisenberg_apply(b_op, h, query.t2, state.amplitudes)
    return complex(np.vdot(va, vb))


def _heisenberg_apply(op: Operator, h: Operator, t: float,
                      vec: np.ndarray) -> np.ndarray:
    """U(t)^dag O U(t) |vec> for Hermitian O."""
    w = core.propagate(vec, h, t)
    w = op.matrix @ w
    return core.propagate(w, h, -t)


def im_re_split(state: StateVector, h: Operator,
                query: CorrelationQuery) -> tuple[float, float]:
    """(Re C, Im C), with the imaginary part independently validated
    against the commutator expectation <[A_i(t1), B_j(t2)]> / 2i."""
    c = exact_correlation(state, h, query)
    reg = state.register
    a_t = core.heisenberg(core.site_spin_operator(reg, query.site_i, query.axis_a),
                          h, query.t1)
    b_t = core.heisenberg(core.site_spin_operator(reg, query.site_j, query.axis_b),
                          h, query.t2)
    comm = a_t.matrix @ b_t.matrix - b_t.matrix @ a_t.matrix
    im_comm = complex(np.vdot(state.amplitudes, comm @ state.amplitudes)) / 2j
    if abs(im_comm.imag) > SPLIT_TOL or abs(im_comm.real - c.imag) > SPLIT_TOL:
        raise ToleranceError(
            f"commutator route gives Im C = {im_comm!r}, direct route {c.imag!r}")
    return c.real, c.imag


# ---------------------------------------------------------------------------
# closed forms (independent of the engine)


def closed_form_C_two_spin(alpha1: float, alpha2: float, theta1: float,
                           theta2: float, t1: float, t2: float) -> complex:
    """zz correlator of the two-spin x-x model with Bloch-angle product
    initial state."""
    dt = 2.0 * (t2 - t1)
    re = math.cos(2 * alpha1) * math.cos(2 * alpha2) * math.cos(dt)
    im = (math.sin(2 * alpha1) * math.sin(2 * alpha2)
          * math.sin(theta1) * math.sin(theta2) * math.sin(dt))
    return complex(re, im)


def closed_form_C_lambda_two_spin(alpha1: float, alpha2: float, theta1: float,
                                  theta2: float, t1: float, t2: float,
                                  lam: float) -> complex:
    """All-orders finite-coupling estimator for the same model: the exact
    correlator damped by sin(2 lam) / (2 lam)."""
    c = closed_form_C_two_spin(alpha1, alpha2, theta1, theta2, t1, t2)
    if lam == 0.0:
        return c
    return c * (math.sin(2 * lam) / (2 * lam))


def closed_form_C_intro(alpha: complex, beta: complex, t: float) -> complex:
    """zz correlator at times (0, t) for the x-x model with both sites in
    alpha|+> + beta|->."""
    pop = abs(alpha) ** 2 - abs(beta) ** 2
    cross = alpha.conjugate() * beta - alpha * beta.conjugate()
    return math.cos(2 * t) * pop ** 2 - 1j * math.sin(2 * t) * cross ** 2


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _pauli_dot(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v[0] * _PAULI["x"] + v[1] * _PAULI["y"] + v[2] * _PAULI["z"]


def _axis_eigvecs_2(axis: str) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(_PAULI[axis])
    return v[:, 1].astype(complex), v[:, 0].astype(complex)  # (+1, -1) order


def closed_form_projective_example(alpha: complex, beta: complex, n, m,
                                   axis_a: str, axis_b: str, t: float) -> complex:
    """Correlation constructed from two projective measurements at times
    (0, t) for the two-site model H = (n.sigma)(m.sigma), both sites in
    alpha|+> + beta|->, evaluated in closed form with 2x2 algebra only."""
    psi = np.array([alpha, beta], dtype=complex)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"(alpha, beta) must be normalized, norm {nrm:.12g}")
    sa, sb = _PAULI[axis_a], _PAULI[axis_b]
    ndot, mdot = _pauli_dot(n), _pauli_dot(m)
    plus_a, minus_a = _axis_eigvecs_2(axis_a)
    p_plus = abs(np.vdot(plus_a, psi)) ** 2
    p_minus = abs(np.vdot(minus_a, psi)) ** 2
    if min(p_plus, p_minus) <= 1e-14:
        raise ZeroProbabilityError(
            "initial state is an eigenstate of the first measured component")
    exp_a = complex(np.vdot(psi, sa @ psi)).real
    exp_b = complex(np.vdot(psi, sb @ psi)).real
    exp_msm = complex(np.vdot(psi, mdot @ sb @ mdot @ psi)).real
    even = (math.cos(t) ** 2 * exp_a * exp_b
            + math.sin(t) ** 2 * exp_a * exp_msm)
    n_plus = complex(np.vdot(plus_a, ndot @ plus_a)).real
    n_minus = complex(np.vdot(minus_a, ndot @ minus_a)).real
    comm = complex(np.vdot(psi, (sb @ mdot - mdot @ sb) @ psi))
    odd = -0.5j * math.sin(2 * t) * (p_plus * n_plus - p_minus * n_minus) * comm
    return complex(even + odd)
