"""Dense state-vector engine for small spin registers.

The Kronecker ordering is fixed once and for all: ancilla factors come
first, then system sites,

    H_total = H_anc_1 (x) ... (x) H_anc_k (x) H_site_1 (x) ... (x) H_site_N,

and every index computation in the package derives from this layout.
Within a single factor the basis is ordered by descending magnetic quantum
number, so index 0 is the top eigenvalue (|+> for spin-1/2).

Two operator conventions are supported and kept explicit everywhere:
``Convention.SPIN`` uses spin-s matrices with eigenvalues {s, s-1, ..., -s},
``Convention.PAULI`` (spin-1/2 only) uses Pauli matrices with eigenvalues
{+1, -1}.  Convention-dependent prefactors elsewhere in the package are
computed from the actual matrices, never hard-coded.

Operators and state vectors are immutable after construction (the backing
arrays are marked read-only) and are safe to share across threads.  The
eigendecomposition of an :class:`Operator` is computed lazily and cached on
the instance; the computation is idempotent, so a benign race at worst
repeats it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import ConventionError, ZeroProbabilityError

HERMITICITY_TOL = 1e-10
PROB_CLAMP = 1e-12
COLLAPSE_EPS = 1e-14

# Largest dense dimension accepted by default: 12 spin-1/2 factors.
DIM_BUDGET = 4096

AXES = ("x", "y", "z")


class Convention(str, Enum):
    SPIN = "spins"
    PAULI = "pauli"


def _check_axis(axis: str) -> str:
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    return axis


def _check_spin(s: float) -> float:
    two_s = 2 * s
    if s < 0.5 or abs(two_s - round(two_s)) > 1e-12:
        raise ValueError(f"spin must be a half-integer >= 1/2, got {s}")
    return round(two_s) / 2


def levels_of(s: float) -> int:
    """Number of magnetic sublevels 2s+1."""
    return round(2 * _check_spin(s)) + 1


def eigenvalues(s: float, convention: Convention = Convention.SPIN) -> np.ndarray:
    """Single-site eigenvalue labels, descending (index 0 = top level)."""
    s = _check_spin(s)
    if convention == Convention.PAULI:
        if s != 0.5:
            raise ConventionError("Pauli convention is defined for spin 1/2 only")
        return np.array([1.0, -1.0])
    return s - np.arange(levels_of(s), dtype=float)


@dataclass(frozen=True)
class SpinRegister:
    """Layout of a register: ``ancilla_count`` ancillas followed by
    ``system_site_count`` sites, all with the same spin quantum number.

    System sites are addressed 1-based (``site_factor``), matching the
    usual lattice-site labels; ancillas likewise (``ancilla_factor``).
    """

    system_site_count: int
    spin: float = 0.5
    ancilla_count: int = 0
    convention: Convention = Convention.PAULI
    max_factors: int | None = None

    def __post_init__(self) -> None:
        if self.system_site_count < 1:
            raise ValueError("system_site_count must be a positive integer")
        if self.ancilla_count < 0:
            raise ValueError("ancilla_count must be non-negative")
        object.__setattr__(self, "spin", _check_spin(self.spin))
        object.__setattr__(self, "convention", Convention(self.convention))
        if self.convention == Convention.PAULI and self.spin != 0.5:
            raise ConventionError("Pauli convention is defined for spin 1/2 only")
        cap = self.max_factors
        if cap is None:
            # default budget: 12 factors for spin-1/2, fewer for larger spin
            cap = max(1, int(math.log(DIM_BUDGET) / math.log(self.levels)))
        if self.factor_count > cap:
            raise ValueError(
                f"{self.factor_count} factors of dimension {self.levels} exceed "
                f"the dense-matrix budget (cap {cap}); raise max_factors to override"
            )

    @property
    def levels(self) -> int:
        return levels_of(self.spin)

    @property
    def factor_count(self) -> int:
        return self.ancilla_count + self.system_site_count

    @property
    def dimension(self) -> int:
        return self.levels ** self.factor_count

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return (self.levels,) * self.factor_count

    def site_factor(self, site: int) -> int:
        """Flat factor index of 1-based system site ``site``."""
        if not 1 <= site <= self.system_site_count:
            raise ValueError(f"site {site} outside 1..{self.system_site_count}")
        return self.ancilla_count + site - 1

    def ancilla_factor(self, ancilla: int = 1) -> int:
        """Flat factor index of 1-based ancilla ``ancilla``."""
        if not 1 <= ancilla <= self.ancilla_count:
            raise ValueError(f"ancilla {ancilla} outside 1..{self.ancilla_count}")
        return ancilla - 1

    def system_only(self) -> "SpinRegister":
        if self.ancilla_count == 0:
            return self
        return SpinRegister(self.system_site_count, self.spin, 0, self.convention,
                            self.max_factors)

    def eigenvalue_labels(self) -> np.ndarray:
        return eigenvalues(self.spin, self.convention)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=complex)
    a.flags.writeable = False
    return a


@dataclass(eq=False)
class Operator:
    """Dense operator, optionally attached to a register.

    ``register=None`` marks a single-factor (local) operator awaiting
    embedding.  With ``hermitian_hint`` set, hermiticity is verified on
    construction (max-norm tolerance 1e-10).
    """

    matrix: np.ndarray
    register: SpinRegister | None = None
    hermitian_hint: bool = False
    _eig: tuple[np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        if self.register is not None and m.shape[0] != self.register.dimension:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match register "
                f"dimension {self.register.dimension}")
        if self.hermitian_hint:
            dev = float(np.max(np.abs(m - m.conj().T)))
            if dev > HERMITICITY_TOL:
                raise ValueError(f"operator marked Hermitian deviates by {dev:.3e}")
        self.matrix = _readonly(m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached Hermitian eigendecomposition (eigenvalues, eigenvectors)."""
        if self._eig is None:
            dev = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
            if dev > HERMITICITY_TOL:
                raise ValueError(f"eigendecomposition needs a Hermitian matrix "
                                 f"(deviation {dev:.3e})")
            w, v = np.linalg.eigh(self.matrix)
            self._eig = (w, v)
        return self._eig


@dataclass(eq=False)
class StateVector:
    """Normalized pure state over a register.

    Construction renormalizes exactly; inputs whose norm deviates from 1 by
    more than 1e-8 are rejected as programming errors.
    """

    amplitudes: np.ndarray
    register: SpinRegister

    def __post_init__(self) -> None:
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        if a.size != self.register.dimension:
            raise ValueError(
                f"amplitude vector of length {a.size} does not match register "
                f"dimension {self.register.dimension}")
        norm = float(np.linalg.norm(a))
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"state vector is not normalized (norm {norm:.12g})")
        self.amplitudes = _readonly(a / norm)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


# ---------------------------------------------------------------------------
# single-site operators


def raising_lowering(s: float, axis: str = "z") -> tuple[Operator, Operator]:
    """Ladder operators (S+, S-) with respect to the ``axis`` eigenbasis.

    Matrix elements are sqrt(s(s+1) - m(m +- 1)); for axis != z the standard
    z-basis matrices are conjugated into the requested eigenbasis.
    """
    s = _check_spin(s)
    _check_axis(axis)
    n = levels_of(s)
    m = s - np.arange(n)  # descending
    sp = np.zeros((n, n))
    # raising connects |m> -> |m+1>, i.e. column k to row k-1
    for k in range(1, n):
        sp[k - 1, k] = math.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    if axis != "z":
        v = axis_eigenbasis(s, axis)
        sp = v @ sp @ v.conj().T
    sm = sp.conj().T
    return Operator(sp), Operator(sm)


def spin_component(s: float, axis: str,
                   convention: Convention = Convention.SPIN) -> Operator:
    """Spin component S^a (or Pauli sigma^a) as a local operator."""
    s = _check_spin(s)
    _check_axis(axis)
    convention = Convention(convention)
    if convention == Convention.PAULI and s != 0.5:
        raise ConventionError("Pauli convention is defined for spin 1/2 only")
    n = levels_of(s)
    if axis == "z":
        mat = np.diag(s - np.arange(n)).astype(complex)
    else:
        sp, sm = raising_lowering(s, "z")
        if axis == "x":
            mat = (sp.matrix + sm.matrix) / 2
        else:
            mat = (sp.matrix - sm.matrix) / 2j
    if convention == Convention.PAULI:
        mat = 2 * mat
    return Operator(mat, hermitian_hint=True)


_BASIS_CACHE: dict[tuple[float, str], np.ndarray] = {}


def axis_eigenbasis(s: float, axis: str) -> np.ndarray:
    """Unitary whose columns are the S^axis eigenvectors in descending
    eigenvalue order, with the phase fixed so that the first nonzero
    component of each column is real positive."""
    s = _check_spin(s)
    _check_axis(axis)
    key = (s, axis)
    cached = _BASIS_CACHE.get(key)
    if cached is not None:
        return cached
    n = levels_of(s)
    if axis == "z":
        v = np.eye(n, dtype=complex)
    else:
        w, v = np.linalg.eigh(spin_component(s, axis).matrix)
        v = v[:, ::-1].astype(complex)  # descending eigenvalues
        for k in range(n):
            col = v[:, k]
            j = int(np.argmax(np.abs(col) > 1e-12))
            phase = col[j] / abs(col[j])
            v[:, k] = col / phase
    v = _readonly(v)
    _BASIS_CACHE[key] = v
    return v


def identity(register: SpinRegister) -> Operator:
    return Operator(np.eye(register.dimension), register, hermitian_hint=True)


def embed(local_op: Operator | np.ndarray, factor: int,
          register: SpinRegister) -> Operator:
    """Embed a single-factor operator at flat factor index ``factor``
    (identity on all other factors)."""
    mat = local_op.matrix if isinstance(local_op, Operator) else np.asarray(local_op)
    n = register.levels
    if mat.shape != (n, n):
        raise ValueError(f"local operator of shape {mat.shape} does not match "
                         f"factor dimension {n}")
    if not 0 <= factor < register.factor_count:
        raise ValueError(f"factor {factor} outside 0..{register.factor_count - 1}")
    left = np.eye(n ** factor)
    right = np.eye(n ** (register.factor_count - factor - 1))
    full = np.kron(np.kron(left, mat), right)
    return Operator(full, register)


def embed_site(local_op: Operator | np.ndarray, site: int,
               register: SpinRegister) -> Operator:
    return embed(local_op, register.site_factor(site), register)


def embed_ancilla(local_op: Operator | np.ndarray, ancilla: int,
                  register: SpinRegister) -> Operator:
    return embed(local_op, register.ancilla_factor(ancilla), register)


def site_spin_operator(register: SpinRegister, site: int, axis: str) -> Operator:
    """Spin component at a system site, in the register's convention."""
    local = spin_component(register.spin, axis, register.convention)
    return embed_site(local, site, register)


def product_state(register: SpinRegister, factor_states) -> StateVector:
    """Kronecker product of per-factor state vectors (ancillas first)."""
    states = [np.asarray(v, dtype=complex).ravel() for v in factor_states]
    if len(states) != register.factor_count:
        raise ValueError(f"expected {register.factor_count} factor states, "
                         f"got {len(states)}")
    amps = states[0]
    for v in states[1:]:
        amps = np.kron(amps, v)
    return StateVector(amps, register)


# ---------------------------------------------------------------------------
# evolution


def propagate(vec: np.ndarray, h: Operator, t: float) -> np.ndarray:
    """Apply exp(-i H t) to a raw amplitude vector (hbar = 1)."""
    w, v = h.eig()
    return v @ (np.exp(-1j * w * t) * (v.conj().T @ vec))


def evolve(state: StateVector, h: Operator, t: float) -> StateVector:
    """Unitary evolution exp(-i H t)|psi> via the cached eigendecomposition."""
    return StateVector(propagate(state.amplitudes, h, t), state.register)


def propagator(h: Operator, t: float) -> np.ndarray:
    """Dense matrix exp(-i H t)."""
    w, v = h.eig()
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def heisenberg(op: Operator, h: Operator, t: float) -> Operator:
    """Heisenberg-picture operator U(t)^dag O U(t)."""
    u = propagator(h, t)
    return Operator(u.conj().T @ op.matrix @ u, op.register)


# ---------------------------------------------------------------------------
# measurement


def _label_index(register: SpinRegister, m: float) -> int:
    labels = register.eigenvalue_labels()
    idx = np.nonzero(np.abs(labels - m) < 1e-9)[0]
    if idx.size == 0:
        raise ValueError(f"eigenvalue {m} not in spectrum {labels.tolist()}")
    return int(idx[0])


def projector(factor: int, m: float, axis: str, register: SpinRegister) -> Operator:
    """Projector onto the m-eigenspace of the site operator along ``axis``,
    embedded at flat factor index ``factor``."""
    v = axis_eigenbasis(register.spin, axis)
    k = _label_index(register, m)
    local = np.outer(v[:, k], v[:, k].conj())
    return embed(Operator(local), factor, register)


def _to_axis_basis(state: StateVector, factor: int, axis: str) -> np.ndarray:
    """Amplitude tensor with the ``factor`` axis rotated into the axis
    eigenbasis, shaped (left, levels, right)."""
    reg = state.register
    n = reg.levels
    left = n ** factor
    right = n ** (reg.factor_count - factor - 1)
    t = state.amplitudes.reshape(left, n, right)
    v = axis_eigenbasis(reg.spin, axis)
    if axis == "z":
        return t.copy()
    return np.einsum("ab,lbr->lar", v.conj().T, t)


def born_probabilities(state: StateVector, factor: int, axis: str) -> dict[float, float]:
    """Born-rule outcome probabilities for measuring the spin component
    along ``axis`` at ``factor``; clamped to [0, 1], summing to 1."""
    t = _to_axis_basis(state, factor, axis)
    p = np.sum(np.abs(t) ** 2, axis=(0, 2))
    p = np.clip(p, 0.0, 1.0)
    labels = state.register.eigenvalue_labels()
    return {float(m): float(pm) for m, pm in zip(labels, p)}


def joint_born(state: StateVector, measurements) -> dict[tuple[float, ...], float]:
    """Joint Born probabilities for simultaneously measuring several
    factors, each along its own axis.

    ``measurements`` is a sequence of (factor, axis) pairs; the returned
    keys are eigenvalue tuples in the same order.
    """
    reg = state.register
    factors = [f for f, _ in measurements]
    if len(set(factors)) != len(factors):
        raise ValueError("measured factors must be distinct")
    t = state.amplitudes.reshape(reg.factor_dims)
    for f, axis in measurements:
        v = axis_eigenbasis(reg.spin, axis)
        if axis != "z":
            t = np.moveaxis(np.tensordot(v.conj().T, t, axes=([1], [f])), 0, f)
    probs = np.abs(t) ** 2
    others = tuple(i for i in range(reg.factor_count) if i not in factors)
    if others:
        probs = probs.sum(axis=others)
    if len(factors) > 1:
        # summation left the surviving axes in increasing factor order;
        # permute them back into measurement order
        ranks = np.argsort(np.argsort(factors))
        probs = np.transpose(probs, ranks)
    labels = reg.eigenvalue_labels()
    out: dict[tuple[float, ...], float] = {}
    for idx in np.ndindex(*probs.shape):
        key = tuple(float(labels[k]) for k in idx)
        out[key] = float(np.clip(probs[idx], 0.0, 1.0))
    return out


def fix_global_phase(amps: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first nonzero amplitude is real
    positive (deterministic state comparison)."""
    idx = np.nonzero(np.abs(amps) > 1e-12)[0]
    if idx.size == 0:
        return amps
    a = amps[idx[0]]
    return amps * (a.conjugate() / abs(a))


def collapse(state: StateVector, factor: int, axis: str, m: float) -> StateVector:
    """Normalized projection onto the ``m`` outcome of an ``axis``
    measurement at ``factor`` (exact, not linearized)."""
    reg = state.register
    k = _label_index(reg, m)
    t = _to_axis_basis(state, factor, axis)
    branch = t[:, k, :]
    p = float(np.sum(np.abs(branch) ** 2))
    if p <= COLLAPSE_EPS:
        raise ZeroProbabilityError(
            f"outcome m={m} at factor {factor} has probability {p:.3e}")
    t = np.zeros_like(t)
    t[:, k, :] = branch / math.sqrt(p)
    v = axis_eigenbasis(reg.spin, axis)
    if axis != "z":
        t = np.einsum("ab,lbr->lar", v, t)
    return StateVector(fix_global_phase(t.ravel()), reg)


def expectation(state: StateVector, op: Operator) -> complex:
    """<psi|O|psi>."""
    if op.dim != state.amplitudes.size:
        raise ValueError(f"operator dimension {op.dim} does not match state "
                         f"dimension {state.amplitudes.size}")
    return complex(np.vdot(state.amplitudes, op.matrix @ state.amplitudes))


def operator_norm(mat: np.ndarray) -> float:
    """Spectral norm, via singular values."""
    return float(np.linalg.norm(mat, 2))
