"""Rotated couplings for hardware restricted to z-z entangling gates.

Platforms whose native system-ancilla interaction is sigma^z (x) sigma^z
can still probe arbitrary components: conjugating the native coupling with
single-qubit rotations of the ancilla and of the probed site produces the
effective operators required for each measured axis and for either the
real or the imaginary component.  The rotation parameters are tabulated
below as (system axis, system angle, ancilla axis, ancilla angle); a
``None`` axis means no rotation.

The effective operators may differ from the standard coupling choices by a
sign; the estimator prefactors are computed from the actual matrices
downstream, so the assembled components are unaffected.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .. import core
from ..core import Convention
from .config import CouplingKind, ProtocolConfig

_PI = math.pi

# (axis, component) -> (system rotation axis n, theta, ancilla rotation
# axis m, alpha); component "re" selects the antisymmetric coupling family,
# "im" the symmetric one
ROTATION_TABLE: dict[tuple[str, str], tuple] = {
    ("x", "re"): ((0, 1, 0), 1.5 * _PI, (1, 0, 0), 0.5 * _PI),
    ("x", "im"): ((0, 1, 0), 1.5 * _PI, (0, 1, 0), 1.5 * _PI),
    ("y", "re"): ((1, 0, 0), 0.5 * _PI, (0, 1, 0), 1.5 * _PI),
    ("y", "im"): ((1, 0, 0), 0.5 * _PI, (1, 0, 0), 0.5 * _PI),
    ("z", "re"): (None, 0.0, (1, 0, 0), 0.5 * _PI),
    ("z", "im"): (None, 0.0, None, 0.0),
}

_SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def su2_rotation(axis_vec, angle: float) -> np.ndarray:
    """exp(-i angle/2 (v . sigma)) for a unit vector v."""
    v = np.asarray(axis_vec, dtype=float)
    v = v / np.linalg.norm(v)
    gen = v[0] * _SIGMA["x"] + v[1] * _SIGMA["y"] + v[2] * _SIGMA["z"]
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * gen


def _conjugated(axis_vec, angle: float) -> np.ndarray:
    if axis_vec is None:
        return _SIGMA["z"].copy()
    r = su2_rotation(axis_vec, angle)
    return r.conj().T @ _SIGMA["z"] @ r


def tpm_rotated_coupling(config: ProtocolConfig, axis_a: str,
                         component: str) -> ProtocolConfig:
    """Derive a protocol configuration whose coupling operators are the
    native z-z interaction conjugated by the tabulated rotations, probing
    ``axis_a`` and the requested component ("re" or "im")."""
    if config.register.spin != 0.5 or config.register.convention != Convention.PAULI:
        raise ValueError("rotated couplings are defined for spin-1/2 Pauli "
                         "registers")
    key = (axis_a, component)
    if key not in ROTATION_TABLE:
        raise ValueError(f"unsupported axis/component pair {key!r}")
    n_vec, theta, m_vec, alpha = ROTATION_TABLE[key]
    a_eff = _conjugated(n_vec, theta)
    b_eff = _conjugated(m_vec, alpha)
    kind = CouplingKind.B2 if component == "re" else CouplingKind.B1
    query = replace(config.query, axis_a=axis_a)
    return config.with_(query=query, coupling=kind,
                        coupling_b_matrix=b_eff, coupling_a_matrix=a_eff)
