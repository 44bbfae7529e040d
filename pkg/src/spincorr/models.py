"""Builders for Hamiltonians, system product states and ancilla states.

All builders are pure constructors.  Hamiltonians act as the identity on
any ancilla factors of the register; system states live on the system-only
register and are combined with ancilla states by the protocol pipelines.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import core
from .core import Convention, Operator, SpinRegister, StateVector

UNIT_TOL = 1e-12


def _check_unit(v, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    if abs(np.linalg.norm(a) - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be a unit vector, |{name}| = "
                         f"{np.linalg.norm(a):.12g}")
    return a


@dataclass(frozen=True)
class IsingXX:
    """x-x coupling of system sites 1 and 2."""


@dataclass(frozen=True)
class AxisPair:
    """(n . sigma) at site 1 times (m . sigma) at site 2, for unit vectors
    n and m (spin matrices instead of Pauli under the SPIN convention)."""

    n: tuple[float, float, float]
    m: tuple[float, float, float]

    def __post_init__(self) -> None:
        _check_unit(self.n, "n")
        _check_unit(self.m, "m")


@dataclass(frozen=True)
class LocalTerms:
    """Sum of coefficient-weighted products of single-site spin components.

    ``terms`` is a sequence of ``(coefficient, ((site, axis), ...))``
    entries with 1-based sites; factors within a product are multiplied in
    the order listed.
    """

    terms: tuple[tuple[float, tuple[tuple[int, str], ...]], ...]


HamiltonianSpec = IsingXX | AxisPair | LocalTerms


def axis_vector_operator(register: SpinRegister, site: int, direction) -> Operator:
    """(direction . S) at a system site, in the register's convention."""
    d = _check_unit(direction, "direction")
    mat = sum(d[k] * core.spin_component(register.spin, ax, register.convention).matrix
              for k, ax in enumerate(core.AXES))
    return core.embed_site(Operator(mat), site, register)


def build_hamiltonian(spec: HamiltonianSpec, register: SpinRegister) -> Operator:
    """Full-register Hamiltonian (identity on ancilla factors)."""
    if isinstance(spec, IsingXX):
        if register.system_site_count < 2:
            raise ValueError("IsingXX needs at least two system sites")
        sx = core.spin_component(register.spin, "x", register.convention)
        mat = core.embed_site(sx, 1, register).matrix @ \
            core.embed_site(sx, 2, register).matrix
    elif isinstance(spec, AxisPair):
        if register.system_site_count < 2:
            raise ValueError("AxisPair needs at least two system sites")
        mat = axis_vector_operator(register, 1, spec.n).matrix @ \
            axis_vector_operator(register, 2, spec.m).matrix
    elif isinstance(spec, LocalTerms):
        mat = np.zeros((register.dimension, register.dimension), dtype=complex)
        for coeff, factors in spec.terms:
            term = np.eye(register.dimension, dtype=complex)
            for site, axis in factors:
                term = term @ core.site_spin_operator(register, site, axis).matrix
            mat = mat + coeff * term
    else:
        raise TypeError(f"unknown Hamiltonian spec {type(spec).__name__}")
    return Operator(mat, register, hermitian_hint=True)


@dataclass(frozen=True)
class SystemStateSpec:
    """Per-site Bloch angles for a spin-1/2 product state,
    cos(a_i) e^{-i t_i/2} |+> + sin(a_i) e^{+i t_i/2} |->,
    with a_i in [0, pi/2] and t_i in [0, 2 pi]."""

    alphas: tuple[float, ...]
    thetas: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.alphas) != len(self.thetas):
            raise ValueError("alphas and thetas must have equal length")


def build_system_state(spec: SystemStateSpec, register: SpinRegister) -> StateVector:
    """Normalized product state on the system-only register."""
    reg = register.system_only()
    if reg.spin != 0.5:
        raise ValueError("angle parametrization applies to spin-1/2 sites only")
    if len(spec.alphas) != reg.system_site_count:
        raise ValueError(f"need {reg.system_site_count} angle pairs, "
                         f"got {len(spec.alphas)}")
    sites = [np.array([math.cos(a) * np.exp(-0.5j * t),
                       math.sin(a) * np.exp(+0.5j * t)])
             for a, t in zip(spec.alphas, spec.thetas)]
    return core.product_state(reg, sites)


@dataclass(frozen=True)
class AncillaStateSpec:
    """Ancilla state, either the uniform superposition over the measured
    eigenbasis or explicit coefficients in that basis."""

    coefficients: tuple[complex, ...] | None = None
    preset: str | None = "uniform"

    def __post_init__(self) -> None:
        if self.coefficients is None and self.preset != "uniform":
            raise ValueError(f"unknown ancilla preset {self.preset!r}")


def build_ancilla_state(spec: AncillaStateSpec, s: float, axis: str,
                        convention: Convention = Convention.PAULI) -> np.ndarray:
    """Single-factor ancilla state vector in the computational basis.

    The coefficients refer to the eigenbasis of the spin component along
    ``axis`` (the component that will be measured).  Coefficient sets with
    a nonzero mean measured component are accepted with a warning; the
    estimator prefactors are computed from the actual state downstream.
    """
    n = core.levels_of(s)
    if spec.coefficients is None:
        c = np.full(n, 1.0 / math.sqrt(n), dtype=complex)
    else:
        c = np.asarray(spec.coefficients, dtype=complex)
        if c.size != n:
            raise ValueError(f"need {n} coefficients, got {c.size}")
        if abs(np.linalg.norm(c) - 1.0) > 1e-10:
            raise ValueError(f"ancilla coefficients violate normalization "
                             f"(norm {np.linalg.norm(c):.12g})")
    labels = core.eigenvalues(s, convention)
    balance = float(np.sum(labels * np.abs(c) ** 2))
    if abs(balance) > 1e-10:
        warnings.warn(
            f"ancilla state has mean measured component {balance:.3e}; "
            "estimators will subtract the induced offset where possible",
            stacklevel=2)
    v = core.axis_eigenbasis(s, axis)
    return v @ c
