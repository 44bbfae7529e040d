"""Acceptance suite: one test per criterion, each printing a PASS/FAIL
line.  Run with ``pytest tests/test_acceptance.py -v -s``."""
import math
import time

import numpy as np
import pytest

from spincorr import errors, models, oracle, sampling
from spincorr.core import Convention, Operator, SpinRegister, StateVector
from spincorr.oracle import CorrelationQuery
from spincorr.protocols import (ProtocolConfig, SnimpEngine, CnimpEngine,
                                gamma_operator, projective_correlate,
                                rotation_protocol, snimp_component,
                                tpm_rotated_coupling)
from spincorr.protocols.config import CouplingKind, Timing

from conftest import random_hermitian, random_instance, random_state_vector

ALPHAS = (math.pi / 3, math.pi / 3)
THETAS = (math.pi / 7, math.pi / 5)


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{name}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{name} failed: {detail}"


def snimp_example_config(lam=0.42):
    reg = SpinRegister(2, 0.5, 1, Convention.PAULI)
    return ProtocolConfig(
        register=reg, hamiltonian=models.IsingXX(),
        system_state=models.SystemStateSpec(ALPHAS, THETAS),
        query=CorrelationQuery(1, 2, "z", "z", 1.0, 10.0),
        ancilla_states=(models.AncillaStateSpec(),), lam=lam)


def cnimp_example_config():
    reg = SpinRegister(2, 0.5, 2, Convention.PAULI)
    return ProtocolConfig(
        register=reg, hamiltonian=models.IsingXX(),
        system_state=models.SystemStateSpec(ALPHAS, THETAS),
        query=CorrelationQuery(1, 2, "z", "z", 0.0, 1.0, 10.0),
        ancilla_states=(models.AncillaStateSpec(), models.AncillaStateSpec()),
        lam=0.1, lam2=0.1)


def random_snimp_config(rng, lam, timing=Timing.DEFERRED):
    reg = SpinRegister(2, 0.5, 1, Convention.PAULI)
    sreg = reg.system_only()
    h = Operator(random_hermitian(rng, 4), sreg, hermitian_hint=True)
    psi = StateVector(random_state_vector(rng, 4), sreg)
    t1 = float(rng.uniform(0, 2))
    q = CorrelationQuery(int(rng.integers(1, 3)), int(rng.integers(1, 3)),
                         "xyz"[rng.integers(3)], "xyz"[rng.integers(3)],
                         t1, t1 + float(rng.uniform(0, 3)))
    return ProtocolConfig(register=reg, hamiltonian=h, system_state=psi,
                          query=q, ancilla_states=(models.AncillaStateSpec(),),
                          lam=lam, timing=timing)


def test_a1_closed_form_oracle_agreement():
    rng = np.random.default_rng(101)
    reg = SpinRegister(2, 0.5, 0, Convention.PAULI)
    h = models.build_hamiltonian(models.IsingXX(), reg)
    worst = 0.0
    for _ in range(100):
        a1, a2 = rng.uniform(0, math.pi / 2, 2)
        th1, th2 = rng.uniform(0, 2 * math.pi, 2)
        t1 = float(rng.uniform(0, 4))
        t2 = t1 + float(rng.uniform(0, 10))
        psi = models.build_system_state(
            models.SystemStateSpec((a1, a2), (th1, th2)), reg)
        got = oracle.exact_correlation(
            psi, h, CorrelationQuery(1, 2, "z", "z", t1, t2))
        want = oracle.closed_form_C_two_spin(a1, a2, th1, th2, t1, t2)
        worst = max(worst, abs(got - want))
    for _ in range(100):
        ab = random_state_vector(rng, 2)
        t = float(rng.uniform(0, 8))
        psi = StateVector(np.kron(ab, ab), reg)
        got = oracle.exact_correlation(
            psi, h, CorrelationQuery(1, 2, "z", "z", 0.0, t))
        want = oracle.closed_form_C_intro(complex(ab[0]), complex(ab[1]), t)
        worst = max(worst, abs(got - want))
    report("A1", worst <= 1e-10,
           f"engine vs closed forms over 200 draws, worst |diff| = {worst:.2e}")


def test_a2_all_orders_estimator_identity():
    engine = SnimpEngine(snimp_example_config())
    c_exact = oracle.closed_form_C_two_spin(*ALPHAS, *THETAS, 1.0, 10.0)
    worst_est, worst_sys = 0.0, 0.0
    for lam in (0.05, 0.42, 0.9):
        est = engine.estimate(lam)
        closed = oracle.closed_form_C_lambda_two_spin(*ALPHAS, *THETAS,
                                                      1.0, 10.0, lam)
        worst_est = max(worst_est, abs(est - closed))
        eps_sys = abs(c_exact - est)
        closed_sys = abs(2 * lam - math.sin(2 * lam)) / (2 * lam) * abs(c_exact)
        worst_sys = max(worst_sys, abs(eps_sys - closed_sys))
    ok = worst_est <= 1e-10 and worst_sys <= 1e-10
    report("A2", ok, f"estimator vs closed form {worst_est:.2e}, "
                     f"systematic error vs closed form {worst_sys:.2e}")


def test_a3_lambda_star_reproduction():
    started = time.perf_counter()
    star, minimum = errors.lambda_star(snimp_example_config(), 10 ** 4)
    elapsed = time.perf_counter() - started
    ok = abs(star - 0.42) <= 0.02 and abs(minimum - 0.33) <= 0.02 \
        and elapsed < 60
    report("A3", ok, f"lambda* = {star:.3f} (0.42 +- 0.02), "
                     f"min = {minimum:.3f} (0.33 +- 0.02), {elapsed:.1f}s")


def test_a4_monte_carlo_vs_bound():
    cov = errors.bound_coverage(snimp_example_config(), 10 ** 4, range(20))
    ok = cov.fraction >= 0.90
    report("A4", ok, f"measured deviation below predictive bound at "
                     f"{100 * cov.fraction:.1f}% of {cov.total} points "
                     f"(>= 90% required)")


def test_a5_projective_real_part_theorem():
    rng = np.random.default_rng(105)
    reg = SpinRegister(2, 0.5, 0, Convention.PAULI)
    worst_c, worst_gamma = 0.0, 0.0
    for _ in range(200):
        h, psi, q = random_instance(rng, reg)
        config = ProtocolConfig(register=reg, hamiltonian=h,
                                system_state=psi, query=q)
        c = oracle.exact_correlation(psi, h, q)
        worst_c = max(worst_c, abs(projective_correlate(config) - c.real))
        worst_gamma = max(worst_gamma, gamma_operator(config).deviation)
    reg1 = SpinRegister(2, 1.0, 0, Convention.SPIN)
    h1, psi1, q1 = random_instance(rng, reg1)
    rep1 = gamma_operator(ProtocolConfig(register=reg1, hamiltonian=h1,
                                         system_state=psi1, query=q1))
    ok = worst_c <= 1e-10 and worst_gamma <= 1e-10 and rep1.deviation > 1e-6
    report("A5", ok, f"spin-1/2: worst |Cproj - Re C| = {worst_c:.2e}, worst "
                     f"gamma deviation = {worst_gamma:.2e}; spin-1 instance "
                     f"deviation = {rep1.deviation:.2e} (> 1e-6)")


def test_a6_rotation_protocol_exactness():
    rng = np.random.default_rng(106)
    reg = SpinRegister(2, 0.5, 0, Convention.PAULI)
    thetas = (math.pi / 6, math.pi / 2, 1.5 * math.pi)
    worst, worst_spread = 0.0, 0.0
    for _ in range(100):
        h, psi, q = random_instance(rng, reg)
        config = ProtocolConfig(register=reg, hamiltonian=h,
                                system_state=psi, query=q)
        im_c = oracle.exact_correlation(psi, h, q).imag
        values = [rotation_protocol(config, th) for th in thetas]
        worst = max(worst, max(abs(v - im_c) for v in values))
        worst_spread = max(worst_spread, max(values) - min(values))
    ok = worst <= 1e-10 and worst_spread <= 1e-10
    report("A6", ok, f"worst |rotation - Im C| = {worst:.2e}, worst spread "
                     f"over angles = {worst_spread:.2e}")


def test_a7_deferred_equivalence():
    rng = np.random.default_rng(107)
    worst = 0.0
    for k in range(50):
        lam = float(rng.uniform(0, 1)) if k else 0.0
        config = random_snimp_config(rng, lam)
        engine = SnimpEngine(config)
        for kind in (CouplingKind.B1, CouplingKind.B2):
            di = engine.distribution(lam, kind, Timing.IMMEDIATE)
            dd = engine.distribution(lam, kind, Timing.DEFERRED)
            worst = max(worst, max(abs(di.probabilities[key]
                                       - dd.probabilities[key])
                                   for key in di.probabilities))
    report("A7", worst <= 1e-12,
           f"immediate vs deferred over 50 configs, worst |diff| = {worst:.2e}")


def test_a8_cnimp_surface_reproduction():
    started = time.perf_counter()
    surfaces = errors.cnimp_error_surface(cnimp_example_config(), 10 ** 5)
    elapsed = time.perf_counter() - started
    t12 = surfaces.surfaces["t1t2"]
    t13 = surfaces.surfaces["t1t3"]
    ok = (abs(t12.min_rel_tot - 0.37) <= 0.03
          and abs(t12.lam_star[0] - 0.40) <= 0.03
          and abs(t12.lam_star[1] - 0.41) <= 0.03
          and abs(t13.min_rel_tot - 0.25) <= 0.03
          and abs(t13.lam_star[0] - 0.37) <= 0.03
          and abs(t13.lam_star[1] - 0.00) <= 0.03
          and elapsed < 600)
    report("A8", ok,
           f"early-early min {t12.min_rel_tot:.3f} at {t12.lam_star} "
           f"(0.37 at (0.40, 0.41)); early-late min {t13.min_rel_tot:.3f} "
           f"at {t13.lam_star} (0.25 at (0.37, 0.00)); {elapsed:.0f}s")


def test_a9_efficiency_comparison():
    started = time.perf_counter()
    comp = errors.protocol_efficiency_compare(cnimp_example_config(), 0.10,
                                              "t1t2")
    elapsed = time.perf_counter() - started
    ratio_s = max(comp.measurements_snimp / 2e6, 2e6 / comp.measurements_snimp)
    ratio_c = max(comp.measurements_cnimp / 2e8, 2e8 / comp.measurements_cnimp)
    ok = ratio_s <= 3.0 and ratio_c <= 3.0 and elapsed < 300 \
        and comp.fit_snimp.r_squared > 0.99 and comp.fit_cnimp.r_squared > 0.99
    report("A9", ok,
           f"10% accuracy needs {comp.measurements_snimp:.1e} single-protocol "
           f"measurements (2e6, x{ratio_s:.2f}) and "
           f"{comp.measurements_cnimp:.1e} consecutive ones "
           f"(2e8, x{ratio_c:.2f}); {elapsed:.0f}s")


def test_a10_rotated_coupling_equivalence():
    rng = np.random.default_rng(110)
    reg = SpinRegister(2, 0.5, 1, Convention.PAULI)
    sreg = reg.system_only()
    worst = 0.0
    for axis in "xyz":
        for component in ("re", "im"):
            for _ in range(5):
                h = Operator(random_hermitian(rng, 4), sreg,
                             hermitian_hint=True)
                psi = StateVector(random_state_vector(rng, 4), sreg)
                t1 = float(rng.uniform(0, 2))
                q = CorrelationQuery(1, 2, axis, "xyz"[rng.integers(3)],
                                     t1, t1 + float(rng.uniform(0, 2)))
                base = ProtocolConfig(
                    register=reg, hamiltonian=h, system_state=psi, query=q,
                    ancilla_states=(models.AncillaStateSpec(),),
                    lam=float(rng.uniform(0.05, 0.9)))
                kind = CouplingKind.B2 if component == "re" else CouplingKind.B1
                direct = snimp_component(base, kind)
                rotated_cfg = tpm_rotated_coupling(base, axis, component)
                rotated = snimp_component(rotated_cfg, rotated_cfg.coupling)
                worst = max(worst, abs(direct - rotated))
    report("A10", worst <= 1e-10,
           f"rotated vs direct coupling over all 6 rows x 5 configs, "
           f"worst |diff| = {worst:.2e}")


def test_a11_sampling_determinism_and_sharding():
    from spincorr.protocols import snimp_distribution
    dist = snimp_distribution(snimp_example_config())
    t1 = sampling.sample(dist, 10 ** 4, 42)
    t2 = sampling.sample(dist, 10 ** 4, 42)
    identical = t1.counts == t2.counts
    sharded_ok = True
    for shards in (1, 2, 5):
        merged = sampling.sample_sharded(dist, 10 ** 4, 42, shards)
        quota, extra = divmod(10 ** 4, shards)
        manual = None
        for k in range(shards):
            size = quota + (1 if k < extra else 0)
            part = sampling.sample(dist, size, 42 ^ k)
            manual = part if manual is None else manual.merged(part)
        sharded_ok = sharded_ok and merged.counts == manual.counts
    ok = identical and sharded_ok
    report("A11", ok, f"fixed seed bit-identical: {identical}; sharded merge "
                      f"matches documented subseed rule for 1, 2, 5 shards: "
                      f"{sharded_ok}")
