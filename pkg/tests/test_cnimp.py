import math

import numpy as np
import pytest

from spincorr import models, oracle
from spincorr.core import Convention, Operator, SpinRegister, StateVector
from spincorr.exceptions import EstimatorError, TimeOrderError
from spincorr.oracle import CorrelationQuery
from spincorr.protocols import (CnimpEngine, ProtocolConfig, cnimp_distribution,
                                cnimp_estimate, cnimp_estimators, cnimp_runs)
from spincorr.protocols.config import CouplingKind

from conftest import random_hermitian, random_state_vector

EXAMPLE = dict(alphas=(math.pi / 3, math.pi / 3),
               thetas=(math.pi / 7, math.pi / 5))
TIMES = (0.0, 1.0, 10.0)


def example_config(lam1=0.1, lam2=0.1, times=TIMES, hamiltonian=None,
                   system_state=None):
    reg = SpinRegister(2, 0.5, 2, Convention.PAULI)
    return ProtocolConfig(
        register=reg,
        hamiltonian=hamiltonian or models.IsingXX(),
        system_state=system_state or models.SystemStateSpec(
            EXAMPLE["alphas"], EXAMPLE["thetas"]),
        query=CorrelationQuery(1, 2, "z", "z", *times),
        ancilla_states=(models.AncillaStateSpec(), models.AncillaStateSpec()),
        lam=lam1,
        lam2=lam2,
    )


def oracle_values(config):
    reg = config.register.system_only()
    psi = models.build_system_state(config.system_state, reg) \
        if not isinstance(config.system_state, StateVector) else config.system_state
    h = models.build_hamiltonian(config.hamiltonian, reg) \
        if not isinstance(config.hamiltonian, Operator) else config.hamiltonian
    q = config.query
    return {
        "t1t2": oracle.exact_correlation(
            psi, h, CorrelationQuery(q.site_i, q.site_j, q.axis_a, q.axis_b,
                                     q.t1, q.t2)),
        "t1t3": oracle.exact_correlation(
            psi, h, CorrelationQuery(q.site_i, q.site_j, q.axis_a, q.axis_b,
                                     q.t1, q.t3)),
        "t2t3": oracle.exact_correlation(
            psi, h, CorrelationQuery(q.site_j, q.site_i, q.axis_b, q.axis_a,
                                     q.t2, q.t3)),
    }


class TestDistribution:
    def test_requires_ordered_times(self):
        with pytest.raises(TimeOrderError):
            CnimpEngine(example_config(times=(1.0, 1.0, 10.0)))

    def test_requires_both_couplings(self):
        cfg = example_config().with_(lam2=None)
        with pytest.raises(EstimatorError):
            cnimp_distribution(cfg)

    def test_normalized_sixteen_outcomes(self):
        dist = cnimp_distribution(example_config(0.3, 0.7))
        assert len(dist.probabilities) == 16
        assert abs(sum(dist.probabilities.values()) - 1.0) < 1e-12

    def test_zero_couplings_factorize(self):
        # without coupling the ancilla outcomes are independent coin flips
        # and the system sites carry the unperturbed statistics
        dist = cnimp_distribution(example_config(0.0, 0.0))
        marg_anc = dist.marginal((0, 1))
        for p in marg_anc.probabilities.values():
            assert p == pytest.approx(0.25, abs=1e-12)
        joint_sites = dist.marginal((2, 3))
        for key, p in dist.probabilities.items():
            want = 0.25 * joint_sites.probabilities[(key[2], key[3])]
            assert p == pytest.approx(want, abs=1e-12)


class TestEstimators:
    def test_three_runs_give_six_components(self):
        cfg = example_config(0.15, 0.2)
        runs = cnimp_runs(cfg)
        assert set(runs) == {"c1", "c2", "c3"}
        est = cnimp_estimators(runs, cfg.lam, cfg.lam2)
        for value in (est.c_t1t2, est.c_t1t3, est.c_t2t3):
            assert not math.isnan(value.real)

    def test_convergence_to_exact(self):
        cfg = example_config()
        want = oracle_values(cfg)
        engine = CnimpEngine(cfg)
        prev = None
        for lam in (0.1, 0.05, 0.025):
            est = cnimp_estimators(engine.runs(lam, lam), lam, lam)
            devs = (abs(est.c_t1t2 - want["t1t2"]),
                    abs(est.c_t1t3 - want["t1t3"]),
                    abs(est.c_t2t3 - want["t2t3"]))
            if prev is not None:
                for d, dp in zip(devs, prev):
                    assert d < dp / 3.0  # second-order convergence
            prev = devs

    def test_bilinear_small_coupling_form(self):
        # the early-early outcome correlation is bilinear in the couplings
        # at leading order
        cfg = example_config()
        engine = CnimpEngine(cfg)
        want = oracle_values(cfg)["t1t2"]
        for lam1, lam2 in ((0.02, 0.05), (0.01, 0.025)):
            runs = engine.runs(lam1, lam2)
            from spincorr.protocols.cnimp import MARGINAL_T1T2
            from spincorr.protocols.config import correlate
            c1 = correlate(runs["c1"].marginal(MARGINAL_T1T2))
            c2 = correlate(runs["c2"].marginal(MARGINAL_T1T2))
            assert c1 / (4 * lam1 * lam2) == pytest.approx(want.imag, abs=0.02)
            assert c2 / (4 * lam1 * lam2) == pytest.approx(want.real, abs=0.02)

    def test_role_swap_symmetry(self):
        # the late-late estimator mirrors the early-late one with the
        # coupling roles interchanged: it is perturbed by the *first*
        # coupling and inverts only the second
        cfg = example_config()
        engine = CnimpEngine(cfg)
        want = oracle_values(cfg)["t2t3"]
        est_free = cnimp_estimators(engine.runs(0.0, 0.3), 0.0, 0.3)
        est_pert = cnimp_estimators(engine.runs(0.6, 0.3), 0.6, 0.3)
        assert abs(est_pert.c_t2t3 - want) > abs(est_free.c_t2t3 - want)
        # amplification mirrors 1/(2 lam1) -> 1/(2 lam2): halving lam2
        # roughly doubles the small-coupling estimate's outcome correlation
        from spincorr.protocols.cnimp import MARGINAL_T2T3
        from spincorr.protocols.config import correlate
        c_a = correlate(engine.runs(0.01, 0.02)["c2"].marginal(MARGINAL_T2T3))
        c_b = correlate(engine.runs(0.01, 0.01)["c2"].marginal(MARGINAL_T2T3))
        assert c_a / c_b == pytest.approx(2.0, rel=0.05)

    def test_second_coupling_perturbs_early_late(self):
        # the early-late estimate depends on the second coupling only
        # through its backaction: it shifts with lam2 at fixed lam1
        cfg = example_config()
        engine = CnimpEngine(cfg)
        want = oracle_values(cfg)["t1t3"]
        est_free = cnimp_estimators(engine.runs(0.3, 0.0), 0.3, 0.0)
        est_pert = cnimp_estimators(engine.runs(0.3, 0.6), 0.3, 0.6)
        assert abs(est_pert.c_t1t3 - want) > abs(est_free.c_t1t3 - want)

    def test_undefined_at_zero_coupling(self):
        cfg = example_config(0.0, 0.3)
        est = cnimp_estimate(cfg)
        assert math.isnan(est.c_t1t2.real)
        assert math.isnan(est.c_t1t3.real)
        assert not math.isnan(est.c_t2t3.real)

    def test_random_instances_converge(self, rng):
        reg = SpinRegister(2, 0.5, 2, Convention.PAULI)
        sreg = reg.system_only()
        for _ in range(3):
            h = Operator(random_hermitian(rng, 4), sreg, hermitian_hint=True)
            psi = StateVector(random_state_vector(rng, 4), sreg)
            axis_a, axis_b = "xyz"[rng.integers(3)], "xyz"[rng.integers(3)]
            cfg = example_config(hamiltonian=h, system_state=psi).with_(
                query=CorrelationQuery(1, 2, axis_a, axis_b, 0.0, 0.8, 2.1))
            want = oracle_values(cfg)
            engine = CnimpEngine(cfg)
            est = cnimp_estimators(engine.runs(1e-3, 1e-3), 1e-3, 1e-3)
            assert abs(est.c_t1t2 - want["t1t2"]) < 1e-4
            assert abs(est.c_t1t3 - want["t1t3"]) < 1e-4
            assert abs(est.c_t2t3 - want["t2t3"]) < 1e-4
