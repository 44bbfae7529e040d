import math

import numpy as np
import pytest

from spincorr import models, oracle, sampling
from spincorr.core import Convention, SpinRegister
from spincorr.exceptions import EstimatorError
from spincorr.oracle import CorrelationQuery
from spincorr.protocols import ProtocolConfig, snimp_estimate
from spincorr.protocols.config import OutcomeDistribution
from spincorr.sampling import (FrequencyTable, empirical_correlate,
                               derive_component_seed, derive_point_seed,
                               finite_sample_estimator, sample,
                               sample_sharded, snimp_sample_runs)

EXAMPLE = dict(alphas=(math.pi / 3, math.pi / 3),
               thetas=(math.pi / 7, math.pi / 5))


def example_config(lam=0.42):
    reg = SpinRegister(2, 0.5, 1, Convention.PAULI)
    return ProtocolConfig(
        register=reg, hamiltonian=models.IsingXX(),
        system_state=models.SystemStateSpec(EXAMPLE["alphas"],
                                            EXAMPLE["thetas"]),
        query=CorrelationQuery(1, 2, "z", "z", 1.0, 10.0),
        ancilla_states=(models.AncillaStateSpec(),), lam=lam)


UNIFORM4 = OutcomeDistribution({(1.0, 1.0): 0.25, (1.0, -1.0): 0.25,
                                (-1.0, 1.0): 0.25, (-1.0, -1.0): 0.25})


class TestSample:
    def test_point_mass(self):
        dist = OutcomeDistribution({(1.0, -1.0): 1.0, (1.0, 1.0): 0.0})
        table = sample(dist, 500, 3)
        assert table.counts[(1.0, -1.0)] == 500

    def test_uniform_within_five_sigma(self):
        n = 10 ** 6
        table = sample(UNIFORM4, n, 123)
        sigma = math.sqrt(n * 0.25 * 0.75)
        for c in table.counts.values():
            assert abs(c - n / 4) < 5 * sigma

    def test_deterministic(self):
        cfg = example_config()
        from spincorr.protocols import snimp_distribution
        dist = snimp_distribution(cfg)
        t1 = sample(dist, 10_000, 42)
        t2 = sample(dist, 10_000, 42)
        assert t1.counts == t2.counts

    def test_counts_sum_to_n(self):
        table = sample(UNIFORM4, 997, 5)
        assert sum(table.counts.values()) == table.n == 997

    def test_law_of_large_numbers_trend(self):
        devs = []
        for n in (10 ** 3, 10 ** 4, 10 ** 5):
            table = sample(UNIFORM4, n, 11)
            devs.append(max(abs(c / n - 0.25)
                            for c in table.counts.values()))
        assert devs[2] < devs[0]
        assert devs[2] < 5 / math.sqrt(10 ** 5)


class TestSharding:
    def test_single_shard_reproduces_serial(self):
        t_serial = sample(UNIFORM4, 1000, 9)
        t_shard = sample_sharded(UNIFORM4, 1000, 9, shards=1)
        assert t_serial.counts == t_shard.counts

    @pytest.mark.parametrize("shards", [2, 3, 7])
    def test_merge_is_documented_function(self, shards):
        n, seed = 1003, 77
        merged = sample_sharded(UNIFORM4, n, seed, shards=shards)
        quota, extra = divmod(n, shards)
        manual = None
        for k in range(shards):
            size = quota + (1 if k < extra else 0)
            part = sample(UNIFORM4, size, seed ^ k)
            manual = part if manual is None else manual.merged(part)
        assert merged.counts == manual.counts
        assert merged.n == n

    def test_threaded_merge_matches(self):
        a = sample_sharded(UNIFORM4, 5000, 4, shards=4, threads=1)
        b = sample_sharded(UNIFORM4, 5000, 4, shards=4, threads=4)
        assert a.counts == b.counts


class TestEmpiricalCorrelate:
    def test_exact_counts_reproduce_distribution_average(self):
        table = FrequencyTable({(1.0, 1.0): 30, (1.0, -1.0): 20,
                                (-1.0, 1.0): 10, (-1.0, -1.0): 40}, 100)
        want = (30 - 20 - 10 + 40) / 100
        assert empirical_correlate(table) == pytest.approx(want)

    def test_single_shot(self):
        table = FrequencyTable({(-1.0, 1.0): 1}, 1)
        assert empirical_correlate(table) == -1.0

    def test_convergence_over_seeds(self):
        from spincorr.protocols import correlate, snimp_distribution
        cfg = example_config()
        dist = snimp_distribution(cfg)
        want = correlate(dist)
        n = 10 ** 4
        hits = 0
        for seed in range(100):
            got = empirical_correlate(sample(dist, n, seed))
            # binomial-style tolerance: a few standard deviations of the
            # outcome-product average
            if abs(got - want) <= 4.0 / math.sqrt(n):
                hits += 1
        assert hits >= 95


class TestFiniteSampleEstimator:
    def test_exact_tables_match_exact_estimator(self):
        from spincorr.protocols import snimp_distribution
        from spincorr.protocols.config import CouplingKind
        cfg = example_config()
        runs = []
        for kind, n_scale in ((CouplingKind.B1, 1), (CouplingKind.B2, 1)):
            dist = snimp_distribution(cfg.with_(coupling=kind))
            counts = {k: round(p * 10 ** 6) for k, p in dist.probabilities.items()}
            total = sum(counts.values())
            table = FrequencyTable(counts, total)
            runs.append(sampling.SampleRun(0, total, cfg, kind, table))
        est = finite_sample_estimator(*runs)
        want = snimp_estimate(cfg)
        assert abs(est - want) < 5e-6  # rounding the counts is the only error

    def test_derived_seeds_differ(self):
        assert derive_component_seed(42, 1) == 42
        assert derive_component_seed(42, 2) != 42
        assert derive_point_seed(42, 0) == 42
        assert derive_point_seed(42, 3) != derive_point_seed(42, 2)

    def test_reproducible_runs(self):
        cfg = example_config()
        r1a, r2a = snimp_sample_runs(cfg, 2000, 7)
        r1b, r2b = snimp_sample_runs(cfg, 2000, 7)
        assert r1a.table.counts == r1b.table.counts
        assert r2a.table.counts == r2b.table.counts
        assert r1a.table.counts != r2a.table.counts  # independent samples

    def test_deviation_scales_with_inverse_lambda_sqrt_n(self):
        # power-law regression of the median deviation over seeds against
        # 1/(lam sqrt(n))
        cfg0 = example_config()
        from spincorr import errors
        devs, preds = [], []
        for lam in (0.05, 0.1):
            cfg = cfg0.with_(lam=lam)
            model = errors.SnimpErrorModel(cfg)
            for n in (10 ** 3, 10 ** 4):
                ds = []
                for seed in range(10):
                    r1, r2 = snimp_sample_runs(cfg, n, seed, engine=model.engine)
                    est = finite_sample_estimator(r1, r2)
                    ds.append(abs(est - model.c_exact))
                devs.append(np.median(ds))
                preds.append(1.0 / (lam * math.sqrt(n)))
        fit = np.polyfit(np.log(preds), np.log(devs), 1)
        assert fit[0] == pytest.approx(1.0, abs=0.2)

    def test_unbalanced_ancilla_rejected(self):
        cfg = example_config()
        with pytest.warns(UserWarning):
            bad = cfg.with_(ancilla_states=(models.AncillaStateSpec(
                coefficients=(0.8, 0.6), preset=None),))
            r1, r2 = snimp_sample_runs(bad, 100, 1)
            with pytest.raises(EstimatorError, match="mean measured"):
                finite_sample_estimator(r1, r2)


class TestCnimpSampling:
    def test_estimates_converge(self):
        reg = SpinRegister(2, 0.5, 2, Convention.PAULI)
        cfg = ProtocolConfig(
            register=reg, hamiltonian=models.IsingXX(),
            system_state=models.SystemStateSpec(EXAMPLE["alphas"],
                                                EXAMPLE["thetas"]),
            query=CorrelationQuery(1, 2, "z", "z", 0.0, 1.0, 10.0),
            ancilla_states=(models.AncillaStateSpec(),
                            models.AncillaStateSpec()),
            lam=0.4, lam2=0.4)
        tables = sampling.cnimp_sample_tables(cfg, 200_000, 3)
        est = sampling.cnimp_finite_sample_estimates(tables, 0.4, 0.4)
        from spincorr.protocols import cnimp_estimate
        want = cnimp_estimate(cfg)
        assert abs(est.c_t1t2 - want.c_t1t2) < 0.1
        assert abs(est.c_t1t3 - want.c_t1t3) < 0.1
        assert abs(est.c_t2t3 - want.c_t2t3) < 0.1
