"""Seeded Monte Carlo sampling of protocol outcome distributions.

Reproducibility contract
------------------------

Outcomes are drawn by inverse-CDF binning: the outcome tuples are ordered
lexicographically descending, the cumulative probabilities define the bin
edges on the unit interval, and uniform variates are binned with
``numpy.searchsorted(..., side="right")``.  The uniform stream comes from
the counter-based Philox generator keyed by the 64-bit seed, so a fixed
(seed, config, n) triple yields bit-identical counts.

Derived seeds: the second coupling family's sample uses
``seed XOR SEED_COMPONENT_SALT``; shard ``k`` of a sharded run uses
``seed XOR k``.  Shard counts are merged by plain addition, so a sharded
run is a deterministic function of (seed, shard count), and a single shard
reproduces the serial reference.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import EstimatorError
from .protocols.config import (CouplingKind, OutcomeDistribution,
                               ProtocolConfig)
from .protocols.snimp import (EstimatorComponents, SnimpEngine,
                              assemble_estimator)

SEED_MASK = (1 << 64) - 1
SEED_COMPONENT_SALT = 0x9E3779B97F4A7C15  # golden-ratio increment


def derive_component_seed(seed: int, component: int) -> int:
    """Seed for the sample of run ``component`` (1-based): the first run
    uses the seed itself, run k uses seed XOR (k-1)*salt."""
    return (seed ^ (((component - 1) * SEED_COMPONENT_SALT) & SEED_MASK)) & SEED_MASK


def derive_point_seed(seed: int, index: int) -> int:
    """Seed for grid point ``index`` of a parameter sweep."""
    return (seed + index * SEED_COMPONENT_SALT) & SEED_MASK


def ordered_outcomes(dist: OutcomeDistribution) -> list[tuple[float, ...]]:
    """Deterministic outcome ordering: lexicographic, descending."""
    return sorted(dist.probabilities, reverse=True)


@dataclass
class FrequencyTable:
    """Observed outcome counts from ``n`` draws."""

    counts: dict[tuple[float, ...], int]
    n: int

    def __post_init__(self) -> None:
        total = sum(self.counts.values())
        if total != self.n or any(c < 0 for c in self.counts.values()):
            raise ValueError(f"counts sum to {total}, expected n = {self.n}")

    def marginal(self, components: tuple[int, ...]) -> "FrequencyTable":
        out: dict[tuple[float, ...], int] = {}
        for key, c in self.counts.items():
            sub = tuple(key[i] for i in components)
            out[sub] = out.get(sub, 0) + c
        return FrequencyTable(out, self.n)

    def merged(self, other: "FrequencyTable") -> "FrequencyTable":
        keys = set(self.counts) | set(other.counts)
        return FrequencyTable(
            {k: self.counts.get(k, 0) + other.counts.get(k, 0) for k in keys},
            self.n + other.n)


@dataclass
class SampleRun:
    """One sampled realization of a protocol outcome distribution."""

    seed: int
    n: int
    config: ProtocolConfig
    component: CouplingKind
    table: FrequencyTable


def sample(dist: OutcomeDistribution, n: int, seed: int) -> FrequencyTable:
    """Draw ``n`` outcomes by inverse-CDF binning (see module docstring)."""
    if n < 1:
        raise ValueError("sample size must be at least 1")
    keys = ordered_outcomes(dist)
    p = np.array([dist.probabilities[k] for k in keys])
    cum = np.cumsum(p / p.sum())
    cum[-1] = 1.0
    rng = np.random.Generator(np.random.Philox(key=seed & SEED_MASK))
    u = rng.random(n)
    idx = np.searchsorted(cum, u, side="right")
    binned = np.bincount(idx, minlength=len(keys))
    return FrequencyTable({k: int(c) for k, c in zip(keys, binned)}, n)


def sample_sharded(dist: OutcomeDistribution, n: int, seed: int,
                   shards: int = 1, threads: int = 1) -> FrequencyTable:
    """Sharded sampling: shard k draws its quota with seed XOR k; counts
    merge by addition.  ``shards=1`` reproduces :func:`sample` exactly."""
    if shards < 1:
        raise ValueError("shard count must be at least 1")
    quota, extra = divmod(n, shards)
    sizes = [quota + (1 if k < extra else 0) for k in range(shards)]
    jobs = [(k, size) for k, size in enumerate(sizes) if size > 0]

    def worker(job):
        k, size = job
        return sample(dist, size, (seed ^ k) & SEED_MASK)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tables = list(pool.map(worker, jobs))
    else:
        tables = [worker(j) for j in jobs]
    merged = tables[0]
    for t in tables[1:]:
        merged = merged.merged(t)
    return merged


def empirical_correlate(table: FrequencyTable) -> float:
    """Product-of-outcomes average over relative frequencies."""
    total = 0.0
    for key, c in table.counts.items():
        if len(key) != 2:
            raise ValueError("empirical correlation expects two outcome "
                             "components; marginalize first")
        total += key[0] * key[1] * c
    return total / table.n


def snimp_sample_runs(config: ProtocolConfig, n: int, seed: int,
                      shards: int = 1, threads: int = 1,
                      engine: SnimpEngine | None = None
                      ) -> tuple[SampleRun, SampleRun]:
    """Sample both coupling families of the single-ancilla protocol with
    derived seeds."""
    engine = engine or SnimpEngine(config)
    runs = []
    for component, kind in ((1, CouplingKind.B1), (2, CouplingKind.B2)):
        dist = engine.distribution(config.lam, kind)
        sub_seed = derive_component_seed(seed, component)
        table = sample_sharded(dist, n, sub_seed, shards, threads)
        runs.append(SampleRun(sub_seed, n, config, kind, table))
    return runs[0], runs[1]


def finite_sample_estimator(run_b1: SampleRun, run_b2: SampleRun) -> complex:
    """Complex finite-sample estimate from one sample per coupling family.

    The inversion prefactors are recomputed from the configured coupling
    matrices; configurations whose ancilla state carries a nonzero mean
    measured component are rejected here, since the sampled data alone
    cannot remove the induced offset.
    """
    if run_b1.config is not run_b2.config and run_b1.config != run_b2.config:
        if (run_b1.config.lam != run_b2.config.lam
                or run_b1.config.register != run_b2.config.register):
            raise EstimatorError("samples come from incompatible configurations")
    config = run_b1.config
    engine = SnimpEngine(config)
    if abs(engine.observable_mean()) > 1e-10:
        raise EstimatorError(
            "ancilla state has a nonzero mean measured component; the "
            "finite-sample estimator cannot remove the resulting offset")
    components = EstimatorComponents(
        script_c1=empirical_correlate(run_b1.table),
        script_c2=empirical_correlate(run_b2.table),
        f1=engine.f_for(CouplingKind.B1),
        f2=engine.f_for(CouplingKind.B2),
        lam=config.lam,
        levels=config.register.levels,
        convention=config.register.convention,
    )
    return assemble_estimator(components)


def cnimp_sample_tables(config: ProtocolConfig, n: int, seed: int,
                        shards: int = 1, threads: int = 1,
                        engine=None) -> dict[str, FrequencyTable]:
    """Sample the three consecutive-protocol runs with derived seeds."""
    from .protocols.cnimp import CnimpEngine

    engine = engine or CnimpEngine(config)
    dists = engine.runs(config.lam, config.lam2)
    tables = {}
    for k, name in enumerate(("c1", "c2", "c3"), start=1):
        tables[name] = sample_sharded(dists[name], n,
                                      derive_component_seed(seed, k),
                                      shards, threads)
    return tables


def cnimp_finite_sample_estimates(tables: dict[str, FrequencyTable],
                                  lam1: float, lam2: float):
    """Finite-sample analogues of the three consecutive-protocol
    estimates, from the sampled run tables."""
    from .protocols.cnimp import (MARGINAL_T1T2, MARGINAL_T1T3,
                                  MARGINAL_T2T3, CnimpEstimates)

    def corr(name, components):
        return empirical_correlate(tables[name].marginal(components))

    nan = complex(float("nan"), float("nan"))
    c_t1t2 = nan if (lam1 == 0.0 or lam2 == 0.0) else (
        corr("c2", MARGINAL_T1T2) + 1j * corr("c1", MARGINAL_T1T2)
    ) / (4.0 * lam1 * lam2)
    c_t1t3 = nan if lam1 == 0.0 else -(
        corr("c2", MARGINAL_T1T3) + 1j * corr("c1", MARGINAL_T1T3)
    ) / (2.0 * lam1)
    c_t2t3 = nan if lam2 == 0.0 else -(
        corr("c2", MARGINAL_T2T3) + 1j * corr("c3", MARGINAL_T2T3)
    ) / (2.0 * lam2)
    return CnimpEstimates(c_t1t2, c_t1t3, c_t2t3)
