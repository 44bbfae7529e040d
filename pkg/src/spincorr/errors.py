"""Systematic and statistical error analysis for the protocol estimators.

The systematic error is the distance between the exact correlator and the
all-orders finite-coupling estimate; the statistical error is bounded by
propagating per-outcome Poisson fluctuations (standard deviation
sqrt(count)/n on each relative frequency) through the estimator via the
triangle inequality.  With expected counts n * P the bound scales exactly
as 1/sqrt(n), which the sweep helpers exploit: each coupling grid point is
evaluated once and rescaled across sample sizes.

Predictive bounds use expected counts n * P (available before any
sampling); empirical bounds use observed counts from a frequency table.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import oracle, sampling
from .exceptions import EstimatorError, NormalizationError
from .oracle import CorrelationQuery
from .protocols.cnimp import (MARGINAL_T1T2, MARGINAL_T1T3, MARGINAL_T2T3,
                              CnimpEngine, cnimp_estimators)
from .protocols.config import (CouplingKind, OutcomeDistribution,
                               ProtocolConfig)
from .protocols.snimp import SnimpEngine

NORM_EPS = 1e-12

DEFAULT_LAMBDA_STEP = 0.005
DEFAULT_SURFACE_STEP = 0.01
DEFAULT_N_VALUES = tuple(10 ** k for k in range(2, 9))

CNIMP_TARGETS = ("t1t2", "t1t3", "t2t3")


def default_lambda_grid(step: float = DEFAULT_LAMBDA_STEP,
                        upper: float = 1.0) -> np.ndarray:
    """Coupling grid on (0, upper] with the given step."""
    count = int(round(upper / step))
    return step * np.arange(1, count + 1)


def default_surface_grid(step: float = DEFAULT_SURFACE_STEP,
                         upper: float = 1.0) -> np.ndarray:
    """Coupling grid on [0, upper]; zero couplings are legal for the
    estimators that do not divide by them."""
    count = int(round(upper / step))
    return step * np.arange(0, count + 1)


@dataclass
class ErrorReport:
    """Error budget at one coupling point, in relative form when
    ``relative`` (all entries divided by |C|)."""

    eps_sys: float
    eps_stat_bound: float
    eps_tot_bound: float
    norm_c: float
    relative: bool = True
    measured_dev: float | None = None
    lam: float | None = None
    lam2: float | None = None

    def __post_init__(self) -> None:
        if not math.isclose(self.eps_tot_bound,
                            self.eps_sys + self.eps_stat_bound,
                            rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError("total bound must be the sum of the systematic "
                             "and statistical parts")
        for name in ("eps_sys", "eps_stat_bound", "eps_tot_bound"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def _counts_mapping(counts, n: int) -> dict:
    if isinstance(counts, sampling.FrequencyTable):
        if counts.n != n:
            raise ValueError(f"table holds {counts.n} draws, expected {n}")
        return counts.counts
    return dict(counts)


def predictive_counts(dist: OutcomeDistribution, n: float) -> dict:
    """Expected counts n * P for a predictive bound."""
    return {k: n * p for k, p in dist.probabilities.items()}


def statistical_bound(counts1, counts2, n: int, lam: float, levels: int,
                      f1: float, f2: float) -> float:
    """Triangle-inequality bound on |C_lambda - C_lambda_n| from the two
    coupling families' outcome counts (observed or expected)."""
    if lam == 0.0:
        raise EstimatorError("statistical bound diverges at zero coupling")
    c1 = _counts_mapping(counts1, n)
    c2 = _counts_mapping(counts2, n)
    total = 0.0
    for key in set(c1) | set(c2):
        weight = abs(key[0] * key[1])
        total += weight * (math.sqrt(c2.get(key, 0.0)) / abs(f2)
                           + math.sqrt(c1.get(key, 0.0)) / abs(f1))
    return levels / (2.0 * abs(lam)) * total / n


class SnimpErrorModel:
    """Error curves for the single-ancilla protocol on one configuration.

    ``curves`` returns, per grid point, the relative systematic error and
    the unit-sample relative statistical bound; the bound at sample size n
    is the unit value divided by sqrt(n).
    """

    def __init__(self, config: ProtocolConfig):
        self.config = config
        self.engine = SnimpEngine(config)
        res = self.engine.res
        self.c_exact = oracle.exact_correlation(res.initial_full, res.h_full,
                                                config.query)
        self.norm_c = abs(self.c_exact)
        if self.norm_c < NORM_EPS:
            raise NormalizationError(
                f"|C| = {self.norm_c:.3e}; relative errors are undefined")
        self.f1 = self.engine.f_for(CouplingKind.B1)
        self.f2 = self.engine.f_for(CouplingKind.B2)
        self.levels = config.register.levels

    def distributions(self, lam: float):
        return (self.engine.distribution(lam, CouplingKind.B1),
                self.engine.distribution(lam, CouplingKind.B2))

    def point(self, lam: float, n: int,
              measured_dev: float | None = None) -> ErrorReport:
        eps_sys = abs(self.c_exact - self.engine.estimate(lam)) / self.norm_c
        d1, d2 = self.distributions(lam)
        stat = statistical_bound(predictive_counts(d1, n),
                                 predictive_counts(d2, n),
                                 n, lam, self.levels, self.f1, self.f2)
        stat /= self.norm_c
        return ErrorReport(eps_sys, stat, eps_sys + stat, self.norm_c,
                           relative=True, measured_dev=measured_dev, lam=lam)

    def unit_stat(self, lam: float) -> float:
        """Relative statistical bound at n = 1 (scales as 1/sqrt(n))."""
        d1, d2 = self.distributions(lam)
        return statistical_bound(predictive_counts(d1, 1.0),
                                 predictive_counts(d2, 1.0),
                                 1, lam, self.levels, self.f1,
                                 self.f2) / self.norm_c

    def curves(self, lams: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        sys_rel = np.empty(len(lams))
        unit_rel = np.empty(len(lams))
        for i, lam in enumerate(lams):
            sys_rel[i] = abs(self.c_exact - self.engine.estimate(lam)) / self.norm_c
            unit_rel[i] = self.unit_stat(lam)
        return sys_rel, unit_rel


@dataclass
class LambdaSweep:
    """Per-point error reports over a coupling grid, with the grid argmin
    of the relative total bound (smallest coupling wins ties)."""

    lams: np.ndarray
    reports: list[ErrorReport]
    lam_star: float
    min_rel_tot: float
    norm_c: float


def lambda_sweep(config: ProtocolConfig, n: int,
                 grid: np.ndarray | None = None) -> LambdaSweep:
    lams = default_lambda_grid() if grid is None else np.asarray(grid, float)
    model = SnimpErrorModel(config)
    sys_rel, unit_rel = model.curves(lams)
    stat_rel = unit_rel / math.sqrt(n)
    tot = sys_rel + stat_rel
    reports = [ErrorReport(s, st, s + st, model.norm_c, relative=True, lam=l)
               for s, st, l in zip(sys_rel, stat_rel, lams)]
    k = int(np.argmin(tot))
    return LambdaSweep(lams, reports, float(lams[k]), float(tot[k]),
                       model.norm_c)


def lambda_star(config: ProtocolConfig, n: int,
                grid: np.ndarray | None = None) -> tuple[float, float]:
    """Grid argmin of the relative total bound and its value."""
    sweep = lambda_sweep(config, n, grid)
    return sweep.lam_star, sweep.min_rel_tot


@dataclass
class NSweep:
    """Bound minima and their coupling positions across sample sizes."""

    n_values: tuple[int, ...]
    lam_stars: np.ndarray
    min_rel_tots: np.ndarray


def sweep_vs_n(config: ProtocolConfig,
               n_values=DEFAULT_N_VALUES,
               grid: np.ndarray | None = None) -> NSweep:
    lams = default_lambda_grid() if grid is None else np.asarray(grid, float)
    model = SnimpErrorModel(config)
    sys_rel, unit_rel = model.curves(lams)
    stars, minima = [], []
    for n in n_values:
        tot = sys_rel + unit_rel / math.sqrt(n)
        k = int(np.argmin(tot))
        stars.append(float(lams[k]))
        minima.append(float(tot[k]))
    return NSweep(tuple(int(n) for n in n_values), np.array(stars),
                  np.array(minima))


@dataclass
class PowerLawFit:
    """Least-squares line through (log10 n, log10 value)."""

    exponent: float
    prefactor_log10: float
    r_squared: float

    def value_at(self, n: float) -> float:
        return 10 ** (self.prefactor_log10 + self.exponent * math.log10(n))

    def n_for_value(self, target: float) -> float:
        return 10 ** ((math.log10(target) - self.prefactor_log10)
                      / self.exponent)


def power_law_fit(n_values, values) -> PowerLawFit:
    x = np.log10(np.asarray(n_values, float))
    y = np.log10(np.asarray(values, float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(slope), float(intercept), r2)


# ---------------------------------------------------------------------------
# Monte Carlo vs bound


@dataclass
class CoverageResult:
    """How often the measured deviation stays below the predictive bound
    over seeds and the coupling grid."""

    fraction: float
    below: int
    total: int
    lams: np.ndarray
    bounds: np.ndarray
    deviations: np.ndarray  # shape (seeds, grid)


def bound_coverage(config: ProtocolConfig, n: int, seeds,
                   grid: np.ndarray | None = None) -> CoverageResult:
    """Sample the protocol at every grid point for every seed and compare
    the measured relative deviation |C - C_lambda_n| / |C| against the
    predictive relative total bound."""
    lams = default_lambda_grid() if grid is None else np.asarray(grid, float)
    model = SnimpErrorModel(config)
    sys_rel, unit_rel = model.curves(lams)
    bounds = sys_rel + unit_rel / math.sqrt(n)
    devs = np.empty((len(seeds), len(lams)))
    for i, lam in enumerate(lams):
        d1, d2 = model.distributions(lam)
        for si, seed in enumerate(seeds):
            point_seed = sampling.derive_point_seed(int(seed), i)
            c1 = sampling.empirical_correlate(sampling.sample(
                d1, n, sampling.derive_component_seed(point_seed, 1)))
            c2 = sampling.empirical_correlate(sampling.sample(
                d2, n, sampling.derive_component_seed(point_seed, 2)))
            pref = -model.levels / (2.0 * lam)
            est = pref * (c2 / model.f2 + 1j * c1 / model.f1)
            devs[si, i] = abs(model.c_exact - est) / model.norm_c
    below = int(np.sum(devs <= bounds[None, :]))
    total = devs.size
    return CoverageResult(below / total, below, total, lams, bounds, devs)


# ---------------------------------------------------------------------------
# consecutive-protocol error surfaces


def cnimp_target_queries(query: CorrelationQuery) -> dict[str, CorrelationQuery]:
    """The three correlation queries probed by one consecutive run."""
    if query.t3 is None:
        raise ValueError("consecutive protocol needs three times")
    return {
        "t1t2": replace(query, t3=None, t2=query.t2),
        "t1t3": replace(query, t2=query.t3, t3=None),
        "t2t3": CorrelationQuery(query.site_j, query.site_i, query.axis_b,
                                 query.axis_a, query.t2, query.t3),
    }


@dataclass
class Surface2D:
    """Relative error surfaces of one consecutive-protocol estimator over
    the (lam1, lam2) grid; undefined points (vanishing required coupling)
    hold infinities and never win the argmin."""

    lam1s: np.ndarray
    lam2s: np.ndarray
    rel_sys: np.ndarray
    rel_stat: np.ndarray
    rel_tot: np.ndarray
    lam_star: tuple[float, float]
    min_rel_tot: float
    norm_c: float


@dataclass
class CnimpSurfaces:
    n: int
    surfaces: dict[str, Surface2D]


def _cnimp_unit_grids(config: ProtocolConfig, lam1s, lam2s, threads: int = 1):
    """Systematic error and unit-sample statistical bound (both relative)
    for the three estimators over the coupling grid."""
    engine = CnimpEngine(config)
    queries = cnimp_target_queries(config.query)
    res = engine.res
    norms, exact = {}, {}
    for target, q in queries.items():
        c = oracle.exact_correlation(res.initial_full, res.h_full, q)
        exact[target] = c
        norms[target] = abs(c)
        if norms[target] < NORM_EPS:
            raise NormalizationError(f"|C({target})| = {norms[target]:.3e}")

    shape = (len(lam1s), len(lam2s))
    sys_grid = {t: np.full(shape, np.inf) for t in CNIMP_TARGETS}
    unit_grid = {t: np.full(shape, np.inf) for t in CNIMP_TARGETS}

    def stat_sum(dist_re, dist_im, components) -> float:
        # one run observes all four registers, so the Poisson fluctuations
        # enter per full outcome combination, weighted by the two outcome
        # components the estimator correlates
        c0, c1 = components
        total = 0.0
        for dist in (dist_re, dist_im):
            for key, p in dist.probabilities.items():
                total += abs(key[c0] * key[c1]) * math.sqrt(p)
        return total

    def fill_row(i: int) -> None:
        lam1 = lam1s[i]
        for j, lam2 in enumerate(lam2s):
            runs = engine.runs(lam1, lam2)
            est = cnimp_estimators(runs, lam1, lam2)
            if lam1 > 0.0 and lam2 > 0.0:
                sys_grid["t1t2"][i, j] = abs(exact["t1t2"] - est.c_t1t2) / norms["t1t2"]
                unit_grid["t1t2"][i, j] = (
                    stat_sum(runs["c2"], runs["c1"], MARGINAL_T1T2)
                    / (4.0 * lam1 * lam2) / norms["t1t2"])
            if lam1 > 0.0:
                sys_grid["t1t3"][i, j] = abs(exact["t1t3"] - est.c_t1t3) / norms["t1t3"]
                unit_grid["t1t3"][i, j] = (
                    stat_sum(runs["c2"], runs["c1"], MARGINAL_T1T3)
                    / (2.0 * lam1) / norms["t1t3"])
            if lam2 > 0.0:
                sys_grid["t2t3"][i, j] = abs(exact["t2t3"] - est.c_t2t3) / norms["t2t3"]
                unit_grid["t2t3"][i, j] = (
                    stat_sum(runs["c2"], runs["c3"], MARGINAL_T2T3)
                    / (2.0 * lam2) / norms["t2t3"])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, range(len(lam1s))))
    else:
        for i in range(len(lam1s)):
            fill_row(i)
    return sys_grid, unit_grid, norms


def cnimp_error_surface(config: ProtocolConfig, n: int,
                        grid: np.ndarray | None = None,
                        threads: int = 1) -> CnimpSurfaces:
    """Relative total-bound surfaces for all three estimators of the
    consecutive protocol at sample size ``n``."""
    lam1s = default_surface_grid() if grid is None else np.asarray(grid, float)
    lam2s = lam1s
    sys_grid, unit_grid, norms = _cnimp_unit_grids(config, lam1s, lam2s,
                                                   threads)
    surfaces = {}
    for target in CNIMP_TARGETS:
        rel_sys = sys_grid[target]
        rel_stat = unit_grid[target] / math.sqrt(n)
        rel_tot = rel_sys + rel_stat
        flat = int(np.argmin(np.where(np.isfinite(rel_tot), rel_tot, np.inf)))
        i, j = np.unravel_index(flat, rel_tot.shape)
        surfaces[target] = Surface2D(
            lam1s, lam2s, rel_sys, rel_stat, rel_tot,
            (float(lam1s[i]), float(lam2s[j])), float(rel_tot[i, j]),
            norms[target])
    return CnimpSurfaces(n, surfaces)


# ---------------------------------------------------------------------------
# protocol efficiency comparison


def snimp_config_for_target(config: ProtocolConfig,
                            target: str) -> ProtocolConfig:
    """Single-ancilla configuration probing one of the three correlations
    addressed by a consecutive-protocol configuration."""
    q = cnimp_target_queries(config.query)[target]
    reg = config.register
    snimp_reg = type(reg)(reg.system_site_count, reg.spin, 1, reg.convention,
                          reg.max_factors)
    ancilla = config.ancilla_states[:1] if config.ancilla_states else ()
    return config.with_(register=snimp_reg, query=q, ancilla_states=ancilla,
                        lam2=None)


@dataclass
class EfficiencyComparison:
    """Sample sizes needed by either protocol to reach the accuracy goal.

    ``n_*`` is the smallest decade sample size whose fitted bound minimum
    meets the goal (sample sizes come in decades here, so requirements are
    order-of-magnitude statements); ``n_*_fit`` is the continuous crossing
    of the fitted power law.  Measurement counts are twice the sample size
    (one sample per coupling family of the complex estimate).
    """

    target: str
    accuracy: float
    n_values: tuple[int, ...]
    snimp_minima: np.ndarray
    cnimp_minima: np.ndarray
    snimp_lam_stars: np.ndarray
    cnimp_lam_stars: np.ndarray  # shape (len(n_values), 2)
    fit_snimp: PowerLawFit
    fit_cnimp: PowerLawFit
    n_snimp: float
    n_cnimp: float
    n_snimp_fit: float
    n_cnimp_fit: float
    measurements_snimp: float
    measurements_cnimp: float


def protocol_efficiency_compare(config: ProtocolConfig, accuracy: float,
                                target: str = "t1t2",
                                n_values=DEFAULT_N_VALUES,
                                lambda_grid: np.ndarray | None = None,
                                surface_grid: np.ndarray | None = None,
                                threads: int = 1) -> EfficiencyComparison:
    """Compare the single and consecutive protocols at one target
    correlation: minimal sample size for a relative accuracy goal."""
    if not 0.0 < accuracy < 1.0:
        raise ValueError("accuracy goal must lie in (0, 1)")
    n_values = tuple(int(n) for n in n_values)

    snimp_cfg = snimp_config_for_target(config, target)
    lams = default_lambda_grid() if lambda_grid is None else \
        np.asarray(lambda_grid, float)
    model = SnimpErrorModel(snimp_cfg)
    sys_rel, unit_rel = model.curves(lams)
    snimp_minima, snimp_stars = [], []
    for n in n_values:
        tot = sys_rel + unit_rel / math.sqrt(n)
        k = int(np.argmin(tot))
        snimp_minima.append(float(tot[k]))
        snimp_stars.append(float(lams[k]))

    surf_grid = default_surface_grid() if surface_grid is None else \
        np.asarray(surface_grid, float)
    sys_grid, unit_grid, _ = _cnimp_unit_grids(config, surf_grid, surf_grid,
                                               threads)
    cn_sys, cn_unit = sys_grid[target], unit_grid[target]
    cnimp_minima, cnimp_stars = [], []
    for n in n_values:
        tot = np.where(np.isfinite(cn_sys),
                       cn_sys + cn_unit / math.sqrt(n), np.inf)
        i, j = np.unravel_index(int(np.argmin(tot)), tot.shape)
        cnimp_minima.append(float(tot[i, j]))
        cnimp_stars.append((float(surf_grid[i]), float(surf_grid[j])))

    snimp_minima = np.array(snimp_minima)
    cnimp_minima = np.array(cnimp_minima)
    fit_s = power_law_fit(n_values, snimp_minima)
    fit_c = power_law_fit(n_values, cnimp_minima)
    n_s = _decade_requirement(fit_s, accuracy)
    n_c = _decade_requirement(fit_c, accuracy)
    return EfficiencyComparison(target, accuracy, n_values, snimp_minima,
                                cnimp_minima, np.array(snimp_stars),
                                np.array(cnimp_stars), fit_s, fit_c, n_s, n_c,
                                fit_s.n_for_value(accuracy),
                                fit_c.n_for_value(accuracy),
                                2.0 * n_s, 2.0 * n_c)


def _decade_requirement(fit: PowerLawFit, accuracy: float,
                        max_exponent: int = 16) -> float:
    if fit.exponent >= 0:
        raise EstimatorError("bound minima do not decrease with the sample "
                             "size; no finite requirement exists")
    for k in range(1, max_exponent + 1):
        n = 10.0 ** k
        if fit.value_at(n) <= accuracy:
            return n
    raise EstimatorError(f"accuracy {accuracy} unreachable below 1e{max_exponent}")
