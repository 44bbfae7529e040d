"""Batch experiment driver.

Subcommands: ``exact``, ``snimp``, ``projective``, ``rotation``, ``cnimp``,
``sweep-lambda``, ``sweep-n``, ``compare``, ``selftest``.  Each run reads a
flat key-value config file (``key = value`` lines, ``#`` comments), applies
``--set key=value`` overrides, computes, and writes a CSV data file plus a
JSON metadata file (same path with a ``.json`` suffix) echoing every
configuration key, package versions and timings.

The CSV header is
``lambda[,lambda2],n,seed,re_C,im_C,re_Cn,im_Cn,eps_sys_rel,eps_stat_rel,eps_tot_rel,measured_rel``
(the ``lambda2`` column appears for consecutive-protocol experiments);
floats are printed with 17 significant digits, inapplicable fields as nan.
A metadata JSON can be re-fed as the config file of the same subcommand
and reproduces the CSV bit-identically.

Exit codes: 0 success, 1 configuration error, 2 physics-domain error,
3 numerical-tolerance failure.  ``SPINCORR_THREADS`` sets the worker count
for grid and shard evaluation.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time

import numpy as np

from . import __version__, errors, models, oracle, sampling
from . import protocols as protocols_pkg
from .core import Convention, SpinRegister
from .exceptions import (ConfigError, DomainError, SpincorrError,
                         ToleranceError)
from .oracle import CorrelationQuery
from .protocols import (ProtocolConfig, cnimp_estimate, projective_correlate,
                        rotation_protocol, snimp_estimate)
from .protocols.cnimp import CnimpEngine
from .protocols.config import CouplingKind, Timing
from .protocols.snimp import SnimpEngine

EXPERIMENTS = ("exact", "snimp", "projective", "rotation", "cnimp",
               "sweep-lambda", "sweep-n", "compare", "selftest")

_PI = math.pi

# key -> default (as canonical string); dynamic alphaK/thetaK keys are
# validated separately
DEFAULTS: dict[str, str] = {
    "experiment": "",
    "sites": "2",
    "spin": "0.5",
    "convention": "pauli",
    "hamiltonian": "isingxx",
    "axis_n": "1,0,0",
    "axis_m": "1,0,0",
    "local_terms": "",
    "site_i": "1",
    "site_j": "2",
    "axis_a": "z",
    "axis_b": "z",
    "t1": "1",
    "t2": "10",
    "t3": "",
    "lambda": "0.42",
    "lambda2": "",
    "timing": "deferred",
    "ancilla": "uniform",
    "ancilla2": "uniform",
    "rotation_theta": f"{1.5 * _PI:.17g}",
    "n": "10000",
    "seed": "42",
    "shards": "1",
    "sample": "true",
    "protocol": "snimp",
    "target": "t1t2",
    "accuracy": "0.1",
    "grid_step": "",
    "grid_max": "1",
    "n_values": "100,1000,10000,100000,1000000,10000000,100000000",
    "output": "",
}

_ANGLE_KEY = re.compile(r"^(alpha|theta)([1-9][0-9]*)$")

CSV_COLUMNS = ("n", "seed", "re_C", "im_C", "re_Cn", "im_Cn", "eps_sys_rel",
               "eps_stat_rel", "eps_tot_rel", "measured_rel")


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _parse_bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"key {key}: expected a boolean, got {text!r}")


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"key {key}: expected a number, got {text!r}") from None


def _parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"key {key}: expected an integer, got {text!r}") from None


def _parse_vector(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"key {key}: expected comma-separated numbers, "
                          f"got {text!r}") from None


def _parse_complex_list(text: str, key: str) -> tuple[complex, ...]:
    try:
        return tuple(complex(x.strip().replace(" ", "")) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"key {key}: expected comma-separated complex "
                          f"numbers, got {text!r}") from None


_TERM_FACTOR = re.compile(r"^([xyz])([1-9][0-9]*)$")


def _parse_local_terms(text: str, key: str) -> models.LocalTerms:
    """Mini-expression like ``1.0*x1*x2 + 0.5*z1``: terms joined by '+',
    factors by '*', with an optional leading coefficient per term."""
    terms = []
    for chunk in text.split("+"):
        factors = [f.strip() for f in chunk.strip().split("*") if f.strip()]
        if not factors:
            raise ConfigError(f"key {key}: empty term in {text!r}")
        coeff = 1.0
        ops = []
        for f in factors:
            m = _TERM_FACTOR.match(f)
            if m:
                ops.append((int(m.group(2)), m.group(1)))
            else:
                try:
                    coeff *= float(f)
                except ValueError:
                    raise ConfigError(f"key {key}: bad factor {f!r}") from None
        if not ops:
            raise ConfigError(f"key {key}: term {chunk.strip()!r} has no "
                              "spin factors")
        terms.append((coeff, tuple(ops)))
    return models.LocalTerms(tuple(terms))


class Settings:
    """Validated run configuration as a canonical string map."""

    def __init__(self, experiment: str, raw: dict[str, str]):
        self.experiment = experiment
        known = dict(DEFAULTS)
        sites = _parse_int(raw.get("sites", known["sites"]), "sites")
        if sites < 1:
            raise ConfigError("sites must be positive")
        for i in range(1, sites + 1):
            known[f"alpha{i}"] = f"{_PI / 3:.17g}"
            theta_default = {1: _PI / 7, 2: _PI / 5}.get(i, 0.0)
            known[f"theta{i}"] = f"{theta_default:.17g}"
        for key, value in raw.items():
            if key not in known and not _ANGLE_KEY.match(key):
                raise ConfigError(f"unknown configuration key {key!r}")
            if _ANGLE_KEY.match(key):
                idx = int(_ANGLE_KEY.match(key).group(2))
                if idx > sites:
                    raise ConfigError(f"key {key!r} exceeds the {sites} sites")
            known[key] = str(value).strip()
        if known["experiment"] and known["experiment"] != experiment:
            raise ConfigError(
                f"config file is for experiment {known['experiment']!r}, "
                f"invoked as {experiment!r}")
        known["experiment"] = experiment
        self.map = known
        self.sites = sites

    # typed accessors -------------------------------------------------
    def s(self, key: str) -> str:
        return self.map[key]

    def f(self, key: str) -> float:
        return _parse_float(self.map[key], key)

    def f_or_none(self, key: str) -> float | None:
        return None if self.map[key] == "" else self.f(key)

    def i(self, key: str) -> int:
        return _parse_int(self.map[key], key)

    def b(self, key: str) -> bool:
        return _parse_bool(self.map[key], key)

    @property
    def threads(self) -> int:
        raw = os.environ.get("SPINCORR_THREADS", "1")
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"SPINCORR_THREADS must be an integer, got {raw!r}")

    def echo(self) -> dict[str, str]:
        return dict(sorted(self.map.items()))


def load_config_file(path: str) -> dict[str, str]:
    try:
        text = open(path, "r", encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            meta = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON config {path}: {exc}") from None
        config = meta.get("config", meta)
        if not isinstance(config, dict):
            raise ConfigError(f"JSON config {path} has no config mapping")
        return {str(k): str(v) for k, v in config.items()}
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_settings(args) -> Settings:
    raw: dict[str, str] = {}
    if args.config:
        raw.update(load_config_file(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    if args.n is not None:
        raw["n"] = str(args.n)
    if args.output is not None:
        raw["output"] = args.output
    return Settings(args.experiment, raw)


# ---------------------------------------------------------------------------
# building engine objects from settings


def _convention(settings: Settings) -> Convention:
    text = settings.s("convention").lower()
    if text in ("pauli",):
        return Convention.PAULI
    if text in ("spins", "spin", "spin-s"):
        return Convention.SPIN
    raise ConfigError(f"unknown convention {text!r}")


def _hamiltonian_spec(settings: Settings):
    kind = settings.s("hamiltonian").lower()
    if kind == "isingxx":
        return models.IsingXX()
    if kind == "axispair":
        return models.AxisPair(_parse_vector(settings.s("axis_n"), "axis_n"),
                               _parse_vector(settings.s("axis_m"), "axis_m"))
    if kind == "local":
        if not settings.s("local_terms"):
            raise ConfigError("hamiltonian = local requires local_terms")
        return _parse_local_terms(settings.s("local_terms"), "local_terms")
    raise ConfigError(f"unknown hamiltonian {kind!r}")


def _ancilla_spec(settings: Settings, key: str) -> models.AncillaStateSpec:
    text = settings.s(key)
    if text.lower() == "uniform":
        return models.AncillaStateSpec()
    return models.AncillaStateSpec(coefficients=_parse_complex_list(text, key),
                                   preset=None)


def _query(settings: Settings, with_t3: bool) -> CorrelationQuery:
    t3 = settings.f_or_none("t3") if with_t3 else None
    if with_t3 and t3 is None:
        raise ConfigError("this experiment requires t3")
    for key in ("axis_a", "axis_b"):
        if settings.s(key) not in ("x", "y", "z"):
            raise ConfigError(f"{key} must be one of x, y, z")
    try:
        return CorrelationQuery(settings.i("site_i"), settings.i("site_j"),
                                settings.s("axis_a"), settings.s("axis_b"),
                                settings.f("t1"), settings.f("t2"), t3)
    except SpincorrError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def protocol_config(settings: Settings, ancillas: int,
                    with_t3: bool = False) -> ProtocolConfig:
    convention = _convention(settings)
    try:
        register = SpinRegister(settings.sites, settings.f("spin"), ancillas,
                                convention)
    except SpincorrError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    alphas = tuple(settings.f(f"alpha{i}") for i in range(1, settings.sites + 1))
    thetas = tuple(settings.f(f"theta{i}") for i in range(1, settings.sites + 1))
    anc_keys = ("ancilla", "ancilla2")[:ancillas]
    timing = settings.s("timing").lower()
    if timing not in ("immediate", "deferred"):
        raise ConfigError(f"unknown timing {timing!r}")
    return ProtocolConfig(
        register=register,
        hamiltonian=_hamiltonian_spec(settings),
        system_state=models.SystemStateSpec(alphas, thetas),
        query=_query(settings, with_t3),
        ancilla_states=tuple(_ancilla_spec(settings, k) for k in anc_keys),
        lam=settings.f("lambda"),
        lam2=settings.f_or_none("lambda2"),
        timing=Timing(timing),
    )


def _oracle_value(config: ProtocolConfig,
                  query: CorrelationQuery | None = None) -> complex:
    res = protocols_pkg.resolve(config)
    return oracle.exact_correlation(res.initial_full, res.h_full,
                                    query or config.query)


# ---------------------------------------------------------------------------
# experiment runners: each returns (header_has_lambda2, rows, extra_metadata)


def _nanrow(**kw) -> dict:
    row = {c: None for c in ("lambda", "lambda2") + CSV_COLUMNS}
    row.update(kw)
    return row


def run_exact(settings: Settings):
    config = protocol_config(settings, ancillas=0)
    c = _oracle_value(config)
    row = _nanrow(n=settings.i("n"), seed=settings.i("seed"),
                  re_C=c.real, im_C=c.imag)
    return False, [row], {}


def run_snimp(settings: Settings):
    config = protocol_config(settings, ancillas=1)
    n, seed = settings.i("n"), settings.i("seed")
    model = errors.SnimpErrorModel(config)
    c = model.c_exact
    report = model.point(config.lam, n)
    row = _nanrow(**{"lambda": config.lam}, n=n, seed=seed,
                  re_C=c.real, im_C=c.imag,
                  eps_sys_rel=report.eps_sys,
                  eps_stat_rel=report.eps_stat_bound,
                  eps_tot_rel=report.eps_tot_bound)
    if settings.b("sample") and n > 0:
        r1, r2 = sampling.snimp_sample_runs(config, n, seed,
                                            settings.i("shards"),
                                            settings.threads,
                                            engine=model.engine)
        est = sampling.finite_sample_estimator(r1, r2)
        row["re_Cn"], row["im_Cn"] = est.real, est.imag
        row["measured_rel"] = abs(c - est) / model.norm_c
    c_lam = model.engine.estimate(config.lam)
    return False, [row], {"re_C_lambda": _fmt(c_lam.real),
                          "im_C_lambda": _fmt(c_lam.imag)}


def run_projective(settings: Settings):
    config = protocol_config(settings, ancillas=0)
    c = _oracle_value(config)
    value = projective_correlate(config)
    row = _nanrow(n=settings.i("n"), seed=settings.i("seed"),
                  re_C=c.real, im_C=c.imag, re_Cn=value,
                  measured_rel=abs(value - c.real) / abs(c) if abs(c) > 0 else None)
    return False, [row], {"projective_correlation": _fmt(value)}


def run_rotation(settings: Settings):
    config = protocol_config(settings, ancillas=0)
    c = _oracle_value(config)
    theta = settings.f("rotation_theta")
    value = rotation_protocol(config, theta)
    row = _nanrow(n=settings.i("n"), seed=settings.i("seed"),
                  re_C=c.real, im_C=c.imag, im_Cn=value,
                  measured_rel=abs(value - c.imag) / abs(c) if abs(c) > 0 else None)
    return False, [row], {"rotation_theta": _fmt(theta)}


def run_cnimp(settings: Settings):
    config = protocol_config(settings, ancillas=2, with_t3=True)
    if config.lam2 is None:
        raise ConfigError("cnimp requires lambda2")
    n, seed = settings.i("n"), settings.i("seed")
    engine = CnimpEngine(config)
    queries = errors.cnimp_target_queries(config.query)
    exact_est = cnimp_estimate(config)
    estimates = {"t1t2": exact_est.c_t1t2, "t1t3": exact_est.c_t1t3,
                 "t2t3": exact_est.c_t2t3}
    sampled = None
    if settings.b("sample") and n > 0:
        tables = sampling.cnimp_sample_tables(config, n, seed,
                                              settings.i("shards"),
                                              settings.threads, engine=engine)
        fs = sampling.cnimp_finite_sample_estimates(tables, config.lam,
                                                    config.lam2)
        sampled = {"t1t2": fs.c_t1t2, "t1t3": fs.c_t1t3, "t2t3": fs.c_t2t3}
    rows = []
    for target in errors.CNIMP_TARGETS:
        c = _oracle_value(config, queries[target])
        row = _nanrow(**{"lambda": config.lam, "lambda2": config.lam2},
                      n=n, seed=seed, re_C=c.real, im_C=c.imag)
        est = estimates[target]
        if not math.isnan(est.real):
            row["eps_sys_rel"] = abs(c - est) / abs(c)
        if sampled is not None:
            cs = sampled[target]
            if not math.isnan(cs.real):
                row["re_Cn"], row["im_Cn"] = cs.real, cs.imag
                row["measured_rel"] = abs(c - cs) / abs(c)
        rows.append(row)
    return True, rows, {"row_order": ",".join(errors.CNIMP_TARGETS)}


def _lambda_grid(settings: Settings, default_step: float) -> np.ndarray:
    step = settings.f_or_none("grid_step") or default_step
    upper = settings.f("grid_max")
    if not 0 < step <= upper:
        raise ConfigError("grid_step must lie in (0, grid_max]")
    return errors.default_lambda_grid(step, upper)


def run_sweep_lambda(settings: Settings):
    protocol = settings.s("protocol").lower()
    if protocol == "snimp":
        return _sweep_lambda_snimp(settings)
    if protocol == "cnimp":
        return _sweep_lambda_cnimp(settings)
    raise ConfigError(f"unknown protocol {protocol!r} for sweep-lambda")


def _sweep_lambda_snimp(settings: Settings):
    config = protocol_config(settings, ancillas=1)
    n, seed = settings.i("n"), settings.i("seed")
    grid = _lambda_grid(settings, errors.DEFAULT_LAMBDA_STEP)
    model = errors.SnimpErrorModel(config)
    sys_rel, unit_rel = model.curves(grid)
    stat_rel = unit_rel / math.sqrt(n)
    c = model.c_exact
    do_sample = settings.b("sample") and n > 0
    rows = []
    for k, lam in enumerate(grid):
        row = _nanrow(**{"lambda": float(lam)}, n=n, seed=seed,
                      re_C=c.real, im_C=c.imag,
                      eps_sys_rel=sys_rel[k], eps_stat_rel=stat_rel[k],
                      eps_tot_rel=sys_rel[k] + stat_rel[k])
        if do_sample:
            point_seed = sampling.derive_point_seed(seed, k)
            d1 = model.engine.distribution(lam, CouplingKind.B1)
            d2 = model.engine.distribution(lam, CouplingKind.B2)
            c1 = sampling.empirical_correlate(sampling.sample(
                d1, n, sampling.derive_component_seed(point_seed, 1)))
            c2 = sampling.empirical_correlate(sampling.sample(
                d2, n, sampling.derive_component_seed(point_seed, 2)))
            est = -model.levels / (2.0 * lam) * (c2 / model.f2 + 1j * c1 / model.f1)
            row["re_Cn"], row["im_Cn"] = est.real, est.imag
            row["measured_rel"] = abs(c - est) / model.norm_c
        rows.append(row)
    tots = sys_rel + stat_rel
    k = int(np.argmin(tots))
    meta = {"lambda_star": _fmt(float(grid[k])),
            "min_eps_tot_rel": _fmt(float(tots[k]))}
    return False, rows, meta


def _sweep_lambda_cnimp(settings: Settings):
    config = protocol_config(settings, ancillas=2, with_t3=True)
    n, seed = settings.i("n"), settings.i("seed")
    target = settings.s("target")
    if target not in errors.CNIMP_TARGETS:
        raise ConfigError(f"target must be one of {errors.CNIMP_TARGETS}")
    step = settings.f_or_none("grid_step") or errors.DEFAULT_SURFACE_STEP
    grid = errors.default_surface_grid(step, settings.f("grid_max"))
    surfaces = errors.cnimp_error_surface(config, n, grid,
                                          threads=settings.threads)
    surf = surfaces.surfaces[target]
    c = _oracle_value(config, errors.cnimp_target_queries(config.query)[target])
    rows = []
    for i, lam1 in enumerate(surf.lam1s):
        for j, lam2 in enumerate(surf.lam2s):
            tot = surf.rel_tot[i, j]
            rows.append(_nanrow(
                **{"lambda": float(lam1), "lambda2": float(lam2)},
                n=n, seed=seed, re_C=c.real, im_C=c.imag,
                eps_sys_rel=surf.rel_sys[i, j] if np.isfinite(tot) else None,
                eps_stat_rel=surf.rel_stat[i, j] if np.isfinite(tot) else None,
                eps_tot_rel=tot if np.isfinite(tot) else None))
    meta = {"target": target,
            "lambda_star": f"{surf.lam_star[0]:.17g},{surf.lam_star[1]:.17g}",
            "min_eps_tot_rel": _fmt(surf.min_rel_tot)}
    return True, rows, meta


def run_sweep_n(settings: Settings):
    config = protocol_config(settings, ancillas=1)
    seed = settings.i("seed")
    n_values = tuple(int(float(x)) for x in settings.s("n_values").split(","))
    grid = _lambda_grid(settings, errors.DEFAULT_LAMBDA_STEP)
    model = errors.SnimpErrorModel(config)
    sys_rel, unit_rel = model.curves(grid)
    c = model.c_exact
    rows = []
    for n in n_values:
        tot = sys_rel + unit_rel / math.sqrt(n)
        k = int(np.argmin(tot))
        rows.append(_nanrow(
            **{"lambda": float(grid[k])}, n=n, seed=seed,
            re_C=c.real, im_C=c.imag,
            eps_sys_rel=sys_rel[k], eps_stat_rel=unit_rel[k] / math.sqrt(n),
            eps_tot_rel=float(tot[k])))
    minima = [r["eps_tot_rel"] for r in rows]
    stars = [r["lambda"] for r in rows]
    fit_min = errors.power_law_fit(n_values, minima)
    fit_star = errors.power_law_fit(n_values, stars)
    meta = {"min_fit_exponent": _fmt(fit_min.exponent),
            "min_fit_r2": _fmt(fit_min.r_squared),
            "lambda_star_fit_exponent": _fmt(fit_star.exponent),
            "lambda_star_fit_r2": _fmt(fit_star.r_squared)}
    return False, rows, meta


def run_compare(settings: Settings):
    config = protocol_config(settings, ancillas=2, with_t3=True)
    target = settings.s("target")
    if target not in errors.CNIMP_TARGETS:
        raise ConfigError(f"target must be one of {errors.CNIMP_TARGETS}")
    n_values = tuple(int(float(x)) for x in settings.s("n_values").split(","))
    comp = errors.protocol_efficiency_compare(
        config, settings.f("accuracy"), target, n_values,
        threads=settings.threads)
    c = _oracle_value(config, errors.cnimp_target_queries(config.query)[target])
    seed = settings.i("seed")
    rows = []
    for k, n in enumerate(comp.n_values):
        rows.append(_nanrow(
            **{"lambda": float(comp.snimp_lam_stars[k])}, n=n, seed=seed,
            re_C=c.real, im_C=c.imag,
            eps_tot_rel=float(comp.snimp_minima[k])))
    for k, n in enumerate(comp.n_values):
        rows.append(_nanrow(
            **{"lambda": float(comp.cnimp_lam_stars[k][0]),
               "lambda2": float(comp.cnimp_lam_stars[k][1])}, n=n, seed=seed,
            re_C=c.real, im_C=c.imag,
            eps_tot_rel=float(comp.cnimp_minima[k])))
    meta = {
        "target": target,
        "accuracy": _fmt(comp.accuracy),
        "measurements_snimp": _fmt(comp.measurements_snimp),
        "measurements_cnimp": _fmt(comp.measurements_cnimp),
        "n_snimp_fit": _fmt(comp.n_snimp_fit),
        "n_cnimp_fit": _fmt(comp.n_cnimp_fit),
        "snimp_fit_exponent": _fmt(comp.fit_snimp.exponent),
        "cnimp_fit_exponent": _fmt(comp.fit_cnimp.exponent),
        "row_order": "snimp rows then cnimp rows (lambda2 nan for snimp)",
    }
    return True, rows, meta


def run_selftest(settings: Settings):
    """Fast internal consistency battery; raises ToleranceError on failure."""
    rng = np.random.default_rng(settings.i("seed"))
    checks: list[tuple[str, float, float]] = []

    reg = SpinRegister(2, 0.5, 0, Convention.PAULI)
    h = models.build_hamiltonian(models.IsingXX(), reg)
    for _ in range(10):
        a1, a2 = rng.uniform(0, _PI / 2, 2)
        th1, th2 = rng.uniform(0, 2 * _PI, 2)
        t1 = rng.uniform(0, 2)
        t2 = t1 + rng.uniform(0, 5)
        psi = models.build_system_state(models.SystemStateSpec((a1, a2), (th1, th2)), reg)
        q = CorrelationQuery(1, 2, "z", "z", t1, t2)
        ce = oracle.exact_correlation(psi, h, q)
        cc = oracle.closed_form_C_two_spin(a1, a2, th1, th2, t1, t2)
        checks.append(("oracle-closed-form", abs(ce - cc), 1e-10))

    sreg = SpinRegister(2, 0.5, 1, Convention.PAULI)
    cfg = ProtocolConfig(
        register=sreg, hamiltonian=models.IsingXX(),
        system_state=models.SystemStateSpec((_PI / 3, _PI / 3), (_PI / 7, _PI / 5)),
        query=CorrelationQuery(1, 2, "z", "z", 1.0, 10.0),
        ancilla_states=(models.AncillaStateSpec(),), lam=0.42)
    engine = SnimpEngine(cfg)
    est = engine.estimate(0.42)
    closed = oracle.closed_form_C_lambda_two_spin(
        _PI / 3, _PI / 3, _PI / 7, _PI / 5, 1.0, 10.0, 0.42)
    checks.append(("estimator-closed-form", abs(est - closed), 1e-10))

    d_imm = engine.distribution(0.7, CouplingKind.B1, Timing.IMMEDIATE)
    d_def = engine.distribution(0.7, CouplingKind.B1, Timing.DEFERRED)
    dev = max(abs(d_imm.probabilities[k] - d_def.probabilities[k])
              for k in d_imm.probabilities)
    checks.append(("deferred-equivalence", dev, 1e-12))

    from .core import Operator, StateVector
    for _ in range(5):
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        hr = Operator((m + m.conj().T) / 2, reg, hermitian_hint=True)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi = StateVector(v / np.linalg.norm(v), reg)
        t1 = rng.uniform(0, 2)
        q = CorrelationQuery(1, 2, "x", "y", t1, t1 + rng.uniform(0, 2))
        c = oracle.exact_correlation(psi, hr, q)
        pcfg = ProtocolConfig(register=reg, hamiltonian=hr, system_state=psi,
                              query=q)
        checks.append(("projective-real-part",
                       abs(projective_correlate(pcfg) - c.real), 1e-10))
        checks.append(("rotation-imag-part",
                       abs(rotation_protocol(pcfg, 1.5 * _PI) - c.imag), 1e-10))

    dist = engine.distribution(0.42, CouplingKind.B1)
    tab1 = sampling.sample(dist, 1000, settings.i("seed"))
    tab2 = sampling.sample(dist, 1000, settings.i("seed"))
    checks.append(("sampling-determinism",
                   0.0 if tab1.counts == tab2.counts else 1.0, 0.5))

    failures = [(name, dev, tol) for name, dev, tol in checks if dev > tol]
    for name, dev, tol in checks:
        status = "ok" if dev <= tol else "FAIL"
        print(f"selftest {name}: {status} (deviation {dev:.3e}, tol {tol:g})")
    if failures:
        raise ToleranceError(f"{len(failures)} selftest checks failed")
    return False, [], {"checks": str(len(checks))}


RUNNERS = {
    "exact": run_exact,
    "snimp": run_snimp,
    "projective": run_projective,
    "rotation": run_rotation,
    "cnimp": run_cnimp,
    "sweep-lambda": run_sweep_lambda,
    "sweep-n": run_sweep_n,
    "compare": run_compare,
    "selftest": run_selftest,
}


def write_outputs(settings: Settings, has_lambda2: bool, rows: list[dict],
                  extra_meta: dict, elapsed: float, argv: list[str]) -> None:
    out = settings.s("output") or f"{settings.experiment}.csv"
    columns = (("lambda", "lambda2") if has_lambda2 else ("lambda",)) + CSV_COLUMNS
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    directory = os.path.dirname(os.path.abspath(out))
    os.makedirs(directory, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    meta = {
        "experiment": settings.experiment,
        "config": settings.echo(),
        "versions": {"spincorr": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "timings": {"total_s": round(elapsed, 6)},
        "command": argv,
        "output_csv": out,
        "rows": len(rows),
    }
    meta.update({k: v for k, v in extra_meta.items()})
    meta_path = os.path.splitext(out)[0] + ".json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out} ({len(rows)} rows) and {meta_path}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spincorr",
                     description="measurement-protocol experiment driver")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="flat key-value or metadata-JSON "
                       "config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("-o", "--output", default=None, help="CSV output path")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = make_parser().parse_args(argv)
        settings = build_settings(args)
        started = time.perf_counter()
        has_lambda2, rows, extra = RUNNERS[settings.experiment](settings)
        elapsed = time.perf_counter() - started
        if settings.experiment != "selftest":
            write_outputs(settings, has_lambda2, rows, extra, elapsed, argv)
        else:
            print(f"selftest passed ({extra['checks']} checks)")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ToleranceError as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
