"""Experiment configuration and the ``kac`` command line runner.

Configs are flat ``key = value`` files (``#`` starts a comment).  The runner
dispatches on ``kind``:

* ``decay``: coupled two-copy runs from an out-of-equilibrium start,
  per-replica trajectories plus an aggregate with the power-law envelope.
* ``inequalities``: a randomized sweep of the alignment inequalities plus
  constructed equality cases.
* ``wishart`` / ``counterexample1`` / ``counterexample2`` /
  ``equilibrium-check``: the supporting study tables.

Exit codes: 0 all checks passed, 1 an invariant was violated, 2 the config
was rejected.  All randomness flows through substreams of the master seed,
so identical (config, seed) pairs produce bit-identical output files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import analysis
from .kernels import KernelError, make_kernel
from .system import (
    _sample_grid,
    align_configurations,
    coupled_run_issues,
    equilibrium_m4,
    sample_equilibrium,
    simulate_coupled,
    substream,
    substream_seed,
    two_temperature_initial,
    project_to_constraint_sphere,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "run_decay_experiment",
    "run_inequality_sweep",
    "run_support_studies",
    "main",
]

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2

KINDS = ("decay", "inequalities", "counterexample1", "counterexample2",
         "wishart", "equilibrium-check")
KERNEL_FAMILIES = ("uniform", "dirac", "power_law")
INITIAL_LAWS = ("two_temperature", "equilibrium", "identical")

# check tolerances applied by the runners
MONOTONE_TOL = 1e-9
SLACK_TOL = 1e-10
CORR_TOL = 1e-12
AREA_RESIDUAL_TOL = 1e-11

# substream index reserved for the constants estimate of a decay run;
# replicas use their own index directly
CONSTANTS_STREAM = 1_000_000_000


class ConfigError(ValueError):
    """Config file rejected: unknown key, bad value, or missing input."""


@dataclass
class ExperimentConfig:
    kind: str = "decay"
    n: int = 256
    d: int = 3
    kernel: str = "uniform"
    theta0: float = np.pi / 2
    theta_min: float = 0.0
    nu: float = -1.0
    horizon: float = 20.0
    sample_dt: float = 0.5
    replicas: int = 100
    delta: float = 0.5
    p: float = 0.0          # 0 means the default 2 / (1 - delta)
    q: float = 0.0          # 0 means the conjugate of p
    seed: int = 0
    out: str = "out"
    initial_law: str = "two_temperature"
    m4_init: float = 3.0
    constant_samples: int = 200
    n_discrete: int = 10_000
    n_config: int = 1_000
    samples: int = 2_000
    q_moment: float = 1.5
    m_values: tuple = (10.0, 100.0, 1000.0)
    r_values: tuple = (2.0, 4.0, 8.0)
    band_eps: float = 0.5
    p_moment: float = 2.0
    n_values: tuple = (64, 256, 1024, 2048)

    def resolved_exponents(self):
        """(delta, p, q) with the defaults filled in and conjugacy checked."""
        delta = float(self.delta)
        p = float(self.p)
        if p == 0.0:
            if delta >= 1.0:
                raise ConfigError("delta >= 1 requires an explicit p")
            p = 2.0 / (1.0 - delta)
        q = float(self.q)
        if q == 0.0:
            q = analysis.conjugate_exponent(p)
        elif abs(1.0 / p + 1.0 / q - 1.0) > 1e-10:
            raise ConfigError(f"p = {p} and q = {q} are not conjugate")
        return delta, p, q


_INT_KEYS = ("n", "d", "replicas", "seed", "constant_samples",
             "n_discrete", "n_config", "samples")
_FLOAT_KEYS = ("theta0", "theta_min", "nu", "horizon", "sample_dt", "delta",
               "p", "q", "m4_init", "q_moment", "band_eps", "p_moment")
_STR_KEYS = ("kind", "kernel", "out", "initial_law")
_FLOAT_LIST_KEYS = ("m_values", "r_values")
_INT_LIST_KEYS = ("n_values",)


def _cast(key, raw):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _FLOAT_LIST_KEYS:
            return tuple(float(x) for x in raw.split(","))
        if key in _INT_LIST_KEYS:
            return tuple(int(x) for x in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    if key in _STR_KEYS:
        return raw
    raise ConfigError(f"unknown config key {key!r}")


def load_config(path, overrides=None):
    """Parse a flat key = value config file into an ExperimentConfig.

    ``overrides`` maps keys to already-typed values (command line flags).
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = line.split("=", 1)
        key = key.strip()
        values[key] = _cast(key, raw.strip())
    if overrides:
        values.update(overrides)
    cfg = ExperimentConfig(**values)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    """Range and consistency checks; raises ConfigError on the first failure."""
    if cfg.kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {cfg.kind!r}")
    if cfg.n < 2:
        raise ConfigError(f"need n >= 2, got {cfg.n}")
    if cfg.d < 3:
        raise ConfigError(f"need d >= 3, got {cfg.d}")
    if cfg.kernel not in KERNEL_FAMILIES:
        raise ConfigError(
            f"kernel must be one of {KERNEL_FAMILIES}, got {cfg.kernel!r}")
    try:
        build_kernel(cfg)
    except KernelError as exc:
        raise ConfigError(f"kernel rejected: {exc}") from exc
    if cfg.horizon < 0:
        raise ConfigError(f"horizon must be >= 0, got {cfg.horizon}")
    if cfg.sample_dt <= 0:
        raise ConfigError(f"sample_dt must be > 0, got {cfg.sample_dt}")
    if cfg.replicas < 0:
        raise ConfigError(f"replicas must be >= 0, got {cfg.replicas}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be >= 0, got {cfg.seed}")
    if cfg.initial_law not in INITIAL_LAWS:
        raise ConfigError(
            f"initial_law must be one of {INITIAL_LAWS}, got {cfg.initial_law!r}")

    if cfg.kind == "decay":
        if cfg.delta <= 0:
            raise ConfigError(f"need delta > 0, got {cfg.delta}")
        cfg.resolved_exponents()
        if cfg.constant_samples < 2:
            raise ConfigError("constant_samples must be at least 2")
    if cfg.kind == "inequalities":
        if cfg.n_discrete < 0 or cfg.n_config < 0:
            raise ConfigError("sweep sizes must be >= 0")
        if cfg.delta <= 0:
            raise ConfigError(f"need delta > 0, got {cfg.delta}")
        cfg.resolved_exponents()
    if cfg.kind in ("counterexample1", "counterexample2", "wishart",
                    "equilibrium-check"):
        if cfg.samples < 2:
            raise ConfigError("samples must be at least 2")
    if cfg.kind == "counterexample1":
        if not (1.0 < cfg.q_moment < 2.0):
            raise ConfigError(f"need 1 < q_moment < 2, got {cfg.q_moment}")
        if any(m <= 1 for m in cfg.m_values):
            raise ConfigError("m_values must all exceed 1")
    if cfg.kind == "counterexample2":
        if cfg.band_eps <= 0:
            raise ConfigError(f"band_eps must be > 0, got {cfg.band_eps}")
        if any(r <= 0 for r in cfg.r_values):
            raise ConfigError("r_values must all be positive")
    if cfg.kind == "wishart":
        if cfg.p_moment < 1:
            raise ConfigError(f"need p_moment >= 1, got {cfg.p_moment}")
        for n in cfg.n_values:
            if n - 2.0 * cfg.p_moment / (cfg.d - 1.0) <= cfg.d:
                raise ConfigError(
                    f"n = {n} too small for moment order {cfg.p_moment} "
                    f"in dimension {cfg.d}")
    return cfg


def build_kernel(cfg):
    if cfg.kernel == "dirac":
        return make_kernel("dirac", theta0=cfg.theta0)
    if cfg.kernel == "uniform":
        return make_kernel("uniform", theta_min=cfg.theta_min)
    return make_kernel("power_law", nu=cfg.nu, theta_min=cfg.theta_min)


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_report(out_dir, report):
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    (Path(out_dir) / "report.json").write_text(text + "\n")


TRAJECTORY_COLUMNS = ("mean_sq_distance", "m2", "m4", "creation",
                      "fund_lhs", "fund_rhs", "min_corr", "weak_slack")


def _decay_observables(delta, p, notes):
    """Observable closures for one coupled replica, in column order.

    The fundamental-inequality report is computed once per sample and split
    across two columns through ``stash``; ``corr`` is turned into the
    running minimum after the run.
    """
    stash = {}

    def fund_lhs(a, b):
        dist = analysis.DiscreteCoupledDistribution.from_configurations(a, b)
        try:
            rep = analysis.fund_inequality_report(dist)
        except analysis.RhsInfinite as exc:
            notes.append(f"fundamental inequality degenerate: {exc}")
            stash["fund_rhs"] = np.inf
            return 1.0
        stash["fund_rhs"] = rep.rhs
        return rep.lhs

    def fund_rhs(a, b):
        return stash["fund_rhs"]

    def weak_slack(a, b):
        try:
            rep = analysis.pathwise_weak_inequality(a, b, delta, p)
        except analysis.PreconditionFailed as exc:
            notes.append(f"weak inequality precondition failed: {exc}")
            return -np.inf
        return rep.slack

    return {
        "mean_sq_distance": lambda a, b: float(np.mean(np.sum((a - b) ** 2, axis=1))),
        "m2": lambda a, b: float(np.mean(np.sum(b * b, axis=1))),
        "m4": lambda a, b: float(np.mean(np.sum(b * b, axis=1) ** 2)),
        "creation": lambda a, b: analysis.coupling_creation(a, b),
        "fund_lhs": fund_lhs,
        "fund_rhs": fund_rhs,
        "corr": lambda a, b: float(np.mean(np.sum(a * b, axis=1))),
        "weak_slack": weak_slack,
    }


def _initial_copies(cfg, rng):
    u0 = sample_equilibrium(cfg.n, cfg.d, rng)
    if cfg.initial_law == "identical":
        return u0, u0.copy()
    if cfg.initial_law == "equilibrium":
        return u0, sample_equilibrium(cfg.n, cfg.d, rng)
    return u0, two_temperature_initial(cfg.n, cfg.d, rng, m4_target=cfg.m4_init)


def _decay_sample_checks(times, columns):
    """Per-sample invariant checks on one decay trajectory."""
    issues = []
    msd = columns["mean_sq_distance"]
    steps = np.diff(msd)
    if steps.size and float(np.max(steps)) > MONOTONE_TOL:
        k = int(np.argmax(steps))
        issues.append(
            f"mean squared distance increased by {steps[k]:.3e} between "
            f"t = {times[k]:.6g} and t = {times[k + 1]:.6g}")
    corr_min = float(np.min(columns["corr"]))
    if corr_min < -CORR_TOL:
        issues.append(f"velocity correlation dipped to {corr_min:.3e}")
    slack = columns["weak_slack"]
    finite = slack[np.isfinite(slack)]
    if finite.size and float(np.min(finite)) < -SLACK_TOL:
        issues.append(
            f"weak inequality slack fell to {float(np.min(finite)):.3e}")
    return issues


def run_decay_experiment(cfg, out_dir):
    """Coupled decay runs: per-replica trajectories, aggregate, envelope."""
    kern = build_kernel(cfg)
    delta, p, q = cfg.resolved_exponents()
    grid = _sample_grid(cfg.horizon, cfg.sample_dt, None)

    hc = analysis.k_main_estimate(delta, p, q, cfg.n, cfg.d,
                                  cfg.constant_samples,
                                  substream(cfg.seed, CONSTANTS_STREAM))
    constants = {
        "delta": delta, "p": p, "q": q,
        "k1": hc.k1, "k2": hc.k2,
        "k_main": hc.k_main, "k_main_stderr": hc.k_main_stderr,
        "c_delta_n": hc.c_delta_n,
        "j_factor": hc.j_factor, "j_stderr": hc.j_stderr,
        "j_limit": hc.j_limit,
        "moment_blowup": hc.blowup,
    }

    report = {"kind": cfg.kind, "config": asdict(cfg), "constants": constants}
    gamma = analysis.gamma_exponent(delta)
    report["gamma"] = gamma

    if cfg.replicas == 0:
        m4_0 = cfg.m4_init if cfg.initial_law == "two_temperature" \
            else equilibrium_m4(cfg.n, cfg.d)
        _, t_star = analysis.order4_bound(m4_0, cfg.d, 0.0)
        d0 = 2.0
        env = analysis.decay_envelope(grid, d0, delta, hc.c_delta_n, t_star)
        rows = [(t, e, 0, -1, cfg.seed) for t, e in zip(grid, env)]
        _write_csv(Path(out_dir) / "aggregate.csv",
                   ("time", "envelope", "n_replicas", "replica", "substream"),
                   rows)
        report.update({"t_star": t_star, "envelope_d0": d0, "replicas": 0,
                       "violations": [], "pass": True})
        _write_report(out_dir, report)
        return EXIT_OK

    all_cols = {name: [] for name in TRAJECTORY_COLUMNS}
    violations = []
    check_extrema = {}
    for rep in range(cfg.replicas):
        rng = substream(cfg.seed, rep)
        stream_id = substream_seed(cfg.seed, rep)
        u0, v0 = _initial_copies(cfg, rng)
        v0a, _ = align_configurations(u0, v0)
        notes = []
        obs = _decay_observables(delta, p, notes)
        traj = simulate_coupled(u0, v0a, kern, rng, horizon=cfg.horizon,
                                sample_dt=cfg.sample_dt, observables=obs)
        cols = dict(traj.columns)
        cols["min_corr"] = np.minimum.accumulate(cols["corr"])

        issues = coupled_run_issues(traj)
        issues += _decay_sample_checks(traj.times, cols)
        issues += notes
        for key, val in traj.checks.items():
            if key in ("worst_residual_time", "worst_delta_time"):
                continue
            check_extrema[key] = max(check_extrema.get(key, 0), val)

        rows = []
        for k, t in enumerate(traj.times):
            row = [t] + [cols[name][k] for name in TRAJECTORY_COLUMNS]
            rows.append(row + [rep, stream_id])
        _write_csv(Path(out_dir) / f"trajectory_{rep}.csv",
                   ("time",) + TRAJECTORY_COLUMNS + ("replica", "substream"),
                   rows)

        for name in TRAJECTORY_COLUMNS:
            all_cols[name].append(cols[name])

        if issues:
            violations.append({"replica": rep, "substream": stream_id,
                               "issues": issues, "checks": traj.checks})
            break

    stacked = {name: np.array(vals) for name, vals in all_cols.items()}
    n_done = stacked["mean_sq_distance"].shape[0]
    d0 = float(np.mean(stacked["mean_sq_distance"][:, 0]))
    m4_0 = float(np.mean(stacked["m4"][:, 0]))
    _, t_star = analysis.order4_bound(max(m4_0, 1.0), cfg.d, 0.0)
    if d0 > 0:
        env = analysis.decay_envelope(grid, d0, delta, hc.c_delta_n, t_star)
    else:
        env = np.zeros_like(grid)

    header = ["time"]
    agg_rows = [[t] for t in grid[:stacked["mean_sq_distance"].shape[1]]]
    for name in TRAJECTORY_COLUMNS:
        header += [name, name + "_se"]
        data = stacked[name]
        mean = np.mean(data, axis=0)
        se = (np.std(data, axis=0, ddof=1) / np.sqrt(n_done)
              if n_done > 1 else np.zeros(data.shape[1]))
        for k, row in enumerate(agg_rows):
            row += [mean[k], se[k]]
    header += ["envelope", "n_replicas", "replica", "substream"]
    for k, row in enumerate(agg_rows):
        row += [env[k], n_done, -1, cfg.seed]
    _write_csv(Path(out_dir) / "aggregate.csv", header, agg_rows)

    msd_mean = np.mean(stacked["mean_sq_distance"], axis=0)
    report.update({
        "replicas": n_done,
        "t_star": t_star,
        "envelope_d0": d0,
        "initial": {"mean_sq_distance": d0, "m4": m4_0},
        "final": {"mean_sq_distance": float(msd_mean[-1])},
        "decay_factor": float(d0 / msd_mean[-1]) if msd_mean[-1] > 0 else np.inf,
        "engine_checks": check_extrema,
        "violations": violations,
        "pass": not violations,
    })
    _write_report(out_dir, report)
    return EXIT_INVARIANT if violations else EXIT_OK


def _random_discrete(rng, d):
    """Random normalized coupled law: mixed co-linear / correlated / free."""
    k = int(rng.integers(4, 25))
    u = rng.standard_normal((k, d))
    mode = int(rng.integers(0, 3))
    if mode == 0:
        v = u * rng.uniform(0.2, 2.0, size=(k, 1))
    elif mode == 1:
        rho = float(rng.uniform(-1.0, 1.0))
        v = rho * u + np.sqrt(1.0 - rho * rho) * rng.standard_normal((k, d))
    else:
        v = rng.standard_normal((k, d))
    w = rng.dirichlet(np.ones(k))
    return analysis.DiscreteCoupledDistribution(u, v, w).normalize()


def _two_radius_equality(d):
    """Strongly isotropic co-linear two-radius coupling; saturates the
    fundamental inequality (slack 0 up to rounding) with a positive lhs."""
    r1 = 1.2
    r2 = float(np.sqrt(2.0 - r1 * r1))
    axes = np.concatenate([np.eye(d), -np.eye(d)])
    u = np.concatenate([r1 * axes, r2 * axes])
    v = np.concatenate([r2 * axes, r1 * axes])
    w = np.full(4 * d, 1.0 / (4 * d))
    return analysis.DiscreteCoupledDistribution(u, v, w)


def _equality_cases(cfg, rng):
    """Constructed equality instances: (label, report) pairs."""
    d = cfg.d
    cases = []

    rep = analysis.fund_inequality_report(_two_radius_equality(d))
    cases.append(("fund_two_radius", rep))

    x = rng.standard_normal((2 * d + 2, d))
    dist = analysis.DiscreteCoupledDistribution.from_configurations(x, x.copy())
    cases.append(("fund_identity_coupling",
                  analysis.fund_inequality_report(dist.normalize())))

    eye = np.eye(d) / d
    cases.append(("trace_independent",
                  analysis.trace_inequality_report(eye, eye, np.zeros((d, d)))))
    cases.append(("trace_identical",
                  analysis.trace_inequality_report(eye, eye, eye)))
    return cases


def _random_constrained_pair(cfg, rng):
    """Correlated constraint-sphere pair with nonnegative correlation."""
    u = sample_equilibrium(cfg.n, cfg.d, rng)
    rho = float(rng.uniform(0.0, 1.0))
    g = sample_equilibrium(cfg.n, cfg.d, rng)
    v = project_to_constraint_sphere(rho * u + np.sqrt(1.0 - rho * rho) * g)
    if float(np.mean(np.sum(u * v, axis=1))) < 0.0:
        v = -v
    return u, v


def run_inequality_sweep(cfg, out_dir):
    """Randomized slack sweep; exit 1 when any inequality is violated."""
    delta, p, _ = cfg.resolved_exponents()
    rows = []
    mins = {}
    max_area_residual = 0.0
    violations = []

    def note(group, name, rep_obj, instance, stream):
        slack = rep_obj.slack
        rows.append((instance, group, name, rep_obj.lhs, rep_obj.rhs, slack,
                     instance, stream))
        if not np.isnan(slack):
            if name not in mins or slack < mins[name]:
                mins[name] = slack
            if slack < -SLACK_TOL:
                violations.append(
                    f"{group}/{name} instance {instance}: slack {slack:.3e}")

    stream = substream_seed(cfg.seed, 0)
    rng = substream(cfg.seed, 0)
    for k in range(cfg.n_discrete):
        dist = _random_discrete(rng, cfg.d)
        note("discrete", "fundamental_alignment",
             analysis.fund_inequality_report(dist), k, stream)
        note("discrete", "trace",
             analysis.trace_inequality_report(dist.second_moment("uu"),
                                              dist.second_moment("vv"),
                                              dist.second_moment("uv")),
             k, stream)
        dec = analysis.area_decomposition(dist)
        max_area_residual = max(max_area_residual, abs(dec.residual))
        if abs(dec.residual) > AREA_RESIDUAL_TOL:
            violations.append(
                f"discrete/area instance {k}: residual {dec.residual:.3e}")

    stream = substream_seed(cfg.seed, 1)
    rng = substream(cfg.seed, 1)
    for k in range(cfg.n_config):
        u, v = _random_constrained_pair(cfg, rng)
        note("configuration", "pathwise_weak",
             analysis.pathwise_weak_inequality(u, v, delta, p), k, stream)
        dist = analysis.DiscreteCoupledDistribution.from_configurations(u, v)
        note("configuration", "fundamental_alignment",
             analysis.fund_inequality_report(dist), k, stream)

    stream = substream_seed(cfg.seed, 2)
    equality = []
    for label, rep_obj in _equality_cases(cfg, substream(cfg.seed, 2)):
        note("equality", label, rep_obj, len(equality), stream)
        equality.append({"label": label, "slack": rep_obj.slack})
        if abs(rep_obj.slack) > SLACK_TOL:
            violations.append(
                f"equality case {label}: |slack| = {abs(rep_obj.slack):.3e}")

    _write_csv(Path(out_dir) / "sweep.csv",
               ("instance", "group", "name", "lhs", "rhs", "slack",
                "replica", "substream"), rows)
    report = {
        "kind": cfg.kind,
        "config": asdict(cfg),
        "min_slack": mins,
        "max_area_residual": max_area_residual,
        "equality_cases": equality,
        "checked": {"discrete": cfg.n_discrete, "configuration": cfg.n_config},
        "violations": violations,
        "pass": not violations,
    }
    _write_report(out_dir, report)
    return EXIT_INVARIANT if violations else EXIT_OK


def _run_wishart(cfg, out_dir):
    bound = (cfg.d - 1.0) / cfg.d
    rows, table, violations = [], [], []
    prev = None
    for idx, n in enumerate(cfg.n_values):
        est = analysis.wishart_kappa_moment(n, cfg.d, cfg.p_moment,
                                            cfg.samples,
                                            substream(cfg.seed, idx))
        stream = substream_seed(cfg.seed, idx)
        rows.append((n, est.value, est.stderr, bound, idx, stream))
        table.append({"n": n, "estimate": est.value, "stderr": est.stderr})
        if est.value > bound + 3.0 * est.stderr:
            violations.append(
                f"wishart estimate at n = {n} exceeds the bound: "
                f"{est.value:.6g} > {bound:.6g} + 3 se")
        if prev is not None and est.value < prev.value - 3.0 * (est.stderr
                                                                + prev.stderr):
            violations.append(
                f"wishart estimate decreased from n = {cfg.n_values[idx - 1]} "
                f"to n = {n} beyond noise")
        prev = est
    _write_csv(Path(out_dir) / "wishart.csv",
               ("n", "estimate", "stderr", "bound", "replica", "substream"),
               rows)
    return {"rows": table, "bound": bound}, violations


def _run_heavy_tail(cfg, out_dir):
    rows = analysis.counterexample_heavy_tail(cfg.m_values, cfg.q_moment,
                                              cfg.d, cfg.samples,
                                              substream(cfg.seed, 0))
    stream = substream_seed(cfg.seed, 0)
    csv_rows, table, violations = [], [], []
    for idx, row in enumerate(rows):
        csv_rows.append((row.m, row.m_q, row.mean_sq_distance,
                         row.distance_stderr, row.creation,
                         row.creation_stderr, idx, stream))
        table.append(asdict(row))
        if idx > 0:
            prev = rows[idx - 1]
            gap = prev.creation - row.creation
            noise = 3.0 * (prev.creation_stderr + row.creation_stderr)
            if gap <= noise:
                violations.append(
                    f"creation not strictly decreasing from M = {prev.m} "
                    f"to M = {row.m} (gap {gap:.3e} <= noise {noise:.3e})")
            if row.m_q >= prev.m_q:
                violations.append(f"m_q failed to decrease at M = {row.m}")
    _write_csv(Path(out_dir) / "heavy_tail.csv",
               ("m", "m_q", "mean_sq_distance", "distance_stderr",
                "creation", "creation_stderr", "replica", "substream"),
               csv_rows)
    return {"rows": table}, violations


def _run_radial_band(cfg, out_dir):
    rows = analysis.counterexample_radial_band(cfg.r_values, cfg.band_eps,
                                               cfg.d, cfg.samples,
                                               substream(cfg.seed, 0))
    stream = substream_seed(cfg.seed, 0)
    csv_rows, table, violations = [], [], []
    for idx, row in enumerate(rows):
        csv_rows.append((row.r_minus, row.band_prob, row.band_radius,
                         row.ratio, row.ratio_stderr, idx, stream))
        table.append(asdict(row))
        if idx > 0 and row.ratio >= rows[idx - 1].ratio:
            violations.append(
                f"creation-to-distance ratio failed to decrease at "
                f"r = {row.r_minus}")
    slope = None
    if len(rows) >= 2:
        slope = float(np.polyfit(np.log([r.r_minus for r in rows]),
                                 np.log([r.ratio for r in rows]), 1)[0])
        if not (-3.0 <= slope <= -1.0):
            violations.append(
                f"log-log slope {slope:.3f} outside [-3, -1]")
    _write_csv(Path(out_dir) / "radial_band.csv",
               ("r_minus", "band_prob", "band_radius", "ratio",
                "ratio_stderr", "replica", "substream"), csv_rows)
    return {"rows": table, "slope": slope}, violations


def _run_equilibrium_check(cfg, out_dir):
    rng = substream(cfg.seed, 0)
    stream = substream_seed(cfg.seed, 0)
    m4s = np.empty(cfg.samples)
    for s in range(cfg.samples):
        conf = sample_equilibrium(cfg.n, cfg.d, rng)
        m4s[s] = float(np.mean(np.sum(conf * conf, axis=1) ** 2))
    mean = float(np.mean(m4s))
    se = float(np.std(m4s, ddof=1) / np.sqrt(cfg.samples))
    exact = equilibrium_m4(cfg.n, cfg.d)
    limit = (cfg.d + 2.0) / cfg.d
    violations = []
    if abs(mean - exact) > 4.0 * se + 1e-12:
        violations.append(
            f"equilibrium m4 {mean:.8g} is {abs(mean - exact) / se:.1f} se "
            f"away from the exact value {exact:.8g}")
    if abs(mean - limit) > 0.01 * limit:
        violations.append(
            f"equilibrium m4 {mean:.8g} deviates from the large-n value "
            f"{limit:.8g} by more than 1%")
    _write_csv(Path(out_dir) / "moments.csv",
               ("n", "d", "m4_mean", "m4_se", "m4_exact", "m4_limit",
                "replica", "substream"),
               [(cfg.n, cfg.d, mean, se, exact, limit, 0, stream)])
    return {"m4_mean": mean, "m4_se": se, "m4_exact": exact,
            "m4_limit": limit}, violations


def run_support_studies(cfg, out_dir):
    """Moment and counterexample tables with built-in trend checks."""
    runners = {
        "wishart": _run_wishart,
        "counterexample1": _run_heavy_tail,
        "counterexample2": _run_radial_band,
        "equilibrium-check": _run_equilibrium_check,
    }
    results, violations = runners[cfg.kind](cfg, out_dir)
    report = {
        "kind": cfg.kind,
        "config": asdict(cfg),
        "results": results,
        "violations": violations,
        "pass": not violations,
    }
    _write_report(out_dir, report)
    return EXIT_INVARIANT if violations else EXIT_OK


def run_experiment(cfg, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "decay":
        return run_decay_experiment(cfg, out_dir)
    if cfg.kind == "inequalities":
        return run_inequality_sweep(cfg, out_dir)
    return run_support_studies(cfg, out_dir)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="kac",
        description="Collision process experiments: coupled decay runs, "
                    "inequality sweeps, and supporting moment studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment in a config file")
    run_p.add_argument("--config", required=True, help="path to a key = value file")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
    run_p.add_argument("--out", default=None, help="override the output directory")
    run_p.add_argument("--replicas", type=int, default=None,
                       help="override the replica count")

    val_p = sub.add_parser("validate", help="check a config file and exit")
    val_p.add_argument("--config", required=True, help="path to a key = value file")

    args = parser.parse_args(argv)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["out"] = args.out
    if getattr(args, "replicas", None) is not None:
        overrides["replicas"] = args.replicas

    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(json.dumps(_jsonable(asdict(cfg)), indent=2, sort_keys=True))
        return EXIT_OK

    code = run_experiment(cfg, cfg.out)
    status = "ok" if code == EXIT_OK else "INVARIANT VIOLATION"
    print(f"{cfg.kind}: {status} (outputs in {cfg.out})")
    return code


if __name__ == "__main__":
    sys.exit(main())
