"""Config-driven experiment runs with machine-checkable verdicts.

An experiment is a TOML config naming a registered kind plus its
parameters.  Running one creates a run directory holding manifest.json
(the resolved config, seed and package version), results.csv (the
kind's tabular output, written with repr floats so reruns are bitwise
comparable) and verdicts.csv (one PASS/FAIL row per checked property).
Replay re-executes a run from its manifest and byte-compares the
results table.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

from . import __version__
from .dynamics import simulate, simulate_coupled, trajectories_disagree
from .equilibrium import gnz_residual, sample_gibbs, standard_test_functions
from .geometry import Window, make_window
from .interactions import (area_interaction, ideal_interaction,
                           pair_interaction, spec_from_dict)
from .lattice import (build_generator, de_bruijn_check, kappa_bound,
                      lattice_model, rel_entropy, spectral_gap, stationary)
from .noise import SeedSpec

DEFAULT_SEED = 0x5EED


class ConfigError(ValueError):
    """Invalid experiment configuration; runs must not start."""


def _require(params, key, kind):
    if key not in params:
        raise ConfigError("experiment %r requires params.%s" % (kind, key))
    return params[key]


def _build_spec(params, kind):
    name = params.get("interaction", "ideal")
    beta = float(params.get("beta", 1.0))
    if name == "ideal":
        return ideal_interaction(float(params.get("z", 1.0)), 1, beta)
    if name == "area":
        return area_interaction(float(_require(params, "alpha", kind)),
                                float(_require(params, "range", kind)), 1, beta)
    if name == "pair":
        radii = [float(v) for v in _require(params, "radii", kind)]
        values = [float(v) for v in _require(params, "values", kind)]
        k_max = params.get("k_max")
        return pair_interaction(radii, values, 1, beta,
                                None if k_max is None else int(k_max))
    raise ConfigError("unknown interaction %r" % name)


SPEC_KEYS = {"interaction", "beta", "z", "alpha", "range", "radii", "values",
             "k_max"}


@dataclass
class KindDef:
    description: str
    allowed: frozenset
    runner: object


def _float_row(values):
    return ",".join("" if v is None else repr(float(v)) for v in values)


# ---------------------------------------------------------------- kinds


def _run_entropy_decay(params, seed, threads):
    kind = "entropy-decay"
    spec = _build_spec(params, kind)
    m = int(_require(params, "m", kind))
    window = make_window(0.0, float(_require(params, "window_length", kind)))
    horizon = float(params.get("horizon", 3.0))
    n_grid = int(params.get("n_grid", 201))
    tol = float(params.get("residual_tol", 1e-7))
    model = lattice_model(spec, window, m)
    q = build_generator(model)
    nu = stationary(model)
    mu0_mode = params.get("mu0", "uniform")
    if mu0_mode == "uniform":
        mu0 = np.full(2 ** m, 1.0 / 2 ** m)
    elif mu0_mode == "random":
        rng = np.random.default_rng(seed)
        mu0 = rng.dirichlet(np.ones(2 ** m))
    else:
        raise ConfigError("mu0 must be 'uniform' or 'random'")
    max_resid, rows = de_bruijn_check(mu0, q, model, horizon, n_grid)
    eps, kappa = kappa_bound(model)
    gap = spectral_gap(q, nu)
    i0 = rel_entropy(mu0, nu)
    out_rows = []
    entropies = []
    envelope_ok = True
    for t, entropy, fisher, resid in rows:
        env = i0 * math.exp(-kappa * t) if kappa > 0 else None
        if env is not None and entropy > env * (1 + 1e-9) + 1e-12:
            envelope_ok = False
        entropies.append(entropy)
        out_rows.append(_float_row((t, entropy, fisher, resid, env)))
    monotone = all(b <= a + 1e-12 for a, b in zip(entropies, entropies[1:]))
    verdicts = [
        ("residual-tolerance", max_resid <= tol,
         "max|dI/dt + J| = %.3e (tol %.1e)" % (max_resid, tol)),
        ("entropy-monotone", monotone,
         "entropy nonincreasing on %d grid points" % len(entropies)),
    ]
    if kappa > 0:
        verdicts.append(("exponential-envelope", envelope_ok,
                         "kappa = %.6f, spectral gap = %.6f" % (kappa, gap)))
    else:
        verdicts.append(("exponential-envelope", True,
                         "skipped: kappa = %.6f not positive" % kappa))
    header = "t,entropy,fisher,residual,envelope"
    return header, out_rows, verdicts


def _fsp_replica(args):
    spec_dict, lo, hi, horizon, buffers, init_intensity, root, rep = args
    spec = spec_from_dict(spec_dict)
    window = Window(np.asarray(lo), np.asarray(hi))
    seed = SeedSpec(root, replica=rep, tag="fsp")
    trajs = simulate_coupled(spec, window, horizon, seed, buffers,
                             init=("poisson", init_intensity))
    ref = trajs[-1]
    return [int(trajectories_disagree(tr, ref, window)) for tr in trajs[:-1]]


def _run_finite_speed(params, seed, threads):
    kind = "finite-speed"
    spec = _build_spec(params, kind)
    r = spec.interaction_range
    window = make_window(0.0, float(_require(params, "window_length", kind)))
    horizon = float(params.get("horizon", 1.0))
    multiples = [float(v) for v in params.get("buffer_multiples", [1, 2, 4, 8])]
    if any(b <= a for a, b in zip(multiples, multiples[1:])):
        raise ConfigError("buffer_multiples must be strictly increasing")
    buffers = [m * r for m in multiples]
    ref_buffer = 2.0 * buffers[-1]
    n_replicas = int(params.get("n_replicas", 400))
    init_intensity = float(params.get("init_intensity", 1.0))
    args = [(spec.to_dict(), window.lo.tolist(), window.hi.tolist(), horizon,
             buffers + [ref_buffer], init_intensity, seed, rep)
            for rep in range(n_replicas)]
    flags = np.array(_parallel_map(_fsp_replica, args, threads))
    rows = []
    stats = []
    for j, buf in enumerate(buffers):
        p = float(np.mean(flags[:, j]))
        se = math.sqrt(max(p * (1 - p), 1.0 / n_replicas) / n_replicas)
        stats.append((buf, p, se))
        rows.append(_float_row((buf, p, se, n_replicas)))
    monotone = all(
        stats[i + 1][1] <= stats[i][1] + 3 * math.hypot(stats[i][2], stats[i + 1][2])
        for i in range(len(stats) - 1))
    verdicts = [("monotone-in-buffer", monotone,
                 "p = %s" % [round(p, 4) for _, p, _ in stats])]
    p0, se0 = stats[0][1], stats[0][2]
    p1, se1 = stats[-1][1], stats[-1][2]
    if p0 > 0.05:
        sep = (p0 - p1) > 3 * math.hypot(se0, se1)
        verdicts.append(("buffer-separation", sep,
                         "p(%.3g) - p(%.3g) = %.4f" % (stats[0][0], stats[-1][0],
                                                       p0 - p1)))
    else:
        verdicts.append(("buffer-separation", True,
                         "skipped: p at smallest buffer = %.4f <= 0.05" % p0))
    header = "buffer,p_disagree,se,n"
    return header, rows, verdicts


def _run_gnz(params, seed, threads):
    kind = "gnz-residual"
    spec = _build_spec(params, kind)
    window = make_window(0.0, float(_require(params, "window_length", kind)))
    n_samples = int(params.get("n_samples", 400))
    burn_in = float(params.get("burn_in", 20.0))
    spacing = float(params.get("spacing", 5.0))
    quad_step = params.get("quad_step")
    samples = sample_gibbs(spec, window, n_samples, SeedSpec(seed, tag="gnz"),
                           burn_in=burn_in, spacing=spacing)
    radius = spec.interaction_range if spec.interaction_range > 0 \
        else min(window.sides) / 10.0
    fns = standard_test_functions(window, radius)
    rows = []
    verdicts = []
    for name, mean, se in gnz_residual(spec, samples, fns,
                                       None if quad_step is None
                                       else float(quad_step)):
        rows.append("%s,%s,%s,%d" % (name, repr(mean), repr(se), n_samples))
        verdicts.append(("gnz-" + name, abs(mean) <= 3 * se,
                         "residual %.4f (se %.4f)" % (mean, se)))
    header = "test_fn,residual,se,n"
    return header, rows, verdicts


def _correlation_replica(args):
    spec_dict, length, t, root, rep = args
    spec = spec_from_dict(spec_dict)
    window = make_window(0.0, length)
    traj = simulate(spec, window, t, SeedSpec(root, replica=rep, tag="corr"),
                    init="empty")
    state = traj.state_at(t, window)
    return [tuple(p) for p in state.points()]


def _run_correlation(params, seed, threads):
    kind = "correlation-profile"
    z = float(params.get("z", 1.0))
    t = float(params.get("t", 1.0))
    length = float(params.get("window_length", 1.0))
    ell = float(params.get("ell", 0.05))
    n_reps = int(params.get("n_reps", 2000))
    spec = ideal_interaction(z, 1, float(params.get("beta", 1.0)))
    args = [(spec.to_dict(), length, t, seed, rep) for rep in range(n_reps)]
    replicas = _parallel_map(_correlation_replica, args, threads)
    rho1 = z * (1.0 - math.exp(-t))
    centers = [float(v) for v in params.get(
        "centers", [length * f for f in (0.1, 0.3, 0.5, 0.7, 0.9)])]
    rows = []
    verdicts = []

    def box_count(points, c):
        return sum(1 for p in points if abs(p[0] - c) < ell / 2.0)

    for c in centers:
        vals = np.array([box_count(pts, c) for pts in replicas], dtype=float) / ell
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1)) / math.sqrt(n_reps)
        rows.append("1,%s,%s,%s,%s" % (repr(c), repr(mean), repr(se), repr(rho1)))
        verdicts.append(("rho1-at-%.2f" % c, abs(mean - rho1) <= 3 * se,
                         "estimate %.4f vs %.4f (se %.4f)" % (mean, rho1, se)))
    pair = params.get("pair", [length * 0.25, length * 0.75])
    c1, c2 = float(pair[0]), float(pair[1])
    prods = np.array([box_count(pts, c1) * box_count(pts, c2)
                      for pts in replicas], dtype=float) / ell ** 2
    mean2 = float(np.mean(prods))
    se2 = float(np.std(prods, ddof=1)) / math.sqrt(n_reps)
    rows.append("2,%s,%s,%s,%s" % (repr((c1 + c2) / 2.0), repr(mean2),
                                   repr(se2), repr(rho1 ** 2)))
    verdicts.append(("rho2-pair", abs(mean2 - rho1 ** 2) <= 3 * se2,
                     "estimate %.4f vs %.4f (se %.4f)" % (mean2, rho1 ** 2, se2)))
    header = "order,x,value,se,truth"
    return header, rows, verdicts


REGISTRY = {
    "entropy-decay": KindDef(
        "lattice entropy and dissipation curves with residual and envelope checks",
        frozenset(SPEC_KEYS | {"m", "window_length", "horizon", "n_grid",
                               "residual_tol", "mu0"}),
        _run_entropy_decay),
    "finite-speed": KindDef(
        "disagreement probability of coupled runs versus buffer width",
        frozenset(SPEC_KEYS | {"window_length", "horizon", "buffer_multiples",
                               "n_replicas", "init_intensity"}),
        _run_finite_speed),
    "gnz-residual": KindDef(
        "balance-identity residuals for a battery of test functions at equilibrium",
        frozenset(SPEC_KEYS | {"window_length", "n_samples", "burn_in",
                               "spacing", "quad_step"}),
        _run_gnz),
    "correlation-profile": KindDef(
        "box-count correlation estimates against closed forms for the ideal gas",
        frozenset({"z", "beta", "t", "window_length", "ell", "n_reps",
                   "centers", "pair"}),
        _run_correlation),
}

TOP_LEVEL_KEYS = {"name", "kind", "seed", "params"}


def _parallel_map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


def load_config(path):
    """Parse and validate a TOML experiment config.

    Raises ConfigError on unknown keys, unknown kinds or missing
    required parameters, before anything is written to disk.
    """
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("TOML parse error: %s" % exc) from exc
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError("unknown top-level keys: %s" % sorted(unknown))
    for key in ("name", "kind"):
        if key not in raw:
            raise ConfigError("config must set %r" % key)
    if not isinstance(raw["name"], str) or not raw["name"]:
        raise ConfigError("name must be a nonempty string")
    kind = raw["kind"]
    if kind not in REGISTRY:
        raise ConfigError("unknown experiment kind %r (have: %s)"
                          % (kind, sorted(REGISTRY)))
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be a table")
    bad = set(params) - REGISTRY[kind].allowed
    if bad:
        raise ConfigError("unknown params for %s: %s" % (kind, sorted(bad)))
    seed = raw.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return {"name": raw["name"], "kind": kind, "seed": seed, "params": params}


def resolve_seed(cli_seed, config_seed):
    """Priority: command line, then GIBBSFLOW_SEED, then config, then default."""
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("GIBBSFLOW_SEED")
    if env is not None:
        return int(env)
    if config_seed is not None:
        return int(config_seed)
    return DEFAULT_SEED


def resolve_threads(cli_threads):
    if cli_threads is not None:
        return max(1, int(cli_threads))
    env = os.environ.get("GIBBSFLOW_THREADS")
    if env is not None:
        return max(1, int(env))
    return 1


def _fresh_run_dir(out_root, name):
    base = os.path.join(out_root, name)
    candidate = base
    k = 1
    while os.path.exists(candidate):
        k += 1
        candidate = "%s-%d" % (base, k)
    os.makedirs(candidate)
    return candidate


def execute(config, seed, threads):
    """Run a validated config; returns (header, rows, verdicts)."""
    runner = REGISTRY[config["kind"]].runner
    return runner(config["params"], seed, threads)


def run(config_path, out_root, cli_seed=None, cli_threads=None):
    """Validate, execute and persist one experiment.

    Returns:
        (run_dir, n_failed_verdicts).  Raises ConfigError before
        creating the run directory if the config is invalid.
    """
    config = load_config(config_path)
    seed = resolve_seed(cli_seed, config["seed"])
    threads = resolve_threads(cli_threads)
    header, rows, verdicts = execute(config, seed, threads)
    run_dir = _fresh_run_dir(out_root, config["name"])
    manifest = {
        "name": config["name"],
        "kind": config["kind"],
        "seed": seed,
        "params": config["params"],
        "version": __version__,
    }
    with open(os.path.join(run_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(run_dir, "results.csv"), "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")
    n_failed = 0
    with open(os.path.join(run_dir, "verdicts.csv"), "w") as fh:
        fh.write("check,status,detail\n")
        for name, ok, detail in verdicts:
            status = "PASS" if ok else "FAIL"
            n_failed += 0 if ok else 1
            fh.write("%s,%s,\"%s\"\n" % (name, status, detail))
    return run_dir, n_failed


def replay(run_dir, cli_threads=None):
    """Re-execute a finished run from its manifest and compare tables.

    Returns:
        True when the regenerated results.csv is byte-identical to the
        stored one.
    """
    with open(os.path.join(run_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    config = {"name": manifest["name"], "kind": manifest["kind"],
              "seed": manifest["seed"], "params": manifest["params"]}
    if config["kind"] not in REGISTRY:
        raise ConfigError("manifest names unknown kind %r" % config["kind"])
    header, rows, _ = execute(config, manifest["seed"],
                              resolve_threads(cli_threads))
    regenerated = header + "\n" + "".join(row + "\n" for row in rows)
    with open(os.path.join(run_dir, "results.csv")) as fh:
        stored = fh.read()
    return regenerated == stored
