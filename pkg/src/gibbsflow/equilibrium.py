"""Equilibrium sampling and Georgii-Nguyen-Zessin self-consistency checks.

Finite-volume equilibrium samples are drawn by running the local
dynamics itself (the stationary law of the window dynamics with a frozen
exterior is exactly the finite-volume Gibbs law with that boundary), so
no separate sampler has to be trusted.  The GNZ residual then probes
E[sum_{x in eta} f(x, eta - x)] = E[integral b(x, eta) f(x, eta) dx],
which vanishes exactly when the samples match the interaction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import simulate
from .geometry import Configuration, Window
from .interactions import conditional_energy
from .noise import generator

DEFAULT_BURN_IN = 20.0
DEFAULT_SPACING = 5.0


def sample_poisson(z, window, seed_spec):
    """One Poisson(z) sample on the window as a Configuration."""
    rng = generator(seed_spec)
    n = int(rng.poisson(z * window.volume()))
    coords = rng.uniform(window.lo, window.hi, size=(n, window.dim))
    pts = [tuple(float(c) for c in coords[i]) for i in range(n)]
    return Configuration(window, pts)


def sample_gibbs(spec, window, n_samples, seed_spec, boundary=None,
                 burn_in=DEFAULT_BURN_IN, spacing=DEFAULT_SPACING,
                 n_chains=4, init=("poisson", 1.0)):
    """Equilibrium samples of the finite-volume Gibbs law on window.

    Runs n_chains independent copies of the local dynamics (buffer 0,
    frozen exterior = boundary), discards burn_in time units and records
    a state every spacing units.  Mean lifetime is 1, so the defaults
    leave successive samples essentially decorrelated.

    Returns:
        List of n_samples Configurations on window.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    n_chains = min(n_chains, n_samples)
    per_chain = [n_samples // n_chains] * n_chains
    for i in range(n_samples % n_chains):
        per_chain[i] += 1
    samples = []
    for chain, k in enumerate(per_chain):
        horizon = burn_in + spacing * k
        traj = simulate(spec, window, horizon,
                        seed_spec.child(replica=1000 + chain, tag="gibbs"),
                        init=init, boundary=boundary, buffer=0.0)
        for j in range(k):
            cfg = traj.state_at(burn_in + spacing * (j + 1) - spacing / 2.0)
            samples.append(cfg.restrict(window))
    return samples


@dataclass(frozen=True)
class GNZTestFunction:
    """Test function f(x, eta) with a declared spatial support for x."""

    name: str
    support: Window
    fn: object

    def __call__(self, x, config):
        return float(self.fn(x, config))


def standard_test_functions(window, radius):
    """Battery of five test functions supported on the window.

    Mixes configuration-blind functions (constant, coordinate, cosine)
    with configuration-sensitive ones (neighbor count within radius, a
    bounded crowding penalty) so balance violations in either the
    intensity or the interaction show up.
    """
    side = float(window.sides[0])
    lo0 = float(window.lo[0])

    def n_near(x, cfg):
        pts = cfg.neighbors_within(x, radius) if len(cfg) else []
        return len([p for p in pts if p != tuple(np.atleast_1d(x))])

    return [
        GNZTestFunction("ones", window, lambda x, cfg: 1.0),
        GNZTestFunction("coord", window,
                        lambda x, cfg: (np.atleast_1d(x)[0] - lo0) / side),
        GNZTestFunction("cosine", window,
                        lambda x, cfg: math.cos(
                            2.0 * math.pi * (np.atleast_1d(x)[0] - lo0) / side)),
        GNZTestFunction("neighbors", window,
                        lambda x, cfg: float(n_near(x, cfg))),
        GNZTestFunction("crowding", window,
                        lambda x, cfg: math.exp(-float(n_near(x, cfg)))),
    ]


def _quad_grid(window, step):
    """Midpoints and cell volume of a tensor grid with spacing <= step."""
    axes = []
    for lo, hi in zip(window.lo, window.hi):
        n = max(1, int(math.ceil((hi - lo) / step)))
        axes.append(lo + (np.arange(n) + 0.5) * ((hi - lo) / n))
    cell = np.prod([(hi - lo) / len(ax)
                    for lo, hi, ax in zip(window.lo, window.hi, axes)])
    return [tuple(float(c) for c in p) for p in itertools.product(*axes)], float(cell)


def gnz_residual(spec, samples, test_fns, quad_step=None, boundary=None):
    """Per-function GNZ residuals over equilibrium samples.

    For each sample the statistic is
        sum over points x in the support of f(x, eta - x)
        minus the quadrature of b(x, eta) f(x, eta) over the support,
    whose mean is 0 exactly when the samples follow the Gibbs law for
    spec (with the same frozen boundary).

    Args:
        quad_step: grid spacing, default interaction_range / 50 (or the
            shortest support side / 50 for ideal kinds).

    Returns:
        List of (name, mean residual, standard error).
    """
    if not samples:
        raise ValueError("need at least one sample")
    bpts = [tuple(float(c) for c in np.atleast_1d(p)) for p in (boundary or [])]
    out = []
    for f in test_fns:
        step = quad_step
        if step is None:
            base = spec.interaction_range if spec.interaction_range > 0 else \
                float(np.min(f.support.sides))
            step = base / 50.0
        grid, cell = _quad_grid(f.support, step)
        residuals = np.empty(len(samples))
        for i, cfg in enumerate(samples):
            total = 0.0
            for x in list(cfg.points()):
                if f.support.contains(x):
                    cfg.remove(x)
                    total += f(x, cfg)
                    cfg.insert(x)
            integral = 0.0
            R = spec.interaction_range
            for x in grid:
                if spec.kind == "ideal":
                    b = spec.z
                else:
                    ctx = cfg.neighbors_within(x, R)
                    ctx += [p for p in bpts
                            if sum((a - c) ** 2 for a, c in zip(p, x)) <= R * R]
                    b = math.exp(-spec.beta * conditional_energy(spec, x, ctx))
                integral += b * f(x, cfg)
            residuals[i] = total - cell * integral
        se = float(np.std(residuals, ddof=1)) / math.sqrt(len(samples))
        out.append((f.name, float(np.mean(residuals)), se))
    return out


def count_autocorrelation(traj, window, times, lag):
    """Lag autocorrelation of window counts along a trajectory grid."""
    counts = np.array([traj.state_at(t).count(window) for t in times], dtype=float)
    if lag <= 0 or lag >= len(counts):
        raise ValueError("lag must be in (0, len(times))")
    a = counts[:-lag] - counts.mean()
    b = counts[lag:] - counts.mean()
    denom = float(np.sum((counts - counts.mean()) ** 2))
    if denom == 0.0:
        return 0.0
    return float(np.sum(a * b) / denom)
