"""Interaction specifications and conditional energies for birth rates.

An interaction assigns each candidate point x and configuration eta a
conditional energy h(x, eta); the birth rate is exp(-beta * h).  Supported
kinds:

  ideal  constant rate z (h = -log(z) / beta),
  area   h = alpha * (newly covered volume of the half-range ball at x),
  pair   h = sum of a tabulated potential phi(|x - y|) over neighbors.

Area coverage uses balls of radius R/2, so only points within R of x
matter.  In dimension 1 the coverage is exact interval arithmetic; in
dimension 2 it is computed by exact per-strip chords with an adaptive 1-D
midpoint rule over strips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Configuration

# volume of the unit ball by dimension
UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi}


class QuadratureError(Exception):
    """Requested tolerance is below what the strip rule can certify."""


@dataclass(frozen=True)
class InteractionSpec:
    """Immutable description of an interaction.

    Args:
        kind: 'ideal', 'area' or 'pair'.
        dim: spatial dimension, 1 or 2.
        beta: inverse temperature multiplying h in the birth rate.
        z: ideal-gas activity (ideal only).
        alpha: area coupling; positive is attractive (rates <= 1).
        interaction_range: R; balls have radius R/2, pair potentials
            vanish beyond R.
        phi_radii / phi_values: pair potential table, radii strictly
            increasing from 0.0 to R, linearly interpolated.
        k_max: optional packing bound on the number of neighbors within R,
            needed for a positive lower rate envelope of pair kinds.
        quad_tol: target accuracy of the d=2 area quadrature.
        quad_step: initial strip width of the d=2 area quadrature
            (default R/400).
    """

    kind: str
    dim: int
    beta: float = 1.0
    z: float = 1.0
    alpha: float = 0.0
    interaction_range: float = 0.0
    phi_radii: tuple = field(default=())
    phi_values: tuple = field(default=())
    k_max: int | None = None
    quad_tol: float = 1e-6
    quad_step: float | None = None

    def to_dict(self):
        d = {"kind": self.kind, "dim": self.dim, "beta": self.beta}
        if self.kind == "ideal":
            d["z"] = self.z
        elif self.kind == "area":
            d["alpha"] = self.alpha
            d["interaction_range"] = self.interaction_range
        elif self.kind == "pair":
            d["interaction_range"] = self.interaction_range
            d["phi_radii"] = list(self.phi_radii)
            d["phi_values"] = list(self.phi_values)
            if self.k_max is not None:
                d["k_max"] = self.k_max
        return d


def spec_from_dict(d):
    kind = d["kind"]
    if kind == "ideal":
        return ideal_interaction(d["z"], dim=d["dim"], beta=d.get("beta", 1.0))
    if kind == "area":
        return area_interaction(
            d["alpha"], d["interaction_range"], dim=d["dim"], beta=d.get("beta", 1.0)
        )
    if kind == "pair":
        return pair_interaction(
            d["phi_radii"], d["phi_values"], dim=d["dim"],
            beta=d.get("beta", 1.0), k_max=d.get("k_max"),
        )
    raise ValueError("unknown interaction kind %r" % kind)


def ideal_interaction(z, dim, beta=1.0):
    """Constant-rate interaction, birth rate z everywhere."""
    if z <= 0:
        raise ValueError("activity z must be positive")
    return InteractionSpec(kind="ideal", dim=dim, beta=beta, z=float(z))


def area_interaction(alpha, interaction_range, dim, beta=1.0,
                     quad_tol=1e-6, quad_step=None):
    """Area interaction with balls of radius interaction_range / 2."""
    if interaction_range <= 0:
        raise ValueError("interaction range must be positive")
    return InteractionSpec(
        kind="area", dim=dim, beta=beta, alpha=float(alpha),
        interaction_range=float(interaction_range),
        quad_tol=quad_tol, quad_step=quad_step,
    )


def pair_interaction(phi_radii, phi_values, dim, beta=1.0, k_max=None):
    """Tabulated pair potential, linear interpolation, zero beyond the range."""
    radii = tuple(float(r) for r in phi_radii)
    values = tuple(float(v) for v in phi_values)
    if len(radii) != len(values) or len(radii) < 2:
        raise ValueError("pair table needs matching radii/values, length >= 2")
    if radii[0] != 0.0:
        raise ValueError("pair table must start at r = 0")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("pair table radii must increase strictly")
    if k_max is None and any(v < 0 for v in values):
        raise ValueError("signed pair potentials require an explicit k_max")
    return InteractionSpec(
        kind="pair", dim=dim, beta=beta,
        interaction_range=radii[-1],
        phi_radii=radii, phi_values=values,
        k_max=None if k_max is None else int(k_max),
    )


def read_pair_potential(path):
    """Read a pair potential table CSV with header 'r,phi'."""
    radii, values = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "r,phi":
            raise ValueError("pair potential CSV must start with 'r,phi'")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            r, v = line.split(",")
            radii.append(float(r))
            values.append(float(v))
    return radii, values


def write_pair_potential(path, radii, values):
    with open(path, "w") as fh:
        fh.write("r,phi\n")
        for r, v in zip(radii, values):
            fh.write("%s,%s\n" % (repr(float(r)), repr(float(v))))


def _neighbors(spec, x, eta):
    """Points of eta within the interaction range of x."""
    R = spec.interaction_range
    if isinstance(eta, Configuration):
        return eta.neighbors_within(x, R)
    x = tuple(float(c) for c in np.atleast_1d(x))
    out = []
    for y in eta:
        y = tuple(float(c) for c in np.atleast_1d(y))
        if sum((a - b) ** 2 for a, b in zip(x, y)) <= R * R:
            out.append(y)
    return out


def _subtract_intervals(lo, hi, blockers):
    """Length of [lo, hi] minus the union of blocker intervals (exact)."""
    if hi <= lo:
        return 0.0
    clipped = []
    for a, b in blockers:
        a, b = max(a, lo), min(b, hi)
        if b > a:
            clipped.append((a, b))
    if not clipped:
        return hi - lo
    clipped.sort()
    covered = 0.0
    cur_lo, cur_hi = clipped[0]
    for a, b in clipped[1:]:
        if a > cur_hi:
            covered += cur_hi - cur_lo
            cur_lo, cur_hi = a, b
        else:
            cur_hi = max(cur_hi, b)
    covered += cur_hi - cur_lo
    return (hi - lo) - covered


def _uncovered_1d(x, nbrs, R):
    half = R / 2.0
    blockers = [(y[0] - half, y[0] + half) for y in nbrs]
    return _subtract_intervals(x[0] - half, x[0] + half, blockers)


def _uncovered_2d_fixed(x, nbrs, R, n_strips):
    """Strip rule: exact chord subtraction per strip, midpoint in the strip axis."""
    half = R / 2.0
    u = x[0] - half + (np.arange(n_strips) + 0.5) * (R / n_strips)
    chord = np.sqrt(np.maximum(half * half - (u - x[0]) ** 2, 0.0))
    total = 0.0
    for ui, ci in zip(u, chord):
        if ci <= 0.0:
            continue
        blockers = []
        for y in nbrs:
            du = ui - y[0]
            rem = half * half - du * du
            if rem > 0.0:
                c = math.sqrt(rem)
                blockers.append((y[1] - c, y[1] + c))
        total += _subtract_intervals(x[1] - ci, x[1] + ci, blockers)
    return total * (R / n_strips)


def _uncovered_2d(x, nbrs, R, tol, step):
    n = max(2, int(math.ceil(R / step)))
    prev = _uncovered_2d_fixed(x, nbrs, R, n)
    for _ in range(8):
        n *= 2
        cur = _uncovered_2d_fixed(x, nbrs, R, n)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise QuadratureError(
        "area quadrature did not reach tol %g within %d strips" % (tol, n)
    )


def conditional_energy(spec, x, eta):
    """Energy cost h(x, eta) of adding x to eta.

    Args:
        spec: InteractionSpec.
        x: candidate point, not in eta.
        eta: Configuration or iterable of points.
    """
    if spec.kind == "ideal":
        return -math.log(spec.z) / spec.beta
    x = tuple(float(c) for c in np.atleast_1d(x))
    if len(x) != spec.dim:
        raise ValueError("point dimension does not match interaction dim")
    nbrs = _neighbors(spec, x, eta)
    R = spec.interaction_range
    if spec.kind == "area":
        if not nbrs:
            half = R / 2.0
            fresh = UNIT_BALL_VOLUME[spec.dim] * half ** spec.dim
        elif spec.dim == 1:
            fresh = _uncovered_1d(x, nbrs, R)
        else:
            step = spec.quad_step if spec.quad_step is not None else R / 400.0
            fresh = _uncovered_2d(x, nbrs, R, spec.quad_tol, step)
        return spec.alpha * fresh
    if spec.kind == "pair":
        rs = np.asarray(spec.phi_radii)
        vs = np.asarray(spec.phi_values)
        h = 0.0
        for y in nbrs:
            r = math.sqrt(sum((a - b) ** 2 for a, b in zip(x, y)))
            if r <= R:
                h += float(np.interp(r, rs, vs))
        return h
    raise ValueError("unknown interaction kind %r" % spec.kind)


def birth_rate(spec, x, eta):
    """Papangelou birth rate exp(-beta * h(x, eta)); ideal returns z exactly."""
    if spec.kind == "ideal":
        return spec.z
    return math.exp(-spec.beta * conditional_energy(spec, x, eta))


def rate_bounds(spec):
    """Envelope (b_inf, b_sup) of the birth rate over all x and eta.

    Pair kinds without k_max report b_inf = 0 (no uniform packing bound
    exists for simple configurations without a hard core).
    """
    if spec.kind == "ideal":
        return (spec.z, spec.z)
    if spec.kind == "area":
        ball = UNIT_BALL_VOLUME[spec.dim] * (spec.interaction_range / 2.0) ** spec.dim
        ends = (math.exp(-spec.beta * spec.alpha * ball), 1.0)
        return (min(ends), max(ends))
    if spec.kind == "pair":
        pos = max(max(spec.phi_values), 0.0)
        neg = max(-min(spec.phi_values), 0.0)
        if spec.k_max is None:
            return (0.0, 1.0 if neg == 0.0 else math.inf)
        return (
            math.exp(-spec.beta * pos * spec.k_max),
            math.exp(spec.beta * neg * spec.k_max) if neg > 0 else 1.0,
        )
    raise ValueError("unknown interaction kind %r" % spec.kind)


def energy_in_window(spec, points, boundary=()):
    """Telescoped energy of points relative to a fixed boundary context.

    Inserts the points one at a time, summing conditional energies against
    the boundary plus the already inserted points.  The result does not
    depend on insertion order beyond quadrature accuracy.
    """
    if isinstance(points, Configuration):
        points = points.points()
    context = [tuple(float(c) for c in np.atleast_1d(p)) for p in boundary]
    total = 0.0
    for p in points:
        p = tuple(float(c) for c in np.atleast_1d(p))
        total += conditional_energy(spec, p, context)
        context.append(p)
    return total
