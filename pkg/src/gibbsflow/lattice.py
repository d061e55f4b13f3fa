"""Exact finite-state surrogate of the birth-and-death dynamics.

A window is split into m binary cells (at most one point each, m <= 14);
occupancy patterns are bitmask integers.  A vacant cell i gives birth at
rate cell_volume * birth_rate(spec, center_i, occupied centers); occupied
cells die at rate 1.  Everything downstream (stationary law, evolution,
relative entropy, Fisher information, entropy production, decay bounds,
series expansion, reversibility) is computed exactly on the 2^m states,
making this module the brute-force oracle for the continuum identities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Window
from .interactions import birth_rate, rate_bounds

MAX_CELLS = 14
UNIFORMIZATION_TAIL = 1e-12
CHUNK_RATE_TIME = 150.0


@dataclass
class LatticeModel:
    """Cell geometry plus interaction; rates are memoized per neighbor mask.

    Args:
        spec: InteractionSpec (any kind; dim 1 geometry).
        window: 1-d window partitioned into m equal cells.
        m: cell count, <= 14.
    """

    spec: object
    window: Window
    m: int
    centers: tuple = field(init=False)
    cell_volume: float = field(init=False)
    neighbor_masks: tuple = field(init=False)
    interior_sites: tuple = field(init=False)
    collar_sites: tuple = field(init=False)

    def __post_init__(self):
        if self.m < 1 or self.m > MAX_CELLS:
            raise ValueError("cell count must be in [1, %d]" % MAX_CELLS)
        if self.window.dim != 1:
            raise ValueError("lattice surrogate uses 1-d windows")
        lo, hi = float(self.window.lo[0]), float(self.window.hi[0])
        width = (hi - lo) / self.m
        self.centers = tuple((lo + (i + 0.5) * width,) for i in range(self.m))
        self.cell_volume = width
        R = self.spec.interaction_range
        masks = []
        for i in range(self.m):
            mask = 0
            for j in range(self.m):
                if j != i and abs(self.centers[j][0] - self.centers[i][0]) <= R:
                    mask |= 1 << j
            masks.append(mask)
        self.neighbor_masks = tuple(masks)
        collar = tuple(i for i in range(self.m)
                       if self.centers[i][0] - lo <= R or hi - self.centers[i][0] <= R)
        self.collar_sites = collar
        self.interior_sites = tuple(i for i in range(self.m) if i not in collar)
        self._rate_cache = {}

    @property
    def n_states(self):
        return 1 << self.m

    def occupied_centers(self, pattern):
        return [self.centers[j] for j in range(self.m) if pattern >> j & 1]

    def birth(self, i, pattern):
        """Rate of site i turning on from pattern (site i must be vacant)."""
        key = (i, pattern & self.neighbor_masks[i])
        rate = self._rate_cache.get(key)
        if rate is None:
            ctx = [self.centers[j] for j in range(self.m)
                   if key[1] >> j & 1]
            rate = self.cell_volume * birth_rate(self.spec, self.centers[i], ctx)
            self._rate_cache[key] = rate
        return rate

    def describe(self):
        return {
            "m": self.m,
            "cell_volume": self.cell_volume,
            "window": [float(self.window.lo[0]), float(self.window.hi[0])],
            "interaction": self.spec.to_dict(),
        }


def lattice_model(spec, window, m):
    return LatticeModel(spec, window, m)


def validate_dist(mu, n_states):
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (n_states,):
        raise ValueError("distribution has wrong length")
    if np.any(mu < 0) or abs(float(mu.sum()) - 1.0) > 1e-12:
        raise ValueError("distribution entries must be >= 0 and sum to 1")
    return mu


def build_generator(model):
    """Dense generator: single-cell flips only, zero row sums."""
    n = model.n_states
    Q = np.zeros((n, n))
    for eta in range(n):
        for i in range(model.m):
            bit = 1 << i
            if eta & bit:
                Q[eta, eta ^ bit] += 1.0
            else:
                Q[eta, eta ^ bit] += model.birth(i, eta)
        Q[eta, eta] = -Q[eta].sum()
    return Q


def stationary(model):
    """Exact stationary law from telescoped birth rates.

    The weight of a pattern is the product of the birth rates along the
    insertion of its occupied cells in ascending order; with unit death
    rates this satisfies detailed balance against the generator.
    """
    n = model.n_states
    weights = np.empty(n)
    weights[0] = 1.0
    # ascending insertion: add sites from lowest index to highest; the
    # partial pattern when site i enters is eta restricted to lower bits
    for eta in range(1, n):
        w = 1.0
        partial = 0
        for i in range(model.m):
            bit = 1 << i
            if eta & bit:
                w *= model.birth(i, partial)
                partial |= bit
        weights[eta] = w
    return weights / weights.sum()


def _uniformized_step(vec, P, rate_time, column):
    """Poisson-weighted powers of P applied to vec (row or column action)."""
    w = math.exp(-rate_time)
    acc = w * vec
    cum = w
    k = 0
    cur = vec
    k_max = int(10 * (rate_time + 10)) + 100
    while cum < 1.0 - UNIFORMIZATION_TAIL and k < k_max:
        cur = (P @ cur) if column else (cur @ P)
        k += 1
        w *= rate_time / k
        acc = acc + w * cur
        cum += w
    return acc


def _uniformize(vec, Q, t, column=False):
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0.0:
        return np.array(vec, dtype=float)
    lam = float(np.max(-np.diag(Q)))
    if lam <= 0.0:
        return np.array(vec, dtype=float)
    P = np.eye(Q.shape[0]) + Q / lam
    n_chunks = max(1, int(math.ceil(lam * t / CHUNK_RATE_TIME)))
    dt = t / n_chunks
    out = np.array(vec, dtype=float)
    for _ in range(n_chunks):
        out = _uniformized_step(out, P, lam * dt, column)
    return out


def evolve(mu, Q, t):
    """mu e^{tQ} by uniformization; positivity preserved, drift <= 1e-12."""
    mu = validate_dist(mu, Q.shape[0])
    out = _uniformize(mu, Q, t, column=False)
    return out / out.sum()


def evolve_observable(f, Q, t):
    """e^{tQ} f (column action), same uniformization machinery."""
    f = np.asarray(f, dtype=float)
    return _uniformize(f, Q, t, column=True)


def rel_entropy(mu, nu):
    """Relative entropy sum mu log(mu/nu) with 0 log 0 = 0."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    mask = mu > 0
    if np.any(nu[mask] <= 0):
        return math.inf
    return float(np.sum(mu[mask] * np.log(mu[mask] / nu[mask])))


def total_variation(mu, nu):
    return 0.5 * float(np.sum(np.abs(np.asarray(mu) - np.asarray(nu))))


def fisher(mu, nu, model):
    """Dirichlet-form dissipation functional of g = mu/nu.

    Sum over patterns and vacant sites of
        b_i(eta) nu(eta) (g(eta+i) - g(eta)) (log g(eta+i) - log g(eta)),
    each summand >= 0.  Returns +inf when mu has zero entries.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(mu <= 0):
        return math.inf
    g = mu / nu
    log_g = np.log(g)
    total = 0.0
    for eta in range(model.n_states):
        for i in range(model.m):
            bit = 1 << i
            if eta & bit:
                continue
            up = eta | bit
            total += model.birth(i, eta) * nu[eta] * (g[up] - g[eta]) * (log_g[up] - log_g[eta])
    return total


def entropy_production(mu, nu, Q, model=None):
    """Dissipation rate -mu[Q log g]; equals fisher for the reversible pair.

    When model is given the identity with fisher is asserted at 1e-10.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(mu <= 0):
        return math.inf
    log_g = np.log(mu / nu)
    value = -float(mu @ (Q @ log_g))
    if model is not None:
        j = fisher(mu, nu, model)
        assert abs(value - j) <= 1e-10 * max(1.0, abs(j)), \
            "entropy production and fisher disagree beyond reversible tolerance"
    return value


def mix_positive(mu, nu, eps=1e-9):
    """Replace a degenerate mu by (1-eps) mu + eps nu; flags if it acted."""
    mu = np.asarray(mu, dtype=float)
    if np.all(mu > 0):
        return mu, False
    return (1.0 - eps) * mu + eps * np.asarray(nu, dtype=float), True


def entropy_decay_curve(model, Q, nu, mu0, times):
    """(t, I(mu_t | nu), fisher(mu_t)) along a time grid (stepwise evolve)."""
    times = list(times)
    rows = []
    prev_t = 0.0
    cur = np.asarray(mu0, dtype=float)
    for t in times:
        if t < prev_t:
            raise ValueError("times must be nondecreasing")
        cur = evolve(cur, Q, t - prev_t)
        prev_t = t
        rows.append((t, rel_entropy(cur, nu), fisher(cur, nu, model)))
    return rows


def de_bruijn_check(mu0, Q, model, T, n_grid=401):
    """Max residual of the entropy/dissipation balance on [0, T].

    The integral of the Fisher information is accumulated with a
    per-interval Simpson rule (grid nodes plus interval midpoints), so a
    residual is available at every one of the n_grid nodes.

    Returns:
        (max_abs_residual, rows) with rows (t, entropy, fisher, residual).
    """
    nu = stationary(model)
    mu0 = validate_dist(mu0, model.n_states)
    mu0, mixed = mix_positive(mu0, nu)
    if n_grid < 2:
        raise ValueError("need at least two grid nodes")
    ts = np.linspace(0.0, T, n_grid)
    i0 = rel_entropy(mu0, nu)
    rows = [(0.0, i0, fisher(mu0, nu, model), 0.0)]
    cur = mu0
    integral = 0.0
    max_resid = 0.0
    for a, b in zip(ts[:-1], ts[1:]):
        j_a = rows[-1][2]
        mid = evolve(cur, Q, (b - a) / 2.0)
        cur = evolve(mid, Q, (b - a) / 2.0)
        j_mid = fisher(mid, nu, model)
        j_b = fisher(cur, nu, model)
        integral += (b - a) / 6.0 * (j_a + 4.0 * j_mid + j_b)
        i_t = rel_entropy(cur, nu)
        resid = i0 - i_t - integral
        max_resid = max(max_resid, abs(resid))
        rows.append((float(b), i_t, j_b, resid))
    return max_resid, rows


def series_expansion_check(mu, f, Q, t, K, f_sup=None):
    """Partial sums of the generator series against the exact semigroup.

    Returns:
        dict with 'partial' (length K+1 prefix sums of t^k/k! mu[Q^k f]),
        'truth' (mu[e^{tQ} f]), and 'crude_bounds' (||f||_inf (2 lambda)^k).
    """
    mu = validate_dist(mu, Q.shape[0])
    f = np.asarray(f, dtype=float)
    if f_sup is None:
        f_sup = float(np.max(np.abs(f)))
    lam = float(np.max(-np.diag(Q)))
    partial = []
    term_vec = f.copy()
    total = 0.0
    coeff = 1.0
    bounds = []
    for k in range(K + 1):
        if k > 0:
            term_vec = Q @ term_vec
            coeff *= t / k
        total += coeff * float(mu @ term_vec)
        partial.append(total)
        bounds.append(f_sup * (2.0 * lam) ** k)
    truth = float(mu @ evolve_observable(f, Q, t))
    return {"partial": partial, "truth": truth, "crude_bounds": bounds}


def kappa_bound(model, beta=None):
    """Decay constants (epsilon, kappa = 1 - epsilon) of the surrogate.

    epsilon = e^{beta log+ b_sup} * sup over patterns (site 0 vacant) of
    the cell-volume sum over vacant sites y within R of site 0 of
    1 - exp(-beta * hess(0, y, eta) - 2 beta log+ b_sup), with hess the
    second-order add-one cost of the telescoped energy.  kappa may be
    <= 0; it is reported unclamped.
    """
    spec = model.spec
    if beta is None:
        beta = spec.beta
    b_sup = rate_bounds(spec)[1]
    log_plus = max(0.0, math.log(b_sup))
    vol = model.cell_volume
    R = spec.interaction_range
    worst = -math.inf
    site0 = 0
    bit0 = 1 << site0
    neighbor_sites = [y for y in range(model.m)
                      if y != site0 and
                      abs(model.centers[y][0] - model.centers[site0][0]) <= R]
    for eta in range(model.n_states):
        if eta & bit0:
            continue
        total = 0.0
        for y in neighbor_sites:
            bity = 1 << y
            if eta & bity:
                continue
            hess = _second_add_cost(model, site0, y, eta)
            total += vol * (1.0 - math.exp(-beta * hess - 2.0 * beta * log_plus))
        worst = max(worst, total)
    eps = math.exp(beta * log_plus) * worst
    return eps, 1.0 - eps


def _second_add_cost(model, i, y, eta):
    """H(eta+i+y) - H(eta+i) - H(eta+y) + H(eta) via conditional energies.

    Uses the beta-free conditional energy h: the telescoping collapses to
    h(c_y, eta + i) - h(c_y, eta).
    """
    from .interactions import conditional_energy

    ctx = model.occupied_centers(eta)
    with_i = ctx + [model.centers[i]]
    cy = model.centers[y]
    return conditional_energy(model.spec, cy, with_i) - conditional_energy(model.spec, cy, ctx)


def spectral_gap(Q, nu):
    """Second-smallest eigenvalue of -Q under the nu symmetrization."""
    nu = np.asarray(nu, dtype=float)
    d = np.sqrt(nu)
    A = (d[:, None] * Q) / d[None, :]
    sym = 0.5 * (A + A.T)
    vals = np.linalg.eigvalsh(-sym)
    return float(np.sort(vals)[1])


def reversibility_check(mu, Q, f, g, t):
    """Residual mu[(T_t f) g] - mu[f (T_t g)], exact via uniformization."""
    mu = np.asarray(mu, dtype=float)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    ft = evolve_observable(f, Q, t)
    gt = evolve_observable(g, Q, t)
    return float(mu @ (ft * g) - mu @ (f * gt))


def finite_time_gibbs_check(mu0, Q, model, T, n_grid):
    """Total-variation distance to the stationary law along a grid.

    Returns:
        (min distance, distances list); strict positivity at every grid
        time is the caller's asserted property.
    """
    nu = stationary(model)
    mu0 = validate_dist(mu0, model.n_states)
    ts = np.linspace(0.0, T, n_grid)
    cur = mu0
    prev_t = 0.0
    dists = []
    for t in ts:
        cur = evolve(cur, Q, t - prev_t)
        prev_t = float(t)
        dists.append(total_variation(cur, nu))
    return min(dists), dists


def _interior_patterns(model):
    sites = model.interior_sites
    return sites, [i for i in range(1 << len(sites))]


def _full_pattern(model, interior_bits, collar_bits):
    eta = 0
    for k, site in enumerate(model.interior_sites):
        if interior_bits >> k & 1:
            eta |= 1 << site
    for k, site in enumerate(model.collar_sites):
        if collar_bits >> k & 1:
            eta |= 1 << site
    return eta


def fisher_bc_variants(mu, model):
    """Interior Fisher information, free vs stationary-averaged collar rates.

    The model's interior is the set of cells farther than R from the
    window boundary.  Both variants weight interior patterns by the
    marginal of the stationary law and use g = marginal(mu)/marginal(nu);
    they differ in the birth rates: 'free' evaluates rates with an empty
    collar, 'averaged' uses the stationary conditional expectation of the
    true rates given the interior pattern.

    Returns:
        (J_free, J_averaged).
    """
    nu = stationary(model)
    mu = validate_dist(mu, model.n_states)
    sites, patterns = _interior_patterns(model)
    n_c = len(model.collar_sites)
    nu_i = np.zeros(len(patterns))
    mu_i = np.zeros(len(patterns))
    for p in patterns:
        for cb in range(1 << n_c):
            eta = _full_pattern(model, p, cb)
            nu_i[p] += nu[eta]
            mu_i[p] += mu[eta]
    if np.any(mu_i <= 0):
        return math.inf, math.inf
    g = mu_i / nu_i
    log_g = np.log(g)
    j_free = 0.0
    j_avg = 0.0
    for p in patterns:
        interior_ctx = [model.centers[s] for k, s in enumerate(sites) if p >> k & 1]
        for k, site in enumerate(sites):
            if p >> k & 1:
                continue
            up = p | (1 << k)
            factor = (g[up] - g[p]) * (log_g[up] - log_g[p])
            b_free = model.cell_volume * birth_rate(model.spec, model.centers[site],
                                                    interior_ctx)
            j_free += b_free * nu_i[p] * factor
            avg = 0.0
            for cb in range(1 << n_c):
                eta = _full_pattern(model, p, cb)
                avg += nu[eta] * model.birth(site, eta)
            j_avg += avg * factor
    return j_free, j_avg


def write_curves_csv(path, rows, header=("t", "entropy", "fisher")):
    """Write (t, I, J[, ...]) rows; floats via repr for exact replay diffs."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_oracle_report(path, model, residuals):
    """JSON report: model descriptor plus named residuals/values."""
    payload = {"model": model.describe(), "residuals": residuals}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
