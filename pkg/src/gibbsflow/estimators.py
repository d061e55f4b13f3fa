"""Statistical functionals of simulated point processes.

Correlation functions are estimated by small-box product counts; Janossy
densities by the truncated alternating inversion series over a cell
partition; relative entropy by capped occupancy discretization with a
symmetric Miller-Madow correction; moment bounds, ergodic spatial
averages and a Poisson variable-change distribution test round out the
toolkit.  All mean-type reports carry sample-sd/sqrt(n) errors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .geometry import Window
from .noise import generator


@dataclass(frozen=True)
class EstimatorReport:
    value: float
    std_error: float
    n_samples: int
    method: str

    def csv_row(self, name, params=""):
        return "%s,%s,%s,%s,%d" % (name, params, repr(self.value),
                                   repr(self.std_error), self.n_samples)


def _box_around(center, ell):
    c = np.atleast_1d(np.asarray(center, dtype=float))
    return Window(c - ell / 2.0, c + ell / 2.0)


def correlation_estimate(sampler, centers, ell, n_reps):
    """Product-count estimate of the n-point correlation at the centers.

    Args:
        sampler: callable replica_index -> Configuration.
        centers: n box centers; the side-ell boxes must be pairwise
            disjoint (and inside the sampler's window).
        ell: box side length.
        n_reps: replica count.

    Returns:
        EstimatorReport for the correlation value (product of box counts
        divided by the total box volume).
    """
    boxes = [_box_around(c, ell) for c in centers]
    for a, b in itertools.combinations(boxes, 2):
        if np.all(a.lo < b.hi) and np.all(b.lo < a.hi):
            raise ValueError("correlation boxes must be pairwise disjoint")
    n = len(boxes)
    vol = float(ell ** boxes[0].dim) ** n if boxes else 1.0
    prods = np.empty(n_reps)
    for rep in range(n_reps):
        cfg = sampler(rep)
        prod = 1.0
        for box in boxes:
            prod *= cfg.count(box)
        prods[rep] = prod
    mean = float(np.mean(prods)) / vol
    se = float(np.std(prods, ddof=1)) / math.sqrt(n_reps) / vol if n_reps > 1 else 0.0
    return EstimatorReport(mean, se, n_reps, "box-product/l=%g" % ell)


class BoxCounts:
    """Per-replica occupancy counts over a disjoint cell partition of a window.

    The partition has n_cells equal cells along each axis; counts is an
    (n_reps, total_cells) integer array.  This is the empirical substrate
    for the correlation table feeding the Janossy inversion.
    """

    def __init__(self, window, n_cells, counts):
        self.window = window
        self.n_cells = n_cells
        self.counts = np.asarray(counts)
        total = n_cells ** window.dim
        if self.counts.ndim != 2 or self.counts.shape[1] != total:
            raise ValueError("counts must be (n_reps, n_cells^dim)")

    @property
    def n_reps(self):
        return self.counts.shape[0]

    @property
    def cell_volume(self):
        return float(np.prod(self.window.sides / self.n_cells))

    def cell_index(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        rel = (x - self.window.lo) / (self.window.sides / self.n_cells)
        idx = np.floor(rel).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.n_cells):
            raise ValueError("point outside the partitioned window")
        flat = 0
        for k in idx:
            flat = flat * self.n_cells + int(k)
        return flat


def collect_box_counts(sampler, window, n_cells, n_reps):
    """Tabulate per-replica cell counts of sampler output on the window."""
    total = n_cells ** window.dim
    counts = np.zeros((n_reps, total), dtype=np.int64)
    edges = window.sides / n_cells
    for rep in range(n_reps):
        cfg = sampler(rep)
        for p in cfg.points():
            if not window.contains(p):
                continue
            idx = np.floor((np.asarray(p) - window.lo) / edges).astype(int)
            idx = np.minimum(idx, n_cells - 1)
            flat = 0
            for k in idx:
                flat = flat * n_cells + int(k)
            counts[rep, flat] += 1
    return BoxCounts(window, n_cells, counts)


def _ordered_tuple_sums(counts, max_k):
    """Per-replica sums over ordered distinct cell tuples of count products.

    S_0 = 1, S_1 = p1, S_2 = p1^2 - p2, S_3 = p1^3 - 3 p1 p2 + 2 p3,
    with p_j the j-th power sums of the per-cell counts.
    """
    c = counts.astype(float)
    p1 = c.sum(axis=1)
    p2 = (c ** 2).sum(axis=1)
    p3 = (c ** 3).sum(axis=1)
    out = [np.ones_like(p1), p1]
    if max_k >= 2:
        out.append(p1 ** 2 - p2)
    if max_k >= 3:
        out.append(p1 ** 3 - 3.0 * p1 * p2 + 2.0 * p3)
    return out[:max_k + 1]


def janossy_from_correlations(box_counts, n, fixed_cells=(), K=3):
    """Truncated alternating inversion for the n-point Janossy density.

    The k-th term integrates the (n+k)-point correlation over the window,
    realized as grid sums over distinct cells excluding the fixed ones
    (per-replica, through power-sum identities, so the reported SE is the
    replica-level standard error).

    Args:
        box_counts: BoxCounts table.
        n: Janossy order; fixed_cells must hold n distinct cell indices.
        K: truncation order, <= 3.

    Returns:
        (EstimatorReport, truncation_bound, terms_decreasing_flag).
    """
    if K > 3 or K < 0:
        raise ValueError("truncation order K must be in [0, 3]")
    fixed = tuple(fixed_cells)
    if len(fixed) != n or len(set(fixed)) != n:
        raise ValueError("need n distinct fixed cells")
    counts = box_counts.counts
    keep = np.ones(counts.shape[1], dtype=bool)
    fixed_prod = np.ones(counts.shape[0])
    for c in fixed:
        keep[c] = False
        fixed_prod = fixed_prod * counts[:, c]
    sums = _ordered_tuple_sums(counts[:, keep], K)
    vol = box_counts.cell_volume
    term_means = []
    stat = np.zeros(counts.shape[0])
    for k in range(K + 1):
        term = ((-1.0) ** k / math.factorial(k)) * fixed_prod * sums[k] / vol ** n
        stat = stat + term
        term_means.append(float(np.mean(term)))
    value = float(np.mean(stat))
    se = float(np.std(stat, ddof=1)) / math.sqrt(len(stat)) if len(stat) > 1 else 0.0
    trunc = abs(term_means[-1])
    magnitudes = [abs(t) for t in term_means]
    decreasing = all(b <= a + 1e-12 for a, b in zip(magnitudes, magnitudes[1:]))
    report = EstimatorReport(value, se, counts.shape[0], "janossy-inversion/K=%d" % K)
    return report, trunc, decreasing


def psi_density(zeta_cells, box_counts, K=3):
    """Density estimate of the evolved law against its Poisson reference.

    For a nonempty argument (given as distinct cell indices) this is
    e^{|W|} j_n at those cells; for the empty argument it is e^{|W|}
    times the truncated void-probability series.

    Returns:
        (EstimatorReport, truncation_bound, terms_decreasing_flag).
    """
    scale = math.exp(box_counts.window.volume())
    report, trunc, decreasing = janossy_from_correlations(
        box_counts, len(tuple(zeta_cells)), zeta_cells, K)
    scaled = EstimatorReport(scale * report.value, scale * report.std_error,
                             report.n_samples, "psi/" + report.method)
    return scaled, scale * trunc, decreasing


class OccupancyLaw:
    """Empirical law of capped cell-occupancy vectors.

    Counts above the cap are clamped to it; the clamped mass is reported
    separately as overflow.
    """

    def __init__(self, window, n_cells, cap, samples):
        self.window = window
        self.n_cells = n_cells
        self.cap = cap
        freq = {}
        overflow = 0
        edges = window.sides / n_cells
        total = n_cells ** window.dim
        for cfg in samples:
            vec = [0] * total
            for p in cfg.points():
                if not window.contains(p):
                    continue
                idx = np.floor((np.asarray(p) - window.lo) / edges).astype(int)
                idx = np.minimum(idx, n_cells - 1)
                flat = 0
                for k in idx:
                    flat = flat * n_cells + int(k)
                vec[flat] += 1
            if any(v > cap for v in vec):
                overflow += 1
            key = tuple(min(v, cap) for v in vec)
            freq[key] = freq.get(key, 0) + 1
        self.n_samples = len(samples)
        self.freq = freq
        self.overflow_fraction = overflow / max(1, len(samples))

    def prob(self, key):
        return self.freq.get(key, 0) / self.n_samples

    @property
    def support_size(self):
        return len(self.freq)


def rel_entropy_discretized(samples_mu, samples_nu, window, n_cells, cap=8):
    """Discretized relative entropy of two sample sets on a shared window.

    Plug-in KL between the capped occupancy laws, with the Miller-Madow
    occupied-bin correction applied symmetrically to the two empirical
    laws (so identical sample sets give exactly zero) and clamped at 0.

    Returns:
        (EstimatorReport, details dict with plug-in value, overflow
        fractions and the count of mu-bins unseen under nu; the value is
        +inf when that count is positive).
    """
    law_mu = OccupancyLaw(window, n_cells, cap, samples_mu)
    law_nu = OccupancyLaw(window, n_cells, cap, samples_nu)
    plug_in = 0.0
    missing = 0
    for key, cnt in law_mu.freq.items():
        p = cnt / law_mu.n_samples
        q = law_nu.prob(key)
        if q == 0.0:
            missing += 1
        else:
            plug_in += p * math.log(p / q)
    details = {
        "plug_in": plug_in if missing == 0 else math.inf,
        "overflow_mu": law_mu.overflow_fraction,
        "overflow_nu": law_nu.overflow_fraction,
        "mu_bins_missing_in_nu": missing,
    }
    if missing > 0:
        return EstimatorReport(math.inf, 0.0, law_mu.n_samples,
                               "occupancy-kl/unmatched-bins"), details
    corrected = plug_in \
        - (law_mu.support_size - 1) / (2.0 * law_mu.n_samples) \
        + (law_nu.support_size - 1) / (2.0 * law_nu.n_samples)
    value = max(0.0, corrected)
    # replica-level spread of the log-ratio drives the reported SE
    per = []
    for key, cnt in law_mu.freq.items():
        p = cnt / law_mu.n_samples
        per.extend([math.log(p / law_nu.prob(key))] * cnt)
    se = float(np.std(per, ddof=1)) / math.sqrt(len(per)) if len(per) > 1 else 0.0
    return EstimatorReport(value, se, law_mu.n_samples, "occupancy-kl/mm"), details


def moment_bound(k, volume, c1=1.0, c2=1.0, c3=1.0, t=0.0):
    """Bound c3 e^t c2^{|D|/k} k / log(1 + k/(c1 |D|)) on E[N^k]^{1/k}."""
    return c3 * math.exp(t) * c2 ** (volume / k) * k / math.log1p(k / (c1 * volume))


def moment_check(counts, volume, k_max, constants=(1.0, 1.0, 1.0), t=0.0):
    """Empirical k-th moment roots against the tail bound, k = 1..k_max.

    Args:
        counts: per-sample occupancy counts of the probe window.
        volume: probe window volume |D|.
        constants: (c1, c2, c3).
        t: evolution time; inflates c3 to e^t c3.

    Returns:
        (rows, all_ok) where rows are (k, empirical, se, bound, ok) and
        ok means empirical <= bound + 3 se.
    """
    if k_max > 6:
        raise ValueError("k_max above 6 is too noisy to test")
    counts = np.asarray(counts, dtype=float)
    n = len(counts)
    c1, c2, c3 = constants
    rows = []
    all_ok = True
    for k in range(1, k_max + 1):
        pk = counts ** k
        mk = float(np.mean(pk))
        se_mk = float(np.std(pk, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        emp = mk ** (1.0 / k)
        # delta method for the k-th root
        se = se_mk / k * mk ** (1.0 / k - 1.0) if mk > 0 else 0.0
        bound = moment_bound(k, volume, c1, c2, c3, t)
        ok = emp <= bound + 3.0 * se
        all_ok = all_ok and ok
        rows.append((k, emp, se, bound, ok))
    return rows, all_ok


def ergodic_average(config, h, windows, support_radius):
    """Spatial averages of a rooted observable over growing windows.

    For each window W the statistic is
        (1/|W|) sum over points x in W of h(points within support_radius
        of x, shifted so x sits at the origin, x removed).

    Args:
        config: Configuration sampled on a window covering every W
            dilated by support_radius.
        h: callable on an (k, dim) array of relative coordinates.
        windows: increasing probe windows.

    Returns:
        List of averages, one per window.
    """
    pts = np.asarray(config.points(), dtype=float)
    out = []
    for w in windows:
        grown = w.dilate(support_radius)
        if not (np.all(grown.lo >= config.window.lo - 1e-9)
                and np.all(grown.hi <= config.window.hi + 1e-9)):
            raise ValueError("sample window too small for probe window plus support")
        total = 0.0
        if len(pts):
            inside = np.all((pts >= w.lo) & (pts < w.hi), axis=1)
            for i in np.flatnonzero(inside):
                x = pts[i]
                d2 = np.sum((pts - x) ** 2, axis=1)
                mask = (d2 <= support_radius ** 2)
                mask[i] = False
                total += float(h(pts[mask] - x))
        out.append(total / w.volume())
    return out


def _merge_small_bins(obs_a, obs_b, min_expected=5.0):
    """Merge paired histogram cells until pooled expectations reach 5."""
    items = sorted(zip(obs_a, obs_b), key=lambda ab: ab[0] + ab[1])
    merged = []
    acc_a = acc_b = 0
    n_a, n_b = float(sum(obs_a)), float(sum(obs_b))
    for a, b in items:
        acc_a += a
        acc_b += b
        pooled = (acc_a + acc_b) * n_a / (n_a + n_b)
        pooled_b = (acc_a + acc_b) * n_b / (n_a + n_b)
        if pooled >= min_expected and pooled_b >= min_expected:
            merged.append((acc_a, acc_b))
            acc_a = acc_b = 0
    if acc_a or acc_b:
        if merged:
            last_a, last_b = merged.pop()
            merged.append((last_a + acc_a, last_b + acc_b))
        else:
            merged.append((acc_a, acc_b))
    return merged


def two_sample_chi_square(obs_a, obs_b):
    """Homogeneity chi-square for two paired count vectors.

    Returns:
        (statistic, dof, p_value) after merging bins with pooled
        expectation below 5.
    """
    merged = _merge_small_bins(list(obs_a), list(obs_b))
    n_a = float(sum(a for a, _ in merged))
    n_b = float(sum(b for _, b in merged))
    stat = 0.0
    for a, b in merged:
        tot = a + b
        ea = tot * n_a / (n_a + n_b)
        eb = tot * n_b / (n_a + n_b)
        stat += (a - ea) ** 2 / ea + (b - eb) ** 2 / eb
    dof = max(1, len(merged) - 1)
    return stat, dof, float(stats.chi2.sf(stat, dof))


def poisson_ks_pvalue(samples, mean):
    """Conservative discrete KS test of integer samples against Poisson."""
    samples = np.asarray(samples)
    n = len(samples)
    hi = int(samples.max()) + 1
    ks = np.arange(hi + 1)
    emp = np.searchsorted(np.sort(samples), ks, side="right") / n
    ref = stats.poisson.cdf(ks, mean)
    d = float(np.max(np.abs(emp - ref)))
    return float(stats.kstwobign.sf(d * math.sqrt(n))), d


def variable_change_test(volume, t, n_reps, seed_spec, cap=8):
    """Distributional identity test for the marked-Poisson change of variables.

    LEFT: omega ~ Poisson(|W|) with Exp(1) marks; survivors keep marks
    above t; zeta ~ Poisson(|W|) independent; chi = survivors + zeta.
    RIGHT: chi ~ Poisson((1+p_t)|W|) thinned with retention 1/(1+p_t)
    into the zeta-part, remainder the survivor-part (an auxiliary
    Poisson((1-p_t)|W|) carries the dead marks).  Compares the joint law
    of (survivor count, zeta count) by two-sample chi-square on a capped
    grid and the chi count against its Poisson law by a conservative KS.

    Returns:
        dict with chi-square statistic/dof/p-value, KS p-values for both
        sides, and p_t.
    """
    p_t = math.exp(-t)
    rng = generator(seed_spec)
    n_omega = rng.poisson(volume, n_reps)
    left_surv = rng.binomial(n_omega, p_t)
    left_zeta = rng.poisson(volume, n_reps)
    n_chi = rng.poisson((1.0 + p_t) * volume, n_reps)
    right_zeta = rng.binomial(n_chi, 1.0 / (1.0 + p_t))
    right_surv = n_chi - right_zeta
    # auxiliary dead-part draw completes the right-hand construction
    rng.poisson((1.0 - p_t) * volume, n_reps)

    def joint_hist(surv, zeta):
        hist = np.zeros((cap + 1) * (cap + 1), dtype=int)
        s = np.minimum(surv, cap)
        z = np.minimum(zeta, cap)
        np.add.at(hist, s * (cap + 1) + z, 1)
        return hist

    stat, dof, p_joint = two_sample_chi_square(
        joint_hist(left_surv, left_zeta), joint_hist(right_surv, right_zeta))
    mean_chi = (1.0 + p_t) * volume
    ks_left, _ = poisson_ks_pvalue(left_surv + left_zeta, mean_chi)
    ks_right, _ = poisson_ks_pvalue(n_chi, mean_chi)
    return {
        "chi2_stat": stat,
        "chi2_dof": dof,
        "chi2_p": p_joint,
        "ks_p_left": ks_left,
        "ks_p_right": ks_right,
        "p_t": p_t,
    }


def write_estimates_csv(path, rows):
    """Rows of 'estimator,params,value,se,n' with a fixed header."""
    with open(path, "w") as fh:
        fh.write("estimator,params,value,se,n\n")
        for row in rows:
            fh.write(row + "\n")
