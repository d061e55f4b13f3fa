"""Event-driven birth-and-death dynamics from seeded proposal noise.

A trajectory is built by a chronological sweep over proposal events: a
proposal (s, x, r, u) is accepted iff its mark u is at most the birth
rate b(x, state just before s); an accepted point lives on [s, s + r).
Initial points receive independent Exp(1) lifespans.  Because the noise
is a pure function of its seed, nested windows fed the restriction of
one stream stay perfectly coupled.

Simulation happens on the observation window dilated by a buffer
(default 6 R); an optional frozen boundary configuration outside the
simulation window contributes to rates but never dies.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Configuration, Window
from .interactions import birth_rate, conditional_energy, rate_bounds
from .noise import ProposalEvent, SeedSpec, generator, propose_events, shared_restriction

DEFAULT_BUFFER_RANGES = 6.0


@dataclass(frozen=True)
class Observable:
    """Bounded local function of a configuration.

    Args:
        name: label used in reports.
        support: window outside which added or removed points cannot
            change the value.
        fn: callable taking a Configuration and returning a float.
    """

    name: str
    support: Window
    fn: object

    def __call__(self, config):
        return float(self.fn(config))


class Trajectory:
    """Outcome of one sweep: point records (x, birth, death) plus metadata.

    Deaths beyond the horizon are kept exact when known (accepted events
    carry their lifespan); initial points carry their sampled lifespan.
    """

    def __init__(self, sim_window, observe_window, horizon, records,
                 n_proposals, n_accepted, range_hint):
        self.sim_window = sim_window
        self.observe_window = observe_window
        self.horizon = horizon
        self.records = tuple(records)
        self.n_proposals = n_proposals
        self.n_accepted = n_accepted
        self.range_hint = range_hint

    @property
    def dim(self):
        return self.sim_window.dim

    def state_at(self, t, window=None):
        """Configuration alive at time t (optionally restricted to window)."""
        if t < 0 or t > self.horizon:
            raise ValueError("t outside [0, horizon]")
        target = self.sim_window if window is None else window
        pts = [x for (x, birth, death) in self.records
               if birth <= t < death and target.contains(x)]
        return Configuration(target, pts, range_hint=self.range_hint)

    def restricted_records(self, window):
        """Sorted records with location inside window, for coupling checks."""
        return tuple(sorted(r for r in self.records if window.contains(r[0])))


def _rate(spec, x, live, boundary):
    """Birth rate at x given the live configuration and a frozen boundary."""
    if spec.kind == "ideal":
        return spec.z
    nbrs = live.neighbors_within(x, spec.interaction_range)
    if boundary is not None:
        nbrs = nbrs + boundary.neighbors_within(x, spec.interaction_range)
    return math.exp(-spec.beta * conditional_energy(spec, x, nbrs))


def _sweep(spec, sim_window, observe_window, horizon, events,
           init_points, init_lifespans, boundary, b_inf, b_sup):
    range_hint = spec.interaction_range
    live = Configuration(sim_window, range_hint=range_hint)
    records = []
    heap = []
    seq = 0
    for p, tau in zip(init_points, init_lifespans):
        p = live.insert(p)
        records.append((p, 0.0, float(tau)))
        heapq.heappush(heap, (float(tau), seq, p))
        seq += 1
    n_accepted = 0
    for ev in events:
        while heap and heap[0][0] < ev.s:
            _, _, p = heapq.heappop(heap)
            live.remove(p)
        b = _rate(spec, ev.x, live, boundary)
        assert b <= b_sup * (1.0 + 1e-12) + 1e-15, "birth rate above envelope"
        if ev.u <= b:
            p = live.insert(ev.x)
            death = ev.s + ev.r
            records.append((p, ev.s, death))
            heapq.heappush(heap, (death, seq, p))
            seq += 1
            n_accepted += 1
        elif b_inf > 0.0:
            assert ev.u > b_inf * (1.0 - 1e-12), "rejected mark below envelope"
    return Trajectory(sim_window, observe_window, horizon, records,
                      len(events), n_accepted, range_hint)


def _draw_init(init, sim_window, seed_spec):
    """Initial points and Exp(1) lifespans for the requested condition.

    init is 'empty', ('poisson', z), or an iterable of points.
    """
    rng = generator(seed_spec.child(tag=seed_spec.tag + "/init"))
    if init == "empty":
        return [], []
    if isinstance(init, tuple) and len(init) == 2 and init[0] == "poisson":
        z = float(init[1])
        n = int(rng.poisson(z * sim_window.volume()))
        coords = rng.uniform(sim_window.lo, sim_window.hi, size=(n, sim_window.dim))
        pts = [tuple(float(c) for c in coords[i]) for i in range(n)]
    else:
        pts = [tuple(float(c) for c in np.atleast_1d(p)) for p in init]
        for p in pts:
            if not sim_window.contains(p):
                raise ValueError("initial point %r outside simulation window" % (p,))
    lifespans = rng.exponential(1.0, len(pts))
    return pts, [float(t) for t in lifespans]


def _boundary_config(spec, sim_window, boundary):
    if boundary is None:
        return None
    pts = [tuple(float(c) for c in np.atleast_1d(p)) for p in boundary]
    if not pts:
        return None
    for p in pts:
        if sim_window.contains(p):
            raise ValueError("frozen boundary point %r inside simulation window" % (p,))
    holder = sim_window.dilate(max(spec.interaction_range, 1e-9))
    return Configuration(holder, pts, range_hint=spec.interaction_range)


def simulate(spec, window, horizon, seed_spec, init="empty", boundary=None,
             buffer=None, b_sup=None):
    """Run the dynamics observed on window over [0, horizon].

    Args:
        spec: InteractionSpec driving the birth rates.
        window: observation window; simulation covers its dilation.
        horizon: final time, >= 0.
        seed_spec: SeedSpec; events and initial condition derive from it.
        init: 'empty', ('poisson', z), or explicit points.
        boundary: optional frozen points outside the simulation window.
        buffer: dilation radius (default 6 * interaction range).
        b_sup: override of the proposal-mark envelope (must dominate the
            birth rate; used to share noise across coupled runs).
    """
    if buffer is None:
        buffer = DEFAULT_BUFFER_RANGES * spec.interaction_range
    sim_window = window.dilate(buffer) if buffer > 0 else window
    b_inf, b_sup_spec = rate_bounds(spec)
    if b_sup is None:
        b_sup = b_sup_spec
    elif b_sup < b_sup_spec:
        raise ValueError("b_sup override below the interaction envelope")
    events = propose_events(sim_window, horizon, b_sup, seed_spec)
    init_points, lifespans = _draw_init(init, sim_window, seed_spec)
    bcfg = _boundary_config(spec, sim_window, boundary)
    return _sweep(spec, sim_window, window, horizon, events,
                  init_points, lifespans, bcfg, b_inf, b_sup)


def simulate_coupled(spec, window, horizon, seed_spec, buffers, init="empty"):
    """Run the dynamics on nested windows under shared noise.

    All runs see the restriction of a single proposal stream drawn on the
    largest window and share initial points (with lifespans) where their
    windows overlap, so any disagreement on the observation window is due
    to information crossing the smaller buffer.

    Args:
        buffers: increasing dilation radii; one trajectory per buffer.

    Returns:
        List of trajectories, in the order of buffers.
    """
    buffers = [float(b) for b in buffers]
    if any(b2 <= b1 for b1, b2 in zip(buffers, buffers[1:])):
        raise ValueError("buffers must increase strictly")
    b_inf, b_sup = rate_bounds(spec)
    big = window.dilate(buffers[-1])
    events = propose_events(big, horizon, b_sup, seed_spec)
    init_points, lifespans = _draw_init(init, big, seed_spec)
    out = []
    for buf in buffers:
        sub = window.dilate(buf) if buf > 0 else window
        ev_sub = shared_restriction(events, sub)
        pts, taus = [], []
        for p, tau in zip(init_points, lifespans):
            if sub.contains(p):
                pts.append(p)
                taus.append(tau)
        out.append(_sweep(spec, sub, window, horizon, ev_sub,
                          pts, taus, None, b_inf, b_sup))
    return out


def trajectories_disagree(traj_a, traj_b, window=None):
    """Whether the two runs ever differ on the window before the horizon.

    Under shared noise the restricted states agree for every t in
    [0, horizon] iff the restricted point records agree, since a shared
    proposal is the only way a point can appear.
    """
    if window is None:
        window = traj_a.observe_window
    return traj_a.restricted_records(window) != traj_b.restricted_records(window)


def finite_speed_curve(spec, window, horizon, buffers, n_replicas, seed_spec,
                       init="empty", reference_factor=2.0):
    """Estimated disagreement probabilities against a wider reference run.

    For each buffer m, couples the run on window + m with a reference run
    on window + reference_factor * max(buffers) and reports the fraction
    of replicas whose restrictions to the window ever differ.

    Returns:
        List of (buffer, p_hat, se) with binomial standard errors.
    """
    buffers = [float(b) for b in buffers]
    all_buffers = buffers + [reference_factor * max(buffers)]
    hits = np.zeros(len(buffers), dtype=int)
    for rep in range(n_replicas):
        trajs = simulate_coupled(spec, window, horizon,
                                 seed_spec.child(replica=rep), all_buffers, init)
        ref = trajs[-1]
        for i, traj in enumerate(trajs[:-1]):
            if trajectories_disagree(traj, ref, window):
                hits[i] += 1
    out = []
    for i, buf in enumerate(buffers):
        p = hits[i] / n_replicas
        out.append((buf, p, math.sqrt(p * (1.0 - p) / n_replicas)))
    return out


def apply_generator(spec, f, eta, n_samples, seed_spec, boundary=None, domain=None):
    """Monte Carlo estimate of the generator applied to f at eta.

    The birth integral runs over the support of f dilated by the
    interaction range (points beyond it cannot change f); the death sum
    is exact.

    Args:
        f: Observable.
        eta: Configuration (mutated and restored during evaluation).
        n_samples: uniform quadrature sample count for the birth integral.
        domain: optional window to intersect the integration region with
            (the local-dynamics generator integrates only over its own
            simulation window).

    Returns:
        (estimate, standard error).
    """
    region = f.support.dilate(spec.interaction_range)
    if domain is not None:
        lo = np.maximum(region.lo, domain.lo)
        hi = np.minimum(region.hi, domain.hi)
        if not np.all(lo < hi):
            raise ValueError("observable support does not meet the domain")
        region = Window(lo, hi)
    if not (np.all(region.lo >= eta.window.lo - 1e-12)
            and np.all(region.hi <= eta.window.hi + 1e-12)):
        raise ValueError("eta's window must cover the integration region; "
                         "enlarge it or pass domain=eta.window")
    bcfg = None
    if boundary is not None:
        holder = region.dilate(2 * max(spec.interaction_range, 1e-9))
        pts = [tuple(float(c) for c in np.atleast_1d(p)) for p in boundary]
        if pts:
            bcfg = Configuration(holder, pts, range_hint=spec.interaction_range)
    rng = generator(seed_spec)
    base = f(eta)
    coords = rng.uniform(region.lo, region.hi, size=(n_samples, region.dim))
    vals = np.empty(n_samples)
    for i in range(n_samples):
        x = tuple(float(c) for c in coords[i])
        b = _rate(spec, x, eta, bcfg)
        p = eta.insert(x)
        vals[i] = b * (f(eta) - base)
        eta.remove(p)
    vol = region.volume()
    birth = vol * float(np.mean(vals)) if n_samples else 0.0
    se = vol * float(np.std(vals, ddof=1)) / math.sqrt(n_samples) if n_samples > 1 else 0.0
    death = 0.0
    for p in list(eta.points()):
        eta.remove(p)
        death += f(eta) - base
        eta.insert(p)
    return birth + death, se


def generator_power_mc(spec, f, eta, k, n_outer, seed_spec, n_inner=None,
                       boundary=None, domain=None):
    """Monte Carlo estimate of the k-fold generator applied to f at eta.

    Supports k in {0, 1, 2}.  For k = 2 each outer sample carries fresh
    inner sub-streams, so the outer samples are independent and the
    reported standard error covers the nested noise.
    """
    if k not in (0, 1, 2):
        raise ValueError("generator powers above 2 are not supported")
    if k == 0:
        return f(eta), 0.0
    if k == 1:
        return apply_generator(spec, f, eta, n_outer, seed_spec,
                               boundary=boundary, domain=domain)
    if n_inner is None:
        n_inner = n_outer
    R = spec.interaction_range
    region = f.support.dilate(2 * R)
    if domain is not None:
        lo = np.maximum(region.lo, domain.lo)
        hi = np.minimum(region.hi, domain.hi)
        region = Window(lo, hi)
    if not (np.all(region.lo >= eta.window.lo - 1e-12)
            and np.all(region.hi <= eta.window.hi + 1e-12)):
        raise ValueError("eta's window must cover the integration region; "
                         "enlarge it or pass domain=eta.window")
    rng = generator(seed_spec.child(tag=seed_spec.tag + "/outer"))
    coords = rng.uniform(region.lo, region.hi, size=(n_outer, region.dim))
    bcfg = None
    if boundary is not None:
        pts = [tuple(float(c) for c in np.atleast_1d(p)) for p in boundary]
        if pts:
            bcfg = Configuration(region.dilate(2 * max(R, 1e-9)), pts,
                                 range_hint=R)

    def inner(eta_now, sub):
        est, _ = apply_generator(spec, f, eta_now, n_inner, sub,
                                 boundary=boundary, domain=domain)
        return est

    samples = np.empty(n_outer)
    vol = region.volume()
    for i in range(n_outer):
        sub = seed_spec.child(tag="%s/inner/%d" % (seed_spec.tag, i))
        x = tuple(float(c) for c in coords[i])
        b = _rate(spec, x, eta, bcfg)
        base = inner(eta, sub.child(tag=sub.tag + "/base"))
        p = eta.insert(x)
        plus = inner(eta, sub.child(tag=sub.tag + "/plus"))
        eta.remove(p)
        term = vol * b * (plus - base)
        for q in list(eta.points()):
            eta.remove(q)
            minus = inner(eta, sub.child(tag=sub.tag + "/minus" + repr(q)))
            eta.insert(q)
            term += minus - base
        samples[i] = term
    est = float(np.mean(samples))
    se = float(np.std(samples, ddof=1)) / math.sqrt(n_outer) if n_outer > 1 else 0.0
    return est, se


def semigroup_expectation(spec, f, window, t, n_replicas, seed_spec,
                          init="empty", boundary=None, buffer=None):
    """Mean of f under the time-t law, estimated over fresh replicas.

    Returns:
        (mean, standard error).
    """
    vals = np.empty(n_replicas)
    for rep in range(n_replicas):
        traj = simulate(spec, window, t, seed_spec.child(replica=rep),
                        init=init, boundary=boundary, buffer=buffer)
        vals[rep] = f(traj.state_at(t))
    se = float(np.std(vals, ddof=1)) / math.sqrt(n_replicas) if n_replicas > 1 else 0.0
    return float(np.mean(vals)), se


def write_trajectory_csv(path, traj):
    """Dump a trajectory as 'kind,x0[,x1],time' rows in time order.

    Initial points appear as kind=init at time 0; deaths are written only
    when they happen before the horizon.
    """
    dim = traj.dim
    rows = []
    for (x, birth, death) in traj.records:
        kind = "init" if birth == 0.0 else "birth"
        rows.append((birth, 0 if kind == "init" else 1, kind, x))
        if death <= traj.horizon:
            rows.append((death, 2, "death", x))
    rows.sort(key=lambda r: (r[0], r[1]))
    cols = ["kind"] + ["x%d" % i for i in range(dim)] + ["time"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for t, _, kind, x in rows:
            fh.write(",".join([kind] + [repr(c) for c in x] + [repr(t)]) + "\n")


def read_trajectory_csv(path):
    """Read rows written by write_trajectory_csv.

    Returns:
        (records, dim) where records are (x, birth, death) with death set
        to +inf when no death row was recorded before the horizon.
    """
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "kind" or header[-1] != "time":
            raise ValueError("unrecognized trajectory CSV header in %s" % path)
        dim = len(header) - 2
        births = {}
        deaths = {}
        order = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            kind = parts[0]
            x = tuple(float(v) for v in parts[1:1 + dim])
            t = float(parts[1 + dim])
            if kind in ("init", "birth"):
                births[x] = t
                order.append(x)
            elif kind == "death":
                deaths[x] = t
            else:
                raise ValueError("unknown record kind %r" % kind)
    records = [(x, births[x], deaths.get(x, math.inf)) for x in order]
    return records, dim


def trajectory_from_records(records, sim_window, observe_window, horizon,
                            range_hint=0.0):
    """Rebuild a Trajectory around records read from CSV."""
    return Trajectory(sim_window, observe_window, horizon, records,
                      n_proposals=0, n_accepted=sum(1 for r in records if r[1] > 0.0),
                      range_hint=range_hint)
