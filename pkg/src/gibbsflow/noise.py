"""Reproducible proposal-event streams for the graphical construction.

Each stream is a pure function of a SeedSpec (root seed, replica id,
stream tag): the key of a counter-based Philox generator is derived by
hashing the three fields, so equal specs give bitwise-equal streams and
couplings can replay or restrict noise exactly.

A proposal event carries a time s, a location x, a lifespan r and an
acceptance mark u drawn uniformly on [0, b_sup].  Events on a window w
over a horizon T arrive at temporal rate b_sup * |w|; a proposal is
accepted by the sweep iff u <= birth rate at (x, current state), which
reproduces thinning from the unbounded mark measure because marks above
b_sup can never be accepted.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeedSpec:
    """Identifies one independent random stream.

    Args:
        root: experiment-level seed.
        replica: replica index within the experiment.
        tag: purpose label, e.g. 'events' or 'init'.
    """

    root: int
    replica: int = 0
    tag: str = "events"

    def child(self, replica=None, tag=None):
        return SeedSpec(
            self.root,
            self.replica if replica is None else replica,
            self.tag if tag is None else tag,
        )

    def key_words(self):
        """Two uint64 words hashed from (root, replica, tag)."""
        msg = ("%d|%d|%s" % (self.root, self.replica, self.tag)).encode()
        digest = hashlib.sha256(msg).digest()
        return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def generator(seed_spec):
    """Counter-based generator for the given stream identity."""
    return np.random.Generator(np.random.Philox(key=seed_spec.key_words()))


@dataclass(frozen=True)
class ProposalEvent:
    """One birth proposal: time s, location x, lifespan r, mark u."""

    s: float
    x: tuple
    r: float
    u: float


def propose_events(window, horizon, b_sup, seed_spec):
    """Draw the proposal events on window x [0, horizon], sorted by time.

    The count is Poisson(b_sup * |window| * horizon); times are uniform,
    locations uniform in the window, lifespans Exp(1), marks uniform on
    [0, b_sup].

    Args:
        window: spatial window the proposals land in.
        horizon: temporal horizon, >= 0.
        b_sup: uniform upper bound on the birth rate, > 0.
        seed_spec: stream identity.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if b_sup <= 0:
        raise ValueError("b_sup must be positive")
    rng = generator(seed_spec)
    n = int(rng.poisson(b_sup * window.volume() * horizon))
    times = np.sort(rng.uniform(0.0, horizon, n))
    coords = rng.uniform(window.lo, window.hi, size=(n, window.dim))
    lifespans = rng.exponential(1.0, n)
    marks = rng.uniform(0.0, b_sup, n)
    return [
        ProposalEvent(float(times[i]), tuple(float(c) for c in coords[i]),
                      float(lifespans[i]), float(marks[i]))
        for i in range(n)
    ]


def shared_restriction(events, window):
    """Events whose location falls in window, original order preserved.

    Restricting a stream drawn on a larger window yields exactly the
    stream the smaller window would see under shared noise.
    """
    return [ev for ev in events if window.contains(ev.x)]


def write_events_csv(path, events, dim):
    """Dump events as 's,x0[,x1],r,u' rows with an exact float round-trip."""
    cols = ["s"] + ["x%d" % i for i in range(dim)] + ["r", "u"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for ev in events:
            if len(ev.x) != dim:
                raise ValueError("event dimension mismatch")
            row = [repr(ev.s)] + [repr(c) for c in ev.x] + [repr(ev.r), repr(ev.u)]
            fh.write(",".join(row) + "\n")


def read_events_csv(path):
    """Read events written by write_events_csv; returns (events, dim)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "s" or header[-2:] != ["r", "u"]:
            raise ValueError("unrecognized event CSV header in %s" % path)
        dim = len(header) - 3
        if dim not in (1, 2):
            raise ValueError("unsupported event dimension %d" % dim)
        events = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            vals = [float(v) for v in line.split(",")]
            events.append(ProposalEvent(vals[0], tuple(vals[1:1 + dim]),
                                        vals[1 + dim], vals[2 + dim]))
    return events, dim
