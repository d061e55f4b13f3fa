"""Axis-aligned windows and indexed finite point configurations.

Windows are half-open boxes [lo, hi) in dimension 1 or 2.  Configurations
hold finitely many pairwise-distinct points together with a uniform-grid
bucket index so that fixed-radius neighbor queries stay local.
"""

from __future__ import annotations

import math

import numpy as np

SUPPORTED_DIMS = (1, 2)


class Window:
    """Half-open axis-aligned box [lo, hi).

    Args:
        lo: lower corner, length-d sequence with d in {1, 2}.
        hi: upper corner, strictly above lo componentwise.
    """

    __slots__ = ("lo", "hi", "_lo_t", "_hi_t")

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be vectors of equal length")
        if lo.shape[0] not in SUPPORTED_DIMS:
            raise ValueError("only dimensions 1 and 2 are supported")
        if not np.all(lo < hi):
            raise ValueError("window requires lo < hi componentwise")
        self.lo = lo
        self.hi = hi
        self._lo_t = tuple(float(c) for c in lo)
        self._hi_t = tuple(float(c) for c in hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    @property
    def sides(self):
        return self.hi - self.lo

    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def contains(self, x):
        """Half-open membership: on the lower face counts, upper face does not."""
        if isinstance(x, (int, float)):
            x = (x,)
        if len(x) != len(self._lo_t):
            raise ValueError("point dimension mismatch")
        for c, lo, hi in zip(x, self._lo_t, self._hi_t):
            if not lo <= c < hi:
                return False
        return True

    def dilate(self, r):
        """Grow the box by r on every face; r >= 0."""
        if r < 0:
            raise ValueError("dilation radius must be nonnegative")
        return Window(self.lo - r, self.hi + r)

    def __eq__(self, other):
        return (
            isinstance(other, Window)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __repr__(self):
        return "Window(lo=%s, hi=%s)" % (self.lo.tolist(), self.hi.tolist())


def make_window(lo, hi):
    """Build a half-open window [lo, hi)."""
    return Window(lo, hi)


class Configuration:
    """Finite simple point configuration with a uniform-grid index.

    Points are stored as float tuples and compared by exact equality; a
    duplicate insertion raises.  The grid cell size is
    max(range_hint, longest_side / 64) so that any query radius up to
    range_hint only needs the 3^d surrounding buckets.

    Args:
        window: domain the points live in.
        points: optional iterable of initial points.
        range_hint: largest radius neighbors_within must support; the cell
            size is at least this value.
    """

    def __init__(self, window, points=(), range_hint=0.0):
        self.window = window
        self.range_hint = float(range_hint)
        side = float(np.max(window.sides))
        self.cell_size = max(self.range_hint, side / 64.0)
        self._points = {}          # id -> tuple of floats
        self._id_by_point = {}     # tuple -> id
        self._buckets = {}         # cell tuple -> set of ids
        self._next_id = 0
        for p in points:
            self.insert(p)

    @property
    def dim(self):
        return self.window.dim

    def __len__(self):
        return len(self._points)

    def points(self):
        """All points in insertion order, as a list of tuples."""
        return list(self._points.values())

    def __contains__(self, x):
        return self._as_tuple(x) in self._id_by_point

    def _as_tuple(self, x):
        if type(x) is tuple and len(x) == self.dim:
            return x
        if isinstance(x, (int, float)):
            x = (x,)
        t = tuple(float(c) for c in x)
        if len(t) != self.dim:
            raise ValueError("point dimension mismatch")
        return t

    def _cell_of(self, p):
        return tuple(int(math.floor(c / self.cell_size)) for c in p)

    def insert(self, x):
        """Insert a point; rejects points outside the window or already present."""
        p = self._as_tuple(x)
        if not self.window.contains(p):
            raise ValueError("point %r outside window" % (p,))
        if p in self._id_by_point:
            raise ValueError("duplicate point %r" % (p,))
        pid = self._next_id
        self._next_id += 1
        self._points[pid] = p
        self._id_by_point[p] = pid
        self._buckets.setdefault(self._cell_of(p), set()).add(pid)
        return p

    def remove(self, x):
        """Remove a point present in the configuration (exact match)."""
        p = self._as_tuple(x)
        pid = self._id_by_point.pop(p, None)
        if pid is None:
            raise KeyError("point %r not in configuration" % (p,))
        del self._points[pid]
        cell = self._cell_of(p)
        bucket = self._buckets[cell]
        bucket.discard(pid)
        if not bucket:
            del self._buckets[cell]
        return p

    def neighbors_within(self, x, r):
        """Points y of the configuration with |y - x| <= r (Euclidean).

        Queries up to cell_size use the 3^d surrounding buckets; larger
        radii fall back to a full scan.  x itself is returned too when it
        is a stored point.
        """
        if r > self.cell_size + 1e-12:
            p = self._as_tuple(x)
            r2 = r * r
            return [q for pid, q in sorted(self._points.items())
                    if sum((qc - pc) ** 2 for qc, pc in zip(q, p)) <= r2]
        p = self._as_tuple(x)
        base = self._cell_of(p)
        ids = []
        if self.dim == 1:
            for dx in (-1, 0, 1):
                ids.extend(self._buckets.get((base[0] + dx,), ()))
        else:
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    ids.extend(self._buckets.get((base[0] + dx, base[1] + dy), ()))
        r2 = r * r
        out = []
        for pid in sorted(ids):
            q = self._points[pid]
            d2 = sum((qc - pc) ** 2 for qc, pc in zip(q, p))
            if d2 <= r2:
                out.append(q)
        return out

    def count(self, window):
        """Number of points inside a half-open window."""
        return sum(1 for p in self._points.values() if window.contains(p))

    def restrict(self, window):
        """New configuration holding the points inside window, same range hint."""
        kept = [p for p in self._points.values() if window.contains(p)]
        return Configuration(window, kept, range_hint=self.range_hint)

    def copy(self):
        return Configuration(self.window, self.points(), range_hint=self.range_hint)


def write_points_csv(path, config_or_points, dim=None):
    """Write points to CSV, one row per point, first line 'dim=<d>'.

    Floats are written with repr so the round-trip is exact.
    """
    if isinstance(config_or_points, Configuration):
        pts = config_or_points.points()
        dim = config_or_points.dim
    else:
        pts = [tuple(float(c) for c in p) for p in config_or_points]
        if dim is None:
            if not pts:
                raise ValueError("dim is required for empty point lists")
            dim = len(pts[0])
    with open(path, "w") as fh:
        fh.write("dim=%d\n" % dim)
        for p in pts:
            if len(p) != dim:
                raise ValueError("point dimension mismatch in CSV write")
            fh.write(",".join(repr(c) for c in p) + "\n")


def read_points_csv(path):
    """Read points written by write_points_csv; returns (points, dim)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ValueError("missing dim=<d> header in %s" % path)
        dim = int(header.split("=", 1)[1])
        if dim not in SUPPORTED_DIMS:
            raise ValueError("unsupported dimension %d" % dim)
        pts = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            vals = tuple(float(v) for v in line.split(","))
            if len(vals) != dim:
                raise ValueError("row arity does not match dim=%d" % dim)
            pts.append(vals)
    return pts, dim
