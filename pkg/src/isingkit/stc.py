"""Online space-time cluster tracking over flip trajectories.

A space-time point (x, t) with a plus spin connects to simultaneous plus
points at nearest-neighbor sites and to plus points at the same site over a
plus-persistent time interval.  The tracker keeps, per live cluster, the
maximal per-site plus intervals, an exact bounding box for the sup-norm
diameter, and the times at which the diameter grew; merges only ever combine
clusters.  Coordinates are global (box origin included), so ledgers from
shared-stream runs on different boxes or boundaries are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .unionfind import UnionFind


@dataclass
class ClusterView:
    """Immutable summary of one finished or live cluster."""

    cid: int
    segments: frozenset        # (coord, t_on, t_off or None while open)
    lo: tuple
    hi: tuple
    birth: float
    death: float               # None while alive at the horizon
    diameter: int


class StcLedger:
    def __init__(self, ctx, t_end):
        self.ctx = ctx
        self.t_end = t_end
        self.uf = UnionFind()
        self._records = {}         # root -> record dict
        self.diameter_events = []  # (time, root, new diameter)
        self.crossing_times = {}   # axis -> first time a cluster spans the box

    # -- bookkeeping -----------------------------------------------------

    def _new_cluster(self, t):
        cid = self.uf.add()
        d = self.ctx.geometry.dimension
        self._records[cid] = {
            "segments": [], "open": {}, "lo": [None] * d, "hi": [None] * d,
            "birth": t, "death": None, "live": 0,
        }
        return cid

    def _diam(self, rec):
        if rec["lo"][0] is None:
            return 0
        return max(h - l for l, h in zip(rec["lo"], rec["hi"]))

    def _check_crossing(self, root, t):
        rec = self._records[root]
        geom = self.ctx.geometry
        origin = self.ctx.origin
        for axis in range(geom.dimension):
            if axis in self.crossing_times:
                continue
            if rec["lo"][axis] is None:
                continue
            if rec["lo"][axis] <= origin[axis] and \
                    rec["hi"][axis] >= origin[axis] + geom.dims[axis] - 1:
                self.crossing_times[axis] = t

    def _merge(self, roots, t):
        roots = list(dict.fromkeys(self.uf.find(r) for r in roots))
        main = roots[0]
        rec = self._records[main]
        for other in roots[1:]:
            self.uf.union(main, other)
            orec = self._records.pop(other)
            rec["segments"].extend(orec["segments"])
            rec["open"].update(orec["open"])
            rec["live"] += orec["live"]
            rec["birth"] = min(rec["birth"], orec["birth"])
            for a in range(len(rec["lo"])):
                if orec["lo"][a] is not None:
                    if rec["lo"][a] is None or orec["lo"][a] < rec["lo"][a]:
                        rec["lo"][a] = orec["lo"][a]
                    if rec["hi"][a] is None or orec["hi"][a] > rec["hi"][a]:
                        rec["hi"][a] = orec["hi"][a]
        root = self.uf.find(main)
        if root != main:
            self._records[root] = self._records.pop(main)
        return root

    def _open_site(self, coord, t, cluster_roots):
        # diameter growth is judged against the parts before any merge, so a
        # merge-driven jump is always recorded
        if cluster_roots:
            before = max(self._diam(self._records[r]) for r in cluster_roots)
            fresh = False
            root = self._merge(cluster_roots, t)
        else:
            before = 0
            fresh = True
            root = self._new_cluster(t)
        rec = self._records[root]
        rec["open"][coord] = t
        rec["live"] += 1
        for a, c in enumerate(coord):
            if rec["lo"][a] is None or c < rec["lo"][a]:
                rec["lo"][a] = c
            if rec["hi"][a] is None or c > rec["hi"][a]:
                rec["hi"][a] = c
        after = self._diam(rec)
        if fresh or after > before:
            self.diameter_events.append((t, root, after))
        self._check_crossing(root, t)
        return root

    def _close_site(self, root, coord, t):
        rec = self._records[root]
        t_on = rec["open"].pop(coord)
        rec["segments"].append((coord, t_on, t))
        rec["live"] -= 1
        if rec["live"] == 0:
            rec["death"] = t

    # -- queries -----------------------------------------------------------

    def clusters(self):
        out = []
        for root, rec in sorted(self._records.items()):
            segs = [(c, a, b) for c, a, b in rec["segments"]]
            segs += [(c, a, None) for c, a in rec["open"].items()]
            out.append(ClusterView(
                cid=root, segments=frozenset(segs),
                lo=tuple(rec["lo"]), hi=tuple(rec["hi"]),
                birth=rec["birth"], death=rec["death"],
                diameter=self._diam(rec)))
        return out

    def all_segments(self):
        """Every maximal per-site plus interval, open ones clipped at t_end."""
        segs = []
        for rec in self._records.values():
            for c, a, b in rec["segments"]:
                segs.append((c, a, b))
            for c, a in rec["open"].items():
                segs.append((c, a, self.t_end))
        return segs

    def max_diameter(self):
        return max((self._diam(rec) for rec in self._records.values()), default=0)


def track(ctx, trajectory, initial_stc=None):
    """Build the space-time cluster ledger of a trajectory.

    A plus flip opens the site's interval and joins the live clusters at its
    plus neighbors; a minus flip closes the interval, and a cluster dies once
    no member site remains plus.  ``initial_stc`` optionally groups the
    initial plus components into pre-existing clusters (a group may span
    several components, mirroring clusters inherited from an earlier run).
    """
    ledger = StcLedger(ctx, trajectory.t_end)
    geom = ctx.geometry
    spins = trajectory.initial.spins.copy()
    live = {}

    groups = _initial_groups(ctx, trajectory.initial, initial_stc)
    for group in groups:
        root = None
        for site in group:
            roots = [live[nb] for nb in ctx.neighbors[site] if nb in live]
            if root is not None:
                roots.append(root)
            root = ledger._open_site(ctx.global_coord(site), 0.0,
                                     [ledger.uf.find(r) for r in roots])
            live[site] = root
            for s in list(live):
                live[s] = ledger.uf.find(live[s])

    for t, site, new_spin in trajectory.events:
        if spins[site] == new_spin:
            raise ValueError("inconsistent trajectory: flip to current value")
        spins[site] = new_spin
        if new_spin == 1:
            roots = {ledger.uf.find(live[nb])
                     for nb in ctx.neighbors[site] if nb in live}
            root = ledger._open_site(ctx.global_coord(site), t, sorted(roots))
            live[site] = root
            for s in list(live):
                live[s] = ledger.uf.find(live[s])
        else:
            root = ledger.uf.find(live.pop(site))
            ledger._close_site(root, ctx.global_coord(site), t)
    return ledger


def _initial_groups(ctx, config, initial_stc):
    if initial_stc is not None:
        return [list(group) for group in initial_stc]
    from .lattice import connected_components
    return [sorted(comp) for comp, _ in connected_components(ctx, config)]


# -- windowed diameter ---------------------------------------------------------


def _clip_segments(segments, s, t):
    out = []
    for coord, a, b in segments:
        if a > t or b <= s:
            continue
        lo = max(a, s)
        hi = min(b, t)
        closed = b > t
        out.append((coord, lo, hi, closed))
    return out


def _contains(seg, x):
    _, lo, hi, closed = seg
    return lo <= x < hi or (x == hi and closed and x >= lo)


def _overlap(s1, s2):
    m = max(s1[1], s2[1])
    mm = min(s1[2], s2[2])
    if mm > m:
        return True
    if mm < m:
        return False
    return _contains(s1, m) and _contains(s2, m)


def diam_infty_window(ledger, s, t):
    """Windowed cluster diameter: clusters of the trajectory re-cut at s and
    t; clusters touching either window face contribute their diameters as a
    sum, the others only through their maximum.  Satisfies the triangle
    inequality over interior cut points."""
    if not 0.0 <= s < t <= ledger.t_end:
        raise ValueError("window outside the tracked horizon")
    segs = _clip_segments(ledger.all_segments(), s, t)
    if not segs:
        return 0
    by_coord = {}
    for k, seg in enumerate(segs):
        by_coord.setdefault(seg[0], []).append(k)
    uf = UnionFind(len(segs))
    d = len(segs[0][0])
    for k, seg in enumerate(segs):
        coord = seg[0]
        for axis in range(d):
            for step in (-1, 1):
                nb = list(coord)
                nb[axis] += step
                for j in by_coord.get(tuple(nb), ()):
                    if j < k and _overlap(seg, segs[j]):
                        uf.union(k, j)
    comps = {}
    for k, seg in enumerate(segs):
        comps.setdefault(uf.find(k), []).append(seg)
    total_meeting = 0
    max_other = 0
    for members in comps.values():
        lo = list(members[0][0])
        hi = list(members[0][0])
        meets = False
        for coord, a, b, closed in members:
            for axis in range(d):
                lo[axis] = min(lo[axis], coord[axis])
                hi[axis] = max(hi[axis], coord[axis])
            if _contains((coord, a, b, closed), s) or \
                    _contains((coord, a, b, closed), t):
                meets = True
        diam = max(h - l for l, h in zip(lo, hi))
        if meets:
            total_meeting += diam
        else:
            max_other = max(max_other, diam)
    return max(total_meeting, max_other)


# -- crossings and doubling -----------------------------------------------------


def crossing_time(ledger, axis):
    """First time some cluster's spatial projection spans the two opposite
    faces of the tracked box along the axis, or None."""
    return ledger.crossing_times.get(axis)


def crossing_detected(ledger, axis):
    return axis in ledger.crossing_times


def doubling_extraction(ledger, threshold):
    """Earliest moment a cluster's diameter reaches the threshold.

    Requires the threshold to be at least the largest initial-cluster
    diameter; a merge at most doubles the running maximum (plus the merging
    site), so the witness diameter lands in [threshold, 2*threshold].
    Returns (time, cluster id, diameter) or None if never reached.
    """
    initial_max = max((diam for t, _, diam in ledger.diameter_events
                       if t == 0.0), default=0)
    if threshold < initial_max:
        raise ValueError("threshold below the largest initial cluster diameter")
    for t, root, diam in ledger.diameter_events:
        if diam >= threshold:
            if diam > 2 * threshold:
                raise AssertionError("merge growth bound violated")
            return (t, root, diam)
    return None


# -- discrete-path clusters ---------------------------------------------------


def discrete_path_clusters(ctx, configs):
    """Space-time clusters of a discrete path of configurations.

    Points (x, i) with plus spin connect to plus neighbors at the same index
    and to the same site at adjacent indices.  Returns a label per point.
    """
    uf = UnionFind()
    labels = {}
    for i, cfg in enumerate(configs):
        for site in cfg.plus_sites():
            labels[(site, i)] = uf.add()
        for site in cfg.plus_sites():
            for nb in ctx.neighbors[site]:
                if (nb, i) in labels and nb < site:
                    uf.union(labels[(site, i)], labels[(nb, i)])
            if i > 0 and (site, i - 1) in labels:
                uf.union(labels[(site, i)], labels[(site, i - 1)])
    return {point: uf.find(lbl) for point, lbl in labels.items()}
