"""Exhaustive energy-landscape analysis on small boxes.

Enumerates all spin configurations of a box, computes communication energies
by a sublevel sweep, partitions state sets into maximal cycles and maximal
cycle compounds, builds reference filling paths, and derives the critical
constants (droplet side, critical volume and barrier, relaxation exponents)
from the reference path energy profile.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .energy import NEG_INF_ENERGY, EnergyValue, MagneticField
from .lattice import (BoundaryCondition, Configuration,
                      connected_components, hamiltonian)
from .unionfind import UnionFind

DEFAULT_ENUMERATION_CAP = 24


class LandscapeGraph:
    """All 2^|box| configurations with exact energies and flip adjacency."""

    def __init__(self, ctx, bonds, pluses):
        self.ctx = ctx
        self.n_sites = ctx.n_sites
        self.n_states = 1 << self.n_sites
        self._bonds = bonds
        self._pluses = pluses

    def states(self):
        return range(self.n_states)

    def energy_pair(self, s):
        return EnergyValue(int(self._bonds[s]), int(self._pluses[s]), self.ctx.field)

    def neighbors(self, s):
        for i in range(self.n_sites):
            yield s ^ (1 << i)

    def configuration(self, s):
        return Configuration.from_bitmask(self.ctx.geometry, s)

    def state_of(self, config):
        return config.as_bitmask()


class TruncatedLandscape:
    """Flip-connected low-energy restriction of a landscape (a small state space)."""

    def __init__(self, graph, state_ids):
        self.ctx = graph.ctx
        self.n_sites = graph.n_sites
        self._graph = graph
        self._ids = sorted(state_ids)
        self._set = frozenset(self._ids)

    def states(self):
        return list(self._ids)

    def energy_pair(self, s):
        return self._graph.energy_pair(s)

    def neighbors(self, s):
        for t in self._graph.neighbors(s):
            if t in self._set:
                yield t

    def configuration(self, s):
        return self._graph.configuration(s)

    @property
    def n_states(self):
        return len(self._ids)


def enumerate_landscape(ctx, cap=DEFAULT_ENUMERATION_CAP):
    """Enumerate every configuration of the box with its exact energy.

    States are indexed by plus-bitmask (bit i = site i), so the ordering is
    deterministic.  Bond counts are computed in vectorized chunks.
    """
    n = ctx.n_sites
    if n > cap:
        raise ValueError(f"box has {n} sites, enumeration cap is {cap}")
    n_states = 1 << n
    pairs = []
    for i in range(n):
        for j in ctx.neighbors[i]:
            if j > i:
                pairs.append((i, j))
    site_weight = (ctx.boundary_minus - ctx.boundary_plus).astype(np.int64)
    bonds = np.empty(n_states, dtype=np.int64)
    pluses = np.empty(n_states, dtype=np.int64)
    chunk = 1 << 16
    for start in range(0, n_states, chunk):
        arr = np.arange(start, min(start + chunk, n_states), dtype=np.uint64)
        b = np.zeros(arr.shape, dtype=np.int64)
        p = np.zeros(arr.shape, dtype=np.int64)
        bits = [((arr >> np.uint64(i)) & np.uint64(1)).astype(np.int64)
                for i in range(n)]
        for i, j in pairs:
            b += bits[i] ^ bits[j]
        for i in range(n):
            b += bits[i] * site_weight[i]
            p += bits[i]
        bonds[start:start + arr.size] = b
        pluses[start:start + arr.size] = p
    return LandscapeGraph(ctx, bonds, pluses)


def _energy_levels(graph, states=None):
    """Distinct energy values ascending, each with its member states."""
    field = graph.ctx.field
    groups = {}
    for s in (states if states is not None else graph.states()):
        e = graph.energy_pair(s)
        groups.setdefault(field.level_key(e.bonds, e.pluses), [e, []])[1].append(s)
    levels = sorted(groups.values(), key=functools.cmp_to_key(
        lambda a, b: a[0]._cmp(b[0])))
    return [(e, members) for e, members in levels]


def communication_energy(graph, a_states, b_states):
    """Minimax energy over single-flip paths between two state sets.

    Sweeps the distinct energy levels ascending, joining states whose energy
    is at most the level, and returns the first level at which some component
    contains states of both sets.
    """
    a_set = set(a_states)
    b_set = set(b_states)
    if not a_set or not b_set:
        raise ValueError("communication energy needs non-empty state sets")
    ids = list(graph.states())
    index = {s: k for k, s in enumerate(ids)}
    uf = UnionFind(len(ids))
    active = [False] * len(ids)
    has_a = [s in a_set for s in ids]
    has_b = [s in b_set for s in ids]

    for level, members in _energy_levels(graph):
        for s in members:
            active[index[s]] = True
        for s in members:
            k = index[s]
            for t in graph.neighbors(s):
                kt = index.get(t)
                if kt is not None and active[kt]:
                    ra, rb = uf.find(k), uf.find(kt)
                    if ra != rb:
                        r = uf.union(ra, rb)
                        other = rb if r == ra else ra
                        has_a[r] = has_a[r] or has_a[other]
                        has_b[r] = has_b[r] or has_b[other]
        # joined components necessarily contain an active state of A
        for s in a_set:
            k = index[s]
            if active[k]:
                r = uf.find(k)
                if has_a[r] and has_b[r]:
                    return level
    raise RuntimeError("state graph is not connected")


@dataclass
class CycleBlock:
    """One block of a cycle / cycle-compound partition."""

    states: frozenset
    exit_energy: object        # EnergyValue, or None when the block has no exterior
    height: object             # EnergyValue or the -inf sentinel
    bottom: frozenset
    depth: object              # EnergyValue or None

    def is_singleton(self):
        return len(self.states) == 1


@dataclass
class CyclePartition:
    blocks: list
    kind: str
    tie_events: list = dc_field(default_factory=list)

    def block_of(self, state):
        for b in self.blocks:
            if state in b.states:
                return b
        raise KeyError(state)


def _block_stats(graph, states):
    """Exit energy, height, bottom and depth of one connected block."""
    states = frozenset(states)
    exit_energy = None
    for s in states:
        es = graph.energy_pair(s)
        for t in graph.neighbors(s):
            if t not in states:
                cand = max(es, graph.energy_pair(t))
                if exit_energy is None or cand < exit_energy:
                    exit_energy = cand
    energies = {s: graph.energy_pair(s) for s in states}
    emin = min(energies.values())
    bottom = frozenset(s for s, e in energies.items() if e == emin)
    height = NEG_INF_ENERGY if len(states) == 1 else max(energies.values())
    depth = exit_energy - emin if exit_energy is not None else None
    return CycleBlock(states, exit_energy, height, bottom, depth)


def _is_connected(graph, states):
    states = set(states)
    if not states:
        return False
    start = next(iter(states))
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        for t in graph.neighbors(s):
            if t in states and t not in seen:
                seen.add(t)
                stack.append(t)
    return seen == states


def maximal_cycles(graph, y_states):
    """Partition of Y into maximal cycles.

    A cycle with at least two states is a connected component of a sublevel
    set whose exterior neighbors all sit strictly above the level, so the
    partition falls out of an ascending sweep: after each level, any active
    component entirely inside Y is a cycle, and the last one recorded per
    state is the maximal one.
    """
    y_set = frozenset(y_states)
    ids = list(graph.states())
    index = {s: k for k, s in enumerate(ids)}
    uf = UnionFind(len(ids))
    active = [False] * len(ids)
    members = {k: [ids[k]] for k in range(len(ids))}
    bad = [0 if ids[k] in y_set else 1 for k in range(len(ids))]
    # every singleton of Y is a cycle, the fallback when any sublevel
    # component around it immediately leaks out of Y
    latest = {s: frozenset((s,)) for s in y_set}
    for level, level_members in _energy_levels(graph):
        for s in level_members:
            active[index[s]] = True
        for s in level_members:
            k = index[s]
            for t in graph.neighbors(s):
                kt = index.get(t)
                if kt is not None and active[kt]:
                    ra, rb = uf.find(k), uf.find(kt)
                    if ra != rb:
                        r = uf.union(ra, rb)
                        o = rb if r == ra else ra
                        members[r].extend(members.pop(o))
                        bad[r] += bad[o]
        for r in {uf.find(index[s]) for s in level_members}:
            if bad[r] == 0:
                snapshot = frozenset(members[r])
                for s in snapshot:
                    latest[s] = snapshot
    blocks = []
    seen = set()
    for s in sorted(y_set):
        blk = latest[s]
        if id(blk) not in seen:
            seen.add(id(blk))
            blocks.append(_block_stats(graph, blk))
    return CyclePartition(blocks=blocks, kind="cycles")


def maximal_compounds(graph, y_states):
    """Partition of Y into maximal cycle compounds.

    Starts from the maximal cycles and merges adjacent blocks whose exit
    energies are exactly equal, as long as the union still satisfies
    height <= exit energy, until no merge applies.  Every final block is
    re-verified against the compound definition.
    """
    part = maximal_cycles(graph, y_states)
    blocks = [b for b in part.blocks]
    tie_events = []
    irr = graph.ctx.field.is_irrational
    changed = True
    while changed:
        changed = False
        n = len(blocks)
        merged = False
        for i in range(n):
            if merged:
                break
            for j in range(i + 1, n):
                bi, bj = blocks[i], blocks[j]
                if bi.exit_energy is None or bj.exit_energy is None:
                    continue
                if bi.exit_energy != bj.exit_energy:
                    continue
                if not _adjacent(graph, bi.states, bj.states):
                    continue
                union = bi.states | bj.states
                stats = _block_stats(graph, union)
                if stats.exit_energy is not None and not (
                        stats.height <= stats.exit_energy):
                    continue
                if not irr and not bi.exit_energy.same_pair(bj.exit_energy):
                    tie_events.append((min(bi.states), min(bj.states),
                                       bi.exit_energy.pair(), bj.exit_energy.pair()))
                blocks = [b for k, b in enumerate(blocks) if k not in (i, j)]
                blocks.append(stats)
                merged = True
                changed = True
                break
    for b in blocks:
        if not _is_connected(graph, b.states):
            raise AssertionError("compound block is not connected")
        if b.exit_energy is not None and not (b.height <= b.exit_energy):
            raise AssertionError("compound block violates height <= exit energy")
    return CyclePartition(blocks=blocks, kind="compounds", tie_events=tie_events)


def _adjacent(graph, a_states, b_states):
    small, big = (a_states, b_states) if len(a_states) <= len(b_states) \
        else (b_states, a_states)
    for s in small:
        for t in graph.neighbors(s):
            if t in big:
                return True
    return False


def bottom_of(graph, states):
    """Energy minimizers of a non-empty state set."""
    states = list(states)
    if not states:
        raise ValueError("bottom of an empty set")
    emin = None
    out = []
    for s in states:
        e = graph.energy_pair(s)
        if emin is None or e < emin:
            emin = e
            out = [s]
        elif e == emin:
            out.append(s)
    return frozenset(out)


def truncate_landscape(graph, k):
    """Lowest-k-energy flip-connected piece of a landscape around its minimum."""
    order = sorted(graph.states(), key=functools.cmp_to_key(
        lambda a, b: graph.energy_pair(a)._cmp(graph.energy_pair(b)) or (a - b)))
    chosen = set(order[:k])
    start = order[0]
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        for t in graph.neighbors(s):
            if t in chosen and t not in seen:
                seen.add(t)
                stack.append(t)
    return TruncatedLandscape(graph, seen)


# -- reference paths ---------------------------------------------------------


def reference_path(ctx):
    """Filling path from all-minus to all-plus realizing the minimax barrier.

    Boxes without plus boundary faces grow a quasicube, filling a largest
    free face through the one-lower-dimensional path.  Boxes with plus faces
    use the greedy rule: flip a minus site with the maximum number of plus
    neighbors (boundary included), preferring the longest straight segment of
    such sites, ties broken by lexicographically smallest site.
    """
    if int(ctx.boundary_plus.sum()) == 0:
        return _recursive_reference_path(ctx)
    return _greedy_reference_path(ctx)


def _recursive_fill_order(dims):
    """Site order of the quasicube filling path in a box of the given dims."""
    d = len(dims)
    if d == 1:
        return [(i,) for i in range(dims[0])]
    order = [(0,) * d]
    sides = [1] * d
    while True:
        growable = [i for i in range(d) if sides[i] < dims[i]]
        if not growable:
            return order
        axis = min(growable, key=lambda i: (sides[i], i))
        face_dims = tuple(s for i, s in enumerate(sides) if i != axis)
        layer = sides[axis]
        for c in _recursive_fill_order(face_dims):
            order.append(c[:axis] + (layer,) + c[axis:])
        sides[axis] += 1


def _recursive_reference_path(ctx):
    geom = ctx.geometry
    spins = np.full(geom.n_sites, -1, dtype=np.int8)
    path = [Configuration(geom, spins)]
    for coord in _recursive_fill_order(geom.dims):
        spins[geom.index(coord)] = 1
        path.append(Configuration(geom, spins))
    return path


def _greedy_reference_path(ctx):
    geom = ctx.geometry
    n = geom.n_sites
    spins = np.full(n, -1, dtype=np.int8)
    plus_nbrs = ctx.boundary_plus.copy()
    path = [Configuration(geom, spins)]
    coords = [geom.coord(i) for i in range(n)]
    for _ in range(n):
        best = -1
        for i in range(n):
            if spins[i] == -1 and plus_nbrs[i] > best:
                best = plus_nbrs[i]
        cand = {i for i in range(n) if spins[i] == -1 and plus_nbrs[i] == best}
        site = _segment_choice(geom, coords, cand)
        spins[site] = 1
        for nb in ctx.neighbors[site]:
            plus_nbrs[nb] += 1
        path.append(Configuration(geom, spins))
    return path


def _segment_choice(geom, coords, candidates):
    """First site of the best maximal straight run inside the candidate set."""
    best = None  # (-length, start_coord, axis, start_site)
    for i in sorted(candidates):
        c = coords[i]
        for axis in range(geom.dimension):
            prev = list(c)
            prev[axis] -= 1
            if geom.contains(tuple(prev)) and geom.index(tuple(prev)) in candidates:
                continue  # not the start of a run
            length = 0
            cur = list(c)
            while geom.contains(tuple(cur)) and geom.index(tuple(cur)) in candidates:
                length += 1
                cur[axis] += 1
            key = (-length, c, axis, i)
            if best is None or key < best:
                best = key
    return best[3]


def path_energies(ctx, path):
    """Exact energies along a path, computed by telescoping single-flip deltas."""
    out = [hamiltonian(ctx, path[0])]
    for prev, cur in zip(path, path[1:]):
        diff = np.flatnonzero(prev.spins != cur.spins)
        if diff.size != 1:
            raise ValueError("consecutive path entries must differ by one flip")
        site = int(diff[0])
        sigma = int(prev.spins[site])
        s = ctx.neighbor_spin_sum(prev, site)
        out.append(out[-1] + ctx.energy(sigma * s, -sigma))
    return out


_PROFILE_CACHE = {}


def reference_profile_pairs(dims, field):
    """(bonds, pluses) pairs along the reference path of an all-minus box.

    Computed combinatorially: the path grows quasicubes by filling a largest
    free face through the one-lower-dimensional reference path, and the energy
    of a box plus a partial face layer splits exactly into box term plus
    lower-dimensional face term.  Matches the lattice greedy step for step.
    """
    dims = tuple(int(s) for s in dims)
    # the pair sequence is pure integers, independent of the field
    key = tuple(sorted(dims))
    cached = _PROFILE_CACHE.get(key)
    if cached is not None:
        return cached
    prof = list(iter_reference_profile(dims, field))
    _PROFILE_CACHE[key] = prof
    return prof


def iter_reference_profile(dims, field):
    """Generator form of the profile; only faces are materialized and cached."""
    dims = tuple(int(s) for s in dims)
    if len(dims) == 1:
        yield (0, 0)
        for k in range(1, dims[0] + 1):
            yield (2, k)
        return
    d = len(dims)
    yield (0, 0)
    yield (2 * d, 1)
    sides = [1] * d
    while True:
        growable = [i for i in range(d) if sides[i] < dims[i]]
        if not growable:
            return
        axis = min(growable, key=lambda i: (sides[i], i))
        face_dims = tuple(s for i, s in enumerate(sides) if i != axis)
        face = reference_profile_pairs(face_dims, field)
        vol = 1
        per = 0
        for i, s in enumerate(sides):
            vol *= s
            row = 1
            for j, t in enumerate(sides):
                if j != i:
                    row *= t
            per += 2 * row
        for fb, fp in face[1:]:
            yield (per + fb, vol + fp)
        sides[axis] += 1


# -- critical constants ------------------------------------------------------


def _floor_ratio(numer, field):
    """Exact floor(numer / h)."""
    if numer == 0:
        return 0
    if field.rational is not None:
        r = field.rational
        return (numer * r.denominator) // r.numerator
    # floor(numer * q / sqrt(p)) = isqrt((numer*q)^2 // p), exact for integers
    x = numer * field.q
    return math.isqrt((x * x) // field.p)


def critical_side(n, field):
    """Side length of the n-dimensional critical quasicube, floor(2(n-1)/h)."""
    return _floor_ratio(2 * (n - 1), field)


@dataclass
class CriticalConstants:
    """Per-dimension droplet constants: l_c, critical volume m, barrier Gamma,
    relaxation exponent kappa and box-size threshold L.

    Lists are indexed by dimension with zero entries at index 0.  kappa and L
    are Fractions for a rational field, floats otherwise.  ``argmax_ties``
    records the volumes tied for the barrier maximum (possible only for
    rational fields); ``m`` is then the smallest tied volume.
    """

    d: int
    field: MagneticField
    l_c: list
    m: list
    gammas: list
    kappas: list
    Ls: list
    argmax_ties: list
    box_sides: list

    def gamma_value(self, n):
        return self.gammas[n].exact_value() if n > 0 else (
            Fraction(0) if self.field.rational is not None else 0.0)

    def has_ties(self):
        return any(len(t) > 1 for t in self.argmax_ties if t)


def critical_constants(d, h, verify_oracle=True, oracle_cap=12):
    """Exact critical constants for dimensions 1..d under field h.

    Gamma_n is the maximum of the reference path profile on an n-dimensional
    cube whose side exceeds both l_c(n)+2 and 2n/h; m_n is the volume where
    the maximum is attained.  kappa and L follow by the recursions
    kappa_n = (Gamma_1 + ... + Gamma_n)/(n+1), L_n = (Gamma_n - kappa_n)/n.
    For n <= 2 (within the oracle cap) the barrier is cross-checked against
    the brute-force minimal-perimeter table.
    """
    field = h if isinstance(h, MagneticField) else MagneticField(h)
    zero = Fraction(0) if field.rational is not None else 0.0
    const = CriticalConstants(d=d, field=field, l_c=[0], m=[0],
                              gammas=[EnergyValue.zero(field)],
                              kappas=[zero], Ls=[zero], argmax_ties=[[]],
                              box_sides=[0])
    gamma_sum = zero
    for n in range(1, d + 1):
        lc = critical_side(n, field)
        side = max(lc + 3, _floor_ratio(2 * n, field) + 1)
        best = None
        best_vol = None
        ties = []
        for vol, (b, p) in enumerate(iter_reference_profile((side,) * n, field)):
            if vol == 0:
                continue
            e = EnergyValue(b, p, field)
            if best is None or e > best:
                best, best_vol, ties = e, vol, [vol]
            elif e == best:
                ties.append(vol)
        gamma = best
        m_n = best_vol
        gamma_sum = gamma_sum + gamma.exact_value()
        kappa = gamma_sum / (n + 1)
        L_n = (gamma.exact_value() - kappa) / n
        const.l_c.append(lc)
        const.m.append(m_n)
        const.gammas.append(gamma)
        const.kappas.append(kappa)
        const.Ls.append(L_n)
        const.argmax_ties.append(ties)
        const.box_sides.append(side)
        _check_sandwich(n, lc, gamma, field)
        if verify_oracle and n <= 2 and const.m[n] <= oracle_cap:
            _verify_against_perimeter_oracle(n, gamma, field, oracle_cap)
    if field.rational is None and const.has_ties():
        raise AssertionError("argmax tie under an irrational field")
    return const


def _check_sandwich(n, lc, gamma, field):
    low = EnergyValue(2 * n * lc ** (n - 1), (lc + 1) ** n, field)
    high = EnergyValue(2 * n * (lc + 1) ** (n - 1), lc ** n, field)
    if not (low <= gamma <= high):
        raise AssertionError(f"Gamma_{n} violates the quasicube sandwich bounds")


def _verify_against_perimeter_oracle(n, gamma, field, cap):
    from .isoperimetry import min_perimeter
    best = None
    for v in range(1, cap + 1):
        per = 2 if n == 1 else min_perimeter(n, v)
        e = EnergyValue(per, v, field)
        if best is None or e > best:
            best = e
    if not best.same_pair(gamma) and best != gamma:
        raise AssertionError(
            f"Gamma_{n} disagrees with the minimal-perimeter oracle: "
            f"path {gamma.pair()}, oracle {best.pair()}")


def control_inequality_report(const):
    """Report whether (Gamma_{n-1})^n <= (m_{n-1})^(n-1) holds for n <= d.

    This is the sufficient condition quoted for the small-field regime; it is
    reported, not asserted, since desk-scale fields routinely violate it.
    """
    rows = []
    for n in range(1, const.d + 1):
        lhs = float(const.gamma_value(n - 1)) ** n
        rhs = float(const.m[n - 1]) ** (n - 1)
        rows.append({"n": n, "lhs": lhs, "rhs": rhs, "holds": lhs <= rhs})
    return rows


def gamma_continuity_scan(d, h_grid):
    """Gamma_d on a grid of fields, with the largest adjacent jump reported."""
    rows = []
    for token in h_grid:
        field = token if isinstance(token, MagneticField) else MagneticField(str(token))
        const = critical_constants(d, field, verify_oracle=False)
        rows.append((field.token, float(const.gammas[d].value),
                     const.gammas[d].pair()))
    max_jump = 0.0
    for (_, a, _), (_, b, _) in zip(rows, rows[1:]):
        max_jump = max(max_jump, abs(b - a))
    return {"rows": rows, "max_jump": max_jump}


# -- restricted ensemble -----------------------------------------------------


class RestrictedEnsemble:
    """Configurations of volume <= m_n and energy <= Gamma_n in a box with
    the n-face-minus boundary condition: the metastable plateau."""

    def __init__(self, ctx, n, constants):
        if constants.field != ctx.field:
            raise ValueError("constants were computed for a different field")
        expected = BoundaryCondition.n_pm(n)
        if ctx.bc.kind == BoundaryCondition.ALL_MINUS:
            ok = n == ctx.geometry.dimension
        else:
            ok = ctx.bc.kind == BoundaryCondition.N_PM and ctx.bc.n == n
        if not ok:
            raise ValueError(f"context boundary {ctx.bc.label()} does not match "
                             f"{expected.label()}")
        self.ctx = ctx
        self.n = n
        self.max_volume = constants.m[n]
        self.energy_cap = constants.gammas[n]

    def contains_pair(self, bonds, pluses):
        if pluses > self.max_volume:
            return False
        gap = self.energy_cap
        return self.ctx.field.compare_pair(bonds - gap.bonds, pluses - gap.pluses) <= 0

    def contains(self, config):
        e = hamiltonian(self.ctx, config)
        return self.contains_pair(e.bonds, e.pluses)

    def members(self, cap=2_000_000):
        """All member bitmasks.

        Searches plus-sets by monotone growth up to the volume cap (never the
        full configuration space) and keeps those below the energy cap.  Note
        the full definition set is used: at moderate fields it may contain
        states at the barrier level that are not flip-connected to all-minus
        inside the ensemble.
        """
        geom = self.ctx.geometry
        ctx = self.ctx
        start = 0
        seen = {start: (0, 0)}
        frontier = [start]
        while frontier:
            s = frontier.pop()
            b, p = seen[s]
            if p >= self.max_volume:
                continue
            cfg = Configuration.from_bitmask(geom, s)
            for site in range(ctx.n_sites):
                if cfg.spins[site] == 1:
                    continue
                t = s | (1 << site)
                if t in seen:
                    continue
                ds = ctx.neighbor_spin_sum(cfg, site)
                seen[t] = (b - ds, p + 1)
                frontier.append(t)
                if len(seen) > cap:
                    raise ValueError("restricted ensemble exceeds enumeration cap")
        self._energies = seen
        return sorted(s for s, (b, p) in seen.items() if self.contains_pair(b, p))

    def weights(self, beta):
        """Gibbs weights of the members, normalized over the ensemble."""
        members = self.members()
        w = np.array([np.exp(-beta * EnergyValue(*self._energies[s],
                                                 self.ctx.field).value)
                      for s in members])
        w /= w.sum()
        return dict(zip(members, w))

    def as_state_set(self, graph):
        return frozenset(self.members())


def restricted_ensemble(ctx, n, constants):
    return RestrictedEnsemble(ctx, n, constants)


# -- domain hypothesis -------------------------------------------------------


@dataclass
class DomainReport:
    passed: bool
    failures: list


def domain_hypothesis_check(graph, d_states, v_max):
    """Check the three domain conditions: bounded volume, strictly positive
    component energies, and downward closure under energy-decreasing subsets."""
    d_set = frozenset(d_states)
    ctx = graph.ctx
    failures = []
    for s in d_set:
        cfg = graph.configuration(s)
        if cfg.plus_count() > v_max:
            failures.append(("volume", s, cfg.plus_count()))
            continue
        for comp, energy in connected_components(ctx, cfg):
            if energy.compare_zero() <= 0:
                failures.append(("component_energy", s, sorted(comp)))
        plus = cfg.plus_sites()
        e_s = graph.energy_pair(s)
        for sub_mask in range(1 << len(plus)):
            t = 0
            for k, site in enumerate(plus):
                if (sub_mask >> k) & 1:
                    t |= 1 << site
            if t == s:
                continue
            if graph.energy_pair(t) <= e_s and t not in d_set:
                failures.append(("downward_closure", s, t))
    return DomainReport(passed=not failures, failures=failures)


# -- export ------------------------------------------------------------------


def landscape_to_csv(graph, fh):
    writer = csv.writer(fh)
    writer.writerow(["state", "pattern", "bonds", "pluses"])
    for s in graph.states():
        cfg = graph.configuration(s)
        e = graph.energy_pair(s)
        writer.writerow([s, cfg.to_text().replace("\n", "|"), e.bonds, e.pluses])


def partition_to_csv(graph, partition, assign_fh, summary_fh):
    ids = {}
    for k, b in enumerate(partition.blocks):
        ids[k] = b
    writer = csv.writer(assign_fh)
    writer.writerow(["state", "block"])
    state_block = {}
    for k, b in ids.items():
        for s in b.states:
            state_block[s] = k
    for s in sorted(state_block):
        writer.writerow([s, state_block[s]])
    writer = csv.writer(summary_fh)
    writer.writerow(["block", "size", "exit_bonds", "exit_pluses",
                     "bottom_pattern", "depth_bonds", "depth_pluses"])
    for k, b in ids.items():
        exit_pair = b.exit_energy.pair() if b.exit_energy is not None else ("", "")
        depth_pair = b.depth.pair() if b.depth is not None else ("", "")
        bottom = graph.configuration(min(b.bottom)).to_text().replace("\n", "|")
        writer.writerow([k, len(b.states), exit_pair[0], exit_pair[1], bottom,
                         depth_pair[0], depth_pair[1]])
