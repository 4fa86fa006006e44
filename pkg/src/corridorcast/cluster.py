"""Fuzzy hierarchical agglomerative clustering of corridor sensors.

Mainline sensors are merged bottom-up on a sparse distance table defined
over geographically neighboring pairs.  Distances follow single-linkage
between points (and between a point and a cluster) and complete-linkage
between clusters; since the table only links milepost-consecutive sensors,
every cluster stays a contiguous corridor segment.

Alongside the crisp merge tree, assigned points accumulate graded
memberships to nearby clusters: with d_min the point's smallest
single-linkage distance to any live cluster (its own included),

    mu(u, c) = d_min / (d(u, c) + d_min)

and the stored distance is re-clamped through
min((1 - log_m(mu)) * d, d), which can never increase it.  Merging stops
when the mean milepost span of the clusters would exceed the configured
limit, or when no mergeable pair remains.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dtw import DistanceTable
from .errors import ConfigError
from .panel import SensorKind, SensorMeta


@dataclass
class MembershipMatrix:
    """Graded sensor-to-cluster memberships plus the crisp lists they induce.

    `clusters[c]` holds exactly the sensors whose membership in cluster `c`
    reaches the threshold; a sensor's home cluster always has membership 1.
    """

    memberships: dict[tuple[int, int], float]
    clusters: list[list[int]]
    threshold: float
    merge_log: list[tuple[int, str, str, float]] = field(default_factory=list)

    def membership(self, sensor: int, cluster: int) -> float:
        return self.memberships.get((sensor, cluster), 0.0)

    def clusters_of(self, sensor: int) -> list[int]:
        return [c for c, members in enumerate(self.clusters) if sensor in members]


def fuzzy_update(d_current: float, all_cluster_distances, m: float) -> tuple[float, float]:
    """Membership and re-clamped distance for an assigned point and one cluster.

    Returns (mu, updated_distance).  The degenerate all-zero case pins the
    membership to 1 and the distance to 0.
    """
    if m <= 1.0:
        raise ConfigError(f"fuzziness parameter must exceed 1, got {m}")
    dists = [d for d in all_cluster_distances if d is not None]
    if not dists:
        raise ValueError("no cluster distances available")
    if min(dists) < 0 or d_current < 0:
        raise ValueError("distances must be nonnegative")
    d_min = min(dists)
    if d_current + d_min == 0.0:
        return 1.0, 0.0
    mu = d_min / (d_current + d_min)
    updated = min((1.0 - math.log(mu, m)) * d_current, d_current)
    return mu, updated


@dataclass
class _Cluster:
    cid: int
    members: list[int]

    def span(self, positions) -> float:
        pos = [positions[i] for i in self.members]
        return max(pos) - min(pos)


class ClusterState:
    """Working state of the agglomeration: distances, assignments, clusters."""

    def __init__(self, base: DistanceTable, positions: dict[int, float], m: float):
        if m <= 1.0:
            raise ConfigError(f"fuzziness parameter must exceed 1, got {m}")
        self.base = base
        self.positions = positions
        self.m = m
        self.points = sorted(positions)
        self.assigned: set[int] = set()
        self.clusters: list[_Cluster] = []
        self.fuzzy_mu: dict[tuple[int, int], float] = {}
        self.fuzzy_dist: dict[tuple[int, int], float] = {}
        self.merge_log: list[tuple[int, str, str, float]] = []
        self._next_cid = 0

    # -- linkage -------------------------------------------------------------

    def _point_cluster(self, u: int, c: _Cluster) -> float | None:
        """Single-linkage from point `u` to a cluster, skipping `u` itself."""
        best = None
        for v in c.members:
            if v == u:
                continue
            d = self.base.get(u, v)
            if d is not None and (best is None or d < best):
                best = d
        return best

    def _cluster_cluster(self, a: _Cluster, b: _Cluster) -> float | None:
        """Complete-linkage between two clusters over defined point pairs."""
        worst = None
        for u in a.members:
            for v in b.members:
                d = self.base.get(u, v)
                if d is not None and (worst is None or d > worst):
                    worst = d
        return worst

    def _home(self, u: int) -> _Cluster | None:
        for c in self.clusters:
            if u in c.members:
                return c
        return None

    def _cluster_distances_from(self, u: int) -> dict[int, float]:
        out = {}
        for c in self.clusters:
            d = self._point_cluster(u, c)
            if d is not None:
                out[c.cid] = d
        return out

    # -- merge candidates ------------------------------------------------------

    @staticmethod
    def _label(element) -> str:
        if isinstance(element, _Cluster):
            return "+".join(str(i) for i in sorted(element.members))
        return str(element)

    def _sort_key(self, element):
        if isinstance(element, _Cluster):
            return (min(element.members), 1, element.cid)
        return (element, 0, element)

    def candidates(self) -> list[tuple[float, tuple, object, object]]:
        """Mergeable pairs: unassigned points and live clusters."""
        free = [p for p in self.points if p not in self.assigned]
        items: list[tuple[float, tuple, object, object]] = []
        for ai in range(len(free)):
            for bi in range(ai + 1, len(free)):
                d = self.base.get(free[ai], free[bi])
                if d is not None:
                    items.append(self._entry(d, free[ai], free[bi]))
        for p in free:
            for c in self.clusters:
                d = self._point_cluster(p, c)
                if d is not None:
                    items.append(self._entry(d, p, c))
        for i in range(len(self.clusters)):
            for j in range(i + 1, len(self.clusters)):
                d = self._cluster_cluster(self.clusters[i], self.clusters[j])
                if d is not None:
                    items.append(self._entry(d, self.clusters[i], self.clusters[j]))
        return items

    def _entry(self, d, a, b):
        ka, kb = self._sort_key(a), self._sort_key(b)
        if kb < ka:
            a, b, ka, kb = b, a, kb, ka
        return (d, (ka, kb), a, b)

    def min_distance(self):
        items = self.candidates()
        if not items:
            return None
        return min(items, key=lambda e: (e[0], e[1]))

    # -- merging ----------------------------------------------------------------

    def _members_of(self, element) -> list[int]:
        return element.members if isinstance(element, _Cluster) else [element]

    def merge(self, a, b, distance: float) -> _Cluster:
        members = sorted(self._members_of(a) + self._members_of(b))
        new = _Cluster(self._next_cid, members)
        self._next_cid += 1
        for el in (a, b):
            if isinstance(el, _Cluster):
                self.clusters.remove(el)
                self._drop_cluster_records(el.cid)
            else:
                self.assigned.add(el)
        self.clusters.append(new)
        self.merge_log.append((len(self.merge_log) + 1, self._label(a), self._label(b),
                               float(distance)))
        self._fuzzy_round(new)
        return new

    def _drop_cluster_records(self, cid: int) -> None:
        for key in [k for k in self.fuzzy_mu if k[1] == cid]:
            del self.fuzzy_mu[key]
        for key in [k for k in self.fuzzy_dist if k[1] == cid]:
            del self.fuzzy_dist[key]

    def _fuzzy_round(self, new: _Cluster) -> None:
        """Refresh memberships touching the freshly formed cluster."""
        new_set = set(new.members)
        for u in sorted(self.assigned):
            if u in new_set:
                for c in self.clusters:
                    if c is new:
                        continue
                    self._update_pair(u, c)
            else:
                self._update_pair(u, new)

    def _update_pair(self, u: int, c: _Cluster) -> None:
        d = self._point_cluster(u, c)
        if d is None:
            return
        all_dists = self._cluster_distances_from(u)
        mu, updated = fuzzy_update(d, list(all_dists.values()), self.m)
        self.fuzzy_mu[(u, c.cid)] = mu
        self.fuzzy_dist[(u, c.cid)] = updated

    # -- stopping ----------------------------------------------------------------

    def mean_span_after(self, a, b) -> float:
        members = sorted(self._members_of(a) + self._members_of(b))
        spans = [c.span(self.positions) for c in self.clusters
                 if c is not a and c is not b]
        pos = [self.positions[i] for i in members]
        spans.append(max(pos) - min(pos))
        return float(np.mean(spans))


def fhc(distances: DistanceTable, meta, max_avg_span_miles: float = 10.0,
        threshold: float = 0.1, m: float = 2.0) -> MembershipMatrix:
    """Cluster mainline sensors over a neighbor-pair distance table.

    Repeatedly merges the closest mergeable pair (lowest index pair on ties)
    until the mean cluster span would exceed `max_avg_span_miles` or no pair
    is left; sensors never structurally merged become singleton clusters.
    """
    positions = {i: s.position for i, s in enumerate(meta)
                 if s.kind == SensorKind.MAINLINE}
    state = ClusterState(distances, positions, m)
    while True:
        best = state.min_distance()
        if best is None:
            break
        d, _, a, b = best
        if state.mean_span_after(a, b) > max_avg_span_miles:
            break
        state.merge(a, b, d)

    ordered = sorted(state.clusters, key=lambda c: min(c.members))
    singles = [p for p in state.points if p not in state.assigned]
    memberships: dict[tuple[int, int], float] = {}
    crisp: list[list[int]] = []
    for idx, c in enumerate(ordered):
        members = set(c.members)
        for u in c.members:
            memberships[(u, idx)] = 1.0
        for (u, cid), mu in state.fuzzy_mu.items():
            if cid == c.cid and u not in set(c.members):
                memberships[(u, idx)] = mu
                if mu >= threshold:
                    members.add(u)
        crisp.append(sorted(members))
    for p in singles:
        memberships[(p, len(crisp))] = 1.0
        crisp.append([p])
    return MembershipMatrix(memberships, crisp, threshold, state.merge_log)


def attach_ramps(mm: MembershipMatrix, meta) -> MembershipMatrix:
    """Attach ramp sensors to the home cluster of the closest mainline sensor."""
    mainline = [(i, s) for i, s in enumerate(meta) if s.kind == SensorKind.MAINLINE]
    ramps = [(i, s) for i, s in enumerate(meta) if s.kind != SensorKind.MAINLINE]
    if not ramps:
        return mm
    if not mainline:
        raise ConfigError("cannot attach ramps: no mainline sensors")
    home: dict[int, int] = {}
    for c, members in enumerate(mm.clusters):
        for u in members:
            if mm.membership(u, c) == 1.0 and u not in home:
                home[u] = c
    memberships = dict(mm.memberships)
    clusters = [list(members) for members in mm.clusters]
    for ri, rs in ramps:
        nearest = min(mainline, key=lambda it: (abs(it[1].position - rs.position), it[0]))[0]
        target = home[nearest]
        memberships[(ri, target)] = 1.0
        if ri not in clusters[target]:
            clusters[target] = sorted(clusters[target] + [ri])
    return MembershipMatrix(memberships, clusters, mm.threshold, list(mm.merge_log))


def clusters_to_csv(mm: MembershipMatrix, sensors: list[SensorMeta], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster_id", "sensor_id", "membership"])
        for c, members in enumerate(mm.clusters):
            for u in members:
                writer.writerow([c, sensors[u].id, repr(mm.membership(u, c))])


def merge_log_to_csv(mm: MembershipMatrix, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "a", "b", "distance"])
        for step, a, b, d in mm.merge_log:
            writer.writerow([step, a, b, repr(d)])


def clusters_from_csv(path: str, sensors: list[SensorMeta]) -> MembershipMatrix:
    """Rebuild a membership matrix from the exported cluster CSV."""
    by_id = {s.id: i for i, s in enumerate(sensors)}
    rows: list[tuple[int, int, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["cluster_id", "sensor_id", "membership"]:
            raise ConfigError("cluster file header must be cluster_id,sensor_id,membership")
        for row in reader:
            if row:
                rows.append((int(row[0]), by_id[row[1]], float(row[2])))
    n_clusters = max((c for c, _, _ in rows), default=-1) + 1
    clusters: list[list[int]] = [[] for _ in range(n_clusters)]
    memberships: dict[tuple[int, int], float] = {}
    for c, u, mu in rows:
        clusters[c].append(u)
        memberships[(u, c)] = mu
    return MembershipMatrix(memberships, [sorted(c) for c in clusters], threshold=0.1)
