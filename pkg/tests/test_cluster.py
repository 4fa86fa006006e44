import numpy as np
import pytest

from corridorcast import cluster as cl
from corridorcast.dtw import DistanceTable
from corridorcast.errors import ConfigError
from corridorcast.panel import SensorKind, SensorMeta


def metas(positions, kinds=None):
    kinds = kinds or [SensorKind.MAINLINE] * len(positions)
    return [SensorMeta(f"S{i}", p, k) for i, (p, k) in enumerate(zip(positions, kinds))]


def table(entries):
    t = DistanceTable()
    for (i, j), d in entries.items():
        t.set(i, j, d)
    return t


# -- fuzzy_update -------------------------------------------------------------


def test_fuzzy_update_nearest_cluster_half():
    mu, updated = cl.fuzzy_update(2.0, [2.0, 5.0], m=2.0)
    assert mu == 0.5
    assert updated == 2.0  # (1 - log2(0.5)) * 2 = 4, clamped back to 2


def test_fuzzy_update_far_cluster():
    mu, updated = cl.fuzzy_update(6.0, [2.0, 6.0], m=2.0)
    assert mu == 0.25
    assert updated == 6.0  # factor 3 gives 18, clamp keeps 6


def test_fuzzy_update_degenerate_zero():
    mu, updated = cl.fuzzy_update(0.0, [0.0], m=2.0)
    assert mu == 1.0 and updated == 0.0


def test_fuzzy_update_rejects_bad_m():
    with pytest.raises(ConfigError):
        cl.fuzzy_update(1.0, [1.0], m=1.0)


def test_fuzzy_update_clamp_property(rng):
    # the re-clamped distance can never exceed the current distance
    for _ in range(10_000):
        d_min = float(rng.uniform(0, 10))
        d = d_min + float(rng.uniform(0, 10))
        m = float(rng.uniform(1.01, 5.0))
        extra = [d_min + float(rng.uniform(0, 10)) for _ in range(int(rng.integers(0, 3)))]
        mu, updated = cl.fuzzy_update(d, [d_min, d] + extra, m)
        assert updated <= d + 1e-15
        assert 0.0 <= mu <= 1.0


# -- the four-sensor fixture --------------------------------------------------------

FOUR = table({(0, 1): 1.0, (1, 2): 10.0, (2, 3): 1.0})


def test_four_sensor_trace_span_limited():
    mm = cl.fhc(FOUR, metas([0.0, 1.0, 2.0, 3.0]), max_avg_span_miles=2.0)
    assert mm.merge_log == [(1, "0", "1", 1.0), (2, "2", "3", 1.0)]
    assert mm.clusters == [[0, 1], [2, 3]]
    assert mm.membership(0, 0) == 1.0 and mm.membership(3, 1) == 1.0
    # cross memberships exist but sit below the 0.1 threshold: 1/(10+1)
    assert 0.0 < mm.memberships.get((1, 1), 0.0) == pytest.approx(1.0 / 11.0)


def test_four_sensor_trace_unconstrained():
    mm = cl.fhc(FOUR, metas([0.0, 1.0, 2.0, 3.0]), max_avg_span_miles=10.0)
    assert mm.merge_log == [(1, "0", "1", 1.0), (2, "2", "3", 1.0),
                            (3, "0+1", "2+3", 10.0)]
    assert mm.clusters == [[0, 1, 2, 3]]
    assert all(mm.membership(i, 0) == 1.0 for i in range(4))


def test_zero_distance_pair_merges_first():
    mm = cl.fhc(table({(0, 1): 0.0}), metas([0.0, 0.5]), max_avg_span_miles=10.0)
    assert mm.clusters == [[0, 1]]
    assert mm.membership(0, 0) == 1.0 and mm.membership(1, 0) == 1.0


def test_empty_table_gives_singletons():
    mm = cl.fhc(DistanceTable(), metas([0.0, 1.0, 2.0]), max_avg_span_miles=10.0)
    assert mm.clusters == [[0], [1], [2]]
    assert all(mm.membership(i, i) == 1.0 for i in range(3))
    assert mm.merge_log == []


def test_bad_fuzziness_rejected():
    with pytest.raises(ConfigError):
        cl.fhc(FOUR, metas([0.0, 1.0, 2.0, 3.0]), m=1.0)


# -- six-sensor fixture with cross memberships ------------------------------------

SIX = table({(0, 1): 1.0, (1, 2): 1.5, (2, 3): 4.0, (3, 4): 1.0, (4, 5): 1.2})


def test_six_sensor_cross_memberships():
    mm = cl.fhc(SIX, metas([float(i) for i in range(6)]), max_avg_span_miles=2.5)
    assert mm.merge_log == [(1, "0", "1", 1.0), (2, "3", "4", 1.0),
                            (3, "3+4", "5", 1.2), (4, "0+1", "2", 1.5)]
    # cluster 0 = {0,1,2} plus sensor 3 at mu = 1/(4+1); cluster 1 = {3,4,5}
    # plus sensor 2 at mu = 1.5/(4+1.5)
    assert mm.clusters == [[0, 1, 2, 3], [2, 3, 4, 5]]
    assert mm.membership(3, 0) == pytest.approx(0.2)
    assert mm.membership(2, 1) == pytest.approx(1.5 / 5.5)
    assert mm.clusters_of(2) == [0, 1]


def test_memberships_in_unit_interval_and_home_one():
    mm = cl.fhc(SIX, metas([float(i) for i in range(6)]), max_avg_span_miles=2.5)
    assert all(0.0 <= mu <= 1.0 for mu in mm.memberships.values())
    for sensor in range(6):
        assert max(mm.membership(sensor, c) for c in range(len(mm.clusters))) == 1.0


def test_determinism():
    runs = [cl.fhc(SIX, metas([float(i) for i in range(6)]), max_avg_span_miles=2.5)
            for _ in range(2)]
    assert runs[0].clusters == runs[1].clusters
    assert runs[0].merge_log == runs[1].merge_log
    assert runs[0].memberships == runs[1].memberships


def random_corridor(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 21))
    gaps = rng.uniform(0.2, 1.5, size=n - 1)
    positions = np.concatenate([[0.0], np.cumsum(gaps)])
    entries = {(i, i + 1): float(rng.uniform(0.1, 8.0)) for i in range(n - 1)}
    span = float(rng.uniform(1.0, positions[-1] + 1.0))
    return table(entries), metas(positions.tolist()), span


@pytest.mark.parametrize("seed", range(50))
def test_contiguity_on_random_corridors(seed):
    t, meta, span = random_corridor(seed)
    mm = cl.fhc(t, meta, max_avg_span_miles=span)
    for members in mm.clusters:
        assert members == list(range(members[0], members[-1] + 1))
    for mu in mm.memberships.values():
        assert 0.0 <= mu <= 1.0


def test_mean_span_bounded_on_random_corridors():
    for seed in range(20):
        t, meta, span = random_corridor(seed + 1000)
        mm = cl.fhc(t, meta, max_avg_span_miles=span)
        positions = [m.position for m in meta]
        multi = [c for c in mm.clusters
                 if len([u for u in c if mm.membership(u, mm.clusters.index(c)) == 1.0]) > 1]
        home_clusters = []
        for idx, c in enumerate(mm.clusters):
            home = [u for u in c if mm.membership(u, idx) == 1.0]
            if len(home) > 1:
                home_clusters.append(home)
        if home_clusters:
            spans = [max(positions[u] for u in h) - min(positions[u] for u in h)
                     for h in home_clusters]
            assert np.mean(spans) <= span + 1e-12


# -- ramps --------------------------------------------------------------------------


def test_attach_ramp_to_nearest_mainline():
    meta = metas([0.0, 5.0, 5.1, 10.0],
                 kinds=[SensorKind.MAINLINE, SensorKind.MAINLINE,
                        SensorKind.ON_RAMP, SensorKind.MAINLINE])
    base = cl.fhc(table({(0, 1): 1.0, (1, 3): 2.0}), meta, max_avg_span_miles=30.0)
    assert base.clusters == [[0, 1, 3]]
    mm = cl.attach_ramps(base, meta)
    assert mm.clusters == [[0, 1, 2, 3]]
    assert mm.membership(2, 0) == 1.0


def test_attach_ramps_identity_without_ramps():
    meta = metas([0.0, 1.0])
    base = cl.fhc(table({(0, 1): 1.0}), meta)
    mm = cl.attach_ramps(base, meta)
    assert mm.clusters == base.clusters and mm.memberships == base.memberships


def test_attach_ramp_tie_breaks_to_lower_index():
    meta = metas([0.0, 2.0, 1.0],
                 kinds=[SensorKind.MAINLINE, SensorKind.MAINLINE, SensorKind.OFF_RAMP])
    base = cl.fhc(table({}), meta, max_avg_span_miles=5.0)
    assert base.clusters == [[0], [1]]
    mm = cl.attach_ramps(base, meta)
    assert mm.clusters == [[0, 2], [1]]


def test_attach_ramps_requires_mainline():
    meta = metas([0.0], kinds=[SensorKind.ON_RAMP])
    mm = cl.MembershipMatrix({}, [], 0.1)
    with pytest.raises(ConfigError):
        cl.attach_ramps(mm, meta)


# -- exports --------------------------------------------------------------------------


def test_csv_roundtrip(tmp_path):
    meta = metas([float(i) for i in range(6)])
    mm = cl.fhc(SIX, meta, max_avg_span_miles=2.5)
    cpath = str(tmp_path / "clusters.csv")
    mpath = str(tmp_path / "merges.csv")
    cl.clusters_to_csv(mm, meta, cpath)
    cl.merge_log_to_csv(mm, mpath)
    again = cl.clusters_from_csv(cpath, meta)
    assert again.clusters == mm.clusters
    for c, members in enumerate(mm.clusters):  # exported rows cover crisp members
        for u in members:
            assert again.memberships[(u, c)] == pytest.approx(mm.membership(u, c))
    lines = open(mpath).read().strip().splitlines()
    assert lines[0] == "step,a,b,distance"
    assert len(lines) == 5
