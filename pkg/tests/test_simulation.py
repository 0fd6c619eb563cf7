from collections import Counter

import numpy as np
import pytest

from equivoice.elections import stv, weighted_voting
from equivoice.simulation import (
    BlocSpec,
    CycleSpec,
    ElectorateSpec,
    ExtremistSpec,
    SimulationError,
    adversarial_spec,
    generate_electorate,
    generate_reading_log,
    sample_electorate,
    table1_fixture,
    table1_spec,
    window_events,
)

# per-rank counts for Items 1..5 in the fixture
TABLE1 = {
    "Item 1": (30, 20, 30, 17, 3),
    "Item 2": (9, 30, 15, 38, 8),
    "Item 3": (20, 20, 25, 30, 5),
    "Item 4": (19, 30, 30, 15, 6),
    "Item 5": (22, 0, 0, 0, 78),
}


def test_table1_marginals_match_rank_counts():
    prof = table1_fixture()
    counts = {c: [0] * 5 for c in TABLE1}
    for b in prof:
        for r, c in enumerate(b.ranking):
            counts[c][r] += 1
    assert {c: tuple(v) for c, v in counts.items()} == TABLE1


def test_table1_columns_total_100():
    prof = table1_fixture()
    assert prof.n == 100
    for r in range(5):
        assert sum(TABLE1[c][r] for c in TABLE1) == 100


def test_table1_pinned_next_choices():
    prof = table1_fixture()
    for b in prof:
        if b.ranking[0] == "Item 2":
            assert b.ranking[1] == "Item 1"
        if b.ranking[0] in ("Item 1", "Item 2"):
            assert b.rank_of("Item 4") < b.rank_of("Item 3")


def test_table1_spec_first_choices():
    prof, _ = generate_electorate(table1_spec(0))
    firsts = Counter(b.ranking[0] for b in prof)
    assert [firsts[f"Item {i}"] for i in range(1, 6)] == [30, 9, 20, 19, 22]


def test_all_silent_gives_no_events():
    prof, events = generate_electorate(ElectorateSpec(50, 6, silent_fraction=1.0, seed=1))
    assert events == [] and prof.n == 50 and prof.m == 6


def test_generation_is_deterministic():
    spec = adversarial_spec(3, n_voters=2000)
    a, ea = generate_electorate(spec)
    b, eb = generate_electorate(spec)
    assert a == b and ea == eb


def test_hyperactive_minority_wins_wv_not_stv():
    spec = ElectorateSpec(
        n_voters=1000, m_candidates=8, k=1, silent_fraction=0.5,
        blocs=(BlocSpec(0.6, ("c1",)), BlocSpec(0.3, ("c2",))),
        extremists=(ExtremistSpec("c8", 0.001, 0.5, supporter_activity=1000),), seed=2,
    )
    prof, events = generate_electorate(spec)
    assert weighted_voting(events, 1).winners == ("c8",)
    assert stv(prof, 1).winners != ("c8",)


def test_extremist_dislike_and_support():
    spec = adversarial_spec(0, n_voters=2000)
    prof, _ = generate_electorate(spec)
    ext = spec.extremists[0].candidate
    col = prof.pool.index(ext)
    assert (prof.positions[:, col] == 1).sum() == 100
    assert (prof.positions[:, col] == prof.m).sum() >= 0.9 * 2000


@pytest.mark.parametrize("bad", [
    dict(blocs=(BlocSpec(0.7, ("c1",)), BlocSpec(0.5, ("c2",)))),
    dict(blocs=(BlocSpec(0.5, ("c1", "zz")),)),
    dict(silent_fraction=1.5),
    dict(blocs=(BlocSpec(0.5, tuple(f"c{i}" for i in range(1, 7))),), m_candidates=5),
])
def test_invalid_specs(bad):
    base = dict(n_voters=10, m_candidates=6)
    base.update(bad)
    with pytest.raises(SimulationError):
        generate_electorate(ElectorateSpec(**base))


def test_spec_dict_roundtrip():
    spec = adversarial_spec(4)
    assert ElectorateSpec.from_dict(spec.to_dict()) == spec


def test_window_single_window_raw_counts():
    recs = [{"ts": 1, "voter": "u", "item": "a"}, {"ts": 2, "voter": "v", "item": "b", "count": 3}]
    cycles = window_events(recs, CycleSpec(900, 5))
    assert len(cycles) == 1
    assert cycles[0].pool.candidates == ("b", "a")
    assert cycles[0].pool.usage_previous == (0, 0)


def test_window_jump_rule():
    recs = ([{"ts": 0, "voter": "u", "item": "x", "count": 50}, {"ts": 0, "voter": "u", "item": "y", "count": 5}]
            + [{"ts": 10, "voter": "u", "item": "x", "count": 10}, {"ts": 10, "voter": "u", "item": "y", "count": 40}])
    cycles = window_events(recs, CycleSpec(10, 2))
    assert cycles[1].pool.candidates == ("y", "x")


def test_window_three_windows_manual_recount():
    stream = {0: {"a": 5, "b": 1}, 1: {"a": 2, "b": 6, "c": 4}, 2: {"c": 9, "a": 2}}
    recs = [{"ts": w * 60 + 1, "voter": f"u{w}", "item": c, "count": k} for w, d in stream.items() for c, k in d.items()]
    cycles = window_events(recs, CycleSpec(60, 2))
    # jumps: w0 a+5 b+1; w1 b+5 c+4 a-3; w2 c+5 a+0
    assert [c.pool.candidates for c in cycles] == [("a", "b"), ("b", "c"), ("c", "a")]
    assert sum(sum(c.counts.values()) for c in cycles) == sum(sum(d.values()) for d in stream.values())


def test_window_relative_mode_and_gaps():
    recs = [{"ts": 0, "voter": "u", "item": "a", "count": 4}, {"ts": 250, "voter": "u", "item": "a", "count": 9},
            {"ts": 250, "voter": "u", "item": "b", "count": 3}]
    cycles = window_events(recs, CycleSpec(100, 5, "relative"))
    assert len(cycles) == 3 and cycles[1].pool is None
    # a: 9/(0+1), b: 3/(0+1)
    assert cycles[2].pool.candidates == ("a", "b")


def test_window_empty_stream():
    assert window_events([], CycleSpec(10, 3)) == []


def test_cycle_spec_validation():
    with pytest.raises(SimulationError):
        CycleSpec(0, 5)
    with pytest.raises(SimulationError):
        CycleSpec(10, 5, "ratio")


def test_sample_electorate():
    prof = table1_fixture()
    assert sample_electorate(prof, 1.0, 0) == prof
    assert sample_electorate(prof, 0.5, 0).n == 50
    with pytest.raises(SimulationError):
        sample_electorate(prof, 0.0, 0)


def test_sample_overlap_statistics():
    prof, _ = generate_electorate(ElectorateSpec(400, 5, silent_fraction=1.0, seed=0))
    overlaps = []
    for s in range(60):
        a = set(sample_electorate(prof, 0.5, 2 * s).voters)
        b = set(sample_electorate(prof, 0.5, 2 * s + 1).voters)
        overlaps.append(len(a & b))
    # expected fraction * n * fraction = 100
    assert abs(np.mean(overlaps) - 100) < 5


def test_reading_log_shape():
    log = generate_reading_log(20, 10, z=2, density=0.5, seed=1)
    assert len(log.entries) == 20 * 5
    assert log.true_scores.shape == (20, 10)
    assert all(v > 0 for _, _, v in log.entries)
