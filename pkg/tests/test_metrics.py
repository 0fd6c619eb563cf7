import math

import numpy as np
import pytest

from equivoice.core import CandidatePool, PreferenceProfile
from equivoice.elections import VoteEvent, plurality_star, stv
from equivoice.metrics import (
    DemographicData,
    DemographicVector,
    MetricError,
    anti_plurality_index,
    check_solid_coalition,
    choice_distribution,
    demographic_bias,
    enumerate_solid_coalitions,
    item_voters,
    jaccard_overlap,
    metrics_report,
    under_representation,
    user_satisfaction_index,
)
from equivoice.simulation import table1_fixture


def uniform_profile(n, m, seed=0):
    rng = np.random.default_rng(seed)
    pool = CandidatePool(tuple(f"c{j:03d}" for j in range(m)))
    return PreferenceProfile(pool, np.argsort(rng.random((n, m)), axis=1))


def test_usi_all_first_choices():
    prof = table1_fixture()
    heads = {b.ranking[0] for b in prof}
    assert user_satisfaction_index(heads, prof, t=1) == 1.0


def test_usi_nothing_in_top_t():
    m = 100
    pool = CandidatePool(tuple(f"c{j:03d}" for j in range(m)))
    rows = np.tile(np.arange(m), (20, 1))
    prof = PreferenceProfile(pool, rows)
    assert user_satisfaction_index(["c050", "c099"], prof, t=10) == 0.0


def test_usi_table1_top2_brute_force():
    prof = table1_fixture()
    w = {"Item 1", "Item 4"}
    expected = sum(1 for b in prof if w & set(b.ranking[:2])) / prof.n
    assert user_satisfaction_index(w, prof, t=2) == expected


def test_usi_errors():
    prof = table1_fixture()
    with pytest.raises(MetricError):
        user_satisfaction_index([], prof)
    with pytest.raises(MetricError):
        user_satisfaction_index(["Item 1"], prof, t=0)


def test_anti_plurality_table1_item5():
    assert anti_plurality_index({"Item 5"}, table1_fixture(), x=20) == 0.78


def test_anti_plurality_table1_stv_winners():
    # last-choice column: Item 1 has 3, Item 4 has 6
    assert anti_plurality_index({"Item 1", "Item 4"}, table1_fixture(), x=20) == 0.045


def test_anti_plurality_strict_threshold():
    # m=5, x=10: only rank 5 counts
    prof = table1_fixture()
    assert anti_plurality_index({"Item 5"}, prof, x=10) == 0.78


def test_anti_plurality_of_first_choices_large_m():
    prof = uniform_profile(200, 50)
    heads = sorted({b.ranking[0] for b in prof})
    assert anti_plurality_index(heads[:1], prof.subset([i for i, b in enumerate(prof) if b.ranking[0] == heads[0]])) == 0


@pytest.mark.parametrize("x", [0, 100, -5])
def test_anti_plurality_x_domain(x):
    with pytest.raises(MetricError):
        anti_plurality_index({"Item 1"}, table1_fixture(), x=x)


@pytest.mark.parametrize("a,b,v", [({"a"}, {"a"}, 1.0), ({"a"}, {"b"}, 0.0), ({"a", "b", "c"}, {"b", "c", "d"}, 0.5)])
def test_jaccard(a, b, v):
    assert jaccard_overlap(a, b) == v


def test_jaccard_both_empty():
    with pytest.raises(MetricError):
        jaccard_overlap(set(), set())


def test_choice_distribution_heads():
    prof = table1_fixture()
    d = choice_distribution(["Item 5"], prof.subset([i for i, b in enumerate(prof) if b.ranking[0] == "Item 5"]))
    assert d.rank_counts == {1: 22} and d.mean_rank == 1


def test_choice_distribution_two_candidates():
    pool = CandidatePool(("a", "b"))
    prof = PreferenceProfile(pool, np.array([[0, 1]] * 50 + [[1, 0]] * 50))
    d = choice_distribution(["a"], prof, bins=2)
    assert d.rank_shares() == {1: 0.5, 2: 0.5}
    assert d.bin_counts == (50, 50)


def test_choice_distribution_uniform_mean_percentile():
    d = choice_distribution(["c000", "c001"], uniform_profile(2000, 40, seed=4))
    # mean of r/m for uniform r in 1..m is (m+1)/(2m)
    assert abs(d.mean_percentile - 0.5) < 0.05
    assert sum(d.bin_counts) == d.total == 4000


def test_demographic_bias_examples():
    r = DemographicVector(("f", "m"), [0.5, 0.5])
    assert demographic_bias(r, r) == 0.0
    assert math.isclose(demographic_bias(DemographicVector(("f", "m"), [1, 0]), DemographicVector(("f", "m"), [0, 1])),
                        math.sqrt(2))
    assert math.isclose(demographic_bias(DemographicVector(("f", "m"), [0.6, 0.4]), r), 0.1414213562, rel_tol=1e-9)


def test_demographic_vector_validation():
    with pytest.raises(MetricError):
        DemographicVector(("a", "b"), [0.5, 0.6])
    with pytest.raises(MetricError):
        demographic_bias(DemographicVector(("a", "b"), [0.5, 0.5]), DemographicVector(("a", "c"), [0.5, 0.5]))


@pytest.mark.parametrize("item,expected", [(0.30, True), (0.40, False), (0.50, False)])
def test_under_representation(item, expected):
    ref = DemographicVector(("g", "h"), [0.5, 0.5])
    d = DemographicVector(("g", "h"), [item, 1 - item])
    assert under_representation(d, ref, "g") is expected


def test_under_representation_zero_reference():
    ref = DemographicVector(("g", "h"), [0.0, 1.0])
    with pytest.raises(MetricError):
        under_representation(DemographicVector(("g", "h"), [0.5, 0.5]), ref, "g")


def test_solid_coalition_whole_pool():
    prof = table1_fixture()
    rep = check_solid_coalition(prof, prof.pool.candidates, ["Item 1", "Item 4"], 2)
    assert rep.coalition_size == 100 and rep.q_entitled == 2 and rep.satisfied


def test_solid_coalition_table1_c2():
    prof = table1_fixture()
    rep = check_solid_coalition(prof, ["Item 3", "Item 4"], stv(prof, 2).winners, 2)
    assert rep.coalition_size == 39 and rep.q_entitled == 1 and rep.satisfied
    bad = check_solid_coalition(prof, ["Item 3", "Item 4"], plurality_star(prof, 2).winners, 2)
    assert bad.q_elected == 0 and not bad.satisfied


def test_enumerate_solid_coalitions_table1():
    prof = table1_fixture()
    reps = enumerate_solid_coalitions(prof, stv(prof, 2).winners, 2)
    assert all(r.satisfied for r in reps)
    assert any(set(r.coalition) == {"Item 3", "Item 4"} for r in reps)
    with pytest.raises(MetricError):
        enumerate_solid_coalitions(uniform_profile(10, 8), ["c000"], 1)


def test_item_voters_fallback():
    prof = table1_fixture()
    voters = item_voters(prof, [VoteEvent("v001", "Item 3")])
    assert voters["Item 3"] == ["v001"]
    assert len(voters["Item 5"]) == 22


def test_metrics_report_with_demographics():
    prof = table1_fixture()
    cats = ("f", "m")
    table = {v: np.array([1.0, 0.0]) if int(v[1:]) % 2 else np.array([0.0, 1.0]) for v in prof.voters}
    ref = DemographicVector(cats, [0.5, 0.5])
    rep = metrics_report("STV", ["Item 1", "Item 4"], prof, demographics=DemographicData(cats, table, ref))
    assert 0 <= rep.usi <= 1 and 0 <= rep.anti_plurality <= 1
    assert rep.mean_bias is not None and rep.mean_bias >= 0
    assert set(rep.under_representation) == {"f", "m"}
    assert all(0 <= v <= 1 for v in rep.under_representation.values())
    names = {m for _, m, _ in rep.rows()}
    assert {"usi", "anti_plurality", "mean_bias", "mean_rank"} <= names
