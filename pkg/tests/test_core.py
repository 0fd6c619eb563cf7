from fractions import Fraction

import numpy as np
import pytest

from equivoice.core import (
    Ballot,
    CandidatePool,
    ElectionResult,
    Method,
    PreferenceProfile,
    ProfileError,
    Round,
    UnknownCandidateError,
    rank_of,
    validate_profile,
)
from equivoice.simulation import table1_fixture


def test_rank_of_head_and_tail():
    b = Ballot("v", ("c3", "c1", "c2"))
    assert rank_of(b, "c3") == 1
    assert rank_of(b, "c2") == 3


def test_rank_of_unknown_candidate():
    with pytest.raises(UnknownCandidateError):
        rank_of(Ballot("v", ("a", "b")), "z")


def test_rank_of_extremist_bloc_voter():
    prof = table1_fixture()
    heads = [b for b in prof if b.ranking[0] == "Item 5"]
    assert len(heads) == 22
    assert all(rank_of(b, "Item 5") == 1 for b in heads)


def test_rank_of_is_inverse_of_ranking():
    prof = table1_fixture()
    for b in prof:
        assert sorted(rank_of(b, c) for c in b.ranking) == list(range(1, 6))
        assert all(b.ranking[rank_of(b, c) - 1] == c for c in b.ranking)


def test_positions_match_rank_of():
    prof = table1_fixture()
    for i, b in enumerate(prof):
        for j, c in enumerate(prof.pool.candidates):
            assert prof.positions[i, j] == rank_of(b, c)


def test_pool_validation():
    with pytest.raises(ProfileError):
        CandidatePool(())
    with pytest.raises(ProfileError):
        CandidatePool(("a", "a"))
    with pytest.raises(ProfileError):
        CandidatePool(("a", "b"), (1, -1), (0, 0))
    pool = CandidatePool(("a", "b"), (3, 1), (0, 2))
    assert pool.m == 2 and "a" in pool and pool.index("b") == 1


def test_validate_complete_profile():
    rep = validate_profile(table1_fixture())
    assert rep.valid and rep.n_ballots == 100 and rep.m == 5


def test_validate_duplicate_in_ranking():
    pool = CandidatePool(("a", "b", "c"))
    rep = validate_profile([Ballot("v1", ("a", "a", "b"))], pool)
    assert not rep.valid
    assert "duplicate in ranking" in rep.kinds()


def test_validate_incomplete_ranking():
    pool = CandidatePool(("a", "b", "c"))
    rep = validate_profile([Ballot("v1", ("a", "b"))], pool)
    assert "incomplete ranking" in rep.kinds()


def test_validate_duplicate_voter_and_unknown():
    pool = CandidatePool(("a", "b"))
    rep = validate_profile([Ballot("v1", ("a", "b")), Ballot("v1", ("b", "a")), Ballot("v2", ("a", "z"))], pool)
    assert {"duplicate voter", "unknown candidate"} <= rep.kinds()


def test_from_ballots_rejects_invalid():
    with pytest.raises(ProfileError):
        PreferenceProfile.from_ballots([Ballot("v1", ("a", "b")), Ballot("v1", ("b", "a"))])


def test_profile_is_read_only():
    prof = table1_fixture()
    with pytest.raises(ValueError):
        prof.rankings[0, 0] = 1


def test_profile_subset_and_equality():
    prof = table1_fixture()
    sub = prof.subset(np.arange(10))
    assert sub.n == 10 and sub.ballot(3) == prof.ballot(3)
    assert prof == table1_fixture()


def test_method_parse():
    assert Method.parse("plv*") is Method.PLVSTAR
    assert Method.parse("STV") is Method.STV
    assert Method.parse("plvstar") is Method.PLVSTAR
    with pytest.raises(ValueError):
        Method.parse("borda")


def test_result_roundtrip_is_exact():
    r = Round(1, "elect", ("a",), {"a": Fraction(7, 3), "b": Fraction(1)}, {"b": Fraction(2, 9)},
              Fraction(0), Fraction(4))
    res = ElectionResult(Method.STV, ("a",), 1, (r,), 5, {"quota": 4})
    back = ElectionResult.from_dict(res.to_dict())
    assert back == res
    assert back.rounds[0].tallies["a"] == Fraction(7, 3)


def test_result_invariants():
    with pytest.raises(ValueError):
        ElectionResult(Method.STV, ("a",), 2, (), None, {})
    with pytest.raises(ValueError):
        ElectionResult(Method.STV, ("a", "a"), 2, (), None, {})
