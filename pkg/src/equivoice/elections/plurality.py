"""Single-pass counting methods: weighted voting, plurality, plurality over full rankings."""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from typing import Iterable

import numpy as np

from ..core import CandidateId, ElectionResult, Method, PreferenceProfile, Round
from .policies import ElectionError, TieBreakPolicy, VoteEvent, select_top


def _final_round(counts: dict[CandidateId, int], winners: list[CandidateId]) -> Round:
    return Round(
        number=1,
        action="final",
        candidates=tuple(winners),
        tallies={c: Fraction(counts[c]) for c in sorted(counts)},
    )


def _check_k(k: int, available: int) -> None:
    if k < 1:
        raise ElectionError(f"K must be at least 1, got {k}")
    if available < k:
        raise ElectionError(f"only {available} candidates received votes; cannot elect K={k}")


def weighted_voting(
    events: Iterable[VoteEvent], k: int, ties: TieBreakPolicy = TieBreakPolicy()
) -> ElectionResult:
    """Every raw vote counts: top-k candidates by total multiplicity."""
    counts: dict[CandidateId, int] = defaultdict(int)
    for ev in events:
        counts[ev.candidate] += ev.multiplicity
    _check_k(k, len(counts))
    winners = select_top(counts, k, ties.breaker())
    return ElectionResult(
        Method.WV, tuple(winners), k, (_final_round(counts, winners),), ties.seed,
        {"tiebreak": ties.mode.value, "total_votes": sum(counts.values())},
    )


def plurality_voting(
    events: Iterable[VoteEvent], k: int, ties: TieBreakPolicy = TieBreakPolicy()
) -> ElectionResult:
    """One vote per participating voter, for the candidate they voted for most."""
    per_voter: dict[str, dict[CandidateId, int]] = defaultdict(lambda: defaultdict(int))
    for ev in events:
        per_voter[ev.voter][ev.candidate] += ev.multiplicity
    breaker = ties.breaker()
    counts: dict[CandidateId, int] = defaultdict(int)
    # voters in sorted order so seeded tie draws are reproducible
    for voter in sorted(per_voter):
        votes = per_voter[voter]
        top = max(votes.values())
        counts[breaker.pick([c for c, v in votes.items() if v == top])] += 1
    _check_k(k, len(counts))
    winners = select_top(counts, k, breaker)
    return ElectionResult(
        Method.PLV, tuple(winners), k, (_final_round(counts, winners),), ties.seed,
        {"tiebreak": ties.mode.value, "voters": len(per_voter)},
    )


def plurality_star(
    profile: PreferenceProfile, k: int, ties: TieBreakPolicy = TieBreakPolicy()
) -> ElectionResult:
    """Top-k candidates by number of complete ballots ranking them first."""
    m = profile.m
    if k < 1 or k > m:
        raise ElectionError(f"K must be in 1..{m}, got {k}")
    if profile.n == 0:
        raise ElectionError("empty profile")
    firsts = np.bincount(profile.first_choices(), minlength=m)
    counts = {c: int(firsts[i]) for i, c in enumerate(profile.pool.candidates)}
    winners = select_top(counts, k, ties.breaker())
    return ElectionResult(
        Method.PLVSTAR, tuple(winners), k, (_final_round(counts, winners),), ties.seed,
        {"tiebreak": ties.mode.value, "ballots": profile.n},
    )
