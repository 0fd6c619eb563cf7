"""Quota, transfer and tie-break policies shared by every counting method."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from ..core import CandidateId


class ElectionError(ValueError):
    """Raised when an election cannot be run on the given inputs."""


@dataclass(frozen=True)
class VoteEvent:
    """Raw votes one voter cast for one candidate during a cycle."""

    voter: str
    candidate: CandidateId
    multiplicity: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "voter", str(self.voter))
        object.__setattr__(self, "candidate", str(self.candidate))
        if int(self.multiplicity) != self.multiplicity or self.multiplicity < 1:
            raise ElectionError(f"multiplicity must be a positive integer, got {self.multiplicity!r}")
        object.__setattr__(self, "multiplicity", int(self.multiplicity))


@dataclass(frozen=True)
class DroopQuota:
    value: int

    def __int__(self) -> int:
        return self.value


def droop_quota(n: int, k: int) -> DroopQuota:
    """Smallest integer support that at most k candidates can reach: floor(n/(k+1)) + 1."""
    if n < 1 or k < 1:
        raise ElectionError(f"droop quota needs n >= 1 and K >= 1 (got n={n}, K={k})")
    return DroopQuota(n // (k + 1) + 1)


class TransferMode(str, enum.Enum):
    FRACTIONAL_GREGORY = "fractional"
    RANDOM_WHOLE_VOTE = "random"


class TieBreakMode(str, enum.Enum):
    LEXICOGRAPHIC = "lex"
    SEEDED_RANDOM = "random"


@dataclass(frozen=True)
class TransferPolicy:
    """How an elected candidate's surplus leaves its pile.

    FRACTIONAL_GREGORY scales every ballot of the winner by surplus/tally.
    RANDOM_WHOLE_VOTE sets aside exactly quota ballots, drawn with ``seed``,
    and passes the rest on at full weight.
    """

    mode: TransferMode = TransferMode.FRACTIONAL_GREGORY
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", TransferMode(self.mode))

    def rng(self) -> random.Random:
        return random.Random(self.seed)


@dataclass(frozen=True)
class TieBreakPolicy:
    mode: TieBreakMode = TieBreakMode.LEXICOGRAPHIC
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", TieBreakMode(self.mode))

    def breaker(self) -> TieBreaker:
        return TieBreaker(self)


class TieBreaker:
    """Stateful tie resolver for one election.

    Lexicographic mode picks the smallest id.  Seeded mode draws uniformly
    from the tied ids sorted lexicographically; draws happen only on real
    ties, so the stream position depends on nothing but the count history.
    """

    def __init__(self, policy: TieBreakPolicy) -> None:
        self.policy = policy
        self._rng = random.Random(policy.seed) if policy.mode is TieBreakMode.SEEDED_RANDOM else None
        self.draws = 0

    def pick(self, tied: Sequence[CandidateId]) -> CandidateId:
        if not tied:
            raise ElectionError("tie-break over an empty set")
        if len(tied) == 1:
            return tied[0]
        ordered = sorted(tied)
        if self._rng is None:
            return ordered[0]
        self.draws += 1
        return self._rng.choice(ordered)


def select_top(scores: Mapping[CandidateId, object], k: int, breaker: TieBreaker) -> list[CandidateId]:
    """The k highest-scoring ids, best first; score ties go through `breaker`."""
    if k > len(scores):
        raise ElectionError(f"cannot select {k} winners from {len(scores)} candidates")
    by_score: dict[object, list[CandidateId]] = {}
    for c, s in scores.items():
        by_score.setdefault(s, []).append(c)
    out: list[CandidateId] = []
    for s in sorted(by_score, reverse=True):
        group = list(by_score[s])
        while group and len(out) < k:
            c = breaker.pick(group)
            group.remove(c)
            out.append(c)
        if len(out) == k:
            break
    return out
