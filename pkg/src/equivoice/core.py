"""Election data model: candidate pools, ballots, preference profiles, results."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

CandidateId = str
# Exact ballot weight; arithmetic never rounds.
VoteWeight = Fraction


class ProfileError(ValueError):
    """Raised when ballots or pools are malformed."""


class UnknownCandidateError(ProfileError, KeyError):
    """Raised when a candidate id is not part of the pool or ballot."""

    def __str__(self) -> str:
        return ValueError.__str__(self)


class Method(str, enum.Enum):
    WV = "WV"
    PLV = "PLV"
    PLVSTAR = "PLVSTAR"
    STV = "STV"
    EXTERNAL = "EXTERNAL"

    @classmethod
    def parse(cls, tag: str | Method) -> Method:
        if isinstance(tag, Method):
            return tag
        key = str(tag).upper().replace("*", "STAR").replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown method tag {tag!r}") from None


@dataclass(frozen=True)
class CandidatePool:
    """The m candidate items of one election cycle, with optional usage counts."""

    candidates: tuple[CandidateId, ...]
    usage_current: tuple[int, ...] | None = None
    usage_previous: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        cands = tuple(str(c) for c in self.candidates)
        object.__setattr__(self, "candidates", cands)
        if not cands:
            raise ProfileError("candidate pool must contain at least one candidate")
        dupes = [c for c, k in Counter(cands).items() if k > 1]
        if dupes:
            raise ProfileError(f"duplicate candidate ids in pool: {sorted(dupes)}")
        for name in ("usage_current", "usage_previous"):
            counts = getattr(self, name)
            if counts is None:
                continue
            counts = tuple(int(c) for c in counts)
            if len(counts) != len(cands):
                raise ProfileError(f"{name} has {len(counts)} entries for {len(cands)} candidates")
            if any(c < 0 for c in counts):
                raise ProfileError(f"{name} contains negative counts")
            object.__setattr__(self, name, counts)

    @property
    def m(self) -> int:
        return len(self.candidates)

    @cached_property
    def _index(self) -> dict[CandidateId, int]:
        return {c: i for i, c in enumerate(self.candidates)}

    def index(self, candidate: CandidateId) -> int:
        try:
            return self._index[candidate]
        except KeyError:
            raise UnknownCandidateError(f"candidate {candidate!r} is not in the pool") from None

    @cached_property
    def lex_order(self) -> np.ndarray:
        """Position of each candidate (by pool index) in lexicographic id order."""
        order = sorted(range(self.m), key=lambda i: self.candidates[i])
        rank = np.empty(self.m, dtype=np.int64)
        rank[order] = np.arange(self.m)
        return rank

    def __contains__(self, candidate: object) -> bool:
        return candidate in self._index

    def __iter__(self) -> Iterator[CandidateId]:
        return iter(self.candidates)

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class Ballot:
    """One voter's strict ranking, most-preferred first."""

    voter: str
    ranking: tuple[CandidateId, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "voter", str(self.voter))
        object.__setattr__(self, "ranking", tuple(str(c) for c in self.ranking))

    @cached_property
    def _positions(self) -> dict[CandidateId, int]:
        return {c: r for r, c in enumerate(self.ranking, start=1)}

    def rank_of(self, candidate: CandidateId) -> int:
        try:
            return self._positions[candidate]
        except KeyError:
            raise UnknownCandidateError(
                f"candidate {candidate!r} is not ranked on ballot of voter {self.voter!r}"
            ) from None

    def __len__(self) -> int:
        return len(self.ranking)


def rank_of(ballot: Ballot, candidate: CandidateId) -> int:
    """1-based position of `candidate` on `ballot`."""
    return ballot.rank_of(candidate)


@dataclass(frozen=True)
class ValidationIssue:
    voter: str | None
    kind: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    n_ballots: int
    m: int
    issues: tuple[ValidationIssue, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.issues

    def kinds(self) -> set[str]:
        return {i.kind for i in self.issues}

    def summary(self) -> str:
        if self.valid:
            return f"valid: {self.n_ballots} complete ballots over {self.m} candidates"
        head = "; ".join(
            f"{i.kind}" + (f" (voter {i.voter})" if i.voter is not None else "") + (f": {i.detail}" if i.detail else "")
            for i in self.issues[:5]
        )
        more = f" (+{len(self.issues) - 5} more)" if len(self.issues) > 5 else ""
        return f"invalid: {head}{more}"


class PreferenceProfile:
    """Complete strict rankings of n voters over a candidate pool.

    Rankings are held as an ``(n, m)`` integer array of pool indices, most
    preferred first.  The array is read-only; profiles are never mutated.
    """

    def __init__(
        self,
        pool: CandidatePool,
        rankings: np.ndarray,
        voters: Sequence[str] | None = None,
        *,
        check: bool = True,
    ) -> None:
        arr = np.asarray(rankings)
        if arr.ndim != 2 or arr.shape[1] != pool.m:
            raise ProfileError(f"rankings must have shape (n, {pool.m}), got {arr.shape}")
        dtype = np.int16 if pool.m < 2**15 else np.int32
        arr = np.array(arr, dtype=dtype, copy=True)
        arr.setflags(write=False)
        if voters is None:
            width = len(str(max(arr.shape[0], 1)))
            voters = tuple(f"v{i:0{width}d}" for i in range(1, arr.shape[0] + 1))
        else:
            voters = tuple(str(v) for v in voters)
        if len(voters) != arr.shape[0]:
            raise ProfileError(f"{len(voters)} voter ids for {arr.shape[0]} ballots")
        self.pool = pool
        self.rankings = arr
        self.voters = voters
        if check:
            report = validate_profile(self)
            if not report.valid:
                raise ProfileError(report.summary())

    @classmethod
    def from_ballots(cls, ballots: Iterable[Ballot], pool: CandidatePool | None = None) -> PreferenceProfile:
        ballots = list(ballots)
        if pool is None:
            if not ballots:
                raise ProfileError("cannot infer a pool from zero ballots")
            pool = CandidatePool(tuple(sorted(set(ballots[0].ranking))))
        report = validate_profile(ballots, pool)
        if not report.valid:
            raise ProfileError(report.summary())
        idx = pool._index
        rows = np.array([[idx[c] for c in b.ranking] for b in ballots], dtype=np.int64).reshape(len(ballots), pool.m)
        return cls(pool, rows, [b.voter for b in ballots], check=False)

    @property
    def n(self) -> int:
        return self.rankings.shape[0]

    @property
    def m(self) -> int:
        return self.pool.m

    def ballot(self, i: int) -> Ballot:
        cands = self.pool.candidates
        return Ballot(self.voters[i], tuple(cands[j] for j in self.rankings[i]))

    @property
    def ballots(self) -> tuple[Ballot, ...]:
        return tuple(self.ballot(i) for i in range(self.n))

    def __iter__(self) -> Iterator[Ballot]:
        return (self.ballot(i) for i in range(self.n))

    def __len__(self) -> int:
        return self.n

    @cached_property
    def positions(self) -> np.ndarray:
        """``positions[i, c]`` is the 1-based rank of candidate index c on ballot i."""
        pos = np.empty(self.rankings.shape, dtype=np.int32)
        rows = np.arange(self.n)[:, None]
        pos[rows, self.rankings] = np.arange(1, self.m + 1, dtype=np.int32)
        pos.setflags(write=False)
        return pos

    def first_choices(self) -> np.ndarray:
        return np.asarray(self.rankings[:, 0], dtype=np.int64)

    def subset(self, rows: Sequence[int] | np.ndarray) -> PreferenceProfile:
        rows = np.asarray(rows, dtype=np.int64)
        return PreferenceProfile(
            self.pool, self.rankings[rows], [self.voters[i] for i in rows], check=False
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PreferenceProfile):
            return NotImplemented
        return (
            self.pool.candidates == other.pool.candidates
            and self.voters == other.voters
            and np.array_equal(self.rankings, other.rankings)
        )

    def __repr__(self) -> str:
        return f"PreferenceProfile(n={self.n}, m={self.m})"


def validate_profile(
    profile: PreferenceProfile | Iterable[Ballot], pool: CandidatePool | None = None
) -> ValidationReport:
    """Check completeness, duplicate voters, and pool consistency.

    Accepts either a built profile or raw ballots plus the pool they should
    rank.  Never raises; problems are listed in the report.
    """
    issues: list[ValidationIssue] = []
    if isinstance(profile, PreferenceProfile):
        pool = profile.pool
        arr = np.asarray(profile.rankings, dtype=np.int64)
        voters = profile.voters
        m = pool.m
        if arr.size and (arr.min() < 0 or arr.max() >= m):
            bad = np.flatnonzero((arr < 0).any(axis=1) | (arr >= m).any(axis=1))
            for i in bad:
                issues.append(ValidationIssue(voters[i], "unknown candidate"))
        srt = np.sort(arr, axis=1)
        not_perm = np.flatnonzero((srt != np.arange(m)).any(axis=1)) if arr.size else []
        for i in not_perm:
            if np.any(srt[i, 1:] == srt[i, :-1]):
                issues.append(ValidationIssue(voters[i], "duplicate in ranking"))
        n = len(voters)
    else:
        ballots = list(profile)
        if pool is None:
            raise ProfileError("a pool is required to validate raw ballots")
        voters = [b.voter for b in ballots]
        m = pool.m
        n = len(ballots)
        full = set(pool.candidates)
        for b in ballots:
            seen = set(b.ranking)
            if len(seen) != len(b.ranking):
                dup = sorted(c for c, k in Counter(b.ranking).items() if k > 1)
                issues.append(ValidationIssue(b.voter, "duplicate in ranking", ", ".join(dup)))
            unknown = seen - full
            if unknown:
                issues.append(ValidationIssue(b.voter, "unknown candidate", ", ".join(sorted(unknown))))
            missing = full - seen
            if missing:
                issues.append(ValidationIssue(b.voter, "incomplete ranking", f"missing {', '.join(sorted(missing))}"))
    for v, k in Counter(voters).items():
        if k > 1:
            issues.append(ValidationIssue(v, "duplicate voter", f"{k} ballots"))
    return ValidationReport(n_ballots=n, m=m, issues=tuple(issues))


def format_weight(w: Fraction) -> str:
    return str(w)


@dataclass(frozen=True)
class Round:
    """One step of an election count."""

    number: int
    action: str
    candidates: tuple[CandidateId, ...]
    tallies: Mapping[CandidateId, Fraction] = field(default_factory=dict)
    transfers: Mapping[CandidateId, Fraction] = field(default_factory=dict)
    exhausted: Fraction = Fraction(0)
    removed: Fraction = Fraction(0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": self.number,
            "action": self.action,
            "candidates": list(self.candidates),
            "tallies": {c: format_weight(w) for c, w in self.tallies.items()},
            "transfers": {c: format_weight(w) for c, w in self.transfers.items()},
            "exhausted": format_weight(self.exhausted),
            "removed": format_weight(self.removed),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Round:
        return cls(
            number=int(d["round"]),
            action=str(d["action"]),
            candidates=tuple(d["candidates"]),
            tallies={c: Fraction(w) for c, w in d.get("tallies", {}).items()},
            transfers={c: Fraction(w) for c, w in d.get("transfers", {}).items()},
            exhausted=Fraction(d.get("exhausted", "0")),
            removed=Fraction(d.get("removed", "0")),
        )


@dataclass(frozen=True)
class ElectionResult:
    method: Method
    winners: tuple[CandidateId, ...]
    k: int
    rounds: tuple[Round, ...] = ()
    rng_seed: int | None = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method.parse(self.method))
        object.__setattr__(self, "winners", tuple(self.winners))
        if len(self.winners) != self.k:
            raise ValueError(f"{len(self.winners)} winners for K={self.k}")
        if len(set(self.winners)) != len(self.winners):
            raise ValueError("winner list contains duplicates")

    @property
    def winner_set(self) -> frozenset[CandidateId]:
        return frozenset(self.winners)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "k": self.k,
            "winners": list(self.winners),
            "rng_seed": self.rng_seed,
            "metadata": dict(self.metadata),
            "rounds": [r.to_dict() for r in self.rounds],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ElectionResult:
        return cls(
            method=Method.parse(d["method"]),
            winners=tuple(d["winners"]),
            k=int(d["k"]),
            rounds=tuple(Round.from_dict(r) for r in d.get("rounds", [])),
            rng_seed=d.get("rng_seed"),
            metadata=dict(d.get("metadata", {})),
        )
