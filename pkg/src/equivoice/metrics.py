"""Fairness measures for a winner set against a preference profile."""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .core import CandidateId, PreferenceProfile
from .elections.policies import VoteEvent


class MetricError(ValueError):
    pass


def _winner_columns(profile: PreferenceProfile, winners: Iterable[CandidateId]) -> list[int]:
    cols = [profile.pool.index(w) for w in dict.fromkeys(winners)]
    if not cols:
        raise MetricError("winner set is empty")
    return cols


def user_satisfaction_index(winners: Iterable[CandidateId], profile: PreferenceProfile, t: int = 10) -> float:
    """Fraction of ballots with at least one winner among their top `t` choices."""
    if t < 1:
        raise MetricError(f"t must be at least 1, got {t}")
    cols = _winner_columns(profile, winners)
    best = profile.positions[:, cols].min(axis=1)
    return int((best <= t).sum()) / profile.n


def _as_fraction(x: float | int | Fraction) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def dislike_fractions(winners: Iterable[CandidateId], profile: PreferenceProfile, x: float = 10) -> dict[CandidateId, Fraction]:
    """Per winner, the share of ballots placing it strictly inside their bottom x percent."""
    xf = _as_fraction(x)
    if not 0 < xf < 100:
        raise MetricError(f"x must lie in (0, 100), got {x}")
    winners = list(dict.fromkeys(winners))
    cols = _winner_columns(profile, winners)
    # rank r is disliked iff r > (1 - x/100) * m; compared exactly as 100*r > (100 - x)*m
    limit = (100 - xf) * profile.m
    pos = profile.positions[:, cols].astype(np.int64)
    disliked = (100 * pos * limit.denominator) > limit.numerator
    return {w: Fraction(int(disliked[:, j].sum()), profile.n) for j, w in enumerate(winners)}


def anti_plurality_index(winners: Iterable[CandidateId], profile: PreferenceProfile, x: float = 10) -> float:
    """Mean over winners of the fraction of users who rank it in their bottom x percent."""
    fr = dislike_fractions(winners, profile, x)
    return float(sum(fr.values(), Fraction(0)) / len(fr))


def jaccard_overlap(a: Iterable[CandidateId], b: Iterable[CandidateId]) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        raise MetricError("jaccard overlap of two empty sets is undefined")
    return len(a & b) / len(a | b)


@dataclass(frozen=True)
class ChoiceDistribution:
    """Where the winners sit on voters' ballots."""

    rank_counts: Mapping[int, int]
    bin_counts: tuple[int, ...]
    mean_rank: float
    mean_percentile: float
    total: int

    def rank_shares(self) -> dict[int, float]:
        return {r: c / self.total for r, c in self.rank_counts.items()}

    def to_dict(self) -> dict[str, Any]:
        return {
            "rank_counts": {str(r): c for r, c in self.rank_counts.items()},
            "bin_counts": list(self.bin_counts),
            "mean_rank": self.mean_rank,
            "mean_percentile": self.mean_percentile,
            "total": self.total,
        }


def choice_distribution(winners: Iterable[CandidateId], profile: PreferenceProfile, bins: int = 10) -> ChoiceDistribution:
    """Histogram of the ranks each ballot gives each winner.

    Percentile of rank r is r/m; bin b (0-based) of `bins` equal-width bins
    holds percentiles in (b/bins, (b+1)/bins].
    """
    if bins < 1:
        raise MetricError("bins must be positive")
    cols = _winner_columns(profile, winners)
    ranks = profile.positions[:, cols].astype(np.int64).ravel()
    m = profile.m
    values, counts = np.unique(ranks, return_counts=True)
    bin_idx = -((-ranks * bins) // m) - 1
    bin_counts = np.bincount(bin_idx, minlength=bins)
    return ChoiceDistribution(
        rank_counts={int(r): int(c) for r, c in zip(values, counts)},
        bin_counts=tuple(int(c) for c in bin_counts),
        mean_rank=float(ranks.mean()),
        mean_percentile=float(ranks.mean() / m),
        total=int(ranks.size),
    )


@dataclass(frozen=True)
class DemographicVector:
    categories: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "categories", tuple(self.categories))
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(self.categories),):
            raise MetricError("one proportion per category required")
        if (vals < 0).any() or (vals > 1).any() or abs(vals.sum() - 1) > 1e-9:
            raise MetricError(f"proportions must lie in [0, 1] and sum to 1 (sum={vals.sum()!r})")

    @classmethod
    def from_counts(cls, categories: Sequence[str], counts: Sequence[float]) -> DemographicVector:
        c = np.asarray(counts, dtype=float)
        if c.sum() <= 0:
            raise MetricError("cannot normalize an all-zero histogram")
        return cls(tuple(categories), c / c.sum())

    def share(self, group: str) -> float:
        try:
            return float(self.values[self.categories.index(group)])
        except ValueError:
            raise MetricError(f"unknown demographic group {group!r}") from None


def _aligned(a: DemographicVector, b: DemographicVector) -> None:
    if a.categories != b.categories:
        raise MetricError(f"category mismatch: {a.categories} vs {b.categories}")


def demographic_bias(item_users: DemographicVector, reference: DemographicVector) -> float:
    """Euclidean distance between an item's user demographics and the reference population."""
    _aligned(item_users, reference)
    return float(np.linalg.norm(item_users.values - reference.values))


def under_representation(item_users: DemographicVector, reference: DemographicVector, group: str,
                         threshold: float = 0.8) -> bool:
    """True iff the group's share among the item's users is below threshold x its reference share."""
    _aligned(item_users, reference)
    ref = reference.share(group)
    if ref == 0:
        raise MetricError(f"group {group!r} has zero reference share")
    return item_users.share(group) < threshold * ref


def item_demographics(voters: Iterable[str], table: Mapping[str, np.ndarray], categories: Sequence[str]) -> DemographicVector | None:
    """Normalized demographic histogram of an item's voters; None if none are known."""
    total = np.zeros(len(categories))
    seen = False
    for v in voters:
        vec = table.get(v)
        if vec is not None:
            total += vec
            seen = True
    if not seen or total.sum() <= 0:
        return None
    return DemographicVector.from_counts(categories, total)


@dataclass(frozen=True)
class CoalitionReport:
    coalition: tuple[CandidateId, ...]
    coalition_size: int
    q_entitled: int
    q_elected: int

    @property
    def satisfied(self) -> bool:
        return self.q_elected >= self.q_entitled


def check_solid_coalition(profile: PreferenceProfile, coalition: Iterable[CandidateId],
                          winners: Iterable[CandidateId], k: int) -> CoalitionReport:
    """Test proportionality for one solid coalition.

    Supporters are the ballots ranking every coalition member above every
    non-member.  With s supporters the coalition is entitled to the largest
    q with s >= q*n/(k+1), capped at k and at the coalition's size.
    """
    members = tuple(dict.fromkeys(coalition))
    cols = [profile.pool.index(c) for c in members]
    if cols:
        size = int((profile.positions[:, cols].max(axis=1) == len(cols)).sum())
    else:
        size = 0
    q = min(k, len(cols), size * (k + 1) // profile.n)
    elected = len(set(members) & set(winners))
    return CoalitionReport(members, size, q, elected)


def enumerate_solid_coalitions(profile: PreferenceProfile, winners: Iterable[CandidateId], k: int,
                               max_m: int = 6) -> list[CoalitionReport]:
    """Every candidate subset whose supporters are entitled to at least one seat (small m only)."""
    if profile.m > max_m:
        raise MetricError(f"exhaustive coalition search is limited to m <= {max_m}")
    winners = list(winners)
    out = []
    for size in range(1, profile.m + 1):
        for subset in itertools.combinations(profile.pool.candidates, size):
            rep = check_solid_coalition(profile, subset, winners, k)
            if rep.q_entitled >= 1:
                out.append(rep)
    return out


@dataclass
class MetricsReport:
    method: str
    usi: float
    anti_plurality: float
    mean_bias: float | None = None
    under_representation: dict[str, float] = field(default_factory=dict)
    jaccard: dict[str, float] = field(default_factory=dict)
    choice_histogram: ChoiceDistribution | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "usi": self.usi,
            "anti_plurality": self.anti_plurality,
            "mean_bias": self.mean_bias,
            "under_representation": dict(self.under_representation),
            "jaccard": dict(self.jaccard),
            "choice_histogram": self.choice_histogram.to_dict() if self.choice_histogram else None,
            "params": dict(self.params),
        }

    def rows(self) -> list[tuple[str, str, float]]:
        """Flat (method, metric, value) rows for plotting."""
        out = [(self.method, "usi", self.usi), (self.method, "anti_plurality", self.anti_plurality)]
        if self.mean_bias is not None:
            out.append((self.method, "mean_bias", self.mean_bias))
        out += [(self.method, f"under_representation:{g}", v) for g, v in self.under_representation.items()]
        out += [(self.method, f"jaccard:{o}", v) for o, v in self.jaccard.items()]
        if self.choice_histogram is not None:
            out.append((self.method, "mean_rank", self.choice_histogram.mean_rank))
            out.append((self.method, "mean_percentile", self.choice_histogram.mean_percentile))
            out += [(self.method, f"percentile_bin:{b}", c / self.choice_histogram.total)
                    for b, c in enumerate(self.choice_histogram.bin_counts)]
        return out


@dataclass(frozen=True)
class DemographicData:
    categories: tuple[str, ...]
    table: Mapping[str, np.ndarray]
    reference: DemographicVector


def item_voters(profile: PreferenceProfile, events: Sequence[VoteEvent] | None) -> dict[CandidateId, list[str]]:
    """Voters behind each item: those who voted for it, else those ranking it first."""
    by_item: dict[CandidateId, list[str]] = defaultdict(list)
    if events:
        for ev in events:
            by_item[ev.candidate].append(ev.voter)
    firsts = profile.first_choices()
    cands = profile.pool.candidates
    fallback: dict[CandidateId, list[str]] = defaultdict(list)
    for v, c in zip(profile.voters, firsts.tolist()):
        fallback[cands[c]].append(v)
    return {c: sorted(set(by_item[c])) if by_item.get(c) else fallback.get(c, []) for c in cands}


def metrics_report(
    method: str,
    winners: Sequence[CandidateId],
    profile: PreferenceProfile,
    *,
    t: int = 10,
    x: float = 10,
    threshold: float = 0.8,
    bins: int = 10,
    demographics: DemographicData | None = None,
    events: Sequence[VoteEvent] | None = None,
) -> MetricsReport:
    rep = MetricsReport(
        method=method,
        usi=user_satisfaction_index(winners, profile, t),
        anti_plurality=anti_plurality_index(winners, profile, x),
        choice_histogram=choice_distribution(winners, profile, bins),
        params={"t": t, "x": x, "threshold": threshold, "bins": bins},
    )
    if demographics is not None:
        voters = item_voters(profile, events)
        biases, under = [], defaultdict(int)
        scored = 0
        for w in winners:
            d = item_demographics(voters.get(w, []), demographics.table, demographics.categories)
            if d is None:
                continue
            scored += 1
            biases.append(demographic_bias(d, demographics.reference))
            for g in demographics.categories:
                if demographics.reference.share(g) > 0 and under_representation(d, demographics.reference, g, threshold):
                    under[g] += 1
        rep.mean_bias = float(np.mean(biases)) if biases else None
        if scored:
            rep.under_representation = {g: under[g] / scored for g in demographics.categories}
    return rep
