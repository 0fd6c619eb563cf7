"""Synthetic electorates, the toy vote-splitting fixture, and election cycles.

Generated electorates reproduce the failure modes of activity-driven
selection: most users never vote, activity is heavy-tailed, and a small
hyper-active group can push a candidate most users rank last.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .core import CandidatePool, PreferenceProfile
from .elections.policies import VoteEvent


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class BlocSpec:
    """Voters who rank `candidates` (in this order, up to noise) above everything else."""

    fraction: float
    candidates: tuple[str, ...]
    noise: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "candidates", tuple(str(c) for c in self.candidates))


@dataclass(frozen=True)
class ExtremistSpec:
    """A candidate ranked first by a small, hyper-active group and last by most others."""

    candidate: str
    supporter_fraction: float
    dislike_fraction: float
    supporter_activity: float = 1.0


@dataclass(frozen=True)
class ElectorateSpec:
    n_voters: int
    m_candidates: int
    k: int = 1
    silent_fraction: float = 0.0
    activity_exponent: float = 2.5
    max_activity: int = 1000
    # probability that a vote goes to the voter's first choice rather than a lower one
    vote_focus: float = 0.7
    popularity_skew: float = 0.0
    blocs: tuple[BlocSpec, ...] = ()
    extremists: tuple[ExtremistSpec, ...] = ()
    candidates: tuple[str, ...] | None = None
    seed: int = 0

    def candidate_ids(self) -> tuple[str, ...]:
        if self.candidates is not None:
            return tuple(str(c) for c in self.candidates)
        width = len(str(self.m_candidates))
        return tuple(f"c{i:0{width}d}" for i in range(1, self.m_candidates + 1))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ElectorateSpec:
        d = dict(d)
        d["blocs"] = tuple(BlocSpec(b["fraction"], tuple(b["candidates"]), b.get("noise", 0.0))
                           for b in d.get("blocs", ()))
        d["extremists"] = tuple(ExtremistSpec(**e) for e in d.get("extremists", ()))
        if d.get("candidates") is not None:
            d["candidates"] = tuple(d["candidates"])
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_voters": self.n_voters, "m_candidates": self.m_candidates, "k": self.k,
            "silent_fraction": self.silent_fraction, "activity_exponent": self.activity_exponent,
            "max_activity": self.max_activity, "vote_focus": self.vote_focus,
            "popularity_skew": self.popularity_skew,
            "blocs": [{"fraction": b.fraction, "candidates": list(b.candidates), "noise": b.noise}
                      for b in self.blocs],
            "extremists": [{"candidate": e.candidate, "supporter_fraction": e.supporter_fraction,
                            "dislike_fraction": e.dislike_fraction,
                            "supporter_activity": e.supporter_activity} for e in self.extremists],
            "candidates": list(self.candidates) if self.candidates is not None else None,
            "seed": self.seed,
        }


def _check_fraction(name: str, x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise SimulationError(f"{name} must lie in [0, 1], got {x}")


def _apportion(n: int, fractions: Sequence[float]) -> list[int]:
    """Integer group sizes by largest remainder; sum equals round(n * sum(fractions))."""
    raw = [n * f for f in fractions]
    sizes = [math.floor(r) for r in raw]
    target = min(n, round(sum(raw)))
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: max(0, target - sum(sizes))]:
        sizes[i] += 1
    return sizes


def _validate(spec: ElectorateSpec, ids: tuple[str, ...]) -> None:
    if spec.n_voters < 1 or spec.m_candidates < 1:
        raise SimulationError("need at least one voter and one candidate")
    if len(ids) != spec.m_candidates or len(set(ids)) != len(ids):
        raise SimulationError("candidate ids must be m distinct values")
    _check_fraction("silent_fraction", spec.silent_fraction)
    _check_fraction("vote_focus", spec.vote_focus)
    known = set(ids)
    for b in spec.blocs:
        _check_fraction("bloc fraction", b.fraction)
        _check_fraction("bloc noise", b.noise)
        if len(set(b.candidates)) != len(b.candidates) or len(b.candidates) > spec.m_candidates:
            raise SimulationError(f"bloc subset {b.candidates} is not a set of at most m candidates")
        if not set(b.candidates) <= known:
            raise SimulationError(f"bloc names unknown candidates {sorted(set(b.candidates) - known)}")
    for e in spec.extremists:
        _check_fraction("supporter_fraction", e.supporter_fraction)
        _check_fraction("dislike_fraction", e.dislike_fraction)
        if e.candidate not in known:
            raise SimulationError(f"extremist {e.candidate!r} is not a candidate")
        if e.supporter_fraction + e.dislike_fraction > 1:
            raise SimulationError("supporter and dislike fractions of one candidate exceed 1")
    if sum(b.fraction for b in spec.blocs) + sum(e.supporter_fraction for e in spec.extremists) > 1 + 1e-12:
        raise SimulationError("bloc and supporter fractions sum to more than 1")


def _activity(rng: np.random.Generator, size: int, exponent: float, cap: int) -> np.ndarray:
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.minimum(rng.zipf(exponent, size=size), cap).astype(np.int64)


def generate_electorate(spec: ElectorateSpec) -> tuple[PreferenceProfile, list[VoteEvent]]:
    """Latent complete rankings for every voter plus the votes of the active ones.

    Voters are laid out as extremist supporters, then blocs, then background
    voters.  Background rankings follow a Plackett-Luce draw whose candidate
    weights decay with `popularity_skew`.  Extremist supporters always vote,
    with activity scaled by `supporter_activity`; of the remaining voters a
    `silent_fraction` share emits nothing.
    """
    ids = spec.candidate_ids()
    _validate(spec, ids)
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n_voters, spec.m_candidates
    col = {c: i for i, c in enumerate(ids)}

    group_fracs = [e.supporter_fraction for e in spec.extremists] + [b.fraction for b in spec.blocs]
    sizes = _apportion(n, group_fracs)
    n_sup = sizes[: len(spec.extremists)]
    n_bloc = sizes[len(spec.extremists):]

    log_w = -spec.popularity_skew * np.log(np.arange(1, m + 1))
    # Plackett-Luce draw via Gumbel perturbation
    order = np.argsort(-(log_w[None, :] + rng.gumbel(size=(n, m))), axis=1, kind="stable")

    ext_cols = [col[e.candidate] for e in spec.extremists]
    ext_set = set(ext_cols)
    heads: list[tuple[int, list[int], float]] = []
    supporter_of = np.full(n, -1, dtype=np.int64)
    start = 0
    for e_idx, size in enumerate(n_sup):
        heads.append((size, [ext_cols[e_idx]], 0.0))
        supporter_of[start:start + size] = e_idx
        start += size
    for b, size in zip(spec.blocs, n_bloc):
        heads.append((size, [col[c] for c in b.candidates], b.noise))

    dislikes = np.zeros((len(ext_cols), n), dtype=bool)
    for e_idx, e in enumerate(spec.extremists):
        others = np.flatnonzero(supporter_of != e_idx)
        n_dis = min(others.size, round(e.dislike_fraction * n))
        if n_dis:
            dislikes[e_idx, rng.choice(others, size=n_dis, replace=False)] = True

    head_of = []
    for size, head, noise in heads:
        head_of.extend([(head, noise)] * size)
    head_of.extend([([], 0.0)] * (n - len(head_of)))

    full = np.empty((n, m), dtype=np.int64)
    for v in range(n):
        head, noise = head_of[v]
        head = list(head)
        if noise > 0 and rng.random() < noise:
            rng.shuffle(head)
        taken = set(head)
        row = head + [c for c in order[v].tolist() if c not in taken and c not in ext_set]
        last = []
        for e_idx, c in enumerate(ext_cols):
            if c in taken:
                continue
            if dislikes[e_idx, v]:
                last.append(c)
            else:
                row.insert(int(rng.integers(len(head), len(row) + 1)), c)
        full[v] = row + last

    pool = CandidatePool(ids)
    width = len(str(n))
    voters = [f"v{i:0{width}d}" for i in range(1, n + 1)]
    profile = PreferenceProfile(pool, full, voters)

    events = _emit_votes(spec, rng, profile, supporter_of)
    return profile, events


def _emit_votes(spec: ElectorateSpec, rng: np.random.Generator, profile: PreferenceProfile,
                supporter_of: np.ndarray) -> list[VoteEvent]:
    n, m = profile.n, profile.m
    ordinary = np.flatnonzero(supporter_of < 0)
    n_silent = round(spec.silent_fraction * ordinary.size)
    silent = set(rng.choice(ordinary, size=n_silent, replace=False).tolist()) if n_silent else set()
    active = [v for v in range(n) if v not in silent]
    acts = _activity(rng, len(active), spec.activity_exponent, spec.max_activity)
    ids = profile.pool.candidates
    events: list[VoteEvent] = []
    depth = min(m, 10)
    for v, a in zip(active, acts.tolist()):
        e = supporter_of[v]
        if e >= 0:
            boost = spec.extremists[e].supporter_activity
            a = max(1, int(round(a * boost)))
            events.append(VoteEvent(profile.voters[v], ids[profile.rankings[v, 0]], a))
            continue
        # each vote lands on the first choice w.p. vote_focus, else uniformly in ranks 2..depth
        first = rng.binomial(a, spec.vote_focus)
        counts = Counter({0: first}) if first else Counter()
        if a - first and depth > 1:
            counts.update(rng.integers(1, depth, size=a - first).tolist())
        elif a - first:
            counts[0] += a - first
        for r in sorted(counts):
            events.append(VoteEvent(profile.voters[v], ids[profile.rankings[v, r]], counts[r]))
    return events


def table1_fixture() -> PreferenceProfile:
    """100 voters over Items 1-5 reproducing the classic vote-splitting table.

    First choices are 30/9/20/19/22 and 78 voters rank Item 5 last.  Item 2
    voters rank Item 1 second, and every ballot headed by Item 1 or Item 2
    prefers Item 4 to Item 3, so STV with K=2 elects Items 1 and 4 while
    plurality elects Items 1 and 5.
    """
    from .io import parse_ballots

    text = resources.files("equivoice.data").joinpath("table1.tsv").read_text(encoding="utf-8")
    pool = CandidatePool(tuple(f"Item {i}" for i in range(1, 6)))
    return PreferenceProfile.from_ballots(parse_ballots(text), pool)


def table1_spec(seed: int = 0) -> ElectorateSpec:
    """Bloc structure of the toy table: two 39% categories and a 22% extreme item."""
    items = tuple(f"Item {i}" for i in range(1, 6))
    return ElectorateSpec(
        n_voters=100, m_candidates=5, k=2, candidates=items, seed=seed,
        blocs=(
            BlocSpec(0.30, ("Item 1", "Item 2")),
            BlocSpec(0.09, ("Item 2", "Item 1")),
            BlocSpec(0.20, ("Item 3", "Item 4")),
            BlocSpec(0.19, ("Item 4", "Item 3")),
            BlocSpec(0.22, ("Item 5",)),
        ),
    )


def adversarial_spec(seed: int, n_voters: int = 20000, m_candidates: int = 100, k: int = 5) -> ElectorateSpec:
    """Mostly silent electorate with topical communities and one hyper-actively pushed extremist.

    95% of ordinary users never vote and activity is power-law.  Five
    communities each rally behind a single candidate; a sixth, mid-sized one
    spreads its first choices over four interchangeable candidates so only
    transfers reveal its strength.  5% of users push the last candidate while
    90% rank it last.
    """
    if m_candidates < 10:
        raise SimulationError("the adversarial electorate needs at least 10 candidates")
    ids = tuple(f"c{i:03d}" for i in range(1, m_candidates + 1))
    layout = ((0.24, 1), (0.19, 1), (0.15, 1), (0.12, 1), (0.10, 4), (0.07, 1))
    blocs, j = [], 0
    for frac, width in layout:
        blocs.append(BlocSpec(frac, ids[j:j + width], noise=1.0 if width > 1 else 0.0))
        j += width
    return ElectorateSpec(
        n_voters=n_voters, m_candidates=m_candidates, k=k, silent_fraction=0.95,
        activity_exponent=2.5, max_activity=1000, vote_focus=0.7, popularity_skew=0.0,
        blocs=tuple(blocs),
        extremists=(ExtremistSpec(ids[-1], 0.05, 0.90, supporter_activity=20.0),),
        candidates=ids, seed=seed,
    )


def random_election(seed: int, max_n: int = 50, max_m: int = 8, max_k: int = 3) -> tuple[PreferenceProfile, int]:
    """Small random profile and seat count, tie-prone by construction.

    Half of the instances draw ballots from a handful of shared orders so
    equal tallies are common.
    """
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, max_m + 1))
    k = int(rng.integers(1, min(max_k, m - 1) + 1))
    n = int(rng.integers(1, max_n + 1))
    if rng.random() < 0.5:
        types = [rng.permutation(m) for _ in range(int(rng.integers(1, 5)))]
        rows = np.array([types[int(rng.integers(len(types)))] for _ in range(n)])
    else:
        rows = np.argsort(rng.random((n, m)), axis=1)
    pool = CandidatePool(tuple(f"c{j}" for j in range(m)))
    return PreferenceProfile(pool, rows), k


@dataclass(frozen=True)
class CycleSpec:
    window_length: float
    pool_size: int
    jump: str = "absolute"

    def __post_init__(self) -> None:
        if self.window_length <= 0:
            raise SimulationError("window_length must be positive")
        if self.pool_size < 1:
            raise SimulationError("pool_size must be at least 1")
        if self.jump not in ("absolute", "relative"):
            raise SimulationError("jump must be 'absolute' or 'relative'")


@dataclass(frozen=True)
class Cycle:
    index: int
    start: float
    end: float
    pool: CandidatePool | None
    records: tuple[dict[str, Any], ...]
    counts: Mapping[str, int] = field(default_factory=dict)

    def votes(self, restrict_to_pool: bool = True) -> list[VoteEvent]:
        totals: dict[tuple[str, str], int] = defaultdict(int)
        allowed = set(self.pool.candidates) if (restrict_to_pool and self.pool is not None) else None
        for r in self.records:
            if allowed is None or r["item"] in allowed:
                totals[(r["voter"], r["item"])] += int(r.get("count", 1))
        return [VoteEvent(v, c, k) for (v, c), k in sorted(totals.items())]


def window_events(records: Iterable[Mapping[str, Any]], cycle: CycleSpec) -> list[Cycle]:
    """Split a timestamped event stream into consecutive windows and pick each pool.

    Windows are aligned to multiples of `window_length`; every window from the
    first to the last event is emitted, empty ones included.  A window's pool
    holds up to `pool_size` items seen in it, ordered by usage jump over the
    previous window (absolute difference, or current/(previous+1) in
    relative mode), ties by item id.
    """
    recs = sorted(
        ({"ts": float(r["ts"]), "voter": str(r["voter"]), "item": str(r["item"]),
          "count": int(r.get("count", 1))} for r in records),
        key=lambda r: (r["ts"], r["voter"], r["item"]),
    )
    if not recs:
        return []
    w = cycle.window_length
    first = math.floor(recs[0]["ts"] / w)
    last = math.floor(recs[-1]["ts"] / w)
    buckets: list[list[dict[str, Any]]] = [[] for _ in range(last - first + 1)]
    for r in recs:
        buckets[math.floor(r["ts"] / w) - first].append(r)
    out = []
    prev: Counter[str] = Counter()
    for i, bucket in enumerate(buckets):
        counts: Counter[str] = Counter()
        for r in bucket:
            counts[r["item"]] += r["count"]
        if cycle.jump == "absolute":
            key = lambda c: (-(counts[c] - prev[c]), c)
        else:
            key = lambda c: (-(counts[c] / (prev[c] + 1)), c)
        chosen = sorted(counts, key=key)[: cycle.pool_size]
        pool = CandidatePool(
            tuple(chosen), tuple(counts[c] for c in chosen), tuple(prev[c] for c in chosen)
        ) if chosen else None
        out.append(Cycle(i, (first + i) * w, (first + i + 1) * w, pool, tuple(bucket), dict(sorted(counts.items()))))
        prev = counts
    return out


def sample_electorate(profile: PreferenceProfile, fraction: float, seed: int) -> PreferenceProfile:
    """Uniform sample of round(fraction * n) ballots without replacement, in original order."""
    if not 0 < fraction <= 1:
        raise SimulationError(f"fraction must lie in (0, 1], got {fraction}")
    size = round(fraction * profile.n)
    if size == profile.n:
        return profile
    rows = np.sort(np.random.default_rng(seed).choice(profile.n, size=size, replace=False))
    return profile.subset(rows)


@dataclass(frozen=True)
class ReadingLog:
    """Synthetic dwell-time data with known latent preferences."""

    entries: tuple[tuple[str, str, float], ...]
    users: tuple[str, ...]
    items: tuple[str, ...]
    true_scores: np.ndarray


def generate_reading_log(
    n_users: int = 100,
    n_items: int = 50,
    z: int = 3,
    density: float = 0.3,
    noise: float = 0.3,
    seed: int = 0,
) -> ReadingLog:
    """Users read a random subset of items; dwell time grows with latent affinity.

    Users and items are Dirichlet mixtures over `z` latent topics, so no item
    is liked by everyone and affinity is mostly user-specific.  Dwell time is
    ``length_i * exp(affinity + noise)`` with affinity scaled to unit standard
    deviation, so item length cancels out after per-item normalization.
    """
    if not 0 < density <= 1:
        raise SimulationError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    x = rng.dirichlet(np.full(z, 0.5), size=n_users)
    y = rng.dirichlet(np.full(z, 0.5), size=n_items)
    aff = x @ y.T
    aff = aff / aff.std()
    length = rng.uniform(30, 600, size=n_items)
    users = tuple(f"u{i:04d}" for i in range(n_users))
    items = tuple(f"i{j:04d}" for j in range(n_items))
    entries = []
    per_user = max(1, round(density * n_items))
    for u in range(n_users):
        read = np.sort(rng.choice(n_items, size=per_user, replace=False))
        for i in read.tolist():
            v = length[i] * math.exp(aff[u, i] + noise * rng.standard_normal())
            entries.append((users[u], items[i], float(v)))
    return ReadingLog(tuple(entries), users, items, aff)
