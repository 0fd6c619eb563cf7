"""Complete rankings for every user from implicit feedback or topic affinities.

Two routes are provided.  Dwell-time feedback is normalized per item, binned
into per-user quintile ratings and completed with a nonnegative factor model
trained by projected SGD.  Alternatively a user-item affinity matrix is built
from interest, topic-similarity and item-topic matrices, and observed votes
are placed on top of the affinity order.
"""

from __future__ import annotations

import json
import math
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numba
import numpy as np
from scipy.stats import rankdata

from .core import Ballot, CandidateId, CandidatePool, PreferenceProfile
from .elections.policies import VoteEvent


class InferenceError(ValueError):
    pass


class TrainingDiverged(InferenceError):
    pass


@dataclass(frozen=True)
class ImplicitFeedback:
    """(user, item, seconds) triples; repeated pairs are summed on construction."""

    entries: tuple[tuple[str, str, float], ...]

    def __post_init__(self) -> None:
        totals: dict[tuple[str, str], float] = defaultdict(float)
        for u, i, v in self.entries:
            v = float(v)
            if not v > 0 or not math.isfinite(v):
                raise InferenceError(f"duration for ({u}, {i}) must be positive and finite, got {v}")
            totals[(str(u), str(i))] += v
        object.__setattr__(self, "entries", tuple((u, i, v) for (u, i), v in sorted(totals.items())))

    @property
    def users(self) -> tuple[str, ...]:
        return tuple(sorted({u for u, _, _ in self.entries}))

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(sorted({i for _, i, _ in self.entries}))


def normalize_durations(fb: ImplicitFeedback) -> dict[tuple[str, str], float]:
    """Divide each duration by the mean duration of its item over that item's readers."""
    total: dict[str, float] = defaultdict(float)
    readers: dict[str, int] = defaultdict(int)
    for _, i, v in fb.entries:
        total[i] += v
        readers[i] += 1
    for i, t in total.items():
        if t <= 0:
            raise InferenceError(f"item {i!r} has zero total duration")
    return {(u, i): v * readers[i] / total[i] for u, i, v in fb.entries}


def quantile_to_rating(values: Sequence[float]) -> np.ndarray:
    """Per-user quintile ratings 1..5; tied values share the higher bin.

    A value whose 1-based rank (ties taking the largest rank) is R among N
    values gets rating ceil(5R/N).
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InferenceError("cannot bin an empty value list")
    n = v.size
    r = rankdata(v, method="max").astype(np.int64)
    return (5 * r + n - 1) // n


@dataclass(frozen=True)
class RatingMatrix:
    """Sparse integer ratings; the stored (row, col) pairs form the known set."""

    users: tuple[str, ...]
    items: tuple[str, ...]
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise InferenceError("rows, cols and values must be equal-length vectors")
        if rows.size and (rows.min() < 0 or rows.max() >= len(self.users) or cols.min() < 0 or cols.max() >= len(self.items)):
            raise InferenceError("rating index out of range")
        if len(set(zip(rows.tolist(), cols.tolist()))) != rows.size:
            raise InferenceError("duplicate (user, item) rating")
        for name, arr in (("rows", rows), ("cols", cols), ("values", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "items", tuple(self.items))

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, float]], users: Sequence[str] | None = None,
                     items: Sequence[str] | None = None, integral: bool = True) -> RatingMatrix:
        triples = list(triples)
        users = tuple(users) if users is not None else tuple(sorted({u for u, _, _ in triples}))
        items = tuple(items) if items is not None else tuple(sorted({i for _, i, _ in triples}))
        ui = {u: k for k, u in enumerate(users)}
        ii = {i: k for k, i in enumerate(items)}
        try:
            rows = [ui[u] for u, _, _ in triples]
            cols = [ii[i] for _, i, _ in triples]
        except KeyError as exc:
            raise InferenceError(f"rating for unknown id {exc.args[0]!r}") from None
        vals = np.array([float(r) for _, _, r in triples], dtype=float)
        if integral and vals.size and (np.any(vals != np.round(vals)) or vals.min() < 1 or vals.max() > 5):
            raise InferenceError("ratings must be integers in [1, 5]")
        return cls(users, items, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), vals)

    @classmethod
    def from_feedback(cls, fb: ImplicitFeedback, items: Sequence[str] | None = None) -> RatingMatrix:
        """Normalize durations, then bin each user's values into quintile ratings.

        `items` widens the item axis beyond those with feedback.
        """
        nv = normalize_durations(fb)
        per_user: dict[str, list[tuple[str, float]]] = defaultdict(list)
        for (u, i), v in nv.items():
            per_user[u].append((i, v))
        triples = []
        for u in sorted(per_user):
            pairs = per_user[u]
            ratings = quantile_to_rating([v for _, v in pairs])
            triples += [(u, i, int(r)) for (i, _), r in zip(pairs, ratings)]
        return cls.from_triples(triples, fb.users, items if items is not None else fb.items)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.users), len(self.items)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def known(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def user_ratings(self, u: int) -> dict[int, float]:
        mask = self.rows == u
        return dict(zip(self.cols[mask].tolist(), self.values[mask].tolist()))


@dataclass
class FactorModel:
    """Nonnegative user factors X (n x Z) and item factors Y (m x Z)."""

    x: np.ndarray
    y: np.ndarray
    lam: float
    users: tuple[str, ...] = ()
    items: tuple[str, ...] = ()
    objective: list[float] = field(default_factory=list)
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 2 or self.y.ndim != 2 or self.x.shape[1] != self.y.shape[1] or self.x.shape[1] < 1:
            raise InferenceError("factor matrices must be 2-D with a shared latent dimension >= 1")
        if (self.x < 0).any() or (self.y < 0).any():
            raise InferenceError("factor entries must be nonnegative")
        if self.lam < 0:
            raise InferenceError("lambda must be nonnegative")

    @property
    def z(self) -> int:
        return self.x.shape[1]

    @property
    def epochs(self) -> int:
        return max(0, len(self.objective) - 1)

    def predict_all(self) -> np.ndarray:
        return self.x @ self.y.T

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": "equivoice-factor-model",
            "n_users": self.x.shape[0],
            "n_items": self.y.shape[0],
            "z": self.z,
            "lambda": self.lam,
            "users": list(self.users),
            "items": list(self.items),
            "x": self.x.ravel().tolist(),
            "y": self.y.ravel().tolist(),
            "objective": list(self.objective),
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> FactorModel:
        n, m, z = int(d["n_users"]), int(d["n_items"]), int(d["z"])
        return cls(
            np.array(d["x"], dtype=float).reshape(n, z),
            np.array(d["y"], dtype=float).reshape(m, z),
            float(d["lambda"]),
            tuple(d.get("users", ())),
            tuple(d.get("items", ())),
            list(d.get("objective", [])),
            dict(d.get("params", {})),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> FactorModel:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@numba.njit(cache=False)
def _objective(x, y, rows, cols, vals, lam):
    err = 0.0
    reg = 0.0
    for k in range(rows.size):
        u, i = rows[k], cols[k]
        e = vals[k] - np.dot(x[u], y[i])
        err += e * e
        reg += np.sqrt(np.dot(x[u], x[u])) + np.sqrt(np.dot(y[i], y[i]))
    return err + lam * reg


@numba.njit(cache=False)
def _sgd_epoch(x, y, rows, cols, vals, order, lam, lr):
    z = x.shape[1]
    for k in order:
        u, i = rows[k], cols[k]
        e = vals[k] - np.dot(x[u], y[i])
        nx = np.sqrt(np.dot(x[u], x[u]))
        ny = np.sqrt(np.dot(y[i], y[i]))
        for d in range(z):
            xu, yi = x[u, d], y[i, d]
            gx = -2.0 * e * yi
            gy = -2.0 * e * xu
            # subgradient of the (non-squared) norm is 0 at the origin
            if nx > 0.0:
                gx += lam * xu / nx
            if ny > 0.0:
                gy += lam * yi / ny
            x[u, d] = max(0.0, xu - lr * gx)
            y[i, d] = max(0.0, yi - lr * gy)


def train_nmf(
    ratings: RatingMatrix,
    z: int = 20,
    lam: float = 0.05,
    learning_rate: float = 0.005,
    epochs: int = 50,
    seed: int = 0,
    on_epoch: Callable[[int, np.ndarray, np.ndarray, float], None] | None = None,
) -> FactorModel:
    """Projected SGD on squared error plus lam * (||x_u|| + ||y_i||) per known rating.

    Ratings are visited in a fresh seeded permutation each epoch and every
    update is clamped at zero.  The objective is recorded before training
    and after each epoch; `on_epoch(epoch, x, y, objective)` sees each
    epoch's factors.
    """
    if len(ratings) == 0:
        raise InferenceError("no known ratings")
    if z < 1 or epochs < 1:
        raise InferenceError("z and epochs must be at least 1")
    if lam < 0 or learning_rate <= 0:
        raise InferenceError("lambda must be >= 0 and learning_rate > 0")
    rng = np.random.default_rng(seed)
    n, m = ratings.shape
    # uniform on (0, 0.1]
    x = 0.1 - 0.1 * rng.random((n, z))
    y = 0.1 - 0.1 * rng.random((m, z))
    rows = np.ascontiguousarray(ratings.rows)
    cols = np.ascontiguousarray(ratings.cols)
    vals = np.ascontiguousarray(ratings.values)
    history = [float(_objective(x, y, rows, cols, vals, lam))]
    for epoch in range(epochs):
        order = rng.permutation(rows.size)
        _sgd_epoch(x, y, rows, cols, vals, order, lam, learning_rate)
        obj = float(_objective(x, y, rows, cols, vals, lam))
        if not math.isfinite(obj) or obj > 10 * history[0]:
            raise TrainingDiverged(
                f"objective rose from {history[0]:.4g} to {obj:.4g} at epoch {epoch + 1}; "
                f"try a smaller learning rate than {learning_rate}"
            )
        history.append(obj)
        if on_epoch is not None:
            on_epoch(epoch + 1, x, y, obj)
    params = {"z": z, "lambda": lam, "learning_rate": learning_rate, "epochs": epochs, "seed": seed}
    return FactorModel(x, y, lam, ratings.users, ratings.items, history, params)


def predict_rating(model: FactorModel, u: int, i: int) -> float:
    n, m = model.x.shape[0], model.y.shape[0]
    if not (0 <= u < n and 0 <= i < m):
        raise InferenceError(f"index ({u}, {i}) outside a {n} x {m} model")
    return float(model.x[u] @ model.y[i])


def training_rmse(model: FactorModel, ratings: RatingMatrix) -> float:
    pred = np.einsum("kz,kz->k", model.x[ratings.rows], model.y[ratings.cols])
    return float(np.sqrt(np.mean((ratings.values - pred) ** 2)))


def _tie_keys(seed: int, voter: str, size: int) -> np.ndarray:
    # independent stream per voter so a ballot does not depend on which others are built
    return np.random.default_rng([seed, zlib.crc32(voter.encode("utf-8"))]).random(size)


def ranking_from_ratings(
    actual: RatingMatrix | Mapping[CandidateId, float],
    predicted: FactorModel | Mapping[CandidateId, float],
    u: int | str,
    pool: Sequence[CandidateId],
    seed: int = 0,
) -> Ballot:
    """Complete ballot over `pool` for user `u`.

    Every item the user actually rated comes first, by rating descending;
    the rest follow by predicted rating descending.  Equal values are
    ordered by a seeded shuffle.
    """
    pool = list(pool)
    if isinstance(actual, RatingMatrix):
        uidx = actual.users.index(u) if isinstance(u, str) else int(u)
        voter = actual.users[uidx]
        act = {actual.items[c]: r for c, r in actual.user_ratings(uidx).items()}
    else:
        voter, uidx, act = str(u), None, dict(actual)
    if isinstance(predicted, FactorModel):
        if uidx is None:
            uidx = predicted.users.index(voter)
        item_idx = {it: k for k, it in enumerate(predicted.items)}
        row = predicted.x[uidx] @ predicted.y.T
        pred = {c: float(row[item_idx[c]]) for c in pool if c in item_idx}
    else:
        pred = dict(predicted)
    missing = [c for c in pool if c not in act and c not in pred]
    if missing:
        raise InferenceError(f"no actual or predicted rating for {missing[:5]} (user {voter})")
    is_pred = np.array([c not in act for c in pool])
    value = np.array([act[c] if c in act else pred[c] for c in pool], dtype=float)
    ties = _tie_keys(seed, voter, len(pool))
    order = np.lexsort((ties, -value, is_pred))
    return Ballot(voter, tuple(pool[k] for k in order))


def infer_profile(ratings: RatingMatrix, model: FactorModel, pool: Sequence[CandidateId] | None = None,
                  seed: int = 0) -> PreferenceProfile:
    """Ballots for every user in `ratings`, actual ratings first."""
    pool = list(pool) if pool is not None else list(ratings.items)
    item_idx = {it: k for k, it in enumerate(model.items)}
    try:
        cols = np.array([item_idx[c] for c in pool], dtype=np.int64)
    except KeyError as exc:
        raise InferenceError(f"model has no factors for item {exc.args[0]!r}") from None
    pos_in_pool = {ratings.items.index(c): k for k, c in enumerate(pool) if c in ratings.items}
    pred = model.predict_all()[:, cols]
    ballots = []
    for u, voter in enumerate(ratings.users):
        is_pred = np.ones(len(pool), dtype=bool)
        value = pred[u].copy()
        for c, r in ratings.user_ratings(u).items():
            k = pos_in_pool.get(c)
            if k is not None:
                is_pred[k] = False
                value[k] = r
        order = np.lexsort((_tie_keys(seed, voter, len(pool)), -value, is_pred))
        ballots.append(Ballot(voter, tuple(pool[k] for k in order)))
    return PreferenceProfile.from_ballots(ballots, CandidatePool(tuple(sorted(pool))))


def compute_topic_similarity(expert_sets: Mapping[str, Iterable[str]]) -> tuple[list[str], np.ndarray]:
    """Jaccard similarity between the expert sets of every pair of topics."""
    topics = sorted(expert_sets)
    sets = [set(expert_sets[t]) for t in topics]
    for t, s in zip(topics, sets):
        if not s:
            raise InferenceError(f"topic {t!r} has no experts")
    k = len(topics)
    sim = np.eye(k)
    for a in range(k):
        for b in range(a + 1, k):
            sim[a, b] = sim[b, a] = len(sets[a] & sets[b]) / len(sets[a] | sets[b])
    return topics, sim


def topic_tfidf(postings: Iterable[tuple[str, str]], expert_sets: Mapping[str, Iterable[str]],
                items: Sequence[str]) -> tuple[list[str], np.ndarray]:
    """Item-topic scores from (expert, item) postings.

    tf is the number of a topic's experts who posted the item; idf is
    ln(m / (1 + number of items with that topic)), floored at 0.
    """
    topics = sorted(expert_sets)
    col = {it: k for k, it in enumerate(items)}
    members: dict[str, list[int]] = defaultdict(list)
    for j, t in enumerate(topics):
        for e in expert_sets[t]:
            members[e].append(j)
    tf = np.zeros((len(items), len(topics)))
    for expert, item in set(postings):
        if item in col:
            for j in members.get(expert, ()):
                tf[col[item], j] += 1
    m = len(items)
    df = (tf > 0).sum(axis=0)
    idf = np.maximum(0.0, np.log(m / (1.0 + df)))
    return topics, tf * idf


@dataclass(frozen=True)
class AffinityInputs:
    u: np.ndarray
    t: np.ndarray
    h: np.ndarray
    users: tuple[str, ...] = ()
    items: tuple[str, ...] = ()
    topics: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        u, t, h = (np.asarray(a, dtype=float) for a in (self.u, self.t, self.h))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "h", h)
        if u.ndim != 2 or t.ndim != 2 or h.ndim != 2:
            raise InferenceError("U, T and H must be matrices")
        if not (u.shape[1] == t.shape[0] == t.shape[1] == h.shape[1]):
            raise InferenceError(f"dimension mismatch: U {u.shape}, T {t.shape}, H {h.shape}")
        if (u < 0).any() or not np.allclose(u.sum(axis=1), 1.0, atol=1e-9):
            raise InferenceError("rows of U must be nonnegative and sum to 1")
        if not np.allclose(t, t.T) or not np.allclose(np.diag(t), 1.0) or (t < 0).any() or (t > 1).any():
            raise InferenceError("T must be symmetric with unit diagonal and entries in [0, 1]")
        if (h < 0).any():
            raise InferenceError("H entries must be nonnegative")


def compute_affinity(inputs: AffinityInputs) -> np.ndarray:
    return inputs.u @ inputs.t @ inputs.h.T


def merge_observed_votes(
    affinity: Sequence[float],
    candidates: Sequence[CandidateId],
    observed: Mapping[CandidateId, int] | Iterable[tuple[CandidateId, int]] = (),
    voter: str = "",
    seed: int = 0,
) -> Ballot:
    """Observed items first by frequency, then everything else by affinity.

    Equal frequencies fall back to affinity; remaining ties use a seeded
    shuffle.
    """
    cands = list(candidates)
    aff = np.asarray(affinity, dtype=float)
    if aff.shape != (len(cands),):
        raise InferenceError("one affinity value per candidate required")
    obs = dict(observed.items() if isinstance(observed, Mapping) else observed)
    unknown = set(obs) - set(cands)
    if unknown:
        raise InferenceError(f"observed votes for candidates outside the pool: {sorted(unknown)[:5]}")
    freq = np.zeros(len(cands))
    for k, c in enumerate(cands):
        f = obs.get(c)
        if f is not None:
            if f <= 0:
                raise InferenceError(f"observed frequency for {c!r} must be positive")
            freq[k] = f
    order = np.lexsort((_tie_keys(seed, voter, len(cands)), -aff, -freq))
    return Ballot(voter, tuple(cands[k] for k in order))


def affinity_profile(affinity: np.ndarray, users: Sequence[str], candidates: Sequence[CandidateId],
                     votes: Iterable[VoteEvent] = (), seed: int = 0) -> PreferenceProfile:
    """One merged ballot per user; vote counts serve as observed frequencies."""
    a = np.asarray(affinity, dtype=float)
    if a.shape != (len(users), len(candidates)):
        raise InferenceError(f"affinity shape {a.shape} does not match {len(users)} users x {len(candidates)} items")
    observed: dict[str, dict[str, int]] = defaultdict(dict)
    for ev in votes:
        observed[ev.voter][ev.candidate] = observed[ev.voter].get(ev.candidate, 0) + ev.multiplicity
    ballots = [merge_observed_votes(a[k], candidates, observed.get(u, {}), u, seed) for k, u in enumerate(users)]
    return PreferenceProfile.from_ballots(ballots, CandidatePool(tuple(sorted(candidates))))


def kendall_tau(r1: Ballot | Sequence[CandidateId], r2: Ballot | Sequence[CandidateId]) -> float:
    """(concordant - discordant) / (m(m-1)/2) for two strict rankings of the same set."""
    a = list(r1.ranking if isinstance(r1, Ballot) else r1)
    b = list(r2.ranking if isinstance(r2, Ballot) else r2)
    if set(a) != set(b) or len(a) != len(b) or len(set(a)) != len(a):
        raise InferenceError("rankings must order the same set of distinct candidates")
    m = len(a)
    if m < 2:
        raise InferenceError("kendall tau needs at least two candidates")
    where = {c: k for k, c in enumerate(b)}
    p = np.array([where[c] for c in a])
    # pairs (i < j) in a's order are concordant iff b keeps them in the same order
    s = np.sign(p[None, :] - p[:, None])[np.triu_indices(m, 1)]
    return float(s.sum()) / (m * (m - 1) / 2)
