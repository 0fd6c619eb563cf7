"""Indexed single transferable vote count with exact rational weights.

Each ballot keeps a pointer to its current (highest continuing) preference
and a weight class; tallies are updated incrementally as piles move, so a
ballot's pointer only ever advances.  Over a whole count a ballot advances at
most m times, which keeps total work within n*m pointer steps.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from ..core import CandidateId, ElectionResult, Method, PreferenceProfile, Round
from .policies import (
    ElectionError,
    TieBreakPolicy,
    TieBreaker,
    TransferMode,
    TransferPolicy,
    droop_quota,
)

# piles smaller than this are advanced on the calling thread
_PARALLEL_MIN = 4096


def check_stv_inputs(profile: PreferenceProfile, k: int) -> None:
    if profile.n == 0:
        raise ElectionError("empty profile")
    if k < 1:
        raise ElectionError(f"K must be at least 1, got {k}")
    if k >= profile.m:
        raise ElectionError(f"STV needs K < m (got K={k}, m={profile.m})")


class _Count:
    def __init__(self, profile: PreferenceProfile, k: int, transfer: TransferPolicy,
                 breaker: TieBreaker, workers: int) -> None:
        self.ids = profile.pool.candidates
        self.rank = profile.rankings
        self.n, self.m = self.rank.shape
        self.k = k
        self.dq = droop_quota(self.n, k).value
        self.transfer = transfer
        self.transfer_rng = transfer.rng()
        self.breaker = breaker
        self.workers = max(1, int(workers))
        self.lex = profile.pool.lex_order
        self.lex_ids = sorted(range(self.m), key=lambda c: self.ids[c])

        self.pos = np.zeros(self.n, dtype=np.int32)
        self.cur = np.asarray(self.rank[:, 0], dtype=np.int64).copy()
        self.wcls = np.zeros(self.n, dtype=np.int64)
        self.wvals: list[Fraction] = [Fraction(1)]
        self._wclass: dict[Fraction, int] = {Fraction(1): 0}
        self.continuing = np.ones(self.m, dtype=bool)
        first = np.bincount(self.cur, minlength=self.m)
        self.tally: list[Fraction] = [Fraction(int(x)) for x in first]
        self.steps = self.n
        self.exhausted = Fraction(0)
        self.winners: list[int] = []
        self.rounds: list[Round] = []

    def _class_of(self, w: Fraction) -> int:
        c = self._wclass.get(w)
        if c is None:
            c = len(self.wvals)
            self.wvals.append(w)
            self._wclass[w] = c
        return c

    def _advance_chunk(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """Move ballots in `idx` to their next continuing preference.

        Returns settled ballot ids, their new candidates, exhausted ids and the
        number of pointer steps taken.
        """
        p = self.pos[idx].astype(np.int64)
        settled_ids, settled_c, exhausted = [], [], []
        steps = 0
        while idx.size:
            p += 1
            steps += idx.size
            done = p >= self.m
            if done.any():
                exhausted.append(idx[done])
                idx, p = idx[~done], p[~done]
            c = self.rank[idx, p].astype(np.int64)
            ok = self.continuing[c]
            if ok.any():
                settled_ids.append(idx[ok])
                settled_c.append(c[ok])
                self.pos[idx[ok]] = p[ok]
            idx, p = idx[~ok], p[~ok]
        cat = lambda parts: np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        return cat(settled_ids), cat(settled_c), cat(exhausted), steps

    def _advance(self, pile: np.ndarray) -> dict[int, Fraction]:
        if self.workers > 1 and pile.size >= _PARALLEL_MIN:
            chunks = np.array_split(pile, self.workers)
            with ThreadPoolExecutor(self.workers) as pool:
                parts = list(pool.map(self._advance_chunk, chunks))
        else:
            parts = [self._advance_chunk(pile)]
        ncls = len(self.wvals)
        gained: dict[int, int] = {}
        # integer counts per (candidate, weight class); combining in chunk order is exact
        for ids, cands, gone, steps in parts:
            self.steps += steps
            self.cur[ids] = cands
            self.cur[gone] = -1
            if gone.size:
                for cls, cnt in zip(*np.unique(self.wcls[gone], return_counts=True)):
                    self.exhausted += self.wvals[cls] * int(cnt)
            keys, counts = np.unique(cands * ncls + self.wcls[ids], return_counts=True)
            for key, cnt in zip(keys.tolist(), counts.tolist()):
                gained[key] = gained.get(key, 0) + cnt
        received: dict[int, Fraction] = {}
        for key in sorted(gained):
            c, cls = divmod(key, ncls)
            amount = self.wvals[cls] * gained[key]
            self.tally[c] += amount
            received[c] = received.get(c, Fraction(0)) + amount
        return received

    def _snapshot(self) -> dict[CandidateId, Fraction]:
        return {self.ids[c]: self.tally[c] for c in self.lex_ids if self.continuing[c]}

    def _transfers(self, received: dict[int, Fraction]) -> dict[CandidateId, Fraction]:
        return {self.ids[c]: received[c] for c in sorted(received, key=lambda c: self.lex[c])}

    def _pick(self, cands: list[int]) -> int:
        chosen = self.breaker.pick([self.ids[c] for c in cands])
        return next(c for c in cands if self.ids[c] == chosen)

    def run(self) -> None:
        k, dq = self.k, self.dq
        while len(self.winners) < k:
            number = len(self.rounds) + 1
            tallies = self._snapshot()
            cont = np.flatnonzero(self.continuing).tolist()
            seats = k - len(self.winners)
            if len(cont) == seats:
                order = []
                left = list(cont)
                while left:
                    top = max(self.tally[c] for c in left)
                    c = self._pick([c for c in left if self.tally[c] == top])
                    order.append(c)
                    left.remove(c)
                self.winners.extend(order)
                self.rounds.append(Round(number, "complete", tuple(self.ids[c] for c in order), tallies,
                                         exhausted=self.exhausted))
                break
            top = max(self.tally[c] for c in cont)
            if top >= dq:
                j = self._pick([c for c in cont if self.tally[c] == top])
                self.winners.append(j)
                self.continuing[j] = False
                removed = Fraction(0)
                received: dict[int, Fraction] = {}
                if len(self.winners) < k:
                    removed, received = self._elect_transfer(j)
                self.rounds.append(Round(number, "elect", (self.ids[j],), tallies,
                                         self._transfers(received), self.exhausted, removed))
            else:
                low = min(self.tally[c] for c in cont)
                j = self._pick([c for c in cont if self.tally[c] == low])
                self.continuing[j] = False
                pile = np.flatnonzero(self.cur == j)
                received = self._advance(pile)
                self.rounds.append(Round(number, "eliminate", (self.ids[j],), tallies,
                                         self._transfers(received), self.exhausted))

    def _elect_transfer(self, j: int) -> tuple[Fraction, dict[int, Fraction]]:
        dq = self.dq
        pile = np.flatnonzero(self.cur == j)
        total = self.tally[j]
        if self.transfer.mode is TransferMode.RANDOM_WHOLE_VOTE:
            drop = np.array(sorted(self.transfer_rng.sample(pile.tolist(), dq)), dtype=np.int64)
            self.cur[drop] = -1
            keep = np.setdiff1d(pile, drop, assume_unique=True)
            return Fraction(dq), self._advance(keep)
        factor = (total - dq) / total
        if factor == 0:
            self.cur[pile] = -1
            return Fraction(dq), {}
        classes = np.unique(self.wcls[pile])
        remap = np.arange(len(self.wvals), dtype=np.int64)
        for cls in classes.tolist():
            remap[cls] = self._class_of(self.wvals[cls] * factor)
        self.wcls[pile] = remap[self.wcls[pile]]
        return Fraction(dq), self._advance(pile)


def stv(
    profile: PreferenceProfile,
    k: int,
    transfer: TransferPolicy = TransferPolicy(),
    ties: TieBreakPolicy = TieBreakPolicy(),
    *,
    workers: int = 1,
) -> ElectionResult:
    """Single transferable vote with Droop quota over complete ballots.

    Each round elects the highest candidate at or above quota (passing its
    surplus on per `transfer`), or else eliminates the lowest.  Once the
    continuing candidates exactly fill the open seats they are all elected.
    `workers` > 1 advances large piles on several threads; the result is
    identical for any worker count.
    """
    check_stv_inputs(profile, k)
    count = _Count(profile, k, transfer, ties.breaker(), workers)
    count.run()
    return ElectionResult(
        Method.STV,
        tuple(count.ids[c] for c in count.winners),
        k,
        tuple(count.rounds),
        transfer.seed,
        {
            "quota": count.dq,
            "transfer": transfer.mode.value,
            "transfer_seed": transfer.seed,
            "tiebreak": ties.mode.value,
            "tiebreak_seed": ties.seed,
            "ballot_steps": count.steps,
            "ballots": count.n,
            "candidates": count.m,
        },
    )
