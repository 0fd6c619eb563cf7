"""Naive STV count used as an oracle for the indexed implementation.

Deliberately simple: every round rescans every ballot from its top
preference.  No pointers, no incremental tallies, no numpy.
"""

from __future__ import annotations

from fractions import Fraction

from ..core import CandidateId, ElectionResult, Method, PreferenceProfile, Round
from .policies import ElectionError, TieBreakPolicy, TransferMode, TransferPolicy


class _Slip:
    __slots__ = ("ranking", "weight", "live")

    def __init__(self, ranking: tuple[CandidateId, ...]) -> None:
        self.ranking = ranking
        self.weight = Fraction(1)
        self.live = True


def _top(slip: _Slip, continuing: set[CandidateId]) -> CandidateId | None:
    for c in slip.ranking:
        if c in continuing:
            return c
    return None


def reference_stv(
    profile: PreferenceProfile,
    k: int,
    transfer: TransferPolicy = TransferPolicy(),
    ties: TieBreakPolicy = TieBreakPolicy(),
) -> ElectionResult:
    if profile.n == 0:
        raise ElectionError("empty profile")
    if k < 1 or k >= profile.m:
        raise ElectionError(f"STV needs 1 <= K < m (got K={k}, m={profile.m})")
    slips = [_Slip(b.ranking) for b in profile]
    n = len(slips)
    dq = n // (k + 1) + 1
    continuing = set(profile.pool.candidates)
    winners: list[CandidateId] = []
    rounds: list[Round] = []
    breaker = ties.breaker()
    rng = transfer.rng()
    exhausted = Fraction(0)

    def tallies() -> dict[CandidateId, Fraction]:
        t = {c: Fraction(0) for c in sorted(continuing)}
        for p in slips:
            if p.live:
                t[_top(p, continuing)] += p.weight
        return t

    def move(pile: list[int]) -> dict[CandidateId, Fraction]:
        nonlocal exhausted
        got: dict[CandidateId, Fraction] = {}
        for i in pile:
            p = slips[i]
            nxt = _top(p, continuing)
            if nxt is None:
                p.live = False
                exhausted += p.weight
            else:
                got[nxt] = got.get(nxt, Fraction(0)) + p.weight
        return dict(sorted(got.items()))

    while len(winners) < k:
        t = tallies()
        seats = k - len(winners)
        if len(continuing) == seats:
            left = sorted(continuing)
            order = []
            while left:
                best = max(t[c] for c in left)
                c = breaker.pick([c for c in left if t[c] == best])
                order.append(c)
                left.remove(c)
            winners.extend(order)
            rounds.append(Round(len(rounds) + 1, "complete", tuple(order), t, exhausted=exhausted))
            break
        best = max(t.values())
        if best >= dq:
            j = breaker.pick([c for c, v in t.items() if v == best])
            pile = [i for i, p in enumerate(slips) if p.live and _top(p, continuing) == j]
            winners.append(j)
            continuing.discard(j)
            got: dict[CandidateId, Fraction] = {}
            removed = Fraction(0)
            if len(winners) < k:
                removed = Fraction(dq)
                if transfer.mode is TransferMode.RANDOM_WHOLE_VOTE:
                    gone = set(rng.sample(pile, dq))
                    for i in gone:
                        slips[i].live = False
                    pile = [i for i in pile if i not in gone]
                else:
                    factor = (t[j] - dq) / t[j]
                    for i in pile:
                        slips[i].weight *= factor
                        if slips[i].weight == 0:
                            slips[i].live = False
                    pile = [i for i in pile if slips[i].live]
                got = move(pile)
            rounds.append(Round(len(rounds) + 1, "elect", (j,), t, got, exhausted, removed))
        else:
            low = min(t.values())
            j = breaker.pick([c for c, v in t.items() if v == low])
            pile = [i for i, p in enumerate(slips) if p.live and _top(p, continuing) == j]
            continuing.discard(j)
            got = move(pile)
            rounds.append(Round(len(rounds) + 1, "eliminate", (j,), t, got, exhausted))

    return ElectionResult(
        Method.STV, tuple(winners), k, tuple(rounds), transfer.seed,
        {"quota": dq, "transfer": transfer.mode.value, "tiebreak": ties.mode.value, "reference": True},
    )


def trace_mismatches(fast: ElectionResult, slow: ElectionResult) -> list[str]:
    """Human-readable differences between two STV counts; empty when identical."""
    out = []
    if fast.winners != slow.winners:
        out.append(f"winners {fast.winners} != {slow.winners}")
    if len(fast.rounds) != len(slow.rounds):
        out.append(f"{len(fast.rounds)} rounds != {len(slow.rounds)}")
    for a, b in zip(fast.rounds, slow.rounds):
        # compare serialized forms so key order counts too
        if list(a.to_dict().items()) != list(b.to_dict().items()) or any(
                list(a.to_dict()[f].items()) != list(b.to_dict()[f].items()) for f in ("tallies", "transfers")):
            out.append(f"round {a.number}: {a.to_dict()} != {b.to_dict()}")
            break
    return out
