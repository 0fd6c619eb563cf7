"""Uniform entry point over all counting methods."""

from __future__ import annotations

from typing import Sequence, Union

from ..core import CandidateId, ElectionResult, Method, PreferenceProfile, Round
from .plurality import plurality_star, plurality_voting, weighted_voting
from .policies import ElectionError, TieBreakPolicy, TransferPolicy, VoteEvent
from .stv import stv

ElectionInputs = Union[PreferenceProfile, Sequence[VoteEvent], Sequence[CandidateId]]


def external_result(winners: Sequence[CandidateId], k: int | None = None) -> ElectionResult:
    """Wrap a winner list produced elsewhere (e.g. a platform's own trending list)."""
    winners = tuple(str(w) for w in winners)
    if k is not None and k != len(winners):
        raise ElectionError(f"external list has {len(winners)} ids but K={k}")
    if not winners:
        raise ElectionError("external winner list is empty")
    return ElectionResult(
        Method.EXTERNAL, winners, len(winners),
        (Round(1, "external", winners),), None, {"source": "external"},
    )


def run_method(
    method: Method | str,
    inputs: ElectionInputs,
    k: int | None = None,
    transfer: TransferPolicy = TransferPolicy(),
    ties: TieBreakPolicy = TieBreakPolicy(),
    *,
    workers: int = 1,
) -> ElectionResult:
    method = Method.parse(method)
    if method is Method.EXTERNAL:
        if isinstance(inputs, PreferenceProfile) or any(isinstance(x, VoteEvent) for x in inputs):
            raise ElectionError("EXTERNAL expects a list of candidate ids")
        return external_result(inputs, k)
    if k is None:
        raise ElectionError(f"{method.value} needs K")
    if method in (Method.STV, Method.PLVSTAR):
        if not isinstance(inputs, PreferenceProfile):
            raise ElectionError(f"{method.value} needs a preference profile")
        if method is Method.STV:
            return stv(inputs, k, transfer, ties, workers=workers)
        return plurality_star(inputs, k, ties)
    if isinstance(inputs, PreferenceProfile) or not all(isinstance(x, VoteEvent) for x in inputs):
        raise ElectionError(f"{method.value} needs vote events")
    if method is Method.WV:
        return weighted_voting(inputs, k, ties)
    return plurality_voting(inputs, k, ties)
