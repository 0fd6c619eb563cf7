from .dispatch import external_result, run_method
from .plurality import plurality_star, plurality_voting, weighted_voting
from .policies import (
    DroopQuota,
    ElectionError,
    TieBreakMode,
    TieBreakPolicy,
    TransferMode,
    TransferPolicy,
    VoteEvent,
    droop_quota,
)
from .reference import reference_stv, trace_mismatches
from .stv import stv

__all__ = [
    "DroopQuota", "ElectionError", "TieBreakMode", "TieBreakPolicy", "TransferMode",
    "TransferPolicy", "VoteEvent", "droop_quota", "external_result", "plurality_star",
    "plurality_voting", "reference_stv", "run_method", "stv", "trace_mismatches", "weighted_voting",
]
