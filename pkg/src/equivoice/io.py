"""Readers and writers for profiles, pools, event logs, matrices and results.

Text formats:

* profile: ``voter_id<TAB>cand1,cand2,...`` per line, most preferred first;
  ``#`` starts a comment line.
* pool: ``candidate_id<TAB>usage_current<TAB>usage_previous``.
* event log: JSON lines ``{"ts": epoch_seconds, "voter": id, "item": id}``,
  optionally with ``"count"``.
* winner list: one candidate id per line.
* feedback: CSV ``user_id,item_id,duration_seconds``; expert sets: CSV
  ``topic_id,expert_id``; matrices: CSV with a header row of column ids.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import defaultdict
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .core import Ballot, CandidatePool, ElectionResult, PreferenceProfile, ProfileError
from .elections.policies import VoteEvent


class DataFormatError(ValueError):
    """Raised when an input file cannot be parsed."""


def _content_lines(text: str) -> Iterable[tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file: {path}") from None


def parse_ballots(text: str) -> list[Ballot]:
    ballots = []
    for lineno, line in _content_lines(text):
        voter, sep, rest = line.partition("\t")
        if not sep:
            raise DataFormatError(f"line {lineno}: expected voter_id<TAB>ranking")
        ranking = tuple(c.strip() for c in rest.split(",") if c.strip())
        ballots.append(Ballot(voter.strip(), ranking))
    return ballots


def read_profile(path: str | Path, pool: CandidatePool | None = None) -> PreferenceProfile:
    ballots = parse_ballots(_read_text(path))
    if not ballots:
        raise DataFormatError(f"{path}: no ballots")
    try:
        return PreferenceProfile.from_ballots(ballots, pool)
    except ProfileError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def format_profile(profile: PreferenceProfile) -> str:
    cands = profile.pool.candidates
    lines = [f"{v}\t" + ",".join(cands[j] for j in row) for v, row in zip(profile.voters, profile.rankings)]
    return "\n".join(lines) + "\n"


def write_profile(path: str | Path, profile: PreferenceProfile) -> None:
    Path(path).write_text(format_profile(profile), encoding="utf-8")


def read_pool(path: str | Path) -> CandidatePool:
    ids, cur, prev = [], [], []
    for lineno, line in _content_lines(_read_text(path)):
        parts = line.split("\t")
        ids.append(parts[0].strip())
        try:
            cur.append(int(parts[1]) if len(parts) > 1 else 0)
            prev.append(int(parts[2]) if len(parts) > 2 else 0)
        except ValueError:
            raise DataFormatError(f"{path} line {lineno}: usage counts must be integers") from None
    return CandidatePool(tuple(ids), tuple(cur), tuple(prev))


def write_pool(path: str | Path, pool: CandidatePool) -> None:
    cur = pool.usage_current or (0,) * pool.m
    prev = pool.usage_previous or (0,) * pool.m
    Path(path).write_text(
        "".join(f"{c}\t{a}\t{b}\n" for c, a, b in zip(pool.candidates, cur, prev)), encoding="utf-8"
    )


def read_event_log(path: str | Path) -> list[dict[str, Any]]:
    """Raw event records, each with ``ts``, ``voter``, ``item`` and ``count``."""
    out = []
    for lineno, line in _content_lines(_read_text(path)):
        try:
            rec = json.loads(line)
            out.append({
                "ts": float(rec.get("ts", 0)),
                "voter": str(rec["voter"]),
                "item": str(rec["item"]),
                "count": int(rec.get("count", 1)),
            })
        except (ValueError, KeyError, TypeError) as exc:
            raise DataFormatError(f"{path} line {lineno}: bad event record ({exc})") from None
    return out


def write_event_log(path: str | Path, records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def aggregate_votes(records: Iterable[dict[str, Any]]) -> list[VoteEvent]:
    """Collapse raw records to one VoteEvent per (voter, item)."""
    totals: dict[tuple[str, str], int] = defaultdict(int)
    for rec in records:
        totals[(str(rec["voter"]), str(rec["item"]))] += int(rec.get("count", 1))
    return [VoteEvent(v, c, k) for (v, c), k in sorted(totals.items())]


def read_votes(path: str | Path) -> list[VoteEvent]:
    return aggregate_votes(read_event_log(path))


def read_winner_list(path: str | Path) -> list[str]:
    return [line.strip() for _, line in _content_lines(_read_text(path))]


def read_matrix_csv(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    """CSV whose header row holds column ids; first column holds row ids."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataFormatError(f"{path}: empty matrix file")
    header, body = rows[0], rows[1:]
    cols = [c.strip() for c in header[1:]]
    try:
        data = np.array([[float(x) for x in r[1:]] for r in body], dtype=float).reshape(len(body), len(cols))
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    return [r[0].strip() for r in body], cols, data


def write_matrix_csv(path: str | Path, row_ids: Sequence[str], col_ids: Sequence[str], data: np.ndarray,
                     corner: str = "id") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([corner, *col_ids])
        for rid, row in zip(row_ids, np.asarray(data)):
            w.writerow([rid, *(repr(float(x)) for x in row)])


def read_pairs_csv(path: str | Path, value: type = str) -> list[tuple[str, str, Any]]:
    """Rows of ``a,b[,value]`` with a header line."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    out = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) < 2:
            raise DataFormatError(f"{path} line {lineno}: expected at least two columns")
        try:
            out.append((r[0].strip(), r[1].strip(), value(r[2]) if len(r) > 2 else None))
        except ValueError:
            raise DataFormatError(f"{path} line {lineno}: bad value {r[2]!r}") from None
    return out


def read_demographics(path: str | Path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Per-voter demographic vectors.

    Accepts long form ``voter_id,category,value`` or one-hot/wide form
    ``voter_id,cat1,...,catk``.  Returns the category names and a mapping
    voter -> vector over them.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataFormatError(f"{path}: empty demographics file")
    header = [h.strip().lower() for h in rows[0]]
    if header[:3] == ["voter_id", "category", "value"]:
        cats = sorted({r[1].strip() for r in rows[1:]})
        col = {c: i for i, c in enumerate(cats)}
        vecs: dict[str, np.ndarray] = {}
        for r in rows[1:]:
            v = vecs.setdefault(r[0].strip(), np.zeros(len(cats)))
            v[col[r[1].strip()]] += float(r[2])
        return cats, vecs
    cats = [h.strip() for h in rows[0][1:]]
    return cats, {r[0].strip(): np.array([float(x) for x in r[1:]]) for r in rows[1:]}


def read_feedback(path: str | Path) -> list[tuple[str, str, float]]:
    """Dwell-time CSV ``user_id,item_id,duration_seconds`` with a header line."""
    rows = read_pairs_csv(path, float)
    for u, i, v in rows:
        if v is None:
            raise DataFormatError(f"{path}: missing duration for ({u}, {i})")
    return rows


def read_expert_sets(path: str | Path) -> dict[str, set[str]]:
    """Long-form CSV ``topic_id,expert_id``."""
    sets: dict[str, set[str]] = defaultdict(set)
    for topic, expert, _ in read_pairs_csv(path):
        sets[topic].add(expert)
    return dict(sets)


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def write_result(path: str | Path, result: ElectionResult) -> None:
    write_json(path, result.to_dict())


def read_result(path: str | Path) -> ElectionResult:
    return ElectionResult.from_dict(json.loads(_read_text(path)))


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
