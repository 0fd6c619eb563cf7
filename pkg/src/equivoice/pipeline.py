"""Config-driven runs: ingest, optional inference, elections, metrics, artifacts."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from . import io as eio
from .core import ElectionResult, Method, PreferenceProfile
from .elections import TieBreakMode, TieBreakPolicy, TransferMode, TransferPolicy, run_method
from .elections.policies import VoteEvent
from .inference import (
    AffinityInputs,
    ImplicitFeedback,
    RatingMatrix,
    affinity_profile,
    compute_affinity,
    compute_topic_similarity,
    infer_profile,
    topic_tfidf,
    train_nmf,
)
from .metrics import DemographicData, DemographicVector, MetricError, MetricsReport, jaccard_overlap, metrics_report
from .simulation import ElectorateSpec, generate_electorate, sample_electorate, table1_fixture

# fields that change how a run executes but never what it produces
_EXECUTION_ONLY = ("workers", "output_dir")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    methods: list[str] = field(default_factory=lambda: ["STV"])
    k: int = 1
    profile: str | None = None
    pool: str | None = None
    events: str | None = None
    external: str | None = None
    fixture: str | None = None
    simulate: dict[str, Any] | None = None
    infer: dict[str, Any] | None = None
    sample: dict[str, Any] | None = None
    transfer: str = "fractional"
    transfer_seed: int = 0
    tiebreak: str = "lex"
    tiebreak_seed: int = 0
    t: int = 10
    x: float = 10
    threshold: float = 0.8
    bins: int = 10
    demographics: str | None = None
    workers: int = 1
    output_dir: str = "out"

    def __post_init__(self) -> None:
        self.methods = [Method.parse(m).value for m in self.methods]
        if not self.methods:
            raise ValueError("at least one method is required")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        TransferMode(self.transfer)
        TieBreakMode(self.tiebreak)
        sources = [s for s in (self.profile, self.fixture, self.simulate) if s is not None]
        if len(sources) > 1:
            raise ValueError("give at most one of profile, fixture and simulate")
        if self.fixture is not None and self.fixture != "table1":
            raise ValueError(f"unknown fixture {self.fixture!r}")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base: str | Path | None = None) -> RunConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        data = dict(d)
        if base is not None:
            for key in ("profile", "pool", "events", "external", "demographics", "output_dir"):
                if data.get(key):
                    data[key] = str(Path(base) / data[key])
            if data.get("infer"):
                inf = dict(data["infer"])
                for key in ("feedback", "u", "experts", "h", "postings"):
                    if inf.get(key):
                        inf[key] = str(Path(base) / inf[key])
                data["infer"] = inf
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        """JSON config; relative paths resolve against the config's directory."""
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise FileNotFoundError(f"no such file: {path}") from None
        return cls.from_dict(raw, path.parent)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _EXECUTION_ONLY}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode("utf-8")).hexdigest()

    def seeds(self) -> dict[str, Any]:
        out: dict[str, Any] = {"transfer_seed": self.transfer_seed, "tiebreak_seed": self.tiebreak_seed}
        if self.simulate is not None:
            out["simulate_seed"] = self.simulate.get("seed", 0)
        if self.infer is not None:
            out["infer_seed"] = self.infer.get("seed", 0)
        if self.sample is not None:
            out["sample_seed"] = self.sample.get("seed", 0)
        return out


@dataclass
class RunManifest:
    config: dict[str, Any]
    config_digest: str
    version: str
    inputs: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    status: str = "ok"
    failed_stage: str | None = None
    error: str | None = None

    @property
    def authoritative(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["authoritative"] = self.authoritative
        return d


@dataclass
class Comparison:
    reports: list[MetricsReport]
    jaccard: dict[str, dict[str, float]]

    def to_dict(self) -> dict[str, Any]:
        return {"reports": [r.to_dict() for r in self.reports], "jaccard": self.jaccard}


def _label(result: ElectionResult, seen: dict[str, int]) -> str:
    tag = result.method.value
    seen[tag] = seen.get(tag, 0) + 1
    return tag if seen[tag] == 1 else f"{tag}#{seen[tag]}"


def compare_methods(
    results: Sequence[ElectionResult],
    profile: PreferenceProfile,
    *,
    events: Sequence[VoteEvent] | None = None,
    demographics: DemographicData | None = None,
    t: int = 10,
    x: float = 10,
    threshold: float = 0.8,
    bins: int = 10,
) -> Comparison:
    """Metrics per method plus the pairwise winner-set overlap table."""
    seen: dict[str, int] = {}
    labels = [_label(r, seen) for r in results]
    for label, r in zip(labels, results):
        outside = [w for w in r.winners if w not in profile.pool]
        if outside:
            raise MetricError(f"pool mismatch: {label} winners {outside[:5]} are not in the profile's pool")
    table = {a: {b: jaccard_overlap(ra.winners, rb.winners) for b, rb in zip(labels, results)}
             for a, ra in zip(labels, results)}
    reports = []
    for label, r in zip(labels, results):
        rep = metrics_report(label, r.winners, profile, t=t, x=x, threshold=threshold, bins=bins,
                             demographics=demographics, events=events)
        rep.jaccard = {b: v for b, v in table[label].items() if b != label}
        reports.append(rep)
    return Comparison(reports, table)


def write_comparison(out_dir: Path, comp: Comparison, header: Mapping[str, Any]) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "metrics.json", out_dir / "metrics.csv", out_dir / "jaccard.csv"]
    eio.write_json(paths[0], {**header, **comp.to_dict()})
    with open(paths[1], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "metric", "value"])
        for rep in comp.reports:
            for row in rep.rows():
                w.writerow([row[0], row[1], repr(float(row[2]))])
    labels = list(comp.jaccard)
    eio.write_matrix_csv(paths[2], labels, labels, np.array([[comp.jaccard[a][b] for b in labels] for a in labels]),
                         corner="method")
    return paths


def affinity_from_files(u_path: str, experts_path: str, h_path: str | None = None,
                        postings_path: str | None = None) -> tuple[list[str], list[str], np.ndarray, dict[str, Any]]:
    """Users, items and the affinity matrix built from CSV inputs."""
    users, u_topics, u = eio.read_matrix_csv(u_path)
    topics, sim = compute_topic_similarity(eio.read_expert_sets(experts_path))
    if h_path is not None:
        items, h_topics, h = eio.read_matrix_csv(h_path)
        meta = {"h": "file"}
    elif postings_path is not None:
        pairs = [(e, i) for e, i, _ in eio.read_pairs_csv(postings_path)]
        items = sorted({i for _, i in pairs})
        h_topics, h = topic_tfidf(pairs, eio.read_expert_sets(experts_path), items)
        meta = {"h": "tfidf", "tf": "experts posting item", "idf": "max(0, ln(m / (1 + df)))"}
    else:
        raise ValueError("affinity needs an item-topic matrix or a postings file")
    if set(u_topics) != set(topics) or set(h_topics) != set(topics):
        raise eio.DataFormatError("U, H and expert files must cover the same topics")
    u = u[:, [u_topics.index(tp) for tp in topics]]
    h = h[:, [list(h_topics).index(tp) for tp in topics]]
    inputs = AffinityInputs(u, sim, h, tuple(users), tuple(items), tuple(topics))
    return users, list(items), compute_affinity(inputs), meta


def load_demographics(path: str, profile: PreferenceProfile) -> DemographicData:
    cats, table = eio.read_demographics(path)
    known = [table[v] for v in profile.voters if v in table]
    if not known:
        raise eio.DataFormatError(f"{path}: no demographic rows for voters in the profile")
    return DemographicData(tuple(cats), table, DemographicVector.from_counts(cats, np.sum(known, axis=0)))


class _Run:
    def __init__(self, config: RunConfig) -> None:
        self.cfg = config
        self.out = Path(config.output_dir)
        self.manifest = RunManifest(config.to_dict(), config.digest(), __version__)
        self.header = {"config_digest": self.manifest.config_digest, "seeds": config.seeds()}
        self.profile: PreferenceProfile | None = None
        self.events: list[VoteEvent] | None = None
        self.results: list[ElectionResult] = []

    def _input(self, path: str) -> str:
        self.manifest.inputs[path] = eio.file_digest(path)
        return path

    def _output(self, path: Path) -> None:
        self.manifest.outputs[path.name] = eio.file_digest(path)

    def stage(self, name: str, fn) -> None:
        start = time.perf_counter()
        try:
            fn()
        except Exception as exc:
            self.manifest.status = "failed"
            self.manifest.failed_stage = name
            self.manifest.error = str(exc)
            self.write_manifest()
            raise PipelineError(name, exc) from exc
        finally:
            self.manifest.timings[name] = round(time.perf_counter() - start, 6)

    def ingest(self) -> None:
        c = self.cfg
        if c.profile is not None:
            pool = eio.read_pool(self._input(c.pool)) if c.pool else None
            self.profile = eio.read_profile(self._input(c.profile), pool)
        elif c.fixture == "table1":
            self.profile = table1_fixture()
        elif c.simulate is not None:
            self.profile, self.events = generate_electorate(ElectorateSpec.from_dict(c.simulate))
        if c.events is not None:
            self.events = eio.read_votes(self._input(c.events))

    def infer(self) -> None:
        spec = dict(self.cfg.infer or {})
        kind = spec.pop("kind", None)
        seed = int(spec.get("seed", 0))
        if kind == "nmf":
            fb = ImplicitFeedback(tuple(eio.read_feedback(self._input(spec["feedback"]))))
            pool = list(spec["pool"]) if spec.get("pool") else None
            ratings = RatingMatrix.from_feedback(fb, pool)
            model = train_nmf(ratings, int(spec.get("z", 20)), float(spec.get("lambda", 0.05)),
                              float(spec.get("learning_rate", 0.005)), int(spec.get("epochs", 50)), seed)
            self.out.mkdir(parents=True, exist_ok=True)
            model.save(self.out / "model.json")
            self._output(self.out / "model.json")
            self.profile = infer_profile(ratings, model, pool, seed)
        elif kind == "affinity":
            for key in ("u", "experts", "h", "postings"):
                if spec.get(key):
                    self._input(spec[key])
            users, items, aff, _ = affinity_from_files(spec["u"], spec["experts"], spec.get("h"), spec.get("postings"))
            self.profile = affinity_profile(aff, users, items, self.events or (), seed)
        else:
            raise ValueError(f"infer.kind must be 'nmf' or 'affinity', got {kind!r}")

    def sample(self) -> None:
        s = self.cfg.sample or {}
        if self.profile is None:
            raise ValueError("nothing to sample: no profile")
        self.profile = sample_electorate(self.profile, float(s.get("fraction", 1.0)), int(s.get("seed", 0)))

    def elect(self) -> None:
        c = self.cfg
        transfer = TransferPolicy(TransferMode(c.transfer), c.transfer_seed)
        ties = TieBreakPolicy(TieBreakMode(c.tiebreak), c.tiebreak_seed)
        for tag in c.methods:
            method = Method.parse(tag)
            if method is Method.EXTERNAL:
                if c.external is None:
                    raise ValueError("EXTERNAL needs an 'external' winner-list file")
                inputs: Any = eio.read_winner_list(self._input(c.external))
                k = None
            elif method in (Method.STV, Method.PLVSTAR):
                if self.profile is None:
                    raise ValueError(f"{method.value} needs a profile")
                inputs, k = self.profile, c.k
            else:
                if self.events is None:
                    raise ValueError(f"{method.value} needs vote events")
                inputs, k = self.events, c.k
            self.results.append(run_method(method, inputs, k, transfer, ties, workers=c.workers))
        self.out.mkdir(parents=True, exist_ok=True)
        seen: dict[str, int] = {}
        for r in self.results:
            path = self.out / f"result_{_label(r, seen).replace('#', '_')}.json"
            eio.write_json(path, {**self.header, "result": r.to_dict()})
            self._output(path)

    def metrics(self) -> None:
        c = self.cfg
        if self.profile is None:
            raise ValueError("metrics need a profile")
        demo = load_demographics(self._input(c.demographics), self.profile) if c.demographics else None
        comp = compare_methods(self.results, self.profile, events=self.events, demographics=demo,
                               t=c.t, x=c.x, threshold=c.threshold, bins=c.bins)
        for path in write_comparison(self.out, comp, self.header):
            self._output(path)

    def write_manifest(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        eio.write_json(self.out / "manifest.json", self.manifest.to_dict())


def run_pipeline(config: RunConfig) -> RunManifest:
    """ingest -> infer (optional) -> sample (optional) -> elect -> metrics.

    Writes one result file per method, metrics JSON/CSV, the overlap table
    and manifest.json into the output directory.
    """
    run = _Run(config)
    run.stage("ingest", run.ingest)
    if config.infer is not None:
        run.stage("infer", run.infer)
    if config.sample is not None:
        run.stage("sample", run.sample)
    run.stage("elect", run.elect)
    run.stage("metrics", run.metrics)
    run.write_manifest()
    return run.manifest
