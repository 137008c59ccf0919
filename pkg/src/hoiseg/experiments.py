"""Synthetic experiment drivers shared by scripts/ and the acceptance tests."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .anomaly import monitor_events, train_nominal
from .clustering import context_clusters, elbow_select, ensemble_merge, kmeans_dtw, wcss_curve
from .pipeline import online_events, segment_stream
from .similarity import dtw_distance
from .synth import Flaw, ScenarioSpec, default_catalog, generate_scenario

# IU type -> (template, activity index, IU index) inside that template's segmentation
IU_TYPES = {
    "grasp_profile": ("measuring", 0, 0),
    "put_in_box": ("boxing", 0, 1),
    "put_near_meter": ("measuring", 0, 1),
    "interlock": ("assembly", 0, 1),
    "disassemble": ("disassembly", 0, 0),
    "polish": ("polishing", 0, 1),
}


@dataclass
class IuSample:
    kind: str
    subject: int
    rep: int
    motion: np.ndarray
    context: tuple


def extract_iu(kind: str, subject: int, rep: int, noise: float = 0.0002, catalog=None) -> IuSample:
    template, a, i = IU_TYPES[kind]
    catalog = catalog or default_catalog()
    seed = 100_000 * list(IU_TYPES).index(kind) + 1000 * subject + rep
    sc = generate_scenario(ScenarioSpec(template, noise=noise, seed=seed, subject=subject), catalog)
    _, seg = segment_stream(sc.frames, catalog)
    iu = seg.activities[a].ius[i]
    return IuSample(kind, subject, rep, iu.motion, iu.x_c)


def iu_corpus(subjects: int = 10, reps: int = 4, noise: float = 0.0002, kinds=None) -> list[IuSample]:
    cat = default_catalog()
    return [extract_iu(k, s, r, noise, cat)
            for k in (kinds or IU_TYPES) for s in range(subjects) for r in range(reps)]


@dataclass
class ClusteringReport:
    kinds: list[str]
    wcss: dict
    k_star: int
    motion_labels: np.ndarray
    context_labels: np.ndarray
    combined: np.ndarray
    seconds: float

    def groups(self, labels) -> dict[str, set]:
        out: dict[str, set] = {}
        for kind, lab in zip(self.kinds, labels):
            out.setdefault(kind, set()).add(int(lab))
        return out

    def same_single_cluster(self, labels, kinds) -> bool:
        g = self.groups(labels)
        found = set().union(*(g[k] for k in kinds))
        return len(found) == 1

    def separates_all(self, labels) -> bool:
        g = self.groups(labels)
        kinds = list(g)
        if any(len(g[k]) != 1 for k in kinds):
            return False
        return len({next(iter(g[k])) for k in kinds}) == len(kinds)


def run_clustering(samples: list[IuSample], k_max: int = 10, restarts: int = 10, seed: int = 0,
                   dba_iters: int = 10, k: int | None = None) -> ClusteringReport:
    t0 = time.perf_counter()
    seqs = [s.motion for s in samples]
    wcss = wcss_curve(seqs, k_max, restarts, seed, dba_iters=dba_iters)
    k_star = elbow_select(wcss)
    mc = kmeans_dtw(seqs, k or k_star, restarts, seed, dba_iters=dba_iters)
    cc = context_clusters([s.context for s in samples])
    comb = ensemble_merge(mc, cc)
    return ClusteringReport([s.kind for s in samples], wcss, k_star, mc.labels, cc.labels, comb,
                            time.perf_counter() - t0)


# -- anomaly detection -------------------------------------------------------

FLAWS = {"J1": Flaw(1, 2, "halt_halfway"), "J2": Flaw(2, 2, "skip")}


@dataclass
class Execution:
    subject: int
    rep: int
    flaw: str | None
    frames: list


def job_executions(subjects: int = 7, correct: int = 3, noise: float = 0.0002) -> list[Execution]:
    out = []
    for s in range(subjects):
        for r in range(correct):
            spec = ScenarioSpec("polish_measure_job", noise=noise, seed=100 * s + r, subject=s)
            out.append(Execution(s, r, None, generate_scenario(spec).frames))
        for j, (name, fl) in enumerate(FLAWS.items()):
            spec = ScenarioSpec("polish_measure_job", noise=noise, seed=100 * s + 50 + j,
                                subject=s, flaw=fl)
            out.append(Execution(s, correct + j, name, generate_scenario(spec).frames))
    return out


@dataclass
class RoundResult:
    false_negatives: int
    flawed: int
    iu_correct: int         # per-IU verdicts on correct jobs
    iu_total: int
    jobs_correct: int
    jobs_total: int
    stream_iu_correct: int = 0   # IUs the online monitor accepted (aborts count against)
    stream_iu_total: int = 0


def iu_verdicts(seg, model, window=None) -> list[bool]:
    """Check every IU against the nominal IU at the same position.

    ``True`` means accepted. IUs with no nominal counterpart or a different
    context are rejected.
    """
    out = []
    for a, act in enumerate(seg.activities):
        for i, iu in enumerate(act.ius):
            try:
                ref = model.activities[a][i]
            except IndexError:
                out.append(False)
                continue
            out.append(iu.x_c == ref.context
                       and dtw_distance(iu.motion, ref.barycenter, window) <= ref.threshold)
    return out


@dataclass
class AnomalyReport:
    rounds: list[RoundResult] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def false_negative_rate(self) -> float:
        return sum(r.false_negatives for r in self.rounds) / max(1, sum(r.flawed for r in self.rounds))

    @property
    def iu_accuracy(self) -> float:
        return sum(r.iu_correct for r in self.rounds) / max(1, sum(r.iu_total for r in self.rounds))

    @property
    def stream_iu_accuracy(self) -> float:
        return (sum(r.stream_iu_correct for r in self.rounds)
                / max(1, sum(r.stream_iu_total for r in self.rounds)))

    @property
    def job_accuracy(self) -> float:
        return sum(r.jobs_correct for r in self.rounds) / max(1, sum(r.jobs_total for r in self.rounds))

    def per_round_iu_accuracy(self) -> list[float]:
        return [r.iu_correct / max(1, r.iu_total) for r in self.rounds]


def _events(frames, catalog):
    return list(online_events(frames, catalog))


def run_anomaly_cv(rounds: int = 10, subjects: int = 7, noise: float = 0.0002, seed: int = 0,
                   dba_iters: int = 10) -> AnomalyReport:
    """Each round trains on two correct jobs per subject and tests on the third
    plus both flawed jobs, with the held-out correct job drawn at random."""
    t0 = time.perf_counter()
    cat = default_catalog()
    execs = job_executions(subjects, 3, noise)
    # segment each job once; training reads offline results, testing replays events
    segs, events = {}, {}
    for k, e in enumerate(execs):
        _, segs[k] = segment_stream(e.frames, cat)
        events[k] = _events(e.frames, cat)
    rng = np.random.default_rng(seed)
    report = AnomalyReport()
    for _ in range(rounds):
        train, test = [], []
        for s in range(subjects):
            idx = [k for k, e in enumerate(execs) if e.subject == s and e.flaw is None]
            held = int(rng.choice(idx))
            train += [k for k in idx if k != held]
            test += [held] + [k for k, e in enumerate(execs) if e.subject == s and e.flaw]
        model = train_nominal([segs[k] for k in train], cat.params.dtw_window, dba_iters)
        rr = RoundResult(0, 0, 0, 0, 0, 0)
        for k in test:
            st = monitor_events(events[k], model, cat.params.dtw_window)
            anomalous = any(ev.is_anomaly for ev in st.events)
            if execs[k].flaw:
                rr.flawed += 1
                rr.false_negatives += int(not anomalous)
            else:
                rr.jobs_total += 1
                rr.jobs_correct += int(not anomalous)
                ok = iu_verdicts(segs[k], model, cat.params.dtw_window)
                rr.iu_total += len(ok)
                rr.iu_correct += sum(ok)
                rr.stream_iu_total += len(st.checks)
                rr.stream_iu_correct += sum(1 for _, _, alive in st.checks if alive)
        report.rounds.append(rr)
    report.seconds = time.perf_counter() - t0
    return report


def config_distances(noise: float = 0.002, reps: int = 6, configs=("C1", "C2", "C3")):
    """Mean within- and cross-configuration DTW distance of drilling IUs."""
    cat = default_catalog()
    seqs = {}
    for n, c in enumerate(configs):
        for r in range(reps):
            spec = ScenarioSpec("drilling", configuration=c, noise=noise, seed=1000 * n + r)
            sc = generate_scenario(spec, cat)
            _, seg = segment_stream(sc.frames, cat)
            seqs[c, r] = [iu.motion for iu in seg.activities[0].ius]
    within, cross = [], []
    keys = list(seqs)
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            ka, kb = keys[a], keys[b]
            if len(seqs[ka]) != len(seqs[kb]):
                continue
            d = sum(dtw_distance(x, y) for x, y in zip(seqs[ka], seqs[kb]))
            (within if ka[0] == kb[0] else cross).append(d)
    return float(np.mean(within)), float(np.mean(cross))
