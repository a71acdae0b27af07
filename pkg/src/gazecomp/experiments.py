"""Experiment drivers: variant training, split scoring, ablations, analysis."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .evaluation import (
    MetricsReport,
    cramers_v_test,
    point_biserial_test,
    stable_threshold_interval,
    threshold_sweep,
)
from .errors import UndefinedMetricError
from .pipeline import ScoreStream, detect_multi, extract_windows, label_stream, pooled_pairs
from .scoring import ScoreRecord, late_fuse
from .synthetic import generate_benchmark
from .training import train

log = logging.getLogger(__name__)


def training_windows(sessions, F, stride=1):
    return [w for s in sessions for w in extract_windows(s, F, stride)]


def variant_tag(model_config):
    return f"{model_config.fusion_mode}/F{model_config.F}/sigma{model_config.sigma}"


def train_variant(run, train_sessions, model_config=None, callback=None):
    mc = model_config or run.model
    windows = training_windows(train_sessions, mc.F, run.train_stride)
    log.info("training %s on %d windows", variant_tag(mc), len(windows))
    return train(windows, mc, run.train_config(), model_seed=run.model_seed(variant_tag(mc)),
                 callback=callback)


def score_split(model, sessions, scorings, run):
    """{scoring: [ScoreStream per session]} with one forward pass per window."""
    out = {f: [] for f in scorings}
    cfg = run.to_dict()
    for s in sessions:
        streams = detect_multi(s, model, scorings, run.stride, run.inference_batch, cfg)
        for f in scorings:
            out[f].append(streams[f])
    return out


def evaluate_streams(sessions, streams, run, F):
    scores, labels = pooled_pairs(sessions, streams, run.label_mode, F)
    return threshold_sweep(scores, labels)


def random_streams(streams, seed):
    """Uniform random scores on exactly the timesteps scored in ``streams``."""
    rng = np.random.default_rng(seed)
    out = []
    for st in streams:
        recs = [r if r.absent else ScoreRecord(r.timestep, float(rng.random()), "random", r.frames_used)
                for r in st.records]
        out.append(ScoreStream(st.session_id, "random", recs, st.config))
    return out


def late_fusion_streams(a_streams, b_streams):
    """Fuse per session after normalizing over the whole split."""
    a_all = [r for st in a_streams for r in st.records]
    b_all = [r for st in b_streams for r in st.records]
    fused = late_fuse(a_all, b_all)
    name = f"late({a_streams[0].function_id}+{b_streams[0].function_id})" if a_streams else "late"
    out, pos = [], 0
    for st in a_streams:
        n = len(st.records)
        recs = [replace(r, function_id=name) for r in fused[pos:pos + n]]
        out.append(ScoreStream(st.session_id, name, recs, st.config))
        pos += n
    return out


@dataclass
class GridCell:
    fusion: str
    scoring: str
    report: MetricsReport

    def row(self):
        return {"fusion": self.fusion, "scoring": self.scoring, **self.report.summary()}


@dataclass
class AblationResult:
    cells: list = field(default_factory=list)
    streams: dict = field(default_factory=dict)  # (fusion, scoring) -> streams
    models: dict = field(default_factory=dict)   # fusion -> TrainResult

    def cell(self, fusion, scoring):
        for c in self.cells:
            if c.fusion == fusion and c.scoring == scoring:
                return c
        raise KeyError((fusion, scoring))

    def rows(self):
        return [c.row() for c in self.cells]


def ablation_grid(run, benchmark, fusions=None, scorings=None, keep_streams=False):
    """One MetricsReport per (fusion, scoring) cell on the test split.

    Extra rows: a random-score baseline and late fusion of
    ``run.late_fusion_pair`` for each fusion mode.
    """
    fusions = tuple(fusions or run.ablation_fusions)
    scorings = tuple(scorings or run.ablation_scorings)
    needed = tuple(dict.fromkeys(scorings + tuple(run.late_fusion_pair)))
    result = AblationResult()
    F = run.model.F
    base = None
    for fusion in fusions:
        mc = replace(run.model, fusion_mode=fusion)
        res = train_variant(run, benchmark.train, mc)
        result.models[fusion] = res
        streams = score_split(res.model, benchmark.test, needed, run)
        for f in scorings:
            result.cells.append(GridCell(fusion, f, evaluate_streams(benchmark.test, streams[f], run, F)))
            if keep_streams:
                result.streams[(fusion, f)] = streams[f]
        a, b = run.late_fusion_pair
        fused = late_fusion_streams(streams[a], streams[b])
        result.cells.append(GridCell(fusion, fused[0].function_id if fused else "late",
                                     evaluate_streams(benchmark.test, fused, run, F)))
        base = base or streams[scorings[0]]
    if base is not None:
        rnd = random_streams(base, run.seed_for("random_baseline"))
        result.cells.append(GridCell("random", "random", evaluate_streams(benchmark.test, rnd, run, F)))
    return result


def prediction_length_ablation(run, benchmark, lengths=None, scoring=None):
    """Heatmap-scored reports for models predicting ``n`` frames (F = 2n)."""
    lengths = tuple(lengths or run.prediction_lengths)
    scoring = scoring or run.scoring
    rows = []
    for n in lengths:
        mc = replace(run.model, F=2 * n)
        res = train_variant(run, benchmark.train, mc)
        streams = score_split(res.model, benchmark.test, (scoring,), run)[scoring]
        rep = evaluate_streams(benchmark.test, streams, run, mc.F)
        rows.append({"prediction_length": n, "F": mc.F, "scoring": scoring, **rep.summary()})
    return rows


def session_success(sessions, streams, threshold, run, F):
    """Per-session success: frame accuracy at ``threshold`` at least the pooled accuracy."""
    by_id = {s.session_id: s for s in sessions}
    acc, all_hits, all_n = {}, 0, 0
    for st in streams:
        triples = label_stream(by_id[st.session_id], st, run.label_mode, F)
        if not triples:
            continue
        s = np.array([t[1] for t in triples])
        y = np.array([t[2] for t in triples])
        hits = int(np.sum((s > threshold) == (y == 1)))
        acc[st.session_id] = hits / len(y)
        all_hits += hits
        all_n += len(y)
    pooled = all_hits / all_n if all_n else 0.0
    return {sid: int(a >= pooled) for sid, a in acc.items()}, pooled


def analysis_stats(run, sessions, streams, report, F):
    """Difficulty vs success (point-biserial) and action type vs success (Cramer's V)."""
    success, pooled = session_success(sessions, streams, report.best_threshold, run, F)
    meta = {s.session_id: s.metadata for s in sessions}
    ids = sorted(success)
    succ = [success[i] for i in ids]
    diff = [meta[i]["difficulty"] for i in ids]
    acts = [meta[i]["action_type"] for i in ids]
    out = {"pooled_accuracy": pooled, "n_sessions": len(ids), "success_rate": float(np.mean(succ)) if ids else 0.0}
    seed = run.seed_for("permutation")
    try:
        r, p = point_biserial_test(diff, succ, run.permutations, seed)
        out["point_biserial"], out["point_biserial_p"] = r, p
    except UndefinedMetricError as exc:
        out["point_biserial"], out["point_biserial_p"] = None, None
        out["point_biserial_error"] = str(exc)
    try:
        v, p = cramers_v_test(acts, succ, run.permutations, seed)
        out["cramers_v"], out["cramers_v_p"] = v, p
    except UndefinedMetricError as exc:
        out["cramers_v"], out["cramers_v_p"] = None, None
        out["cramers_v_error"] = str(exc)
    per_action = {}
    for a, s in zip(acts, succ):
        per_action.setdefault(a, []).append(s)
    out["per_action"] = {a: {"sessions": len(v), "success_rate": float(np.mean(v))}
                         for a, v in sorted(per_action.items())}
    return out


def benchmark_for(run):
    return generate_benchmark(run.benchmark, run.seed_for("benchmark"))



@dataclass
class DetectionSummary:
    reports: dict
    streams: dict
    models: dict
    test_sessions: list
    stable: tuple


DETECTION_VARIANTS = (("both/one_class", "one_class", "both"),
                      ("none/one_class", "one_class", "none"),
                      ("both/unsupervised", "unsupervised", "both"))


def detection_summary(run, progress=None):
    """Train CH+CORR and no-fusion variants under both supervision modes.

    Every variant is scored on the one-class test split; the two benchmarks
    share it because test sessions are drawn from the same seeds.
    """
    benches = {mode: benchmark_for(replace(run, benchmark=replace(run.benchmark, mode=mode)))
               for mode in ("one_class", "unsupervised")}
    test = benches["one_class"].test
    reports, streams, models = {}, {}, {}
    for name, mode, fusion in DETECTION_VARIANTS:
        res = train_variant(run, benches[mode].train, replace(run.model, fusion_mode=fusion))
        streams[name] = score_split(res.model, test, (run.scoring,), run)[run.scoring]
        reports[name] = evaluate_streams(test, streams[name], run, run.model.F)
        models[name] = res.model
        if progress:
            progress(name, reports[name])
    streams["random"] = random_streams(streams["both/one_class"], run.seed_for("random_baseline"))
    reports["random"] = evaluate_streams(test, streams["random"], run, run.model.F)
    stable = stable_threshold_interval(reports["both/one_class"], run.stability_tolerance)
    return DetectionSummary(reports, streams, models, test, stable)
