"""Run configuration: every tunable, one root seed, JSON/YAML serialization."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig
from .scoring import SCORING_FUNCTIONS
from .synthetic import BenchmarkConfig, derive_seed
from .training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    model: ModelConfig = field(default_factory=lambda: ModelConfig(
        F=8, H=8, W=8, C=5, d=32, heads=2, encoder_layers=1, decoder_layers=1, ffn_dim=64,
        sigma=2.0, fusion_mode="both", dtype="float32"))
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        lr=3e-3, weight_decay=0.07, batch_size=4, epochs=4, steps_per_epoch=100))
    stride: int = 1
    train_stride: int = 1
    scoring: str = "heatmap"
    label_mode: str = "last"
    inference_batch: int = 32
    ablation_fusions: tuple = ("none", "channel", "correlation", "both")
    ablation_scorings: tuple = SCORING_FUNCTIONS
    prediction_lengths: tuple = (2, 4, 6)
    late_fusion_pair: tuple = ("heatmap", "euclidean")
    permutations: int = 10_000
    stability_tolerance: float = 0.1

    def __post_init__(self):
        m, b = self.model, self.benchmark
        if (m.H, m.W, m.C) != (b.H, b.W, b.n_objects):
            raise ConfigError(
                f"model grid (H, W, C) = {(m.H, m.W, m.C)} disagrees with benchmark {(b.H, b.W, b.n_objects)}"
            )
        if self.scoring not in SCORING_FUNCTIONS:
            raise ConfigError(f"unknown scoring function {self.scoring!r}")
        if self.stride < 1 or self.train_stride < 1:
            raise ConfigError("strides must be >= 1")
        if self.label_mode not in ("last", "majority"):
            raise ConfigError(f"unknown label mode {self.label_mode!r}")

    @property
    def supervision(self):
        return self.benchmark.mode

    def seed_for(self, tag, index=0):
        return derive_seed(self.seed, tag, index)

    def train_config(self):
        return replace(self.train, seed=self.seed_for("train"))

    def model_seed(self, variant=""):
        return self.seed_for(f"model/{variant}")

    def with_overrides(self, **kw):
        """Apply flat overrides: fusion_mode, F, sigma, dtype, scoring, stride, supervision, seed."""
        run = self
        model_kw = {k: kw.pop(k) for k in ("fusion_mode", "F", "sigma", "dtype") if kw.get(k) is not None}
        if model_kw:
            run = replace(run, model=replace(run.model, **model_kw))
        sup = kw.pop("supervision", None)
        if sup is not None:
            run = replace(run, benchmark=replace(run.benchmark, mode=sup))
        rest = {k: v for k, v in kw.items() if v is not None}
        return replace(run, **rest) if rest else run

    def to_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if hasattr(v, "to_dict"):
                v = v.to_dict()
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d):
        if "run_config" in d:  # benchmark manifests, checkpoint headers
            d = d["run_config"]
        elif "tool_version" in d and "config" in d:  # JSON artifacts
            d = d["config"]
        d = dict(d)
        kw = {}
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "benchmark" in d:
            kw["benchmark"] = BenchmarkConfig.from_dict(d.pop("benchmark"))
        if "model" in d:
            kw["model"] = ModelConfig.from_dict(d.pop("model"))
        if "train" in d:
            t = dict(d.pop("train"))
            if "betas" in t:
                t["betas"] = tuple(t["betas"])
            kw["train"] = TrainConfig(**t)
        for k, v in d.items():
            kw[k] = tuple(v) if isinstance(v, list) else v
        return cls(**kw)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def tiny_config(seed=0):
    """Seconds-scale config for smoke tests and the CLI ``--preset tiny``."""
    return RunConfig(
        seed=seed,
        benchmark=BenchmarkConfig(n_sessions=12, session_length=40, n_objects=3, H=4, W=4,
                                  dwell_range=(6, 10), min_separation=0.35, dropout=0.0),
        model=ModelConfig(F=8, H=4, W=4, C=3, d=8, heads=2, encoder_layers=1, decoder_layers=1,
                          ffn_dim=16, sigma=1.0, fusion_mode="both", dtype="float64"),
        train=TrainConfig(lr=1e-2, weight_decay=0.07, batch_size=4, epochs=2, steps_per_epoch=5),
        inference_batch=16,
        prediction_lengths=(2, 4),
        ablation_fusions=("none", "both"),
        permutations=200,
    )


PRESETS = {"default": RunConfig, "tiny": tiny_config}


def load_config(path):
    """Read a RunConfig from JSON, YAML, or any artifact that embeds one."""
    path = Path(path)
    if path.suffix == ".gzck":
        from .checkpoint import read_header

        extra = read_header(path).get("extra", {})
        if "run_config" not in extra:
            raise ConfigError(f"{path} carries no run config")
        return RunConfig.from_dict(extra["run_config"])
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a mapping")
    return RunConfig.from_dict(data)
