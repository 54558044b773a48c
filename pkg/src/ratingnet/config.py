"""Flat ``key = value`` run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .models import MODEL_NAMES


def _models(value: str) -> tuple:
    names = tuple(v.strip() for v in value.split(",") if v.strip())
    allowed = set(MODEL_NAMES) | {"fused_mlp"}
    bad = [n for n in names if n not in allowed]
    if bad:
        raise ValueError(f"unknown model(s) {', '.join(bad)}")
    return names


def _opt_int(value: str):
    return None if value.strip().lower() in ("", "none") else int(value)


def _opt_str(value: str):
    return value.strip() or None


@dataclass
class PipelineConfig:
    out_dir: str = "run"
    input: str | None = None
    input_format: str = "auto"
    cutoff: str | None = None
    train_frac: float = 0.8
    val_frac: float = 0.1
    limit: int = 0
    workers: int = 1
    seed: int = 0
    models: tuple = MODEL_NAMES
    embeddings: str | None = None
    ridge_alpha: float = 1e-4
    bayes_alpha_1: float = 1e-6
    bayes_alpha_2: float = 1e-6
    bayes_lambda_1: float = 1e-6
    bayes_lambda_2: float = 1e-6
    mlp_epochs: int = 30
    mlp_patience: int = 5
    mlp_batch_size: int = 200
    mlp_learning_rate: float = 1e-3
    mlp_alpha: float = 1e-4
    forest_trees: int = 100
    forest_max_depth: int | None = None
    synth_users: int = 20000
    synth_businesses: int = 5000
    synth_edges: int = 100000
    synth_gamma: float = 2.5
    synth_rating_signal: float = 0.0
    synth_t_start: int = 1_472_000_000
    synth_t_end: int = 1_500_000_000
    stats_time_bin: str = "month"
    source: str | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "source"}
        d["models"] = ",".join(self.models)
        return d

    def set(self, key: str, raw: str, where: str = "") -> None:
        where = where or f"field {key!r}"
        conv = _CONVERTERS.get(key)
        if conv is None:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            value = conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
        setattr(self, key, value)

    def validate(self) -> "PipelineConfig":
        if not (0 < self.train_frac and 0 < self.val_frac and self.train_frac + self.val_frac < 1):
            raise ConfigError("field 'train_frac'/'val_frac': need 0 < f and train_frac + val_frac < 1")
        if self.workers < 1:
            raise ConfigError("field 'workers': must be >= 1")
        if self.limit < 0:
            raise ConfigError("field 'limit': must be >= 0")
        if self.input_format not in ("auto", "json", "csv"):
            raise ConfigError("field 'input_format': expected auto, json or csv")
        if self.stats_time_bin not in ("day", "month"):
            raise ConfigError("field 'stats_time_bin': expected day or month")
        if self.ridge_alpha < 0:
            raise ConfigError("field 'ridge_alpha': must be >= 0")
        if self.forest_trees < 1 or self.mlp_epochs < 1:
            raise ConfigError("field 'forest_trees'/'mlp_epochs': must be >= 1")
        return self


_CONVERTERS = {}
for _f in fields(PipelineConfig):
    if _f.name == "source":
        continue
    if _f.name == "models":
        _CONVERTERS[_f.name] = _models
    elif _f.name in ("input", "cutoff", "embeddings"):
        _CONVERTERS[_f.name] = _opt_str
    elif _f.name == "forest_max_depth":
        _CONVERTERS[_f.name] = _opt_int
    elif _f.type in ("int",):
        _CONVERTERS[_f.name] = int
    elif _f.type in ("float",):
        _CONVERTERS[_f.name] = float
    else:
        _CONVERTERS[_f.name] = str.strip


def parse_config(text: str, source: str = "<config>") -> PipelineConfig:
    cfg = PipelineConfig(source=source)
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{line_no}: expected key = value")
        key, value = (s.strip() for s in stripped.split("=", 1))
        cfg.set(key, value, f"{source}:{line_no}")
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
