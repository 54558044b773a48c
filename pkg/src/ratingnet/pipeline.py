"""File-based pipeline stages.

Each stage reads the artifacts of earlier stages from the run directory,
writes its own artifacts atomically, and records input/output hashes plus the
effective configuration in ``manifest.json``.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import os
import platform
import tempfile
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .config import PipelineConfig
from .errors import ConfigError, DependencyError
from .evaluation import DATASETS, evaluate, read_results, render_tables, write_results
from .features import (FeatureContext, featurize_graph, fit_standardizer, read_feature_csv,
                       write_feature_csv, Standardizer)
from .fusion import fuse, load_embeddings
from .graph import build_graph, read_snapshot, temporal_split, write_snapshot
from .ingest import EdgeList, IdMap, dedupe_edges, filter_by_date, read_edges, write_edges_csv
from .models import (DISPLAY_NAMES, TrainConfig, fit_baseline, fit_bayesian, fit_forest,
                     fit_linear, fit_mlp, fit_ridge, load_model)
from .models.serialize import dump_model
from . import netstats
from .synth import SynthConfig, generate

log = logging.getLogger(__name__)

_UMASK = os.umask(0)
os.umask(_UMASK)

STAGES = ("ingest", "synth", "split", "featurize", "train", "evaluate", "stats", "report")

EDGES = "edges.csv"
IDMAP = "idmap.csv"
SPLIT_META = "split.json"
STANDARDIZER = "standardizer.json"
METRICS = "metrics.csv"
REPORT = "report.txt"
MANIFEST = "manifest.json"


def graph_file(ds):
    return f"graph_{ds}.csv"


def feature_file(ds):
    return f"features_{ds}.csv"


def model_file(name):
    return f"models/{name}.model"


@contextlib.contextmanager
def atomic_write(path: Path, mode: str = "w"):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({"newline": ""} if "b" not in mode else {})) as fh:
            yield fh
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """One run directory plus its configuration."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg.validate()
        self.root = Path(cfg.out_dir)

    def path(self, rel) -> Path:
        return self.root / rel

    def require(self, stage: str, *rels):
        missing = [r for r in rels if not self.path(r).exists()]
        if missing:
            raise DependencyError(
                f"missing {', '.join(missing)} in {self.root}; run the '{stage}' stage first",
                stage=stage)

    def record(self, stage: str, inputs, outputs, extra=None):
        manifest_path = self.path(MANIFEST)
        manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
        manifest[stage] = {
            "config": self.cfg.as_dict(),
            "seed": self.cfg.seed,
            "inputs": {str(r): sha256(self.path(r) if not Path(r).is_absolute() else Path(r))
                       for r in inputs},
            "outputs": {str(r): sha256(self.path(r)) for r in outputs},
            "versions": {"ratingnet": __version__, "numpy": np.__version__,
                         "numba": numba.__version__, "python": platform.python_version()},
            **(extra or {}),
        }
        with atomic_write(manifest_path) as fh:
            fh.write(json.dumps(manifest, indent=1, sort_keys=True) + "\n")

    # ---- shared loaders ----------------------------------------------------

    def load_idmap(self) -> IdMap:
        return IdMap.load(self.path(IDMAP))

    def load_graphs(self):
        return {ds: read_snapshot(self.path(graph_file(ds)))[0] for ds in DATASETS}

    def load_features(self, idmap):
        out = {}
        for ds in DATASETS:
            with open(self.path(feature_file(ds)), newline="") as fh:
                out[ds] = read_feature_csv(fh, idmap)
        return out


# ---- stages ------------------------------------------------------------------

def _write_edge_artifacts(run: Run, edges: EdgeList, idmap: IdMap):
    with atomic_write(run.path(EDGES)) as fh:
        write_edges_csv(edges, idmap, fh)
    with atomic_write(run.path(IDMAP)) as fh:
        idmap.write(fh)


def stage_ingest(run: Run):
    cfg = run.cfg
    if not cfg.input:
        raise ConfigError("field 'input': the ingest stage needs an input path")
    src = Path(cfg.input)
    if not src.exists():
        raise DependencyError(f"input file {src} does not exist", stage="ingest")
    edges, idmap = read_edges(src, fmt=cfg.input_format)
    n_raw = len(edges)
    if cfg.cutoff:
        edges = filter_by_date(edges, cfg.cutoff)
    edges = dedupe_edges(edges).sorted()
    edges, idmap = _reindex(edges, idmap)
    _write_edge_artifacts(run, edges, idmap)
    summary = {"raw_records": n_raw, "edges": len(edges), "users": idmap.n_users,
               "businesses": idmap.n_businesses}
    log.info("ingest: %s", summary)
    run.record("ingest", [src.resolve()], [EDGES, IDMAP], {"summary": summary})
    return summary


def _reindex(edges: EdgeList, idmap: IdMap):
    """Drop ids that lost all their edges (date filter) and re-intern densely."""
    fresh = IdMap()
    u_new = np.array([fresh.user(idmap.user_name(u)) for u in edges.user.tolist()], dtype=np.int64)
    b_new = np.array([fresh.business(idmap.business_name(b)) for b in edges.business.tolist()],
                     dtype=np.int64)
    return EdgeList(u_new, b_new, edges.stars, edges.timestamp), fresh


def stage_synth(run: Run):
    cfg = run.cfg
    scfg = SynthConfig(n_users=cfg.synth_users, n_businesses=cfg.synth_businesses,
                       n_edges=cfg.synth_edges, gamma=cfg.synth_gamma, seed=cfg.seed,
                       rating_signal=cfg.synth_rating_signal, t_start=cfg.synth_t_start,
                       t_end=cfg.synth_t_end)
    try:
        edges, idmap = generate(scfg)
    except ConfigError as exc:
        raise ConfigError(f"synth: {exc}") from None
    _write_edge_artifacts(run, edges, idmap)
    summary = {"edges": len(edges), "users": idmap.n_users, "businesses": idmap.n_businesses}
    run.record("synth", [], [EDGES, IDMAP], {"summary": summary})
    return summary


def stage_split(run: Run):
    cfg = run.cfg
    run.require("ingest' or 'synth", EDGES, IDMAP)
    idmap = run.load_idmap()
    edges, _ = read_edges(run.path(EDGES), run.load_idmap(), fmt="csv")
    edges = edges.sorted()
    if cfg.limit:
        edges = edges[:cfg.limit]
    g = build_graph(edges, idmap.n_users, idmap.n_businesses)
    split = temporal_split(g, cfg.train_frac, cfg.val_frac)
    parts = {"train": split.train, "validation": split.validation, "test": split.test}
    for ds, part in parts.items():
        with atomic_write(run.path(graph_file(ds))) as fh:
            write_snapshot(part, fh, split.cuts)
    meta = {
        "cuts": list(split.cuts),
        "closure_dropped": len(split.dropped),
        **{ds: {"users": p.n_users, "businesses": p.n_businesses, "edges": p.n_edges,
                "density": p.density()} for ds, p in parts.items()},
    }
    with atomic_write(run.path(SPLIT_META)) as fh:
        fh.write(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    outputs = [graph_file(ds) for ds in DATASETS] + [SPLIT_META]
    run.record("split", [EDGES, IDMAP], outputs)
    return meta


def stage_featurize(run: Run):
    run.require("split", *[graph_file(ds) for ds in DATASETS])
    run.require("ingest' or 'synth", IDMAP)
    idmap = run.load_idmap()
    graphs = run.load_graphs()
    ctx = FeatureContext(graphs["train"])
    raw = {ds: featurize_graph(graphs["train"], graphs[ds], ctx, workers=run.cfg.workers)
           for ds in DATASETS}
    scaler = fit_standardizer(raw["train"])
    for ds in DATASETS:
        m = scaler.transform(raw[ds])
        with atomic_write(run.path(feature_file(ds))) as fh:
            write_feature_csv(m, fh, idmap.user_names(m.user), idmap.business_names(m.business))
    with atomic_write(run.path(STANDARDIZER)) as fh:
        fh.write(scaler.to_json() + "\n")
    outputs = [feature_file(ds) for ds in DATASETS] + [STANDARDIZER]
    run.record("featurize", [graph_file(ds) for ds in DATASETS] + [IDMAP], outputs)
    return {ds: len(raw[ds]) for ds in DATASETS}


def _mlp_config(cfg: PipelineConfig) -> TrainConfig:
    return TrainConfig(learning_rate=cfg.mlp_learning_rate, alpha=cfg.mlp_alpha,
                       batch_size=cfg.mlp_batch_size, seed=cfg.seed, epochs=cfg.mlp_epochs,
                       patience=cfg.mlp_patience)


def _fused(run, feats, idmap, table):
    return {ds: fuse(m, table, idmap.business_names(m.business)) for ds, m in feats.items()}


def stage_train(run: Run):
    cfg = run.cfg
    run.require("featurize", *[feature_file(ds) for ds in DATASETS], STANDARDIZER)
    idmap = run.load_idmap()
    feats = run.load_features(idmap)
    scaler = Standardizer.from_json(run.path(STANDARDIZER).read_text())
    tr, va = feats["train"], feats["validation"]
    written = []
    for name in cfg.models:
        hyper = {}
        if name == "baseline":
            model = fit_baseline(tr.y, tr.width)
        elif name == "linear":
            model = fit_linear(tr.X, tr.y)
        elif name == "ridge":
            hyper = {"alpha": cfg.ridge_alpha}
            model = fit_ridge(tr.X, tr.y, cfg.ridge_alpha)
        elif name == "bayesian":
            hyper = {"alpha_1": cfg.bayes_alpha_1, "alpha_2": cfg.bayes_alpha_2,
                     "lambda_1": cfg.bayes_lambda_1, "lambda_2": cfg.bayes_lambda_2}
            model = fit_bayesian(tr.X, tr.y, **hyper)
        elif name == "mlp":
            tc = _mlp_config(cfg)
            hyper = vars(tc).copy()
            model = fit_mlp(tr.X, tr.y, tc, va.X, va.y)
        elif name == "forest":
            hyper = {"n_trees": cfg.forest_trees, "seed": cfg.seed, "max_depth": cfg.forest_max_depth}
            model = fit_forest(tr.X, tr.y, cfg.forest_trees, cfg.seed,
                               max_depth=cfg.forest_max_depth, workers=cfg.workers)
        elif name == "fused_mlp":
            if not cfg.embeddings:
                raise ConfigError("field 'embeddings': fused_mlp needs an embedding file")
            fused = _fused(run, {"train": tr, "validation": va}, idmap, load_embeddings(cfg.embeddings))
            tc = _mlp_config(cfg)
            hyper = vars(tc).copy()
            model = fit_mlp(fused["train"].X, fused["train"].y, tc,
                            fused["validation"].X, fused["validation"].y)
        else:  # pragma: no cover - rejected by config parsing
            raise ConfigError(f"unknown model {name!r}")
        rel = model_file(name)
        with atomic_write(run.path(rel), "wb") as fh:
            dump_model(model, fh, name=name, hyper=hyper, standardizer=scaler)
        written.append(rel)
        log.info("train: fitted %s", name)
    inputs = [feature_file(ds) for ds in DATASETS] + [STANDARDIZER]
    if cfg.embeddings and "fused_mlp" in cfg.models:
        inputs.append(Path(cfg.embeddings).resolve())
    run.record("train", inputs, written)
    return written


def stage_evaluate(run: Run):
    cfg = run.cfg
    run.require("featurize", *[feature_file(ds) for ds in DATASETS])
    run.require("train", *[model_file(n) for n in cfg.models])
    idmap = run.load_idmap()
    feats = run.load_features(idmap)
    table = None
    reports = []
    for name in cfg.models:
        model, _ = load_model(run.path(model_file(name)))
        data = feats
        if name == "fused_mlp":
            if table is None:
                table = load_embeddings(cfg.embeddings)
            data = _fused(run, feats, idmap, table)
        reports += evaluate(model, {ds: (data[ds].X, data[ds].y) for ds in DATASETS}, name)
    with atomic_write(run.path(METRICS)) as fh:
        write_results(reports, fh)
    run.record("evaluate", [model_file(n) for n in cfg.models] + [feature_file(ds) for ds in DATASETS],
               [METRICS])
    return reports


def stage_stats(run: Run):
    cfg = run.cfg
    run.require("ingest' or 'synth", EDGES, IDMAP)
    edges, idmap = read_edges(run.path(EDGES), fmt="csv")
    graphs = {"full": build_graph(edges, idmap.n_users, idmap.n_businesses)}
    if run.path(graph_file("train")).exists():
        graphs["train"] = read_snapshot(run.path(graph_file("train")))[0]
    outputs = []

    def emit(rel, writer):
        with atomic_write(run.path(rel)) as fh:
            writer(fh)
        outputs.append(rel)

    summary = {}
    for tag, g in graphs.items():
        for side in ("user", "business"):
            h = netstats.degree_histogram(g, side)
            emit(f"stats/{tag}_degree_{side}.csv", h.write_csv)
        for mode in ("per-edge", "per-user-average", "per-business-average"):
            emit(f"stats/{tag}_ratings_{mode}.csv", netstats.rating_histogram(g, mode).write_csv)
        sizes = netstats.component_sizes(g)
        emit(f"stats/{tag}_components.csv", lambda fh, s=sizes: netstats.write_components_csv(s, fh))
        summary[tag] = {**netstats.summary(g), "components": len(sizes),
                        "largest_component": sizes[0]}
    over_time = netstats.reviews_over_time(edges, cfg.stats_time_bin)
    emit(f"stats/reviews_per_{cfg.stats_time_bin}.csv", over_time.write_csv)
    summary["reviews_over_time_cv"] = netstats.coefficient_of_variation(over_time)
    emit("stats/summary.json", lambda fh: fh.write(json.dumps(summary, indent=1, sort_keys=True) + "\n"))
    inputs = [EDGES, IDMAP] + ([graph_file("train")] if "train" in graphs else [])
    run.record("stats", inputs, outputs)
    return summary


def stage_report(run: Run):
    run.require("evaluate", METRICS)
    with open(run.path(METRICS), newline="") as fh:
        reports = read_results(fh)
    text = render_tables(reports, DISPLAY_NAMES)
    with atomic_write(run.path(REPORT)) as fh:
        fh.write(text)
    run.record("report", [METRICS], [REPORT])
    return text


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "synth": stage_synth,
    "split": stage_split,
    "featurize": stage_featurize,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "stats": stage_stats,
    "report": stage_report,
}


def run_stage(stage: str, cfg: PipelineConfig):
    if stage not in STAGE_FUNCS:
        raise ConfigError(f"unknown stage {stage!r}")
    run = Run(cfg)
    run.root.mkdir(parents=True, exist_ok=True)
    return STAGE_FUNCS[stage](run)
