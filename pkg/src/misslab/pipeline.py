"""Config-driven experiment runner.

A run executes: ingest and clean, min-max scale, mixture fit and synthetic
sampling, target-generator labeling, missingness induction per degree,
every imputer per degree and repetition, classifier/clustering/direct
evaluation, and CSV report emission. Every stage draws from seed streams
derived from one master seed, so a run is a pure function of its config.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._rng import child_seed, rng_for
from .cluster import assign_kmeans, fit_kmeans
from .data import (ColumnSchema, Dataset, drop_incomplete_rows, extract_target,
                   fit_minmax, from_matrix, load_csv, save_csv, scaler_transform,
                   split_indices, conform_to_schema)
from .forest import ForestSpec
from .gmm import GmmConfig, GmmModel, sample, select_generator, write_search_table
from .imputers import DaeSpec, ImputerSpec, pool_copies, run_imputer
from .metrics import (classification_metrics, regression_metrics_masked,
                      silhouette_samples, silhouette_score, rand_index)
from .missingness import MissingnessSpec, induce_missingness
from .nnet import MlpSpec, TrainConfig, predict_mlp, train_mlp
from .resampling import ResampleSpec, smote_enn

EVAL_COLUMNS = ("training", "validation", "synthetic", "testing", "original",
                "edited_nn")
BASELINE_METHOD = "none"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class ConfigError(ValueError):
    """Invalid configuration; maps to CLI exit code 1."""


@dataclass
class ExperimentConfig:
    input_kind: str = "builtin"            # builtin | csv
    input_path: str = ""
    input_target: str = ""
    schema_path: str = ""
    builtin_rows: int = 2500
    builtin_features: int = 10
    builtin_components: int = 3
    gmm_k_range: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    gmm_kinds: list[str] = field(default_factory=lambda: ["spherical", "diagonal"])
    gmm_criterion: str = "bic"
    gmm_max_iter: int = 200
    gmm_restarts: int = 3
    synth_n: int = 20000
    reserve_n: int = 5000
    scheme: str = "MCAR"
    degrees: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4])
    protect_target: bool = True
    mar_drivers: list[int] = field(default_factory=list)
    imputers: list[str] = field(default_factory=lambda: ["mean", "knn", "mice",
                                                         "missforest", "dae"])
    knn_k: int = 5
    copies: int = 5
    mice_sweeps: int = 10
    mice_noise: bool = True
    mice_ridge: float = 0.0
    missforest_max_sweeps: int = 3
    missforest_trees: int = 20
    missforest_max_depth: int = 8
    missforest_min_leaf: int = 5
    dae_epochs: int = 100
    dae_patience: int = 20
    dae_corruption: float = 0.2
    dae_batch: int = 64
    dae_lr: float = 0.01
    classifier_hidden: list[int] = field(default_factory=lambda: [20, 20])
    classifier_dropout: float = 0.2
    classifier_epochs: int = 100
    classifier_patience: int = 10
    classifier_batch: int = 64
    classifier_lr: float = 0.01
    generator_epochs: int = 50
    generator_patience: int = 10
    clusters: list[int] = field(default_factory=lambda: [2, 3, 4])
    clustering_degree: float = 0.3
    repetitions: int = 10
    smote_k: int = 5
    enn_k: int = 3
    resample_ratio: float = 1.0
    master_seed: int = 0
    output_dir: str = "run-output"

    def validate(self) -> None:
        if self.input_kind not in ("builtin", "csv"):
            raise ConfigError(f"input.kind must be builtin or csv, got {self.input_kind!r}")
        if self.input_kind == "csv" and not self.input_path:
            raise ConfigError("input.kind=csv requires input.path")
        if self.input_kind == "csv" and not self.input_target:
            raise ConfigError("input.kind=csv requires input.target")
        if not self.degrees or any(not 0.0 < d < 1.0 for d in self.degrees):
            raise ConfigError("missing.degrees must be a non-empty list inside (0, 1)")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if not self.imputers:
            raise ConfigError("imputers must name at least one method")
        if not self.protect_target:
            raise ConfigError(
                "missing.protect_target=false is not runnable end to end: "
                "masked labels cannot train the classifier; induce label "
                "missingness directly through the missingness functions instead")
        if self.scheme.upper() == "MAR" and not self.mar_drivers:
            raise ConfigError("missing.scheme=mar requires missing.mar_drivers")
        if self.synth_n < 10 or self.reserve_n < 10:
            raise ConfigError("synth.n and synth.reserve must each be at least 10")


def _parse_list(value: str, cast) -> list:
    return [cast(tok.strip()) for tok in value.split(",") if tok.strip()]


def _parse_bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


# Dotted config key -> (ExperimentConfig attribute, parser).
_CONFIG_KEYS = {
    "input.kind": ("input_kind", str),
    "input.path": ("input_path", str),
    "input.target": ("input_target", str),
    "input.schema": ("schema_path", str),
    "builtin.rows": ("builtin_rows", int),
    "builtin.features": ("builtin_features", int),
    "builtin.components": ("builtin_components", int),
    "gmm.k_range": ("gmm_k_range", lambda v: _parse_list(v, int)),
    "gmm.kinds": ("gmm_kinds", lambda v: _parse_list(v, str)),
    "gmm.criterion": ("gmm_criterion", str),
    "gmm.max_iter": ("gmm_max_iter", int),
    "gmm.restarts": ("gmm_restarts", int),
    "synth.n": ("synth_n", int),
    "synth.reserve": ("reserve_n", int),
    "missing.scheme": ("scheme", str),
    "missing.degrees": ("degrees", lambda v: _parse_list(v, float)),
    "missing.protect_target": ("protect_target", _parse_bool),
    "missing.mar_drivers": ("mar_drivers", lambda v: _parse_list(v, int)),
    "imputers": ("imputers", lambda v: _parse_list(v, str)),
    "knn.k": ("knn_k", int),
    "copies": ("copies", int),
    "mice.copies": ("copies", int),
    "mice.sweeps": ("mice_sweeps", int),
    "mice.noise": ("mice_noise", _parse_bool),
    "mice.ridge": ("mice_ridge", float),
    "missforest.max_sweeps": ("missforest_max_sweeps", int),
    "missforest.trees": ("missforest_trees", int),
    "missforest.max_depth": ("missforest_max_depth", int),
    "missforest.min_leaf": ("missforest_min_leaf", int),
    "dae.epochs": ("dae_epochs", int),
    "dae.patience": ("dae_patience", int),
    "dae.corruption": ("dae_corruption", float),
    "dae.batch": ("dae_batch", int),
    "dae.lr": ("dae_lr", float),
    "classifier.hidden": ("classifier_hidden", lambda v: _parse_list(v, int)),
    "classifier.dropout": ("classifier_dropout", float),
    "classifier.epochs": ("classifier_epochs", int),
    "classifier.patience": ("classifier_patience", int),
    "classifier.batch": ("classifier_batch", int),
    "classifier.lr": ("classifier_lr", float),
    "generator.epochs": ("generator_epochs", int),
    "generator.patience": ("generator_patience", int),
    "clusters": ("clusters", lambda v: _parse_list(v, int)),
    "clustering.degree": ("clustering_degree", float),
    "repetitions": ("repetitions", int),
    "resample.smote_k": ("smote_k", int),
    "resample.enn_k": ("enn_k", int),
    "resample.ratio": ("resample_ratio", float),
    "seed": ("master_seed", int),
    "output": ("output_dir", str),
}


def parse_config(path) -> ExperimentConfig:
    """Flat `key = value` file with dotted keys; see docs/config.md."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        attr, cast = _CONFIG_KEYS[key]
        try:
            setattr(cfg, attr, cast(value))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    cfg.validate()
    return cfg


def load_schema_file(path) -> list[ColumnSchema]:
    """Schema CSV: name,kind,lower,upper,missing_codes ('|'-separated)."""
    import csv as _csv
    schema = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        for row in reader:
            codes = frozenset(float(c) for c in (row.get("missing_codes") or "").split("|") if c)
            schema.append(ColumnSchema(
                name=row["name"], kind=row.get("kind") or "continuous",
                lower=float(row.get("lower") or "-inf"),
                upper=float(row.get("upper") or "inf"),
                missing_codes=codes))
    return schema


# ---------------------------------------------------------------------------
# Built-in data source (desk-scale stand-in for licensed survey files)
# ---------------------------------------------------------------------------

def builtin_source(rows: int, features: int, components: int,
                   seed: int) -> tuple[Dataset, GmmModel]:
    """Known spherical mixture plus a fixed labeling rule.

    Component means are spread widely relative to unit variances, so the
    mixture is recoverable; labels follow a linear score thresholded at its
    60th percentile (mild class imbalance for the rebalancing variant).
    """
    rng = rng_for(seed, "builtin-params")
    means = rng.uniform(0.0, 10.0, size=(components, features))
    weights = rng.dirichlet(np.full(components, 8.0))
    label_w = rng.normal(size=features)
    model = GmmModel(k=components, dims=features, weights=weights, means=means,
                     covariances=np.ones(components), kind="spherical")
    x, _ = sample(model, rows, child_seed(seed, "builtin-sample"))
    z = (x - x.mean(axis=0)) / np.maximum(x.std(axis=0), 1e-12)
    score = z @ label_w
    y = (score > np.quantile(score, 0.6)).astype(np.float64)
    return from_matrix(x, y), model


# ---------------------------------------------------------------------------
# Run report
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    manifest: dict
    cells: list[dict]              # one per (method, degree, repetition)
    direct_cells: list[dict]       # one per (method, degree, repetition, copy)
    clustering_rows: list[dict]
    failures: list[dict]
    plot: dict


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path, header: list[str], rows: list[list]) -> None:
    import csv as _csv
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write report file {path}: {exc}") from exc


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def emit_report(report: RunReport, out_dir) -> list[str]:
    """Write the report tables; returns the written paths."""
    if not report.cells:
        raise ValueError("report has no cells; refusing to emit empty tables")
    os.makedirs(out_dir, exist_ok=True)
    written = []

    # Group classification cells by (method, degree) preserving first-seen order.
    grouped: dict[tuple, list[dict]] = {}
    for cell in report.cells:
        grouped.setdefault((cell["method"], cell["degree"]), []).append(cell)

    for table, prefix in (("accuracy", "accuracy"), ("loss", "loss")):
        header = (["method", "missing_pct"] + list(EVAL_COLUMNS)
                  + [f"{c}_std" for c in EVAL_COLUMNS])
        rows = []
        for (method, degree), cells in grouped.items():
            means, stds = [], []
            for col in EVAL_COLUMNS:
                m, s = _mean_std([c[f"{table}_{col}"] for c in cells])
                means.append(m)
                stds.append(s)
            rows.append([method, degree * 100.0] + means + stds)
        path = os.path.join(out_dir, f"{prefix}.csv")
        _write_rows(path, header, rows)
        written.append(path)

    path = os.path.join(out_dir, "clustering.csv")
    _write_rows(path, ["method", "clusters", "rand", "silhouette"],
                [[r["method"], r["clusters"], r["rand"], r["silhouette"]]
                 for r in report.clustering_rows])
    written.append(path)

    direct_grouped: dict[tuple, list[dict]] = {}
    for cell in report.direct_cells:
        direct_grouped.setdefault((cell["method"], cell["degree"]), []).append(cell)
    rows = []
    for (method, degree), cells in direct_grouped.items():
        rows.append([method, degree * 100.0,
                     _mean_std([c["rmse"] for c in cells])[0],
                     _mean_std([c["r2"] for c in cells])[0],
                     _mean_std([c["mape"] for c in cells])[0]])
    path = os.path.join(out_dir, "direct.csv")
    _write_rows(path, ["method", "missing_pct", "rmse", "r2", "mape"], rows)
    written.append(path)

    # Long-format per-repetition metric rows.
    long_rows = []
    scheme = report.manifest.get("config", {}).get("missing.scheme", "MCAR")
    for cell in report.cells:
        for table in ("accuracy", "loss"):
            for col in EVAL_COLUMNS:
                long_rows.append([cell["method"], scheme, cell["degree"],
                                  cell["repetition"], f"{table}_{col}",
                                  cell[f"{table}_{col}"]])
    per_rep: dict[tuple, dict[str, list[float]]] = {}
    for cell in report.direct_cells:
        key = (cell["method"], cell["degree"], cell["repetition"])
        bucket = per_rep.setdefault(key, {"rmse": [], "r2": [], "mape": []})
        for m in ("rmse", "r2", "mape"):
            bucket[m].append(cell[m])
    for (method, degree, rep), bucket in per_rep.items():
        for m, vals in bucket.items():
            long_rows.append([method, scheme, degree, rep, m,
                              float(np.mean(vals))])
    path = os.path.join(out_dir, "metrics.csv")
    _write_rows(path, ["method", "scheme", "degree", "repetition", "metric", "value"],
                long_rows)
    written.append(path)

    for name, header, rows in (
        ("generator_components.csv", ["component", "count"],
         report.plot.get("component_counts", [])),
        ("target_history.csv",
         ["epoch", "train_loss", "valid_loss", "train_acc", "valid_acc"],
         report.plot.get("target_history", [])),
        ("silhouette_samples.csv", ["method", "clusters", "cluster", "value"],
         report.plot.get("silhouette_samples", [])),
    ):
        path = os.path.join(out_dir, name)
        _write_rows(path, header, rows)
        written.append(path)

    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(report.manifest, fh, indent=2, sort_keys=True)
    written.append(manifest_path)
    return written


def save_report_json(report: RunReport, out_dir) -> str:
    path = os.path.join(out_dir, "report.json")
    payload = dataclasses.asdict(report)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return path


def load_report_json(path) -> RunReport:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return RunReport(**payload)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def _working_schema(schema: list[ColumnSchema], mins: np.ndarray,
                    maxs: np.ndarray) -> list[ColumnSchema]:
    """Substitute observed bounds where the declared ones are infinite, so
    conformed samples always scale back into [0, 1]."""
    out = []
    for j, col in enumerate(schema):
        lower = col.lower if np.isfinite(col.lower) else float(mins[j])
        upper = col.upper if np.isfinite(col.upper) else float(maxs[j])
        out.append(ColumnSchema(col.name, col.kind, lower, upper, col.missing_codes))
    return out


def _imputer_spec(cfg: ExperimentConfig, method: str, seed: int) -> ImputerSpec:
    return ImputerSpec(
        kind=method,
        knn_k=cfg.knn_k,
        copies=cfg.copies,
        sweeps=cfg.mice_sweeps,
        noise=cfg.mice_noise,
        ridge=cfg.mice_ridge,
        max_sweeps=cfg.missforest_max_sweeps,
        forest=ForestSpec(n_trees=cfg.missforest_trees,
                          max_depth=cfg.missforest_max_depth,
                          min_samples_leaf=cfg.missforest_min_leaf,
                          mode="regression"),
        dae=DaeSpec(corruption_rate=cfg.dae_corruption, epochs=cfg.dae_epochs,
                    batch_size=cfg.dae_batch, learning_rate=cfg.dae_lr,
                    patience=cfg.dae_patience),
        seed=seed,
    )


def _evaluate_classifier(model, splits: dict) -> dict:
    out = {}
    for col, (x, y) in splits.items():
        probs, _ = predict_mlp(model, x)
        m = classification_metrics(y, probs)
        out[f"accuracy_{col}"] = m["accuracy"]
        out[f"loss_{col}"] = m["log_loss"]
    return out


@dataclass
class PreparedSource:
    """Clean scaled original data plus everything sampling needs."""

    clean: Dataset
    scaler: object
    x_orig: np.ndarray
    y_orig: np.ndarray
    names: list[str]
    schema_w: list[ColumnSchema]


def prepare_source(cfg: ExperimentConfig) -> PreparedSource:
    """Steps 1-2: ingest (or generate) the original data, clean, and scale."""
    if cfg.input_kind == "builtin":
        original, _ = builtin_source(cfg.builtin_rows, cfg.builtin_features,
                                     cfg.builtin_components, cfg.master_seed)
    else:
        schema = load_schema_file(cfg.schema_path) if cfg.schema_path else None
        if schema is None:
            import csv as _csv
            with open(cfg.input_path, "r", encoding="utf-8", newline="") as fh:
                header = next(_csv.reader(fh))
            schema = [ColumnSchema(h.strip()) for h in header]
        loaded = load_csv(cfg.input_path, schema)
        original = extract_target(loaded, cfg.input_target)
    clean = drop_incomplete_rows(original)
    scaler = fit_minmax(clean.features, clean.column_names())
    x_orig = scaler_transform(scaler, clean.features, "forward")
    names = clean.column_names()
    base_schema = clean.schema or [ColumnSchema(n) for n in names]
    schema_w = _working_schema(base_schema, scaler.mins, scaler.maxs)
    return PreparedSource(clean=clean, scaler=scaler, x_orig=x_orig,
                          y_orig=clean.target, names=names, schema_w=schema_w)


def fit_generator(cfg: ExperimentConfig, src: PreparedSource):
    """Step 3 search: returns (model, fit report, search table)."""
    gmm_cfg = GmmConfig(max_iter=cfg.gmm_max_iter, restarts=cfg.gmm_restarts,
                        seed=child_seed(cfg.master_seed, "gmm"))
    return select_generator(src.x_orig, cfg.gmm_k_range, cfg.gmm_kinds,
                            cfg.gmm_criterion, gmm_cfg)


def draw_samples(generator: GmmModel, src: PreparedSource, n: int, label: str,
                 master_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample in scaled space, conform in original units, return to scale."""
    raw, comp = sample(generator, n, child_seed(master_seed, "sample", label))
    back = scaler_transform(src.scaler, raw, "inverse")
    back = conform_to_schema(back, src.schema_w)
    return scaler_transform(src.scaler, back, "forward"), comp


def run_pipeline(cfg: ExperimentConfig) -> RunReport:
    cfg.validate()
    started = time.time()
    out_dir = cfg.output_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write-probe")
        with open(probe, "w", encoding="utf-8") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"output dir {out_dir!r} is not writable: {exc}") from exc

    master = cfg.master_seed

    # Steps 1-3: source data, scaling, mixture search, synthetic sampling.
    src = prepare_source(cfg)
    clean, scaler = src.clean, src.scaler
    x_orig, y_orig, names = src.x_orig, src.y_orig, src.names
    generator, gen_report, search_table = fit_generator(cfg, src)
    write_search_table(os.path.join(out_dir, "gmm_search.csv"), search_table)

    x_synth, comp_synth = draw_samples(generator, src, cfg.synth_n, "synth", master)
    x_reserve, _ = draw_samples(generator, src, cfg.reserve_n, "reserve", master)

    # Step 4: target generator labels both synthetic sets.
    gen_split = split_indices(clean.rows, [0.8, 0.2], child_seed(master, "gensplit"))
    gen_train = from_matrix(x_orig[gen_split[0]], y_orig[gen_split[0]])
    gen_valid = from_matrix(x_orig[gen_split[1]], y_orig[gen_split[1]])
    target_gen = train_mlp(
        gen_train, gen_valid,
        MlpSpec(hidden_layers=list(cfg.classifier_hidden),
                dropout_rate=cfg.classifier_dropout),
        TrainConfig(max_epochs=cfg.generator_epochs,
                    patience=cfg.generator_patience,
                    batch_size=cfg.classifier_batch,
                    learning_rate=cfg.classifier_lr,
                    seed=child_seed(master, "target-gen")))
    _, y_synth = predict_mlp(target_gen, x_synth)
    _, y_reserve = predict_mlp(target_gen, x_reserve)
    y_synth = y_synth.astype(np.float64)
    y_reserve = y_reserve.astype(np.float64)

    # Rebalanced variant of the clean original subset.
    resample_spec = ResampleSpec(smote_k=cfg.smote_k, enn_k=cfg.enn_k,
                                 target_ratio=cfg.resample_ratio,
                                 seed=child_seed(master, "resample"))
    edited = smote_enn(from_matrix(x_orig, y_orig), resample_spec)

    # Row-id bookkeeping for the leakage guard.
    synth_ids = np.arange(cfg.synth_n)
    eval_id_sets = {
        "testing": cfg.synth_n + np.arange(cfg.reserve_n),
        "original": 10 ** 9 + np.arange(clean.rows),
    }

    persisted = {}
    for fname, matrix, mnames in (
        ("clean.csv", clean.features, names),
        ("synthetic.csv", np.column_stack([x_synth, y_synth]), names + ["label"]),
        ("reserved.csv", np.column_stack([x_reserve, y_reserve]), names + ["label"]),
    ):
        path = os.path.join(out_dir, fname)
        save_csv(path, matrix, mnames)
        persisted[fname] = path

    cells: list[dict] = []
    direct_cells: list[dict] = []
    failures: list[dict] = []
    clustering_rows: list[dict] = []
    silhouette_rows: list[list] = []
    cluster_degree = min(cfg.degrees, key=lambda d: abs(d - cfg.clustering_degree))
    cluster_inputs: dict[str, np.ndarray] = {}

    clf_spec = MlpSpec(hidden_layers=list(cfg.classifier_hidden),
                       dropout_rate=cfg.classifier_dropout)

    def train_and_eval(features: np.ndarray, method: str, degree: float,
                       rep: int) -> dict:
        split_seed = child_seed(master, "clfsplit", method, repr(degree), rep)
        tr_idx, va_idx = split_indices(cfg.synth_n, [0.8, 0.2], split_seed)
        train_ids = synth_ids[tr_idx]
        for col, ids in eval_id_sets.items():
            if np.intersect1d(train_ids, ids).size:
                raise RuntimeError(f"leakage: classifier training rows found in {col} set")
        model = train_mlp(
            from_matrix(features[tr_idx], y_synth[tr_idx]),
            from_matrix(features[va_idx], y_synth[va_idx]),
            clf_spec,
            TrainConfig(max_epochs=cfg.classifier_epochs,
                        patience=cfg.classifier_patience,
                        batch_size=cfg.classifier_batch,
                        learning_rate=cfg.classifier_lr,
                        seed=child_seed(master, "clf", method, repr(degree), rep)))
        return _evaluate_classifier(model, {
            "training": (features[tr_idx], y_synth[tr_idx]),
            "validation": (features[va_idx], y_synth[va_idx]),
            "synthetic": (x_synth, y_synth),
            "testing": (x_reserve, y_reserve),
            "original": (x_orig, y_orig),
            "edited_nn": (edited.features, edited.target),
        })

    for rep in range(cfg.repetitions):
        # No-missingness baseline row.
        try:
            cell = {"method": BASELINE_METHOD, "degree": 0.0, "repetition": rep,
                    "seed": child_seed(master, "clf", BASELINE_METHOD, "0.0", rep)}
            cell.update(train_and_eval(x_synth, BASELINE_METHOD, 0.0, rep))
            cells.append(cell)
        except Exception as exc:  # cell failures never stop the run
            failures.append({"method": BASELINE_METHOD, "degree": 0.0,
                             "repetition": rep, "stage": "classify",
                             "error": f"{type(exc).__name__}: {exc}"})
        for degree in cfg.degrees:
            induce_seed = child_seed(master, "induce", repr(degree), rep)
            spec = MissingnessSpec(scheme=cfg.scheme, degree=degree,
                                   mar_drivers=tuple(cfg.mar_drivers))
            try:
                induced = induce_missingness(x_synth, spec, induce_seed)
            except Exception as exc:
                for method in cfg.imputers:
                    failures.append({"method": method, "degree": degree,
                                     "repetition": rep, "stage": "induce",
                                     "error": f"{type(exc).__name__}: {exc}"})
                continue
            for method in cfg.imputers:
                impute_seed = child_seed(master, "impute", method, repr(degree), rep)
                try:
                    result = run_imputer(induced.holed,
                                         _imputer_spec(cfg, method, impute_seed),
                                         names)
                    pooled = pool_copies(result)
                    for c, copy in enumerate(result.copies):
                        direct = regression_metrics_masked(x_synth, copy, induced.mask)
                        direct_cells.append({"method": method, "degree": degree,
                                             "repetition": rep, "copy": c,
                                             **direct})
                    if rep == 0 and degree == cluster_degree:
                        cluster_inputs[method] = pooled
                    cell = {"method": method, "degree": degree, "repetition": rep,
                            "seed": impute_seed}
                    cell.update(train_and_eval(pooled, method, degree, rep))
                    cells.append(cell)
                except Exception as exc:
                    failures.append({"method": method, "degree": degree,
                                     "repetition": rep, "stage": "impute+classify",
                                     "error": f"{type(exc).__name__}: {exc}"})

    # Clustering per imputer at the representative degree.
    for method in cfg.imputers:
        data = cluster_inputs.get(method)
        for k in cfg.clusters:
            if data is None:
                failures.append({"method": method, "degree": cluster_degree,
                                 "repetition": 0, "stage": "cluster",
                                 "error": "no imputed matrix available"})
                continue
            try:
                km = fit_kmeans(data, k, child_seed(master, "cluster", method, k))
                labels = assign_kmeans(km, data)
                clustering_rows.append({
                    "method": method, "clusters": k,
                    "rand": rand_index(labels, comp_synth),
                    "silhouette": silhouette_score(data, labels),
                })
                per_sample = silhouette_samples(data, labels)
                for cluster_id in range(k):
                    for v in per_sample[labels == cluster_id]:
                        silhouette_rows.append([method, k, cluster_id, float(v)])
            except Exception as exc:
                failures.append({"method": method, "degree": cluster_degree,
                                 "repetition": 0, "stage": "cluster",
                                 "error": f"{type(exc).__name__}: {exc}"})

    comp_ids, comp_counts = np.unique(comp_synth, return_counts=True)
    import scipy
    manifest = {
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "master_seed": master,
        "criterion": cfg.gmm_criterion,
        "selected_k": generator.k,
        "selected_kind": generator.kind,
        "generator_log_likelihood": gen_report.log_likelihood,
        "config": {key: repr(getattr(cfg, attr)) for key, (attr, _) in
                   _CONFIG_KEYS.items()},
        "clustering_degree": cluster_degree,
        "artifacts": persisted,
        "n_cells": len(cells),
        "n_failures": len(failures),
        "started_unix": started,
        "finished_unix": time.time(),
    }
    history = [[i + 1] + [float(v) for v in row]
               for i, row in enumerate(target_gen.training_history)]
    report = RunReport(
        manifest=manifest,
        cells=cells,
        direct_cells=direct_cells,
        clustering_rows=clustering_rows,
        failures=failures,
        plot={
            "component_counts": [[int(c), int(n)] for c, n in
                                 zip(comp_ids, comp_counts)],
            "target_history": history,
            "silhouette_samples": silhouette_rows,
        },
    )
    return report
