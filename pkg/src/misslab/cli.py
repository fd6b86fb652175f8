"""Command-line interface.

Subcommands: genfit (clean/scale/mixture search), synth (sample + labels),
induce (mask a matrix), impute (fill one holed CSV), evaluate (masked-error
metrics), run (full experiment from a config), report (re-emit tables).
Exit codes: 0 success, 1 validation/configuration error, 2 completed run
with recorded cell failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from ._rng import child_seed
from .data import (ColumnSchema, from_matrix, load_matrix_csv, load_scaler,
                   save_csv, save_scaler, split_indices)
from .gmm import load_model, save_model, write_search_table
from .imputers import METHODS, ImputerSpec, run_imputer, save_imputation
from .metrics import regression_metrics_masked
from .missingness import MissingnessSpec, induce_missingness, save_induced
from .nnet import MlpSpec, TrainConfig, predict_mlp, save_history_csv, train_mlp
from .pipeline import (ConfigError, PreparedSource, draw_samples, emit_report,
                       fit_generator, load_report_json, parse_config,
                       prepare_source, run_pipeline, save_report_json)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CELL_FAILURES = 2


def _csv_header(path) -> list[str]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [h.strip() for h in next(csv.reader(fh))]


def _ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)


def cmd_genfit(args) -> int:
    cfg = parse_config(args.config)
    _ensure_dir(cfg.output_dir)
    src = prepare_source(cfg)
    generator, report, table = fit_generator(cfg, src)
    write_search_table(os.path.join(cfg.output_dir, "gmm_search.csv"), table)
    save_model(os.path.join(cfg.output_dir, "generator.npz"), generator)
    save_scaler(os.path.join(cfg.output_dir, "scaler.npz"), src.scaler)
    save_csv(os.path.join(cfg.output_dir, "clean_scaled.csv"),
             np.column_stack([src.x_orig, src.y_orig]),
             src.names + ["label"])
    meta = {
        "names": src.names,
        "schema": [{"name": c.name, "kind": c.kind, "lower": c.lower,
                    "upper": c.upper} for c in src.schema_w],
        "selected_k": generator.k,
        "selected_kind": generator.kind,
        "criterion": cfg.gmm_criterion,
        "log_likelihood": report.log_likelihood,
        "aic": report.aic,
        "bic": report.bic,
    }
    with open(os.path.join(cfg.output_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    print(f"selected k={generator.k} kind={generator.kind} "
          f"by {cfg.gmm_criterion} over {len(table)} grid cells "
          f"-> {cfg.output_dir}/")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = parse_config(args.config)
    out = cfg.output_dir
    needed = ["generator.npz", "scaler.npz", "clean_scaled.csv", "meta.json"]
    missing = [f for f in needed if not os.path.exists(os.path.join(out, f))]
    if missing:
        raise ConfigError(f"missing {missing} in {out}; run genfit first")
    generator = load_model(os.path.join(out, "generator.npz"))
    scaler = load_scaler(os.path.join(out, "scaler.npz"))
    with open(os.path.join(out, "meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    clean = load_matrix_csv(os.path.join(out, "clean_scaled.csv"))
    x_orig, y_orig = clean[:, :-1], clean[:, -1]
    schema_w = [ColumnSchema(c["name"], c["kind"], c["lower"], c["upper"])
                for c in meta["schema"]]
    src = PreparedSource(clean=from_matrix(x_orig, y_orig), scaler=scaler,
                         x_orig=x_orig, y_orig=y_orig, names=meta["names"],
                         schema_w=schema_w)
    master = cfg.master_seed
    x_synth, comp = draw_samples(generator, src, cfg.synth_n, "synth", master)
    x_reserve, _ = draw_samples(generator, src, cfg.reserve_n, "reserve", master)

    split = split_indices(x_orig.shape[0], [0.8, 0.2], child_seed(master, "gensplit"))
    target_gen = train_mlp(
        from_matrix(x_orig[split[0]], y_orig[split[0]]),
        from_matrix(x_orig[split[1]], y_orig[split[1]]),
        MlpSpec(hidden_layers=list(cfg.classifier_hidden),
                dropout_rate=cfg.classifier_dropout),
        TrainConfig(max_epochs=cfg.generator_epochs,
                    patience=cfg.generator_patience,
                    batch_size=cfg.classifier_batch,
                    learning_rate=cfg.classifier_lr,
                    seed=child_seed(master, "target-gen")))
    _, y_synth = predict_mlp(target_gen, x_synth)
    _, y_reserve = predict_mlp(target_gen, x_reserve)

    names = meta["names"]
    save_csv(os.path.join(out, "synthetic.csv"),
             np.column_stack([x_synth, y_synth.astype(np.float64)]),
             names + ["label"])
    save_csv(os.path.join(out, "reserved.csv"),
             np.column_stack([x_reserve, y_reserve.astype(np.float64)]),
             names + ["label"])
    save_history_csv(os.path.join(out, "target_history.csv"),
                     target_gen.training_history)
    ids, counts = np.unique(comp, return_counts=True)
    with open(os.path.join(out, "generator_components.csv"), "w",
              encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "count"])
        for i, c in zip(ids, counts):
            writer.writerow([int(i), int(c)])
    print(f"sampled {cfg.synth_n} + {cfg.reserve_n} reserved rows -> {out}/")
    return EXIT_OK


def cmd_induce(args) -> int:
    matrix = load_matrix_csv(args.input)
    names = _csv_header(args.input)
    drivers = tuple(int(t) for t in args.drivers.split(",") if t.strip()) \
        if args.drivers else ()
    spec = MissingnessSpec(scheme=args.scheme, degree=args.degree,
                           mar_drivers=drivers)
    induced = induce_missingness(matrix, spec, args.seed)
    holed_path, mask_path = save_induced(args.out, induced, names)
    print(f"masked {int(induced.mask.sum())} of {induced.mask.size} cells "
          f"(fraction {induced.realized_fraction:.4f}) -> {holed_path}, {mask_path}")
    return EXIT_OK


def cmd_impute(args) -> int:
    matrix = load_matrix_csv(args.input)
    names = _csv_header(args.input)
    spec = ImputerSpec(kind=args.method, knn_k=args.k, copies=args.copies,
                       sweeps=args.sweeps, noise=not args.no_noise,
                       max_sweeps=args.max_sweeps, ridge=args.ridge,
                       seed=args.seed)
    result = run_imputer(matrix, spec, names)
    paths = save_imputation(args.out, result, names)
    print(f"{args.method}: {len(result.copies)} copies -> " + ", ".join(paths))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    truth = load_matrix_csv(args.truth)
    imputed = load_matrix_csv(args.imputed)
    mask = load_matrix_csv(args.mask).astype(np.uint8)
    metrics = regression_metrics_masked(truth, imputed, mask)
    text = json.dumps(metrics, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    report = run_pipeline(cfg)
    emit_report(report, cfg.output_dir)
    save_report_json(report, cfg.output_dir)
    print(f"{len(report.cells)} classification cells, "
          f"{len(report.direct_cells)} direct-metric cells, "
          f"{len(report.failures)} failures -> {cfg.output_dir}/")
    if report.failures:
        for f in report.failures[:10]:
            print(f"  FAILED {f['method']} degree={f['degree']} "
                  f"rep={f['repetition']} [{f['stage']}]: {f['error']}",
                  file=sys.stderr)
        return EXIT_CELL_FAILURES
    return EXIT_OK


def cmd_report(args) -> int:
    path = os.path.join(args.run_dir, "report.json")
    if not os.path.exists(path):
        raise ConfigError(f"no report.json under {args.run_dir}")
    report = load_report_json(path)
    out = args.out or args.run_dir
    written = emit_report(report, out)
    print("\n".join(written))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="misslab",
        description="Synthetic-data missingness experiments: generate, "
                    "induce, impute, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("genfit", help="clean + scale + mixture model search")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_genfit)

    p = sub.add_parser("synth", help="sample synthetic data and label it")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("induce", help="mask a fully observed CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output stem")
    p.add_argument("--scheme", default="mcar", choices=["mcar", "mar", "mnar"])
    p.add_argument("--degree", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drivers", default="", help="MAR driver column indices, comma-separated")
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser("impute", help="fill missing cells of a holed CSV")
    p.add_argument("--method", required=True, choices=list(METHODS))
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output stem")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=5, help="KNN neighbor count")
    p.add_argument("--copies", type=int, default=5)
    p.add_argument("--sweeps", type=int, default=10)
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--max-sweeps", type=int, default=3)
    p.add_argument("--ridge", type=float, default=0.0)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("evaluate", help="masked-cell recovery metrics")
    p.add_argument("--truth", required=True)
    p.add_argument("--imputed", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full experiment from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-emit report tables from a run dir")
    p.add_argument("run_dir")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
