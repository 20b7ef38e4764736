"""Command-line pipeline: generate -> label -> train -> predict, plus bench and report.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric failure.
Logs and progress go to stderr; data goes to files or stdout.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import statistics
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import DEFAULT_VOCABULARY, CorpusSpec, circuit_from_entry, corpus_plan, read_circuits, write_circuits
from .dataset import SplitSpec, build_dataset, read_records, split, write_records
from .errors import CapacityError, InvalidArgument, InvalidState, NumericError, ParseError, QNoiseError
from .features import count_schema, counts_matrix, gate_counts, grid_batch, write_feature_csv
from .learners import REGISTRY, RESULT_COLUMNS, evaluate, load_model, make_model
from .qasm import parse_qasm
from .sim import NoiseModel, preset

log = logging.getLogger("qnoise")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    master_seed: int = 0
    per_qubit_count: int = 5000
    qubit_range: list = field(default_factory=lambda: [4, 10])
    depth_range: list = field(default_factory=lambda: [2, 50])
    preset: str = "preset-a"
    noise: dict | None = None
    shots: int = 1000
    split: float = 0.8
    ablate: list = field(default_factory=list)
    model: str = "hist-gbdt"
    model_config: dict = field(default_factory=dict)
    parallelism: int = 1
    out_dir: str = "."

    def noise_model(self) -> NoiseModel:
        try:
            if self.noise is not None:
                return NoiseModel.from_json(self.noise)
            return preset(self.preset)
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from None

    def corpus_spec(self) -> CorpusSpec:
        try:
            return CorpusSpec(self.per_qubit_count, tuple(self.qubit_range), tuple(self.depth_range))
        except (InvalidArgument, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self) -> dict:
        return asdict(self)


def _int_pair(text: str) -> list[int]:
    try:
        lo, hi = (int(v) for v in text.replace("..", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'LO,HI', got '{text}'") from None
    return [lo, hi]


def _name_list(text: str) -> list[str]:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def resolve_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config}: {exc}") from None
        known = {f.name for f in fields(PipelineConfig)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        for k, v in doc.items():
            setattr(cfg, k, v)
    overrides = {
        "master_seed": args.seed, "per_qubit_count": getattr(args, "per_qubit_count", None),
        "qubit_range": getattr(args, "qubit_range", None), "depth_range": getattr(args, "depth_range", None),
        "preset": getattr(args, "preset", None), "shots": getattr(args, "shots", None),
        "split": getattr(args, "split", None), "ablate": getattr(args, "ablate", None),
        "model": getattr(args, "model", None), "parallelism": args.parallelism, "out_dir": args.out_dir,
    }
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    if getattr(args, "preset", None) is not None:
        cfg.noise = None
    mc = getattr(args, "model_config", None)
    if mc is not None:
        try:
            cfg.model_config = json.loads(mc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--model-config: {exc}") from None
    if cfg.shots < 1:
        raise ConfigError("shots must be >= 1")
    if cfg.parallelism < 1:
        raise ConfigError("parallelism must be >= 1")
    return cfg


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: Path, command: str, cfg: PipelineConfig, inputs: dict, outputs: dict, **extra) -> None:
    doc = {
        "tool": "qnoise", "version": __version__, "command": command, "config": cfg.to_json(),
        "inputs": {k: {"path": str(v), "sha256": sha256_file(v)} for k, v in inputs.items()},
        "outputs": {k: {"path": str(v), "sha256": sha256_file(v)} for k, v in outputs.items()},
    }
    doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _require_file(path, what: str) -> Path:
    if path is None:
        raise ConfigError(f"--{what} is required")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} file not found: {p}")
    return p


def _out_dir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands ----------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = resolve_config(args)
    spec = cfg.corpus_spec()
    out = _out_dir(cfg)
    path = out / (args.output or "circuits.jsonl")
    total = len(spec)

    def circuits():
        for entry in corpus_plan(cfg.master_seed, spec):
            if entry.index and entry.index % 1000 == 0:
                log.info("generated %d/%d circuits", entry.index, total)
            yield circuit_from_entry(entry)

    n = write_circuits(path, circuits())
    log.info("wrote %d circuits to %s", n, path)
    write_manifest(path.with_suffix(".manifest.json"), "generate", cfg, {}, {"circuits": path},
                   vocabulary=DEFAULT_VOCABULARY.to_json(), count=n)
    return EXIT_OK


def cmd_label(args) -> int:
    cfg = resolve_config(args)
    src = _require_file(args.circuits, "circuits")
    noise = cfg.noise_model()
    circuits = list(read_circuits(src))
    out = _out_dir(cfg)
    path = out / (args.output or "dataset.jsonl")

    def progress(done, total):
        if done % 1000 == 0 or done == total:
            log.info("labelled %d/%d circuits", done, total)

    preset_name = cfg.preset if cfg.noise is None else "custom"
    records = build_dataset(circuits, noise, cfg.shots, cfg.master_seed, cfg.parallelism, preset_name, progress)
    write_records(path, records)
    write_manifest(path.with_suffix(".manifest.json"), "label", cfg, {"circuits": src}, {"dataset": path},
                   master_seed=cfg.master_seed, preset=preset_name, noise=noise.to_json(), shots=cfg.shots,
                   vocabulary=DEFAULT_VOCABULARY.to_json())
    return EXIT_OK


def _grids_for(records, circuits_path) -> np.ndarray:
    if circuits_path is None:
        raise ConfigError("neural models need --circuits to build token grids")
    by_id = {c.id: c for c in read_circuits(_require_file(circuits_path, "circuits"))}
    missing = [r.circuit_id for r in records if r.circuit_id not in by_id]
    if missing:
        raise ParseError(f"{len(missing)} dataset ids absent from circuits file, e.g. '{missing[0]}'")
    return grid_batch(by_id[r.circuit_id] for r in records)


def _inputs(model_cls, records, ablate, circuits_path):
    if model_cls.featurization == "grid":
        return _grids_for(records, circuits_path)
    return counts_matrix([r.gate_counts for r in records], count_schema(DEFAULT_VOCABULARY, ablate))


def _read_feature_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "label":
        raise ParseError(f"{path}: header must end with 'label'")
    schema = rows[0][:-1]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return schema, data[:, :-1], data[:, -1]


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    if cfg.model not in REGISTRY:
        raise ConfigError(f"unknown model '{cfg.model}'; valid: {', '.join(REGISTRY)}")
    try:
        spec = SplitSpec(cfg.split, cfg.master_seed)
        model = make_model(cfg.model, cfg.model_config)
        schema = count_schema(DEFAULT_VOCABULARY, cfg.ablate)
    except (InvalidArgument, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(cfg)
    ablation = "+".join(sorted(cfg.ablate)) or "none"
    inputs = {}
    if args.features:
        if model.featurization != "counts":
            raise ConfigError("--features only applies to tabular models")
        src = _require_file(args.features, "features")
        inputs["features"] = src
        file_schema, X_all, y_all = _read_feature_csv(src)
        keep = [file_schema.index(n) for n in schema if n in file_schema]
        if [file_schema[i] for i in keep] != list(schema):
            raise ConfigError(f"feature file schema {file_schema} lacks columns of {list(schema)}")
        X_all = X_all[:, keep]
        train_idx, test_idx = split(list(range(len(y_all))), spec)
        X_tr, y_tr, X_te, y_te = X_all[train_idx], y_all[train_idx], X_all[test_idx], y_all[test_idx]
        preset_name = args.preset or cfg.preset
    else:
        src = _require_file(args.dataset, "dataset")
        inputs["dataset"] = src
        records = read_records(src)
        train, test = split(records, spec)
        X_tr, X_te = _inputs(type(model), train, cfg.ablate, args.circuits), _inputs(type(model), test, cfg.ablate, args.circuits)
        y_tr = np.array([r.label for r in train])
        y_te = np.array([r.label for r in test])
        presets = sorted({r.preset for r in records})
        preset_name = presets[0] if len(presets) == 1 else "+".join(presets)
        if model.featurization == "counts":
            feat_path = out / f"features-{ablation}.csv"
            write_feature_csv(feat_path, counts_matrix([r.gate_counts for r in records], schema),
                              np.array([r.label for r in records]), schema)
    log.info("training %s on %d rows, testing on %d", cfg.model, len(y_tr), len(y_te))
    model.fit(X_tr, y_tr, seed=cfg.master_seed)
    report = evaluate(model, X_te, y_te, preset=preset_name, split_fraction=cfg.split, ablation=ablation)
    if model.featurization == "counts":
        featurization = {"kind": "counts", "schema": list(schema), "ablate": sorted(cfg.ablate)}
    else:
        featurization = {"kind": "grid", "vocabulary": DEFAULT_VOCABULARY.names,
                         "d_max": model.config.grid_depth, "q_max": model.config.grid_qubits}
    model.meta = {"featurization": featurization, "split_fraction": cfg.split, "split_seed": cfg.master_seed,
                  "preset": preset_name, "n_train": int(len(y_tr)), "n_test": int(len(y_te)),
                  "model_config": cfg.model_config,
                  "source": {k: sha256_file(v) for k, v in inputs.items()}}
    model_path = out / (args.model_out or f"model-{cfg.model}-{cfg.split:g}-{ablation}.json")
    model.save(model_path)
    results = out / "results.csv"
    new = not results.exists()
    with open(results, "a", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        if new:
            w.writeheader()
        w.writerow(report.row())
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerow(report.row())
    sys.stdout.write(buf.getvalue())
    write_manifest(model_path.with_suffix(".manifest.json"), "train", cfg, inputs, {"model": model_path},
                   metrics={"mae": report.mae, "rmse": report.rmse})
    return EXIT_OK


def _check_schema(model):
    feat = model.meta.get("featurization", {})
    if model.featurization == "counts":
        expected = list(count_schema(DEFAULT_VOCABULARY, feat.get("ablate", [])))
        stored = feat.get("schema")
        if stored != expected:
            raise ConfigError(f"model feature schema {stored} does not match featurization schema {expected}")
        return expected
    stored = feat.get("vocabulary")
    if stored != DEFAULT_VOCABULARY.names:
        raise ConfigError(f"model grid vocabulary {stored} does not match featurization vocabulary "
                          f"{DEFAULT_VOCABULARY.names}")
    return None


def cmd_predict(args) -> int:
    model_path = _require_file(args.model, "model")
    model = load_model(model_path)
    schema = _check_schema(model)
    if (args.circuits is None) == (args.qasm is None):
        raise ConfigError("give exactly one of --circuits or --qasm")
    if args.qasm:
        src = _require_file(args.qasm, "qasm")
        circuits = [parse_qasm(src.read_text(encoding="utf-8"), circuit_id=src.stem)]
    else:
        circuits = list(read_circuits(_require_file(args.circuits, "circuits")))
    if model.featurization == "counts":
        X = counts_matrix([gate_counts(c) for c in circuits], schema)
    else:
        X = grid_batch(circuits)
    preds = model.predict(X)
    if not np.all(np.isfinite(preds)):
        raise NumericError("model produced non-finite predictions")
    fh = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["circuit_id", "prediction"])
        for c, p in zip(circuits, preds):
            w.writerow([c.id, repr(float(p))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    model = load_model(_require_file(args.model, "model"))
    _check_schema(model)
    records = read_records(_require_file(args.dataset, "dataset"))
    meta = model.meta
    spec = SplitSpec(meta.get("split_fraction", cfg.split), meta.get("split_seed", cfg.master_seed))
    train, test = split(records, spec)
    ablate = meta.get("featurization", {}).get("ablate", [])
    X_tr, X_te = _inputs(type(model), train, ablate, args.circuits), _inputs(type(model), test, ablate, args.circuits)
    y_tr = np.array([r.label for r in train])
    reps = args.repetitions
    if reps < 1:
        raise ConfigError("repetitions must be >= 1")
    fit_times, predict_times = [], []
    for _ in range(reps):
        if not args.skip_fit:
            fresh = make_model(model.algorithm, meta.get("model_config") or {})
            t0 = time.perf_counter()
            fresh.fit(X_tr, y_tr, seed=spec.seed)
            fit_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        model.predict(X_te)
        predict_times.append(time.perf_counter() - t0)
    report = {
        "algorithm": model.algorithm, "n_train": len(train), "n_test": len(test), "repetitions": reps,
        "fit_seconds_min": min(fit_times) if fit_times else None,
        "fit_seconds_median": statistics.median(fit_times) if fit_times else None,
        "predict_seconds_min": min(predict_times), "predict_seconds_median": statistics.median(predict_times),
        "predict_rows_per_second": len(test) / max(statistics.median(predict_times), 1e-12),
    }
    out = _out_dir(cfg)
    (out / f"bench-{model.algorithm}.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    fmt = lambda v: "-" if v is None else (f"{v:.4f}" if isinstance(v, float) else str(v))
    sys.stdout.write("".join(f"{k:<26}{fmt(v)}\n" for k, v in report.items()))
    return EXIT_OK


def render_report(rows: list[dict]) -> str:
    """MAE/RMSE/timing cells as "small-split -> large-split" arrows, one row per model."""
    groups: dict[tuple, dict[float, dict]] = {}
    for r in rows:
        key = (r["algorithm"], r["preset"], r["ablation"])
        groups.setdefault(key, {})[float(r["split_fraction"])] = r

    def arrow(cell: dict[float, dict], col: str, digits: int = 3) -> str:
        fracs = sorted(cell)
        lo = cell[fracs[0]] if len(fracs) > 1 or fracs[0] <= 0.5 else None
        hi = cell[fracs[-1]] if len(fracs) > 1 or fracs[0] > 0.5 else None
        f = lambda r: "-" if r is None else f"{float(r[col]):.{digits}f}"
        return f"{f(lo)} -> {f(hi)}"

    header = ["algorithm", "preset", "ablation", "splits", "MAE", "RMSE", "fit s", "predict s"]
    table = []
    for key in sorted(groups):
        cell = groups[key]
        fr = sorted(cell)
        if len(fr) > 1:
            splits = f"{fr[0]:g} -> {fr[-1]:g}"
        else:
            splits = f"{fr[0]:g} -> -" if fr[0] <= 0.5 else f"- -> {fr[0]:g}"
        table.append(list(key) + [splits, arrow(cell, "mae"), arrow(cell, "rmse"),
                                  arrow(cell, "fit_seconds"), arrow(cell, "predict_seconds")])
    widths = [max(len(str(x)) for x in col) for col in zip(header, *table)]
    line = lambda vals: "  ".join(str(v).ljust(w) for v, w in zip(vals, widths)).rstrip()
    out = [line(header), line("-" * w for w in widths)] + [line(r) for r in table]
    return "\n".join(out) + "\n"


def cmd_report(args) -> int:
    rows = []
    for path in args.results:
        p = _require_file(path, "results")
        with open(p, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not set(RESULT_COLUMNS) <= set(reader.fieldnames):
                raise ParseError(f"{p}: expected columns {list(RESULT_COLUMNS)}")
            rows.extend(reader)
    sys.stdout.write(render_report(rows))
    return EXIT_OK


# --- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config; flags override its fields")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--parallelism", type=int)
    common.add_argument("--out-dir")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="qnoise", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qnoise {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="generate a random circuit corpus")
    g.add_argument("--per-qubit-count", type=int)
    g.add_argument("--qubit-range", type=_int_pair, help="e.g. 4,10 (inclusive)")
    g.add_argument("--depth-range", type=_int_pair, help="e.g. 2,50 (inclusive)")
    g.add_argument("--output", help="file name inside --out-dir (default circuits.jsonl)")
    g.set_defaults(func=cmd_generate)

    lb = sub.add_parser("label", parents=[common], help="label circuits by ideal-vs-noisy cosine distance")
    lb.add_argument("--circuits", required=True)
    lb.add_argument("--preset")
    lb.add_argument("--shots", type=int)
    lb.add_argument("--output", help="file name inside --out-dir (default dataset.jsonl)")
    lb.set_defaults(func=cmd_label)

    tr = sub.add_parser("train", parents=[common], help="fit a model and evaluate it on the held-out split")
    tr.add_argument("--dataset")
    tr.add_argument("--features", help="tabular feature CSV instead of --dataset")
    tr.add_argument("--circuits", help="circuits file (needed by dense/cnn)")
    tr.add_argument("--model", help=f"one of {', '.join(REGISTRY)}")
    tr.add_argument("--model-config", help="JSON object of model hyperparameter overrides")
    tr.add_argument("--split", type=float, help="train fraction, e.g. 0.01 or 0.8")
    tr.add_argument("--ablate", type=_name_list, help="comma-separated gate names to drop, e.g. reset,measure")
    tr.add_argument("--preset", help="preset label for --features input")
    tr.add_argument("--model-out")
    tr.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict noise for circuits with a trained model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--circuits")
    pr.add_argument("--qasm")
    pr.add_argument("--output")
    pr.add_argument("-v", "--verbose", action="store_true")
    pr.set_defaults(func=cmd_predict)

    be = sub.add_parser("bench", parents=[common], help="time fit and predict for a trained model")
    be.add_argument("--model", required=True)
    be.add_argument("--dataset", required=True)
    be.add_argument("--circuits")
    be.add_argument("--repetitions", type=int, default=3)
    be.add_argument("--skip-fit", action="store_true")
    be.set_defaults(func=cmd_bench)

    rp = sub.add_parser("report", help="render comparison tables from results CSVs")
    rp.add_argument("results", nargs="+")
    rp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (ParseError, InvalidArgument, CapacityError, InvalidState) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except NumericError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except QNoiseError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except FloatingPointError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
