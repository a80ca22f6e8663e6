"""Command-line front end: ``aeromap {synth,preprocess,train,ablate,map,eval}``.

Every stage reads and writes files only. Reports are JSON on disk, progress
goes to standard error, and each output directory receives a
``manifest.json`` describing the run (config digest, input checksums, seed,
stage timings and output checksums). Failures print a JSON error document on
standard error and exit nonzero.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from aeromap import __version__
from aeromap.datamodel import FEATURES, GridSpec, feature_matrix
from aeromap.io.config import MODEL_KINDS, PipelineConfig, load_config
from aeromap.io.grid import atomic_write_text, write_raster
from aeromap.io.layout import STATIONS_FILE, list_dates, read_day
from aeromap.io.stations import read_stations
from aeromap.io.tables import read_samples, write_samples

log = logging.getLogger("aeromap")

MANIFEST = "manifest.json"
SAMPLES_FILE = "samples.csv"
PREPROCESS_REPORT = "preprocess_report.json"
MERGE_FILE = "merge_coefficients.json"
MODEL_FILE = "model.json"
TRAIN_REPORT = "train_report.json"
ABLATION_FILE = "ablation.json"
MAP_REPORT = "map_report.json"
EVAL_REPORT = "eval_report.json"


class CliError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("UsageError", message, None)
        sys.exit(2)


# ---------------------------------------------------------------- helpers

def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_json(path: Path, doc) -> Path:
    atomic_write_text(path, _json_text(doc))
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _checksum(path: Path) -> dict:
    """Checksum of a file, or a combined checksum of every file in a directory."""
    path = Path(path)
    if path.is_file():
        return {"path": str(path), "sha256": _sha256(path)}
    h = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file())
    for p in files:
        h.update(p.relative_to(path).as_posix().encode())
        h.update(b"\0")
        h.update(_sha256(p).encode())
    return {"path": str(path), "files": len(files), "sha256": h.hexdigest()}


class _Run:
    """Collects stage timings and outputs, then writes the manifest."""

    def __init__(self, command: str, config: PipelineConfig, out_dir: Path, inputs):
        self.command = command
        self.config = config
        self.out_dir = out_dir
        self.inputs = [Path(p) for p in inputs]
        self.timings = {}
        self.outputs = []
        self._t0 = time.perf_counter()

    def stage(self, name):
        run = self

        class _Timer:
            def __enter__(self):
                log.info("%s: %s", run.command, name)
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = round(time.perf_counter() - self.t, 3)

        return _Timer()

    def output(self, path: Path) -> Path:
        self.outputs.append(Path(path))
        return path

    def finish(self) -> Path:
        self.timings["total"] = round(time.perf_counter() - self._t0, 3)
        doc = {
            "command": self.command,
            "version": __version__,
            "config_sha256": self.config.digest(),
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "inputs": [_checksum(p) for p in self.inputs],
            "outputs": [{"path": str(p.relative_to(self.out_dir)), "sha256": _sha256(p)}
                        for p in sorted(set(self.outputs))],
            "timings_s": self.timings,
        }
        return _write_json(self.out_dir / MANIFEST, doc)


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    changes = {}
    for name in ("seed", "window_size", "model", "threads"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if changes:
        cfg = PipelineConfig.from_dict({**cfg.to_dict(), **changes})
    return cfg


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date (YYYY-MM-DD): {text!r}") from None


def _read_days(data_dir: Path, dates):
    days = []
    for k, d in enumerate(dates):
        days.append(read_day(data_dir, d))
        if (k + 1) % 50 == 0:
            log.info("read %d/%d days", k + 1, len(dates))
    return days


def _require_dir(path: Path, what: str) -> Path:
    if not path.is_dir():
        raise CliError(f"{what} directory not found: {path}")
    return path


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> list[Path]:
    from aeromap.io.synthetic import SCENE_FILE, SceneParams, generate_synthetic_scene, write_scene

    cfg = _config(args)
    out = _out_dir(args.out)
    run = _Run("synth", cfg, out, [])
    spec = GridSpec(cfg.synth_n_rows, cfg.synth_n_cols, cfg.synth_origin_lat,
                    cfg.synth_origin_lon, cfg.synth_cell_size)
    params = SceneParams(cloud_fraction=cfg.synth_cloud_fraction, noise_sd=cfg.synth_noise_sd)
    with run.stage("generate"):
        scene = generate_synthetic_scene(spec, cfg.synth_n_stations, cfg.synth_n_days, cfg.seed,
                                         dt.date.fromisoformat(cfg.synth_start_date), params)
    with run.stage("write"):
        write_scene(scene, out)
    run.output(out / STATIONS_FILE)
    run.output(out / SCENE_FILE)
    run.finish()
    return [out]


def cmd_preprocess(args) -> list[Path]:
    from aeromap.preprocess.samples import build_samples

    cfg = _config(args)
    data = _require_dir(Path(args.data), "data")
    out = _out_dir(args.out)
    stations_path = data / STATIONS_FILE
    run = _Run("preprocess", cfg, out, [stations_path, data / "days"])
    with run.stage("read"):
        stations = read_stations(stations_path)
        dates = list_dates(data)
        if not dates:
            raise CliError(f"no daily grids under {data / 'days'}")
        days = _read_days(data, dates)
    with run.stage("build_samples"):
        samples, report, coeffs = build_samples(stations, days, cfg)
    if not samples:
        raise CliError("preprocessing produced no samples")
    with run.stage("write"):
        write_samples(samples, run.output(out / SAMPLES_FILE))
        _write_json(run.output(out / PREPROCESS_REPORT), report.to_dict())
        _write_json(run.output(out / MERGE_FILE), coeffs.to_dict())
    log.info("preprocess: %d samples from %d days", len(samples), len(days))
    run.finish()
    return run.outputs


def _fitter(kind, features, cfg):
    from aeromap.models import fit_model

    def fit(X, y, feats=features):
        return fit_model(kind, X, y, feats, cfg)

    return fit


def _split(samples, cfg):
    from aeromap.models import split_indices

    key = [s.date.toordinal() for s in samples] if cfg.split_mode == "temporal" else None
    return split_indices(len(samples), cfg.split_fraction, cfg.seed, cfg.split_mode, key)


def cmd_train(args) -> list[Path]:
    from aeromap.io.serialize import save_model
    from aeromap.models import (
        correlation_matrix,
        cross_validate,
        evaluate,
        feature_importance,
        summarize,
    )
    from aeromap.models.trees import TreeEnsemble

    cfg = _config(args)
    out = _out_dir(args.out)
    run = _Run("train", cfg, out, [args.samples])
    samples = read_samples(args.samples)
    X, y = feature_matrix(samples)
    tr, te = _split(samples, cfg)
    kind = cfg.model
    fit = _fitter(kind, FEATURES, cfg)
    with run.stage("fit"):
        model = fit(X[tr], y[tr])
    report = {
        "model": kind,
        "split": {"fraction": cfg.split_fraction, "mode": cfg.split_mode, "seed": cfg.seed,
                  "n_train": int(tr.size), "n_test": int(te.size)},
        "train": evaluate(model.predict_matrix(X[tr]), y[tr], "train").to_dict(),
        "test": evaluate(model.predict_matrix(X[te]), y[te], "test").to_dict(),
    }
    if cfg.cv_folds:
        with run.stage("cross_validate"):
            folds = cross_validate(X[tr], y[tr], fit, cfg.cv_folds, cfg.seed)
        report["cv"] = {"k": cfg.cv_folds, "folds": [f.to_dict() for f in folds],
                        "mean": summarize(folds)}
    if isinstance(model, TreeEnsemble):
        report["importance"] = feature_importance(model).to_dict()
    names, corr = correlation_matrix(X, y, FEATURES)
    report["correlation"] = {"names": names, "matrix": corr.tolist()}
    log.info("train: %s test RMSE %.3f R2 %.3f", kind, report["test"]["rmse"], report["test"]["r2"])
    meta = {"config_sha256": cfg.digest(), "seed": cfg.seed, "n_train": int(tr.size),
            "test": report["test"]}
    save_model(model, run.output(out / MODEL_FILE), meta)
    _write_json(run.output(out / TRAIN_REPORT), report)
    run.finish()
    return run.outputs


def cmd_ablate(args) -> list[Path]:
    from aeromap.models import run_ablation

    cfg = _config(args)
    out = _out_dir(args.out)
    run = _Run("ablate", cfg, out, [args.samples])
    samples = read_samples(args.samples)
    X, y = feature_matrix(samples)
    kind = cfg.model
    with run.stage("ablation"):
        rows = run_ablation(X, y, FEATURES, cfg.ablation,
                            lambda Xt, yt, feats: _fitter(kind, feats, cfg)(Xt, yt, feats),
                            cfg.split_fraction, cfg.seed)
    doc = {"model": kind, "rows": [r.to_dict() for r in rows]}
    _write_json(run.output(out / ABLATION_FILE), doc)
    run.finish()
    return run.outputs


def cmd_map(args) -> list[Path]:
    from aeromap.deploy import aggregate_by_period, classify_aqi_band, daily_map, write_daily_map
    from aeromap.geostat.kriging import KrigingError
    from aeromap.io.serialize import load_model
    from aeromap.preprocess.aod import MergeCoefficients
    from aeromap.preprocess.samples import fit_day_merge

    cfg = _config(args)
    data = _require_dir(Path(args.data), "data")
    out = _out_dir(args.out)
    inputs = [args.model_path, data / STATIONS_FILE, data / "days"]
    if args.merge:
        inputs.append(args.merge)
    run = _Run("map", cfg, out, inputs)
    model = load_model(args.model_path)
    all_dates = list_dates(data)
    dates = [d for d in all_dates
             if (args.start is None or d >= args.start) and (args.end is None or d <= args.end)]
    if not dates:
        raise CliError("no daily grids fall in the requested date range")
    with run.stage("merge_coefficients"):
        if args.merge:
            coeffs = MergeCoefficients.from_dict(json.loads(Path(args.merge).read_text()))
        else:
            coeffs = fit_day_merge(_read_days(data, all_dates), cfg.merge_mode)
    records = {}
    for r in read_stations(data / STATIONS_FILE):
        records.setdefault(r.date, []).append(r)

    maps, days_report, failed = [], [], []
    with run.stage("daily_maps"):
        for k, d in enumerate(dates):
            day = read_day(data, d)
            try:
                m, gp = daily_map(model, day, records.get(d, []), coeffs, cfg)
            except KrigingError as exc:
                failed.append({"date": d.isoformat(), "reason": str(exc)})
                continue
            for p in write_daily_map(m, out):
                run.output(p)
            if args.aqi:
                bands, labels = classify_aqi_band(m, cfg.aqi_bands)
                write_raster(bands, run.output(out / f"aqi_{d.isoformat()}.grid"))
            maps.append(m)
            days_report.append({"date": d.isoformat(), "n_quasi": m.n_quasi,
                                "n_ground": m.n_ground, "n_clamped": gp.n_clamped,
                                "kriging": m.kriging.get("setting"),
                                "met_fallbacks": gp.met.fallbacks,
                                "met_failures": gp.met.failures})
            if (k + 1) % 25 == 0:
                log.info("map: %d/%d days", k + 1, len(dates))
    with run.stage("aggregate"):
        aggregates = {}
        for period, tag in (("Month", "month"), ("Year", "year")):
            for key, raster in aggregate_by_period(maps, period).items():
                path = run.output(out / f"pm25_{tag}_{key}.grid")
                write_raster(raster, path)
                aggregates.setdefault(tag, []).append(key)
    report = {"days": days_report, "failed": failed, "aggregates": aggregates,
              "n_clamped": int(sum(d["n_clamped"] for d in days_report)),
              "units": "instrument" if cfg.instrument_units else "corrected",
              "aqi_bands": (labels if args.aqi and maps else None)}
    _write_json(run.output(out / MAP_REPORT), report)
    run.finish()
    if failed:
        raise CliError(f"{len(failed)} of {len(dates)} days could not be mapped; see {MAP_REPORT}")
    return run.outputs


def cmd_eval(args) -> list[Path]:
    from aeromap.io.serialize import load_model
    from aeromap.models import evaluate, predict

    cfg = _config(args)
    model = load_model(args.model_path)
    samples = read_samples(args.samples)
    _, y = feature_matrix(samples)
    report = evaluate(predict(model, samples), y, args.label).to_dict()
    report["model"] = model.kind
    sys.stdout.write(_json_text(report))
    if args.out:
        out = _out_dir(args.out)
        run = _Run("eval", cfg, out, [args.model_path, args.samples])
        _write_json(run.output(out / EVAL_REPORT), report)
        run.finish()
        return run.outputs
    return []


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline configuration JSON")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--window-size", type=int, dest="window_size",
                        help="AOD extraction window side in cells (odd)")
    common.add_argument("--model", dest="model", choices=MODEL_KINDS,
                        help="regressor kind (overrides the config)")
    common.add_argument("--threads", type=int,
                        help="worker threads for forest fitting (default: AEROMAP_THREADS or 1)")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress progress messages")

    p = _Parser(prog="aeromap", description="PM2.5 mapping from satellite AOD.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic data directory")
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("preprocess", parents=[common], help="build the sample table")
    s.add_argument("--data", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train", parents=[common], help="fit, test and cross-validate a model")
    s.add_argument("--samples", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("ablate", parents=[common], help="feature-removal study")
    s.add_argument("--samples", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("map", parents=[common], help="daily, monthly and yearly PM2.5 grids")
    s.add_argument("--model-file", dest="model_path", required=True, type=Path,
                   help="model.json written by train")
    s.add_argument("--data", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--merge", type=Path,
                   help="merge_coefficients.json from preprocess (refitted from the data if absent)")
    s.add_argument("--start", type=_parse_date, help="first date to map (inclusive)")
    s.add_argument("--end", type=_parse_date, help="last date to map (inclusive)")
    s.add_argument("--aqi", action="store_true", help="also write per-cell AQI band grids")
    s.set_defaults(func=cmd_map)

    s = sub.add_parser("eval", parents=[common], help="score a saved model on a sample table")
    s.add_argument("--model-file", dest="model_path", required=True, type=Path)
    s.add_argument("--samples", required=True, type=Path)
    s.add_argument("--label", default="eval")
    s.add_argument("--out", type=Path, help="directory for eval_report.json and a manifest")
    s.set_defaults(func=cmd_eval)
    return p


def _emit_error(kind, message, command) -> None:
    doc = {"error": {"type": kind, "message": message, "command": command}}
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        args.func(args)
    except Exception as exc:  # every failure becomes a machine-readable error
        _emit_error(type(exc).__name__, str(exc), args.command)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
