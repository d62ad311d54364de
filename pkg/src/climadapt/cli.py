"""Command-line pipelines over a content-addressed workspace.

Every command prints a JSON summary on stdout and logs to stderr. Exit
codes: 0 success, 1 validation or configuration error, 2 I/O error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from . import adaptation, forecast, fusion, indicators, plotting
from .config import PipelineConfig, load_config
from .errors import ConfigError, NumericalError, ValidationError
from .flowrecon import (
    compute_pod,
    compute_sensor_pod,
    evaluate_reconstruction,
    generate_synthetic_wake,
    train_reconstruction1,
    train_reconstruction2,
)
from .flowrecon import io as flow_io
from .raster import load_raster
from .workspace import Workspace

log = logging.getLogger("climadapt")

ENV_WORKSPACE = "CLIMADAPT_WORKSPACE"
DEFAULT_WORKSPACE = "climadapt-workspace"


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever ``sys.stderr`` is at emit time."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# -- helpers ------------------------------------------------------------------


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _holdout_split(count: int, mode: str):
    """Training and test snapshot indices. Interleaved: even train, odd test."""
    idx = np.arange(count)
    if mode == "none":
        return idx, idx
    return idx[0::2], idx[1::2]


def _parse_plane(text: str):
    orientation, _, index = text.partition(":")
    try:
        return orientation, int(index)
    except ValueError:
        raise ConfigError(f"--plane must look like vertical:32, got {text!r}") from None


# -- commands -----------------------------------------------------------------


def cmd_init(args, cfg: PipelineConfig):
    ws = Workspace.init(args.workspace)
    log.info("workspace ready at %s", ws.root)
    return {"workspace": str(ws.root)}


def cmd_ingest(args, cfg, ws: Workspace):
    raster = load_raster(args.raster)
    region = args.region or Path(args.raster).stem
    with ws.staging() as tmp:
        dest = tmp / "raster.carb"
        shutil.copyfile(args.raster, dest)
        meta = {"region": region, "bands": raster.band_names,
                "width": raster.width, "height": raster.height}
        if args.timestamp is not None:
            meta["timestamp"] = args.timestamp
        rid = ws.register("raster", dest, meta)
    log.info("ingested %s as %s", args.raster, rid)
    return {"id": rid, "region": region, "bands": raster.band_names}


def cmd_indices(args, cfg, ws: Workspace):
    entry = ws.entry(args.raster_id)
    raster = load_raster(ws.path(args.raster_id, "raster"))
    values = indicators.compute_indices(raster, cfg.index)
    if args.series:
        series = indicators.load_series(ws.path(args.series, "series"),
                                        ws.entry(args.series)["meta"]["region"])
    else:
        series = indicators.IndicatorSeries(args.region or entry["meta"]["region"])
    if args.timestamp is not None:
        t = args.timestamp
    elif "timestamp" in entry["meta"]:
        t = entry["meta"]["timestamp"]
    else:
        t = float(len(series))
    series = indicators.append_observation(series, t, values)
    with ws.staging() as tmp:
        dest = tmp / "series.csv"
        indicators.save_series(series, dest)
        sid = ws.register("series", dest, {"region": series.region_id, "sources": [args.raster_id]})
    log.info("series %s now has %d entries", sid, len(series))
    return {"id": sid, "timestamp": t, "indices": values}


def _load_anchors(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = ["region_id", "raw_x", "raw_y", "ref_x", "ref_y"]
        if reader.fieldnames != expected:
            raise ValidationError(f"{path}: anchor header must be {','.join(expected)}")
        try:
            return [adaptation.Anchor(r["region_id"], float(r["raw_x"]), float(r["raw_y"]),
                                      float(r["ref_x"]), float(r["ref_y"])) for r in reader]
        except ValueError as exc:
            raise ValidationError(f"{path}: {exc}") from None


def cmd_calibrate(args, cfg, ws: Workspace):
    cal = adaptation.fit_calibration(_load_anchors(args.anchors))
    with ws.staging() as tmp:
        dest = tmp / "calibration.json"
        _write_json(dest, cal.to_dict())
        cid = ws.register("calibration", dest)
    log.info("calibration %s, rms residual %s", cid, cal.fit_residual)
    return {"id": cid, "x_axis": cal.to_dict()["x_axis"], "y_axis": cal.to_dict()["y_axis"],
            "fit_residual": list(cal.fit_residual)}


def cmd_observe(args, cfg, ws: Workspace):
    cal_data = json.loads(ws.path(args.calibration, "calibration").read_text(encoding="utf-8"))
    cal = adaptation.CalibrationMap.from_dict(cal_data)
    points = []
    for sid in args.series:
        series = indicators.load_series(ws.path(sid, "series"), ws.entry(sid)["meta"]["region"])
        if not len(series):
            raise ValidationError(f"series {sid} is empty")
        green = series.column(indicators.GREEN)[-1]
        dev = series.column(indicators.DEVELOPMENT)[-1]
        points.append(adaptation.observe(green, dev, cal, cfg.calibration, series.region_id))
    with ws.staging() as tmp:
        out = tmp / "diagram"
        out.mkdir()
        adaptation.emit_diagram(points, cfg.calibration, out / "diagram")
        did = ws.register("diagram", out, {"series": list(args.series),
                                           "calibration": args.calibration})
    return {"id": did, "points": [p.__dict__ for p in points]}


def cmd_forecast(args, cfg, ws: Workspace):
    fc = cfg.forecast
    name = args.indicator or fc.indicator
    horizon = args.horizon if args.horizon is not None else fc.horizon
    series = indicators.load_series(ws.path(args.series, "series"),
                                    ws.entry(args.series)["meta"]["region"])
    times, values = series.timestamps, series.column(name)
    if args.kind == "poly":
        degree = args.degree if args.degree is not None else fc.degree
        model = forecast.fit_poly(times, values, degree)
    else:
        model = forecast.train_lstm(values, fc.lstm)
    future = forecast.forecast(model, times, values, horizon)
    future_t = forecast.future_timestamps(times, horizon)
    with ws.staging() as tmp:
        out = tmp / "forecast"
        out.mkdir()
        text = indicators.series_to_csv(series, {"timestamps": future_t, name: future})
        (out / "forecast.csv").write_text(text, encoding="utf-8", newline="")
        forecast.save_model(model, out / "model.json")
        fid = ws.register("forecast", out, {"series": args.series, "kind": args.kind,
                                            "indicator": name, "horizon": horizon})
    log.info("%s forecast %s over %d steps", args.kind, fid, horizon)
    return {"id": fid, "kind": args.kind, "indicator": name,
            "timestamps": future_t.tolist(), "values": future.tolist()}


def cmd_synth_flow(args, cfg, ws: Workspace):
    wake = cfg.flow.wake
    if args.vortices is not None:
        wake = dataclasses.replace(wake, vortices=args.vortices)
    snaps, trace = generate_synthetic_wake(wake)
    with ws.staging() as tmp:
        flow_io.save_snapshots(snaps, tmp / "snapshots")
        flow_io.save_trace(trace, tmp / "sensors.csv")
        meta = {"wake": dataclasses.asdict(wake)}
        snap_id = ws.register("snapshots", tmp / "snapshots", meta)
        trace_id = ws.register("trace", tmp / "sensors.csv", {"snapshots": snap_id})
    log.info("synthetic wake: %d snapshots, %d sensors", snaps.count, trace.count)
    return {"snapshots": snap_id, "trace": trace_id, "count": snaps.count,
            "sensors": trace.count}


def cmd_pod(args, cfg, ws: Workspace):
    snaps = flow_io.load_snapshots(ws.path(args.snapshots, "snapshots"))
    holdout = args.holdout or cfg.flow.holdout
    train, _ = _holdout_split(snaps.count, holdout)
    fields = tuple(args.fields.split(","))
    basis = compute_pod(snaps, fields, train)
    lam = basis.eigenvalues
    total = float(lam.sum())
    cumulative = np.cumsum(lam) / total if total > 0 else np.zeros_like(lam)
    n_u = args.n_u if args.n_u is not None else cfg.flow.n_u
    if basis.retained and n_u > basis.retained:
        raise ConfigError(f"n_u={n_u} exceeds the {basis.retained} retained modes")
    with ws.staging() as tmp:
        out = tmp / "pod"
        flow_io.save_basis(basis, out / "basis")
        rows = [[k + 1, repr(float(v)), repr(float(c))] for k, (v, c) in enumerate(zip(lam, cumulative))]
        (out / "energy.csv").write_text(
            _csv_text(["mode", "eigenvalue", "energy_fraction"], rows), encoding="utf-8", newline=""
        )
        bid = ws.register("basis", out, {"snapshots": args.snapshots, "holdout": holdout,
                                         "fields": list(fields), "n_u": n_u})
    log.info("POD %s: %d retained modes", bid, basis.retained)
    return {"id": bid, "retained": basis.retained, "train_snapshots": len(train),
            "energy_fraction": float(cumulative[min(n_u, len(lam)) - 1]) if len(lam) else 0.0}


def cmd_recon(args, cfg, ws: Workspace):
    fl = cfg.flow
    snaps = flow_io.load_snapshots(ws.path(args.snapshots, "snapshots"))
    trace = flow_io.load_trace(ws.path(args.trace, "trace"))
    ridge = args.ridge if args.ridge is not None else fl.ridge
    basis_dir = ws.path(args.basis, "basis") if args.basis else None
    if basis_dir is not None:
        train = np.array(flow_io.load_basis(basis_dir / "basis").train_indices, dtype=int)
    else:
        train, _ = _holdout_split(snaps.count, fl.holdout)
    test = np.setdiff1d(np.arange(snaps.count), train)
    disjoint = test.size > 0
    if not disjoint:
        test = train
    meta = {"variant": args.variant, "snapshots": args.snapshots, "trace": args.trace,
            "ridge": ridge}
    if args.variant == "r1":
        if basis_dir is None:
            raise ConfigError("--basis is required for variant r1")
        vb = flow_io.load_basis(basis_dir / "basis")
        n_u = args.n_u if args.n_u is not None else fl.n_u
        n_p = args.n_p if args.n_p is not None else fl.n_p
        pb = compute_sensor_pod(trace, train)
        model = train_reconstruction1(vb, pb, trace, n_u, n_p, ridge)
        meta.update(basis=args.basis, n_u=n_u, n_p=n_p)
    else:
        plane = _parse_plane(args.plane) if args.plane else tuple(fl.plane)
        model = train_reconstruction2(snaps, plane, trace, ridge, indices=train)
        meta.update(plane=list(plane))
    report = evaluate_reconstruction(model, snaps.subset(test), trace.subset(test), disjoint)
    report["test_indices"] = test.tolist()
    with ws.staging() as tmp:
        out = tmp / "recon"
        out.mkdir()
        flow_io.save_model(model, out / "model.json")
        flow_io.save_report(report, out / "report.json")
        rid = ws.register("recon", out, meta)
    log.info("reconstruction %s: mean relative error %.4g", rid, report["mean_error"])
    summary = {"id": rid, "variant": args.variant, "mean_error": report["mean_error"],
               "test_disjoint": disjoint}
    if "truncation_floor" in report:
        summary["truncation_floor"] = report["truncation_floor"]
    return summary


def cmd_fusion(args, cfg, ws: Workspace):
    fu = cfg.fusion
    data = fusion.load_dataset(args.dataset)
    layers = tuple(int(v) for v in args.layers.split(",")) if args.layers else fu.layers
    epochs = args.epochs if args.epochs is not None else fu.epochs
    lr = args.learning_rate if args.learning_rate is not None else fu.learning_rate
    model = fusion.init_model(data.wide.shape[1], data.deep.shape[1], layers, fu.seed)
    model = fusion.fit_standardization(model, data)
    model = fusion.train(model, data, epochs, lr, fu.seed)
    with ws.staging() as tmp:
        out = tmp / "fusion"
        out.mkdir()
        fusion.save_model(model, out / "model.json", data.wide_names, data.deep_names)
        rows = [[i + 1, repr(v)] for i, v in enumerate(model.loss_history)]
        (out / "loss.csv").write_text(_csv_text(["epoch", "mse"], rows), encoding="utf-8",
                                      newline="")
        mid = ws.register("fusion", out, {"layers": list(layers), "epochs": epochs,
                                          "learning_rate": lr, "records": len(data)})
    final = model.loss_history[-1] if model.loss_history else fusion.mse(model, data)
    log.info("wide-and-deep model %s, final MSE %.4g", mid, final)
    return {"id": mid, "epochs": epochs, "final_mse": final}


def _latest(ws: Workspace, kind: str, explicit):
    chosen = [i for i in explicit if ws.entry(i)["kind"] == kind]
    if chosen:
        return chosen
    found = ws.ids(kind)
    return found[-1:] if found else []


def cmd_report(args, cfg, ws: Workspace):
    for aid in args.ids:
        ws.entry(aid)
    rows, figures = [], []
    with ws.staging() as tmp:
        out = tmp / "report"
        out.mkdir()
        for aid in _latest(ws, "diagram", args.ids):
            with open(ws.path(aid) / "diagram.csv", newline="", encoding="utf-8") as fh:
                pts = [adaptation.AdaptationPoint(r["region_id"], float(r["x"]), float(r["y"]),
                                                  r["in_green_zone"] == "true")
                       for r in csv.DictReader(fh)]
            figures.append(plotting.plot_diagram(pts, cfg.calibration, out / f"{aid}.png"))
            for p in pts:
                rows += [[aid, f"{p.region_id}.x", repr(p.x)], [aid, f"{p.region_id}.y", repr(p.y)]]
        for aid in _latest(ws, "forecast", args.ids):
            meta = ws.entry(aid)["meta"]
            with open(ws.path(aid) / "forecast.csv", newline="", encoding="utf-8") as fh:
                recs = list(csv.DictReader(fh))
            name = meta["indicator"]
            obs = [(float(r["timestamp"]), float(r[name])) for r in recs if r["forecast"] == "false"]
            fut = [(float(r["timestamp"]), float(r[name])) for r in recs if r["forecast"] == "true"]
            figures.append(plotting.plot_forecast(*zip(*obs), *zip(*fut), out / f"{aid}.png", name))
            rows += [[aid, f"{name}@{t!r}", repr(v)] for t, v in fut]
        for aid in _latest(ws, "basis", args.ids):
            basis = flow_io.load_basis(ws.path(aid) / "basis")
            figures.append(plotting.plot_energy(basis.eigenvalues, out / f"{aid}.png"))
            rows.append([aid, "retained_modes", str(basis.retained)])
        for aid in _latest(ws, "recon", args.ids):
            report = json.loads((ws.path(aid) / "report.json").read_text(encoding="utf-8"))
            floor = report.get("truncation_floor")
            figures.append(plotting.plot_recon_errors(report["per_snapshot_error"],
                                                      out / f"{aid}.png", floor,
                                                      report["variant"]))
            rows.append([aid, "mean_error", repr(report["mean_error"])])
            if floor is not None:
                rows.append([aid, "truncation_floor", repr(floor)])
        for aid in _latest(ws, "fusion", args.ids):
            model = fusion.load_model(ws.path(aid) / "model.json")
            figures.append(plotting.plot_loss(model.loss_history, out / f"{aid}.png",
                                              "wide-and-deep training loss"))
            if model.loss_history:
                rows.append([aid, "final_mse", repr(model.loss_history[-1])])
        if not rows and not figures:
            raise ValidationError("nothing to report: the workspace has no reportable artifacts")
        (out / "summary.csv").write_text(_csv_text(["artifact_id", "metric", "value"], rows),
                                         encoding="utf-8", newline="")
        names = sorted(p.name for p in out.iterdir())
        rid = ws.register("report", out, {"sources": sorted({r[0] for r in rows})})
    target = ws.path(rid)
    if args.out:
        dest = Path(args.out)
        dest.mkdir(parents=True, exist_ok=True)
        for name in names:
            shutil.copyfile(target / name, dest / name)
    log.info("report %s with %d figures", rid, len(figures))
    return {"id": rid, "path": str(target), "files": names}


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="climadapt", description=__doc__.splitlines()[0])
    parser.add_argument("--workspace", help=f"workspace directory (env {ENV_WORKSPACE})")
    parser.add_argument("--config", help="pipeline configuration JSON")
    parser.add_argument("--seed", type=int, help="seed applied to every seeded stage")
    parser.add_argument("--json", action="store_true", help="compact one-line JSON output")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("init", help="create a workspace")

    p = sub.add_parser("ingest", help="register a CARB1 raster")
    p.add_argument("raster")
    p.add_argument("--region")
    p.add_argument("--timestamp", type=float)

    p = sub.add_parser("indices", help="append green and development indices to a series")
    p.add_argument("raster_id")
    p.add_argument("--series", help="existing series id to extend")
    p.add_argument("--region")
    p.add_argument("--timestamp", type=float)

    p = sub.add_parser("calibrate", help="fit the diagram calibration from an anchors CSV")
    p.add_argument("anchors")

    p = sub.add_parser("observe", help="place series on the adaptation diagram")
    p.add_argument("series", nargs="+")
    p.add_argument("--calibration", required=True)

    p = sub.add_parser("forecast", help="forecast one indicator of a series")
    p.add_argument("series")
    p.add_argument("--kind", choices=("poly", "lstm"), default="poly")
    p.add_argument("--horizon", type=int)
    p.add_argument("--indicator")
    p.add_argument("--degree", type=int)

    p = sub.add_parser("synth-flow", help="generate the synthetic wake and sensor trace")
    p.add_argument("--vortices", type=int)

    p = sub.add_parser("pod", help="POD of stored snapshots")
    p.add_argument("snapshots")
    p.add_argument("--holdout", choices=("interleaved", "none"))
    p.add_argument("--fields", default="u,v")
    p.add_argument("--n-u", type=int, dest="n_u")

    p = sub.add_parser("recon", help="train and evaluate a sensor reconstruction")
    p.add_argument("variant", choices=("r1", "r2"))
    p.add_argument("--snapshots", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--basis")
    p.add_argument("--ridge", type=float)
    p.add_argument("--n-u", type=int, dest="n_u")
    p.add_argument("--n-p", type=int, dest="n_p")
    p.add_argument("--plane", help="orientation:index, e.g. vertical:32")

    p = sub.add_parser("fusion", help="train the wide-and-deep predictor")
    p.add_argument("dataset")
    p.add_argument("--layers", help="comma-separated sizes, e.g. 4,2")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")

    p = sub.add_parser("report", help="render figures and a summary CSV")
    p.add_argument("ids", nargs="*", help="artifacts to include (default: latest of each kind)")
    p.add_argument("--out", help="also copy the report files here")
    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "indices": cmd_indices,
    "calibrate": cmd_calibrate,
    "observe": cmd_observe,
    "forecast": cmd_forecast,
    "synth-flow": cmd_synth_flow,
    "pod": cmd_pod,
    "recon": cmd_recon,
    "fusion": cmd_fusion,
    "report": cmd_report,
}


def run(argv=None) -> dict:
    """Parse ``argv`` and run one command; returns its summary."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        log.setLevel(logging.DEBUG)
    args.workspace = args.workspace or os.environ.get(ENV_WORKSPACE) or DEFAULT_WORKSPACE
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        cfg = cfg.with_seed(args.seed)
    if args.command == "init":
        summary = cmd_init(args, cfg)
    else:
        summary = COMMANDS[args.command](args, cfg, Workspace(args.workspace))
    return {"command": args.command, **summary}


def main(argv=None) -> int:
    if not log.handlers:
        handler = _StderrHandler()
        handler.setFormatter(logging.Formatter("climadapt: %(message)s"))
        log.addHandler(handler)
        log.setLevel(logging.INFO)
    compact = "--json" in (sys.argv[1:] if argv is None else argv)
    try:
        summary = run(argv)
    except ValidationError as exc:
        log.error("error: %s", exc)
        return 1
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return 2
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 3
    except ValueError as exc:
        log.error("error: %s", exc)
        return 1
    if compact:
        print(json.dumps(summary, sort_keys=True, default=float))
    else:
        print(json.dumps(summary, indent=2, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
