"""Experiment orchestration behind the ``grasp`` command line.

Every ``run_*`` function takes a resolved :class:`~grasp.config.RunConfig`,
writes its artifacts under ``cfg.out`` and returns a process exit status
(0 ok, 1 some images failed). Records are always ordered by input index, so
``--jobs`` changes wall time but never the bytes written.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import SWEEP_AXES, RunConfig
from .engine import ABLATION_ROWS, generate_adversarial
from .errors import ConfigError, GraspError, ProtocolError
from .image import ImageTensor
from .io import expand_inputs, read_image, resize_bilinear, sha256_file, to_rgb, write_png16
from .kernels import BACKEND
from .losses import SsimConfig, finite_diff_grad, lf_loss, mse_output_loss, ssim_loss
from .metrics import (STANDARD_BATTERY, MetricsReport, Transform, evaluate_robustness,
                      image_record)
from .models import bridge_connect, build_model
from .suite import seeded_suite

log = logging.getLogger("grasp")

REPORT_FILE = "report.jsonl"
TRACE_FILE = "traces.jsonl"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.json"
REPORT_SCHEMA = Path(__file__).parent / "schemas" / "report.schema.json"


# -- plumbing -----------------------------------------------------------------

def make_model(cfg: RunConfig):
    v = cfg.values
    if v["model.bridge"]:
        return bridge_connect(v["model.bridge"], timeout=v["model.timeout"])
    extra = {"hidden": v["model.hidden"]} if v["model.name"] == "conv" else {}
    return build_model(v["model.name"], seed=v["model.seed"], **extra)


@dataclass
class Loaded:
    index: int
    path: Path
    x: ImageTensor | None = None
    original_shape: tuple | None = None
    resized: bool = False
    gray_to_rgb: bool = False
    error: str | None = None

    @property
    def name(self) -> str:
        return self.path.stem

    def describe(self) -> dict:
        d = {"index": self.index, "path": str(self.path), "original_shape": self.original_shape,
             "resized_to": list(self.x.shape) if self.resized else None,
             "gray_to_rgb": self.gray_to_rgb}
        if self.path.is_file():
            d["sha256"] = sha256_file(self.path)
        if self.error:
            d["error"] = self.error
        return d


def _target_hw(model, cfg: RunConfig, img: ImageTensor):
    h, w = model.input_dims[:2]
    if h is not None and w is not None:
        return h, w
    size = cfg.values["image.size"]
    if size is not None:
        return size, size
    return img.height, img.width


def load_image(path: Path, index: int, model, cfg: RunConfig) -> Loaded:
    item = Loaded(index, path)
    try:
        img = read_image(path)
    except GraspError as exc:
        item.error = str(exc)
        log.error("skipping %s: %s", path, exc)
        return item
    item.original_shape = list(img.shape)
    want_c = model.input_dims[2]
    if img.channels == 1 and want_c in (None, 3):
        img, item.gray_to_rgb = to_rgb(img), True
    h, w = _target_hw(model, cfg, img)
    if (h, w) != (img.height, img.width):
        img, item.resized = resize_bilinear(img, h, w), True
        log.info("resized %s from %s to %dx%d", path, item.original_shape[:2], h, w)
    item.x = img
    return item


def load_inputs(cfg: RunConfig, model) -> list[Loaded]:
    paths = expand_inputs(cfg.inputs)
    if not paths:
        raise ConfigError("no image files found in the given inputs")
    stems = [p.stem for p in paths]
    dup = sorted({s for s in stems if stems.count(s) > 1})
    if dup:
        raise ConfigError(f"input file names must be unique, repeated: {dup}")
    return [load_image(p, i, model, cfg) for i, p in enumerate(paths)]


def _pool_map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _defend_one(model, defense):
    def run(item: Loaded):
        if item.x is None:
            return None
        try:
            return generate_adversarial(model, item.x, defense)
        except ProtocolError:
            raise
        except GraspError as exc:
            log.error("defense failed on %s: %s", item.path, exc)
            return exc
    return run


def defend_all(model, items: list[Loaded], defense, jobs: int = 1):
    """``generate_adversarial`` over loaded images; failures come back as exceptions."""
    return _pool_map(_defend_one(model, defense), items, jobs)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")


def _write_lines(path: Path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(_dumps(row) + "\n")


def _write_manifest(cfg: RunConfig, model, items, artifacts, extra=None):
    out = cfg.out
    manifest = {
        "command": cfg.command,
        "version": __version__,
        "backend": BACKEND,
        "config": cfg.resolved(),
        "model": model.describe(),
        "inputs": [it.describe() for it in items],
        "artifacts": {name: sha256_file(out / name) for name in sorted(artifacts)},
        **(extra or {}),
    }
    _write_json(out / MANIFEST_FILE, manifest)


def _error_record(item: Loaded, message: str) -> dict:
    return {"index": item.index, "name": item.name, "status": "error", "error": message}


def _trace_json(item: Loaded, trace) -> dict:
    return {
        "index": item.index,
        "name": item.name,
        "mse": trace.column("mse"),
        "ssim": trace.column("ssim"),
        "lf": trace.column("lf"),
        "linf": trace.column("linf"),
        "conflicts": [list(f) for f in trace.column("conflict_flags")],
    }


def _exit_status(n_failed: int) -> int:
    return 1 if n_failed else 0


# -- commands -----------------------------------------------------------------

def run_defend(cfg: RunConfig) -> int:
    model = make_model(cfg)
    try:
        items = load_inputs(cfg, model)
        defense = cfg.defense()
        results = defend_all(model, items, defense, cfg.jobs)
        cfg.out.mkdir(parents=True, exist_ok=True)
        records, traces, artifacts, ok = [], [], [REPORT_FILE, TRACE_FILE, SUMMARY_FILE], []
        for item, res in zip(items, results):
            if res is None or isinstance(res, Exception):
                records.append(_error_record(item, item.error or str(res)))
                continue
            x_adv, trace = res
            png = f"{item.name}_adv.png"
            write_png16(cfg.out / png, x_adv)
            artifacts.append(png)
            rec = image_record(model, item.x, x_adv, item.index, item.name)
            ok.append(rec)
            row = rec.to_json()
            row.update(status="ok", output=png, iterations=len(trace),
                       linf=trace.column("linf")[-1] if len(trace) else 0.0)
            records.append(row)
            traces.append(_trace_json(item, trace))
        _write_lines(cfg.out / REPORT_FILE, records)
        _write_lines(cfg.out / TRACE_FILE, traces)
        summary = MetricsReport(ok).summary_json() if ok else {"n_images": 0}
        summary["n_failed"] = len(items) - len(ok)
        _write_json(cfg.out / SUMMARY_FILE, summary)
        _write_manifest(cfg, model, items, artifacts)
        log.info("defended %d/%d images", len(ok), len(items))
        return _exit_status(len(items) - len(ok))
    finally:
        model.close()


def _load_pairs(cfg: RunConfig, model, items):
    """Original/protected pairs, from ``--adv`` if given, otherwise by running the defense."""
    pairs = []
    if cfg.adv_dir is not None:
        for item in items:
            if item.x is None:
                pairs.append(None)
                continue
            adv_path = cfg.adv_dir / f"{item.name}_adv.png"
            try:
                xa = read_image(adv_path)
                if xa.channels == 1 and item.x.channels == 3:
                    xa = to_rgb(xa)
                if xa.shape != item.x.shape:
                    raise ConfigError(f"{adv_path} has shape {xa.shape}, expected {item.x.shape}")
                pairs.append((item.x, xa))
            except GraspError as exc:
                item.error = str(exc)
                log.error("skipping %s: %s", item.path, exc)
                pairs.append(None)
        return pairs
    for item, res in zip(items, defend_all(model, items, cfg.defense(), cfg.jobs)):
        if isinstance(res, Exception):
            item.error = str(res)
        pairs.append(None if res is None or isinstance(res, Exception) else (item.x, res[0]))
    return pairs


def run_evaluate(cfg: RunConfig) -> int:
    model = make_model(cfg)
    try:
        items = load_inputs(cfg, model)
        pairs = _load_pairs(cfg, model, items)
        cfg.out.mkdir(parents=True, exist_ok=True)
        records, ok = [], []
        for item, pair in zip(items, pairs):
            if pair is None:
                records.append(_error_record(item, item.error or "unavailable"))
                continue
            rec = image_record(model, *pair, index=item.index, name=item.name)
            ok.append(rec)
            records.append({**rec.to_json(), "status": "ok"})
        _write_lines(cfg.out / REPORT_FILE, records)
        summary = MetricsReport(ok).summary_json() if ok else {"n_images": 0}
        summary["n_failed"] = len(items) - len(ok)
        _write_json(cfg.out / SUMMARY_FILE, summary)
        _write_manifest(cfg, model, items, [REPORT_FILE, SUMMARY_FILE])
        return _exit_status(len(items) - len(ok))
    finally:
        model.close()


def run_robustness(cfg: RunConfig) -> int:
    model = make_model(cfg)
    try:
        battery = [Transform.parse(t) for t in cfg.values["robustness.battery"]] or list(STANDARD_BATTERY)
        items = load_inputs(cfg, model)
        pairs = _load_pairs(cfg, model, items)
        good = [(it, p) for it, p in zip(items, pairs) if p is not None]
        cfg.out.mkdir(parents=True, exist_ok=True)
        if not good:
            _write_manifest(cfg, model, items, [])
            return 1
        reports = evaluate_robustness(model, [p for _, p in good], battery,
                                      names=[it.name for it, _ in good])
        rows, summaries = [], []
        for label, rep in reports.items():
            for it, rec in zip(good, rep.records):
                rows.append({**rec.to_json(), "index": it[0].index, "transform": label})
            summaries.append(rep.summary_json())
        _write_lines(cfg.out / "robustness.jsonl", rows)
        _write_json(cfg.out / "robustness.json", summaries)
        _write_table(cfg.out / "robustness.csv", ["transform", "dsr", "l2_out", "psnr_in", "ssim_in", "lf_in"],
                     [[s["transform"]] + [s[k] for k in ("dsr", "l2_out", "psnr_in", "ssim_in", "lf_in")]
                      for s in summaries])
        _write_manifest(cfg, model, items, ["robustness.jsonl", "robustness.json", "robustness.csv"])
        return _exit_status(len(items) - len(good))
    finally:
        model.close()


def _write_table(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return "" if v is None else v


def _row_summary(model, items, results) -> dict:
    """Aggregate metrics for one configuration plus the mean peak trace MSE."""
    recs, peak = [], []
    for item, res in zip(items, results):
        if res is None or isinstance(res, Exception):
            continue
        x_adv, trace = res
        recs.append(image_record(model, item.x, x_adv, item.index, item.name))
        mse = trace.column("mse")
        peak.append(max(mse) if mse else 0.0)
    if not recs:
        return {"n_images": 0, "n_failed": len(items)}
    s = MetricsReport(recs).summary_json()
    s["trace_mse"] = float(np.mean(peak))
    s["n_failed"] = len(items) - len(recs)
    return s


ABLATION_COLUMNS = ["row", "dsr", "l2_out", "psnr_in", "ssim_in", "lf_in", "trace_mse"]


def run_ablation(cfg: RunConfig) -> int:
    model = make_model(cfg)
    try:
        items = load_inputs(cfg, model)
        base = cfg.defense()
        rows, failed = [], 0
        for name in cfg.values["ablation.rows"]:
            defense = dataclasses.replace(base, ablation=ABLATION_ROWS[name])
            log.info("ablation row %s", name)
            s = _row_summary(model, items, defend_all(model, items, defense, cfg.jobs))
            s["row"] = name
            failed = max(failed, s["n_failed"])
            rows.append(s)
        cfg.out.mkdir(parents=True, exist_ok=True)
        _write_json(cfg.out / "ablation.json", rows)
        _write_table(cfg.out / "ablation.csv", ABLATION_COLUMNS,
                     [[_unjson(r.get(c)) for c in ABLATION_COLUMNS] for r in rows])
        _write_manifest(cfg, model, items, ["ablation.json", "ablation.csv"])
        return _exit_status(failed)
    finally:
        model.close()


def _unjson(v):
    return math.inf if v == "inf" else v


SWEEP_COLUMNS = ["value", "dsr", "psnr_in", "lf_in", "l2_out", "ssim_in"]


def run_sweep(cfg: RunConfig) -> int:
    model = make_model(cfg)
    try:
        items = load_inputs(cfg, model)
        axis = cfg.values["sweep.axis"]
        key = SWEEP_AXES[axis]
        rows, failed = [], 0
        for value in cfg.values["sweep.values"]:
            value = int(value) if key == "iterations" else float(value)
            log.info("sweep %s = %s", axis, value)
            s = _row_summary(model, items, defend_all(model, items, cfg.defense(**{key: value}), cfg.jobs))
            s["value"] = value
            failed = max(failed, s["n_failed"])
            rows.append(s)
        cfg.out.mkdir(parents=True, exist_ok=True)
        _write_table(cfg.out / "sweep.csv", SWEEP_COLUMNS,
                     [[_unjson(r.get(c)) for c in SWEEP_COLUMNS] for r in rows])
        series = {"axis": axis, "values": [r["value"] for r in rows],
                  **{c: [r.get(c) for r in rows] for c in SWEEP_COLUMNS[1:]}}
        _write_json(cfg.out / "sweep.json", series)
        _write_manifest(cfg, model, items, ["sweep.csv", "sweep.json"])
        return _exit_status(failed)
    finally:
        model.close()


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / scale)


GRADCHECK_TOL = {"ssim": 1e-4, "lf": 1e-3, "mse": 1e-4}


def gradcheck(model, seeds: int = 20, size: int = 8, h: float = 1e-5) -> dict:
    """Worst relative error between analytic and central-difference gradients."""
    window = min(7, size if size % 2 else size - 1)
    ssim_cfg = SsimConfig(window_size=window)
    worst = {k: 0.0 for k in GRADCHECK_TOL}
    channels = model.input_dims[2] or 3
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        x = ImageTensor(rng.uniform(0.2, 0.8, size=(size, size, channels)))
        xa = ImageTensor(x.data + rng.uniform(-0.05, 0.05, size=x.shape))
        y = model.forward(x)
        checks = {
            "ssim": lambda t: ssim_loss(x, t, ssim_cfg),
            "lf": lambda t: lf_loss(x, t),
            "mse": lambda t: mse_output_loss(model, x, t, y),
        }
        for name, fn in checks.items():
            analytic = fn(xa).grad_wrt_adv.data
            numeric = finite_diff_grad(lambda t: fn(t).value, xa, h).data
            worst[name] = max(worst[name], _rel_err(analytic, numeric))
    return {name: {"max_rel_err": err, "tol": GRADCHECK_TOL[name], "ok": err <= GRADCHECK_TOL[name]}
            for name, err in worst.items()}


def run_gradcheck(cfg: RunConfig) -> int:
    model = make_model(cfg)
    try:
        result = gradcheck(model, cfg.values["gradcheck.seeds"], cfg.values["gradcheck.size"])
        cfg.out.mkdir(parents=True, exist_ok=True)
        _write_json(cfg.out / "gradcheck.json", {"model": model.describe(), "checks": result})
        for name, r in result.items():
            log.info("gradcheck %s: max rel err %.3g (tol %g)", name, r["max_rel_err"], r["tol"])
        return 0 if all(r["ok"] for r in result.values()) else 1
    finally:
        model.close()


def run_synth(cfg: RunConfig) -> int:
    """Write the seeded synthetic suite as 16-bit PNGs."""
    v = cfg.values
    cfg.out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(seeded_suite(v["synth.count"], v["synth.size"], v["synth.seed"])):
        write_png16(cfg.out / f"synth_{i:02d}.png", img)
    return 0


COMMANDS = {
    "defend": run_defend,
    "evaluate": run_evaluate,
    "robustness": run_robustness,
    "ablate": run_ablation,
    "sweep": run_sweep,
    "gradcheck": run_gradcheck,
    "synth": run_synth,
}


def run(cfg: RunConfig) -> int:
    return COMMANDS[cfg.command](cfg)


__all__ = ["run", "run_defend", "run_evaluate", "run_robustness", "run_ablation", "run_sweep",
           "run_gradcheck", "run_synth", "gradcheck", "defend_all", "make_model"]
