"""Command-line front end: synthesize observations, run sweeps, estimate.

Config files are JSON with degrees/dB in user-facing fields (radians are
internal only).  Subcommands:

* ``synthesize`` -- write an observation file plus its ground-truth sidecar
* ``sweep``      -- Monte-Carlo SNR sweep, CSV + SVG outputs
* ``estimate``   -- fit path parameters to an existing observation file

Every run writes a manifest next to its results.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .antenna import ArrayModel, DipoleElement, default_array, load_pattern_grid
from .channel import (
    FrequencyGrid,
    ObservationFormatError,
    PathParameterSet,
    make_signal,
    params_from_json_dict,
    read_observation,
    synthesize,
    write_observation,
    write_truth_sidecar,
)
from .estimate import InitPolicy, coarse_grid_init, estimate_paths
from .lm import LmOptions
from .montecarlo import ScenarioConfig, SweepResult, normalized_power, run_sweep
from .svg import Series, line_chart

__version__ = "0.1.0"


class ConfigError(ValueError):
    pass


def _require(doc: dict, name: str, context: str = "config"):
    if name not in doc:
        raise ConfigError(f"{context}: missing required field '{name}'")
    return doc[name]


def _parse_weight(entry: dict, idx: int) -> tuple[complex, complex]:
    ctx = f"paths[{idx}]"
    if "weight_h" in entry or "weight_v" in entry:
        wh = _require(entry, "weight_h", ctx)
        wv = _require(entry, "weight_v", ctx)
        return complex(wh[0], wh[1]), complex(wv[0], wv[1])
    pol = str(_require(entry, "polarization", ctx)).lower()
    amp = 10.0 ** (float(entry.get("power_db", 0.0)) / 20.0)
    amp *= np.exp(1j * np.deg2rad(float(entry.get("phase_deg", 0.0))))
    if pol in ("h", "horizontal"):
        return amp, 0.0 + 0.0j
    if pol in ("v", "vertical"):
        return 0.0 + 0.0j, amp
    raise ConfigError(f"{ctx}: polarization must be 'H' or 'V', got {pol!r}")


def parse_paths(doc: dict) -> PathParameterSet:
    entries = _require(doc, "paths")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("'paths' must be a non-empty list")
    wh, wv = zip(*(_parse_weight(e, i) for i, e in enumerate(entries)))
    try:
        return PathParameterSet(
            azimuth=np.deg2rad([float(_require(e, "aoa_deg", f"paths[{i}]")) for i, e in enumerate(entries)]),
            elevation=np.deg2rad([float(_require(e, "eoa_deg", f"paths[{i}]")) for i, e in enumerate(entries)]),
            weight_h=np.array(wh),
            weight_v=np.array(wv),
            delay=np.array([float(_require(e, "delay_norm", f"paths[{i}]")) for i, e in enumerate(entries)]),
        )
    except ValueError as exc:
        raise ConfigError(f"paths: {exc}") from exc


def parse_array(doc: dict | None):
    if doc is None:
        return default_array()
    kind = doc.get("kind", "default")
    if kind == "default":
        return default_array()
    if kind == "ideal_dipoles":
        elements = []
        for i, e in enumerate(_require(doc, "elements", "array")):
            elements.append(DipoleElement(
                np.asarray(_require(e, "position", f"array.elements[{i}]"), dtype=float),
                np.asarray(_require(e, "dipole_axes", f"array.elements[{i}]"), dtype=float),
            ))
        return ArrayModel(tuple(elements))
    if kind == "pattern_grid":
        return load_pattern_grid(_require(doc, "file", "array"))
    raise ConfigError(f"array: unknown kind {kind!r}")


def parse_snr_grid(doc) -> tuple[float, ...]:
    def one(v):
        if isinstance(v, str):
            if v.lower() in ("inf", "+inf", "infinity"):
                return math.inf
            raise ConfigError(f"snr_db: cannot parse {v!r}")
        return float(v)

    if isinstance(doc, dict):
        start = float(_require(doc, "start", "snr_db"))
        stop = float(_require(doc, "stop", "snr_db"))
        step = float(_require(doc, "step", "snr_db"))
        if step <= 0:
            raise ConfigError("snr_db: step must be positive")
        n = int(round((stop - start) / step))
        return tuple(start + i * step for i in range(n + 1))
    if isinstance(doc, list):
        return tuple(one(v) for v in doc)
    return (one(doc),)


def parse_lm(doc: dict | None) -> LmOptions:
    if not doc:
        return LmOptions()
    known = {f for f in LmOptions.__dataclass_fields__}
    bad = set(doc) - known
    if bad:
        raise ConfigError(f"lm: unknown fields {sorted(bad)}")
    try:
        return LmOptions(**doc)
    except ValueError as exc:
        raise ConfigError(f"lm: {exc}") from exc


def parse_init(doc: dict | None) -> InitPolicy:
    if not doc:
        return InitPolicy()
    known = {f for f in InitPolicy.__dataclass_fields__}
    bad = set(doc) - known
    if bad:
        raise ConfigError(f"init: unknown fields {sorted(bad)}")
    try:
        return InitPolicy(**doc)
    except ValueError as exc:
        raise ConfigError(f"init: {exc}") from exc


def load_config(path) -> dict:
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return doc


def scenario_from_config(doc: dict, seed_override: int | None = None) -> ScenarioConfig:
    truth = parse_paths(doc)
    signal = doc.get("signal") or {"kind": "flat"}
    kind = _require(signal, "kind", "signal")
    trials = _require(doc, "trials")
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("'trials' must be a positive integer")
    estimators = tuple(doc.get("estimators", ("cml", "ccr")))
    seed = seed_override if seed_override is not None else int(doc.get("seed", 0))
    try:
        return ScenarioConfig(
            truth=truth,
            array=parse_array(doc.get("array")),
            samples=int(_require(doc, "samples")),
            signal_kind=kind,
            signal_duty=signal.get("duty"),
            snr_grid_db=parse_snr_grid(_require(doc, "snr_db")),
            trials=trials,
            seed=seed,
            estimators=estimators,
            init=parse_init(doc.get("init")),
            lm=parse_lm(doc.get("lm")),
            ccr_mode=doc.get("ccr_mode", "two_step"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def write_manifest(path, command: str, config_echo: dict, duration: float,
                   outputs: list[str], extra: dict | None = None) -> None:
    doc = {
        "tool": "blindchan",
        "version": __version__,
        "command": command,
        "duration_seconds": duration,
        "config": config_echo,
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    tmp = str(path) + ".tmp"
    Path(tmp).write_text(json.dumps(doc, indent=2))
    os.replace(tmp, path)


def _g9(v: float) -> str:
    return "" if (v is None or not math.isfinite(v)) else f"{v:.9g}"


def write_rmse_csv(path, result: SweepResult) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimator", "snr_db", "path", "rmse_aoa_deg", "rmse_eoa_deg",
                    "rmse_delay", "rmse_power_db", "n_success", "n_fail"])
        for rec in result.records:
            w.writerow([
                rec.estimator, _g9(rec.snr_db), rec.path,
                _g9(rec.rmse_aoa_deg), _g9(rec.rmse_eoa_deg),
                _g9(rec.rmse_delay), _g9(rec.rmse_power_db),
                rec.n_success, rec.n_fail,
            ])


_METRIC_FIELDS = {
    "aoa": ("rmse_aoa_deg", "azimuth of arrival", "RMSE (deg)", 1),
    "eoa": ("rmse_eoa_deg", "elevation of arrival", "RMSE (deg)", 1),
    "delay": ("rmse_delay", "relative delay", "RMSE (normalized)", 2),
    "power": ("rmse_power_db", "relative path power", "RMSE (dB)", 2),
}


def write_plots(out_dir: Path, result: SweepResult) -> list[str]:
    written = []
    snrs = [s for s in result.config.snr_grid_db if math.isfinite(s)]
    paths = range(1, result.config.truth.path_count + 1)
    for name, (field, title, ylabel, first_path) in _METRIC_FIELDS.items():
        series = []
        for est in result.config.estimators:
            for p in paths:
                if p < first_path:
                    continue
                ys = [getattr(result.record(est, s, p), field) for s in snrs]
                series.append(Series(
                    label=f"{est.upper()} path {p}",
                    x=list(snrs), y=ys,
                    dashed=(est == "cml"),
                    marker=p - 1,
                    color_index=p - 1,
                ))
        target = out_dir / f"rmse_{name}.svg"
        line_chart(series, f"RMSE of {title} vs SNR", "SNR (dB)", ylabel, target)
        written.append(str(target))
    return written


def cmd_sweep(config_path, out_dir, jobs: int = 1, no_plots: bool = False,
              seed_override: int | None = None) -> int:
    doc = load_config(config_path)
    config = scenario_from_config(doc, seed_override)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    result = run_sweep(config, jobs=jobs)
    duration = time.monotonic() - t0
    csv_path = out / "rmse.csv"
    write_rmse_csv(csv_path, result)
    outputs = [str(csv_path)]
    if not no_plots:
        outputs += write_plots(out, result)
    counts = {
        f"{snr:g}": {est: list(v) for est, v in per.items()}
        for snr, per in result.success_counts().items()
    }
    write_manifest(out / "manifest.json", "sweep", doc, duration, outputs,
                   extra={"success_counts": counts})
    print(f"wrote {csv_path} ({len(result.records)} records, {duration:.1f}s)")
    return 0


def cmd_synthesize(config_path, out_path, seed_override: int | None = None) -> int:
    doc = load_config(config_path)
    truth = parse_paths(doc)
    array = parse_array(doc.get("array"))
    samples = int(_require(doc, "samples"))
    grid = FrequencyGrid(samples)
    try:
        grid.check_identifiable(truth.path_count)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    signal_doc = doc.get("signal") or {"kind": "flat"}
    signal = make_signal(_require(signal_doc, "kind", "signal"), grid,
                         duty=signal_doc.get("duty"))
    snr_grid = parse_snr_grid(_require(doc, "snr_db"))
    if len(snr_grid) != 1:
        raise ConfigError("synthesize expects a single snr_db value")
    seed = seed_override if seed_override is not None else int(doc.get("seed", 0))
    t0 = time.monotonic()
    obs = synthesize(truth, array, grid, signal, snr_grid[0], seed)
    out = Path(out_path)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_observation(out, obs)
    sidecar = Path(str(out) + ".truth.json")
    write_truth_sidecar(sidecar, truth)
    write_manifest(Path(str(out) + ".manifest.json"), "synthesize", doc,
                   time.monotonic() - t0, [str(out), str(sidecar)])
    print(f"wrote {out} ({obs.port_count} ports x {obs.grid.k} bins)")
    return 0


def _estimate_report(params: PathParameterSet, cost: float, iterations: int) -> dict:
    # Gauge for reporting: reference phase is the dominant component of the
    # first path; magnitudes are relative to the first path's weight norm.
    wh, wv = params.weight_h, params.weight_v
    ref_norm = math.sqrt(abs(wh[0]) ** 2 + abs(wv[0]) ** 2)
    ref = wh[0] if abs(wh[0]) >= abs(wv[0]) else wv[0]
    ref_phase = np.angle(ref) if abs(ref) > 0 else 0.0
    paths = []
    for p in range(params.path_count):
        entry = {
            "aoa_deg": float(np.rad2deg(params.azimuth[p])),
            "eoa_deg": float(np.rad2deg(params.elevation[p])),
            "delay_norm": float(params.delay[p]),
            "power_db": normalized_power(params, p),
        }
        for name, w in (("weight_h_polar", wh[p]), ("weight_v_polar", wv[p])):
            entry[name] = {
                "mag_rel": float(abs(w) / ref_norm),
                "phase_deg": float(np.rad2deg(np.angle(w) - ref_phase)) if abs(w) > 0 else 0.0,
            }
        paths.append(entry)
    return {"paths": paths, "cost": cost, "iterations": iterations}


def cmd_estimate(observation_path, config_path, out_dir, seed_override: int | None = None) -> int:
    doc = load_config(config_path)
    obs = read_observation(observation_path)
    array = parse_array(doc.get("array"))
    if array.port_count != obs.port_count:
        raise ConfigError(
            f"array has {array.port_count} ports but observation has {obs.port_count}"
        )
    init_doc = doc.get("init") or {}
    mode = init_doc.get("mode", "coarse_grid")
    if mode == "explicit" or "paths" in doc:
        init = parse_paths(doc if "paths" in doc else init_doc)
        path_count = init.path_count
    else:
        path_count = int(_require(doc, "path_count"))
        init = None
    if obs.grid.k < 2 * path_count:
        raise ConfigError(
            f"path_count {path_count} not identifiable from {obs.grid.k} bins (need K >= 2P)"
        )
    t0 = time.monotonic()
    if init is None:
        init = coarse_grid_init(obs, array, path_count)
    lm_opts = parse_lm(doc.get("lm"))
    report = {}
    for name in tuple(doc.get("estimators", ("cml", "ccr"))):
        if name not in ("cml", "ccr"):
            raise ConfigError(f"unknown estimator {name!r}")
        fit = estimate_paths(obs, array, init, name, opts=lm_opts,
                             ccr_mode=doc.get("ccr_mode", "two_step"))
        report[name] = _estimate_report(fit.params, fit.cost, fit.lm.iterations)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "estimate.json"
    target.write_text(json.dumps(report, indent=2))
    write_manifest(out / "manifest.json", "estimate", doc, time.monotonic() - t0,
                   [str(target)])
    print(f"wrote {target}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="blindchan",
        description="Blind multipath channel parameter estimation tools",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo RMSE-vs-SNR sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=".", help="output directory")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--no-plots", action="store_true")
    p_sweep.add_argument("--seed", type=int, default=None)

    p_synth = sub.add_parser("synthesize", help="write an observation file")
    p_synth.add_argument("--config", required=True)
    p_synth.add_argument("--out", default="observation.bpob", help="output file")
    p_synth.add_argument("--seed", type=int, default=None)

    p_est = sub.add_parser("estimate", help="estimate parameters from a file")
    p_est.add_argument("observation", help="observation file (BPOB format)")
    p_est.add_argument("--config", required=True)
    p_est.add_argument("--out", default=".", help="output directory")
    p_est.add_argument("--jobs", type=int, default=1)

    args = parser.parse_args(argv)
    try:
        if args.command == "sweep":
            return cmd_sweep(args.config, args.out, jobs=args.jobs,
                             no_plots=args.no_plots, seed_override=args.seed)
        if args.command == "synthesize":
            return cmd_synthesize(args.config, args.out, seed_override=args.seed)
        return cmd_estimate(args.observation, args.config, args.out)
    except (ConfigError, ObservationFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
