"""SNR-sweep evaluation harness for the two estimators.

Per trial one observation is synthesized and both estimators consume the
identical data and the identical starting point (paired comparison).
Estimated paths are matched to the generating ones before errors are
taken; delay and relative power are referenced to the matched first path,
so they carry no error entry for path one.  Failed fits are excluded from
the RMSE and counted separately.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from numpy.typing import NDArray

from .antenna import ArrayModel, default_array
from .ccr import IllPosedWeightsError
from .channel import (
    FrequencyGrid,
    Observation,
    PathParameterSet,
    canonicalize,
    make_signal,
    synthesize,
)
from .cml import SingularChannelError
from .estimate import (
    InitPolicy,
    coarse_grid_init,
    delay_rescan,
    estimate_paths,
    perturbed_truth_init,
)
from .lm import LmOptions, LmStallError

FArray = NDArray[np.float64]

ESTIMATORS = ("cml", "ccr")
METRICS = ("aoa_deg", "eoa_deg", "delay", "power_db")


def wrap_degrees(d):
    """Wrap angle difference(s) in degrees into [-180, 180)."""
    return (np.asarray(d, dtype=float) + 180.0) % 360.0 - 180.0


def normalized_power(params: PathParameterSet, p: int) -> float:
    """Path weight power relative to the first path, in dB (0-based index)."""
    ref = abs(params.weight_h[0]) ** 2 + abs(params.weight_v[0]) ** 2
    if ref <= 0.0:
        raise ValueError("reference path has zero weights")
    val = abs(params.weight_h[p]) ** 2 + abs(params.weight_v[p]) ** 2
    return float(10.0 * np.log10(val / ref))


def match_paths(estimate: PathParameterSet, truth: PathParameterSet) -> tuple[int, ...]:
    """Pairing of estimated paths to true paths for error evaluation.

    Returns the permutation ``perm`` with ``perm[i]`` the estimated-path
    index assigned to true path ``i``, minimizing the summed normalized
    squared mismatch of wrapped azimuth (per 180 deg), elevation (per
    90 deg) and delay.  Exhaustive over all P! permutations; ties go to
    the lexicographically smallest permutation.
    """
    p = truth.path_count
    if estimate.path_count != p:
        raise ValueError("path counts differ")
    az_e = np.rad2deg(estimate.azimuth)
    az_t = np.rad2deg(truth.azimuth)
    el_e = np.rad2deg(estimate.elevation)
    el_t = np.rad2deg(truth.elevation)
    best_perm = None
    best_cost = np.inf
    for perm in permutations(range(p)):
        idx = list(perm)
        cost = float(
            np.sum((wrap_degrees(az_e[idx] - az_t) / 180.0) ** 2)
            + np.sum(((el_e[idx] - el_t) / 90.0) ** 2)
            + np.sum((estimate.delay[idx] - truth.delay) ** 2)
        )
        if cost < best_cost:
            best_cost, best_perm = cost, perm
    return best_perm


def path_errors(estimate: PathParameterSet, truth: PathParameterSet) -> dict[str, FArray]:
    """Per-path signed errors after matching, in reporting units.

    Delay and power errors are taken relative to the path matched to the
    true reference path and are NaN for path one itself.
    """
    perm = list(match_paths(estimate, truth))
    p = truth.path_count
    aoa = wrap_degrees(np.rad2deg(estimate.azimuth[perm] - truth.azimuth))
    eoa = np.rad2deg(estimate.elevation[perm] - truth.elevation)
    d_e = estimate.delay[perm] - estimate.delay[perm[0]]
    d_t = truth.delay - truth.delay[0]
    delay = d_e - d_t
    delay[0] = np.nan
    pw_e = np.abs(estimate.weight_h[perm]) ** 2 + np.abs(estimate.weight_v[perm]) ** 2
    pw_t = np.abs(truth.weight_h) ** 2 + np.abs(truth.weight_v) ** 2
    if pw_e[0] <= 0.0 or pw_t[0] <= 0.0:
        raise ValueError("reference path has zero weights")
    power = 10.0 * np.log10(pw_e / pw_e[0]) - 10.0 * np.log10(pw_t / pw_t[0])
    power[0] = np.nan
    return {"aoa_deg": aoa, "eoa_deg": eoa, "delay": delay, "power_db": power}


@dataclass(frozen=True)
class ScenarioConfig:
    truth: PathParameterSet
    array: ArrayModel = field(default_factory=default_array)
    samples: int = 128
    signal_kind: str = "flat"
    signal_duty: float | None = None
    snr_grid_db: tuple[float, ...] = tuple(range(0, 21, 2))
    trials: int = 100
    seed: int = 2024
    estimators: tuple[str, ...] = ESTIMATORS
    init: InitPolicy = InitPolicy()
    lm: LmOptions = LmOptions()
    ccr_mode: str = "two_step"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_grid_db:
            raise ValueError("SNR grid must not be empty")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if not self.estimators:
            raise ValueError("need at least one estimator")
        FrequencyGrid(self.samples).check_identifiable(self.truth.path_count)

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.samples)


def table1_truth() -> PathParameterSet:
    """Three-path reference scenario (angles in the scripts' degree values)."""
    return PathParameterSet(
        azimuth=np.deg2rad([30.0, 150.0, -45.0]),
        elevation=np.deg2rad([35.0, 50.0, 75.0]),
        weight_h=np.array([1.0, 10.0 ** (-2.0 / 20.0), 0.0], dtype=complex),
        weight_v=np.array([0.0, 0.0, 10.0 ** (-3.0 / 20.0)], dtype=complex),
        delay=np.array([1.0 / 9.0, 2.0 / 9.0, 4.0 / 9.0]),
    )


def table1_scenario(**overrides) -> ScenarioConfig:
    return ScenarioConfig(truth=table1_truth(), **overrides)


@dataclass(frozen=True)
class TrialRecord:
    estimator: str
    snr_db: float
    trial_index: int
    success: bool
    errors: dict[str, FArray] | None
    cost: float
    iterations: int
    detail: str  # termination reason or failure message


def _snr_entropy(snr_db: float) -> int:
    if math.isinf(snr_db):
        return 2**32 - 1
    return int(round(snr_db * 1000.0)) + 2**31


def trial_observation(config: ScenarioConfig, snr_db: float, trial_index: int) -> Observation:
    """The observation a given (snr, trial) cell sees; shared by estimators."""
    truth = canonicalize(config.truth)
    seq = np.random.SeedSequence([config.seed, _snr_entropy(snr_db), trial_index, 0])
    noise_seed = int(seq.generate_state(1, dtype=np.uint64)[0])
    signal = make_signal(config.signal_kind, config.grid, duty=config.signal_duty)
    return synthesize(truth, config.array, config.grid, signal, snr_db, noise_seed)


def run_trial(config: ScenarioConfig, snr_db: float, trial_index: int) -> list[TrialRecord]:
    """Synthesize once, fit every configured estimator, score the errors."""
    truth = canonicalize(config.truth)
    obs = trial_observation(config, snr_db, trial_index)
    init_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, _snr_entropy(snr_db), trial_index, 1])
    )
    if config.init.mode == "perturbed_truth":
        init = perturbed_truth_init(truth, init_rng, config.init)
    else:
        init = coarse_grid_init(obs, config.array, truth.path_count)
    # One shared starting point for every estimator (paired comparison),
    # including the delay-cell scan.
    init = delay_rescan(obs, config.array, init)

    records = []
    for name in config.estimators:
        try:
            fit = estimate_paths(obs, config.array, init, name, opts=config.lm,
                                 ccr_mode=config.ccr_mode, prescan=False)
            records.append(TrialRecord(
                estimator=name, snr_db=snr_db, trial_index=trial_index, success=True,
                errors=path_errors(fit.params, truth), cost=fit.cost,
                iterations=fit.lm.iterations, detail=fit.lm.reason,
            ))
        except (LmStallError, SingularChannelError, IllPosedWeightsError) as exc:
            records.append(TrialRecord(
                estimator=name, snr_db=snr_db, trial_index=trial_index, success=False,
                errors=None, cost=np.nan, iterations=0,
                detail=f"{type(exc).__name__}: {exc}",
            ))
    return records


@dataclass(frozen=True)
class SweepRecord:
    estimator: str
    snr_db: float
    path: int  # 1-based, mirroring the reporting convention
    rmse_aoa_deg: float
    rmse_eoa_deg: float
    rmse_delay: float
    rmse_power_db: float
    se_aoa_deg: float
    se_eoa_deg: float
    se_delay: float
    se_power_db: float
    n_success: int
    n_fail: int


def _rmse_and_se(sq: FArray) -> tuple[float, float]:
    """RMSE and its sampling standard error from squared errors (no NaNs)."""
    n = sq.size
    if n == 0:
        return math.nan, math.nan
    mean_sq = float(np.mean(sq))
    rmse = math.sqrt(mean_sq)
    if n < 2 or rmse == 0.0:
        return rmse, 0.0
    se_mean = float(np.std(sq, ddof=1)) / math.sqrt(n)
    return rmse, se_mean / (2.0 * rmse)


def aggregate(trials: list[TrialRecord], estimators, snr_grid_db, path_count: int) -> list[SweepRecord]:
    """Reduce per-trial errors to per-(estimator, SNR, path) RMSE records."""
    out = []
    for name in estimators:
        for snr in snr_grid_db:
            cell = [t for t in trials if t.estimator == name and t.snr_db == snr]
            good = [t for t in cell if t.success]
            n_fail = len(cell) - len(good)
            for p in range(path_count):
                stats = {}
                for metric in METRICS:
                    if good:
                        vals = np.array([t.errors[metric][p] for t in good])
                        vals = vals[~np.isnan(vals)]
                    else:
                        vals = np.array([])
                    stats[metric] = _rmse_and_se(vals**2)
                out.append(SweepRecord(
                    estimator=name, snr_db=snr, path=p + 1,
                    rmse_aoa_deg=stats["aoa_deg"][0], rmse_eoa_deg=stats["eoa_deg"][0],
                    rmse_delay=stats["delay"][0], rmse_power_db=stats["power_db"][0],
                    se_aoa_deg=stats["aoa_deg"][1], se_eoa_deg=stats["eoa_deg"][1],
                    se_delay=stats["delay"][1], se_power_db=stats["power_db"][1],
                    n_success=len(good), n_fail=n_fail,
                ))
    return out


@dataclass(frozen=True)
class SweepResult:
    config: ScenarioConfig
    records: list[SweepRecord]
    trials: list[TrialRecord]

    def record(self, estimator: str, snr_db: float, path: int) -> SweepRecord:
        for r in self.records:
            if r.estimator == estimator and r.snr_db == snr_db and r.path == path:
                return r
        raise KeyError((estimator, snr_db, path))

    def success_counts(self) -> dict[float, dict[str, tuple[int, int]]]:
        """Per SNR and estimator: (successes, failures)."""
        out: dict[float, dict[str, tuple[int, int]]] = {}
        for snr in self.config.snr_grid_db:
            out[snr] = {}
            for name in self.config.estimators:
                rec = self.record(name, snr, 1)
                out[snr][name] = (rec.n_success, rec.n_fail)
        return out


def _run_trial_star(args) -> list[TrialRecord]:
    return run_trial(*args)


def run_sweep(config: ScenarioConfig, jobs: int = 1) -> SweepResult:
    """Run every (SNR, trial) cell and aggregate RMSEs.

    Trials are independent; with ``jobs > 1`` they run in worker processes.
    Aggregation consumes results in (SNR, trial, estimator) order either
    way, so the output is identical for any job count.
    """
    tasks = [(config, snr, t) for snr in config.snr_grid_db for t in range(config.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            nested = list(pool.map(_run_trial_star, tasks, chunksize=4))
    else:
        nested = [run_trial(*t) for t in tasks]
    trials = [rec for group in nested for rec in group]
    records = aggregate(trials, config.estimators, config.snr_grid_db,
                        config.truth.path_count)
    return SweepResult(config=config, records=records, trials=trials)
