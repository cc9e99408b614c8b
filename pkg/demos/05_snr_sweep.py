"""Desk-scale Monte-Carlo comparison of the two estimators over SNR.

Runs a reduced sweep (3 SNR points, 20 trials) of the three-path
scenario, prints the RMSE table and writes rmse.csv plus SVG charts into
demo_output/.  The full experiment is the CLI's job:

    blindchan sweep --config docs/table1_scenario.json --out results --jobs 2

Run:  python3 demos/05_snr_sweep.py
"""

import math
from pathlib import Path

from blindchan import run_sweep, table1_scenario
from blindchan.cli import write_plots, write_rmse_csv

config = table1_scenario(snr_grid_db=(0.0, 10.0, 20.0), trials=20, seed=1)
print(f"sweep: {len(config.snr_grid_db)} SNR points x {config.trials} trials, "
      f"estimators {config.estimators} ...")
result = run_sweep(config, jobs=2)

print(f"\n{'est':>4} {'snr':>5} {'path':>4} {'aoa_deg':>8} {'eoa_deg':>8} "
      f"{'delay':>8} {'power_db':>8} {'ok':>3} {'fail':>4}")
for rec in result.records:
    delay = f"{rec.rmse_delay:8.5f}" if not math.isnan(rec.rmse_delay) else "     ref"
    power = f"{rec.rmse_power_db:8.3f}" if not math.isnan(rec.rmse_power_db) else "     ref"
    print(f"{rec.estimator:>4} {rec.snr_db:5.0f} {rec.path:>4} "
          f"{rec.rmse_aoa_deg:8.3f} {rec.rmse_eoa_deg:8.3f} {delay} {power} "
          f"{rec.n_success:>3} {rec.n_fail:>4}")

out = Path(__file__).resolve().parent / "demo_output"
out.mkdir(exist_ok=True)
write_rmse_csv(out / "rmse.csv", result)
written = write_plots(out, result)
print(f"\nwrote {out / 'rmse.csv'}")
for path in written:
    print(f"wrote {path}")
