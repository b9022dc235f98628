"""Result persistence: delimited output plus rendered figures.

Every run directory gets a config snapshot, per-trial and aggregate CSVs,
the SI objective traces, and PNG figures rendered next to the delimited
files (SI convergence, range-Doppler map, angle pseudospectrum).
"""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

TRIAL_FIELDS = [
    "trial_index", "seed", "dl_se_sum", "ul_se_sum", "dl_su_bound", "kappa_mean",
    "si_initial_db", "si_final_db", "si_drop_db", "bcd_accepted",
    "angle_true", "angle_initial", "angle_refined", "angle_error_deg",
    "range_true", "range_est", "range_error", "range_bin",
    "velocity_true", "velocity_est", "velocity_error", "velocity_bin",
    "peak_ratio", "masked_count",
]


def write_config_snapshot(cfg, out_dir):
    cfg.save(Path(out_dir) / "config.json")


def write_trials_csv(results, path):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=TRIAL_FIELDS)
        writer.writeheader()
        for r in results:
            writer.writerow({k: getattr(r, k) for k in TRIAL_FIELDS})


def write_aggregate_csv(results, path):
    rows = {
        "trials": len(results),
        "dl_se_sum_mean": np.mean([r.dl_se_sum for r in results]),
        "ul_se_sum_mean": np.mean([r.ul_se_sum for r in results]),
        "dl_su_bound_mean": np.mean([r.dl_su_bound for r in results]),
        "si_drop_db_mean": np.mean([r.si_drop_db for r in results]),
        "angle_error_deg_median": np.median([r.angle_error_deg for r in results]),
        "range_error_median": np.median([r.range_error for r in results]),
        "velocity_error_median": np.median([r.velocity_error for r in results]),
        "peak_ratio_median": np.median([r.peak_ratio for r in results]),
    }
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "value"])
        for k, v in rows.items():
            writer.writerow([k, v])


def write_si_trace_csv(trace, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "objective", "residual_si_to_noise_db", "accepted"])
        for row in trace:
            writer.writerow([row["iteration"], row["objective"],
                             row["si_to_noise_db"], int(row["accepted"])])


def write_range_doppler_csv(rd_map, path):
    """|Z| in dB with a metadata header (bin sizes, peak location)."""
    mag = np.abs(rd_map.image)
    floor = mag[mag > 0].min() if np.any(mag > 0) else 1.0
    db = 20.0 * np.log10(np.maximum(mag, floor * 1e-3))
    with open(path, "w", newline="") as f:
        f.write(f"# range_bin_m,{rd_map.range_bin}\n")
        f.write(f"# velocity_bin_mps,{rd_map.velocity_bin}\n")
        f.write(f"# peak_delay_bin,{rd_map.peak[0]}\n")
        f.write(f"# peak_doppler_bin,{rd_map.peak[1]}\n")
        writer = csv.writer(f)
        for row in db:
            writer.writerow([f"{v:.3f}" for v in row])


def write_pseudospectrum_csv(estimate, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["angle_deg", "power_db"])
        ref = estimate.pseudospectrum.max()
        for ang, val in zip(estimate.grid, estimate.pseudospectrum):
            writer.writerow([f"{np.rad2deg(ang):.4f}",
                             f"{10 * np.log10(max(val / ref, 1e-30)):.3f}"])


def render_si_trace(traces, path, labels=None):
    """Residual SI-to-noise vs iteration, one line per trace."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for idx, trace in enumerate(traces):
        its = [r["iteration"] for r in trace]
        db = [r["si_to_noise_db"] for r in trace]
        label = labels[idx] if labels else f"trial {idx}"
        ax.plot(its, db, lw=1.2, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual SI-to-noise ratio [dB]")
    ax.grid(alpha=0.3)
    if labels or len(traces) <= 8:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_range_doppler(rd_map, path, range_true=None, velocity_true=None):
    mag = np.abs(rd_map.image)
    floor = mag[mag > 0].min() if np.any(mag > 0) else 1.0
    db = 20.0 * np.log10(np.maximum(mag, floor * 1e-3))
    db -= db.max()
    n0, n1 = db.shape
    ranges = np.arange(n0) * rd_map.range_bin
    # axis in physical velocity: recovery bins halve under two-way Doppler
    vels = np.arange(n1) * rd_map.velocity_bin / 2.0
    fig, ax = plt.subplots(figsize=(7, 5))
    extent = [vels[0], vels[-1], ranges[0], ranges[-1]]
    im = ax.imshow(db, origin="lower", aspect="auto", extent=extent,
                   vmin=-40, vmax=0, cmap="viridis")
    ax.set_xlabel("velocity [m/s]")
    ax.set_ylabel("range [m]")
    if range_true is not None and velocity_true is not None:
        ax.plot(velocity_true, range_true, "rx", ms=10, mew=2, label="truth")
        ax.legend(loc="upper right")
    ax.set_ylim(0, min(ranges[-1], 120.0))
    fig.colorbar(im, ax=ax, label="magnitude [dB]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_pseudospectrum(estimate, path, angle_true=None):
    fig, ax = plt.subplots(figsize=(7, 4))
    ref = estimate.pseudospectrum.max()
    ax.plot(np.rad2deg(estimate.grid),
            10 * np.log10(np.maximum(estimate.pseudospectrum / ref, 1e-30)), lw=1.2)
    if angle_true is not None:
        ax.axvline(np.rad2deg(angle_true), color="r", ls="--", lw=1, label="truth")
        ax.legend()
    ax.axvline(np.rad2deg(estimate.refined_angle), color="k", ls=":", lw=1)
    ax.set_xlabel("angle [deg]")
    ax.set_ylabel("pseudospectrum [dB]")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_metric_vs_axis(rows, axis_name, metric, path):
    """Sweep figure: mean +- std of a metric against the swept axis."""
    values = [v for v, _ in rows]
    means = [np.mean([getattr(r, metric) for r in results]) for _, results in rows]
    stds = [np.std([getattr(r, metric) for r in results]) for _, results in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.errorbar(values, means, yerr=stds, marker="o", capsize=3)
    ax.set_xlabel(axis_name)
    ax.set_ylabel(metric)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_sweep_csv(rows, axis_name, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([axis_name, "trial"] + TRIAL_FIELDS[2:])
        for value, results in rows:
            for r in results:
                writer.writerow([value, r.trial_index]
                                + [getattr(r, k) for k in TRIAL_FIELDS[2:]])
