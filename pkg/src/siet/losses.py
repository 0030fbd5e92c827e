"""Energy/information delivery losses between tradeoff curves, and Monte
Carlo sweeps measuring how those losses decay with the number of samples."""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .capacity import CapacityCurve, capacity_energy_curve
from .channel import ChannelModel
from .grid import POINT, BVBudget, GridFunction, rng_from, total_variation
from .reconstruct import ReconstructionConfig, reconstruct


def energy_loss(true_curve: CapacityCurve, recon_curve: CapacityCurve, R: float) -> float:
    """|B(R) under the true curve - B(R) under the reconstructed curve|."""
    cap_lim = min(true_curve.c_max_bits, recon_curve.c_max_bits)
    if R > cap_lim + 1e-9:
        raise ValueError("rate probe exceeds a curve's unconstrained capacity")
    return abs(true_curve.energy_at(R) - recon_curve.energy_at(R))


def info_loss(true_curve: CapacityCurve, recon_curve: CapacityCurve, B: float) -> float:
    """|C(B) difference|; curves evaluate to zero beyond their own b_max."""
    if B < 0:
        raise ValueError("energy probe must be nonnegative")
    return abs(true_curve.capacity_at(B) - recon_curve.capacity_at(B))


def fit_decay(xs, ys) -> tuple[float, float]:
    """Least-squares slope of log2(ys) on log2(xs) and its R^2.

    Nonpositive ys are excluded with a warning; fewer than three surviving
    points is an error.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys):
        raise ValueError("xs and ys must have equal length")
    ok = ys > 0
    if not np.all(ok):
        warnings.warn(f"excluding {int(np.sum(~ok))} nonpositive loss values from the fit")
    xs, ys = xs[ok], ys[ok]
    if len(xs) < 3:
        raise ValueError("need at least three positive points to fit a decay rate")
    res = linregress(np.log2(xs), np.log2(ys))
    return float(res.slope), float(res.rvalue ** 2)


@dataclass(frozen=True)
class LossReport:
    """Per-m loss statistics from a Monte Carlo sweep plus fitted decay rates."""

    m_values: tuple
    trials: int
    energy_loss_mean: tuple
    energy_loss_ci95: tuple
    info_loss_mean: tuple
    info_loss_ci95: tuple
    fitted_slope_energy: float
    fitted_slope_info: float
    fit_r2_energy: float
    fit_r2_info: float
    config_digest: str
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        ms = tuple(int(m) for m in self.m_values)
        object.__setattr__(self, "m_values", ms)
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ValueError("m values must be strictly increasing")
        for name in ("energy_loss_mean", "info_loss_mean"):
            if any(v < -1e-6 for v in getattr(self, name)):
                raise ValueError(f"{name} contains negative losses")
        for name in ("energy_loss_ci95", "info_loss_ci95"):
            if any(v < 0 for v in getattr(self, name)):
                raise ValueError(f"{name} contains negative halfwidths")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# config_digest={self.config_digest}\n")
            w = csv.writer(fh)
            w.writerow(["m", "trials", "energy_loss_mean", "energy_loss_ci95",
                        "info_loss_mean", "info_loss_ci95"])
            for i, m in enumerate(self.m_values):
                w.writerow([m, self.trials,
                            repr(self.energy_loss_mean[i]), repr(self.energy_loss_ci95[i]),
                            repr(self.info_loss_mean[i]), repr(self.info_loss_ci95[i])])

    def summary(self) -> dict:
        return {
            "fitted_slope_energy": self.fitted_slope_energy,
            "fitted_slope_info": self.fitted_slope_info,
            "fit_r2_energy": self.fit_r2_energy,
            "fit_r2_info": self.fit_r2_info,
            "m_values": list(self.m_values),
            "trials": self.trials,
            "config_digest": self.config_digest,
            **self.extra,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def config_digest(params: dict) -> str:
    """Stable hash of experiment parameters (canonical JSON, sha256 prefix)."""
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _mean_ci95(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, 0.0
    half = 1.96 * float(np.std(values, ddof=1)) / np.sqrt(len(values))
    return mean, half


def loss_sweep(truth: GridFunction, ch: ChannelModel, cfg: ReconstructionConfig,
               m_values, trials: int, r_list, b_list, seed: int = 0,
               true_curve: CapacityCurve | None = None,
               curve_kwargs: dict | None = None) -> LossReport:
    """Monte Carlo sweep of curve-level losses against the sample count.

    For each m and trial: sample the truth (noise std taken from cfg.sigma),
    reconstruct per cfg, build the reconstruction's tradeoff curve, and record
    the energy loss at each rate in r_list and the information loss at each
    energy in b_list. Per-(m, trial) losses are the means over the respective
    probe grids; per-m statistics aggregate over trials with normal 95% CIs.
    Per-trial seeds derive deterministically from (seed, m, trial).
    """
    m_values = [int(m) for m in m_values]
    sigma = cfg.sigma if cfg.sigma is not None else 0.0
    if trials < 1:
        raise ValueError("need at least one trial")
    if sigma == 0.0 and trials != 1:
        raise ValueError("noiseless sweeps are deterministic; use trials=1")
    for m in m_values:
        if cfg.method != "cubic-spline" and not (m >= 2 and (m & (m - 1)) == 0):
            raise ValueError("sample counts must be powers of two")
    ck = dict(curve_kwargs or {})
    if true_curve is None:
        true_curve = capacity_energy_curve(ch, truth, **ck)
    r_list = [float(r) for r in r_list]
    b_list = [float(b) for b in b_list]

    e_mean, e_ci, i_mean, i_ci = [], [], [], []
    for m in m_values:
        e_vals = np.empty(trials)
        i_vals = np.empty(trials)
        for t in range(trials):
            # per-trial stream derived from (seed, m, trial) for reproducibility
            s = _sample_with_stream(truth, m, sigma, seed, m, t)
            recon = reconstruct(s, cfg)
            recon_curve = capacity_energy_curve(ch, recon, warm_curve=true_curve, **ck)
            e_vals[t] = np.mean([energy_loss(true_curve, recon_curve, r) for r in r_list]) \
                if r_list else 0.0
            i_vals[t] = np.mean([info_loss(true_curve, recon_curve, b) for b in b_list]) \
                if b_list else 0.0
        for acc_mean, acc_ci, vals in ((e_mean, e_ci, e_vals), (i_mean, i_ci, i_vals)):
            mean, half = _mean_ci95(vals)
            acc_mean.append(mean)
            acc_ci.append(half)

    slope_e, r2_e = _safe_fit(m_values, e_mean)
    slope_i, r2_i = _safe_fit(m_values, i_mean)
    digest = config_digest({
        "method": cfg.method, "sigma": sigma, "m_values": m_values,
        "trials": trials, "r_list": r_list, "b_list": b_list, "seed": seed,
        "n_x": ch.n_x, "n_y": ch.n_y,
    })
    return LossReport(tuple(m_values), trials,
                      tuple(e_mean), tuple(e_ci), tuple(i_mean), tuple(i_ci),
                      slope_e, slope_i, r2_e, r2_i, digest)


def _sample_with_stream(truth, m, sigma, seed, *context):
    from .grid import SampleSet

    locs = np.linspace(0.0, 1.0, m)
    vals = truth(locs)
    if sigma > 0:
        vals = vals + sigma * rng_from(seed, *context).standard_normal(m)
    return SampleSet(locs, vals, noise_sigma=float(sigma))


def _safe_fit(ms, ys) -> tuple[float, float]:
    try:
        return fit_decay(ms, ys)
    except ValueError:
        return float("nan"), float("nan")


def bumpy_adversary(beta: GridFunction, m: int, budget: BVBudget,
                    n_out: int | None = None) -> GridFunction:
    """An indistinguishable rival: agrees with beta at all m sample points but
    dips below it by a small triangular bump centered in every inter-sample gap.

    Bump depth is min(K - TV(beta), 1)/(4m); the added variation 2*depth per
    gap keeps the rival inside the variation budget.
    """
    if m < 2 or (m & (m - 1)) != 0:
        raise ValueError("m must be a power of two >= 2")
    slack = budget.K - total_variation(beta)
    if slack <= 0:
        raise ValueError("no variation slack left for the adversary")
    depth = min(slack, 1.0) / (4.0 * m)
    n = n_out or len(beta.values)
    x = np.linspace(0.0, 1.0, n)
    locs = np.linspace(0.0, 1.0, m)
    gap = np.clip(np.searchsorted(locs, x, side="right") - 1, 0, m - 2)
    left = locs[gap]
    frac = np.clip((x - left) * (m - 1), 0.0, 1.0)
    tent = 1.0 - np.abs(2.0 * frac - 1.0)  # 0 at samples, 1 mid-gap
    return GridFunction(beta(x) - depth * tent, POINT)
