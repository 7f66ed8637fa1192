"""
Crutch ground reaction force metrics for comparing gaits on recorded trials.
"""
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

DEFAULT_SAMPLE_TIME = 0.01


@dataclass(frozen=True)
class ForceTrace:
    """
    Force magnitudes under one crutch in N, sampled every sample_time s.
    """
    samples: np.ndarray
    sample_time: float = DEFAULT_SAMPLE_TIME

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).ravel()
        if samples.size == 0:
            raise ValueError("force trace is empty")
        if not np.all(np.isfinite(samples)):
            raise ValueError("force trace contains non-finite samples")
        if np.any(samples < 0):
            raise ValueError(f"force samples must be non-negative, found {samples.min()}")
        if not self.sample_time > 0:
            raise ValueError(f"sample_time must be positive, got {self.sample_time}")
        object.__setattr__(self, "samples", samples)


def grf_metric(left, right):
    """
    Integral of the summed left and right crutch forces, Ts * sum_k (f_l(k) + f_r(k)), in N s. The
    sum is exactly rounded.

    Args:
        left: ForceTrace
        right: ForceTrace

    Returns:
        float
    """
    if left.samples.size != right.samples.size:
        raise ValueError(f"force traces differ in length: {left.samples.size} and {right.samples.size}")
    if left.sample_time != right.sample_time:
        raise ValueError(f"force traces differ in sample time: {left.sample_time} and {right.sample_time}")
    return math.fsum(np.concatenate([left.samples, right.samples])) * left.sample_time


def peak_grf(trace):
    return float(trace.samples.max())


def reduction_percentage(baseline, proposed):
    """Percent reduction of proposed relative to baseline."""
    if not baseline > 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    return 100.0 * (baseline - proposed) / baseline


def trial_summary(values, trim=3):
    """
    Mean and sample standard deviation of trial values after dropping the trim largest and trim
    smallest.

    Returns:
        dict with mean, std and count
    """
    values = np.sort(np.asarray(values, dtype=float).ravel())
    if trim < 0:
        raise ValueError(f"trim must be non-negative, got {trim}")
    if values.size <= 2 * trim:
        raise ValueError(f"{values.size} trials are too few to drop {trim} from each end")
    kept = values[trim:values.size - trim]
    std = float(np.std(kept, ddof=1)) if kept.size > 1 else 0.0
    return {"mean": float(np.mean(kept)), "std": std, "count": int(kept.size)}


def trial_metrics(trials):
    """
    F, left peak and right peak of each (left, right) trial.

    Returns:
        pandas.DataFrame with one row per trial
    """
    rows = [{"F": grf_metric(left, right), "left_peak": peak_grf(left), "right_peak": peak_grf(right)}
            for left, right in trials]
    return pd.DataFrame(rows, columns=["F", "left_peak", "right_peak"])


def compare_gaits(baseline_trials, proposed_trials, trim=3):
    """
    Compare crutch loading of two gaits over repeated trials.

    Args:
        baseline_trials: list of (left, right) ForceTrace pairs recorded with the reference gait
        proposed_trials: list of (left, right) ForceTrace pairs recorded with the optimized gait
        trim: trials dropped from each end before averaging

    Returns:
        pandas.DataFrame indexed by metric (F, left_peak, right_peak) with the trimmed means and
        standard deviations of both gaits and the reduction of the means in percent
    """
    baseline = trial_metrics(baseline_trials)
    proposed = trial_metrics(proposed_trials)
    rows = {}
    for metric in baseline.columns:
        base = trial_summary(baseline[metric], trim)
        prop = trial_summary(proposed[metric], trim)
        rows[metric] = {"baseline_mean": base["mean"], "baseline_std": base["std"],
                        "proposed_mean": prop["mean"], "proposed_std": prop["std"],
                        "reduction_percent": reduction_percentage(base["mean"], prop["mean"])}
    return pd.DataFrame.from_dict(rows, orient="index")
