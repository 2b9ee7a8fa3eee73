import logging

import numpy as np


def trimmed_mean(values, trim=2):
    """
    Mean after dropping the `trim` smallest and largest values.

    Falls back to the plain mean, with a warning, when fewer than 2*trim+1 values are given.
    """
    values = np.sort(np.asarray(values, dtype=np.float64))
    if len(values) == 0:
        return float("nan")
    if len(values) < 2 * trim + 1:
        logging.warning(f"Only {len(values)} runs; trimmed mean falls back to the plain mean")
        return float(values.mean())
    return float(values[trim:len(values) - trim].mean())


def aggregate_runs(test_scores, valid_scores=None, trim=2, top=3):
    """
    Summarize the test scores of several seeded runs.

    Args:
        test_scores (sequence): Mean test wait of each run.
        valid_scores (sequence): Validation score of each run, used to pick the best runs.
        trim (int): Values dropped on each side for the trimmed mean.
        top (int): Number of runs with the lowest validation score to average.

    Returns:
        dict: runs, mean, trimmed_mean and mean_top3_by_valid.
    """
    test = np.asarray(test_scores, dtype=np.float64)
    summary = {
        "runs": int(len(test)),
        "mean": float(test.mean()) if len(test) else float("nan"),
        "trimmed_mean": trimmed_mean(test, trim),
        "mean_top3_by_valid": float("nan"),
    }
    if valid_scores is not None and len(test):
        valid = np.asarray(valid_scores, dtype=np.float64)
        best = np.argsort(valid, kind="stable")[:top]
        summary["mean_top3_by_valid"] = float(test[best].mean())
    return summary
