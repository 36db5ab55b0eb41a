import math

import numpy as np

BATCHES = 100


def batch_means(x, batches: int = BATCHES) -> tuple[float, float]:
    """Mean of ``x`` and its standard error from non-overlapping batch means.

    The trailing ``len(x) % batches`` samples count toward the mean but not
    the error estimate.  Fewer than two samples give a zero error.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n == 0:
        return math.nan, math.nan
    mean = float(x.mean())
    b = min(batches, n)
    if b < 2:
        return mean, 0.0
    size = n // b
    means = x[: b * size].reshape(b, size).mean(axis=1)
    return mean, float(means.std(ddof=1) / math.sqrt(b))


def mean_stderr(x) -> tuple[float, float]:
    """Plain i.i.d. mean and standard error."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(x.mean()) if len(x) else math.nan, 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))
