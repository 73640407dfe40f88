""" Estimators and tests shared by the statistics tasks """
import math

import numpy as np
from einops import rearrange
from scipy import stats

from src.utils.errors import DomainError

# two-sided 95% normal quantile
Z95 = stats.norm.ppf(0.975)


def binomial_error(p, n):
    """ standard error of a proportion estimated from n draws """
    if n <= 0:
        raise DomainError("need at least one draw")
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def binomial_interval(successes, n, z=Z95):
    p = successes / n
    e = binomial_error(p, n)
    return max(p - z * e, 0.0), min(p + z * e, 1.0)


def wilson_interval(successes, n, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise DomainError("need at least one draw")
    p = successes / n
    denom = 1.0 + z**2 / n
    center = (p + z**2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def batch_means(x, batches=20):
    """Mean of a (T, C) series of C independent chains and its batch-means standard error.

    Each chain is cut into `batches` consecutive blocks (the tail that does not fill a block
    is dropped); the error is the spread of all C * batches block means. Fewer than two
    blocks give a nan error.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    T = x.shape[0]
    if T == 0:
        raise DomainError("need at least one sample")
    b = min(batches, T)
    means = rearrange(x[: b * (T // b)], "(b s) c -> (b c) s", b=b).mean(axis=1)
    if len(means) < 2:
        return float(means.mean()), math.nan
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(len(means)))


def log_odds(p, n, error=None):
    """log(p / (1 - p)) with its delta-method error.

    `error` is the standard error of p; by default the binomial error of n independent draws.
    An empty cell (p in {0, 1}) has no finite estimate; the value is returned as +-inf
    and the error as nan.
    """
    if p <= 0.0 or p >= 1.0:
        return (math.inf if p >= 1.0 else -math.inf), math.nan
    if error is None:
        error = binomial_error(p, n)
    return math.log(p / (1.0 - p)), error / (p * (1.0 - p))


def spearman_trend(xs, ys, alpha=0.05):
    """One-sided test for a decreasing trend of ys in xs.

    Returns (rho, p_value, decreasing) where p_value is for the alternative rho < 0 and
    `decreasing` means the trend is significant at level alpha.
    """
    xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    if len(xs) != len(ys) or len(xs) < 3:
        raise DomainError("a trend test needs at least three paired points")
    if np.ptp(ys) == 0:
        return 0.0, 1.0, False
    rho, p = stats.spearmanr(xs, ys, alternative="less")
    rho, p = float(rho), float(p)
    return rho, p, bool(rho < 0 and p < alpha)


def sign_symmetry(values, alpha=0.05):
    """Wilcoxon signed-rank test of symmetry about zero; (statistic, p_value, symmetric)."""
    values = np.asarray(values, dtype=np.float64)
    values = values[values != 0]
    if len(values) < 2:
        return 0.0, 1.0, True
    w, p = stats.wilcoxon(values)
    return float(w), float(p), bool(p >= alpha)


trend_fns = {
    "spearman": spearman_trend,
}

interval_fns = {
    "wilson": wilson_interval,
    "binomial": binomial_interval,
}

symmetry_fns = {
    "wilcoxon": sign_symmetry,
}
