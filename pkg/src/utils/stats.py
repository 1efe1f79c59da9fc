import numpy as np
from scipy.stats import norm

CI_METHOD = 'wilson-95 (n = effective sample size)'


def wilson_interval(p, n, level=0.95):
    """
    Wilson score interval for a proportion observed on n (effective) samples
    """
    if n <= 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + level / 2.0)
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def effective_sample_size(weights):
    """
    Kish effective sample size (sum w)^2 / sum w^2
    """
    weights = np.asarray(weights, dtype=float)
    if weights.size == 0:
        return 0.0
    total = weights.sum()
    squares = np.dot(weights, weights)
    if squares == 0.0:
        return 0.0
    return float(total * total / squares)


def normalized_weights(log_weights):
    """
    Self-normalized weights from log-weights, stable for very negative logs
    """
    log_weights = np.asarray(log_weights, dtype=float)
    if log_weights.size == 0:
        return log_weights
    shifted = np.exp(log_weights - log_weights.max())
    return shifted / shifted.sum()


def weighted_frequency(mask, weights):
    """
    Self-normalized weighted frequency of a boolean event
    """
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total == 0.0:
        return 0.0
    return float(np.dot(weights, np.asarray(mask, dtype=float)) / total)


def non_increasing(estimates, lows, highs):
    """
    True if every step either goes down or has overlapping intervals
    """
    for k in range(len(estimates) - 1):
        if estimates[k + 1] > estimates[k] and lows[k + 1] > highs[k]:
            return False
    return True


def strictly_decreasing(lows, highs):
    """
    True if each interval lies entirely below the previous one
    """
    return all(highs[k + 1] < lows[k] for k in range(len(lows) - 1))
