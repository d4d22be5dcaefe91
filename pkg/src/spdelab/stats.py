"""Small statistics helpers for Monte Carlo tables."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.stats import binomtest, chi2


def mean_stderr(x, axis=0):
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    m = x.mean(axis=axis)
    se = x.std(axis=axis, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(m)
    return m, se


def wilson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def zero_event_bound(n: int, level: float = 0.95) -> float:
    """One-sided upper confidence bound on a rate after ``n`` failures."""
    return 1.0 - (1.0 - level) ** (1.0 / n) if n else 1.0


def tail_table(eps, counts, n: int) -> list[dict]:
    """Rows ``(eps, count, rate, stderr, wilson_low, wilson_high, upper95)``."""
    rows = []
    for e, k in zip(eps, counts):
        p = k / n if n else float("nan")
        lo, hi = wilson(k, n)
        rows.append({
            "eps": float(e),
            "count": int(k),
            "n": int(n),
            "rate": float(p),
            "stderr": float(np.sqrt(p * (1 - p) / n)) if n else float("nan"),
            "wilson_low": lo,
            "wilson_high": hi,
            "upper95": zero_event_bound(n) if k == 0 else hi,
        })
    return rows


def loglog_slope(eps, counts, n) -> dict:
    """Slope of ``log rate`` against ``log eps``.

    ``n`` is the sample count, either shared or one per cell (for rates
    conditioned on an event whose frequency depends on ``eps``). With at
    least two cells holding events the slope is a least-squares fit over
    those cells. Otherwise a conservative lower bound is formed from the
    largest-``eps`` cell and the one-sided 95% bound of the smallest empty
    cell. ``method`` records which route was taken.
    """
    eps = np.asarray(eps, dtype=float)
    counts = np.asarray(counts)
    n = np.broadcast_to(np.asarray(n, dtype=float), eps.shape)
    order = np.argsort(eps)
    eps, counts, n = eps[order], counts[order], n[order]
    hit = counts > 0
    if hit.sum() >= 2:
        x, y = np.log(eps[hit]), np.log(counts[hit] / n[hit])
        slope = float(np.polyfit(x, y, 1)[0])
        return {"slope": slope, "method": "fit", "cells": int(hit.sum())}
    if hit.sum() == 1 and not hit[0]:
        i = int(np.flatnonzero(hit)[0])
        p_hi = counts[i] / n[i]
        ub = zero_event_bound(int(n[0]))
        slope = float(np.log(p_hi / ub) / np.log(eps[i] / eps[0]))
        return {"slope": max(slope, 0.0), "method": "bound", "cells": 1}
    return {"slope": float("nan"), "method": "none", "cells": int(hit.sum())}


def power_law_mle(eps, counts, n, b_max: float = 60.0, level: float = 0.95) -> dict:
    """Maximum-likelihood exponent ``b`` of ``rate = a eps^b`` from event counts.

    Counts are treated as Poisson with mean ``n_i a eps_i^b`` (accurate for
    small rates); ``a`` is profiled out, so empty cells contribute through
    the denominator. The exponent is searched on ``[-b_max, b_max]``; an
    optimum at the upper end is reported as ``inf`` (events confined to the
    largest ``eps`` are consistent with arbitrarily fast decay). ``lower`` is
    the profile-likelihood lower confidence bound at ``level``.
    """
    eps = np.asarray(eps, dtype=float)
    counts = np.asarray(counts, dtype=float)
    n = np.broadcast_to(np.asarray(n, dtype=float), eps.shape)
    keep = n > 0
    eps, counts, n = eps[keep], counts[keep], n[keep]
    K = counts.sum()
    if K == 0 or eps.size < 2:
        return {"slope": float("nan"), "lower": float("nan"), "events": int(K)}
    x = np.log(eps / eps.max())

    def profile(b):
        return float(b * np.dot(counts, x) - K * np.log(np.dot(n, np.exp(b * x))))

    res = minimize_scalar(lambda b: -profile(b), bounds=(-b_max, b_max), method="bounded")
    b_hat, top = float(res.x), -float(res.fun)
    cut = 0.5 * chi2.ppf(level, 1)
    at_edge = profile(b_max) >= top - 1e-9
    if at_edge:
        b_hat, top = float("inf"), max(top, profile(b_max))
    lo_end = -b_max
    if top - profile(lo_end) <= cut:
        lower = -b_max
    else:
        upper_pt = b_max if at_edge else b_hat
        lower = float(brentq(lambda b: top - profile(b) - cut, lo_end, upper_pt))
    return {"slope": b_hat, "lower": lower, "events": int(K)}
