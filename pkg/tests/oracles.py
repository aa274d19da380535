"""Slow, obviously-correct reference implementations used as test oracles.

None of these share code with the package.
"""

import math

import numpy as np


def direct_convolution(x, h):
    """O(n*m) full linear convolution by the textbook double sum."""
    n, m = len(x), len(h)
    y = [0.0] * (n + m - 1)
    for i in range(n):
        for j in range(m):
            y[i + j] += float(x[i]) * float(h[j])
    return y


def brute_force_eer(spoof, bona):
    """Exhaustive threshold sweep with per-threshold counting loops.

    Same estimator definition as the package: thresholds at every distinct
    score plus +inf, FAR = #bona >= t / nb, FRR = #spoof < t / ns, first
    point with FAR <= FRR, linear interpolation from the previous point.
    """
    spoof = np.asarray(spoof, dtype=float)
    bona = np.asarray(bona, dtype=float)
    thresholds = sorted(set(spoof.tolist()) | set(bona.tolist())) + [math.inf]
    pts = []
    for t in thresholds:
        # count afresh at every threshold; no sorting or cumulative tricks
        fa = int(np.count_nonzero(bona >= t))
        fr = int(np.count_nonzero(spoof < t))
        pts.append((fa / len(bona), fr / len(spoof), fa * len(spoof) - fr * len(bona)))
    for i, (far, frr, d) in enumerate(pts):
        if d == 0:
            return far
        if d < 0:
            far0, frr0, d0 = pts[i - 1]
            a = d0 / (d0 - d)
            return far0 + a * (far - far0)
    raise AssertionError("sweep never crossed")


def pearson_definition(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def mel(f):
    return 2595.0 * math.log10(1.0 + f / 700.0)


def inverse_mel(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def triangle_band_for(freq, n_bands, fmax):
    """Index of the mel triangle with the largest response at ``freq``."""
    top = mel(fmax)
    edges = [inverse_mel(top * k / (n_bands + 1)) for k in range(n_bands + 2)]
    best, best_w = None, -1.0
    for k in range(n_bands):
        lo, mid, hi = edges[k], edges[k + 1], edges[k + 2]
        if lo <= freq <= mid:
            w = (freq - lo) / (mid - lo)
        elif mid < freq <= hi:
            w = (hi - freq) / (hi - mid)
        else:
            w = 0.0
        if w > best_w:
            best, best_w = k, w
    return best
