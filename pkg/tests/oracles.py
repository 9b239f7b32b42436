"""Independent reference implementations used as test oracles.

Written with plain loops and no shared code with the package, so a bug in
the vectorised pipeline cannot hide in both places.
"""

import math

import numpy as np


def brute_bin_means(values, dx, dy, bin_size):
    """Bin means by explicit membership tests on cell-centre coordinates."""
    ny, nx = values.shape
    # cell centres measured from the lower-left corner of the grid
    cx = [(i + 0.5) * dx for i in range(nx)]
    cy = [(j + 0.5) * dy for j in range(ny)]
    nbx = int(math.floor(cx[-1] / bin_size + 1e-9)) + 1
    nby = int(math.floor(cy[-1] / bin_size + 1e-9)) + 1
    sums = [[0.0] * nbx for _ in range(nby)]
    counts = [[0] * nbx for _ in range(nby)]
    for j in range(ny):
        for i in range(nx):
            bi = int(math.floor(cx[i] / bin_size + 1e-9))
            bj = int(math.floor(cy[j] / bin_size + 1e-9))
            sums[bj][bi] += float(values[j, i])
            counts[bj][bi] += 1
    return np.array([[sums[j][i] / counts[j][i] for i in range(nbx)] for j in range(nby)])


def brute_entropy(values, r, floor=1e-12):
    """Normalise to [0, 1], then Shannon entropy in bits of every r x r window."""
    lo, hi = float(np.min(values)), float(np.max(values))
    ny, nx = values.shape
    norm = [[(float(values[j, i]) - lo) / (hi - lo) for i in range(nx)] for j in range(ny)]
    out = np.empty((ny - r + 1, nx - r + 1))
    for j in range(ny - r + 1):
        for i in range(nx - r + 1):
            cells = [max(norm[j + b][i + a], floor) for b in range(r) for a in range(r)]
            total = math.fsum(cells)
            h = 0.0
            for m in cells:
                p = m / total
                h -= p * math.log2(p)
            out[j, i] = h
    return out


def brute_covariance(states, weights):
    """Weighted mean and covariance by direct summation, heading circular."""
    n = len(weights)
    mx = sum(weights[k] * states[k, 0] for k in range(n))
    my = sum(weights[k] * states[k, 1] for k in range(n))
    s = sum(weights[k] * math.sin(states[k, 2]) for k in range(n))
    c = sum(weights[k] * math.cos(states[k, 2]) for k in range(n))
    mt = math.atan2(s, c)
    cov = np.zeros((3, 3))
    for k in range(n):
        dt = (states[k, 2] - mt + math.pi) % (2 * math.pi) - math.pi
        d = np.array([states[k, 0] - mx, states[k, 1] - my, dt])
        cov += weights[k] * np.outer(d, d)
    return np.array([mx, my, mt]), cov


def central_difference_gradient(fn, q, h=1e-6):
    q = np.asarray(q, dtype=float)
    g = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        g[k] = (fn(q + e) - fn(q - e)) / (2 * h)
    return g


def dense_polyline_distance(path, p, samples_per_segment=20000):
    best = math.inf
    for a, b in zip(path[:-1], path[1:]):
        t = np.linspace(0.0, 1.0, samples_per_segment)
        pts = a + t[:, None] * (b - a)
        best = min(best, float(np.min(np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1]))))
    return best
