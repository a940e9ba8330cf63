"""Optimal epsilon for a two-pixel Gaussian by direct numerical quadrature.

Pixels are two 1x1 frames with covariance scale^2 [[1, a], [a, 1]] and a
constant mean. The network input for a missing pixel is the VP value
x_t = xhat / sqrt(1 + sigma^2) with xhat = x + sigma * eps, and
eps* = (xhat - E[x | xhat, known]) / sigma.
"""
import json
import math
import pathlib

import numpy as np

DATA = pathlib.Path(__file__).resolve().parents[1] / "data"
SCALE, AR, MEAN = 0.8, 0.6, 0.1
cov = SCALE ** 2 * np.array([[1.0, AR], [AR, 1.0]])
prec = np.linalg.inv(cov)


def log_prior(x0, x1):
    d0, d1 = x0 - MEAN, x1 - MEAN
    return -0.5 * (prec[0, 0] * d0 * d0 + 2 * prec[0, 1] * d0 * d1 + prec[1, 1] * d1 * d1)


grid = np.linspace(MEAN - 12 * SCALE, MEAN + 12 * SCALE, 6001)
cases = []

# Frame 0 known, frame 1 missing.
for sigma, y, xt in [(0.3, 0.5, 0.2), (1.0, -0.4, 0.7), (2.5, 0.9, -0.3), (0.05, 0.0, 0.4)]:
    xhat = xt * math.sqrt(1 + sigma * sigma)
    logw = log_prior(y, grid) - 0.5 * (xhat - grid) ** 2 / sigma ** 2
    w = np.exp(logw - logw.max())
    post = np.trapz(w * grid, grid) / np.trapz(w, grid)
    cases.append({"sigma": sigma, "mask": [1, 0], "input": [y, xt], "eps": [0.0, (xhat - post) / sigma]})

# Both frames missing.
g0, g1 = np.meshgrid(grid[::6], grid[::6], indexing="ij")
for sigma, xt0, xt1 in [(0.5, 0.3, -0.2), (1.5, -0.6, 0.8)]:
    s = math.sqrt(1 + sigma * sigma)
    h0, h1 = xt0 * s, xt1 * s
    logw = log_prior(g0, g1) - 0.5 * ((h0 - g0) ** 2 + (h1 - g1) ** 2) / sigma ** 2
    w = np.exp(logw - logw.max())
    z = np.trapz(np.trapz(w, grid[::6], axis=1), grid[::6])
    m0 = np.trapz(np.trapz(w * g0, grid[::6], axis=1), grid[::6]) / z
    m1 = np.trapz(np.trapz(w * g1, grid[::6], axis=1), grid[::6]) / z
    cases.append({"sigma": sigma, "mask": [0, 0], "input": [xt0, xt1], "eps": [(h0 - m0) / sigma, (h1 - m1) / sigma]})

golden = {"scale": SCALE, "ar": AR, "mean": MEAN, "cases": cases}
(DATA / "oracle_two_pixel.json").write_text(json.dumps(golden, indent=2) + "\n")
print(json.dumps(golden, indent=1))
