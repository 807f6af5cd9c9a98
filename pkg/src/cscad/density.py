"""Nonparametric density models for residual series.

Continuous residuals get a Gaussian-kernel KDE with the Silverman rule
bandwidth; discrete residuals get add-one smoothed frequencies. Pairs use a
product-kernel 2-D KDE (continuous-continuous), a product-state frequency
table (discrete-discrete), or a per-state conditional KDE times the state
frequency (mixed). Every queried density is floored at DENSITY_FLOOR so a
log never sees zero.
"""

import numpy as np

from .exceptions import TooFewObservations
from .schema import CONTINUOUS, DISCRETE
from .tree import ResidualSeries

DENSITY_FLOOR = 1e-12
BANDWIDTH_FLOOR = 1e-6

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def silverman_bandwidth(points):
    """h = 1.06 * sigma_hat * n^(-1/5), floored so a degenerate sample still
    yields a usable kernel."""
    points = np.asarray(points, dtype=np.float64)
    n = points.size
    sigma = points.std(ddof=1) if n > 1 else 0.0
    return max(1.06 * sigma * n ** (-0.2), BANDWIDTH_FLOOR)


def _kernel_sum(queries, points, h):
    # chunk over queries to bound the broadcast buffer
    queries = np.asarray(queries, dtype=np.float64)
    out = np.empty(queries.size)
    step = max(1, int(4e6 // max(points.size, 1)))
    for start in range(0, queries.size, step):
        block = queries[start : start + step, None]
        z = (block - points[None, :]) / h
        out[start : start + step] = np.exp(-0.5 * z * z).sum(axis=1)
    return out * (_INV_SQRT_2PI / h)


class Kde1d:
    """Gaussian kernel density over a point sample."""

    def __init__(self, points):
        points = np.asarray(points, dtype=np.float64)
        if points.size < 2:
            raise TooFewObservations(f"KDE needs >= 2 points, got {points.size}")
        self.points = points
        self.bandwidth = silverman_bandwidth(points)

    def pdf(self, x):
        dens = _kernel_sum(np.atleast_1d(x), self.points, self.bandwidth) / self.points.size
        return np.maximum(dens, DENSITY_FLOOR)


class Kde2d:
    """Product-kernel 2-D KDE with per-axis Silverman bandwidths."""

    def __init__(self, points_x, points_y):
        points_x = np.asarray(points_x, dtype=np.float64)
        points_y = np.asarray(points_y, dtype=np.float64)
        if points_x.size != points_y.size:
            raise TooFewObservations("paired KDE needs equal-length samples")
        if points_x.size < 2:
            raise TooFewObservations(f"KDE needs >= 2 points, got {points_x.size}")
        self.points_x = points_x
        self.points_y = points_y
        self.bandwidth_x = silverman_bandwidth(points_x)
        self.bandwidth_y = silverman_bandwidth(points_y)

    def pdf(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        n = self.points_x.size
        out = np.empty(x.size)
        step = max(1, int(4e6 // n))
        hx, hy = self.bandwidth_x, self.bandwidth_y
        for start in range(0, x.size, step):
            zx = (x[start : start + step, None] - self.points_x[None, :]) / hx
            zy = (y[start : start + step, None] - self.points_y[None, :]) / hy
            out[start : start + step] = np.exp(-0.5 * (zx * zx + zy * zy)).sum(axis=1)
        dens = out * (_INV_SQRT_2PI * _INV_SQRT_2PI / (n * hx * hy))
        return np.maximum(dens, DENSITY_FLOOR)


class Frequency:
    """Add-one smoothed state frequencies over a fixed alphabet."""

    def __init__(self, states, alphabet_size):
        states = np.asarray(states, dtype=np.int64)
        if states.size < 2:
            raise TooFewObservations(f"frequencies need >= 2 states, got {states.size}")
        counts = np.bincount(states, minlength=alphabet_size).astype(np.float64)
        self.alphabet_size = alphabet_size
        self.probs = (counts + 1.0) / (states.size + alphabet_size)

    def pmf(self, states):
        states = np.atleast_1d(np.asarray(states, dtype=np.int64))
        return np.maximum(self.probs[states], DENSITY_FLOOR)


class JointFrequency:
    """Add-one smoothed table over product states of two discrete alphabets."""

    def __init__(self, states_a, states_b, alphabet_a, alphabet_b):
        states_a = np.asarray(states_a, dtype=np.int64)
        states_b = np.asarray(states_b, dtype=np.int64)
        if states_a.size != states_b.size:
            raise TooFewObservations("paired frequencies need equal-length samples")
        if states_a.size < 2:
            raise TooFewObservations("frequencies need >= 2 states")
        flat = states_a * alphabet_b + states_b
        counts = np.bincount(flat, minlength=alphabet_a * alphabet_b).astype(np.float64)
        self.table = (counts + 1.0) / (states_a.size + alphabet_a * alphabet_b)
        self.alphabet_a = alphabet_a
        self.alphabet_b = alphabet_b

    def pmf(self, states_a, states_b):
        states_a = np.atleast_1d(np.asarray(states_a, dtype=np.int64))
        states_b = np.atleast_1d(np.asarray(states_b, dtype=np.int64))
        return np.maximum(self.table[states_a * self.alphabet_b + states_b], DENSITY_FLOOR)


class MixedConditional:
    """Continuous-discrete joint density p(x, s) = p(x | s) * p(s): one KDE
    per discrete state (falling back to the pooled KDE for states with fewer
    than 2 observations) times the smoothed state frequency."""

    def __init__(self, values, states, alphabet_size):
        values = np.asarray(values, dtype=np.float64)
        states = np.asarray(states, dtype=np.int64)
        if values.size != states.size:
            raise TooFewObservations("paired sample needs equal-length columns")
        if values.size < 2:
            raise TooFewObservations("mixed density needs >= 2 observations")
        self.frequency = Frequency(states, alphabet_size)
        pooled = Kde1d(values)
        self.conditionals = {}
        for s in range(alphabet_size):
            sel = values[states == s]
            self.conditionals[s] = Kde1d(sel) if sel.size >= 2 else pooled

    def pdf(self, values, states):
        values = np.atleast_1d(np.asarray(values, dtype=np.float64))
        states = np.atleast_1d(np.asarray(states, dtype=np.int64))
        out = np.empty(values.size)
        for s in np.unique(states):
            sel = states == s
            out[sel] = self.conditionals[int(s)].pdf(values[sel])
        dens = out * self.frequency.pmf(states)
        return np.maximum(dens, DENSITY_FLOOR)


def estimate_density(residuals, second=None):
    """Build the density model matching the residual kinds: KDE, smoothed
    frequencies, or the pair forms documented in the module docstring."""
    if second is None:
        if residuals.kind == CONTINUOUS:
            return Kde1d(residuals.values)
        return Frequency(residuals.values, residuals.alphabet_size)
    a, b = residuals, second
    if len(a) != len(b):
        raise TooFewObservations("paired residual series differ in length")
    if a.kind == CONTINUOUS and b.kind == CONTINUOUS:
        return Kde2d(a.values, b.values)
    if a.kind == DISCRETE and b.kind == DISCRETE:
        return JointFrequency(a.values, b.values, a.alphabet_size, b.alphabet_size)
    if a.kind == CONTINUOUS:
        return MixedConditional(a.values, b.values, b.alphabet_size)
    return MixedConditional(b.values, a.values, a.alphabet_size)
