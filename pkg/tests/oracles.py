"""Slow, independent reference implementations used by the unit and acceptance tests."""

import math

import numpy as np


def threshold(values, level):
    """Order statistic ``ceil(B1 (1 - level))`` of the B1 + 1 values, by plain sorting."""
    vals = sorted(float(v) for v in values)
    B1 = len(vals) - 1
    rank = max(1, math.ceil(B1 * (1.0 - level) - 1e-9))
    return vals[rank - 1]


def aggregated_exceedance(u, originals, q_reps, c_reps, weights):
    """Fraction of correction columns where some bandwidth exceeds its threshold at level ``u w``."""
    ths = [threshold(list(q_reps[k]) + [originals[k]], u * weights[k]) for k in range(len(weights))]
    B2 = len(c_reps[0])
    hits = sum(any(c_reps[k][b] > ths[k] for k in range(len(weights))) for b in range(B2))
    return hits / B2


def grid_u_alpha(originals, q_reps, c_reps, weights, alpha, points=20001):
    """Largest grid point ``u`` in ``[0, 1/max w]`` whose exceedance is ``<= alpha``."""
    grid = np.linspace(0.0, 1.0 / max(weights), points)
    best = 0.0
    for u in grid[1:]:
        if aggregated_exceedance(u, originals, q_reps, c_reps, weights) <= alpha:
            best = float(u)
    return best, float(grid[1] - grid[0])


def brute_statistic(h, pairs):
    """Design average of a scalar pair function."""
    pairs = list(pairs)
    return sum(h(i, j) for i, j in pairs) / len(pairs)
