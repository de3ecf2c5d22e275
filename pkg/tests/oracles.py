"""Independent reference implementations shared by the unit and acceptance tests."""
import math

import numpy as np


def scan_minimize(f, lo, hi, n=2001, rounds=12):
    """Dense 1-D grid search, repeatedly zooming onto the best cell."""
    for _ in range(rounds):
        xs = np.linspace(lo, hi, n)
        vals = np.array([f(x) for x in xs])
        i = int(np.argmin(vals))
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
    return 0.5 * (lo + hi)


def bf_dist(p, q):
    return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2)


def bf_scene(modes, probs, gt, k):
    """Per-scene metrics with plain Python loops."""
    ades, fdes = [], []
    for i in range(k):
        T = len(gt)
        ades.append(sum(bf_dist(modes[i][t], gt[t]) for t in range(T)) / T)
        fdes.append(bf_dist(modes[i][T - 1], gt[T - 1]))
    best_f = min(range(k), key=lambda i: (fdes[i], i))
    min_fde = fdes[best_f]
    return {
        "minADE": min(ades),
        "minFDE": min_fde,
        "MR": 1.0 if min_fde > 2.0 else 0.0,
        "brier_minFDE": min_fde + (1.0 - probs[best_f]) ** 2,
    }


def random_scene(rng, K, T=30):
    gt = np.cumsum(rng.normal(scale=0.8, size=(T, 2)), axis=0)
    modes = gt[None] + rng.normal(scale=rng.uniform(0.1, 3.0), size=(K, T, 2)).cumsum(axis=1) * 0.3
    probs = rng.dirichlet(np.ones(K))
    return modes, probs, gt
