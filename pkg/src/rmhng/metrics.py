"""Clustering and agreement metrics: ARI, inter-agent kappa, and the
label-switching-corrected overlap between two samplers' sign histograms."""

from __future__ import annotations

import itertools

import numpy as np


def _labels(x, what="labels"):
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"{what} must be a 1-d label vector")
    return x


def contingency(a, b) -> np.ndarray:
    """Count matrix ``n[i, j]`` of items labelled ``i`` in ``a`` and ``j`` in ``b``."""
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia.ravel(), ib.ravel()), 1)
    return table


def _pairs(n):
    n = np.asarray(n, dtype=float)
    return n * (n - 1.0) / 2.0


def adjusted_rand_index(estimate, truth) -> float:
    """Hubert-Arabie adjusted Rand index of two partitions of the same items."""
    estimate, truth = _labels(estimate, "estimate"), _labels(truth, "truth")
    if estimate.shape != truth.shape:
        raise ValueError(f"length mismatch: {estimate.size} vs {truth.size}")
    if estimate.size < 2:
        return 1.0
    table = contingency(estimate, truth)
    index = _pairs(table).sum()
    rows = _pairs(table.sum(axis=1)).sum()
    cols = _pairs(table.sum(axis=0)).sum()
    expected = rows * cols / _pairs(estimate.size)
    maximum = 0.5 * (rows + cols)
    if maximum == expected:
        # both partitions trivial (all singletons or one block): identical
        return 1.0
    return float((index - expected) / (maximum - expected))


def cohen_kappa(a, b, n_signs: int | None = None) -> float:
    """Two-rater Cohen's kappa on sign vectors; 1.0 when chance agreement is 1."""
    a, b = _labels(a), _labels(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    k = int(max(a.max(), b.max()) + 1) if n_signs is None else n_signs
    observed = float(np.mean(a == b))
    pa = np.bincount(a, minlength=k) / a.size
    pb = np.bincount(b, minlength=k) / b.size
    chance = float(pa @ pb)
    if chance >= 1.0:
        return 1.0
    return (observed - chance) / (1.0 - chance)


def fleiss_kappa(signs, n_signs: int | None = None) -> float:
    """Fleiss' kappa treating each agent as a rater of every object."""
    signs = np.asarray(signs)
    n_raters, n_items = signs.shape
    k = int(signs.max() + 1) if n_signs is None else n_signs
    counts = np.stack([np.bincount(signs[:, d], minlength=k) for d in range(n_items)])
    p_item = (np.sum(counts * counts, axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_cat = counts.sum(axis=0) / (n_items * n_raters)
    observed, chance = p_item.mean(), float(np.sum(p_cat**2))
    if chance >= 1.0:
        return 1.0
    return float((observed - chance) / (1.0 - chance))


def kappa_coefficient(signs, n_signs: int | None = None, method: str = "pairwise") -> float:
    """Inter-agent sign agreement for ``signs`` of shape ``(N, D)``, ``N >= 2``.

    ``method="pairwise"`` averages Cohen's kappa over all agent pairs;
    ``method="fleiss"`` uses Fleiss' multi-rater kappa.
    """
    signs = np.asarray(signs)
    if signs.ndim != 2 or signs.shape[0] < 2:
        raise ValueError("kappa needs sign vectors from at least 2 agents")
    if method == "fleiss":
        return fleiss_kappa(signs, n_signs)
    if method != "pairwise":
        raise ValueError(f"unknown kappa method {method!r}")
    values = [cohen_kappa(signs[i], signs[j], n_signs) for i, j in itertools.combinations(range(signs.shape[0]), 2)]
    return float(np.mean(values))


def hungarian(cost) -> np.ndarray:
    """Minimum-cost perfect assignment on a square cost matrix.

    Returns ``col`` with ``col[i]`` the column assigned to row ``i``.  Shortest
    augmenting path with row/column potentials, O(n^3).
    """
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    if cost.shape != (n, n):
        raise ValueError(f"cost matrix must be square, got {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of = np.zeros(n + 1, dtype=np.int64)  # row_of[j]: 1-based row matched to column j
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        row_of[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            free = ~used[1:]
            reduced = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[row_of[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of[j0] = row_of[j1]
            j0 = j1
    col = np.empty(n, dtype=np.int64)
    col[row_of[1:] - 1] = np.arange(n)
    return col


def matching_gain(f_r, f_g) -> np.ndarray:
    """``g[a, b] = sum_d min(f_r[d, a], f_g[d, b])``."""
    f_r, f_g = np.asarray(f_r), np.asarray(f_g)
    return np.minimum(f_r[:, :, None], f_g[:, None, :]).sum(axis=0)


def posterior_agreement(f_r, f_g, window: int | None = None) -> float:
    """Overlap of two ``(D, K)`` sign-count histograms after optimal relabeling.

    The relabeling maximizes the total overlap (solved as a min-cost assignment
    on negated gains); the overlap is normalized by ``window * D``, where
    ``window`` defaults to the common row sum.
    """
    f_r, f_g = np.asarray(f_r), np.asarray(f_g)
    if f_r.shape != f_g.shape or f_r.ndim != 2:
        raise ValueError(f"count matrices differ in shape: {f_r.shape} vs {f_g.shape}")
    if window is None:
        window = int(f_r[0].sum()) if f_r.size else 1
    for name, f in (("f_r", f_r), ("f_g", f_g)):
        if np.any(f < 0) or np.any(f.sum(axis=1) != window):
            raise ValueError(f"every row of {name} must sum to the window ({window})")
    sigma = hungarian(-matching_gain(f_r, f_g))
    overlap = np.minimum(f_r, f_g[:, sigma]).sum()
    return float(overlap / (window * f_r.shape[0]))


def collect_sign_counts(trace_or_signs, window: int, n_signs: int, source: str | int = "tail") -> np.ndarray:
    """``(D, K)`` counts of each object's sign over the last ``window`` iterations.

    ``trace_or_signs`` is a :class:`~rmhng.game.GameTrace` or an ``(I, D)``
    array.  For a trace, ``source`` picks the sign table tallied: ``"tail"``
    (chain-tail agent of each exchange) or an agent index.
    """
    if hasattr(trace_or_signs, "sign_array"):
        trace = trace_or_signs
        history = trace.tail_signs if source == "tail" else trace.sign_array[:, int(source), :]
    else:
        history = np.asarray(trace_or_signs)
    if history.ndim != 2:
        raise ValueError("sign history must be (iterations, objects)")
    if not 1 <= window <= history.shape[0]:
        raise ValueError(f"window {window} exceeds the {history.shape[0]} recorded iterations")
    recent = history[-window:]
    counts = np.zeros((history.shape[1], n_signs), dtype=np.int64)
    np.add.at(counts, (np.broadcast_to(np.arange(history.shape[1]), recent.shape), recent), 1)
    return counts
