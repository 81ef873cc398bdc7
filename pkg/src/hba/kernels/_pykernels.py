"""Numpy implementations of the chain and diagnostic kernels.

Same signatures and results as the compiled module; used when the extension
is not built.
"""
import numpy as np


def _row_ids(indptr):
    return np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))


def bounded_reach(indptr, indices, data, term, t):
    n = len(term)
    term = np.asarray(term, dtype=bool)
    rows = _row_ids(indptr)
    out = np.zeros((t + 1, n))
    out[0] = term
    for k in range(1, t + 1):
        step = np.bincount(rows, weights=data * out[k - 1][indices], minlength=n)
        out[k] = np.where(term, 1.0, step)
    return out


def reach_fixpoint(indptr, indices, data, term, tol, max_iter):
    n = len(term)
    term = np.asarray(term, dtype=bool)
    rows = _row_ids(indptr)
    cur = term.astype(float)
    for _ in range(max_iter):
        nxt = np.where(term, 1.0, np.bincount(rows, weights=data * cur[indices], minlength=n))
        delta = np.max(np.abs(nxt - cur)) if n else 0.0
        cur = nxt
        if delta <= tol:
            break
    return cur


def block_mass(indptr, indices, data, block_of, n_blocks):
    n = len(block_of)
    rows = _row_ids(indptr)
    out = np.zeros((n, n_blocks))
    np.add.at(out, (rows, np.asarray(block_of)[indices]), data)
    return out


def overlap_terms(observed, peak, n_actions):
    observed = np.asarray(observed, dtype=float)
    peak = np.asarray(peak, dtype=float)
    k = observed.shape[1] if observed.ndim == 2 else 0
    if observed.shape[0] == 0 or k == 0:
        return np.zeros(observed.shape[0]), np.zeros(observed.shape[0])
    support = np.count_nonzero(observed > 0.0, axis=1)
    ao = np.where(support >= 2, observed.sum(axis=1) / k, 0.0)
    norm = 1.0 - 1.0 / n_actions if n_actions > 1 else 0.0
    if norm > 0.0:
        st = (1.0 - peak).sum(axis=1) / k / norm
    else:
        st = np.zeros(observed.shape[0])
    return ao, st
