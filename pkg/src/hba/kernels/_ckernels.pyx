# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for chain model checking and belief diagnostics.

Chains are passed in CSR form: ``indptr``/``indices``/``data`` describe the
outgoing edges of each node and ``term`` marks absorbing goal nodes.
"""
import numpy as np

from libc.math cimport fabs


def bounded_reach(const long long[:] indptr, const long long[:] indices,
                  const double[:] data, const unsigned char[:] term, long t):
    cdef Py_ssize_t n = term.shape[0]
    out = np.zeros((t + 1, n), dtype=np.float64)
    cdef double[:, :] p = out
    cdef Py_ssize_t s, e, k
    cdef double acc
    for s in range(n):
        p[0, s] = 1.0 if term[s] else 0.0
    for k in range(1, t + 1):
        for s in range(n):
            if term[s]:
                p[k, s] = 1.0
                continue
            acc = 0.0
            for e in range(indptr[s], indptr[s + 1]):
                acc += data[e] * p[k - 1, indices[e]]
            p[k, s] = acc
    return out


def reach_fixpoint(const long long[:] indptr, const long long[:] indices,
                   const double[:] data, const unsigned char[:] term,
                   double tol, long max_iter):
    cdef Py_ssize_t n = term.shape[0]
    cur_arr = np.zeros(n, dtype=np.float64)
    nxt_arr = np.zeros(n, dtype=np.float64)
    cdef double[:] cur = cur_arr
    cdef double[:] nxt = nxt_arr
    cdef double[:] tmp
    cdef Py_ssize_t s, e
    cdef long it
    cdef double acc, delta
    for s in range(n):
        cur[s] = 1.0 if term[s] else 0.0
    for it in range(max_iter):
        delta = 0.0
        for s in range(n):
            if term[s]:
                nxt[s] = 1.0
                continue
            acc = 0.0
            for e in range(indptr[s], indptr[s + 1]):
                acc += data[e] * cur[indices[e]]
            nxt[s] = acc
            if fabs(acc - cur[s]) > delta:
                delta = fabs(acc - cur[s])
        tmp = cur
        cur = nxt
        nxt = tmp
        if delta <= tol:
            break
    return np.asarray(cur).copy()


def block_mass(const long long[:] indptr, const long long[:] indices,
               const double[:] data, const long long[:] block_of, long n_blocks):
    cdef Py_ssize_t n = block_of.shape[0]
    out = np.zeros((n, n_blocks), dtype=np.float64)
    cdef double[:, :] m = out
    cdef Py_ssize_t s, e
    for s in range(n):
        for e in range(indptr[s], indptr[s + 1]):
            m[s, block_of[indices[e]]] += data[e]
    return out


def overlap_terms(const double[:, :] observed, const double[:, :] peak, long n_actions):
    cdef Py_ssize_t steps = observed.shape[0]
    cdef Py_ssize_t k = observed.shape[1]
    ao_arr = np.zeros(steps, dtype=np.float64)
    as_arr = np.zeros(steps, dtype=np.float64)
    cdef double[:] ao = ao_arr
    cdef double[:] st = as_arr
    cdef Py_ssize_t t, j
    cdef long support
    cdef double total, spread
    cdef double norm = 1.0 - 1.0 / n_actions if n_actions > 1 else 0.0
    if k == 0:
        return ao_arr, as_arr
    for t in range(steps):
        support = 0
        total = 0.0
        spread = 0.0
        for j in range(k):
            if observed[t, j] > 0.0:
                support += 1
            total += observed[t, j]
            spread += 1.0 - peak[t, j]
        if support >= 2:
            ao[t] = total / k
        if norm > 0.0:
            st[t] = spread / k / norm
    return ao_arr, as_arr
