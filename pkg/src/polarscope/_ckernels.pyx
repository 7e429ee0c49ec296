# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Must stay bit-identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int8_t
from libc.math cimport sqrt

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t C1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t C2 = 0x94D049BB133111EBULL


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * C1
    z = (z ^ (z >> 27)) * C2
    return z ^ (z >> 31)


cdef inline uint64_t next64(uint64_t* state) nogil:
    state[0] += GOLDEN
    return mix64(state[0])


cdef inline int64_t bounded(uint64_t z, int64_t bound) nogil:
    return <int64_t>(((z >> 32) * <uint64_t>bound) >> 32)


cpdef uint64_t walk_state(uint64_t seed, uint64_t stream, uint64_t index):
    cdef uint64_t s = mix64(seed + GOLDEN * (stream + 1))
    return mix64(s ^ (index * C1))


def random_walks(
    const int64_t[::1] indptr,
    const int64_t[::1] indices,
    const int64_t[::1] cumw,
    const int8_t[::1] auth_side,
    const int8_t[::1] reachable,
    const int64_t[::1] starts,
    int64_t n_walks,
    uint64_t seed,
    uint64_t stream,
    int64_t max_steps,
    int64_t max_resamples,
):
    """Run ``n_walks`` weighted walks; return (ends_side0, ends_side1, resampled)."""
    cdef int64_t n_starts = starts.shape[0]
    cdef int64_t w, cur, steps, lo, hi, mid, total, r, tries
    cdef int64_t end0 = 0, end1 = 0, resampled = 0
    cdef uint64_t state
    cdef int8_t side
    cdef bint done
    if n_starts == 0:
        raise ValueError("no start candidates")
    for w in range(n_walks):
        state = walk_state(seed, stream, <uint64_t>w)
        tries = 0
        done = False
        while not done:
            if tries > max_resamples:
                raise RuntimeError("random walk resampling limit exceeded")
            cur = starts[bounded(next64(&state), n_starts)]
            if not reachable[cur]:
                resampled += 1
                tries += 1
                continue
            steps = 0
            side = -1
            while steps < max_steps:
                lo = indptr[cur]
                hi = indptr[cur + 1] - 1
                total = cumw[hi]
                r = bounded(next64(&state), total)
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if cumw[mid] > r:
                        hi = mid
                    else:
                        lo = mid + 1
                cur = indices[lo]
                steps += 1
                if auth_side[cur] >= 0:
                    side = auth_side[cur]
                    break
            if side < 0:
                resampled += 1
                tries += 1
                continue
            if side == 0:
                end0 += 1
            else:
                end1 += 1
            done = True
    return end0, end1, resampled


def cluster_distance_sums(const double[:, ::1] X, const int64_t[::1] labels, int64_t k):
    """``out[i, c]`` = sum of Euclidean distances from point i to members of cluster c."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double acc, diff
    out_arr = np.zeros((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for t in range(d):
                    diff = X[i, t] - X[j, t]
                    acc = acc + diff * diff
                out[i, labels[j]] += sqrt(acc)
    return out_arr
