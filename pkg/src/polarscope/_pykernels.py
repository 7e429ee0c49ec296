"""Pure-Python kernels, used when the compiled extension is unavailable.

Results are bit-identical to ``_ckernels``: same RNG stream, same
integer neighbor selection, same accumulation order.
"""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
C1 = 0xBF58476D1CE4E5B9
C2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * C1) & MASK
    z = ((z ^ (z >> 27)) * C2) & MASK
    return z ^ (z >> 31)


def walk_state(seed: int, stream: int, index: int) -> int:
    s = mix64((seed + GOLDEN * (stream + 1)) & MASK)
    return mix64(s ^ ((index * C1) & MASK))


def random_walks(indptr, indices, cumw, auth_side, reachable, starts, n_walks,
                 seed, stream, max_steps, max_resamples):
    indptr = indptr.tolist()
    indices = indices.tolist()
    cumw = cumw.tolist()
    auth_side = auth_side.tolist()
    reachable = reachable.tolist()
    starts = starts.tolist()
    n_starts = len(starts)
    if n_starts == 0:
        raise ValueError("no start candidates")
    seed &= MASK
    end0 = end1 = resampled = 0
    for w in range(n_walks):
        state = walk_state(seed, stream, w)
        tries = 0
        while True:
            if tries > max_resamples:
                raise RuntimeError("random walk resampling limit exceeded")
            state = (state + GOLDEN) & MASK
            cur = starts[((mix64(state) >> 32) * n_starts) >> 32]
            if not reachable[cur]:
                resampled += 1
                tries += 1
                continue
            side = -1
            steps = 0
            while steps < max_steps:
                lo = indptr[cur]
                hi = indptr[cur + 1] - 1
                state = (state + GOLDEN) & MASK
                r = ((mix64(state) >> 32) * cumw[hi]) >> 32
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
            break
    return end0, end1, resampled


def cluster_distance_sums(X, labels, k):
    X = np.ascontiguousarray(X, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    n, d = X.shape
    out = np.zeros((n, k), dtype=np.float64)
    for i in range(n):
        diff = X[i] - X
        acc = np.zeros(n)
        # per-coordinate accumulation mirrors the compiled loop order
        for t in range(d):
            acc = acc + diff[:, t] * diff[:, t]
        np.add.at(out[i], labels, np.sqrt(acc))
    return out
