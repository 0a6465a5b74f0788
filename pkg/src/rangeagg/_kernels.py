"""Compiled inner loops for bucket labels and bucket scans.

Both kernels evaluate a hash bit the same way (left-to-right dot product,
floor, multiply-add-shift sign map), so labels computed for a whole point set
and labels tested during a scan always agree bit for bit.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _bit(coords, i, dirs, offs, mul, add, g, l):
    acc = 0.0
    for j in range(coords.shape[1]):
        acc += coords[i, j] * dirs[g, l, j]
    h = np.int64(math.floor(acc + offs[g, l]))
    return np.uint8((np.uint64(h) * mul[g, l] + add[g, l]) >> np.uint64(63))


@njit(cache=True)
def label_bits(coords, dirs, offs, mul, add):
    """(G, n, L) label bits of every point under every group."""
    n = coords.shape[0]
    G, L = offs.shape
    out = np.empty((G, n, L), dtype=np.uint8)
    for g in range(G):
        for i in range(n):
            for l in range(L):
                out[g, i, l] = _bit(coords, i, dirs, offs, mul, add, g, l)
    return out


@njit(cache=True)
def scan_buckets(coords, coords_t, dirs, offs, mul, add, targets, o_in, o_out, hi, lo, budget):
    """Open the bucket labeled ``targets[g]`` of each group in turn.

    Members are visited in ascending local id and each visit is one probe.
    Returns (local id of the first member within ``hi`` of o_in and at least
    ``lo`` from o_out, or -1; probes used). Stops once ``budget`` probes are spent.
    ``coords_t`` is the transposed copy of ``coords``, used for the first bit.
    """
    n, d = coords.shape
    G, L = offs.shape
    probes = 0
    alive = np.empty(n, dtype=np.int64)
    proj = np.empty(n)
    for g in range(G):
        # bit 0 for every point at once; same summation order as _bit
        proj[:] = 0.0
        for j in range(d):
            w = dirs[g, 0, j]
            for i in range(n):
                proj[i] += coords_t[j, i] * w
        m = 0
        for i in range(n):
            h = np.int64(math.floor(proj[i] + offs[g, 0]))
            bit = np.uint8((np.uint64(h) * mul[g, 0] + add[g, 0]) >> np.uint64(63))
            alive[m] = i
            m += bit == targets[g, 0]
        # remaining bits only for the survivors, still in ascending id
        for l in range(1, L):
            k = 0
            for a in range(m):
                i = alive[a]
                alive[k] = i
                k += _bit(coords, i, dirs, offs, mul, add, g, l) == targets[g, l]
            m = k
        for a in range(m):
            i = alive[a]
            probes += 1
            s_in = 0.0
            s_out = 0.0
            for j in range(d):
                u = coords[i, j] - o_in[j]
                v = coords[i, j] - o_out[j]
                s_in += u * u
                s_out += v * v
            if math.sqrt(s_in) <= hi and math.sqrt(s_out) >= lo:
                return i, probes
            if probes >= budget:
                return -1, probes
    return -1, probes
