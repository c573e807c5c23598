"""Rate-1/2 convolutional code, constraint length 9 (generators 0o561,
0o753), zero-terminated, with hard-decision Viterbi decoding.

Bits travel as numpy uint8 arrays of 0/1 values.  Encoding reduces to
two binary convolutions; decoding runs the 256-state trellis in a numba
kernel (the per-frame hot path of the receive side).
"""

from __future__ import annotations

import numpy as np
from numba import njit

K = 9
G1 = 0o561
G2 = 0o753
TAIL = K - 1  # zero-termination flush bits


def _taps(g: int) -> np.ndarray:
    # taps[k] multiplies bits[n-k]; MSB of g applies to the current bit
    return np.array([(g >> (K - 1 - k)) & 1 for k in range(K)], dtype=np.uint8)


_TAPS1 = _taps(G1)
_TAPS2 = _taps(G2)


def _branch_outputs() -> np.ndarray:
    # r = (input bit << 8) | state; packed output pair (o1 << 1) | o2
    r = np.arange(512, dtype=np.uint32)
    o1 = np.zeros(512, dtype=np.uint8)
    o2 = np.zeros(512, dtype=np.uint8)
    for bit in range(K):
        o1 ^= ((r >> bit) & 1).astype(np.uint8) * ((G1 >> bit) & 1)
        o2 ^= ((r >> bit) & 1).astype(np.uint8) * ((G2 >> bit) & 1)
    return ((o1 << 1) | o2).astype(np.uint8)


_BRANCH_OUT = _branch_outputs()


def conv_encode(bits: np.ndarray) -> np.ndarray:
    """Encode a 0/1 array; output length is 2 * (len + 8)."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("bits must be one-dimensional")
    if bits.size == 0:
        return np.zeros(2 * TAIL, dtype=np.uint8)
    # 'full' convolution runs 8 steps past the data: exactly the zero tail
    o1 = (np.convolve(bits, _TAPS1) & 1).astype(np.uint8)
    o2 = (np.convolve(bits, _TAPS2) & 1).astype(np.uint8)
    out = np.empty(2 * o1.size, dtype=np.uint8)
    out[0::2] = o1
    out[1::2] = o2
    return out


@njit(cache=True)
def _viterbi_kernel(pairs, branch_out):
    n = pairs.shape[0]
    inf = np.int32(1 << 28)
    metric = np.full(256, inf, dtype=np.int32)
    metric[0] = 0
    new = np.empty(256, dtype=np.int32)
    choice = np.empty((n, 256), dtype=np.uint8)
    popc = np.array([0, 1, 1, 2], dtype=np.int32)
    for t in range(n):
        y = pairs[t]
        for sp in range(256):
            r0 = sp << 1
            r1 = r0 | 1
            m0 = metric[r0 & 0xFF] + popc[branch_out[r0] ^ y]
            m1 = metric[r1 & 0xFF] + popc[branch_out[r1] ^ y]
            if m0 <= m1:
                new[sp] = m0
                choice[t, sp] = 0
            else:
                new[sp] = m1
                choice[t, sp] = 1
        metric, new = new, metric
    bits = np.empty(n, dtype=np.uint8)
    s = 0
    for t in range(n - 1, -1, -1):
        bits[t] = s >> 7
        s = ((s << 1) | choice[t, s]) & 0xFF
    return bits


def viterbi_decode(coded: np.ndarray) -> np.ndarray:
    """Maximum-likelihood decode of a zero-terminated coded bit stream."""
    coded = np.asarray(coded, dtype=np.uint8)
    if coded.size % 2 != 0:
        raise ValueError("coded bit stream must have even length")
    steps = coded.size // 2
    if steps < TAIL:
        raise ValueError("coded stream shorter than the termination tail")
    pairs = ((coded[0::2] << 1) | coded[1::2]).astype(np.uint8)
    path = _viterbi_kernel(pairs, _BRANCH_OUT)
    return path[: steps - TAIL]
