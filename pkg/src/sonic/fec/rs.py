"""Reed-Solomon (255, 223) over GF(2^8), primitive polynomial 0x11D.

Systematic encoding with generator roots alpha^0..alpha^31; data is
chunked into 223-byte blocks (the trailing block is shortened) and each
block gains 32 parity bytes, correcting up to 16 symbol errors.

Encoding and syndrome computation are the hot paths (every frame, every
transmission) and run as numba kernels; Berlekamp-Massey, Chien search
and Forney run in plain Python since they only execute for corrupted
blocks.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BLOCK_DATA = 223
BLOCK_PARITY = 32
BLOCK_TOTAL = 255


class RsDecodeFailure(Exception):
    """Corruption beyond the 16-symbol correction bound."""


def _build_tables() -> tuple[np.ndarray, np.ndarray]:
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= 0x11D
    exp[255:510] = exp[:255]
    return exp, log


GF_EXP, GF_LOG = _build_tables()


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(GF_EXP[GF_LOG[a] + GF_LOG[b]])


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("GF(256) division by zero")
    if a == 0:
        return 0
    return int(GF_EXP[(GF_LOG[a] - GF_LOG[b]) % 255])


def gf_pow(a: int, n: int) -> int:
    if a == 0:
        return 0
    return int(GF_EXP[(GF_LOG[a] * n) % 255])


def _generator_poly() -> np.ndarray:
    # monic, descending degree: product of (x - alpha^i), i = 0..31
    g = [1]
    for i in range(BLOCK_PARITY):
        root = int(GF_EXP[i])
        nxt = [0] * (len(g) + 1)
        for j, c in enumerate(g):
            nxt[j] ^= gf_mul(c, 1)
            nxt[j + 1] ^= gf_mul(c, root)
        g = nxt
    return np.array(g, dtype=np.uint8)


GEN_POLY = _generator_poly()


@njit(cache=True)
def _encode_block(data, gen, exp, log, parity_out):
    nparity = parity_out.shape[0]
    for j in range(nparity):
        parity_out[j] = 0
    for k in range(data.shape[0]):
        fb = data[k] ^ parity_out[0]
        for j in range(nparity - 1):
            parity_out[j] = parity_out[j + 1]
        parity_out[nparity - 1] = 0
        if fb != 0:
            lfb = log[fb]
            for j in range(nparity):
                if gen[j + 1] != 0:
                    parity_out[j] ^= exp[log[gen[j + 1]] + lfb]


@njit(cache=True)
def _syndromes(block, exp, log, out):
    # out[j] = block evaluated at alpha^j, Horner from the leading byte
    n = block.shape[0]
    for j in range(out.shape[0]):
        acc = 0
        for k in range(n):
            if acc != 0:
                acc = exp[log[acc] + j]
            acc ^= block[k]
        out[j] = acc


def rs_encode(data: bytes) -> bytes:
    """Append 32 parity bytes per (up to) 223-byte block."""
    if not data:
        return b""
    arr = np.frombuffer(data, dtype=np.uint8)
    out = bytearray()
    parity = np.zeros(BLOCK_PARITY, dtype=np.uint8)
    for start in range(0, len(arr), BLOCK_DATA):
        block = arr[start : start + BLOCK_DATA]
        _encode_block(block, GEN_POLY, GF_EXP, GF_LOG, parity)
        out += block.tobytes()
        out += parity.tobytes()
    return bytes(out)


def encoded_length(n: int) -> int:
    return n + BLOCK_PARITY * ((n + BLOCK_DATA - 1) // BLOCK_DATA)


def _berlekamp_massey(synd: np.ndarray) -> list[int]:
    c = [1]
    b = [1]
    l = 0
    m = 1
    bb = 1
    for n in range(len(synd)):
        d = int(synd[n])
        for i in range(1, l + 1):
            if i < len(c):
                d ^= gf_mul(c[i], int(synd[n - i]))
        if d == 0:
            m += 1
        elif 2 * l <= n:
            t = c.copy()
            coef = gf_div(d, bb)
            shifted = [0] * m + [gf_mul(coef, x) for x in b]
            c = [a ^ bcoef for a, bcoef in _zip_pad(c, shifted)]
            l = n + 1 - l
            b = t
            bb = d
            m = 1
        else:
            coef = gf_div(d, bb)
            shifted = [0] * m + [gf_mul(coef, x) for x in b]
            c = [a ^ bcoef for a, bcoef in _zip_pad(c, shifted)]
            m += 1
    return c[: l + 1]


def _zip_pad(a: list[int], b: list[int]):
    n = max(len(a), len(b))
    for i in range(n):
        yield (a[i] if i < len(a) else 0), (b[i] if i < len(b) else 0)


def _chien_search(loc: list[int], block_len: int) -> list[int]:
    """Error positions (array index from block start) where the locator
    polynomial has a root."""
    positions = []
    # byte k has degree block_len-1-k; root test at x = alpha^{-degree}
    degs = np.arange(block_len - 1, -1, -1)
    vals = np.zeros(block_len, dtype=np.uint8)
    for i, coef in enumerate(loc):
        if coef == 0:
            continue
        exps = (GF_LOG[coef] + (255 - degs % 255) * i) % 255
        vals ^= GF_EXP[exps].astype(np.uint8)
    for k in np.nonzero(vals == 0)[0]:
        positions.append(int(k))
    return positions


def _decode_block(block: np.ndarray) -> tuple[np.ndarray, int]:
    synd = np.zeros(BLOCK_PARITY, dtype=np.uint8)
    _syndromes(block, GF_EXP, GF_LOG, synd)
    if not synd.any():
        return block[:-BLOCK_PARITY], 0

    loc = _berlekamp_massey(synd)
    nerr = len(loc) - 1
    if nerr > BLOCK_PARITY // 2:
        raise RsDecodeFailure(f"locator degree {nerr} exceeds capability")
    positions = _chien_search(loc, len(block))
    if len(positions) != nerr:
        raise RsDecodeFailure("locator roots do not match error count")

    # Forney: omega = S(x) * Lambda(x) mod x^32, with S ascending
    s_poly = [int(x) for x in synd]
    omega = [0] * BLOCK_PARITY
    for i, si in enumerate(s_poly):
        if si == 0:
            continue
        for j, lj in enumerate(loc):
            if i + j < BLOCK_PARITY and lj != 0:
                omega[i + j] ^= gf_mul(si, lj)
    # formal derivative of Lambda: odd-degree terms shift down
    dloc = [loc[i] if i % 2 == 1 else 0 for i in range(1, len(loc))]

    fixed = block.copy()
    n = len(block)
    for k in positions:
        deg = n - 1 - k
        x_inv = gf_pow(int(GF_EXP[deg % 255]), 255 - 1)  # alpha^{-deg}
        om = _poly_eval_ascending(omega, x_inv)
        dl = _poly_eval_ascending(dloc, x_inv)
        if dl == 0:
            raise RsDecodeFailure("Forney derivative vanished")
        magnitude = gf_mul(int(GF_EXP[deg % 255]), gf_div(om, dl))
        fixed[k] ^= magnitude
    check = np.zeros(BLOCK_PARITY, dtype=np.uint8)
    _syndromes(fixed, GF_EXP, GF_LOG, check)
    if check.any():
        raise RsDecodeFailure("residual syndromes after correction")
    return fixed[:-BLOCK_PARITY], nerr


def _poly_eval_ascending(coeffs: list[int], x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = gf_mul(acc, x) ^ c
    return acc


def rs_decode(codeword: bytes) -> tuple[bytes, int]:
    """Strip parity, correcting up to 16 symbol errors per block.

    Returns (data, total corrected symbols); raises RsDecodeFailure when
    a block is beyond repair.
    """
    if not codeword:
        return b"", 0
    n = len(codeword)
    nblocks = -(-n // BLOCK_TOTAL)
    if n <= BLOCK_PARITY * nblocks:
        raise RsDecodeFailure("codeword shorter than its parity")
    arr = np.frombuffer(codeword, dtype=np.uint8)
    out = bytearray()
    corrected = 0
    for i in range(nblocks):
        block = arr[i * BLOCK_TOTAL : (i + 1) * BLOCK_TOTAL]
        if len(block) <= BLOCK_PARITY:
            raise RsDecodeFailure("trailing block shorter than its parity")
        data, nerr = _decode_block(block)
        out += data.tobytes()
        corrected += nerr
    return bytes(out), corrected
