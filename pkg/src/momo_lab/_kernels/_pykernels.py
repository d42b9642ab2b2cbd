"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``MOMO_LAB_PURE=1`` is set. Signatures match ``_ckernels``.
"""
import math

import numpy as np

_CUMSUM_BLOCK = 4096


def sieve_block(lo, hi, primes):
    """Return ``(mu, lam)`` for the integers ``lo <= n < hi``.

    ``primes`` must contain every prime ``p`` with ``p*p < hi``.
    """
    size = hi - lo
    mu = np.ones(size, dtype=np.int8)
    lam = np.zeros(size, dtype=np.float64)
    # product of the distinct sieving primes dividing n
    rad = np.ones(size, dtype=np.int64)
    for p in primes:
        p = int(p)
        if p * p >= hi:
            break
        start = (-lo) % p
        mu[start::p] *= -1
        rad[start::p] *= p
        p2 = p * p
        mu[(-lo) % p2::p2] = 0
        logp = math.log(p)
        pk = p
        while pk < hi:
            if pk >= lo:
                lam[pk - lo] = logp
            pk *= p
    n = np.arange(lo, hi, dtype=np.int64)
    # a square-free n with rad != n has exactly one prime factor above the sieve limit
    big = (rad != n) & (mu != 0)
    mu[big] = -mu[big]
    prime = (rad == 1) & (n > 1)
    lam[prime] = np.log(n[prime].astype(np.float64))
    if lo == 0 and size > 0:
        mu[0] = 0
    return mu, lam


def neumaier_cumsum(x, s=0.0, c=0.0):
    """Compensated running sums of ``x`` continuing from the carry ``(s, c)``.

    Returns ``(prefix, s, c)``; ``prefix[i]`` approximates ``s + c + sum(x[:i+1])``.
    Within a block of ``_CUMSUM_BLOCK`` the running sum is carried in
    ``np.longdouble`` on top of an exactly rounded block offset.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for start in range(0, x.shape[0], _CUMSUM_BLOCK):
        blk = x[start:start + _CUMSUM_BLOCK]
        base = np.longdouble(s) + np.longdouble(c)
        out[start:start + blk.shape[0]] = base + np.cumsum(blk, dtype=np.longdouble)
        v = math.fsum(blk)
        # rounding residue of the block sum, kept in the carry
        c += math.fsum(np.append(blk, -v))
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return out, s, c


def thue_morse_bits(n):
    """Parity of the binary digit sum of each entry of ``n`` (non-negative)."""
    x = np.asarray(n, dtype=np.uint64).copy()
    for shift in (32, 16, 8, 4, 2, 1):
        x ^= x >> np.uint64(shift)
    return (x & np.uint64(1)).astype(np.uint8)
