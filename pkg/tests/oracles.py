"""Independent reference implementations used only by the tests.

Plain Python loops, no numpy kernels and no code shared with the package.
"""
from __future__ import annotations

import math
from fractions import Fraction


def factorize(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def mobius(n: int) -> int:
    f = factorize(n)
    if any(e > 1 for e in f.values()):
        return 0
    return -1 if len(f) % 2 else 1


def mangoldt(n: int) -> float:
    f = factorize(n)
    return math.log(next(iter(f))) if len(f) == 1 else 0.0


def mobius_range(n_max: int) -> list[int]:
    """mu(0..n_max) by a linear sieve over smallest prime factors."""
    spf = list(range(n_max + 1))
    for i in range(2, math.isqrt(n_max) + 1):
        if spf[i] == i:
            for j in range(i * i, n_max + 1, i):
                if spf[j] == j:
                    spf[j] = i
    mu = [0] * (n_max + 1)
    if n_max >= 1:
        mu[1] = 1
    for n in range(2, n_max + 1):
        p = spf[n]
        m = n // p
        mu[n] = 0 if m % p == 0 else -mu[m]
    return mu


def primes_upto(n: int) -> list[int]:
    flags = bytearray([1]) * (n + 1)
    flags[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(n) + 1):
        if flags[p]:
            flags[p * p::p] = bytearray(len(range(p * p, n + 1, p)))
    return [i for i in range(n + 1) if flags[i]]


def chebyshev_psi(x: int) -> float:
    """sum over prime powers p^k <= x of log p, from an independent prime list."""
    terms = []
    for p in primes_upto(x):
        k = int(math.log(x) / math.log(p)) + 1
        while p ** k > x:
            k -= 1
        terms.append(k * math.log(p))
    return math.fsum(terms)


def mertens(x: int) -> int:
    return sum(mobius(n) for n in range(1, x + 1))


def harmonic_fraction(N: int) -> Fraction:
    return sum((Fraction(1, n) for n in range(1, N + 1)), Fraction(0))


def log_density(members, N: int) -> float:
    return math.fsum(1.0 / n for n in members if n <= N) / math.log(N)


def running_mean(values, N: int) -> float:
    """(1/N) * sum_{n=1..N} values[n] in exact rational arithmetic."""
    return float(sum((Fraction(values[n]) for n in range(1, N + 1)), Fraction(0)) / N)
