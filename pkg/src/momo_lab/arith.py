"""Segmented sieves for mu, Lambda, square-free and B-free indicators."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _kernels
from .averaging import IndexSet
from .errors import CapacityError, DomainError, HorizonError

DEFAULT_BLOCK_SIZE = 1 << 18
# mu (1 byte) + Lambda (8 bytes) per integer, plus prefix caches (16 bytes)
BYTES_PER_N = 25
DEFAULT_MEMORY_BUDGET = 8 * 2**30

CACHE_MAGIC = b"MOMOTBL\x00"
CACHE_VERSION = 1
_HEADER = struct.Struct("<8sIQ")


def small_primes(limit: int) -> np.ndarray:
    """Primes ``p <= limit`` by a plain Eratosthenes sieve."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if flags[p]:
            flags[p * p::p] = False
    return np.flatnonzero(flags).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ArithTable:
    """mu and Lambda on ``[0, n_max]``; index 0 holds 0 in both arrays.

    Arrays are read-only, so a table can be shared between threads.
    """

    n_max: int
    mu: np.ndarray
    lam: np.ndarray

    @property
    def sqfree(self) -> np.ndarray:
        return self.mu != 0

    def _check(self, n):
        n = np.asarray(n, dtype=np.int64)
        if n.size and (n.min() < 1 or n.max() > self.n_max):
            raise HorizonError(f"index outside [1, {self.n_max}]")
        return n

    def mobius(self, n):
        """Vectorised lookup of mu(n)."""
        return self.mu[self._check(n)]

    def mangoldt(self, n):
        return self.lam[self._check(n)]

    @cached_property
    def mertens_array(self) -> np.ndarray:
        """``M[x]`` for ``0 <= x <= n_max`` (exact int64)."""
        out = np.cumsum(self.mu, dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def psi_array(self) -> np.ndarray:
        out, _, _ = _kernels.neumaier_cumsum(self.lam)
        out.setflags(write=False)
        return out

    def mertens_of(self, x):
        """Vectorised M(floor(x)) for integer arrays with ``0 <= x <= n_max``."""
        x = np.asarray(x, dtype=np.int64)
        if x.size and (x.min() < 0 or x.max() > self.n_max):
            raise HorizonError(f"argument outside [0, {self.n_max}]")
        return self.mertens_array[x]


def build_arith_table(
    n_max: int,
    block_size: int = DEFAULT_BLOCK_SIZE,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> ArithTable:
    """Sieve mu and Lambda up to ``n_max`` in independent blocks.

    The result does not depend on ``block_size``. Raises
    :class:`CapacityError` when ``n_max`` does not fit ``memory_budget`` bytes.
    """
    if n_max < 1 or block_size < 1:
        raise DomainError("n_max and block_size must be positive")
    if n_max * BYTES_PER_N > memory_budget:
        raise CapacityError(
            f"n_max={n_max} needs ~{n_max * BYTES_PER_N} bytes, budget is {memory_budget}"
        )
    primes = small_primes(math.isqrt(n_max))
    mu = np.empty(n_max + 1, dtype=np.int8)
    lam = np.empty(n_max + 1, dtype=np.float64)
    for lo in range(0, n_max + 1, block_size):
        hi = min(lo + block_size, n_max + 1)
        mu[lo:hi], lam[lo:hi] = _kernels.sieve_block(lo, hi, primes)
    mu.setflags(write=False)
    lam.setflags(write=False)
    return ArithTable(n_max, mu, lam)


def mertens(table: ArithTable, x: int) -> int:
    """M(x) = sum of mu(n) for n <= x."""
    if not 1 <= x <= table.n_max:
        raise HorizonError(f"x={x} outside [1, {table.n_max}]")
    return int(table.mertens_array[x])


def chebyshev_psi(table: ArithTable, x: int) -> float:
    """psi(x) = sum of Lambda(n) for n <= x, compensated."""
    if not 1 <= x <= table.n_max:
        raise HorizonError(f"x={x} outside [1, {table.n_max}]")
    return float(table.psi_array[x])


# ---------------------------------------------------------------- cache file


def save_table(table: ArithTable, path) -> None:
    """Write header, 2-bit packed mu codes and float64 Lambda values."""
    n = table.n_max
    codes = table.mu[1:].astype(np.int16)
    codes = np.where(codes < 0, 2, codes).astype(np.uint8)
    pad = (-n) % 4
    codes = np.concatenate([codes, np.zeros(pad, dtype=np.uint8)]).reshape(-1, 4)
    packed = codes[:, 0] | (codes[:, 1] << 2) | (codes[:, 2] << 4) | (codes[:, 3] << 6)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, n))
        fh.write(packed.astype(np.uint8).tobytes())
        fh.write(table.lam[1:].astype("<f8").tobytes())


def load_table(path) -> ArithTable:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated cache header")
    magic, version, n = _HEADER.unpack_from(data)
    if magic != CACHE_MAGIC:
        raise ValueError("not a momo_lab table cache")
    if version != CACHE_VERSION:
        raise ValueError(f"unsupported cache version {version}")
    nbytes = (n + 3) // 4
    expect = _HEADER.size + nbytes + 8 * n
    if len(data) != expect:
        raise ValueError(f"cache size {len(data)} != expected {expect}")
    packed = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=_HEADER.size)
    codes = np.stack([(packed >> s) & 3 for s in (0, 2, 4, 6)], axis=1).reshape(-1)[:n]
    mu = np.zeros(n + 1, dtype=np.int8)
    mu[1:] = np.where(codes == 2, -1, codes).astype(np.int8)
    lam = np.zeros(n + 1, dtype=np.float64)
    lam[1:] = np.frombuffer(data, dtype="<f8", count=n, offset=_HEADER.size + nbytes)
    mu.setflags(write=False)
    lam.setflags(write=False)
    return ArithTable(int(n), mu, lam)


# ---------------------------------------------------------------- B-free sets


@dataclass(frozen=True)
class MultipleBase:
    """Finite set of generators ``>= 2``, kept sorted and duplicate-free.

    Infinite descriptions (``prime_squares``) are truncated at a bound;
    generators above the query range never matter for membership.
    """

    generators: tuple[int, ...] = ()

    def __post_init__(self):
        gens = sorted({int(g) for g in self.generators})
        if gens and gens[0] < 2:
            raise DomainError("generators must be >= 2")
        object.__setattr__(self, "generators", tuple(gens))

    @classmethod
    def prime_squares(cls, n_max: int) -> "MultipleBase":
        return cls(tuple(int(p) * int(p) for p in small_primes(math.isqrt(n_max))))

    @classmethod
    def parse(cls, text: str, n_max: int | None = None) -> "MultipleBase":
        """``"2,3,7"``, ``""`` (empty base) or ``"squares"`` (needs ``n_max``)."""
        text = text.strip()
        if text in ("squares", "prime_squares"):
            if n_max is None:
                raise DomainError("'squares' base needs n_max")
            return cls.prime_squares(n_max)
        if not text or text == "none":
            return cls()
        return cls(tuple(int(t) for t in text.split(",") if t.strip()))

    def truncated(self, n_max: int) -> "MultipleBase":
        return MultipleBase(tuple(g for g in self.generators if g <= n_max))

    def primitive(self) -> "MultipleBase":
        """Drop every generator that is a multiple of a smaller one."""
        kept: list[int] = []
        for g in self.generators:
            if all(g % h for h in kept):
                kept.append(g)
        return MultipleBase(tuple(kept))

    def __iter__(self) -> Iterable[int]:
        return iter(self.generators)

    def __len__(self) -> int:
        return len(self.generators)

    def describe(self) -> str:
        return ",".join(map(str, self.generators))


def bfree_mask(base: MultipleBase, n_max: int) -> np.ndarray:
    mask = np.ones(n_max + 1, dtype=bool)
    mask[0] = False
    for g in base.truncated(n_max).primitive():
        mask[g::g] = False
    return mask


def bfree_set(base: MultipleBase, n_max: int) -> IndexSet:
    """Integers in ``[1, n_max]`` with no divisor among the generators."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    return IndexSet(bfree_mask(base, n_max))
