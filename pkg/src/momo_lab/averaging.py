"""Cesaro and logarithmic averages, density readings, summation by parts.

A *sequence* here is a vectorised callable: given an int64 array of
indices ``n >= 1`` it returns the values ``a_n`` (real or complex). Values
are pulled in chunks and accumulated with compensated summation, so one
pass serves every checkpoint. ``log`` is the natural logarithm.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, HorizonError

SequenceFn = Callable[[np.ndarray], np.ndarray]
CHUNK = 1 << 16


def pull(a: SequenceFn, lo: int, hi: int) -> np.ndarray:
    """Values ``a_n`` for ``lo <= n < hi`` as a 1-d array."""
    n = np.arange(lo, hi, dtype=np.int64)
    v = np.asarray(a(n))
    if v.ndim == 0:
        v = np.full(n.shape, v)
    return v


def from_array(values: np.ndarray) -> SequenceFn:
    """Sequence backed by an array indexed by ``n`` (``values[0]`` unused)."""
    values = np.asarray(values)
    return lambda n: values[n]


def constant(c) -> SequenceFn:
    return lambda n: np.full(np.shape(n), c)


def harmonic(N: int) -> float:
    """H_N = 1 + 1/2 + ... + 1/N, correctly rounded."""
    return math.fsum(1.0 / np.arange(1, N + 1, dtype=np.float64)) if N >= 1 else 0.0


class RunningSum:
    """Compensated running sums of a complex stream, fed chunk by chunk."""

    def __init__(self):
        self._re = (0.0, 0.0)
        self._im = (0.0, 0.0)

    def feed(self, chunk: np.ndarray) -> np.ndarray:
        chunk = np.asarray(chunk)
        re, s, c = _kernels.neumaier_cumsum(np.real(chunk), *self._re)
        self._re = (s, c)
        if np.iscomplexobj(chunk):
            im, s, c = _kernels.neumaier_cumsum(np.imag(chunk), *self._im)
            self._im = (s, c)
            return re + 1j * im
        return re

    @property
    def total(self) -> complex:
        return complex(self._re[0] + self._re[1], self._im[0] + self._im[1])


def prefix_sums(values: np.ndarray) -> np.ndarray:
    """Compensated prefix sums with a leading zero: ``out[k] = sum(values[:k])``."""
    values = np.asarray(values)
    out = np.zeros(values.shape[0] + 1, dtype=np.result_type(values, np.float64))
    out[1:] = RunningSum().feed(values)
    return out


def iter_chunks(a: SequenceFn, N: int, chunk: int = CHUNK) -> Iterator[tuple[int, np.ndarray]]:
    for lo in range(1, N + 1, chunk):
        hi = min(lo + chunk, N + 1)
        yield lo, pull(a, lo, hi)


def _stream_sum(a: SequenceFn, N: int, weight: Callable | None = None) -> complex:
    acc = RunningSum()
    for lo, v in iter_chunks(a, N):
        if weight is not None:
            v = v * weight(np.arange(lo, lo + v.shape[0], dtype=np.float64))
        acc.feed(v.astype(np.complex128))
    return acc.total


def cesaro_avg(a: SequenceFn, N: int) -> complex:
    """(1/N) * sum_{n<=N} a_n."""
    if N < 1:
        raise DomainError("N must be >= 1")
    return _stream_sum(a, N) / N


def log_avg(a: SequenceFn, N: int) -> complex:
    """(1/log N) * sum_{n<=N} a_n / n."""
    if N < 2:
        raise DomainError("logarithmic average needs N >= 2")
    return _stream_sum(a, N, lambda n: 1.0 / n) / math.log(N)


def summation_by_parts(a: SequenceFn, N: int) -> tuple[complex, complex]:
    """Both sides of the Abel summation identity.

    ``lhs = sum_{n<=N} a_n/n`` and
    ``rhs = sum_{n<=N-1} s_n/(n(n+1)) + s_N/N`` with ``s_n`` the partial
    sums. The two sides are accumulated along separate paths.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    lhs = RunningSum()
    rhs = RunningSum()
    partial = RunningSum()
    s_N = 0j
    for lo, v in iter_chunks(a, N):
        v = v.astype(np.complex128)
        n = np.arange(lo, lo + v.shape[0], dtype=np.float64)
        lhs.feed(v / n)
        s = partial.feed(v)
        s_N = complex(s[-1])
        inner = n < N
        rhs.feed(s[inner] / (n[inner] * (n[inner] + 1.0)))
    return lhs.total, rhs.total + s_N / N


# ---------------------------------------------------------------- index sets


class IndexSet:
    """A subset of ``[1, horizon]`` stored as a boolean mask (index 0 unused).

    Immutable; iteration is in increasing order.
    """

    __slots__ = ("_mask", "_elements")

    def __init__(self, mask: np.ndarray):
        mask = np.array(mask, dtype=bool)
        if mask.ndim != 1 or mask.shape[0] < 1:
            raise ValueError("mask must be 1-d with length horizon+1")
        mask[0] = False
        mask.setflags(write=False)
        self._mask = mask
        self._elements = None

    @classmethod
    def from_elements(cls, elements, horizon: int) -> "IndexSet":
        el = np.asarray(list(elements) if not isinstance(elements, np.ndarray) else elements,
                        dtype=np.int64)
        if el.size and (el.min() < 1 or el.max() > horizon):
            raise HorizonError("elements must lie in [1, horizon]")
        mask = np.zeros(horizon + 1, dtype=bool)
        mask[el] = True
        return cls(mask)

    @classmethod
    def full(cls, horizon: int) -> "IndexSet":
        return cls(np.ones(horizon + 1, dtype=bool))

    @classmethod
    def empty(cls, horizon: int) -> "IndexSet":
        return cls(np.zeros(horizon + 1, dtype=bool))

    @classmethod
    def from_intervals(cls, intervals, horizon: int) -> "IndexSet":
        mask = np.zeros(horizon + 1, dtype=bool)
        for lo, hi in intervals:
            if lo < 1 or hi > horizon or lo > hi:
                raise HorizonError(f"bad interval [{lo}, {hi}]")
            mask[lo:hi + 1] = True
        return cls(mask)

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def horizon(self) -> int:
        return self._mask.shape[0] - 1

    @property
    def elements(self) -> np.ndarray:
        if self._elements is None:
            el = np.flatnonzero(self._mask).astype(np.int64)
            el.setflags(write=False)
            self._elements = el
        return self._elements

    def __len__(self) -> int:
        return int(self.elements.shape[0])

    def __iter__(self):
        return (int(x) for x in self.elements)

    def __contains__(self, n) -> bool:
        n = int(n)
        return 1 <= n <= self.horizon and bool(self._mask[n])

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexSet):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self._mask, other._mask)

    def __and__(self, other: "IndexSet") -> "IndexSet":
        return IndexSet(self._mask & other._mask)

    def __or__(self, other: "IndexSet") -> "IndexSet":
        return IndexSet(self._mask | other._mask)

    def __repr__(self) -> str:
        return f"IndexSet(horizon={self.horizon}, size={len(self)})"

    def contains(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        ok = (n >= 1) & (n <= self.horizon)
        out = np.zeros(n.shape, dtype=bool)
        out[ok] = self._mask[n[ok]]
        return out

    def restrict(self, lo: int, hi: int) -> "IndexSet":
        """Members in ``[lo, hi]``, same horizon."""
        mask = np.zeros_like(self._mask)
        lo, hi = max(lo, 1), min(hi, self.horizon)
        if lo <= hi:
            mask[lo:hi + 1] = self._mask[lo:hi + 1]
        return IndexSet(mask)

    def count_upto(self, N: int) -> int:
        return int(np.count_nonzero(self._mask[:N + 1]))

    def intervals(self) -> list[tuple[int, int]]:
        """Maximal runs ``[lo, hi]`` (inclusive) of consecutive members."""
        m = self._mask.astype(np.int8)
        d = np.diff(np.concatenate([[0], m, [0]]))
        starts = np.flatnonzero(d == 1)
        stops = np.flatnonzero(d == -1) - 1
        return [(int(a), int(b)) for a, b in zip(starts, stops)]


def natural_density_at(S: IndexSet, N: int) -> float:
    """|S intersected with [1, N]| / N."""
    if N < 1 or N > S.horizon:
        raise HorizonError(f"N={N} outside [1, {S.horizon}]")
    return S.count_upto(N) / N


def log_density_readings(S: IndexSet, checkpoints: Sequence[int]) -> np.ndarray:
    """``(1/log N) * sum_{n in S, n <= N} 1/n`` at every checkpoint.

    The harmonic mass is accumulated once up to the largest checkpoint.
    """
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0:
        return np.zeros(0)
    if cps.min() < 2:
        raise DomainError("log density needs N >= 2")
    top = int(cps.max())
    if top > S.horizon:
        raise HorizonError(f"N={top} beyond horizon {S.horizon}")
    n = np.arange(top + 1, dtype=np.float64)
    n[0] = 1.0
    mass = prefix_sums(np.where(S.mask[:top + 1], 1.0 / n, 0.0))
    # mass[k] sums indices < k
    return mass[cps + 1] / np.log(cps.astype(np.float64))


def log_density_at(S: IndexSet, N: int) -> float:
    return float(log_density_readings(S, [N])[0])


def log_density_profile(S: IndexSet, N: int | None = None) -> np.ndarray:
    """Readings at every ``2 <= M <= N`` (index ``M``; entries 0 and 1 are nan)."""
    N = S.horizon if N is None else N
    n = np.arange(N + 1, dtype=np.float64)
    n[0] = 1.0
    mass = prefix_sums(np.where(S.mask[:N + 1], 1.0 / n, 0.0))[1:]
    out = np.full(N + 1, np.nan)
    out[2:] = mass[2:] / np.log(np.arange(2, N + 1, dtype=np.float64))
    return out


def log_spaced_checkpoints(lo: int, hi: int, count: int) -> list[int]:
    """About ``count`` geometrically spaced integers from ``lo`` to ``hi`` inclusive."""
    lo = max(lo, 2)
    if hi < lo:
        raise DomainError("hi must be >= lo")
    raw = np.geomspace(lo, hi, max(count, 2))
    pts = sorted({int(round(x)) for x in raw} | {hi})
    return [p for p in pts if lo <= p <= hi]


# ---------------------------------------------------------------- reports


@dataclass
class AveragingReport:
    checkpoints: np.ndarray
    cesaro_values: np.ndarray
    log_values: np.ndarray

    CSV_COLUMNS = ("N", "re_cesaro", "im_cesaro", "re_log", "im_log")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_COLUMNS)
            for N, c, l in zip(self.checkpoints, self.cesaro_values, self.log_values):
                w.writerow([int(N), repr(float(c.real)), repr(float(c.imag)),
                            repr(float(l.real)), repr(float(l.imag))])

    @classmethod
    def from_csv(cls, path) -> "AveragingReport":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != cls.CSV_COLUMNS:
            raise ValueError(f"unexpected columns {rows[0]}")
        body = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, 5)
        return cls(body[:, 0].astype(np.int64), body[:, 1] + 1j * body[:, 2],
                   body[:, 3] + 1j * body[:, 4])


def averaging_report(a: SequenceFn, checkpoints: Sequence[int]) -> AveragingReport:
    """Cesaro and logarithmic averages of ``a`` at each checkpoint, one pass."""
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0 or np.any(np.diff(cps) < 0):
        raise DomainError("checkpoints must be non-empty and non-decreasing")
    if cps[0] < 2:
        raise DomainError("checkpoints must be >= 2")
    N = int(cps[-1])
    plain, harm = RunningSum(), RunningSum()
    ces = np.empty(cps.shape[0], dtype=np.complex128)
    lg = np.empty(cps.shape[0], dtype=np.complex128)
    for lo, v in iter_chunks(a, N):
        v = v.astype(np.complex128)
        hi = lo + v.shape[0]
        n = np.arange(lo, hi, dtype=np.float64)
        sp = plain.feed(v)
        sh = harm.feed(v / n)
        sel = (cps >= lo) & (cps < hi)
        idx = cps[sel] - lo
        ces[sel] = sp[idx] / cps[sel]
        lg[sel] = sh[idx] / np.log(cps[sel].astype(np.float64))
    return AveragingReport(cps, ces, lg)


def transfer_diagnostic(a: SequenceFn, good: IndexSet, N: int) -> tuple[float, float, float]:
    """Three terms bounding ``|log_avg(a, N)|`` via Cesaro averages.

    With ``E_n`` the Cesaro mean of ``a`` at ``n`` and ``C = max_{n<=N} |E_n|``,
    returns ``C/log N``, ``(C/log N) * sum_{n<N, n not in good} 1/n`` and
    ``|(1/log N) * sum_{n<N, n in good} E_n/(n+1)|``. The inner sums stop at
    ``N-1`` to match the exact identity
    ``sum_{n<=N} a_n/n = E_N + sum_{n<=N-1} E_n/(n+1)``.
    """
    if N < 2:
        raise DomainError("N must be >= 2")
    if N > good.horizon:
        raise HorizonError(f"N={N} beyond horizon {good.horizon}")
    partial = RunningSum()
    bad_mass = RunningSum()
    good_sum = RunningSum()
    C = 0.0
    for lo, v in iter_chunks(a, N):
        v = v.astype(np.complex128)
        n = np.arange(lo, lo + v.shape[0], dtype=np.int64)
        E = partial.feed(v) / n
        C = max(C, float(np.max(np.abs(E))))
        inner = n < N
        member = good.mask[n] & inner
        bad_mass.feed(np.where(~good.mask[n] & inner, 1.0 / n, 0.0))
        good_sum.feed(np.where(member, E / (n + 1.0), 0.0))
    logN = math.log(N)
    return C / logN, C / logN * bad_mass.total.real, abs(good_sum.total) / logN
