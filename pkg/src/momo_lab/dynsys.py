"""Concrete zero-entropy observables ``n -> f(T^n x)`` and block constructions.

Every system is a vectorised callable on int64 index arrays returning
complex128 values with modulus at most ``bound``. ``eval`` is the scalar
convenience form.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .arith import MultipleBase, bfree_mask
from .errors import DomainError, HorizonError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ObservableSystem:
    bound: float = 1.0

    def __call__(self, n) -> np.ndarray:
        raise NotImplementedError

    def eval(self, n: int) -> complex:
        return complex(self(np.array([n], dtype=np.int64))[0])

    def describe(self) -> str:
        return type(self).__name__


class Constant(ObservableSystem):
    def __init__(self, value: complex):
        self.value = complex(value)
        self.bound = abs(self.value)

    def __call__(self, n):
        return np.full(np.shape(n), self.value, dtype=np.complex128)

    def describe(self):
        return f"constant c={self.value!r}"


class Rotation(ObservableSystem):
    """Character ``e(m * (x0 + n * alpha))`` of the circle rotation by ``alpha``.

    The phase is reduced mod 1 in ``np.longdouble`` before exponentiating,
    which keeps the phase error near 1e-10 at ``n ~ 1e9`` on x86-64.
    """

    def __init__(self, alpha: float, x0: float = 0.0, m: int = 1):
        self.alpha = float(alpha)
        self.x0 = float(x0)
        self.m = int(m)
        self.bound = 1.0
        ld = np.longdouble
        step = ld(self.m) * ld(self.alpha)
        self._step = step - np.floor(step)
        start = ld(self.m) * ld(self.x0)
        self._start = start - np.floor(start)

    def phase(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        p = n.astype(np.longdouble) * self._step
        p = p - np.floor(p) + self._start
        p = p - np.floor(p)
        return p.astype(np.float64)

    def __call__(self, n):
        if self.m == 0:
            return np.ones(np.shape(n), dtype=np.complex128)
        return np.exp(2j * np.pi * self.phase(n))

    def describe(self):
        return f"rotation alpha={self.alpha!r} x0={self.x0!r} m={self.m}"


class ThueMorse(ObservableSystem):
    """``w0`` or ``w1`` according to the Thue-Morse bit ``t(n + offset)``."""

    def __init__(self, offset: int = 0, w0: complex = 1.0, w1: complex = -1.0):
        if abs(w0) > 1 or abs(w1) > 1:
            raise DomainError("|w0|, |w1| must be <= 1")
        if offset < 0:
            raise DomainError("offset must be >= 0")
        self.offset = int(offset)
        self.w0, self.w1 = complex(w0), complex(w1)
        self.bound = max(abs(self.w0), abs(self.w1))

    def bits(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        if n.size and n.min() + self.offset < 0:
            raise DomainError("Thue-Morse index must be >= 0")
        return _kernels.thue_morse_bits((n + self.offset).astype(np.uint64))

    def __call__(self, n):
        return np.where(self.bits(n) == 1, self.w1, self.w0).astype(np.complex128)

    def describe(self):
        return f"thuemorse offset={self.offset} w0={self.w0!r} w1={self.w1!r}"


class BFreeIndicator(ObservableSystem):
    """Indicator of the B-free integers, tabulated up to ``horizon``."""

    def __init__(self, base: MultipleBase, horizon: int):
        self.base = base
        self.horizon = int(horizon)
        self.bound = 1.0
        self._mask = bfree_mask(base, self.horizon)

    def __call__(self, n):
        n = np.asarray(n, dtype=np.int64)
        if n.size and (n.min() < 1 or n.max() > self.horizon):
            raise HorizonError(f"query outside [1, {self.horizon}]")
        return self._mask[n].astype(np.complex128)

    def describe(self):
        return f"bfree base={self.base.describe() or 'none'} horizon={self.horizon}"


def make_rotation(alpha: float, x0: float, m: int) -> Rotation:
    return Rotation(alpha, x0, m)


def make_thue_morse(offset: int, w0: complex, w1: complex) -> ThueMorse:
    return ThueMorse(offset, w0, w1)


def make_bfree(base: MultipleBase, table_horizon: int) -> BFreeIndicator:
    return BFreeIndicator(base, table_horizon)


# ---------------------------------------------------------------- blocks


class BlockPartition:
    """Strictly increasing ``b_1 = 1 < b_2 < ...``; block k is ``[b_k, b_{k+1})``.

    ``gap_floor[k-1] = min_{j >= k} (b_{j+1} - b_j)`` is the finite-scale
    witness that the gaps grow. A ``UserWarning`` is issued when the last
    gap is below ``min_gap``.
    """

    def __init__(self, b: Sequence[int], min_gap: int | None = None):
        b = np.asarray(b, dtype=np.int64)
        if b.ndim != 1 or b.shape[0] < 2:
            raise DomainError("a partition needs at least two boundaries")
        if b[0] != 1:
            raise DomainError("b_1 must be 1")
        gaps = np.diff(b)
        if np.any(gaps <= 0):
            raise DomainError("boundaries must be strictly increasing")
        b.setflags(write=False)
        self.b = b
        floor = np.minimum.accumulate(gaps[::-1])[::-1].copy()
        floor.setflags(write=False)
        self.gap_floor = floor
        self.min_gap = min_gap
        if min_gap is not None and floor[-1] < min_gap:
            warnings.warn(
                f"final gap {int(floor[-1])} below minimum {min_gap}; "
                "gaps do not look unbounded at this scale",
                UserWarning,
                stacklevel=2,
            )

    @classmethod
    def squares(cls, K: int, **kw) -> "BlockPartition":
        """``b_k = k^2`` for ``k = 1..K+1`` (K blocks)."""
        return cls((np.arange(1, K + 2, dtype=np.int64)) ** 2, **kw)

    @classmethod
    def arithmetic(cls, step: int, K: int, **kw) -> "BlockPartition":
        return cls(1 + step * np.arange(K + 1, dtype=np.int64), **kw)

    @property
    def num_blocks(self) -> int:
        return self.b.shape[0] - 1

    @property
    def end(self) -> int:
        """First integer not covered (``b_{K+1}``)."""
        return int(self.b[-1])

    def bounds(self, k: int) -> tuple[int, int]:
        """``(b_k, b_{k+1})`` for 1-based ``k``."""
        if not 1 <= k <= self.num_blocks:
            raise HorizonError(f"block {k} outside 1..{self.num_blocks}")
        return int(self.b[k - 1]), int(self.b[k])

    def block_of(self, n) -> np.ndarray:
        """1-based block index of each ``n``."""
        n = np.asarray(n, dtype=np.int64)
        if n.size and (n.min() < self.b[0] or n.max() >= self.b[-1]):
            raise HorizonError(f"index outside [{self.b[0]}, {self.b[-1]})")
        return np.searchsorted(self.b, n, side="right")

    def gaps_nondecreasing_floor(self) -> bool:
        return bool(np.all(np.diff(self.gap_floor) >= 0))


class BlockOrbit(ObservableSystem):
    """Orbit restarted on every block: ``n -> systems[k](n - b_k)``."""

    def __init__(self, partition: BlockPartition, systems: Sequence[ObservableSystem]):
        if len(systems) != partition.num_blocks:
            raise DomainError(
                f"need {partition.num_blocks} block systems, got {len(systems)}"
            )
        self.partition = partition
        self.systems = list(systems)
        self.bound = max(s.bound for s in self.systems)

    def __call__(self, n):
        n = np.asarray(n, dtype=np.int64)
        k = self.partition.block_of(n)
        out = np.empty(n.shape, dtype=np.complex128)
        for kk in np.unique(k):
            sel = k == kk
            out[sel] = self.systems[kk - 1](n[sel] - self.partition.b[kk - 1])
        return out

    def describe(self):
        return f"blocks K={self.partition.num_blocks}"


def make_block_orbit(partition: BlockPartition, block_systems) -> BlockOrbit:
    return BlockOrbit(partition, block_systems)


def rotation_block_systems(alpha: float, m: int, K: int, seed: int) -> list[Rotation]:
    """K rotations sharing ``alpha`` with starting points drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    return [Rotation(alpha, float(x), m) for x in rng.random(K)]


# ---------------------------------------------------------------- phases


@dataclass(frozen=True)
class PhaseSigma3:
    """A cube root of unity ``e^{2 pi i j / 3}``."""

    j: int

    def __post_init__(self):
        if self.j not in (0, 1, 2):
            raise DomainError("j must be 0, 1 or 2")

    @property
    def value(self) -> complex:
        return cmath.exp(2j * math.pi * self.j / 3)


CONE_TOL = 1e-12


def align_to_cone(z: complex) -> PhaseSigma3:
    """Smallest ``j`` with ``arg(e^{2 pi i j/3} z)`` in ``[-pi/3, pi/3]``."""
    z = complex(z)
    if z == 0:
        return PhaseSigma3(0)
    theta = math.atan2(z.imag, z.real)
    for j in (0, 1, 2):
        # argument of e^{2 pi i j/3} z, wrapped to [-pi, pi)
        arg = (theta + 2 * math.pi * j / 3 + math.pi) % (2 * math.pi) - math.pi
        if abs(arg) <= math.pi / 3 + CONE_TOL:
            return PhaseSigma3(j)
    raise AssertionError("three sectors of width 2pi/3 cover the circle")


# ---------------------------------------------------------------- descriptors


def _parse_kv(tokens):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise DomainError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _real(text: str) -> float:
    if text in ("golden", "golden_conjugate"):
        return GOLDEN
    if text.startswith("sqrt"):
        return math.sqrt(float(text[4:].strip("()"))) % 1.0
    return float(text)


def parse_system(text: str) -> ObservableSystem:
    """Build a system from ``"<kind> key=value ..."``.

    Kinds and keys:

    * ``rotation alpha=<real|golden> x0=<real> m=<int>``
    * ``thuemorse offset=<int> w0=<complex> w1=<complex>``
    * ``bfree base=<g1,g2,...|squares> horizon=<int>``
    * ``blocks partition=squares|arith K=<int> [step=<int>] alpha=... m=... seed=<int>``
      (rotation restarted at seeded random points on each block)
    * ``constant c=<complex>``
    """
    parts = text.split()
    if not parts:
        raise DomainError("empty system descriptor")
    kind, kv = parts[0].lower(), _parse_kv(parts[1:])
    try:
        if kind == "rotation":
            return Rotation(_real(kv.get("alpha", "golden")), float(kv.get("x0", 0)),
                            int(kv.get("m", 1)))
        if kind == "thuemorse":
            return ThueMorse(int(kv.get("offset", 0)), complex(kv.get("w0", "1")),
                             complex(kv.get("w1", "-1")))
        if kind == "bfree":
            horizon = int(kv["horizon"])
            return BFreeIndicator(MultipleBase.parse(kv.get("base", ""), horizon), horizon)
        if kind == "blocks":
            K = int(kv.get("K", 100))
            if kv.get("partition", "squares") == "squares":
                part = BlockPartition.squares(K)
            else:
                part = BlockPartition.arithmetic(int(kv.get("step", 10)), K)
            systems = rotation_block_systems(_real(kv.get("alpha", "golden")),
                                             int(kv.get("m", 1)), K, int(kv.get("seed", 0)))
            return BlockOrbit(part, systems)
        if kind == "constant":
            return Constant(complex(kv.get("c", "1")))
    except KeyError as exc:
        raise DomainError(f"{kind}: missing key {exc.args[0]}") from None
    raise DomainError(f"unknown system kind {kind!r}")
