"""Orthogonality statistics: weighted averages, strong MOMO, window moments."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .averaging import RunningSum, SequenceFn, harmonic, prefix_sums, pull
from .dynsys import BlockPartition, ObservableSystem
from .errors import DomainError

Phi = Literal["identity", "square"]
Normalization = Literal["cesaro", "logarithmic"]
WeightFn = Callable[[np.ndarray], np.ndarray]

CHUNK = 1 << 16


def zero_weights(n):
    return np.zeros(np.shape(n))


def product_sequence(weights: WeightFn, system: ObservableSystem) -> SequenceFn:
    """``n -> weights(n) * system(n)``."""
    return lambda n: weights(n) * system(n)


def _weighted_sum(system, weights, N, logarithmic=False) -> complex:
    acc = RunningSum()
    for lo in range(1, N + 1, CHUNK):
        hi = min(lo + CHUNK, N + 1)
        v = pull(weights, lo, hi) * system(np.arange(lo, hi, dtype=np.int64))
        if logarithmic:
            v = v / np.arange(lo, hi, dtype=np.float64)
        acc.feed(v.astype(np.complex128))
    return acc.total


def weighted_cesaro(system: ObservableSystem, weights: WeightFn, N: int) -> complex:
    """(1/N) sum_{n<=N} w(n) f(T^n x)."""
    if N < 1:
        raise DomainError("N must be >= 1")
    return _weighted_sum(system, weights, N) / N


def weighted_log(system: ObservableSystem, weights: WeightFn, N: int) -> complex:
    if N < 2:
        raise DomainError("N must be >= 2")
    return _weighted_sum(system, weights, N, logarithmic=True) / math.log(N)


def grid_values(family: Sequence[ObservableSystem], weights: WeightFn, N: int) -> np.ndarray:
    """``|weighted_cesaro|`` for each member, sharing the weight pulls."""
    if not family:
        raise DomainError("family must be non-empty")
    accs = [RunningSum() for _ in family]
    for lo in range(1, N + 1, CHUNK):
        hi = min(lo + CHUNK, N + 1)
        w = pull(weights, lo, hi)
        n = np.arange(lo, hi, dtype=np.int64)
        for acc, sys_ in zip(accs, family):
            acc.feed((w * sys_(n)).astype(np.complex128))
    return np.array([abs(a.total) / N for a in accs])


def uniform_norm_avg(family: Sequence[ObservableSystem], weights: WeightFn, N: int) -> float:
    """Grid lower bound for the sup-norm of the weighted Cesaro average."""
    return float(np.max(grid_values(family, weights, N)))


# ---------------------------------------------------------------- strong MOMO


@dataclass(frozen=True)
class MomoStat:
    K: int
    value: float
    normalization: Normalization


def block_sums(partition: BlockPartition, block_systems, weights: WeightFn, K: int,
               logarithmic: bool = False) -> np.ndarray:
    """Complex inner sums ``sum_{b_k<=n<b_{k+1}} f_k(n - b_k) w(n) [/ n]`` for k=1..K."""
    if K < 1 or K > partition.num_blocks or K > len(block_systems):
        raise DomainError(f"K={K} needs K+1 boundaries and K block systems")
    out = np.empty(K, dtype=np.complex128)
    for k in range(1, K + 1):
        lo, hi = partition.bounds(k)
        n = np.arange(lo, hi, dtype=np.int64)
        v = block_systems[k - 1](n - lo) * pull(weights, lo, hi)
        if logarithmic:
            v = v / n
        out[k - 1] = complex(math.fsum(v.real), math.fsum(np.imag(v)))
    return out


def strong_momo_stat(partition: BlockPartition, block_systems, weights: WeightFn, K: int,
                     normalization: Normalization = "cesaro") -> MomoStat:
    """Sum of block moduli normalised by ``b_{K+1}`` or ``log b_{K+1}``."""
    if normalization not in ("cesaro", "logarithmic"):
        raise DomainError(f"unknown normalization {normalization!r}")
    log = normalization == "logarithmic"
    total = math.fsum(np.abs(block_sums(partition, block_systems, weights, K, log)))
    end = int(partition.b[K])
    denom = math.log(end) if log else float(end)
    return MomoStat(K, total / denom, normalization)


def strong_momo_trajectory(partition: BlockPartition, block_systems, weights: WeightFn,
                           Ks: Sequence[int], normalization: Normalization = "cesaro"
                           ) -> list[MomoStat]:
    """``strong_momo_stat`` at several K from one set of block sums."""
    Ks = sorted(int(k) for k in Ks)
    log = normalization == "logarithmic"
    sums = np.abs(block_sums(partition, block_systems, weights, Ks[-1], log))
    cum = prefix_sums(sums)
    out = []
    for K in Ks:
        end = int(partition.b[K])
        out.append(MomoStat(K, float(cum[K]) / (math.log(end) if log else end), normalization))
    return out


def telescoping_check(weights: WeightFn, system: ObservableSystem, partition: BlockPartition,
                      k: int, logarithmic: bool = False) -> tuple[complex, complex]:
    """Block average versus difference of two prefix averages.

    ``lhs = (1/D(b_{k+1})) sum_{b_k<=n<b_{k+1}} w f``;
    ``rhs = (1/D(b_{k+1})) sum_{n<b_{k+1}} w f - (D(b_k)/D(b_{k+1})) (1/D(b_k)) sum_{n<b_k} w f``
    with ``D(x) = x`` (or ``log x`` and an extra ``1/n`` when ``logarithmic``).
    The block sum and the prefix sums are computed independently.
    """
    lo, hi = partition.bounds(k)

    def seq(n):
        v = pull(weights, int(n[0]), int(n[-1]) + 1) * system(n) if n.size else np.zeros(0)
        return v / n if logarithmic else v

    D = math.log if logarithmic else float
    n_blk = np.arange(lo, hi, dtype=np.int64)
    blk = seq(n_blk)
    lhs = complex(math.fsum(blk.real), math.fsum(np.imag(blk))) / D(hi)
    acc = RunningSum()
    head = 0j
    for start in range(1, hi, CHUNK):
        stop = min(start + CHUNK, hi)
        s = acc.feed(seq(np.arange(start, stop, dtype=np.int64)).astype(np.complex128))
        if start <= lo - 1 < stop:
            head = complex(s[lo - 1 - start])
    full = acc.total
    if lo == 1 or D(lo) == 0:
        rhs = full / D(hi)
    else:
        rhs = full / D(hi) - (D(lo) / D(hi)) * (head / D(lo))
    return lhs, rhs


# ---------------------------------------------------------------- window moments


@dataclass
class WindowStatConfig:
    H: int
    phi: Phi = "identity"
    checkpoints: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.H < 1:
            raise DomainError("H must be >= 1")
        if self.phi not in ("identity", "square"):
            raise DomainError(f"phi must be identity or square, got {self.phi!r}")
        if any(c < 2 for c in self.checkpoints):
            raise DomainError("checkpoints must be >= 2")
        if list(self.checkpoints) != sorted(self.checkpoints):
            raise DomainError("checkpoints must be increasing")


def _apply_phi(x: np.ndarray, phi: Phi) -> np.ndarray:
    return x * x if phi == "square" else x


def window_profile(v: SequenceFn | np.ndarray, H: int, N: int, phi: Phi = "identity"
                   ) -> np.ndarray:
    """``F[n] = phi(|(1/H) sum_{h=1..H} v_{n+h}|)`` for ``1 <= n <= N`` (``F[0] = 0``).

    ``v`` is a sequence or an array indexed by ``n`` covering ``[1, N+H]``.
    """
    if isinstance(v, np.ndarray):
        vals = v[1:N + H + 1]
        if vals.shape[0] < N + H:
            raise DomainError("array too short for N + H")
    else:
        vals = pull(v, 1, N + H + 1)
    P = prefix_sums(vals.astype(np.complex128) if np.iscomplexobj(vals) else
                    vals.astype(np.float64))
    # P[j] = v_1 + ... + v_j, so window at n is P[n+H] - P[n]
    W = (P[1 + H:N + H + 1] - P[1:N + 1]) / H
    F = np.zeros(N + 1)
    F[1:] = _apply_phi(np.abs(W), phi)
    return F


def log_average_profile(F: np.ndarray, checkpoints: Sequence[int]) -> np.ndarray:
    """``(1/log N) sum_{n<=N} F[n]/n`` at each checkpoint (F indexed by n)."""
    cps = np.asarray(checkpoints, dtype=np.int64)
    top = int(cps.max())
    n = np.arange(1, top + 1, dtype=np.float64)
    P = prefix_sums(F[1:top + 1] / n)
    return P[cps] / np.log(cps.astype(np.float64))


def window_stat(v: SequenceFn | np.ndarray, config: WindowStatConfig, N: int) -> float:
    """Finite-N reading ``(1/log N) sum_{n<=N} (1/n) phi(|window mean at n|)``."""
    if N < 2:
        raise DomainError("N must be >= 2")
    F = window_profile(v, config.H, N, config.phi)
    return float(log_average_profile(F, [N])[0])


@dataclass
class WindowTrajectory:
    H: int
    phi: Phi
    checkpoints: np.ndarray
    readings: np.ndarray

    @property
    def limsup(self) -> float:
        """Max over the checkpoint list (no extrapolation)."""
        return float(np.max(self.readings))

    def summary(self, stat: str = "window_stat") -> dict:
        return {"stat": stat, "H": self.H, "phi": self.phi,
                "N": int(self.checkpoints[-1]), "value": self.limsup}


def window_trajectory(v: SequenceFn | np.ndarray, config: WindowStatConfig) -> WindowTrajectory:
    if not config.checkpoints:
        raise DomainError("config has no checkpoints")
    N = int(config.checkpoints[-1])
    F = window_profile(v, config.H, N, config.phi)
    readings = log_average_profile(F, config.checkpoints)
    return WindowTrajectory(config.H, config.phi, np.asarray(config.checkpoints), readings)


def chowla2_window(c: SequenceFn | np.ndarray, H: int, N: int) -> float:
    """Second-moment window statistic (``phi = square``) of ``c``."""
    return window_stat(c, WindowStatConfig(H, "square", [N]), N)


def dirichlet_window_value(alpha: float, H: int) -> float:
    """``|D_H(alpha)|^2 / H^2`` with ``D_H = sum_{h=1..H} e(h alpha)``, closed form."""
    s = math.sin(math.pi * alpha)
    if abs(s) < 1e-300:
        return 1.0
    return (math.sin(math.pi * H * alpha) / (H * s)) ** 2


def dirichlet_window_oracle(alpha: float, H: int, N: int) -> float:
    """Exact window statistic of ``e(n alpha)`` with ``phi = square`` at N.

    The window modulus is independent of n, so the reading is the closed
    form times ``H_N / log N``.
    """
    return dirichlet_window_value(alpha, H) * harmonic(N) / math.log(N)


# ---------------------------------------------------------------- output


def write_trajectories_csv(path, trajectories: Sequence[WindowTrajectory]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["H", "phi", "N", "reading"])
        for t in trajectories:
            for N, r in zip(t.checkpoints, t.readings):
                w.writerow([t.H, t.phi, int(N), repr(float(r))])


def write_summary_json(path, summaries: list[dict], config_echo: dict | None = None) -> None:
    doc = {"summaries": summaries}
    if config_echo is not None:
        doc["config"] = config_echo
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def momo_stat_dict(stat: MomoStat) -> dict:
    return asdict(stat)
