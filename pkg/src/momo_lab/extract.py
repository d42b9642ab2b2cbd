"""Set builders that turn logarithmic smallness into Cesaro smallness.

Every builder returns a :class:`DensityCertificate`: the set, its
log-density readings at the checkpoints and the choices made while
building it. Asymptotic hypotheses are replaced by checks on the finite
checkpoint list; when such a check cannot be met below the horizon the
certificate carries ``failed_stage`` and the partial construction instead
of raising.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .averaging import (
    IndexSet,
    log_density_profile,
    log_density_readings,
    log_spaced_checkpoints,
    prefix_sums,
    pull,
)
from .dynsys import BlockPartition
from .errors import DomainError, HorizonError

# relative slack used when a second summation path re-checks a "<=" predicate
RECHECK_RTOL = 1e-12


@dataclass
class DensityCertificate:
    set: IndexSet
    checkpoints: np.ndarray
    readings: np.ndarray
    witnesses: dict = field(default_factory=dict)
    failed_stage: int | None = None

    @property
    def ok(self) -> bool:
        return self.failed_stage is None

    @property
    def final_reading(self) -> float:
        return float(self.readings[-1])

    def to_json(self) -> dict:
        return {
            "horizon": self.set.horizon,
            "set_encoding": {"type": "run_length_intervals",
                             "intervals": [list(iv) for iv in self.set.intervals()]},
            "checkpoints": [int(c) for c in self.checkpoints],
            "readings": [float(r) for r in self.readings],
            "witnesses": _jsonable(self.witnesses),
            "failed_stage": self.failed_stage,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DensityCertificate":
        S = IndexSet.from_intervals(doc["set_encoding"]["intervals"], doc["horizon"])
        return cls(S, np.asarray(doc["checkpoints"], dtype=np.int64),
                   np.asarray(doc["readings"], dtype=np.float64),
                   doc.get("witnesses", {}), doc.get("failed_stage"))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DensityCertificate":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def default_checkpoints(horizon: int, count: int = 12) -> list[int]:
    return log_spaced_checkpoints(min(100, horizon), horizon, count)


def certify(S: IndexSet, checkpoints=None, witnesses=None, failed_stage=None
            ) -> DensityCertificate:
    cps = np.asarray(checkpoints if checkpoints is not None else default_checkpoints(S.horizon),
                     dtype=np.int64)
    return DensityCertificate(S, cps, log_density_readings(S, cps), dict(witnesses or {}),
                              failed_stage)


def values_on(G, horizon: int) -> np.ndarray:
    """``G(n)`` for ``n = 0..horizon`` as float (entry 0 is 0).

    ``G`` is a vectorised callable or an array indexed by ``n``.
    """
    if isinstance(G, np.ndarray):
        if G.shape[0] < horizon + 1:
            raise HorizonError("array shorter than horizon + 1")
        out = np.asarray(G[:horizon + 1], dtype=np.float64).copy()
    else:
        out = np.zeros(horizon + 1)
        out[1:] = np.real(pull(G, 1, horizon + 1))
    out[0] = 0.0
    return out


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma={gamma} outside (0, 1)")


# ---------------------------------------------------------------- Markov sets


def markov_set(G, gamma: float, horizon: int, checkpoints=None) -> DensityCertificate:
    """``{n : G(n) < sqrt(gamma)}`` (strict)."""
    _check_gamma(gamma)
    g = values_on(G, horizon)
    thr = math.sqrt(gamma)
    mask = g < thr
    mask[0] = False
    return certify(IndexSet(mask), checkpoints,
                   {"rule": "G(n) < sqrt(gamma)", "gamma": gamma, "threshold": thr})


def running_means(F, horizon: int) -> np.ndarray:
    """``(1/N) sum_{n<=N} F(n)`` for ``N = 0..horizon`` (entry 0 is 0)."""
    f = values_on(F, horizon)
    P = prefix_sums(f[1:])
    out = np.zeros(horizon + 1)
    out[1:] = P[1:] / np.arange(1, horizon + 1, dtype=np.float64)
    return out


def threshold_set(F, threshold: float, horizon: int, checkpoints=None,
                  witnesses=None) -> DensityCertificate:
    """``{N : running mean of F at N <= threshold}``; no restriction on threshold."""
    means = running_means(F, horizon)
    mask = means <= threshold
    mask[0] = False
    w = {"rule": "mean_{n<=N} F(n) <= threshold", "threshold": threshold}
    w.update(witnesses or {})
    return certify(IndexSet(mask), checkpoints, w)


def cesaro_threshold_set(F, gamma: float, horizon: int, checkpoints=None) -> DensityCertificate:
    """``{N : (1/N) sum_{n<=N} F(n) <= sqrt(gamma)}`` (non-strict), one pass."""
    _check_gamma(gamma)
    return threshold_set(F, math.sqrt(gamma), horizon, checkpoints, {"gamma": gamma})


def recheck_threshold_set(F, threshold: float, S: IndexSet) -> int:
    """Violations of the running-mean predicate found by an independent pass.

    Uses an extended-precision cumulative sum rather than the compensated
    kernel; disagreements within ``RECHECK_RTOL`` of the threshold are not
    counted. Checks both members and non-members.
    """
    f = values_on(F, S.horizon)
    means = np.cumsum(f.astype(np.longdouble))[1:] / np.arange(1, S.horizon + 1,
                                                               dtype=np.longdouble)
    means = means.astype(np.float64)
    slack = RECHECK_RTOL * max(abs(threshold), 1.0)
    member = S.mask[1:]
    bad_in = member & (means > threshold + slack)
    bad_out = ~member & (means <= threshold - slack)
    return int(np.count_nonzero(bad_in) + np.count_nonzero(bad_out))


# ---------------------------------------------------------------- diagonalisation


def _nested_masks(family: Sequence[IndexSet], horizon: int) -> list[np.ndarray]:
    out, acc = [], np.ones(horizon + 1, dtype=bool)
    for M in family:
        if M.horizon < horizon:
            raise HorizonError("family member shorter than horizon")
        acc = acc & M.mask[:horizon + 1]
        out.append(acc)
    return out


def diagonalize_sets(family: Sequence[IndexSet], checkpoints: Sequence[int], horizon: int
                     ) -> DensityCertificate:
    """Stitch a family ``M_1, M_2, ...`` into one set contained eventually in each.

    Members are first replaced by running intersections. ``s_k`` is the
    smallest checkpoint index above ``s_{k-1}`` from which every
    reading of ``M_k`` is at least ``1 - 1/k``. The result is ``M_1`` on
    ``[1, N_{s_1}]``, ``M_k`` on ``(N_{s_{k-1}}, N_{s_k}]`` and the last
    ``M_k`` on the remaining tail, so ``M cap [N_{s_k}, horizon]`` lies in
    ``M_k`` exactly.
    """
    if not family:
        raise DomainError("empty family")
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0 or np.any(np.diff(cps) <= 0):
        raise DomainError("checkpoints must be strictly increasing")
    if cps[-1] > horizon:
        raise HorizonError("checkpoint beyond horizon")
    nested = _nested_masks(family, horizon)
    s_idx: list[int] = []
    readings_k: list[list[float]] = []
    failed = None
    for k, mask in enumerate(nested, start=1):
        r = log_density_readings(IndexSet(mask), cps)
        readings_k.append(r.tolist())
        thr = 1.0 - 1.0 / k
        ok = r >= thr
        # valid[s]: every reading from s on meets the threshold
        valid = np.logical_and.accumulate(ok[::-1])[::-1]
        lower = s_idx[-1] + 1 if s_idx else 0
        cand = np.flatnonzero(valid[lower:])
        if cand.size == 0:
            failed = k
            break
        s_idx.append(lower + int(cand[0]))
    mask = np.zeros(horizon + 1, dtype=bool)
    prev = 0
    for k, s in enumerate(s_idx):
        hi = int(cps[s])
        mask[prev + 1:hi + 1] = nested[k][prev + 1:hi + 1]
        prev = max(prev, hi)
    if s_idx:
        mask[prev + 1:] = nested[len(s_idx) - 1][prev + 1:]
    witnesses = {
        "construction": "diagonalize_sets",
        "thresholds": [1.0 - 1.0 / k for k in range(1, len(nested) + 1)],
        "s_k": s_idx,
        "N_s_k": [int(cps[s]) for s in s_idx],
        "family_size": len(family),
        "family_readings": readings_k,
    }
    return certify(IndexSet(mask), cps, witnesses, failed)


def check_containment(cert: DensityCertificate, family: Sequence[IndexSet]) -> list[int]:
    """Indices k (1-based) where ``M cap [N_{s_k}, horizon]`` is not inside nested ``M_k``."""
    horizon = cert.set.horizon
    nested = _nested_masks(family, horizon)
    bad = []
    for k, N in enumerate(cert.witnesses["N_s_k"], start=1):
        tail = cert.set.mask.copy()
        tail[:N] = False
        if np.any(tail & ~nested[k - 1]):
            bad.append(k)
    return bad


def assemble_full_density_set(R: Mapping[int, float], member_sets: Mapping[int, object],
                              H0_schedule: Sequence[int], horizon: int,
                              checkpoints: Sequence[int]) -> DensityCertificate:
    """Union the per-H sets over ``H >= H0`` and diagonalise over ``H0``.

    Each member set is first cut below ``H^2``.
    """
    Hs = sorted(int(h) for h in member_sets)
    pruned: dict[int, np.ndarray] = {}
    for H in Hs:
        M = member_sets[H]
        S = M.set if isinstance(M, DensityCertificate) else M
        m = S.mask[:horizon + 1].copy()
        m[:min(H * H, horizon + 1)] = False
        pruned[H] = m
    H0s = sorted(int(h) for h in H0_schedule)
    family = []
    for H0 in H0s:
        u = np.zeros(horizon + 1, dtype=bool)
        for H in Hs:
            if H >= H0:
                u |= pruned[H]
        family.append(IndexSet(u))
    cert = diagonalize_sets(family, checkpoints, horizon)
    tail_R = [float(R[h]) for h in Hs]
    cert.witnesses.update({
        "construction": "assemble_full_density_set",
        "H_schedule": Hs,
        "H0_schedule": H0s,
        "R": {str(h): float(R[h]) for h in Hs},
        "R_nonincreasing": bool(all(a >= b for a, b in zip(tail_R, tail_R[1:]))),
        "pruned_below_H_squared": True,
    })
    return cert


def piece_of(cert: DensityCertificate, n) -> np.ndarray:
    """0-based family index used for each member ``n`` of a diagonalised set."""
    cuts = np.asarray(cert.witnesses["N_s_k"], dtype=np.int64)
    k = np.searchsorted(cuts, np.asarray(n, dtype=np.int64), side="left")
    return np.minimum(k, max(len(cuts) - 1, 0))


# ---------------------------------------------------------------- block diagonalisation


@dataclass
class BlockDiagonalization:
    b: np.ndarray
    K: list[int]
    shifts: list[int]
    stage_values: list[float]
    gamma: float
    failed_stage: int | None = None

    @property
    def ok(self) -> bool:
        return self.failed_stage is None

    def partition(self) -> BlockPartition:
        """The stitched boundaries as a partition (``1`` prepended if needed)."""
        b = self.b if self.b[0] == 1 else np.concatenate([[1], self.b])
        return BlockPartition(b)


def harmonic_block_functional(values: np.ndarray) -> Callable[[int, int], float]:
    """``g(n, m) = |sum_{n<=j<m} values[j]/j|`` via prefix sums (values indexed by j)."""
    j = np.arange(values.shape[0], dtype=np.float64)
    j[0] = 1.0
    P = prefix_sums(np.where(np.arange(values.shape[0]) == 0, 0, values / j))
    return lambda n, m: float(abs(P[m] - P[n]))


def progression_family(H: int, r: int, horizon: int) -> np.ndarray:
    """``b_k = k*H + r + 1`` for ``k >= 1`` up to the horizon."""
    k = np.arange(1, (horizon - r - 1) // H + 1, dtype=np.int64)
    return k * H + r + 1


def diagonalize_blocks(families: Sequence[Sequence[int]], g: Callable[[int, int], float],
                       gamma: float, horizon: int) -> BlockDiagonalization:
    """Stitch block families into one sequence with growing gaps.

    Stage 1 takes the shortest prefix of family 1 whose normalised sum of
    ``g`` reaches ``gamma/2``. Stage ``l+1`` skips ``N_{l+1}`` entries of
    family ``l+1`` (minimal, so the bridge gap and all later gaps are at
    least ``l+1``) and then takes the shortest run ``K_{l+1} > K_l + 2``
    whose own normalised sum reaches ``gamma/2``.
    """
    fams = [np.asarray(f, dtype=np.int64) for f in families]
    fams = [f[f <= horizon] for f in fams]
    if not fams:
        raise DomainError("no families")
    half = gamma / 2.0

    def first_reach(F, start, kmin, shift):
        # smallest K >= kmin with sum_{k=start}^{K+shift} g(F_k, F_{k+1}) / log F_{K+1+shift} >= half
        total = []
        acc = 0.0
        for k in range(start, len(F)):  # 1-based k uses F[k-1], F[k]
            acc += g(int(F[k - 1]), int(F[k]))
            total.append(acc)
            K = k - shift
            end = int(F[k])
            if K >= kmin and end > 1 and acc / math.log(end) >= half:
                return K, acc / math.log(end)
        return None, None

    F1 = fams[0]
    K1, v1 = first_reach(F1, 1, 1, 0)
    if K1 is None:
        return BlockDiagonalization(F1[:1], [], [], [], gamma, failed_stage=1)
    b = list(F1[:K1 + 1])
    Ks, shifts, values = [K1], [0], [v1]
    for ell in range(1, len(fams)):
        F = fams[ell]
        need = ell + 1
        Kl = Ks[-1]
        gaps = np.diff(F)
        # gaps_ok[i]: every gap from 0-based gap index i on is >= need
        gaps_ok = np.logical_and.accumulate((gaps >= need)[::-1])[::-1]
        N = None
        for cand in range(0, max(len(F) - (Kl + 2), 0)):
            j0 = Kl + 2 + cand  # 1-based index into F
            if j0 > len(F):
                break
            if F[j0 - 1] >= b[-1] + need and (j0 - 1 >= len(gaps) or gaps_ok[j0 - 1]):
                N = cand
                break
        if N is None:
            return BlockDiagonalization(np.asarray(b), Ks, shifts, values, gamma,
                                        failed_stage=ell + 1)
        K_next, v = first_reach(F, Kl + 2 + N, Kl + 3, N)
        if K_next is None:
            return BlockDiagonalization(np.asarray(b), Ks, shifts, values, gamma,
                                        failed_stage=ell + 1)
        # b_k := F_{k+N} for k = K_l + 2 .. K_next + 1
        b.extend(F[Kl + 1 + N:K_next + N + 1].tolist())
        Ks.append(K_next)
        shifts.append(N)
        values.append(v)
    return BlockDiagonalization(np.asarray(b, dtype=np.int64), Ks, shifts, values, gamma)


def check_block_stitching(res: BlockDiagonalization, g: Callable[[int, int], float]
                          ) -> dict:
    """Finite checks of gap growth (s1) and the running lower bound (s2) per stage."""
    b = res.b
    s1, s2 = [], []
    prevK = 0
    for s, K in enumerate(res.K, start=1):
        gaps = [int(b[k] - b[k - 1]) for k in range(prevK + 1, K + 1)]
        s1.append(all(gp >= s for gp in gaps))
        total = math.fsum(g(int(b[k - 1]), int(b[k])) for k in range(1, K + 1))
        s2.append(total / math.log(int(b[K])) >= res.gamma / 2.0)
        prevK = K
    return {"s1": s1, "s2": s2, "increasing": bool(np.all(np.diff(b) > 0))}


# ---------------------------------------------------------------- Davenport-Erdos


def _cesaro_profile(a, horizon: int) -> np.ndarray:
    return running_means(a, horizon)


def davenport_erdos_pieces(a, ell: float, eps: float, horizon: int) -> IndexSet:
    """``B_eps = {N : Cesaro mean of a at N > ell - eps}``."""
    cav = _cesaro_profile(a, horizon)
    mask = cav > ell - eps
    mask[0] = False
    return IndexSet(mask)


def davenport_erdos_set(a, eps_schedule: Sequence[float], horizon: int, checkpoints=None,
                        tail_fraction: float = 0.0) -> DensityCertificate:
    """Set of full log density along which the Cesaro means approach their limsup.

    The limsup is replaced by ``ell``, the largest Cesaro mean at the
    checkpoints in ``[tail_fraction * horizon, horizon]``. ``N_k`` is the
    smallest integer above ``N_{k-1}`` from which the log-density reading of
    ``B_{eps_k}`` stays at least ``1 - eps_k`` up to the horizon. ``B`` is all
    of ``[1, N_1)`` and agrees with ``B_{eps_k}`` on ``[N_k, N_{k+1})``.
    """
    eps = [float(e) for e in eps_schedule]
    if not eps or any(e <= 0 for e in eps) or any(x <= y for x, y in zip(eps, eps[1:])):
        raise DomainError("eps_schedule must be positive and strictly decreasing")
    cps = np.asarray(checkpoints if checkpoints is not None else default_checkpoints(horizon),
                     dtype=np.int64)
    cav = _cesaro_profile(a, horizon)
    tail = cps[cps >= tail_fraction * horizon]
    if tail.size == 0:
        tail = cps[-1:]
    ell = float(np.max(cav[tail]))
    mask = np.zeros(horizon + 1, dtype=bool)
    Ns: list[int] = []
    failed = None
    pieces = []
    for k, e in enumerate(eps, start=1):
        Be = cav > ell - e
        Be[0] = False
        prof = log_density_profile(IndexSet(Be), horizon)
        good = np.zeros(horizon + 1, dtype=bool)
        good[2:] = prof[2:] >= 1.0 - e
        valid = np.logical_and.accumulate(good[::-1])[::-1]
        lo = Ns[-1] + 1 if Ns else 2
        cand = np.flatnonzero(valid[lo:])
        if cand.size == 0:
            failed = k
            break
        Ns.append(lo + int(cand[0]))
        pieces.append(Be)
    if Ns:
        mask[1:Ns[0]] = True
        for k, N in enumerate(Ns):
            stop = Ns[k + 1] if k + 1 < len(Ns) else horizon + 1
            mask[N:stop] = pieces[k][N:stop]
    else:
        mask[1:] = True
    witnesses = {
        "construction": "davenport_erdos_set",
        "ell": ell,
        "ell_checkpoints": tail.tolist(),
        "tail_fraction": tail_fraction,
        "eps_schedule": eps,
        "N_k": Ns,
    }
    return certify(IndexSet(mask), cps, witnesses, failed)


def check_block_agreement(cert: DensityCertificate, a) -> list[int]:
    """Stages k where B differs from ``B_{eps_k}`` on ``[N_k, N_{k+1})``."""
    w = cert.witnesses
    horizon = cert.set.horizon
    cav = _cesaro_profile(a, horizon)
    bad = []
    Ns = w["N_k"]
    for k, N in enumerate(Ns):
        stop = Ns[k + 1] if k + 1 < len(Ns) else horizon + 1
        Be = cav[N:stop] > w["ell"] - w["eps_schedule"][k]
        if not np.array_equal(cert.set.mask[N:stop], Be):
            bad.append(k + 1)
    if Ns and not np.all(cert.set.mask[1:Ns[0]]):
        bad.append(0)
    return bad


# ---------------------------------------------------------------- dilations


def scaled_set(A: IndexSet, m: int, horizon: int) -> IndexSet:
    """``{n <= horizon : floor(n/m) in A}``."""
    if m < 1:
        raise DomainError("m must be >= 1")
    if horizon // m > A.horizon:
        raise HorizonError(f"A must reach {horizon // m}")
    n = np.arange(horizon + 1, dtype=np.int64)
    return IndexSet(A.mask[n // m])


def nested_scaled_set(A: IndexSet, checkpoints: Sequence[int], horizon: int, m_max: int
                      ) -> DensityCertificate:
    """Diagonalise ``A_1 cap ... cap A_m`` for ``m = 1..m_max``.

    The witness ``N_m`` satisfies ``A~ cap [N_m, horizon] subset A_1 cap ... cap A_m``.
    """
    family = [scaled_set(A, m, horizon) for m in range(1, m_max + 1)]
    cert = diagonalize_sets(family, checkpoints, horizon)
    cert.witnesses["construction"] = "nested_scaled_set"
    cert.witnesses["N_m"] = list(cert.witnesses["N_s_k"])
    cert.witnesses["m_max"] = m_max
    return cert


@dataclass
class DilateWitness:
    X: int | None
    a: int
    eps: float
    horizon: int
    last_violation: int | None
    members_checked: int

    @property
    def ok(self) -> bool:
        return self.X is not None


def _dilate_sums(U, N: np.ndarray, a: int) -> np.ndarray:
    total = np.zeros(N.shape[0])
    for d in range(1, a + 1):
        total += np.abs(np.asarray(U(N // d), dtype=np.complex128))
    return total


def mertens_dilate_check(A_tilde: IndexSet, U, a: int, eps: float, horizon: int
                         ) -> DilateWitness:
    """Least integer ``X >= 2`` such that ``sum_{n<=a} |U(x/n)| <= eps x`` for
    every real ``x`` in ``[X, horizon]`` with ``floor(x)`` in ``A_tilde``.

    ``U`` is the summatory function on integer arrays. Because the left side
    only depends on ``floor(x)`` and the right side grows with ``x``, the
    integers decide. ``X`` is ``None`` if no such ``X <= horizon`` exists.
    """
    if a < 1 or eps <= 0:
        raise DomainError("a >= 1 and eps > 0 required")
    members = A_tilde.elements
    members = members[(members >= 1) & (members <= horizon)]
    S = _dilate_sums(U, members, a)
    viol = members[S > eps * members]
    last = int(viol[-1]) if viol.size else None
    X = max(2, last + 1) if last is not None else 2
    if X > horizon:
        return DilateWitness(None, a, eps, horizon, last, int(members.size))
    return DilateWitness(X, a, eps, horizon, last, int(members.size))


def rescan_dilate_witness(A_tilde: IndexSet, U, w: DilateWitness,
                          fractions=(0.0, 0.5, 0.999)) -> int:
    """Violations of a returned witness at real ``x = N + t`` with ``N >= X`` in ``A_tilde``.

    Evaluates ``U`` at ``floor(x/d)`` computed in floating point, a different
    path from the integer floor division used to find ``X``.
    """
    if w.X is None:
        raise DomainError("witness has no X")
    members = A_tilde.elements
    members = members[(members >= w.X) & (members <= w.horizon)]
    bad = 0
    for t in fractions:
        x = members.astype(np.float64) + t
        x = x[x <= w.horizon]
        total = np.zeros(x.shape[0])
        for d in range(1, w.a + 1):
            total += np.abs(np.asarray(U(np.floor(x / d).astype(np.int64)), dtype=np.complex128))
        bad += int(np.count_nonzero(total > w.eps * x))
    return bad
