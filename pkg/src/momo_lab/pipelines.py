"""End-to-end experiments: extraction on real systems, B-free densities, PNT along a set."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import extract
from .arith import ArithTable, MultipleBase, bfree_set, build_arith_table, load_table
from .averaging import (
    AveragingReport,
    IndexSet,
    averaging_report,
    log_density_readings,
    log_spaced_checkpoints,
    prefix_sums,
)
from .dynsys import (
    BlockPartition,
    Constant,
    ObservableSystem,
    Rotation,
    ThueMorse,
    parse_system,
    rotation_block_systems,
)
from .errors import DomainError, HorizonError
from .extract import DensityCertificate
from .momo import (
    WindowStatConfig,
    log_average_profile,
    strong_momo_trajectory,
    uniform_norm_avg,
    window_trajectory,
)

# rounding allowance when comparing two floating-point sides of an exact inequality
BOUND_RTOL = 1e-12

KINDS = ("average", "momo", "sarnak", "erg1", "bfree", "pnt")


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(float(t)) for t in str(text).replace(" ", "").split(",") if t]


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(t) for t in str(text).replace(" ", "").split(",") if t]


@dataclass
class ExperimentConfig:
    """Parameters for one pipeline run; also the flat ``key=value`` file format."""

    kind: str = "sarnak"
    phi: str = "identity"
    system: str = "rotation alpha=golden x0=0 m=1"
    weights: str = "mobius"
    horizon: int = 1_000_000
    checkpoints: list[int] = field(default_factory=list)
    checkpoint_count: int = 12
    checkpoint_start: int = 1000
    H_schedule: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    H0_schedule: list[int] = field(default_factory=lambda: [1, 2, 4])
    eps_schedule: list[float] = field(default_factory=lambda: [0.1, 0.05, 0.02, 0.01, 0.005])
    tail_fraction: float = 0.0
    grid_size: int = 64
    dictionary_size: int = 8
    kappa: list[float] = field(default_factory=list)
    base: str = "squares"
    a: int = 10
    eps: float = 0.01
    seed: int = 0
    recheck_samples: int = 1000
    table: str = ""
    out_dir: str = "out"

    def __post_init__(self):
        if self.horizon < 2:
            raise DomainError("horizon must be >= 2")
        if not self.checkpoints:
            self.checkpoints = log_spaced_checkpoints(
                min(self.checkpoint_start, self.horizon), self.horizon, self.checkpoint_count)
        cps = list(self.checkpoints)
        if cps != sorted(set(cps)) or cps[0] < 2:
            raise DomainError("checkpoints must be strictly increasing and >= 2")
        if cps[-1] > self.horizon:
            raise DomainError("checkpoints must not exceed the horizon")
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {', '.join(KINDS)}")
        if self.phi not in ("identity", "square"):
            raise DomainError("phi must be identity or square")
        if not self.H_schedule or min(self.H_schedule) < 1:
            raise DomainError("H_schedule must hold positive integers")
        self.H_schedule = sorted(set(self.H_schedule))
        self.H0_schedule = sorted(set(self.H0_schedule))

    _LISTS_INT = ("checkpoints", "H_schedule", "H0_schedule")
    _LISTS_FLOAT = ("eps_schedule", "kappa")

    @classmethod
    def from_mapping(cls, kv: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        args = {}
        for key, raw in kv.items():
            name = key.replace("-", "_")
            if name not in known:
                raise DomainError(f"unknown config key {key!r}")
            if name in cls._LISTS_INT:
                args[name] = _ints(raw)
            elif name in cls._LISTS_FLOAT:
                args[name] = _floats(raw)
            elif known[name].type in ("int",):
                args[name] = int(float(raw))
            elif known[name].type in ("float",):
                args[name] = float(raw)
            else:
                args[name] = str(raw)
        return cls(**args)

    @staticmethod
    def parse_text(text: str) -> dict:
        kv = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"line {lineno}: expected key=value")
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
        return kv

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        kv = cls.parse_text(Path(path).read_text())
        kv.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(kv)

    def echo(self) -> dict:
        """All parameters except the output location."""
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "out_dir"}

    def to_text(self) -> str:
        lines = []
        for k, v in self.echo().items():
            if isinstance(v, list):
                v = ",".join(map(repr if k in self._LISTS_FLOAT else str, v))
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple]


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_, bool)):
        return int(bool(x))
    return x


@dataclass
class PipelineReport:
    kind: str
    config: dict
    summary: dict = field(default_factory=dict)
    certificates: dict[str, DensityCertificate] = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)
    failed_stage: str | None = None

    @property
    def ok(self) -> bool:
        return self.failed_stage is None

    def write(self, out_dir) -> list[Path]:
        """Write ``<name>.csv``, ``<name>.cert.json`` and ``summary.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        echo = json.dumps(extract._jsonable(self.config), sort_keys=True)
        written = []
        for name, t in sorted(self.tables.items()):
            p = out / f"{name}.csv"
            with open(p, "w", newline="") as fh:
                fh.write(f"# config {echo}\n")
                w = csv.writer(fh)
                w.writerow(t.columns)
                for row in t.rows:
                    w.writerow([_cell(x) for x in row])
            written.append(p)
        for name, cert in sorted(self.certificates.items()):
            p = out / f"{name}.cert.json"
            doc = cert.to_json()
            doc["config"] = extract._jsonable(self.config)
            with open(p, "w") as fh:
                json.dump(doc, fh, indent=1, sort_keys=True)
                fh.write("\n")
            written.append(p)
        p = out / "summary.json"
        with open(p, "w") as fh:
            json.dump(extract._jsonable({
                "kind": self.kind, "config": self.config, "summary": self.summary,
                "failed_stage": self.failed_stage,
                "certificates": sorted(self.certificates), "tables": sorted(self.tables),
            }), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(p)
        return written

    def one_line(self) -> str:
        status = "ok" if self.ok else f"FAILED at {self.failed_stage}"
        keys = [k for k in self.summary if isinstance(self.summary[k], (int, float))][:4]
        vals = " ".join(f"{k}={self.summary[k]:.6g}" for k in keys)
        return f"{self.kind}: {status} {vals}".rstrip()


def read_table(path) -> Table:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return Table(rows[0], [tuple(r) for r in rows[1:]])


# ---------------------------------------------------------------- shared pieces


def obtain_table(cfg: ExperimentConfig, n_needed: int) -> ArithTable:
    if cfg.table:
        t = load_table(cfg.table)
        if t.n_max < n_needed:
            raise HorizonError(f"cached table reaches {t.n_max}, need {n_needed}")
        return t
    return build_arith_table(n_needed)


def weight_array(cfg: ExperimentConfig, table: ArithTable | None, n_top: int) -> np.ndarray:
    """Weights ``w(n)`` for ``n = 0..n_top`` (entry 0 unused)."""
    if cfg.weights == "zero":
        return np.zeros(n_top + 1)
    if cfg.weights == "one":
        w = np.ones(n_top + 1)
        w[0] = 0
        return w
    if cfg.weights == "mobius":
        return table.mu[:n_top + 1].astype(np.float64)
    raise DomainError(f"unknown weights {cfg.weights!r} (mobius, zero, one)")


def norm_grid(system: ObservableSystem, size: int) -> list[ObservableSystem]:
    """Starting points over which the sup-norm is approximated.

    Rotations get ``size`` equally spaced starting phases; other systems
    are single orbits.
    """
    if isinstance(system, Rotation) and size > 1:
        return [Rotation(system.alpha, system.x0 + j / size, system.m) for j in range(size)]
    return [system]


def psi_of(R: float, phi: str) -> float:
    """Inverse of ``phi`` applied to ``sqrt(R)``."""
    s = math.sqrt(max(R, 0.0))
    return math.sqrt(s) if phi == "square" else s


def tail_checkpoints(cps: np.ndarray, horizon: int, tail_fraction: float) -> np.ndarray:
    tail = cps[cps >= tail_fraction * horizon]
    return tail if tail.size else cps[-1:]


@dataclass
class _Extraction:
    R: dict[int, float]
    F: dict[int, np.ndarray]
    members: dict[int, DensityCertificate]
    cert: DensityCertificate
    cesaro: np.ndarray     # max over grid of |(1/N) sum_{m<=N} v_m|
    M: float               # sup |v_m|


def _extract_from_values(value_arrays: Sequence[np.ndarray], phi: str, cfg: ExperimentConfig,
                         M: float) -> _Extraction:
    """Window profiles (max over the grid), R(H), member sets and the assembled set.

    ``value_arrays`` hold ``v_n`` for ``n = 0..horizon + max H`` per grid point.
    """
    horizon = cfg.horizon
    Hs = cfg.H_schedule
    cps = np.asarray(cfg.checkpoints, dtype=np.int64)
    F = {H: np.zeros(horizon + 1) for H in Hs}
    cesaro = np.zeros(horizon + 1)
    for v in value_arrays:
        P = prefix_sums(v[1:])  # P[j] = v_1 + ... + v_j
        ce = np.abs(P[1:horizon + 1]) / np.arange(1, horizon + 1)
        np.maximum(cesaro[1:], ce, out=cesaro[1:])
        for H in Hs:
            w = np.abs((P[1 + H:horizon + H + 1] - P[1:horizon + 1]) / H)
            if phi == "square":
                w = w * w
            np.maximum(F[H][1:], w, out=F[H][1:])
    tail = tail_checkpoints(cps, horizon, cfg.tail_fraction)
    R, members = {}, {}
    for H in Hs:
        readings = log_average_profile(F[H], tail)
        R[H] = float(np.max(readings))
        members[H] = extract.threshold_set(F[H], math.sqrt(R[H]), horizon, cps,
                                           {"H": H, "R": R[H], "phi": phi})
    cert = extract.assemble_full_density_set(R, members, cfg.H0_schedule, horizon, cps)
    return _Extraction(R, F, members, cert, cesaro, M)


def _bound_chain(ex: _Extraction, cfg: ExperimentConfig, phi: str) -> dict:
    """Check ``|(1/N) sum S_m f| <= psi(R(H)) + 2M/H`` at every member of the set.

    ``H`` ranges over the witnesses of ``N``: schedule values ``H >= H0``
    (the ``H0`` of the piece containing ``N``) with ``N >= H^2`` whose
    member set contains ``N``. The best witness bound is used, and it is
    compared with ``sup_{H >= H0} psi(R(H)) + 2M/H0`` as well.
    """
    cert = ex.cert
    N = cert.set.elements
    if N.size == 0:
        return {"checked": 0, "violations": 0, "sup_violations": 0, "max_slack": None}
    H0s = cfg.H0_schedule
    piece = extract.piece_of(cert, N)
    H0_of = np.asarray(H0s, dtype=np.int64)[piece]
    best = np.full(N.shape[0], np.inf)
    for H in cfg.H_schedule:
        ok = (H >= H0_of) & (N >= H * H) & ex.members[H].set.mask[N]
        b = psi_of(ex.R[H], phi) + 2.0 * ex.M / H
        best = np.where(ok, np.minimum(best, b), best)
    sup_bound = np.array([max(psi_of(ex.R[H], phi) for H in cfg.H_schedule if H >= h0)
                          + 2.0 * ex.M / h0 for h0 in H0s])[piece]
    lhs = ex.cesaro[N]
    tol = BOUND_RTOL * np.maximum(1.0, best)
    viol = int(np.count_nonzero(~(lhs <= best + tol)))
    sup_viol = int(np.count_nonzero(~(lhs <= sup_bound + BOUND_RTOL * sup_bound)))
    slack = best - lhs
    return {"checked": int(N.size), "violations": viol, "sup_violations": sup_viol,
            "no_witness": int(np.count_nonzero(~np.isfinite(best))),
            "max_slack": float(np.min(slack[np.isfinite(slack)])) if np.isfinite(slack).any()
            else None}


def _recheck_members(ex: _Extraction, cfg: ExperimentConfig) -> dict:
    """Sampled members re-verified with an extended-precision running mean."""
    S = ex.cert.set
    N = S.elements
    rng = np.random.default_rng(cfg.seed)
    k = min(cfg.recheck_samples, N.size)
    sample = np.sort(rng.choice(N, size=k, replace=False)) if k else N[:0]
    piece = extract.piece_of(ex.cert, sample)
    H0_of = np.asarray(cfg.H0_schedule, dtype=np.int64)[piece]
    ok = np.zeros(k, dtype=bool)
    for H in cfg.H_schedule:
        means = (np.cumsum(ex.F[H].astype(np.longdouble))[sample]
                 / sample.astype(np.longdouble)).astype(np.float64)
        thr = math.sqrt(ex.R[H])
        ok |= (H >= H0_of) & (sample >= H * H) & (means <= thr + extract.RECHECK_RTOL)
    return {"samples": int(k), "violations": int(np.count_nonzero(~ok)), "seed": cfg.seed}


def _readings_table(cert: DensityCertificate) -> Table:
    return Table(["N", "log_density"], list(zip(cert.checkpoints.tolist(),
                                                cert.readings.tolist())))


def _R_table(ex: _Extraction, cfg: ExperimentConfig) -> Table:
    cps = np.asarray(cfg.checkpoints, dtype=np.int64)
    rows = []
    for H in cfg.H_schedule:
        r = log_average_profile(ex.F[H], cps)
        rows.extend((H, int(N), float(x)) for N, x in zip(cps, r))
    return Table(["H", "N", "reading"], rows)


# ---------------------------------------------------------------- pipelines


def sarnak_density_pipeline(cfg: ExperimentConfig, table: ArithTable | None = None
                            ) -> PipelineReport:
    """Extract a set of full log density along which ``(1/N) sum w(n) f(T^n x)`` is small.

    ``phi`` is the identity. The norm is the maximum over the starting-point
    grid, and ``M`` is the product of the weight and observable bounds.
    """
    system = parse_system(cfg.system)
    n_top = cfg.horizon + max(cfg.H_schedule)
    if cfg.weights == "mobius" and table is None:
        table = obtain_table(cfg, n_top)
    w = weight_array(cfg, table, n_top)
    grid = norm_grid(system, cfg.grid_size)
    n = np.arange(n_top + 1, dtype=np.int64)
    n[0] = 1
    arrays = []
    for s in grid:
        v = w * s(n)
        v[0] = 0
        arrays.append(v)
    M = float(np.max(np.abs(w))) * max(s.bound for s in grid)
    ex = _extract_from_values(arrays, "identity", cfg, M)
    return _finish_extraction("sarnak", cfg, ex, "identity")


def _finish_extraction(kind, cfg, ex: _Extraction, phi: str, extra: dict | None = None
                       ) -> PipelineReport:
    cert = ex.cert
    chain = _bound_chain(ex, cfg, phi)
    recheck = _recheck_members(ex, cfg)
    members = cert.set.elements
    top = members[-10:] if members.size else members
    summary = {
        "final_reading": cert.final_reading,
        "members": int(members.size),
        "R": {str(h): r for h, r in ex.R.items()},
        "bound_chain": chain,
        "recheck": recheck,
        "cesaro_at_largest_members": [float(ex.cesaro[N]) for N in top],
        "largest_members": top.tolist(),
        "M": ex.M,
        "phi": phi,
    }
    summary.update(extra or {})
    tables = {"density": _readings_table(cert), "window_readings": _R_table(ex, cfg)}
    failed = None if cert.ok else f"diagonalize:{cert.failed_stage}"
    return PipelineReport(kind, cfg.echo(), summary, {"extracted": cert}, tables, failed)


def erg1_dictionary(system: ObservableSystem, size: int) -> tuple[list[ObservableSystem], list]:
    """Observables along one orbit plus the ``kappa`` values forced by symmetry.

    Rotations give the characters ``m = 1..size`` (integral 0). Thue-Morse
    gives ``size`` shifted copies and other systems give themselves; for
    these the integral is left to estimation (``None``).
    """
    if isinstance(system, Rotation):
        obs = [Rotation(system.alpha, system.x0, m) for m in range(1, size + 1)]
        return obs, [0.0] * len(obs)
    if isinstance(system, ThueMorse):
        obs = [ThueMorse(system.offset + j, system.w0, system.w1) for j in range(size)]
        return obs, [None] * len(obs)
    if isinstance(system, Constant):
        return [system], [system.value]
    return [system], [None]


def erg1_pipeline(orbit: Sequence[ObservableSystem], kappa_means: Sequence, cfg: ExperimentConfig
                  ) -> PipelineReport:
    """One set along which the empirical averages of every dictionary member converge.

    For observable ``f`` with integral surrogate ``kappa`` the values are
    ``v_n = f(T^n x) - kappa`` and ``phi`` is the square. ``kappa=None``
    is replaced by the logarithmic average at the horizon. The per-observable
    sets are stitched with :func:`extract.diagonalize_sets`.
    """
    if len(orbit) != len(kappa_means):
        raise DomainError("one kappa per observable")
    horizon = cfg.horizon
    n_top = horizon + max(cfg.H_schedule)
    n = np.arange(n_top + 1, dtype=np.int64)
    n[0] = 1
    logw = np.zeros(horizon + 1)
    logw[1:] = 1.0 / np.arange(1, horizon + 1)
    per, kappas, estimated, certs = [], [], [], {}
    sets = []
    for j, (f, kap) in enumerate(zip(orbit, kappa_means)):
        vals = f(n).astype(np.complex128)
        vals[0] = 0
        if kap is None:
            P = prefix_sums(vals[1:horizon + 1] * logw[1:])
            kap = complex(P[-1] / math.log(horizon))
            estimated.append(j)
        kap = complex(kap)
        v = vals - kap
        v[0] = 0
        M = f.bound + abs(kap)
        ex = _extract_from_values([v], "square", cfg, M)
        emp = np.abs(prefix_sums(vals[1:horizon + 1])[1:] / np.arange(1, horizon + 1) - kap)
        per.append((f, kap, ex, emp))
        kappas.append([kap.real, kap.imag])
        certs[f"observable_{j}"] = ex.cert
        sets.append(ex.cert.set)
    cert = extract.diagonalize_sets(sets, cfg.checkpoints, horizon)
    cert.witnesses["construction"] = "erg1_dictionary"
    members = cert.set.elements
    top = members[-10:]
    rows = []
    for j, (f, kap, ex, emp) in enumerate(per):
        for N in top:
            rows.append((j, int(N), float(emp[N - 1])))
    R_rows = []
    cps = np.asarray(cfg.checkpoints, dtype=np.int64)
    for j, (f, kap, ex, emp) in enumerate(per):
        for H in cfg.H_schedule:
            for N, x in zip(cps, log_average_profile(ex.F[H], cps)):
                R_rows.append((j, H, int(N), float(x)))
    chains = [_bound_chain(ex, cfg, "square") for (_, _, ex, _) in per]
    summary = {
        "final_reading": cert.final_reading,
        "members": int(members.size),
        "observables": [f.describe() for f in orbit],
        "kappa": kappas,
        "kappa_estimated": estimated,
        "R": [{str(h): r for h, r in ex.R.items()} for (_, _, ex, _) in per],
        "max_empirical_gap_at_largest_members": float(max(r[2] for r in rows)) if rows else None,
        "bound_chain_violations": [c["violations"] for c in chains],
        "recheck": [_recheck_members(ex, cfg) for (_, _, ex, _) in per],
    }
    certs["dictionary"] = cert
    tables = {"density": _readings_table(cert),
              "empirical_gaps": Table(["observable", "N", "gap"], rows),
              "window_readings": Table(["observable", "H", "N", "reading"], R_rows)}
    failed = None
    bad = [name for name, c in certs.items() if not c.ok]
    if bad:
        failed = f"diagonalize:{bad[0]}"
    return PipelineReport("erg1", cfg.echo(), summary, certs, tables, failed)


def bfree_density_pipeline(base: MultipleBase, cfg: ExperimentConfig) -> PipelineReport:
    """Log density of the B-free set and its upper density along a set ``B``."""
    horizon = cfg.horizon
    S = bfree_set(base, horizon)
    ind = S.mask.astype(np.float64)
    cert = extract.davenport_erdos_set(ind, cfg.eps_schedule, horizon, cfg.checkpoints,
                                       cfg.tail_fraction)
    cps = cert.checkpoints
    cav = extract.running_means(ind, horizon)
    delta = log_density_readings(S, cps)
    B = cert.set.elements
    top = B[-10:]
    agreement = extract.check_block_agreement(cert, ind)
    rows = [(int(N), float(cav[N]), float(d), bool(cert.set.mask[N]))
            for N, d in zip(cps, delta)]
    summary = {
        "ell": cert.witnesses["ell"],
        "natural_density": float(cav[horizon]),
        "log_density": float(delta[-1]),
        "cesaro_along_B": float(cav[top[-1]]) if top.size else None,
        "cesaro_along_B_largest": [float(cav[N]) for N in top],
        "B_final_reading": cert.final_reading,
        "block_agreement_failures": agreement,
        "base_size": len(base),
    }
    tables = {"density": Table(["N", "natural_density", "log_density", "in_B"], rows),
              "B_density": _readings_table(cert)}
    failed = None if cert.ok else f"davenport_erdos:{cert.failed_stage}"
    return PipelineReport("bfree", cfg.echo(), summary, {"B": cert}, tables, failed)


def pnt_pipeline(table: ArithTable, cfg: ExperimentConfig, A_override: IndexSet | None = None
                 ) -> PipelineReport:
    """Prime number theorem along a set of full log density, in five stages.

    (i) second-moment window readings of mu, (ii) the set A where the Mertens
    mean is small, (iii) the nested dilation set, (iv) the Mertens dilation
    witness, (v) ``psi(x)/x`` at the largest members. ``A_override`` skips (ii).
    """
    horizon = cfg.horizon
    n_top = horizon + max(cfg.H_schedule)
    if table.n_max < n_top:
        raise HorizonError(f"table reaches {table.n_max}, need {n_top}")
    stages: dict[str, bool] = {}
    mu = table.mu[:n_top + 1].astype(np.float64)
    certs, tables, summary = {}, {}, {}
    if A_override is None:
        ex = _extract_from_values([mu], "square", cfg, 1.0)
        tables["window_readings"] = _R_table(ex, cfg)
        summary["R"] = {str(h): r for h, r in ex.R.items()}
        stages["i"] = True
        A_cert = ex.cert
        summary["A_bound_chain"] = _bound_chain(ex, cfg, "square")
        summary["A_recheck"] = _recheck_members(ex, cfg)
        stages["ii"] = A_cert.ok
    else:
        A_cert = extract.certify(A_override, cfg.checkpoints, {"construction": "override"})
        stages["i"] = stages["ii"] = True
    certs["A"] = A_cert
    A_members = A_cert.set.elements
    if A_members.size:
        summary["mertens_mean_at_largest_A"] = [
            abs(int(table.mertens_array[N])) / int(N) for N in A_members[-10:]]
    At = extract.nested_scaled_set(A_cert.set, cfg.checkpoints, horizon, cfg.a)
    certs["A_tilde"] = At
    stages["iii"] = At.ok
    U = table.mertens_of
    w = extract.mertens_dilate_check(At.set, U, cfg.a, cfg.eps, horizon)
    stages["iv"] = w.ok
    summary["dilate"] = {"X": w.X, "a": w.a, "eps": w.eps, "last_violation": w.last_violation,
                         "members_checked": w.members_checked,
                         "rescan_violations": extract.rescan_dilate_witness(At.set, U, w)
                         if w.ok else None}
    members = At.set.elements
    top = members[-10:]
    psi = table.psi_array
    ratios = [float(psi[x]) / float(x) for x in top]
    stages["v"] = bool(top.size) and all(0.98 <= r <= 1.02 for r in ratios)
    tables["psi_ratio"] = Table(["x", "psi_over_x"], list(zip(top.tolist(), ratios)))
    tables["density"] = _readings_table(At)
    summary.update({
        "A_final_reading": A_cert.final_reading,
        "A_tilde_final_reading": At.final_reading,
        "A_tilde_failed_k": At.failed_stage,
        "psi_over_x_largest": ratios,
        "psi_at_horizon_over_horizon": float(psi[horizon]) / horizon,
        "stages": stages,
    })
    failed = next((s for s in ("i", "ii", "iii", "iv", "v") if not stages[s]), None)
    return PipelineReport("pnt", cfg.echo(), summary, certs, tables, failed)


def _weighted_sequence(cfg: ExperimentConfig, n_top: int):
    system = parse_system(cfg.system)
    table = obtain_table(cfg, n_top) if cfg.weights == "mobius" else None
    w = weight_array(cfg, table, n_top)
    return system, w, (lambda n: w[n] * system(n))


def average_run(cfg: ExperimentConfig) -> PipelineReport:
    """Cesaro and logarithmic averages of ``w(n) f(T^n x)`` at the checkpoints."""
    _, _, seq = _weighted_sequence(cfg, cfg.horizon)
    rep = averaging_report(seq, cfg.checkpoints)
    rows = [(int(N), c.real, c.imag, l.real, l.imag)
            for N, c, l in zip(rep.checkpoints, rep.cesaro_values, rep.log_values)]
    summary = {"cesaro_abs": float(abs(rep.cesaro_values[-1])),
               "log_abs": float(abs(rep.log_values[-1])), "N": int(rep.checkpoints[-1])}
    return PipelineReport("average", cfg.echo(), summary, {},
                          {"averages": Table(list(AveragingReport.CSV_COLUMNS), rows)})


def momo_run(cfg: ExperimentConfig) -> PipelineReport:
    """Window statistics over the H schedule, grid norms and strong MOMO readings.

    The strong statistic uses ``b_k = k^2``; for a rotation the blocks restart
    at seeded random points, otherwise every block restarts the given system.
    """
    n_top = cfg.horizon + max(cfg.H_schedule)
    system, w, seq = _weighted_sequence(cfg, n_top)
    n = np.arange(n_top + 1, dtype=np.int64)
    n[0] = 1
    v = seq(n).astype(np.complex128)
    v[0] = 0
    trajs = [window_trajectory(v, WindowStatConfig(H, cfg.phi, list(cfg.checkpoints)))
             for H in cfg.H_schedule]
    cps = np.asarray(cfg.checkpoints, dtype=np.int64)
    grid = norm_grid(system, cfg.grid_size)
    weights = lambda m: w[m]
    grid_rows = [(int(N), uniform_norm_avg(grid, weights, int(N))) for N in cps]
    K = math.isqrt(cfg.horizon) - 1
    rows_strong = []
    if K >= 1:
        part = BlockPartition.squares(K)
        if isinstance(system, Rotation):
            blocks = rotation_block_systems(system.alpha, system.m, K, cfg.seed)
        else:
            blocks = [system] * K
        Ks = sorted({max(1, math.isqrt(int(N)) - 1) for N in cps if math.isqrt(int(N)) >= 2})
        for norm in ("cesaro", "logarithmic"):
            for st in strong_momo_trajectory(part, blocks, weights, Ks, norm):
                rows_strong.append((norm, st.K, int(part.b[st.K]), st.value))
    summary = {"window": [t.summary() for t in trajs],
               "grid_norm_final": grid_rows[-1][1],
               "strong_cesaro_final": next((r[3] for r in reversed(rows_strong)
                                            if r[0] == "cesaro"), None)}
    tables = {
        "window_trajectories": Table(["H", "phi", "N", "reading"],
                                     [(t.H, t.phi, int(N), float(r)) for t in trajs
                                      for N, r in zip(t.checkpoints, t.readings)]),
        "grid_norm": Table(["N", "max_abs_cesaro"], grid_rows),
        "strong_momo": Table(["normalization", "K", "b_K_plus_1", "value"], rows_strong),
    }
    return PipelineReport("momo", cfg.echo(), summary, {}, tables)


def run_config(cfg: ExperimentConfig) -> PipelineReport:
    """Dispatch on ``cfg.kind``."""
    if cfg.kind == "average":
        return average_run(cfg)
    if cfg.kind == "momo":
        return momo_run(cfg)
    if cfg.kind == "sarnak":
        return sarnak_density_pipeline(cfg)
    if cfg.kind == "erg1":
        system = parse_system(cfg.system)
        obs, kap = erg1_dictionary(system, cfg.dictionary_size)
        if cfg.kappa:
            if len(cfg.kappa) != len(obs):
                raise DomainError(f"kappa needs {len(obs)} values")
            kap = list(cfg.kappa)
        return erg1_pipeline(obs, kap, cfg)
    if cfg.kind == "bfree":
        return bfree_density_pipeline(MultipleBase.parse(cfg.base, cfg.horizon), cfg)
    if cfg.kind == "pnt":
        table = obtain_table(cfg, cfg.horizon + max(cfg.H_schedule))
        return pnt_pipeline(table, cfg)
    raise DomainError(f"unknown experiment kind {cfg.kind!r}")
