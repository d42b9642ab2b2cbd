import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momo_lab.averaging import from_array, harmonic, log_avg
from momo_lab.dynsys import GOLDEN, BlockPartition, Constant, Rotation, ThueMorse
from momo_lab.errors import DomainError
from momo_lab.momo import (
    MomoStat,
    WindowStatConfig,
    block_sums,
    chowla2_window,
    dirichlet_window_oracle,
    dirichlet_window_value,
    grid_values,
    momo_stat_dict,
    strong_momo_stat,
    strong_momo_trajectory,
    telescoping_check,
    uniform_norm_avg,
    weighted_cesaro,
    weighted_log,
    window_profile,
    window_stat,
    window_trajectory,
    write_summary_json,
    write_trajectories_csv,
    zero_weights,
)


@pytest.fixture
def mu(table_small):
    arr = table_small.mu.astype(float)
    return lambda n: arr[n]


def test_weighted_cesaro_examples(mu, table_small):
    rot = Rotation(GOLDEN, 0.3, 1)
    assert weighted_cesaro(rot, zero_weights, 1000) == 0
    N = 10_000
    assert weighted_cesaro(Constant(1), mu, N) == pytest.approx(
        int(table_small.mertens_array[N]) / N, abs=1e-15)


def test_weighted_log_examples(mu):
    assert weighted_log(Rotation(GOLDEN), zero_weights, 100) == 0
    assert weighted_log(Constant(1), mu, 10).real == pytest.approx(0.03929, abs=5e-6)
    c = 0.3 - 0.2j
    assert weighted_log(Constant(c), mu, 5000) == pytest.approx(c * log_avg(mu, 5000), abs=1e-14)
    with pytest.raises(DomainError):
        weighted_log(Constant(1), mu, 1)


def test_uniform_norm_examples(mu):
    rot = Rotation(GOLDEN, 0.1, 1)
    assert uniform_norm_avg([rot], mu, 5000) == pytest.approx(abs(weighted_cesaro(rot, mu, 5000)))
    assert uniform_norm_avg([rot], zero_weights, 5000) == 0
    grid = [Rotation(GOLDEN, j / 64, 1) for j in range(64)]
    vals = grid_values(grid, mu, 5000)
    for j in (0, 17, 63):
        assert vals[j] == pytest.approx(abs(weighted_cesaro(grid[j], mu, 5000)), rel=1e-12)
    assert uniform_norm_avg(grid, mu, 5000) == pytest.approx(max(vals))


def test_uniform_norm_monotone_under_refinement(mu):
    ts = [ThueMorse(j) for j in range(12)]
    coarse = uniform_norm_avg(ts[::3], mu, 8000)
    fine = uniform_norm_avg(ts, mu, 8000)
    assert fine >= coarse
    with pytest.raises(DomainError):
        uniform_norm_avg([], mu, 10)


def test_strong_momo_zero_weights():
    p = BlockPartition.squares(10)
    st_ = strong_momo_stat(p, [Rotation(GOLDEN)] * 10, zero_weights, 10)
    assert st_ == MomoStat(10, 0.0, "cesaro")


def test_strong_momo_single_block(mu):
    N = 5000
    f = Rotation(GOLDEN, 0.0, 1)
    p = BlockPartition([1, N + 1])
    # block 1 evaluates f(T^{n-1} x); compare with the orbit started one step earlier
    g = Rotation(GOLDEN, -GOLDEN, 1)
    val = strong_momo_stat(p, [f], mu, 1).value
    assert val == pytest.approx(N / (N + 1) * abs(weighted_cesaro(g, mu, N)), abs=1e-12)


def test_strong_momo_logarithmic(mu):
    p = BlockPartition.squares(20)
    blocks = [Rotation(GOLDEN, k / 20) for k in range(20)]
    sums = block_sums(p, blocks, mu, 20, logarithmic=True)
    ref = math.fsum(abs(s) for s in sums) / math.log(int(p.b[20]))
    assert strong_momo_stat(p, blocks, mu, 20, "logarithmic").value == pytest.approx(ref)
    traj = strong_momo_trajectory(p, blocks, mu, [5, 20], "logarithmic")
    assert traj[-1].value == pytest.approx(ref, rel=1e-14)
    with pytest.raises(DomainError):
        strong_momo_stat(p, blocks, mu, 21)
    with pytest.raises(DomainError):
        strong_momo_stat(p, blocks, mu, 5, "harmonic")
    assert momo_stat_dict(traj[0])["normalization"] == "logarithmic"


def test_telescoping_examples(mu):
    rot = Rotation(GOLDEN, 0.2, 1)
    lhs, rhs = telescoping_check(mu, rot, BlockPartition([1, 50]), 1)
    assert lhs == pytest.approx(rhs, abs=1e-15)
    assert telescoping_check(zero_weights, rot, BlockPartition([1, 100, 1000]), 2) == (0, 0)
    lhs, rhs = telescoping_check(mu, rot, BlockPartition([1, 100, 1000]), 2)
    assert abs(lhs - rhs) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 15_000), st.integers(1, 4000), st.booleans(), st.floats(0, 1))
def test_telescoping_property(lo, width, logarithmic, x0):
    arr = np.random.default_rng(lo).uniform(-1, 1, lo + width + 1)
    w = lambda n: arr[n]
    lhs, rhs = telescoping_check(w, Rotation(GOLDEN, x0), BlockPartition([1, lo, lo + width]), 2,
                                 logarithmic)
    assert abs(lhs - rhs) <= 1e-9


def test_window_examples():
    N = 2000
    assert window_stat(lambda n: np.zeros(len(n)), WindowStatConfig(5), N) == 0
    ones = window_stat(lambda n: np.ones(len(n)), WindowStatConfig(7), N)
    assert ones == pytest.approx(harmonic(N) / math.log(N), rel=1e-13)


def test_window_profile_direct():
    rng = np.random.default_rng(5)
    v = np.concatenate([[0], rng.normal(size=300) + 1j * rng.normal(size=300)])
    F = window_profile(v, 6, 290, "square")
    for n in (1, 77, 290):
        assert F[n] == pytest.approx(abs(v[n + 1:n + 7].sum() / 6) ** 2, rel=1e-12)
    with pytest.raises(DomainError):
        window_profile(v, 20, 290)


def test_dirichlet_oracle():
    N = 10**6
    c = lambda n: np.exp(2j * np.pi * GOLDEN * n)
    for H in (1, 4, 64):
        got = chowla2_window(c, H, N)
        assert abs(got - dirichlet_window_value(GOLDEN, H)) <= 2 / math.log(N)
        assert got == pytest.approx(dirichlet_window_oracle(GOLDEN, H, N), rel=1e-9)
    assert dirichlet_window_value(0.0, 5) == 1.0


def test_window_config_validation():
    with pytest.raises(DomainError):
        WindowStatConfig(0)
    with pytest.raises(DomainError):
        WindowStatConfig(3, "cube")
    with pytest.raises(DomainError):
        WindowStatConfig(3, checkpoints=[1, 5])
    with pytest.raises(DomainError):
        WindowStatConfig(3, checkpoints=[50, 5])


def test_trajectory_outputs(tmp_path, mu):
    v = lambda n: mu(n) * np.exp(2j * np.pi * GOLDEN * n)
    trajs = [window_trajectory(v, WindowStatConfig(H, "identity", [100, 1000, 10_000]))
             for H in (2, 8)]
    assert trajs[0].limsup == max(trajs[0].readings)
    assert trajs[1].readings[-1] == pytest.approx(
        window_stat(v, WindowStatConfig(8), 10_000), rel=1e-13)
    write_trajectories_csv(tmp_path / "t.csv", trajs)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "H,phi,N,reading" and len(lines) == 7
    write_summary_json(tmp_path / "s.json", [t.summary() for t in trajs], {"seed": 0})
    doc = json.loads((tmp_path / "s.json").read_text())
    assert set(doc["summaries"][0]) == {"stat", "H", "phi", "N", "value"}


def test_array_and_callable_agree(mu, table_small):
    arr = table_small.mu.astype(float)
    a = window_stat(arr, WindowStatConfig(4, "square"), 10_000)
    b = window_stat(from_array(arr), WindowStatConfig(4, "square"), 10_000)
    assert a == b
