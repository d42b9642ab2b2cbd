import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from momo_lab.averaging import IndexSet, harmonic, log_density_at, prefix_sums
from momo_lab.errors import DomainError
from momo_lab import extract as ex
from momo_lab.momo import window_profile

H = 20_000
CPS = ex.default_checkpoints(H)


def indicator(pred, horizon=H):
    n = np.arange(horizon + 1)
    out = pred(n).astype(float)
    out[0] = 0
    return out


# ---------------------------------------------------------------- Markov / Cesaro sets


def test_markov_examples():
    assert len(ex.markov_set(np.full(H + 1, 0.25), 0.25, H).set) == H
    assert len(ex.markov_set(np.ones(H + 1), 0.25, H).set) == 0
    c = ex.markov_set(indicator(lambda n: n % 2 == 0), 0.25, H)
    assert c.set.elements.tolist() == list(range(1, H + 1, 2))
    assert c.witnesses["gamma"] == 0.25


def test_markov_is_strict():
    g = np.full(H + 1, 0.5)
    assert len(ex.markov_set(g, 0.25, H).set) == 0


@pytest.mark.parametrize("gamma", [0.0, 1.0, -0.1, 1.5])
def test_gamma_domain(gamma):
    with pytest.raises(DomainError):
        ex.markov_set(np.zeros(H + 1), gamma, H)
    with pytest.raises(DomainError):
        ex.cesaro_threshold_set(np.zeros(H + 1), gamma, H)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 400, elements=st.floats(0, 2)), st.floats(0.01, 0.99))
def test_markov_membership_exact(g, gamma):
    c = ex.markov_set(g, gamma, 399)
    thr = math.sqrt(gamma)
    members = set(c.set.elements.tolist())
    for n in range(1, 400):
        assert (n in members) == (g[n] < thr)


def test_cesaro_threshold_examples():
    assert len(ex.cesaro_threshold_set(np.zeros(H + 1), 0.5, H).set) == H
    # running mean of the even indicator is at most 1/2 < 0.6
    assert len(ex.cesaro_threshold_set(indicator(lambda n: n % 2 == 0), 0.36, H).set) == H
    assert len(ex.cesaro_threshold_set(np.ones(H + 1), 0.25, H).set) == 0


def test_cesaro_threshold_is_non_strict():
    F = np.full(101, 0.5)
    F[0] = 0
    assert len(ex.cesaro_threshold_set(F, 0.25, 100).set) == 100


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 300, elements=st.floats(0, 1)), st.floats(0.01, 0.99))
def test_cesaro_threshold_matches_exact_means(F, gamma):
    F[0] = 0
    c = ex.cesaro_threshold_set(F, gamma, 299)
    thr = math.sqrt(gamma)
    assert ex.recheck_threshold_set(F, thr, c.set) == 0
    for N in (1, 2, 150, 299):
        mean = oracles.running_mean(F, N)
        if abs(mean - thr) > 1e-12:
            assert (N in c.set) == (mean <= thr)


def test_running_mean_summation_identity():
    rng = np.random.default_rng(4)
    F = np.concatenate([[0], rng.random(50_000)])
    G = ex.running_means(F, 50_000)
    n = np.arange(1, 50_001)
    for N in (10, 999, 50_000):
        lhs = math.fsum(G[1:N] / (n[:N - 1] + 1))
        rhs = math.fsum(F[1:N + 1] / n[:N]) - math.fsum(F[1:N + 1]) / N
        assert abs(lhs - rhs) <= 1e-9


@pytest.mark.parametrize("gamma", [0.01, 0.04, 0.09])
def test_markov_set_finite_scale(gamma):
    rng = np.random.default_rng(int(gamma * 100))
    # G takes value 1 on a sparse random set so that its log average is about gamma / 2
    G = np.where(rng.random(H + 1) < gamma / 2, 1.0, 0.0)
    G[0] = 0
    Ns = H
    reading = math.fsum(G[1:] / np.arange(1, H + 1)) / math.log(Ns)
    assert reading <= gamma
    c = ex.markov_set(G, gamma, H)
    assert c.final_reading >= 1 - math.sqrt(gamma) - 0.02


# ---------------------------------------------------------------- diagonalisation


def test_diagonalize_all_naturals():
    c = ex.diagonalize_sets([IndexSet.full(H)] * 5, CPS, H)
    assert c.ok and len(c.set) == H


def test_diagonalize_cofinite_with_containment():
    fam = [IndexSet.from_intervals([(k, H)], H) for k in range(1, 5)]
    c = ex.diagonalize_sets(fam, CPS, H)
    assert c.ok
    assert ex.check_containment(c, fam) == []
    first = int(c.set.elements[0])
    assert c.set.elements.tolist() == list(range(first, H + 1))


def test_diagonalize_odds_first_failure():
    odds = IndexSet(np.arange(H + 1) % 2 == 1)
    # oracle readings of the odds at every checkpoint lie in (1/2, 2/3)
    readings = [oracles.log_density(range(1, N + 1, 2), N) for N in CPS]
    assert all(0.5 < r < 2 / 3 for r in readings)
    c = ex.diagonalize_sets([odds] * 5, CPS, H)
    assert c.failed_stage == 3
    assert len(c.witnesses["s_k"]) == 2
    # partial assembly is still a usable set
    assert c.set == odds


def test_diagonalize_validates():
    with pytest.raises(DomainError):
        ex.diagonalize_sets([], CPS, H)
    with pytest.raises(DomainError):
        ex.diagonalize_sets([IndexSet.full(H)], [100, 50], H)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 0.2), min_size=1, max_size=6), st.integers(0, 1000))
def test_diagonalize_containment_property(drops, seed):
    rng = np.random.default_rng(seed)
    fam = []
    for p in drops:
        m = rng.random(H + 1) >= p
        m[0] = False
        fam.append(IndexSet(m))
    c = ex.diagonalize_sets(fam, CPS, H)
    assert ex.check_containment(c, fam) == []
    s = c.witnesses["s_k"]
    assert all(a < b for a, b in zip(s, s[1:]))
    for k, si in enumerate(s, start=1):
        assert all(r >= 1 - 1 / k for r in c.witnesses["family_readings"][k - 1][si:])


def test_assemble_zero_R():
    Hs = [1, 2, 3]
    members = {h: IndexSet.full(H) for h in Hs}
    c = ex.assemble_full_density_set({h: 0.0 for h in Hs}, members, [1], H, CPS)
    assert len(c.set) == H
    c = ex.assemble_full_density_set({h: 0.0 for h in Hs}, members, [2], H, CPS)
    assert c.set.elements[0] == 4


def test_assemble_single():
    rng = np.random.default_rng(0)
    m = rng.random(H + 1) < 0.97
    m[0] = False
    S = IndexSet(m)
    c = ex.assemble_full_density_set({5: 0.1}, {5: S}, [5], H, CPS)
    expect = m.copy()
    expect[:25] = False
    assert np.array_equal(c.set.mask, expect)


def test_assemble_mobius_windows_synthetic_R(table_1e6):
    N = 10**6
    mu = table_1e6.mu.astype(float)
    cps = ex.default_checkpoints(N)
    Hs = [2, 4, 8, 16, 32, 64]
    members = {h: ex.cesaro_threshold_set(window_profile(mu, h, N), 1 / h, N, cps) for h in Hs}
    c = ex.assemble_full_density_set({h: 1 / h for h in Hs}, members, [2, 4, 8], N, cps)
    assert c.ok
    # gamma = 1/H < 1 forces H >= 2, so pruning below 4 removes 1, 2, 3 and nothing else
    assert c.set.elements[0] == 4 and len(c.set) == N - 3
    assert c.final_reading == pytest.approx((harmonic(N) - 11 / 6) / math.log(N), rel=1e-12)


def test_piece_of():
    fam = [IndexSet.from_intervals([(k, H)], H) for k in range(1, 4)]
    c = ex.diagonalize_sets(fam, CPS, H)
    cuts = c.witnesses["N_s_k"]
    assert ex.piece_of(c, [1, cuts[0], cuts[0] + 1, H]).tolist()[0] == 0


# ---------------------------------------------------------------- block diagonalisation


def test_blocks_single_family():
    g = ex.harmonic_block_functional(np.ones(H + 1))
    fam = ex.progression_family(10, 0, H)
    r = ex.diagonalize_blocks([fam], g, 0.6, H)
    assert r.ok and r.K == [r.K[0]]
    assert r.b.tolist() == fam[:r.K[0] + 1].tolist()


def test_blocks_zero_g_fails_at_stage_one():
    r = ex.diagonalize_blocks([ex.progression_family(3, 0, H)], lambda n, m: 0.0, 0.5, H)
    assert r.failed_stage == 1


def test_blocks_two_families_pass_checks():
    rng = np.random.default_rng(1)
    vals = rng.uniform(0.5, 1.0, H + 1)
    g = ex.harmonic_block_functional(vals)
    fams = [ex.progression_family(4, 0, H), ex.progression_family(9, 2, H)]
    r = ex.diagonalize_blocks(fams, g, 0.5, H)
    assert r.ok and len(r.K) == 2
    chk = ex.check_block_stitching(r, g)
    assert all(chk["s1"]) and all(chk["s2"]) and chk["increasing"]
    p = r.partition()
    assert p.b[0] == 1


def test_harmonic_block_functional():
    vals = np.arange(101, dtype=float)
    g = ex.harmonic_block_functional(vals)
    assert g(3, 7) == pytest.approx(4.0)


# ---------------------------------------------------------------- Davenport-Erdos


def test_de_constant_one():
    c = ex.davenport_erdos_set(np.concatenate([[0], np.ones(H)]), [0.1, 0.01], H)
    assert c.ok and c.witnesses["ell"] == 1.0 and len(c.set) == H


def test_de_odds():
    a = indicator(lambda n: n % 2 == 1)
    c = ex.davenport_erdos_set(a, [0.1, 0.05, 0.02], H, CPS)
    assert c.ok and abs(c.witnesses["ell"] - 0.5) < 1e-3
    assert ex.check_block_agreement(c, a) == []
    cav = ex.running_means(a, H)
    top = c.set.elements[-100:]
    assert np.all(np.abs(cav[top] - 0.5) <= 0.1)


def test_de_schedule_validation():
    with pytest.raises(DomainError):
        ex.davenport_erdos_set(np.ones(H + 1), [0.01, 0.1], H)


# ---------------------------------------------------------------- dilations


def test_scaled_examples():
    A = IndexSet(np.arange(H + 1) % 2 == 0)
    assert ex.scaled_set(A, 1, H) == A
    assert ex.scaled_set(A, 2, H).restrict(1, 9).elements.tolist() == [4, 5, 8, 9]
    full = ex.scaled_set(IndexSet.full(H), 7, H)
    assert full.elements.tolist() == list(range(7, H + 1))


@settings(max_examples=30, deadline=None)
@given(st.sets(st.integers(1, 300)), st.integers(1, 12))
def test_scaled_floor_property(elems, m):
    A = IndexSet.from_elements(sorted(elems), 300)
    S = ex.scaled_set(A, m, 300 * m)
    assert all((n in S) == ((n // m) in elems) for n in range(1, 300 * m + 1))


def test_nested_scaled_examples():
    c = ex.nested_scaled_set(IndexSet.full(H), CPS, H, 5)
    assert c.ok and c.set.elements.tolist() == list(range(int(c.set.elements[0]), H + 1))
    thin = IndexSet(np.arange(H + 1) % 3 == 0)
    assert not ex.nested_scaled_set(thin, CPS, H, 5).ok


def test_nested_scaled_containment():
    rng = np.random.default_rng(8)
    m = rng.random(H + 1) < 0.995
    m[0] = False
    A = IndexSet(m)
    c = ex.nested_scaled_set(A, CPS, H, 4)
    fam = [ex.scaled_set(A, k, H) for k in range(1, 5)]
    assert ex.check_containment(c, fam) == []


def test_dilate_zero_U():
    w = ex.mertens_dilate_check(IndexSet.full(1000), lambda x: np.zeros(len(x)), 10, 0.01, 1000)
    assert w.X == 2 and w.ok


def test_dilate_single_term(table_small):
    A = IndexSet.full(20_000)
    U = table_small.mertens_of
    w = ex.mertens_dilate_check(A, U, 1, 0.01, 20_000)
    M = table_small.mertens_array
    bad = [x for x in range(1, 20_001) if abs(int(M[x])) > 0.01 * x]
    assert w.X == max(2, bad[-1] + 1)
    assert ex.rescan_dilate_witness(A, U, w) == 0


def test_dilate_failure():
    w = ex.mertens_dilate_check(IndexSet.full(100), lambda x: np.ones(len(x)) * 1e9, 2, 0.01, 100)
    assert not w.ok and w.X is None


# ---------------------------------------------------------------- certificates


def test_certificate_json_round_trip(tmp_path):
    fam = [IndexSet.from_intervals([(k, H)], H) for k in range(1, 4)]
    c = ex.diagonalize_sets(fam, CPS, H)
    p = tmp_path / "c.json"
    c.dump(p)
    back = ex.DensityCertificate.load(p)
    assert back.set == c.set
    assert back.readings.tolist() == c.readings.tolist()
    assert back.witnesses["s_k"] == c.witnesses["s_k"]
    assert back.to_json()["set_encoding"]["type"] == "run_length_intervals"


def test_certificate_readings_reproducible():
    rng = np.random.default_rng(9)
    S = IndexSet(rng.random(H + 1) < 0.8)
    c = ex.certify(S, CPS)
    assert all(0 <= r <= 1.1 for r in c.readings)
    assert c.readings.tolist() == [log_density_at(S, N) for N in CPS]
