import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momo_lab.arith import MultipleBase
from momo_lab.dynsys import (
    GOLDEN,
    BFreeIndicator,
    BlockOrbit,
    BlockPartition,
    Constant,
    PhaseSigma3,
    Rotation,
    ThueMorse,
    align_to_cone,
    make_block_orbit,
    make_bfree,
    make_rotation,
    make_thue_morse,
    parse_system,
    rotation_block_systems,
)
from momo_lab.errors import DomainError, HorizonError


def test_rotation_examples():
    n = np.arange(1, 50)
    assert np.all(make_rotation(0.123, 0.4, 0)(n) == 1)
    assert make_rotation(GOLDEN, 0.0, 1).eval(1) == pytest.approx(cmath.exp(2j * math.pi * GOLDEN))
    half = make_rotation(0.5, 0.0, 1)(n)
    np.testing.assert_allclose(half, (-1.0) ** n, atol=1e-15)


def test_rotation_phase_precision():
    # exact rational step: phase of n * 3/8 mod 1 is exactly representable
    r = Rotation(3 / 8, 0.0, 1)
    n = np.array([10**9 + 1, 10**9 + 3, 2**40 + 5])
    expect = [((k * 3) % 8) / 8 for k in n.tolist()]
    assert r.phase(n).tolist() == expect


def test_rotation_phase_large_n_matches_exact_arithmetic():
    from fractions import Fraction
    alpha = GOLDEN
    r = Rotation(alpha, 0.25, 3)
    n = 987_654_321
    exact = (Fraction(3) * (Fraction(0.25) + n * Fraction(alpha))) % 1
    assert abs(r.phase([n])[0] - float(exact)) < 1e-9


def test_thue_morse_examples():
    tm = make_thue_morse(0, 1, -1)
    assert tm.bits(np.arange(8)).tolist() == [0, 1, 1, 0, 1, 0, 0, 1]
    c = make_thue_morse(0, 0.5j, 0.5j)
    assert np.all(c(np.arange(100)) == 0.5j)
    assert make_thue_morse(1, 1, -1).eval(0) == -1
    with pytest.raises(DomainError):
        make_thue_morse(0, 2, 1)


def test_thue_morse_recursion():
    tm = ThueMorse()
    n = np.arange(50_001)
    t = tm.bits(np.arange(100_003))
    assert np.array_equal(t[2 * n], t[n])
    assert np.array_equal(t[2 * n + 1], 1 - t[n])


def test_bfree_examples():
    s = make_bfree(MultipleBase((2,)), 100)
    assert s.eval(3) == 1 and s.eval(4) == 0
    assert np.all(make_bfree(MultipleBase(()), 50)(np.arange(1, 51)) == 1)
    v = make_bfree(MultipleBase((2, 3)), 10)(np.arange(1, 11)).real.astype(int)
    assert v.tolist() == [1, 0, 0, 0, 1, 0, 1, 0, 0, 0]
    with pytest.raises(HorizonError):
        s.eval(101)


@pytest.mark.parametrize("system", [
    Rotation(GOLDEN, 0.1, 2), ThueMorse(3, 0.6, -0.8j), Constant(0.3 - 0.4j),
    BFreeIndicator(MultipleBase((4, 9)), 10**5),
])
def test_bound_holds(system):
    n = np.random.default_rng(0).integers(1, 10**5, size=10_000)
    assert np.all(np.abs(system(n)) <= system.bound + 1e-15)


def test_partition_validation_and_gaps():
    with pytest.raises(DomainError):
        BlockPartition([2, 3])
    with pytest.raises(DomainError):
        BlockPartition([1, 3, 3])
    p = BlockPartition.squares(5)
    assert p.b.tolist() == [1, 4, 9, 16, 25, 36]
    assert p.gap_floor.tolist() == [3, 5, 7, 9, 11]
    assert p.gaps_nondecreasing_floor()
    assert p.block_of([1, 3, 4, 35]).tolist() == [1, 1, 2, 5]
    with pytest.raises(HorizonError):
        p.block_of([36])


def test_partition_warns_on_small_final_gap():
    with pytest.warns(UserWarning):
        BlockPartition.arithmetic(3, 10, min_gap=5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        BlockPartition.arithmetic(6, 10, min_gap=5)


def test_block_orbit_examples():
    N = 50
    base = Rotation(GOLDEN, 0.0, 1)
    single = make_block_orbit(BlockPartition([1, N + 1]), [base])
    n = np.arange(1, N + 1)
    np.testing.assert_array_equal(single(n), base(n - 1))
    part = BlockPartition.squares(6)
    consts = [Constant(k) for k in range(1, 7)]
    orb = make_block_orbit(part, consts)
    vals = orb(np.arange(1, 49)).real
    expect = [float(np.searchsorted(part.b, m, side="right")) for m in range(1, 49)]
    assert vals.tolist() == expect
    with pytest.raises(HorizonError):
        orb(np.array([0]))
    with pytest.raises(DomainError):
        BlockOrbit(part, consts[:2])


def test_block_orbit_unit_blocks_restart_every_step():
    # with b_k = k every block has length one, so each value is f at the starting point
    K = 200
    base = Rotation(GOLDEN, 0.2, 1)
    orb = BlockOrbit(BlockPartition(np.arange(1, K + 2)), [base] * K)
    vals = orb(np.arange(1, K + 1))
    assert np.all(vals == base.eval(0))


def test_block_orbit_identical_system_is_plain_orbit():
    base = ThueMorse()
    part = BlockPartition.squares(30)
    orb = BlockOrbit(part, [base] * 30)
    n = np.arange(1, part.end)
    k = part.block_of(n)
    np.testing.assert_array_equal(orb(n), base(n - part.b[k - 1]))


def test_rotation_block_systems_seeded():
    a = rotation_block_systems(GOLDEN, 1, 5, 42)
    b = rotation_block_systems(GOLDEN, 1, 5, 42)
    assert [s.x0 for s in a] == [s.x0 for s in b]
    assert len({s.x0 for s in a}) == 5


def test_align_examples():
    assert align_to_cone(1).j == 0
    assert align_to_cone(0).j == 0
    assert align_to_cone(1j).j == 2
    with pytest.raises(DomainError):
        PhaseSigma3(3)


@settings(max_examples=1000, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_align_lands_in_cone(x, y):
    z = complex(x, y)
    e = align_to_cone(z)
    if z != 0:
        m = max(abs(x), abs(y))
        zz = np.complex128(complex(x / m, y / m))
        assert abs(np.angle(np.complex128(e.value) * zz)) <= math.pi / 3 + 1e-12
        for j in range(e.j):
            assert abs(np.angle(np.complex128(PhaseSigma3(j).value) * zz)) > math.pi / 3 - 1e-12


def test_parse_system():
    r = parse_system("rotation alpha=golden x0=0.5 m=2")
    assert isinstance(r, Rotation) and r.alpha == GOLDEN and r.m == 2
    assert isinstance(parse_system("thuemorse offset=1"), ThueMorse)
    b = parse_system("bfree base=2,3 horizon=100")
    assert b.eval(5) == 1
    orb = parse_system("blocks partition=squares K=10 seed=3")
    assert isinstance(orb, BlockOrbit) and orb.partition.num_blocks == 10
    assert parse_system("constant c=2").eval(7) == 2
    assert parse_system("rotation alpha=sqrt2").alpha == pytest.approx(math.sqrt(2) - 1)
    for bad in ("", "torus", "rotation alpha", "bfree base=2"):
        with pytest.raises(DomainError):
            parse_system(bad)
