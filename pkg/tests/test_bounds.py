import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dunkl_heat import bounds
from dunkl_heat.errors import DomainError, InvalidParameterError, OracleTooLargeError
from dunkl_heat.rootsys import build_dihedral, build_product_A1, generate_group, reflection_count

R1 = build_product_A1(1, [1.0])
G1 = generate_group(R1)
D3 = build_dihedral(3, 1.0)
GD3 = generate_group(D3)
coord = st.floats(-4, 4, allow_nan=False)


def test_rho_examples():
    assert bounds.rho(R1, [1.0], [1.0], 1.0, []) == 1.0
    # factors over y = 1 and then sigma(y) = -1: (1+0)^-2 (1+2)^-2
    assert bounds.rho(R1, [1.0], [1.0], 1.0, [0, 0]) == pytest.approx(1 / 9)
    assert bounds.rho(R1, [1.0], [-3.0], 1e20, [0, 0, 0]) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        bounds.rho(R1, [1.0], [1.0], 0.0, [0])


def test_enumeration_examples():
    words = {s.root_indices for s in bounds.enumerate_admissible(R1, G1, [1.0], [1.0], 4)}
    assert words == {(), (0, 0), (0, 0, 0, 0)}
    assert [s.root_indices for s in bounds.enumerate_admissible(R1, G1, [1.0], [2.0], 0)] == [()]
    assert [s.root_indices for s in bounds.enumerate_admissible(R1, G1, [1.0], [-1.0], 1)] == [(0,)]


def test_enumeration_elements_and_admissibility():
    for s in bounds.enumerate_admissible(D3, GD3, [1.0, 0.3], [-0.5, -1.0], 4):
        assert GD3.word_element(s.root_indices) == s.element
        assert reflection_count(D3, GD3, [1.0, 0.3], GD3.elements[s.element] @ [-0.5, -1.0]) == 0


def test_oracle_cap():
    with pytest.raises(OracleTooLargeError):
        bounds.lambda_bruteforce(D3, GD3, [1, 0], [0, 1], 1.0, max_len=12, cap=1000)


def test_lambda_hand_value():
    # 1 + 1/9 + 1/81
    expected = 1 + 1 / 9 + 1 / 81
    assert bounds.lambda_bruteforce(R1, G1, [1.0], [1.0], 1.0, 4) == pytest.approx(expected, rel=1e-14)
    assert bounds.lambda_dp(R1, G1, [1.0], [1.0], 1.0) == pytest.approx(expected, rel=1e-14)


def test_lambda_limits():
    # t -> infinity counts the admissible words
    n_words = len(bounds.enumerate_admissible(D3, GD3, [1.0, 0.2], [0.3, -1.0], 4))
    assert bounds.lambda_bruteforce(D3, GD3, [1.0, 0.2], [0.3, -1.0], 1e20, 4) == pytest.approx(n_words, rel=1e-8)
    # deep in the same chamber with |x - y| / sqrt t huge: only the empty word survives
    assert bounds.lambda_dp(D3, GD3, [0.0, 5.0], [0.0, 50.0], 1e-4) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("rs", [build_product_A1(2, [1.0, 0.5]), build_dihedral(3, 1.0),
                                build_dihedral(4, 1.0, 2.0)], ids=["Z2^2", "I2(3)", "I2(4)"])
def test_dp_matches_bruteforce(rs):
    grp = generate_group(rs)
    rng = np.random.default_rng(7)
    for _ in range(30):
        x, y = rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2)
        t = 10 ** rng.uniform(-1, 1)
        dp = bounds.lambda_dp(rs, grp, x, y, t, max_len=5)
        bf = bounds.lambda_bruteforce(rs, grp, x, y, t, 5)
        assert dp == pytest.approx(bf, rel=1e-12)


def test_dp_full_length_matches_bruteforce_rank1():
    assert bounds.lambda_dp(R1, G1, [0.7], [-1.9], 0.3) == pytest.approx(
        bounds.lambda_bruteforce(R1, G1, [0.7], [-1.9], 0.3, 4), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(coord, min_size=2, max_size=2), st.lists(coord, min_size=2, max_size=2),
       st.floats(0.01, 10))
def test_lambda_time_scaling(x, y, t):
    lam = bounds.lambda_dp(D3, GD3, x, y, t)
    lam2 = bounds.lambda_dp(D3, GD3, x, y, 2 * t)
    assert lam <= lam2 * (1 + 1e-12)
    assert 2.0 ** (-2 * GD3.order) * lam2 <= lam * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(coord, min_size=2, max_size=2), st.lists(coord, min_size=2, max_size=2),
       st.floats(0.01, 10), st.integers(0, 2))
def test_rho_in_unit_interval(x, y, t, a):
    r = bounds.rho(D3, x, y, t, [a, (a + 1) % 3])
    assert 0 < r <= 1


def test_lambda_dihedral_cases():
    x = np.array([0.0, 1.0])   # middle of the chamber between the 60 and 120 degree walls
    same = 0.5 * x
    assert bounds.lambda_dihedral(D3, GD3, x, same, 0.7) == 1.0
    for y in ([1.0, -0.2], [-1.0, -0.3], [-0.3, 1.2]):
        n = reflection_count(D3, GD3, x, y)
        lam = bounds.lambda_dihedral(D3, GD3, x, y, 0.7)
        first = (1 + np.linalg.norm(x - np.array(y)) / np.sqrt(0.7)) ** -2
        if n == 1:
            assert lam == pytest.approx(first)
        elif n == 2:
            assert lam < first
    with pytest.raises(InvalidParameterError):
        bounds.lambda_dihedral(R1, G1, [1.0], [1.0], 1.0)


def test_lambda_dihedral_two_reflections_limit():
    # walls at multiples of 60 degrees; x at 90 and y at 205 sit two chambers apart
    x = [0.0, 1.0]
    ang = np.deg2rad(205.0)
    y = [np.cos(ang), np.sin(ang)]
    assert reflection_count(D3, GD3, x, y) == 2
    assert bounds.lambda_dihedral(D3, GD3, x, y, 1e20) == pytest.approx(3.0, rel=1e-8)


def test_volume_comparable_examples():
    assert bounds.volume_comparable(R1, [0.0], 1.0) == pytest.approx(1.0)
    # exact w(B(0,1)) = int 2 x^2 dx = 4/3
    assert bounds.exact_ball_volume(R1, [0.0], 1.0) == pytest.approx(4 / 3, rel=1e-8)
    with pytest.raises(DomainError):
        bounds.volume_comparable(R1, [0.0], 0.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(coord, min_size=2, max_size=2), st.floats(0.01, 3), st.floats(0.2, 5))
def test_volume_scaling(x, r, s):
    Nh = D3.homogeneous_dim
    v = bounds.log_volume_comparable(D3, np.asarray(x), np.asarray(r))
    vs = bounds.log_volume_comparable(D3, s * np.asarray(x), np.asarray(s * r))
    assert vs == pytest.approx(v + Nh * np.log(s), abs=1e-9)


def test_exact_volume_zero_multiplicity_limit():
    rs = build_product_A1(2, [1e-9, 1e-9])
    assert bounds.exact_ball_volume(rs, [0.3, -0.2], 0.5) == pytest.approx(
        bounds.euclidean_ball_volume(2, 0.5), rel=1e-6)


def test_exact_volume_planar_matches_product():
    rs = build_product_A1(2, [1.0, 1.0])
    v = bounds.exact_ball_volume(rs, [2.0, 3.0], 0.1)
    # small radius: w is nearly constant, w(x) pi r^2 with w = 4 x1^2 x2^2
    assert v == pytest.approx(4 * 4 * 9 * np.pi * 0.01, rel=2e-2)


def test_doubling_bounded_rank1():
    ratios = [bounds.exact_ball_volume(R1, [x], 2 * r) / bounds.exact_ball_volume(R1, [x], r)
              for x in (0.0, 0.5, 3.0, 10.0) for r in (0.01, 0.3, 5.0)]
    assert max(ratios) <= 2 ** R1.homogeneous_dim * 1.0001


def test_envelope_examples():
    x = [0.4, 1.3]
    env = bounds.envelope(D3, GD3, x, x, 0.5, 0.25)
    lam = bounds.lambda_dp(D3, GD3, x, x, 0.5)
    assert env == pytest.approx(lam / bounds.volume_comparable(D3, x, np.sqrt(0.5)))
    env_d = bounds.envelope(D3, GD3, x, [1.0, -0.5], 0.5, 0.25, lambda_mode="dihedral")
    assert env_d > 0
    with pytest.raises(DomainError):
        bounds.envelope(D3, GD3, x, x, 0.5, 0.0)
    with pytest.raises(InvalidParameterError):
        bounds.log_envelope_batch(D3, GD3, [x], [x], [0.5], 0.25, lambda_mode="nope")
