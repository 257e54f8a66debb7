import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dunkl_heat.errors import InvalidParameterError, NonFiniteGroupError
from dunkl_heat.rootsys import (RootSystem, build_dihedral, build_product_A1, chamber_mask,
                                generate_group, near_wall, orbit_distance, reflect,
                                reflection_count, shortening_sequence)

SQ2 = np.sqrt(2.0)
coord = st.floats(-5, 5, allow_nan=False)


def systems():
    return [build_product_A1(1, [1.0]), build_product_A1(2, [0.5, 2.0]), build_product_A1(3, [1, 1, 1]),
            build_dihedral(3, 1.0), build_dihedral(4, 1.0, 2.0), build_dihedral(5, 0.7)]


@pytest.mark.parametrize("N,k,order", [(1, [1.0], 2), (2, [0.5, 2.0], 4), (3, [1.0, 1.0, 1.0], 8)])
def test_product_group_order(N, k, order):
    rs = build_product_A1(N, k)
    assert rs.n_roots == 2 * N
    assert generate_group(rs).order == order


@pytest.mark.parametrize("m", [3, 4, 5, 6])
def test_dihedral_group_order(m):
    assert generate_group(build_dihedral(m, 1.0)).order == 2 * m


def test_dihedral_first_root():
    rs = build_dihedral(3, 1.0)
    np.testing.assert_allclose(rs.roots[0], [0.0, SQ2], atol=1e-15)


def test_dihedral_m4_two_classes():
    rs = build_dihedral(4, 1.0, 2.0)
    assert generate_group(rs).order == 8
    np.testing.assert_allclose(np.linalg.norm(rs.roots, axis=1), SQ2, atol=1e-12)
    assert sorted(set(rs.mult.tolist())) == [1.0, 2.0]


@pytest.mark.parametrize("rs", systems(), ids=lambda r: f"{r.family}{r.params}")
def test_multiplicity_invariance(rs):
    grp = generate_group(rs)
    for M in grp.elements:
        for a, alpha in enumerate(rs.roots):
            b = int(np.argmin(np.linalg.norm(rs.roots - M @ alpha, axis=1)))
            assert np.allclose(rs.roots[b], M @ alpha, atol=1e-9)
            assert rs.mult[b] == rs.mult[a]


def test_group_closure_and_orthogonality():
    grp = generate_group(build_dihedral(5, 1.0))
    for g in range(grp.order):
        M = grp.elements[g]
        np.testing.assert_allclose(M @ M.T, np.eye(2), atol=1e-10)
        assert grp.compose(g, grp.inverse(g)) == grp.identity_index


def test_cayley_involutive():
    rs = build_dihedral(4, 1.0, 2.0)
    grp = generate_group(rs)
    for g in range(grp.order):
        for a in range(rs.n_roots):
            assert grp.cayley[grp.cayley[g, a], a] == g


@pytest.mark.parametrize("bad", [
    lambda: build_product_A1(2, [1.0, 0.0]),
    lambda: build_product_A1(2, [1.0]),
    lambda: build_dihedral(3, 1.0, 2.0),
    lambda: build_dihedral(2, 1.0),
])
def test_invalid_parameters(bad):
    with pytest.raises(InvalidParameterError):
        bad()


def test_group_cap():
    with pytest.raises(NonFiniteGroupError):
        generate_group(build_dihedral(6, 1.0), cap=5)


def test_config_roundtrip():
    rs = build_dihedral(4, 1.0, 2.0)
    back = RootSystem.from_config(rs.to_config())
    np.testing.assert_array_equal(back.roots, rs.roots)
    np.testing.assert_array_equal(back.mult, rs.mult)


def test_reflect_examples():
    rs = build_product_A1(2, [1.0, 1.0])
    np.testing.assert_allclose(reflect(rs, 0, [1.0, 2.0]), [-1.0, 2.0])
    d3 = build_dihedral(3, 1.0)
    np.testing.assert_allclose(reflect(d3, 0, [1.0, 1.0]), [1.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(reflect(d3, 0, [3.0, 0.0]), [3.0, 0.0], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(coord, min_size=2, max_size=2), st.integers(0, 7))
def test_reflection_is_involution(x, a):
    rs = build_dihedral(4, 1.0, 2.0)
    np.testing.assert_allclose(reflect(rs, a, reflect(rs, a, x)), x, atol=1e-12)


def test_orbit_distance_examples():
    rs = build_product_A1(1, [1.0])
    grp = generate_group(rs)
    d, g = orbit_distance(rs, grp, [3.0], [-2.0])
    assert d == pytest.approx(1.0)
    np.testing.assert_allclose(grp.elements[g], [[-1.0]])
    d3 = build_dihedral(3, 1.0)
    g3 = generate_group(d3)
    rot = np.array([[np.cos(2 * np.pi / 3), -np.sin(2 * np.pi / 3)],
                    [np.sin(2 * np.pi / 3), np.cos(2 * np.pi / 3)]])
    d, _ = orbit_distance(d3, g3, [1.0, 0.0], rot @ [1.0, 0.0])
    assert d == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(coord, min_size=2, max_size=2), st.lists(coord, min_size=2, max_size=2))
def test_orbit_invariance_and_chamber_criterion(x, y):
    rs = build_dihedral(3, 1.0)
    grp = generate_group(rs)
    d, _ = orbit_distance(rs, grp, x, y)
    for M in grp.elements:
        assert orbit_distance(rs, grp, x, M @ np.asarray(y))[0] == pytest.approx(d, abs=1e-9)
        # isometry
        assert np.linalg.norm(M @ np.asarray(x) - M @ np.asarray(y)) == pytest.approx(
            np.linalg.norm(np.subtract(x, y)), abs=1e-9)
    n = reflection_count(rs, grp, x, y)
    same = abs(np.linalg.norm(np.subtract(x, y)) - d) <= 1e-9 * (1 + np.linalg.norm(x) + np.linalg.norm(y))
    assert (n == 0) == same
    assert 0 <= n <= grp.order
    if n >= 1:
        # some reflection brings y strictly closer
        dists = [np.linalg.norm(np.asarray(x) - reflect(rs, a, y)) for a in rs.positive]
        assert min(dists) < np.linalg.norm(np.subtract(x, y))


@pytest.mark.parametrize("x,y,n", [((1, 1), (-1, 2), 1), ((1, 1), (-1, -2), 2), ((1, 1), (2, 3), 0)])
def test_reflection_count_examples(x, y, n):
    rs = build_product_A1(2, [1.0, 1.0])
    assert reflection_count(rs, generate_group(rs), x, y) == n


def test_shortening_sequence_examples():
    rs = build_product_A1(1, [1.0])
    grp = generate_group(rs)
    assert shortening_sequence(rs, grp, [1.0], [2.0]) == []
    seq = shortening_sequence(rs, grp, [1.0], [-2.0])
    assert len(seq) == 1
    assert abs(1.0 - reflect(rs, seq[0], [-2.0])[0]) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(coord, min_size=2, max_size=2), st.lists(coord, min_size=2, max_size=2))
def test_shortening_sequence_decreases(x, y):
    rs = build_dihedral(4, 1.0, 2.0)
    grp = generate_group(rs)
    seq = shortening_sequence(rs, grp, x, y)
    assert len(seq) <= grp.order
    z = np.asarray(y, dtype=float)
    prev = np.linalg.norm(np.asarray(x) - z)
    for a in seq:
        z = reflect(rs, a, z)
        cur = np.linalg.norm(np.asarray(x) - z)
        assert cur < prev
        prev = cur
    assert reflection_count(rs, grp, x, z) == 0


def test_chamber_mask_and_wall():
    rs = build_product_A1(2, [1.0, 1.0])
    grp = generate_group(rs)
    mask = chamber_mask(grp, [1.0, 1.0], [1.0, -1.0])
    assert mask.sum() == 1
    assert near_wall(rs, [0.0, 1.0])
    assert not near_wall(rs, [0.5, 1.0])
