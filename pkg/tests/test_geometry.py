from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wellspec.errors import DomainError, OverlapError
from wellspec.geometry import (
    CircleConfig, WellArray, bent_chain, chord_mean_deficit, circle_array, loop_from_vertices,
    loop_polygon, polygon_is_simple, random_circle_config, sphere_config, straight_chain, validate,
)


def test_straight_chain():
    Y = straight_chain(3, 2.0, 2, 0.5)
    np.testing.assert_array_equal(Y.centers, [[-2, 0], [0, 0], [2, 0]])
    np.testing.assert_array_equal(straight_chain(1, 2.0).centers, [[0, 0]])
    assert validate(straight_chain(2, 1.0, 2, 0.5)).ok
    with pytest.raises(OverlapError):
        straight_chain(3, 0.9, 2, 0.5)


def test_bent_chain_reduces_to_straight():
    np.testing.assert_allclose(bent_chain(5, 2.0, 0.0).centers, straight_chain(5, 2.0).centers, atol=1e-15)


def test_bent_chain_distances():
    Y = bent_chain(3, 1.0, math.pi / 3, 2, 0.5)
    assert Y.distances()[0, 2] == pytest.approx(math.sqrt(3), rel=1e-14)
    Z = bent_chain(5, 1.0, math.pi / 2, 2, 0.5)
    d = Z.distances()[0, 4]
    assert d == pytest.approx(4 * math.cos(math.pi / 4), rel=1e-14) and d < 4


def test_bent_chain_overlap_across_bend():
    with pytest.raises(OverlapError) as info:
        bent_chain(5, 1.0, 0.95 * math.pi, 2, 0.5)
    assert not info.value.report.ok
    assert info.value.report.pair in [(1, 3), (0, 4)]


def test_validate_report():
    rep = validate(WellArray(2, 1.0, [[0.0, 0.0], [1.9, 0.0]]))
    assert not rep and rep.pair == (0, 1) and rep.distance == pytest.approx(1.9)
    assert "wells 1 and 2" in rep.message()


def test_circle_examples():
    Y = circle_array(CircleConfig.symmetric(4, 1.0), 0.1)
    np.testing.assert_allclose(Y.centers, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)
    Y2 = circle_array(CircleConfig(1.0, (math.pi, math.pi)), 0.1)
    assert Y2.distances()[0, 1] == pytest.approx(2.0)
    assert validate(circle_array(CircleConfig.symmetric(6, 1.0), 0.5)).ok
    with pytest.raises(OverlapError):
        circle_array(CircleConfig.symmetric(6, 1.0), 0.51)


def test_circle_config_checks():
    with pytest.raises(DomainError):
        CircleConfig(1.0, (1.0, 1.0))
    with pytest.raises(DomainError):
        CircleConfig(1.0, (2 * math.pi, 0.0))


def test_chord_mean_deficit_example():
    cfg = CircleConfig(1.0, (math.pi / 2, math.pi / 2, math.pi))
    expected = math.sqrt(3) - (2 * math.sqrt(2) + 2) / 3
    assert chord_mean_deficit(cfg, 1) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(0.1226, abs=1e-4)
    with pytest.raises(DomainError):
        chord_mean_deficit(cfg, 2)


@pytest.mark.parametrize("n", range(2, 9))
def test_chord_deficit_symmetric_zero(n):
    cfg = CircleConfig.symmetric(n, 3.0)
    for m in range(1, n // 2 + 1):
        assert abs(chord_mean_deficit(cfg, m)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 8), st.integers(0, 2**32 - 1))
def test_chord_deficit_nonnegative(n, seed):
    cfg = random_circle_config(n, 4.0, 0.2, np.random.default_rng(seed))
    for m in range(1, n // 2 + 1):
        assert chord_mean_deficit(cfg, m) > -1e-12


def test_loop_regular_square():
    Y = loop_polygon(4, 8.0, preset="regular", rho=0.5)
    d = Y.distances()
    assert sorted(np.round(d[0, 1:], 12)) == pytest.approx([2.0, 2.0, 2 * math.sqrt(2)])


def test_loop_regular_large_n():
    Y = loop_polygon(64, 64.0, preset="regular", rho=0.4)
    d = Y.distances()
    nn = np.array([d[i, (i + 1) % 64] for i in range(64)])
    assert np.max(np.abs(nn - 1.0)) < 2e-3


def test_loop_rectangle_not_square():
    rect = loop_polygon(8, 16.0, preset="rectangle", rho=0.4)
    sq = loop_polygon(8, 16.0, vertex_angles=[math.pi / 2] * 4, rho=0.4)
    assert validate(rect).ok
    assert not np.allclose(np.sort(rect.distances().ravel()), np.sort(sq.distances().ravel()))


def test_loop_two_wells_degenerate():
    with pytest.raises(DomainError):
        loop_polygon(2, 4.0, vertex_angles=[math.pi, math.pi], rho=0.5)


def test_loop_from_vertices():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    Y = loop_from_vertices(tri, 3, 0.5, L=6.0)
    np.testing.assert_allclose(Y.distances()[np.triu_indices(3, 1)], 2.0, rtol=1e-14)
    bowtie = [[0, 0], [1, 1], [1, 0], [0, 1]]
    assert not polygon_is_simple(bowtie)
    with pytest.raises(DomainError):
        loop_from_vertices(bowtie, 4, 0.1)


def test_sphere_presets():
    assert sphere_config(2, 1.5, rho=0.1).distances()[0, 1] == pytest.approx(3.0)
    d = sphere_config(4, 1.0, rho=0.1).distances()[np.triu_indices(4, 1)]
    np.testing.assert_allclose(d, math.sqrt(8 / 3), rtol=1e-14)
    d6 = np.sort(sphere_config(6, 1.0, rho=0.1).distances()[np.triu_indices(6, 1)])
    np.testing.assert_allclose(d6[:12], math.sqrt(2), rtol=1e-14)
    np.testing.assert_allclose(d6[12:], 2.0, rtol=1e-14)
    with pytest.raises(OverlapError):
        sphere_config(4, 1.0, rho=0.9)
