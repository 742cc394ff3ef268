from __future__ import annotations

import json
import math

import numpy as np
import pytest

from wellspec import bs_solver, optimize
from wellspec.errors import DomainError, OverlapError
from wellspec.geometry import CircleConfig, WellArray, loop_polygon, straight_chain, validate
from wellspec.potentials import flat_well

V = flat_well(4.0, 1.0)
Q2 = bs_solver.build_quadrature(2, 4, 8)
Q3 = bs_solver.build_quadrature(3, 4, 4)


def test_dihedral_key():
    g = (1.0, 2.0, 3.0, 0.283185307179586)
    assert optimize.dihedral_key(g) == optimize.dihedral_key(g[2:] + g[:2])
    assert optimize.dihedral_key(g) == optimize.dihedral_key(g[::-1])
    # a multiset match that is not a dihedral image keeps its own key
    assert optimize.dihedral_key((1.0, 1.0, 2.0, 2.0)) != optimize.dihedral_key((1.0, 2.0, 1.0, 2.0))


def test_antipodal_pair_decouples():
    e = optimize.circle_objective(CircleConfig(8.0, (math.pi, math.pi)), V, 1.0, quadrature=Q2)
    single = bs_solver.ground_state(V, straight_chain(1, 4.0, 2, 1.0), quadrature=Q2).ground
    assert abs(e - single) < 1e-3


def test_circle_objective_invariances():
    angles = (1.3, 2.1, 2 * math.pi - 3.4)
    base = optimize.circle_objective(CircleConfig(4.0, angles), V, 1.0, quadrature=Q2)
    rot = optimize.circle_objective(CircleConfig(4.0, angles[1:] + angles[:1]), V, 1.0, quadrature=Q2)
    rev = optimize.circle_objective(CircleConfig(4.0, angles[::-1]), V, 1.0, quadrature=Q2)
    assert abs(rot - base) < 1e-10 and abs(rev - base) < 1e-10


def test_circle_objective_overlap():
    with pytest.raises(OverlapError):
        optimize.circle_objective(CircleConfig(1.5, (0.3, 2 * math.pi - 0.3)), V, 1.0, quadrature=Q2)


def test_maximize_circle_two_and_three():
    spec = optimize.SearchSpec(budget=120, restarts=2, orders=(4, 8))
    r2 = optimize.maximize_circle(2, 4.0, V, 1.0, spec)
    np.testing.assert_allclose(r2.best.angles, [math.pi, math.pi], atol=1e-2)
    r3 = optimize.maximize_circle(3, 4.0, V, 1.0, spec)
    np.testing.assert_allclose(r3.best.angles, [2 * math.pi / 3] * 3, atol=1e-2)
    assert all(b >= a for a, b in zip(r3.trace, r3.trace[1:]))
    assert r3.evaluations <= spec.budget
    data = json.loads(r3.to_json())
    assert data["schema"] == 1 and data["seed"] == 0


def test_maximize_circle_infeasible():
    with pytest.raises(OverlapError):
        optimize.maximize_circle(6, 1.5, V, 1.0, optimize.SearchSpec(budget=10))


def test_perturbation_strict_and_continuity():
    rep = optimize.perturbation_test(3, 4.0, V, 1.0, trials=5, magnitude=0.2, quadrature=Q2)
    assert rep.passed and rep.strict == 5
    tiny = optimize.perturbation_test(3, 4.0, V, 1.0, trials=3, magnitude=1e-3, quadrature=Q2)
    assert np.max(tiny.margins) < 0.01 * np.min(rep.margins) + 1e-9
    assert json.loads(json.dumps(rep.to_dict()))["counterexamples"] == []


def test_chord_example_config_is_worse():
    sym = optimize.circle_objective(CircleConfig.symmetric(3, 4.0), V, 1.0, quadrature=Q2)
    bad = optimize.circle_objective(CircleConfig(4.0, (math.pi / 2, math.pi / 2, math.pi)), V, 1.0,
                                    quadrature=Q2)
    assert bad < sym


def test_sphere_params_roundtrip():
    rng = np.random.default_rng(1)
    u = rng.standard_normal((5, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    back = optimize.sphere_directions(optimize.sphere_params(u), 5)
    # same configuration up to a rotation: compare Gram matrices
    np.testing.assert_allclose(back @ back.T, u @ u.T, atol=1e-12)


def test_sphere_antipodal_beats_random():
    Vs = flat_well(12.0, 0.5)
    R = 2.0
    spec = optimize.SearchSpec(budget=40, restarts=3, orders=(4, 4))
    res = optimize.maximize_sphere(2, R, Vs, 0.5, spec)
    best = res.objective
    rng = np.random.default_rng(7)
    for _ in range(100):
        u = rng.standard_normal((2, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        Y = WellArray(3, 0.5, R * u)
        if not validate(Y):
            continue
        e = bs_solver.ground_state(Vs, Y, quadrature=Q3).ground
        assert e <= best + 1e-9
    anti = bs_solver.ground_state(Vs, WellArray(3, 0.5, [[0, 0, R], [0, 0, -R]]), quadrature=Q3).ground
    assert best == pytest.approx(anti, abs=1e-8)


def test_sphere_out_of_list_runs():
    res = optimize.maximize_sphere(5, 2.0, flat_well(12.0, 0.5), 0.5,
                                   optimize.SearchSpec(budget=15, restarts=2, orders=(4, 4)))
    assert res.preset_objective is None and res.beaten is None
    assert res.best.shape == (5, 3)


def test_square_beats_rectangle():
    sq = loop_polygon(4, 12.0, preset="regular", rho=1.0)
    rect = loop_polygon(4, 12.0, preset="rectangle", aspect=3.0, rho=1.0)
    e_sq = bs_solver.ground_state(V, sq, quadrature=Q2).ground
    e_rect = bs_solver.ground_state(V, rect, quadrature=Q2).ground
    assert e_sq > e_rect


def test_loop_objective_regular_matches_polygon():
    v = optimize.regular_polygon(3, 6.0)
    e = optimize.loop_objective(v, 3, 6.0, V, 1.0, quadrature=Q2)
    ref = bs_solver.ground_state(V, loop_polygon(3, 6.0, preset="regular", rho=1.0), quadrature=Q2).ground
    assert e == pytest.approx(ref, abs=1e-9)


def test_maximize_loop_runs_and_rejects_degenerate():
    res = optimize.maximize_loop(3, 6.0, V, 1.0, optimize.SearchSpec(budget=20, restarts=3, orders=(4, 8)))
    assert res.objective >= res.preset_objective
    assert res.best.shape == (3, 2)
    with pytest.raises(DomainError):
        optimize.maximize_loop(2, 8.0, V, 1.0)
