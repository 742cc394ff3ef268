from __future__ import annotations

import json
import math

import numpy as np
import pytest

from reference import flat_bs_eigenvalue, flat_ground_kappa
from wellspec import bs_solver as bs
from wellspec import oracles
from wellspec.errors import ConvergenceError, DomainError, OverlapError
from wellspec.geometry import CircleConfig, WellArray, circle_array, straight_chain
from wellspec.potentials import flat_well, gaussian_well


@pytest.fixture(scope="module")
def well2():
    return flat_well(4.0, 1.0)


@pytest.mark.parametrize("nu, orders, volume", [(2, (8, 16), math.pi), (3, (8, 8), 4 * math.pi / 3),
                                                (2, (6, 12), math.pi), (3, (6, 8), 4 * math.pi / 3)])
def test_quadrature_volume(nu, orders, volume):
    q = bs.build_quadrature(nu, *orders)
    assert q.weights.sum() == pytest.approx(volume, rel=1e-13)
    assert np.all(q.weights > 0)
    assert np.all(np.linalg.norm(q.nodes, axis=1) < 1)


def test_quadrature_moments():
    q2 = bs.build_quadrature(2, 8, 16)
    assert q2.integrate(lambda p: p[:, 0] ** 2) == pytest.approx(math.pi / 4, abs=1e-12)
    q3 = bs.build_quadrature(3, 8, 8)
    assert q3.integrate(lambda p: p[:, 2] ** 2) == pytest.approx(4 * math.pi / 15, abs=1e-10)


def test_zero_potential_gives_zero_matrix():
    sysm = bs.assemble(flat_well(0.0, 1.0), straight_chain(2, 3.0, 2, 1.0), 1.0)
    assert not sysm.matrix.any()
    pairs = bs.top_eigenpairs(sysm, 2)
    assert [v for v, _ in pairs] == [0.0, 0.0]


def test_assemble_rejects_bad_input(well2):
    with pytest.raises(DomainError):
        bs.assemble(well2, straight_chain(1, 4.0, 2, 1.0), 0.0)
    with pytest.raises((OverlapError, DomainError)):
        bs.assemble(well2, WellArray(2, 1.0, [[0, 0], [1.5, 0]]), 1.0)
    with pytest.raises(DomainError):
        bs.assemble(flat_well(4.0, 0.5), straight_chain(1, 4.0, 2, 1.0), 1.0)


@pytest.mark.parametrize("nu, orders, tol", [(3, (8, 12), 1e-4), (2, (6, 12), 1e-4)])
def test_single_well_top_eigenvalue_matches_closed_form(nu, orders, tol):
    q = bs.build_quadrature(nu, *orders)
    lam = bs.assemble(flat_well(4.0, 1.0), straight_chain(1, 4.0, nu, 1.0), 1.0, q)
    top = bs.top_eigenpairs(lam, 1)[0][0]
    assert top == pytest.approx(flat_bs_eigenvalue(nu, 4.0, 1.0), abs=tol)


@pytest.mark.parametrize("nu", [2, 3])
def test_matrix_symmetric_and_positive(nu):
    V = gaussian_well(3.0, 1.0)
    Y = straight_chain(3, 2.5, nu, 1.0)
    M = bs.assemble(V, Y, 0.7).matrix
    assert np.max(np.abs(M - M.T)) <= 1e-12 * np.max(np.abs(M))
    ev = np.linalg.eigvalsh(M)
    assert ev.min() >= -1e-10 * ev.max()


def test_two_well_swap_symmetry(well2):
    Y = straight_chain(2, 3.0, 2, 1.0)
    sysm = bs.assemble(well2, Y, 1.0)
    Q = sysm.nodes_per_well
    # the intrinsic frames of the two wells are mirror images under the swap
    P = np.zeros_like(sysm.matrix)
    P[:Q, Q:] = np.eye(Q)
    P[Q:, :Q] = np.eye(Q)
    M = sysm.matrix
    assert np.max(np.abs(P @ M - M @ P)) < 1e-10 * np.abs(M).max()
    for val, vec in bs.top_eigenpairs(sysm, 4):
        parity = vec @ (P @ vec)
        assert abs(abs(parity) - 1) < 1e-10


def test_top_eigenpairs_rank_one_and_clamp():
    w = np.array([1.0, 2.0, 2.0])
    pairs = bs.top_eigenpairs(np.outer(w, w), 2)
    assert pairs[0][0] == pytest.approx(9.0) and abs(pairs[1][0]) < 1e-12
    with pytest.warns(UserWarning):
        assert len(bs.top_eigenpairs(np.outer(w, w), 5)) == 3


def test_top_eigenvalue_decreases(well2):
    op = bs.BSOperator(well2, straight_chain(1, 4.0, 2, 1.0))
    assert op.top_eigenvalues(0.5)[0] > op.top_eigenvalues(0.6)[0]


def test_ground_state_2d_matches_oracles(well2):
    res = bs.ground_state(well2, straight_chain(1, 4.0, 2, 1.0))
    radial = oracles.radial_bound_states(well2, 2)[0]
    closed = -flat_ground_kappa(2, 4.0) ** 2
    assert radial == pytest.approx(closed, rel=1e-9)
    assert res.ground == pytest.approx(radial, rel=1e-3)
    assert res.eigenvalues[0] == pytest.approx(-res.kappa_values[0] ** 2, rel=1e-15)
    assert abs(res.diagnostics["residuals"][0]) <= 1e-8


def test_subcritical_3d_has_no_bound_state():
    res = bs.discrete_spectrum(flat_well(1.0, 1.0), straight_chain(1, 4.0, 3, 1.0))
    assert res.no_bound_state and res.eigenvalues == [] and res.ground is None
    data = json.loads(res.to_json())
    assert data["no_bound_state"] is True and data["schema"] == 1


def test_two_wells_attract(well2):
    single = bs.ground_state(well2, straight_chain(1, 4.0, 2, 1.0)).ground
    near = bs.ground_state(well2, straight_chain(2, 4.0, 2, 1.0)).ground
    far = bs.ground_state(well2, straight_chain(2, 8.0, 2, 1.0)).ground
    assert near < far < single


def test_deep_well_spectrum_with_multiplicity():
    V = flat_well(50.0, 1.0)
    q = bs.build_quadrature(2, 20, 32)
    res = bs.discrete_spectrum(V, straight_chain(1, 4.0, 2, 1.0), 3, quadrature=q)
    ref = []
    for s in oracles.radial_channel_states(V, 2, m_max=2):
        ref += [s.energy] * s.multiplicity
    ref = sorted(ref)[:3]
    assert len(res.eigenvalues) >= 2
    np.testing.assert_allclose(res.eigenvalues, ref, rtol=1e-3)
    # the m = +-1 pair is degenerate
    assert res.eigenvalues[2] - res.eigenvalues[1] < 1e-8 * abs(res.eigenvalues[1])


def test_circle_relabel_and_rotation_invariance(well2):
    cfg = CircleConfig(4.0, (1.7, 2.3, 2 * math.pi - 4.0))
    Y = circle_array(cfg, 1.0)
    ref = bs.discrete_spectrum(well2, Y, 3).eigenvalues
    perm = WellArray(2, 1.0, Y.centers[[2, 0, 1]])
    c, s = math.cos(0.37), math.sin(0.37)
    rot = Y.transformed(np.array([[c, -s], [s, c]]), shift=[1.0, -2.0])
    for other in (perm, rot):
        np.testing.assert_allclose(bs.discrete_spectrum(well2, other, 3).eigenvalues, ref,
                                   rtol=0, atol=1e-8)


def test_rotation_invariance_3d():
    V = flat_well(4.0, 1.0)
    Y = WellArray(3, 1.0, [[0, 0, 0], [2.5, 0.3, 0], [0.4, 0.2, 2.6]])
    ref = bs.ground_state(V, Y).ground
    A = np.linalg.qr(np.random.default_rng(3).standard_normal((3, 3)))[0]
    assert bs.ground_state(V, Y.transformed(A)).ground == pytest.approx(ref, abs=1e-8)


def test_adding_wells_lowers_ground(well2):
    values = [bs.ground_state(well2, straight_chain(n, 2.5, 2, 1.0)).ground for n in (1, 3, 5)]
    assert values[0] > values[1] > values[2]


def test_threshold_zero_potential():
    assert bs.threshold_reference(flat_well(0.0, 0.5), 2.0, 2).no_bound_state


def test_threshold_sequence_and_decoupling(well2):
    res = bs.threshold_reference(well2, 16.0, 2, tol=1e-6, max_wells=41)
    single = bs.ground_state(well2, straight_chain(1, 16.0, 2, 1.0)).ground
    assert abs(res.ground - single) < 1e-3
    V = flat_well(4.0, 0.5)
    with pytest.raises(ConvergenceError) as info:
        bs.threshold_reference(V, 2.0, 2, tol=1e-9, max_wells=41)
    seq = info.value.diagnostics["sequence"]
    assert [n for n, _ in seq] == [11, 21, 41]
    e = [v for _, v in seq]
    assert abs(e[1] - e[2]) < abs(e[0] - e[1])


def test_kappa_sweep_csv(tmp_path, well2):
    table = bs.kappa_sweep(well2, straight_chain(1, 4.0, 2, 1.0), [0.5, 1.0], k=2)
    bs.write_sweep_csv(table, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "kappa,lambda_max,lambda_2" and len(lines) == 3


@pytest.mark.parametrize("nu", [2, 3])
def test_large_kappa_mode(nu):
    op = bs.BSOperator(flat_well(4.0, 1.0), straight_chain(1, 4.0, nu, 1.0))
    kappa = 20.0
    assert kappa > op.kappa_prime
    sysm = op.at(kappa)
    assert sysm.diagnostics["mode"] == "unsubtracted"
    ev = np.linalg.eigvalsh(sysm.matrix)
    assert ev.min() >= -1e-10 * ev.max()
    assert ev.max() == pytest.approx(flat_bs_eigenvalue(nu, 4.0, kappa), rel=1e-2)
