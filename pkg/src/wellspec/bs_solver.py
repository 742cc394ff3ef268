"""Birman-Schwinger operator of a well array and the discrete spectrum it encodes.

``-kappa^2`` is an eigenvalue of ``-Delta - sum_i V(. - y_i)`` exactly when 1 is an
eigenvalue of ``K(kappa) = V^{1/2} (-Delta + kappa^2)^{-1} V^{1/2}``.  ``K`` is
discretized by a symmetric Nystrom rule on the balls ``B_rho(y_i)``.

Diagonal treatment
------------------
The kernel is split as ``G_kappa = (G_kappa - G_kp) + G_kp`` with a fixed
``kp > kappa``.  The difference is a bounded positive-definite function, so its
node matrix is positive semidefinite.  The remaining singular part is moved to
the diagonal through the row defect

    e_p = V_p * (S_p - sum_q w_q (G_kappa - G_kp)(|x_p - x_q|)),

where ``S_p`` is the exact ball integral of ``G_kappa`` around node ``p``,
computed with an auxiliary polar rule centred on the node, where the
Jacobian cancels the singularity.  ``kp`` is calibrated per quadrature as the
largest value keeping every ``e_p >= 0`` in the ``kappa -> 0`` limit (``e_p``
grows with ``kappa``), which makes the assembled matrix positive semidefinite
for all ``kappa < kp``.  Larger ``kappa`` (kernels shorter than the node
spacing) fall back to plain Nystrom projected onto the semidefinite cone;
root searches stay below ``kp``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import linalg, optimize
from scipy.sparse.linalg import eigsh

from .errors import ConvergenceError, DomainError, OverlapError
from .geometry import WellArray, straight_chain, validate
from .kernels import green_unchecked
from .potentials import RadialPotential

#: default (radial, angular) orders per dimension
DEFAULT_ORDERS = {2: (6, 12), 3: (6, 8)}
MAX_ROWS = 6000
_DENSE_EIGH_ROWS = 900
_PSI_NODES = 48
_S_NODES = 32


@dataclass(frozen=True, eq=False)
class BallQuadrature:
    """Product rule on the unit disk (``nu = 2``) or unit ball (``nu = 3``).

    ``radii`` and ``radial_index`` record the radius of every node; the
    diagonal correction only depends on it.
    """

    nu: int
    nodes: np.ndarray
    weights: np.ndarray
    order: tuple[int, int]
    radii: np.ndarray
    radial_index: np.ndarray
    kappa_prime: float

    @property
    def size(self) -> int:
        return self.weights.size

    def integrate(self, f) -> float:
        """Apply the rule to ``f(points)`` with points of shape ``(Q, nu)``."""
        return float(np.dot(self.weights, f(self.nodes)))


def _product_rule(nu: int, nr: int, na: int):
    x, w = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * w * r ** (nu - 1)
    if nu == 2:
        phi = 2.0 * math.pi * np.arange(na) / na
        dirs = np.column_stack([np.cos(phi), np.sin(phi)])
        wd = np.full(na, 2.0 * math.pi / na)
    else:
        ct, wt = np.polynomial.legendre.leggauss(na)
        nphi = 2 * na
        phi = 2.0 * math.pi * np.arange(nphi) / nphi
        st = np.sqrt(1.0 - ct**2)
        dirs = np.column_stack([
            np.outer(st, np.cos(phi)).ravel(),
            np.outer(st, np.sin(phi)).ravel(),
            np.repeat(ct, nphi),
        ])
        wd = np.repeat(wt, nphi) * (2.0 * math.pi / nphi)
    nodes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, nu)
    weights = np.outer(wr, wd).ravel()
    ridx = np.repeat(np.arange(nr), dirs.shape[0])
    return nodes, weights, r, ridx


@lru_cache(maxsize=None)
def _psi_rule():
    x, w = np.polynomial.legendre.leggauss(_PSI_NODES)
    half = 0.25 * math.pi * (x + 1.0)
    psi = np.concatenate([half, half + 0.5 * math.pi])
    return psi, np.concatenate([0.25 * math.pi * w] * 2)


@lru_cache(maxsize=None)
def _s_rule():
    x, w = np.polynomial.legendre.leggauss(_S_NODES)
    return 0.5 * (x + 1.0), 0.5 * w


def ball_self_integral(nu: int, kappa: float, r0, rho: float) -> np.ndarray:
    """``int_{B_rho} G_kappa(|x - x'|) dx'`` for points at distance ``r0`` from the centre.

    Polar coordinates centred on ``x``: the distance to the sphere along a
    direction at angle ``psi`` from the outward radial is
    ``-r0 cos(psi) + sqrt(rho^2 - r0^2 sin(psi)^2)``.
    """
    psi, wpsi = _psi_rule()
    t, wt = _s_rule()
    r0 = np.atleast_1d(np.asarray(r0, dtype=float))
    out = np.empty(r0.size)
    for k, r in enumerate(r0):
        L = -r * np.cos(psi) + np.sqrt(np.maximum(rho**2 - (r * np.sin(psi)) ** 2, 0.0))
        if nu == 2:
            # s = L t^2 smooths the logarithm at the node
            s = L[:, None] * t[None, :] ** 2
            inner = (green_unchecked(2, kappa, s) * s * 2.0 * L[:, None] * t[None, :]) @ wt
            out[k] = 2.0 * np.dot(inner, wpsi)
        else:
            s = L[:, None] * t[None, :]
            inner = (np.exp(-kappa * s) * s / (4.0 * math.pi) * L[:, None]) @ wt
            out[k] = 2.0 * math.pi * np.dot(inner * np.sin(psi), wpsi)
    return out


def _green_at_zero_reg(nu: int, kappa: float, kp: float) -> float:
    # limit of G_kappa(r) - G_kp(r) as r -> 0
    if nu == 2:
        return math.log(kp / kappa) / (2.0 * math.pi)
    return (kp - kappa) / (4.0 * math.pi)


def _reg_kernel(nu: int, kappa: float, kp: float, D: np.ndarray, Gkp: np.ndarray | None = None,
                zero_mask: np.ndarray | None = None) -> np.ndarray:
    if zero_mask is None:
        zero_mask = D == 0.0
    Dsafe = np.where(zero_mask, 1.0, D)
    G = green_unchecked(nu, kappa, Dsafe)
    G -= green_unchecked(nu, kp, Dsafe) if Gkp is None else Gkp
    G[zero_mask] = _green_at_zero_reg(nu, kappa, kp)
    return G


def _row_defect(nu, nodes, weights, radii, kappa, kp):
    # e_p / V_p on the unit ball
    D = np.sqrt(np.sum((nodes[:, None, :] - nodes[None, :, :]) ** 2, axis=-1))
    G = _reg_kernel(nu, kappa, kp, D)
    ur, inv = np.unique(radii, return_inverse=True)
    S = ball_self_integral(nu, kappa, ur, 1.0)[inv]
    return S - G @ weights


def _calibrate_kappa_prime(nu, nodes, weights, radii, kappa_ref=1e-6, steps=30) -> float:
    lo, hi = 1.0, 1.0e3
    if _row_defect(nu, nodes, weights, radii, kappa_ref, lo).min() < 0:
        raise ConvergenceError("could not calibrate the diagonal regularization")
    for _ in range(steps):
        mid = math.sqrt(lo * hi)
        if _row_defect(nu, nodes, weights, radii, kappa_ref, mid).min() >= 0:
            lo = mid
        else:
            hi = mid
    return lo


@lru_cache(maxsize=32)
def build_quadrature(nu: int, radial_order: int, angular_order: int) -> BallQuadrature:
    """Gauss-Legendre in radius times a uniform (2D) or Gauss x uniform (3D) angular rule.

    In 3D ``angular_order`` Gauss nodes in ``cos(theta)`` are combined with
    ``2 * angular_order`` equispaced azimuths.  Weights include the Jacobian
    ``r^(nu-1)`` and sum to the volume of the unit ball.
    """
    if nu not in (2, 3):
        raise DomainError(f"nu must be 2 or 3, got {nu}")
    if radial_order < 2 or angular_order < 2:
        raise DomainError("quadrature orders must be at least 2")
    nodes, weights, r, ridx = _product_rule(nu, radial_order, angular_order)
    radii = r[ridx]
    kp = _calibrate_kappa_prime(nu, nodes, weights, radii)
    for arr in (nodes, weights, radii, ridx):
        arr.setflags(write=False)
    return BallQuadrature(nu, nodes, weights, (radial_order, angular_order), radii, ridx, kp)


def default_quadrature(nu: int) -> BallQuadrature:
    return build_quadrature(nu, *DEFAULT_ORDERS[nu])


# ---------------------------------------------------------------------------
# per-well frames

def _unit(v: np.ndarray) -> np.ndarray | None:
    n = float(np.linalg.norm(v))
    return None if n < 1e-12 else v / n


def _array_scale(Y: WellArray) -> float:
    c = Y.centers
    return max(float(np.ptp(c, axis=0).max()), Y.rho) if len(Y) > 1 else Y.rho


def _fallback_direction(Y: WellArray, exclude: np.ndarray | None = None) -> np.ndarray:
    # a direction fixed by the array when the intrinsic choices degenerate;
    # for collinear arrays it is shared by all wells
    c = Y.centers
    if len(Y) > 1:
        _, _, vt = np.linalg.svd(c - c.mean(axis=0))
        cands = list(vt)
    else:
        cands = []
    cands += list(np.eye(Y.nu))
    for v in cands:
        if exclude is not None:
            v = v - np.dot(v, exclude) * exclude
        u = _unit(v)
        if u is not None:
            return u
    raise AssertionError("unreachable")


def _nearest_directions(Y: WellArray, i: int) -> list[np.ndarray]:
    d = Y.distances()[i]
    order = sorted((float(d[j]), j) for j in range(len(Y)) if j != i)
    return [Y.centers[j] - Y.centers[i] for _, j in order]


def well_frames(Y: WellArray) -> np.ndarray:
    """Orthonormal frames (columns) orienting the quadrature of every well.

    Frames are built from the array itself (direction from the centroid,
    then nearest neighbours), so rigid motions of ``Y`` move the nodes along
    with the centres and leave the assembled matrix unchanged.
    """
    n, nu = len(Y), Y.nu
    frames = np.empty((n, nu, nu))
    centroid = Y.centers.mean(axis=0)
    tol = 1e-9 * _array_scale(Y)
    for i in range(n):
        rel = Y.centers[i] - centroid
        cands = [rel] if np.linalg.norm(rel) > tol else []
        cands += _nearest_directions(Y, i)
        e1 = next((u for u in map(_unit, cands) if u is not None), None)
        if e1 is None:
            e1 = _fallback_direction(Y)
        if nu == 2:
            frames[i] = np.column_stack([e1, [-e1[1], e1[0]]])
            continue
        e2 = None
        for v in _nearest_directions(Y, i):
            v = v - np.dot(v, e1) * e1
            if np.linalg.norm(v) > tol:
                e2 = v / np.linalg.norm(v)
                break
        if e2 is None:
            e2 = _fallback_direction(Y, exclude=e1)
        # polar axis along e1, azimuth reference e2
        e3 = np.cross(e1, e2)
        frames[i] = np.column_stack([e2, e3, e1])
    return frames


# ---------------------------------------------------------------------------
# assembly

@dataclass(frozen=True, eq=False)
class BSSystem:
    """Assembled Birman-Schwinger matrix at ``kappa``.

    Row ``i * Q + p`` belongs to node ``p`` of well ``i``.
    """

    kappa: float
    matrix: np.ndarray
    n_wells: int
    nodes_per_well: int
    diagnostics: dict = field(default_factory=dict)

    def row(self, well: int, node: int) -> int:
        if not (0 <= well < self.n_wells and 0 <= node < self.nodes_per_well):
            raise IndexError((well, node))
        return well * self.nodes_per_well + node

    def block(self, i: int, j: int) -> np.ndarray:
        Q = self.nodes_per_well
        return self.matrix[i * Q:(i + 1) * Q, j * Q:(j + 1) * Q]

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


class BSOperator:
    """Kappa-independent part of the discretization of one (V, Y) pair.

    Geometry, node distances and the ``kp`` kernel are computed once; each
    call of :meth:`at` only evaluates ``G_kappa`` on the stored distances.
    """

    def __init__(self, V: RadialPotential, Y: WellArray, quadrature: BallQuadrature | None = None):
        if not V.nonneg:
            raise DomainError("the Birman-Schwinger solver needs a nonnegative potential")
        if abs(V.rho - Y.rho) > 1e-12 * max(V.rho, Y.rho):
            raise DomainError(f"potential radius {V.rho} differs from the array radius {Y.rho}")
        report = validate(Y)
        if not report:
            raise OverlapError(report.message(), report)
        q = default_quadrature(Y.nu) if quadrature is None else quadrature
        if q.nu != Y.nu:
            raise DomainError("quadrature dimension does not match the array")
        nrows = len(Y) * q.size
        if nrows > MAX_ROWS:
            raise DomainError(f"{nrows} rows exceed the dense cap of {MAX_ROWS}; lower the orders")
        self.V, self.Y, self.quad = V, Y, q
        self.nu, self.rho = Y.nu, Y.rho
        self.kappa_prime = q.kappa_prime / self.rho
        frames = well_frames(Y)
        local = self.rho * np.einsum("nij,qj->nqi", frames, q.nodes)
        self.points = (Y.centers[:, None, :] + local).reshape(-1, self.nu)
        self.weights = np.tile(q.weights * self.rho**self.nu, len(Y))
        vals = V(self.rho * q.radii)
        self.v_nodes = np.tile(vals, len(Y))
        self._sv = np.sqrt(self.weights * self.v_nodes)
        self._radii_unique, self._radius_of_node = np.unique(q.radii, return_inverse=True)
        # node distances inside one ball do not depend on its frame
        d_unit = q.nodes[:, None, :] - q.nodes[None, :, :]
        self._d_self = self.rho * np.sqrt(np.einsum("ijk,ijk->ij", d_unit, d_unit))
        self._vmask = self.v_nodes > 0
        self._zero = not self._vmask.any()
        if not self._zero:
            # nodes are distinct, so only the diagonal has zero distance; the
            # kernel is evaluated on the strict upper triangle and mirrored
            n_rows = self.points.shape[0]
            self._iu = np.triu_indices(n_rows, k=1)
            diff = self.points[self._iu[0]] - self.points[self._iu[1]]
            self._d_upper = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            self._gkp_upper = green_unchecked(self.nu, self.kappa_prime, self._d_upper)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def at(self, kappa: float) -> BSSystem:
        if not kappa > 0:
            raise DomainError(f"kappa must be positive, got {kappa}")
        n, Q = len(self.Y), self.quad.size
        if self._zero:
            return BSSystem(kappa, np.zeros((n * Q, n * Q)), n, Q, {"clipped": 0})
        if kappa >= self.kappa_prime:
            return self._at_large(kappa)
        g = green_unchecked(self.nu, kappa, self._d_upper)
        g -= self._gkp_upper
        G = np.empty((n * Q, n * Q))
        G[self._iu] = g
        G[self._iu[1], self._iu[0]] = g
        np.fill_diagonal(G, _green_at_zero_reg(self.nu, kappa, self.kappa_prime))
        e = self.row_defect(kappa)
        clipped = int(np.count_nonzero(e < 0))
        np.maximum(e, 0.0, out=e)
        M = G
        M *= self._sv[:, None]
        M *= self._sv[None, :]
        M[np.diag_indices_from(M)] += e
        diag = {"clipped": clipped, "kappa_prime": self.kappa_prime, "order": list(self.quad.order)}
        return BSSystem(kappa, M, n, Q, diag)

    def _at_large(self, kappa: float) -> BSSystem:
        # Past kappa_prime the split loses its sign guarantee. The kernel is
        # then short-ranged on the node scale, so plain Nystrom with the
        # exact ball integral on the diagonal is used and the result is
        # projected onto the positive semidefinite cone.
        n, Q = len(self.Y), self.quad.size
        G = np.zeros((n * Q, n * Q))
        g = green_unchecked(self.nu, kappa, self._d_upper)
        G[self._iu] = g
        G[self._iu[1], self._iu[0]] = g
        S = ball_self_integral(self.nu, kappa, self.rho * self._radii_unique, self.rho)
        d = self._d_self.copy()
        np.fill_diagonal(d, 1.0)
        near = green_unchecked(self.nu, kappa, d)
        np.fill_diagonal(near, 0.0)
        e = self.v_nodes * np.tile(S[self._radius_of_node] - near @ self.weights[:Q], n)
        M = G
        M *= self._sv[:, None]
        M *= self._sv[None, :]
        M[np.diag_indices_from(M)] += e
        w, U = linalg.eigh(M)
        neg = float(-w.min()) if w.min() < 0 else 0.0
        M = (U * np.maximum(w, 0.0)) @ U.T
        M = 0.5 * (M + M.T)
        diag = {"clipped": 0, "kappa_prime": self.kappa_prime, "order": list(self.quad.order),
                "mode": "unsubtracted", "psd_projection": neg}
        return BSSystem(kappa, M, n, Q, diag)

    def row_defect(self, kappa: float) -> np.ndarray:
        """Diagonal correction ``e_p`` before clipping (all wells)."""
        Q = self.quad.size
        S = ball_self_integral(self.nu, kappa, self.rho * self._radii_unique, self.rho)
        own = _reg_kernel(self.nu, kappa, self.kappa_prime, self._d_self) @ self.weights[:Q]
        return self.v_nodes * np.tile(S[self._radius_of_node] - own, len(self.Y))

    def top_eigenvalues(self, kappa: float, k: int = 1) -> np.ndarray:
        return np.array([v for v, _ in top_eigenpairs(self.at(kappa), k)])


def assemble(V: RadialPotential, Y: WellArray, kappa: float,
             quadrature: BallQuadrature | None = None) -> BSSystem:
    """Birman-Schwinger matrix of ``V`` placed at the centres of ``Y``."""
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    return BSOperator(V, Y, quadrature).at(kappa)


def top_eigenpairs(system: BSSystem | np.ndarray, k: int = 1) -> list[tuple[float, np.ndarray]]:
    """The ``k`` largest eigenvalues (descending) with orthonormal eigenvectors."""
    M = system.matrix if isinstance(system, BSSystem) else np.asarray(system, dtype=float)
    n = M.shape[0]
    if k < 1:
        raise DomainError("k must be at least 1")
    if k > n:
        warnings.warn(f"k = {k} exceeds the matrix size {n}; clamped", stacklevel=2)
        k = n
    if not M.any():
        eye = np.eye(n)
        return [(0.0, eye[:, i]) for i in range(k)]
    vals = vecs = None
    if n > _DENSE_EIGH_ROWS and k < n // 4:
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            vals, vecs = eigsh(M, k=k, which="LA", v0=v0, tol=0.0)
        except Exception:
            vals = None
        if vals is not None:
            res = np.linalg.norm(M @ vecs - vecs * vals, axis=0)
            if res.max() > 1e-10 * np.abs(vals).max():
                vals = None
    if vals is None:
        vals, vecs = linalg.eigh(M, subset_by_index=[n - k, n - 1], driver="evr")
    order = np.argsort(vals)[::-1]
    return [(float(vals[i]), vecs[:, i]) for i in order]


# ---------------------------------------------------------------------------
# spectra

@dataclass
class SpectralResult:
    """Discrete eigenvalues ``-kappa_n^2`` in ascending order with diagnostics."""

    eigenvalues: list[float]
    kappa_values: list[float]
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.eigenvalues) != len(self.kappa_values):
            raise ValueError("eigenvalue and kappa lists differ in length")

    @property
    def no_bound_state(self) -> bool:
        return not self.eigenvalues

    @property
    def ground(self) -> float | None:
        return self.eigenvalues[0] if self.eigenvalues else None

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "kappas": [float(x) for x in self.kappa_values],
            "no_bound_state": self.no_bound_state,
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def kappa_floor(Y: WellArray) -> float:
    """Smallest kappa probed: ``1e-4 / a`` (nominal spacing, else nearest distance, else ``2 rho``)."""
    if Y.spacing_a is not None:
        a = Y.spacing_a
    elif len(Y) > 1:
        d = Y.distances()
        a = float(d[np.triu_indices(len(Y), 1)].min())
    else:
        a = 2.0 * Y.rho
    return 1e-4 / a


def _kappa_ceiling(V: RadialPotential, op: BSOperator) -> float:
    # -Delta - V >= -max V, so every eigenvalue has kappa <= sqrt(max V)
    return min(math.sqrt(V.max_depth()) * (1 + 1e-9), 0.999 * op.kappa_prime)


def _branch_root(op: BSOperator, n: int, lo: float, hi: float, tol: float, cache: dict,
                 hint: float | None = None):
    def lam(kappa):
        if kappa not in cache or len(cache[kappa]) < n:
            cache[kappa] = op.top_eigenvalues(kappa, max(n, len(cache.get(kappa, ()))))
        return cache[kappa][n - 1]

    bracketed = False
    if hint is not None and lo < hint < hi:
        a, b = max(lo, 0.98 * hint), min(hi, 1.02 * hint)
        if lam(a) > 1.0 > lam(b):
            lo, hi, bracketed = a, b, True
    if not bracketed and lam(lo) - 1.0 <= 0:
        return None
    while lam(hi) - 1.0 >= 0:
        if hi >= 0.999 * op.kappa_prime:
            raise ConvergenceError("could not bracket the eigenvalue branch below the regularization scale",
                                   {"branch": n, "kappa_hi": hi})
        hi = min(2 * hi, 0.999 * op.kappa_prime)
    kappa, info = optimize.brentq(lambda k: lam(k) - 1.0, lo, hi, xtol=1e-12 * lo, rtol=1e-14,
                                  maxiter=200, full_output=True)
    residual = abs(lam(kappa) - 1.0)
    if not info.converged or residual > tol:
        raise ConvergenceError(f"branch {n}: |lambda - 1| = {residual:.3g} exceeds tol {tol:g}",
                               {"branch": n, "kappa": kappa, "residual": residual,
                                "iterations": info.iterations})
    return kappa, info.iterations, residual


def discrete_spectrum(V: RadialPotential, Y: WellArray, max_count: int = 10, tol: float = 1e-8,
                      quadrature: BallQuadrature | None = None, floor: float | None = None,
                      kappa_hint: float | None = None) -> SpectralResult:
    """Eigenvalues below zero from the branches ``lambda_n(K(kappa)) = 1``, ``n = 1..max_count``.

    Every branch decreases in ``kappa``; root finding uses Brent's method
    on a bracket from the kappa floor to ``sqrt(max V)``.  A branch that
    stays below 1 at the floor ends the list.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    op = BSOperator(V, Y, quadrature)
    lo = kappa_floor(Y) if floor is None else floor
    diag = {"kappa_floor": lo, "order": list(op.quad.order), "kappa_prime": op.kappa_prime,
            "iterations": [], "residuals": [], "n_rows": op.size}
    if op._zero:
        return SpectralResult([], [], diag)
    hi = _kappa_ceiling(V, op)
    if hi <= lo:
        return SpectralResult([], [], diag)
    cache: dict = {}
    kappas = []
    for n in range(1, min(max_count, op.size) + 1):
        root = _branch_root(op, n, lo, hi, tol, cache, kappa_hint if n == 1 else None)
        if root is None:
            break
        kappa, its, res = root
        kappas.append(kappa)
        diag["iterations"].append(its)
        diag["residuals"].append(res)
        hi = kappa * (1 + 1e-12)
    diag["clipped"] = max((int(np.count_nonzero(op.row_defect(k) < 0)) for k in kappas), default=0)
    eps = [-k * k for k in kappas]
    return SpectralResult(eps, kappas, diag)


def ground_state(V: RadialPotential, Y: WellArray, tol: float = 1e-8,
                 quadrature: BallQuadrature | None = None, floor: float | None = None,
                 kappa_hint: float | None = None) -> SpectralResult:
    """Lowest eigenvalue from ``lambda_max(K(kappa)) = 1``; empty result if none above the floor.

    ``kappa_hint`` (for instance the root of a nearby configuration) is
    tried first as a narrow bracket.
    """
    return discrete_spectrum(V, Y, 1, tol, quadrature, floor, kappa_hint)


def threshold_reference(V: RadialPotential, a: float, nu: int, tol: float = 1e-6,
                        quadrature: BallQuadrature | None = None, n_start: int = 11,
                        max_wells: int | None = None) -> SpectralResult:
    """Straight-chain ground state with ``N = 11, 21, 41, ...`` until successive values agree to ``tol``.

    The result carries the sequence in ``diagnostics["sequence"]``.
    """
    q = default_quadrature(nu) if quadrature is None else quadrature
    cap = MAX_ROWS // q.size if max_wells is None else max_wells
    seq: list[tuple[int, float | None]] = []
    prev = None
    n = n_start
    while n <= cap:
        res = ground_state(V, straight_chain(n, a, nu, V.rho), tol=min(tol, 1e-8), quadrature=q)
        seq.append((n, res.ground))
        if prev is not None:
            both_empty = res.no_bound_state and prev.no_bound_state
            if both_empty or (res.ground is not None and prev.ground is not None
                              and abs(res.ground - prev.ground) < tol):
                res.diagnostics["sequence"] = seq
                return res
        prev = res
        n = 2 * n - 1
    raise ConvergenceError("chain threshold did not converge within the row budget", {"sequence": seq})


def kappa_sweep(V: RadialPotential, Y: WellArray, kappas, k: int = 3,
                quadrature: BallQuadrature | None = None) -> np.ndarray:
    """Table of the ``k`` largest eigenvalues of ``K(kappa)``; rows ``(kappa, l1, ..., lk)``."""
    op = BSOperator(V, Y, quadrature)
    rows = [[float(kap), *op.top_eigenvalues(float(kap), k)] for kap in kappas]
    return np.array(rows)


def write_sweep_csv(table: np.ndarray, path: str | Path) -> None:
    k = table.shape[1] - 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kappa", "lambda_max", *[f"lambda_{i}" for i in range(2, k + 1)]])
        for row in table:
            w.writerow([repr(float(x)) for x in row])
