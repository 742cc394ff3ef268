"""Reference solvers independent of the Birman-Schwinger discretization.

* radial shooting for the bound states of a single radial well,
* the point-interaction (zero-range) spectrum of ``-Delta_{alpha,Y}``,
* the shrinking-well comparison between the two.

Special functions here come from :mod:`scipy.special`, not from
:mod:`wellspec.kernels`, so that the oracles share no code with the solver.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, linalg, optimize, special

from .errors import DomainError
from .geometry import WellArray
from .potentials import RadialPotential, flat_resonance_depth, scaled_well

EULER_GAMMA = float(np.euler_gamma)


# ---------------------------------------------------------------------------
# radial shooting

@dataclass(frozen=True)
class RadialState:
    energy: float
    kappa: float
    channel: int
    multiplicity: int


def _interior(V: RadialPotential, nu: int, channel: int, kappa: float, r_start: float | None = None):
    """Regular solution ``(R, R')`` at ``rho`` of
    ``R'' + (nu-1)/r R' + (V - kappa^2 - L/r^2) R = 0``.
    """
    rho = V.rho
    L = channel**2 if nu == 2 else channel * (channel + 1)
    r0 = 1e-6 * rho if r_start is None else r_start
    k2 = kappa * kappa

    def rhs(r, y):
        v = V.coupling * float(V.profile(np.array([r]))[0])
        return [y[1], -(nu - 1) / r * y[1] - (v - k2 - L / (r * r)) * y[0]]

    # R ~ r^m near the origin; the common factor r0^m drops out of the matching
    y0 = [1.0, channel / r0]
    sol = integrate.solve_ivp(rhs, (r0, rho), y0, method="DOP853", rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y[0, -1], sol.y[1, -1]


def _exterior_log_derivative(nu: int, channel: int, kappa: float, rho: float) -> float:
    x = kappa * rho
    if nu == 2:
        # K_m'(x) = -(K_{m-1}(x) + K_{m+1}(x)) / 2
        km = special.kve(channel, x)
        dk = -0.5 * (special.kve(abs(channel - 1), x) + special.kve(channel + 1, x))
        return kappa * dk / km
    k = special.spherical_kn(channel, x)
    dk = special.spherical_kn(channel, x, derivative=True)
    return kappa * dk / k


def matching_mismatch(V: RadialPotential, nu: int, channel: int, kappa: float) -> float:
    """Normalized Wronskian of the regular interior and decaying exterior solutions at ``rho``.

    Continuous in ``kappa``, bounded by 1 in magnitude, zero exactly at bound states.
    """
    rho = V.rho
    R, dR = _interior(V, nu, channel, kappa)
    q = _exterior_log_derivative(nu, channel, kappa, rho)
    if not np.isfinite(q):
        q = -channel / rho if nu == 2 else -(channel + 1) / rho
    num = rho * dR - R * rho * q
    return num / (math.hypot(R, rho * dR) * math.hypot(1.0, rho * q))


def _kappa_grid(kmin: float, kmax: float, n_log: int = 40, n_lin: int = 80) -> np.ndarray:
    g1 = np.geomspace(kmin, kmax, n_log)
    g2 = np.linspace(0.0, kmax, n_lin + 1)[1:]
    g = np.union1d(g1, g2)
    return g[(g >= kmin) & (g < kmax)]


def radial_channel_states(V: RadialPotential, nu: int, m_max: int = 4,
                          kappa_min: float | None = None) -> list[RadialState]:
    """Bound states per angular channel found by shooting and Brent refinement.

    ``kappa_min`` (default ``1e-14 / rho``) bounds the search from below; a 2D
    well with a very small moment can bind more weakly than that.
    """
    if nu not in (2, 3):
        raise DomainError(f"nu must be 2 or 3, got {nu}")
    vmax = V.max_depth()
    if vmax <= 0:
        return []
    kmin = 1e-14 / V.rho if kappa_min is None else kappa_min
    kmax = math.sqrt(vmax)
    grid = _kappa_grid(kmin, kmax)
    states = []
    for ch in range(m_max + 1):
        f = [matching_mismatch(V, nu, ch, k) for k in grid]
        found = False
        for k0, k1, f0, f1 in zip(grid[:-1], grid[1:], f[:-1], f[1:]):
            if f0 == 0.0:
                root = k0
            elif f0 * f1 < 0:
                root = optimize.brentq(lambda k: matching_mismatch(V, nu, ch, k), k0, k1,
                                       xtol=1e-15 * k0, rtol=1e-14, maxiter=200)
            else:
                continue
            mult = (1 if ch == 0 else 2) if nu == 2 else 2 * ch + 1
            states.append(RadialState(-root * root, root, ch, mult))
            found = True
        # deeper channels bind less; once a channel is empty the higher ones are too
        if not found and ch > 0:
            break
    states.sort(key=lambda s: s.energy)
    return states


def radial_bound_states(V: RadialPotential, nu: int, m_max: int = 4,
                        kappa_min: float | None = None) -> list[float]:
    """Ascending eigenvalues of the single well, repeated by multiplicity."""
    out = []
    for s in radial_channel_states(V, nu, m_max, kappa_min):
        out.extend([s.energy] * s.multiplicity)
    return out


def discrete_count(V: RadialPotential, nu: int, m_max: int = 8) -> int:
    """Number of bound states with multiplicity."""
    return len(radial_bound_states(V, nu, m_max))


# ---------------------------------------------------------------------------
# zero-energy resonance of a 3D well

def zero_energy_solution(V: RadialPotential, n_points: int = 401):
    """s-wave solution ``u = r R`` at energy zero on a grid of ``[0, rho]``.

    Returns ``(r, u, u')`` with ``u(0) = 0`` and ``u'(0) = 1``.
    """
    def rhs(r, y):
        v = V.coupling * float(V.profile(np.array([r]))[0])
        return [y[1], -v * y[0]]

    r = np.linspace(0.0, V.rho, n_points)
    sol = integrate.solve_ivp(rhs, (0.0, V.rho), [0.0, 1.0], method="DOP853", rtol=1e-12,
                              atol=1e-14, t_eval=r)
    return sol.t, sol.y[0], sol.y[1]


def resonance_mismatch(V: RadialPotential) -> float:
    """``rho u'(rho) / u(rho)`` of the zero-energy s-wave solution; zero at a resonance."""
    _, u, du = zero_energy_solution(V, 2)
    return V.rho * du[-1] / u[-1]


def resonance_overlap(V: RadialPotential) -> float:
    """``|(V^{1/2}, f)|^2`` for the normalized resonance function ``f``.

    With ``psi`` the zero-energy solution, ``f`` is proportional to
    ``V^{1/2} psi`` and the overlap equals ``(int V psi)^2 / int V psi^2``.
    The flat well gives ``32 rho / pi`` in closed form.
    """
    if V.kind == "flat":
        return 32.0 * V.rho / math.pi
    r, u, _ = zero_energy_solution(V, 2001)
    v = V(r)
    # psi = u / r, so V psi r^2 = V u r and V psi^2 r^2 = V u^2
    a = integrate.simpson(v * u * r, x=r)
    b = integrate.simpson(v * u * u, x=r)
    return 4.0 * math.pi * a * a / b


def check_resonant(V: RadialPotential, rtol: float = 0.01) -> None:
    """Reject wells that are not (close to) a zero-energy resonance."""
    if V.kind == "flat" and V.depth is not None:
        target = flat_resonance_depth(V.rho)
        depth = V.coupling * V.depth
        if abs(depth - target) > rtol * target:
            raise DomainError(f"flat well depth {depth:.6g} is not within {rtol:.0%} "
                              f"of the resonance depth {target:.6g}")
        return
    mis = resonance_mismatch(V)
    if abs(mis) > 2 * rtol:
        raise DomainError(f"well is not resonant: rho u'/u = {mis:.3g}")


def shrink_alpha(V: RadialPotential, mu_prime0: float) -> float:
    """Point-interaction strength ``-mu'(0) / |(V^{1/2}, f)|^2`` of the shrinking limit, per centre."""
    return -mu_prime0 / resonance_overlap(V)


# ---------------------------------------------------------------------------
# point interactions

@dataclass(frozen=True, eq=False)
class PointInteractionSystem:
    """Zero-range interactions of equal strength ``alpha`` at ``centers``.

    The singular diagonal uses ``alpha + kappa/(4 pi)`` in 3D and
    ``alpha + (ln(kappa/2) + gamma)/(2 pi)`` in 2D.
    """

    nu: int
    alpha: float
    centers: np.ndarray

    def __post_init__(self):
        if self.nu not in (2, 3):
            raise DomainError(f"nu must be 2 or 3, got {self.nu}")
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.shape[1] != self.nu:
            raise DomainError("centre dimension does not match nu")
        if len(c) > 1:
            d = np.sqrt(np.sum((c[:, None] - c[None]) ** 2, axis=-1))
            if d[np.triu_indices(len(c), 1)].min() <= 0:
                raise DomainError("point interaction centres must be distinct")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def n(self) -> int:
        return len(self.centers)

    def distances(self) -> np.ndarray:
        c = self.centers
        return np.sqrt(np.sum((c[:, None] - c[None]) ** 2, axis=-1))

    def xi(self, kappa: float) -> float:
        if self.nu == 3:
            return kappa / (4.0 * math.pi)
        return (math.log(kappa / 2.0) + EULER_GAMMA) / (2.0 * math.pi)

    def gamma_matrix(self, kappa: float) -> np.ndarray:
        d = self.distances()
        off = ~np.eye(self.n, dtype=bool)
        G = np.zeros_like(d)
        if self.nu == 3:
            G[off] = np.exp(-kappa * d[off]) / (4.0 * math.pi * d[off])
        else:
            G[off] = special.k0(kappa * d[off]) / (2.0 * math.pi)
        return (self.alpha + self.xi(kappa)) * np.eye(self.n) - G


def point_spectrum(system: PointInteractionSystem, kappa_min: float = 1e-12) -> list[float]:
    """Eigenvalues ``-kappa^2`` where ``Gamma(kappa)`` is singular, ascending.

    Every eigenvalue of ``Gamma(kappa)`` increases with ``kappa``, so each
    branch changes sign at most once; roots are located per branch.
    """
    def branch(k):
        return linalg.eigvalsh(system.gamma_matrix(k))

    lo = kappa_min
    hi = 1.0
    while branch(hi)[0] <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("could not bracket the point spectrum from above")
    low = branch(lo)
    kappas = []
    for n in range(system.n):
        if low[n] >= 0:
            continue
        k = optimize.brentq(lambda x: branch(x)[n], lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
        kappas.append(k)
    return sorted(-k * k for k in kappas)


# ---------------------------------------------------------------------------
# shrinking wells

@dataclass(frozen=True)
class ShrinkRow:
    eps: float
    e_regular: float
    e_point: float

    @property
    def abs_diff(self) -> float:
        return abs(self.e_regular - self.e_point)


def shrink_convergence(V: RadialPotential, Y: WellArray, mu_prime0: float, eps_list,
                       quadrature=None, tol: float = 1e-10) -> list[ShrinkRow]:
    """Ground state of the scaled wells next to the limiting point-interaction value.

    ``Y`` supplies the centres; the scaled radius ``eps * V.rho`` replaces
    ``Y.rho``.  A missing bound state is tabulated as 0, the bottom of the
    essential spectrum.
    """
    from .bs_solver import ground_state

    if Y.nu != 3:
        raise DomainError("the shrinking limit is implemented for nu = 3 only")
    check_resonant(V)
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise DomainError("eps_list must be strictly decreasing")
    alpha = shrink_alpha(V, mu_prime0)
    pts = point_spectrum(PointInteractionSystem(3, alpha, Y.centers))
    e_point = pts[0] if pts else 0.0
    rows = []
    for eps in eps_list:
        Ve = scaled_well(V, eps, mu_prime0)
        Ye = WellArray(3, Ve.rho, Y.centers, tag=Y.tag)
        res = ground_state(Ve, Ye, tol=tol, quadrature=quadrature)
        rows.append(ShrinkRow(eps, res.ground if res.ground is not None else 0.0, e_point))
    return rows


def write_shrink_csv(rows: list[ShrinkRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "e_regular", "e_point", "abs_diff"])
        for r in rows:
            w.writerow([repr(r.eps), repr(r.e_regular), repr(r.e_point), repr(r.abs_diff)])
