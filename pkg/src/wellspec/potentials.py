"""Radial potential wells and their scaled (shrinking) families."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DomainError

Profile = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class RadialPotential:
    """A radial well ``r -> coupling * profile(r)`` supported on ``[0, rho]``.

    ``profile`` returns the well *depth*: the Hamiltonian is
    ``-Delta - sum_i V(|x - y_i|)`` so positive values attract.
    ``kind`` and ``depth`` are kept for the named profiles so that analytic
    shortcuts (flat well) stay available after scaling.
    """

    rho: float
    profile: Profile
    coupling: float = 1.0
    nonneg: bool = True
    kind: str = "custom"
    depth: float | None = None
    breakpoints: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError(f"rho must be positive, got {self.rho}")
        if self.nonneg:
            r = np.linspace(0.0, self.rho, 257)
            vals = np.asarray(self.profile(r), dtype=float)
            if np.any(vals < 0):
                raise DomainError("profile takes negative values but nonneg is set")

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = r <= self.rho
        out = np.zeros_like(r)
        if np.any(inside):
            out[inside] = self.coupling * np.asarray(self.profile(r[inside]), dtype=float)
        return out

    def max_depth(self) -> float:
        """Largest sampled value of ``coupling * profile`` on the support."""
        r = np.linspace(0.0, self.rho, 2049)
        if self.breakpoints:
            r = np.union1d(r, np.asarray(self.breakpoints))
        return float(np.max(self(r)))

    def with_coupling(self, coupling: float) -> "RadialPotential":
        return replace(self, coupling=coupling)

    @property
    def is_zero(self) -> bool:
        return self.max_depth() == 0.0 and self.min_depth() == 0.0

    def min_depth(self) -> float:
        r = np.linspace(0.0, self.rho, 2049)
        return float(np.min(self(r)))


def flat_well(depth: float, rho: float = 1.0, coupling: float = 1.0) -> RadialPotential:
    """Step well of constant depth on the ball of radius ``rho``."""
    d = float(depth)
    return RadialPotential(
        rho=rho,
        profile=lambda r: np.full(np.shape(r), d),
        coupling=coupling,
        nonneg=d >= 0,
        kind="flat",
        depth=d,
    )


def gaussian_well(depth: float, rho: float = 1.0, width: float | None = None,
                  coupling: float = 1.0) -> RadialPotential:
    """Gaussian ``depth * exp(-r^2 / (2 w^2))`` cut off at ``rho`` (default ``w = rho/2``)."""
    w = rho / 2 if width is None else width
    d = float(depth)
    return RadialPotential(
        rho=rho,
        profile=lambda r: d * np.exp(-0.5 * (np.asarray(r) / w) ** 2),
        coupling=coupling,
        nonneg=d >= 0,
        kind="gaussian",
        depth=d,
    )


def parabolic_well(depth: float, rho: float = 1.0, coupling: float = 1.0) -> RadialPotential:
    """Truncated parabola ``depth * (1 - (r/rho)^2)``."""
    d = float(depth)
    return RadialPotential(
        rho=rho,
        profile=lambda r: d * (1.0 - (np.asarray(r) / rho) ** 2),
        coupling=coupling,
        nonneg=d >= 0,
        kind="parabolic",
        depth=d,
    )


def tabulated_well(r_samples, v_samples, coupling: float = 1.0,
                   nonneg: bool | None = None) -> RadialPotential:
    """Linear interpolation of sampled values; the support radius is the last sample."""
    r = np.asarray(r_samples, dtype=float)
    v = np.asarray(v_samples, dtype=float)
    if r.ndim != 1 or r.shape != v.shape or r.size < 2:
        raise DomainError("need matching one-dimensional r and V samples (at least two)")
    if np.any(np.diff(r) <= 0) or r[0] < 0:
        raise DomainError("r samples must be nonnegative and strictly increasing")
    if nonneg is None:
        nonneg = bool(np.all(v >= 0))
    return RadialPotential(
        rho=float(r[-1]),
        profile=lambda x: np.interp(x, r, v),
        coupling=coupling,
        nonneg=nonneg,
        kind="table",
        breakpoints=tuple(r.tolist()),
    )


def read_table(path: str | Path, coupling: float = 1.0) -> RadialPotential:
    """Load a two-column ``r,V`` CSV (a header line is allowed)."""
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if not line or line[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(line[0]), float(line[1])))
            except ValueError:
                if rows:
                    raise
    arr = np.array(rows)
    return tabulated_well(arr[:, 0], arr[:, 1], coupling=coupling)


def moment(V: RadialPotential, nu: int) -> float:
    """``coupling * int_0^rho V(r) r^(nu-1) dr``."""
    if nu not in (2, 3):
        raise DomainError(f"nu must be 2 or 3, got {nu}")
    points = [p for p in V.breakpoints if 0 < p < V.rho] or None
    val, _ = integrate.quad(
        lambda r: float(V.profile(np.array([r]))[0]) * r ** (nu - 1),
        0.0, V.rho, epsabs=1e-13, epsrel=1e-12, limit=400, points=points,
    )
    return V.coupling * val


def scaled_well(V: RadialPotential, eps: float, mu_prime0: float = 0.0) -> RadialPotential:
    """The shrunk well ``(mu(eps)/eps^2) V(r/eps)`` on radius ``eps*rho``.

    ``mu(eps) = 1 + mu_prime0 * eps``; the coupling is folded into the
    profile of the result.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    mu = 1.0 + mu_prime0 * eps
    if mu <= 0:
        raise DomainError(f"mu(eps) = {mu} is not positive; eps too large for mu'(0)")
    factor = mu * V.coupling / eps**2
    base = V.profile
    return RadialPotential(
        rho=eps * V.rho,
        profile=lambda r: factor * np.asarray(base(np.asarray(r) / eps), dtype=float),
        coupling=1.0,
        nonneg=V.nonneg,
        kind=V.kind,
        depth=None if V.depth is None else factor * V.depth,
        breakpoints=tuple(eps * b for b in V.breakpoints),
    )


def flat_resonance_depth(rho: float, nu: int = 3) -> float:
    """Depth of the flat well of radius ``rho`` with a zero-energy resonance.

    Only the three-dimensional s-wave case ``(pi / (2 rho))^2`` is supported.
    """
    if nu != 3:
        raise NotImplementedError("zero-energy resonance depth is only provided for nu = 3")
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    return (math.pi / (2.0 * rho)) ** 2


def from_spec(spec: dict) -> RadialPotential:
    """Build a potential from a ``[potential]`` config table."""
    kind = spec.get("kind", "flat")
    rho = float(spec.get("rho", 1.0))
    depth = float(spec.get("depth", 1.0))
    lam = float(spec.get("lambda", 1.0))
    if kind == "flat":
        return flat_well(depth, rho, coupling=lam)
    if kind == "gaussian":
        width = spec.get("width")
        return gaussian_well(depth, rho, None if width is None else float(width), coupling=lam)
    if kind == "parabolic":
        return parabolic_well(depth, rho, coupling=lam)
    if kind == "table":
        return read_table(spec["table_path"], coupling=lam)
    raise DomainError(f"unknown potential kind {kind!r}")
