"""Point sets Y of well centres: chains, circles, loops and spheres."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, OverlapError

# relative slack when comparing distances with 2*rho, so that configurations
# sitting exactly on the touching bound are accepted
_TOUCH_RTOL = 1e-10


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    pair: tuple[int, int] | None = None
    distance: float | None = None
    min_allowed: float | None = None

    def __bool__(self) -> bool:
        return self.ok

    def message(self) -> str:
        if self.ok:
            return "ok"
        i, j = self.pair
        return (f"wells {i + 1} and {j + 1} are {self.distance:.6g} apart, "
                f"below the non-overlap bound {self.min_allowed:.6g}")


@dataclass(frozen=True, eq=False)
class WellArray:
    """Centres of identical balls of radius ``rho`` in ``R^nu``."""

    nu: int
    rho: float
    centers: np.ndarray
    spacing_a: float | None = None
    tag: str = ""

    def __post_init__(self):
        if self.nu not in (2, 3):
            raise DomainError(f"nu must be 2 or 3, got {self.nu}")
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if c.shape[1] != self.nu:
            raise DomainError(f"centers must have {self.nu} columns, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        if self.spacing_a is not None and self.spacing_a < 2 * self.rho * (1 - _TOUCH_RTOL):
            raise OverlapError(f"spacing {self.spacing_a} is below 2*rho = {2 * self.rho}")

    def __len__(self) -> int:
        return self.centers.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    def distances(self) -> np.ndarray:
        diff = self.centers[:, None, :] - self.centers[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=-1))

    def transformed(self, rotation: np.ndarray, shift=None) -> "WellArray":
        c = self.centers @ np.asarray(rotation, dtype=float).T
        if shift is not None:
            c = c + np.asarray(shift, dtype=float)
        return WellArray(self.nu, self.rho, c, self.spacing_a, self.tag)

    def to_csv(self, path: str | Path) -> None:
        cols = ["x", "y", "z"][: self.nu]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", *cols])
            for i, p in enumerate(self.centers):
                w.writerow([i, *(repr(float(v)) for v in p)])


def validate(array: WellArray) -> ValidationReport:
    """Check that all pairwise distances are at least ``2 rho``."""
    n = len(array)
    if n < 2:
        return ValidationReport(True)
    d = array.distances()
    iu = np.triu_indices(n, k=1)
    k = int(np.argmin(d[iu]))
    i, j = int(iu[0][k]), int(iu[1][k])
    dmin = float(d[i, j])
    bound = 2.0 * array.rho
    if dmin >= bound * (1 - _TOUCH_RTOL):
        return ValidationReport(True, (i, j), dmin, bound)
    return ValidationReport(False, (i, j), dmin, bound)


def _checked(array: WellArray) -> WellArray:
    report = validate(array)
    if not report:
        raise OverlapError(report.message(), report)
    return array


def straight_chain(n: int, a: float, nu: int = 2, rho: float = 0.5) -> WellArray:
    """``n`` wells on the first axis with spacing ``a``, centred on the origin."""
    if n < 1:
        raise DomainError("need at least one well")
    if a < 2 * rho * (1 - _TOUCH_RTOL):
        raise OverlapError(f"spacing {a} is below 2*rho = {2 * rho}")
    c = np.zeros((n, nu))
    c[:, 0] = (np.arange(n) - (n - 1) / 2) * a
    return _checked(WellArray(nu, rho, c, a, "straight"))


def bent_chain(n: int, a: float, beta: float, nu: int = 2, rho: float = 0.5) -> WellArray:
    """Two straight arms meeting at a well placed at the origin.

    ``beta`` is the exterior bend angle; the arms leave the vertex in the
    directions ``(+-cos(beta/2), sin(beta/2))`` so ``beta = 0`` is the
    straight chain and the array is mirror symmetric in the second axis.
    """
    if n < 3 or n % 2 == 0:
        raise DomainError("bent chain needs an odd number of wells, at least 3")
    if not 0 <= beta < math.pi:
        raise DomainError("bend angle must lie in [0, pi)")
    if a < 2 * rho * (1 - _TOUCH_RTOL):
        raise OverlapError(f"spacing {a} is below 2*rho = {2 * rho}")
    m = (n - 1) // 2
    k = np.arange(1, m + 1) * a
    c = np.zeros((n, nu))
    cb, sb = math.cos(beta / 2), math.sin(beta / 2)
    # left arm, vertex, right arm in arclength order
    c[:m, 0] = -cb * k[::-1]
    c[:m, 1] = sb * k[::-1]
    c[m + 1:, 0] = cb * k
    c[m + 1:, 1] = sb * k
    return _checked(WellArray(nu, rho, c, a, f"bent(beta={beta:.6g})"))


@dataclass(frozen=True)
class CircleConfig:
    """Wells on a circle of radius ``R`` separated by the angular gaps ``angles``."""

    R: float
    angles: tuple[float, ...]

    def __post_init__(self):
        ang = tuple(float(t) for t in self.angles)
        object.__setattr__(self, "angles", ang)
        if not self.R > 0:
            raise DomainError("circle radius must be positive")
        if len(ang) < 1 or min(ang) <= 0:
            raise DomainError("angular gaps must be positive")
        if abs(sum(ang) - 2 * math.pi) > 1e-12 * max(1, len(ang)):
            raise DomainError(f"angular gaps sum to {sum(ang)!r}, not 2*pi")

    @property
    def n(self) -> int:
        return len(self.angles)

    @classmethod
    def symmetric(cls, n: int, R: float) -> "CircleConfig":
        return cls(R, (2 * math.pi / n,) * n)

    @classmethod
    def from_gaps(cls, R: float, gaps) -> "CircleConfig":
        """Rescale arbitrary positive gaps so that they sum to ``2 pi``."""
        g = np.asarray(gaps, dtype=float)
        g = g * (2 * math.pi / g.sum())
        # push the rounding residue into the largest gap
        g[np.argmax(g)] += 2 * math.pi - g.sum()
        return cls(R, tuple(g))

    def polar_angles(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.angles[:-1])])

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return max(abs(t - 2 * math.pi / self.n) for t in self.angles) <= tol


def circle_array(config: CircleConfig, rho: float, nu: int = 2) -> WellArray:
    """Realise a circle configuration in the first coordinate plane."""
    phi = config.polar_angles()
    c = np.zeros((config.n, nu))
    c[:, 0] = config.R * np.cos(phi)
    c[:, 1] = config.R * np.sin(phi)
    arr = WellArray(nu, rho, c, None, "circle")
    return _checked(arr)


def symmetric_circle_feasible(n: int, R: float, rho: float) -> bool:
    return n < 2 or rho <= R * math.sin(math.pi / n) * (1 + _TOUCH_RTOL)


def random_circle_config(n: int, R: float, rho: float, rng: np.random.Generator,
                         concentration: float = 1.0, max_tries: int = 100000) -> CircleConfig:
    """Draw gaps from a symmetric Dirichlet law, rejecting overlapping draws."""
    if not symmetric_circle_feasible(n, R, rho):
        raise OverlapError(f"{n} wells of radius {rho} do not fit on a circle of radius {R}")
    for _ in range(max_tries):
        gaps = rng.dirichlet(np.full(n, concentration)) * 2 * math.pi
        if np.any(gaps <= 0):
            continue
        cfg = CircleConfig.from_gaps(R, gaps)
        if circle_config_valid(cfg, rho):
            return cfg
    raise OverlapError("rejection sampling found no admissible configuration")


def _unchecked_circle(config: CircleConfig, rho: float) -> WellArray:
    phi = config.polar_angles()
    c = np.column_stack([config.R * np.cos(phi), config.R * np.sin(phi)])
    return WellArray(2, rho, c, None, "circle")


def circle_config_valid(config: CircleConfig, rho: float) -> ValidationReport:
    return validate(_unchecked_circle(config, rho))


def chord_mean_deficit(config: CircleConfig, m: int) -> float:
    """Symmetric chord length minus the mean chord at index separation ``m``.

    ``2R sin(pi m/N) - (1/n_m) sum_{|i-j|=m} 2R sin(beta_ij/2)`` where the
    sum runs over the ``n_m`` distinct chords (``n_m = N/2`` for the
    diameters of an even configuration, ``N`` otherwise).
    """
    n = config.n
    if not 1 <= m <= n // 2:
        raise DomainError(f"separation index must lie in [1, {n // 2}], got {m}")
    th = np.asarray(config.angles)
    # beta_{i,i+m}: sum of m consecutive gaps, cyclically
    beta = np.array([th[(i + np.arange(m)) % n].sum() for i in range(n)])
    chords = 2 * config.R * np.sin(beta / 2)
    if n % 2 == 0 and m == n // 2:
        chords = chords[: n // 2]
    d0 = 2 * config.R * math.sin(math.pi * m / n)
    return float(d0 - chords.mean())


def _closed_polygon(turning, edges) -> np.ndarray:
    heading = np.concatenate([[0.0], np.cumsum(turning[:-1])])
    steps = np.column_stack([np.cos(heading), np.sin(heading)]) * np.asarray(edges)[:, None]
    return np.vstack([[0.0, 0.0], np.cumsum(steps, axis=0)])


def polygon_vertices(turning_angles, edge_lengths=None, perimeter: float = 1.0) -> np.ndarray:
    """Vertices of a closed planar polygon given exterior turning angles.

    Edge ``k`` leaves vertex ``k`` with heading ``sum(turning[:k])``. Edge
    lengths default to equal and are rescaled to the perimeter.
    """
    t = np.asarray(turning_angles, dtype=float)
    e = np.ones_like(t) if edge_lengths is None else np.asarray(edge_lengths, dtype=float)
    if t.shape != e.shape or t.size < 3:
        raise DomainError("need at least three edges with matching turning angles")
    if np.any(e <= 0):
        raise DomainError("edge lengths must be positive")
    e = e * (perimeter / e.sum())
    pts = _closed_polygon(t, e)
    gap = float(np.hypot(*pts[-1]))
    if gap > 1e-9 * perimeter:
        raise DomainError(f"polygon does not close (endpoint misses start by {gap:.3g})")
    return pts[:-1]


def _points_on_polygon(vertices: np.ndarray, n: int) -> np.ndarray:
    closed = np.vstack([vertices, vertices[:1]])
    seg = np.diff(closed, axis=0)
    lens = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    total = cum[-1]
    out = np.empty((n, 2))
    for k in range(n):
        s = k * total / n
        j = min(int(np.searchsorted(cum, s, side="right")) - 1, len(lens) - 1)
        out[k] = vertices[j] + seg[j] * ((s - cum[j]) / lens[j])
    return out


def loop_polygon(n: int, L: float, vertex_angles=None, rho: float = 0.5, nu: int = 2,
                 edge_lengths=None, preset: str | None = None,
                 aspect: float = 3.0) -> WellArray:
    """``n`` wells equidistant in arclength on a closed polygonal loop of length ``L``.

    The loop is given by exterior ``vertex_angles`` (and optional relative
    ``edge_lengths``) or by a preset: ``"regular"`` (regular n-gon, wells at
    the vertices) or ``"rectangle"`` (sides in ratio ``aspect``). The first
    well sits on the first vertex.
    """
    if n < 2:
        raise DomainError("a loop needs at least two wells")
    if preset == "regular":
        vertex_angles = np.full(n, 2 * math.pi / n)
        edge_lengths = None
    elif preset == "rectangle":
        vertex_angles = np.full(4, math.pi / 2)
        edge_lengths = [aspect, 1.0, aspect, 1.0]
    elif preset is not None:
        raise DomainError(f"unknown loop preset {preset!r}")
    if vertex_angles is None:
        raise DomainError("give vertex_angles or a preset")
    verts = polygon_vertices(vertex_angles, edge_lengths, L)
    if edge_lengths is None and len(verts) == n:
        pts = verts
    else:
        pts = _points_on_polygon(verts, n)
    c = np.zeros((n, nu))
    c[:, :2] = pts - pts.mean(axis=0)
    return _checked(WellArray(nu, rho, c, L / n, preset or "loop"))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def polygon_is_simple(vertices) -> bool:
    """True when no two non-adjacent edges of the closed polygon cross."""
    v = np.asarray(vertices, dtype=float)
    m = len(v)
    for i in range(m):
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            if _segments_cross(v[i], v[(i + 1) % m], v[j], v[(j + 1) % m]):
                return False
    return True


def loop_from_vertices(vertices, n: int, rho: float, nu: int = 2, L: float | None = None,
                       check: bool = True) -> WellArray:
    """``n`` wells equidistant in arclength along a closed polygon, starting at its first vertex.

    The polygon is rescaled to perimeter ``L`` when given.
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise DomainError("need at least three planar vertices")
    closed = np.vstack([v, v[:1]])
    per = float(np.sum(np.hypot(*np.diff(closed, axis=0).T)))
    if not per > 0:
        raise DomainError("degenerate polygon")
    if L is not None:
        v = v * (L / per)
        per = L
    if not polygon_is_simple(v):
        raise DomainError("polygon intersects itself")
    pts = _points_on_polygon(v, n)
    c = np.zeros((n, nu))
    c[:, :2] = pts - pts.mean(axis=0)
    arr = WellArray(nu, rho, c, per / n, "loop")
    return _checked(arr) if check else arr


def _icosahedron() -> np.ndarray:
    g = (1 + math.sqrt(5)) / 2
    pts = []
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            pts += [(0, s1, s2 * g), (s1, s2 * g, 0), (s2 * g, 0, s1)]
    p = np.array(pts, dtype=float)
    return p / np.linalg.norm(p, axis=1, keepdims=True)


SPHERE_PRESETS = {
    "antipodal": lambda: np.array([[0, 0, 1.0], [0, 0, -1.0]]),
    "triangle": lambda: np.array([[math.cos(t), math.sin(t), 0.0]
                                  for t in (0, 2 * math.pi / 3, 4 * math.pi / 3)]),
    "tetrahedron": lambda: np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]],
                                    dtype=float) / math.sqrt(3),
    "octahedron": lambda: np.vstack([np.eye(3), -np.eye(3)]),
    "icosahedron": _icosahedron,
}

PRESET_FOR_N = {2: "antipodal", 3: "triangle", 4: "tetrahedron", 6: "octahedron", 12: "icosahedron"}


def sphere_config(n: int | None, R: float, directions=None, rho: float = 0.5,
                  preset: str | None = None) -> WellArray:
    """Wells at ``R * u_i`` for unit vectors ``u_i`` (or one of the equilateral presets)."""
    if preset is not None:
        if preset not in SPHERE_PRESETS:
            raise DomainError(f"unknown sphere preset {preset!r}")
        u = SPHERE_PRESETS[preset]()
    else:
        if directions is None:
            if n not in PRESET_FOR_N:
                raise DomainError("give directions or a preset")
            return sphere_config(n, R, None, rho, preset=PRESET_FOR_N[n])
        u = np.asarray(directions, dtype=float)
        u = u / np.linalg.norm(u, axis=1, keepdims=True)
    if n is not None and len(u) != n:
        raise DomainError(f"expected {n} directions, got {len(u)}")
    return _checked(WellArray(3, rho, R * u, None, preset or "sphere"))


def from_spec(spec: dict, rho: float, nu: int) -> WellArray:
    """Build a well array from a ``[geometry]`` config table."""
    kind = spec.get("kind", "straight")
    n = int(spec.get("n", 1))
    if kind == "straight":
        return straight_chain(n, float(spec.get("a", 4 * rho)), nu, rho)
    if kind == "bent":
        return bent_chain(n, float(spec.get("a", 4 * rho)), float(spec.get("beta", 0.0)), nu, rho)
    if kind == "circle":
        R = float(spec["radius"])
        if "angles" in spec:
            cfg = CircleConfig(R, tuple(spec["angles"]))
        else:
            cfg = CircleConfig.symmetric(n, R)
        return circle_array(cfg, rho, nu)
    if kind == "loop":
        L = float(spec.get("length", spec.get("a", 4 * rho) * n))
        return loop_polygon(n, L, spec.get("angles"), rho, nu, preset=spec.get("preset"),
                            aspect=float(spec.get("aspect", 3.0)))
    if kind == "sphere":
        R = float(spec["radius"])
        preset = spec.get("preset")
        if preset is None and "directions" not in spec:
            preset = PRESET_FOR_N.get(n)
        return sphere_config(n, R, spec.get("directions"), rho, preset=preset)
    raise DomainError(f"unknown geometry kind {kind!r}")


__all__ = [
    "CircleConfig", "ValidationReport", "WellArray", "bent_chain", "chord_mean_deficit",
    "circle_array", "circle_config_valid", "loop_polygon", "polygon_vertices",
    "random_circle_config", "sphere_config", "straight_chain", "symmetric_circle_feasible",
    "validate", "SPHERE_PRESETS", "PRESET_FOR_N",
]
