"""Searches for the well arrangement with the highest ground-state energy.

Circle configurations are searched over the simplex of angular gaps, sphere
configurations over unit vectors modulo rotations, and loops over planar
polygons carrying arclength-equidistant wells.  All searches are
multi-start Nelder-Mead with a shared evaluation budget.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import optimize as sopt

from .bs_solver import BallQuadrature, build_quadrature, default_quadrature, ground_state
from .errors import DomainError, OverlapError
from .geometry import (
    PRESET_FOR_N,
    SPHERE_PRESETS,
    CircleConfig,
    WellArray,
    circle_config_valid,
    loop_from_vertices,
    random_circle_config,
    symmetric_circle_feasible,
    validate,
)
from .potentials import RadialPotential

_PENALTY = 1.0e3


@dataclass(frozen=True)
class SearchSpec:
    """Budget and reproducibility settings of a search.

    ``budget`` caps objective evaluations over all restarts; ``orders``
    overrides the default ball quadrature.
    """

    budget: int = 400
    restarts: int = 3
    seed: int = 0
    tol: float = 1e-8
    orders: tuple[int, int] | None = None
    polish: int = 3
    threads: int = 1

    def __post_init__(self):
        if self.budget < 1:
            raise DomainError("budget must be at least 1")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.restarts < 1:
            raise DomainError("restarts must be at least 1")

    def quadrature(self, nu: int) -> BallQuadrature:
        return default_quadrature(nu) if self.orders is None else build_quadrature(nu, *self.orders)


@dataclass
class SearchResult:
    """Best configuration found with the incumbent trace.

    ``trace[k]`` is the best objective after ``k + 1`` evaluations.
    ``preset_objective`` is the value of the symmetric/equilateral start, and
    ``beaten`` tells whether the search found something higher by more than ``tol``.
    """

    best: object
    objective: float
    trace: list[float]
    preset_objective: float | None = None
    beaten: bool | None = None
    evaluations: int = 0
    seed: int = 0
    starts: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        best = self.best
        if isinstance(best, CircleConfig):
            best = {"R": best.R, "angles": list(best.angles)}
        elif isinstance(best, np.ndarray):
            best = best.tolist()
        return {
            "schema": 1,
            "best": best,
            "objective": self.objective,
            "preset_objective": self.preset_objective,
            "beaten": self.beaten,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "trace_summary": {
                "length": len(self.trace),
                "first": self.trace[0] if self.trace else None,
                "last": self.trace[-1] if self.trace else None,
            },
            "starts": self.starts,
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


class _Budgeted:
    """Objective wrapper counting evaluations and recording the incumbent."""

    def __init__(self, f: Callable[[np.ndarray], float], budget: int):
        self.f = f
        self.budget = budget
        self.count = 0
        self.trace: list[float] = []
        self.best_val = -math.inf
        self.best_x = None
        self.local_val = -math.inf
        self.local_x = None

    @property
    def exhausted(self) -> bool:
        return self.count >= self.budget

    def value(self, x) -> float:
        """Objective to maximize; ``-inf`` for infeasible points."""
        self.count += 1
        v = self.f(np.asarray(x, dtype=float))
        if v > self.best_val:
            self.best_val, self.best_x = v, np.array(x, dtype=float)
        if v > self.local_val:
            self.local_val, self.local_x = v, np.array(x, dtype=float)
        self.trace.append(self.best_val)
        return v

    def minimize_from(self, x0, step: float, maxfev: int, tol: float):
        """Nelder-Mead on ``-value`` with a penalty outside the feasible set."""
        x0 = np.asarray(x0, dtype=float)
        self.local_val, self.local_x = -math.inf, None
        simplex = np.vstack([x0, x0 + step * np.eye(x0.size)])

        def neg(x):
            if self.exhausted:
                raise _BudgetExhausted
            v = self.value(x)
            return _PENALTY if not np.isfinite(v) else -v

        try:
            sopt.minimize(neg, x0, method="Nelder-Mead",
                          options={"initial_simplex": simplex, "maxfev": maxfev,
                                   "xatol": 1e-5, "fatol": tol})
        except _BudgetExhausted:
            pass


class _BudgetExhausted(Exception):
    pass


# ---------------------------------------------------------------------------
# circle

def dihedral_key(gaps, decimals: int = 12) -> tuple:
    """Canonical representative of a gap sequence under rotations and reflections.

    Relabeling the wells cyclically or reversing the orientation of the
    circle permutes the gaps this way and leaves the spectrum unchanged.
    """
    g = tuple(np.round(np.asarray(gaps, dtype=float), decimals).tolist())
    n = len(g)
    cands = []
    for seq in (g, g[::-1]):
        cands += [seq[i:] + seq[:i] for i in range(n)]
    return min(cands)


class CircleObjective:
    """``epsilon_1`` of a circle configuration with a dihedral-invariant cache."""

    def __init__(self, V: RadialPotential, rho: float, nu: int = 2,
                 quadrature: BallQuadrature | None = None, tol: float = 1e-10):
        self.V, self.rho, self.nu = V, rho, nu
        self.quad = default_quadrature(nu) if quadrature is None else quadrature
        self.tol = tol
        self.cache: dict[tuple, float] = {}
        self.hint: float | None = None

    def array(self, config: CircleConfig) -> WellArray:
        phi = config.polar_angles()
        c = np.zeros((config.n, self.nu))
        c[:, 0] = config.R * np.cos(phi)
        c[:, 1] = config.R * np.sin(phi)
        arr = WellArray(self.nu, self.rho, c, None, "circle")
        report = validate(arr)
        if not report:
            raise OverlapError(report.message(), report)
        return arr

    def __call__(self, config: CircleConfig) -> float:
        key = (config.R, dihedral_key(config.angles))
        if key in self.cache:
            return self.cache[key]
        res = ground_state(self.V, self.array(config), tol=self.tol, quadrature=self.quad,
                           kappa_hint=self.hint)
        val = res.ground if res.ground is not None else 0.0
        if res.kappa_values:
            self.hint = res.kappa_values[0]
        self.cache[key] = val
        return val


def circle_objective(config: CircleConfig, V: RadialPotential, rho: float, nu: int = 2,
                     quadrature: BallQuadrature | None = None) -> float:
    """Ground-state energy of wells placed by ``config`` (0 if nothing binds)."""
    return CircleObjective(V, rho, nu, quadrature)(config)


def _gaps_from_params(x: np.ndarray) -> np.ndarray:
    return np.append(x, 2 * math.pi - x.sum())


def maximize_circle(n: int, R: float, V: RadialPotential, rho: float,
                    spec: SearchSpec = SearchSpec(), nu: int = 2) -> SearchResult:
    """Multi-start simplex search over the gap simplex.

    The first ``n - 1`` gaps are free and the last closes the circle.  The
    first start is the symmetric configuration; the others are random
    admissible configurations.
    """
    if not symmetric_circle_feasible(n, R, rho):
        raise OverlapError(f"symmetric configuration infeasible: rho > R sin(pi/N) for N = {n}")
    obj = CircleObjective(V, rho, nu, spec.quadrature(nu))
    sym = CircleConfig.symmetric(n, R)
    if n == 1:
        val = obj(sym)
        return SearchResult(sym, val, [val], val, False, 1, spec.seed)
    rng = np.random.default_rng(spec.seed)

    def f(x):
        g = _gaps_from_params(x)
        if np.any(g <= 0):
            return -math.inf
        cfg = CircleConfig.from_gaps(R, g)
        if not circle_config_valid(cfg, rho):
            return -math.inf
        return obj(cfg)

    run = _Budgeted(f, spec.budget)
    sym_val = run.value(np.array(sym.angles[:-1]))
    starts = [np.array(sym.angles[:-1])]
    for _ in range(spec.restarts - 1):
        starts.append(np.array(random_circle_config(n, R, rho, rng).angles[:-1]))
    per = max(spec.budget // len(starts), n + 1)
    summary = []
    for x0 in starts:
        if run.exhausted:
            break
        before = run.count
        run.minimize_from(x0, 0.05, per, spec.tol)
        end = None if run.local_x is None else _gaps_from_params(run.local_x).tolist()
        summary.append({"start": _gaps_from_params(x0).tolist(), "end": end,
                        "end_value": run.local_val, "evaluations": run.count - before})
    best = CircleConfig.from_gaps(R, _gaps_from_params(run.best_x))
    return SearchResult(best, run.best_val, run.trace, sym_val, run.best_val > sym_val + spec.tol,
                        run.count, spec.seed, summary)


@dataclass
class PerturbationReport:
    n: int
    R: float
    magnitude: float | None
    symmetric: float
    values: list[float]
    counterexamples: list[dict]

    @property
    def margins(self) -> np.ndarray:
        return self.symmetric - np.asarray(self.values)

    @property
    def strict(self) -> int:
        return int(np.count_nonzero(self.margins > 0))

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def to_dict(self) -> dict:
        m = self.margins
        return {
            "schema": 1,
            "n": self.n,
            "R": self.R,
            "magnitude": self.magnitude,
            "trials": len(self.values),
            "strict": self.strict,
            "symmetric": self.symmetric,
            "min_margin": float(m.min()) if m.size else None,
            "median_margin": float(np.median(m)) if m.size else None,
            "counterexamples": self.counterexamples,
        }


def perturbed_circle_config(n: int, R: float, rho: float, magnitude: float | None,
                            rng: np.random.Generator, max_tries: int = 10000) -> CircleConfig:
    """Random admissible non-symmetric configuration.

    With ``magnitude`` the symmetric gaps are multiplied by
    ``1 + magnitude * U(-1, 1)`` and renormalized; without it the gaps are
    drawn from the flat Dirichlet law.
    """
    for _ in range(max_tries):
        if magnitude is None:
            cfg = random_circle_config(n, R, rho, rng)
        else:
            g = 1.0 + magnitude * rng.uniform(-1.0, 1.0, n)
            if np.any(g <= 0):
                continue
            cfg = CircleConfig.from_gaps(R, g)
        if not cfg.is_symmetric(1e-9) and circle_config_valid(cfg, rho):
            return cfg
    raise OverlapError("no admissible perturbed configuration found")


def perturbation_test(n: int, R: float, V: RadialPotential, rho: float, trials: int = 100,
                      magnitude: float | None = 0.2, seed: int = 0, nu: int = 2,
                      quadrature: BallQuadrature | None = None, threads: int = 1) -> PerturbationReport:
    """Compare random non-symmetric configurations with the symmetric one.

    Every trial where the perturbed ground state is not strictly below the
    symmetric one is recorded as a counterexample together with its gaps.
    """
    if trials < 1:
        raise DomainError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    q = default_quadrature(nu) if quadrature is None else quadrature
    sym_obj = CircleObjective(V, rho, nu, q)
    e_sym = sym_obj(CircleConfig.symmetric(n, R))
    configs = [perturbed_circle_config(n, R, rho, magnitude, rng) for _ in range(trials)]

    def evaluate(cfg):
        obj = CircleObjective(V, rho, nu, q)
        obj.hint = sym_obj.hint
        return obj(cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(evaluate, configs))
    else:
        values = [evaluate(c) for c in configs]
    bad = [{"angles": list(c.angles), "e1": v, "e1_symmetric": e_sym}
           for c, v in zip(configs, values) if not v < e_sym]
    return PerturbationReport(n, R, magnitude, e_sym, values, bad)


# ---------------------------------------------------------------------------
# sphere

def _rotation_to_frame(u: np.ndarray) -> np.ndarray:
    """Rotate so that ``u[0]`` is the north pole and ``u[1]`` lies in the xz half-plane x > 0."""
    e3 = u[0] / np.linalg.norm(u[0])
    v = u[1] - np.dot(u[1], e3) * e3
    if np.linalg.norm(v) < 1e-12:
        v = np.eye(3)[np.argmin(np.abs(e3))]
        v = v - np.dot(v, e3) * e3
    e1 = v / np.linalg.norm(v)
    e2 = np.cross(e3, e1)
    return np.vstack([e1, e2, e3])


def sphere_params(directions) -> np.ndarray:
    """Spherical angles of unit vectors after fixing the rotation gauge."""
    u = np.asarray(directions, dtype=float)
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    w = u @ _rotation_to_frame(u).T
    theta = np.arccos(np.clip(w[:, 2], -1, 1))
    phi = np.arctan2(w[:, 1], w[:, 0])
    return np.concatenate([[theta[1]], np.column_stack([theta[2:], phi[2:]]).ravel()])


def sphere_directions(params: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`sphere_params`: first vector at the pole, second at azimuth 0."""
    u = np.zeros((n, 3))
    u[0] = (0, 0, 1)
    if n > 1:
        t = params[0]
        u[1] = (math.sin(t), 0.0, math.cos(t))
    rest = np.asarray(params[1:]).reshape(-1, 2)
    for k, (t, p) in enumerate(rest, start=2):
        u[k] = (math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t))
    return u


def _random_sphere(n: int, R: float, rho: float, rng, max_tries: int = 100000) -> np.ndarray:
    for _ in range(max_tries):
        u = rng.standard_normal((n, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        if validate(WellArray(3, rho, R * u)):
            return u
    raise OverlapError("could not place the wells on the sphere without overlap")


def _multistart(f, starts: list[np.ndarray], spec: SearchSpec, step: float):
    """Evaluate all starts, then polish the best few (always including the first)."""
    run = _Budgeted(f, spec.budget)
    vals = []
    for x in starts:
        if run.exhausted:
            break
        vals.append(run.value(x))
    order = [0] + [i for i in np.argsort(vals)[::-1] if i != 0]
    chosen = order[: max(1, spec.polish)]
    per = max((spec.budget - run.count) // max(len(chosen), 1), 1)
    summary = []
    for i in chosen:
        if run.exhausted:
            break
        before = run.count
        run.minimize_from(starts[i], step, per, spec.tol)
        summary.append({"start_index": int(i), "start_value": float(vals[i]),
                        "end_value": run.local_val, "evaluations": run.count - before})
    return run, vals, summary


def maximize_sphere(n: int, R: float, V: RadialPotential, rho: float,
                    spec: SearchSpec = SearchSpec()) -> SearchResult:
    """Multi-start search over ``n`` wells on a sphere of radius ``R``.

    Starts are the equilateral preset (when ``n`` has one) and
    ``spec.restarts`` random admissible configurations; the best starts are
    polished by Nelder-Mead.  For the preset sizes the result records
    whether the preset was beaten.
    """
    if n < 2:
        raise DomainError("need at least two wells on the sphere")
    q = spec.quadrature(3)
    rng = np.random.default_rng(spec.seed)
    preset = PRESET_FOR_N.get(n)
    starts = []
    if preset is not None:
        starts.append(sphere_params(SPHERE_PRESETS[preset]()))
    starts += [sphere_params(_random_sphere(n, R, rho, rng)) for _ in range(spec.restarts)]
    hint = [None]

    def f(x):
        Y = WellArray(3, rho, R * sphere_directions(x, n), None, "sphere")
        if not validate(Y):
            return -math.inf
        res = ground_state(V, Y, tol=1e-10, quadrature=q, kappa_hint=hint[0])
        if res.kappa_values:
            hint[0] = res.kappa_values[0]
        return res.ground if res.ground is not None else 0.0

    run, vals, summary = _multistart(f, starts, spec, 0.05)
    preset_val = vals[0] if preset is not None else None
    beaten = None if preset_val is None else bool(run.best_val > preset_val + spec.tol)
    best = R * sphere_directions(run.best_x, n)
    return SearchResult(best, run.best_val, run.trace, preset_val, beaten, run.count, spec.seed, summary)


# ---------------------------------------------------------------------------
# loops

def _loop_vertices(params: np.ndarray, n: int) -> np.ndarray:
    # first vertex at the origin, second on the positive first axis
    v = np.zeros((n, 2))
    v[1, 0] = params[0]
    v[2:] = np.asarray(params[1:]).reshape(-1, 2)
    return v


def _loop_params(vertices: np.ndarray) -> np.ndarray:
    v = np.asarray(vertices, dtype=float) - vertices[0]
    ang = math.atan2(v[1, 1], v[1, 0])
    c, s = math.cos(-ang), math.sin(-ang)
    w = v @ np.array([[c, -s], [s, c]]).T
    return np.concatenate([[w[1, 0]], w[2:].ravel()])


def regular_polygon(n: int, L: float) -> np.ndarray:
    phi = 2 * math.pi * np.arange(n) / n
    side = L / n
    r = side / (2 * math.sin(math.pi / n))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def loop_objective(vertices, n: int, L: float, V: RadialPotential, rho: float, nu: int = 2,
                   quadrature: BallQuadrature | None = None) -> float:
    """Ground state of ``n`` arclength-equidistant wells on the polygon ``vertices`` (perimeter ``L``)."""
    Y = loop_from_vertices(vertices, n, rho, nu, L)
    res = ground_state(V, Y, tol=1e-10, quadrature=quadrature)
    return res.ground if res.ground is not None else 0.0


def maximize_loop(n: int, L: float, V: RadialPotential, rho: float,
                  spec: SearchSpec = SearchSpec(), nu: int = 2) -> SearchResult:
    """Multi-start search over planar ``n``-gons of perimeter ``L``.

    Wells sit at arclength multiples of ``L/n`` from the first vertex, so for
    the regular polygon they are its vertices.  Self-intersecting polygons
    and overlapping wells are infeasible.
    """
    if n < 3:
        raise DomainError("a loop of fewer than three wells degenerates to a segment")
    if L / n < 2 * rho:
        raise OverlapError(f"perimeter {L} is too short for {n} wells of radius {rho}")
    q = spec.quadrature(nu)
    rng = np.random.default_rng(spec.seed)
    reg = regular_polygon(n, L)
    side = L / n
    starts = [_loop_params(reg)]
    tries = 0
    while len(starts) < spec.restarts + 1 and tries < 1000 * (spec.restarts + 1):
        tries += 1
        v = reg + rng.uniform(-0.3, 0.3, reg.shape) * side
        try:
            loop_from_vertices(v, n, rho, nu, L)
        except (DomainError, OverlapError):
            continue
        starts.append(_loop_params(v))
    hint = [None]

    def f(x):
        try:
            Y = loop_from_vertices(_loop_vertices(x, n), n, rho, nu, L)
        except (DomainError, OverlapError):
            return -math.inf
        res = ground_state(V, Y, tol=1e-10, quadrature=q, kappa_hint=hint[0])
        if res.kappa_values:
            hint[0] = res.kappa_values[0]
        return res.ground if res.ground is not None else 0.0

    run, vals, summary = _multistart(f, starts, spec, 0.05 * side)
    best = _loop_vertices(run.best_x, n)
    best = best * (L / np.sum(np.hypot(*np.diff(np.vstack([best, best[:1]]), axis=0).T)))
    return SearchResult(best, run.best_val, run.trace, vals[0], bool(run.best_val > vals[0] + spec.tol),
                        run.count, spec.seed, summary)
