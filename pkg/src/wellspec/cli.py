"""Batch command-line interface.

Every command reads a TOML configuration file, writes CSV/JSON artifacts to
the output directory together with ``manifest.json``, and exits with

* 0 on success (including "no bound state"),
* 2 on configuration errors,
* 3 when a numerical procedure does not converge.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, bs_solver, floquet, geometry, optimize, oracles, potentials
from .errors import ConvergenceError, DomainError, OverlapError, SpectralBoundViolation

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ("spectrum", "bands", "bend-sweep", "circle-opt", "sphere-opt", "loop-opt",
            "oracle", "converge-shrink")

# allowed keys per section; None marks a free-form value
SCHEMA: dict[str, set[str]] = {
    "": {"command", "seed", "nu", "potential", "geometry", "solver", "spectrum", "bands",
         "bend_sweep", "search", "perturbation", "oracle", "shrink"},
    "potential": {"kind", "rho", "depth", "lambda", "width", "table_path"},
    "geometry": {"kind", "n", "a", "beta", "radius", "angles", "preset", "directions",
                 "length", "aspect"},
    "solver": {"radial_order", "angular_order", "tol", "kappa_floor", "max_count"},
    "spectrum": {"threshold", "threshold_a", "threshold_tol", "threshold_max_wells", "sweep"},
    "bands": {"a", "T", "h", "theta_points", "k", "richardson"},
    "bend_sweep": {"betas", "n", "a"},
    "search": {"n", "radius", "length", "budget", "restarts", "polish", "tol"},
    "perturbation": {"trials", "magnitude"},
    "oracle": {"kind", "m_max", "alpha", "centers"},
    "shrink": {"eps", "mu_prime0", "centers"},
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """Parsed configuration; sections stay as plain dictionaries."""

    raw: dict
    path: Path | None = None
    text: str = ""
    overrides: dict = field(default_factory=dict)

    @property
    def nu(self) -> int:
        return int(self.raw.get("nu", 2))

    @property
    def seed(self) -> int:
        return int(self.overrides.get("seed", self.raw.get("seed", 0)))

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))

    @property
    def tol(self) -> float:
        if "tol" in self.overrides:
            return float(self.overrides["tol"])
        return float(self.section("solver").get("tol", 1e-8))

    def quadrature(self) -> bs_solver.BallQuadrature:
        s = self.section("solver")
        nr, na = bs_solver.DEFAULT_ORDERS[self.nu]
        return bs_solver.build_quadrature(self.nu, int(s.get("radial_order", nr)),
                                          int(s.get("angular_order", na)))

    def orders(self) -> tuple[int, int]:
        return self.quadrature().order

    def potential(self) -> potentials.RadialPotential:
        spec = self.section("potential")
        if "table_path" in spec and self.path is not None:
            p = Path(spec["table_path"])
            spec["table_path"] = str(p if p.is_absolute() else self.path.parent / p)
        return potentials.from_spec(spec)

    def geometry(self, rho: float) -> geometry.WellArray:
        return geometry.from_spec(self.section("geometry"), rho, self.nu)

    def hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def _check_keys(data: dict, prefix: str = "") -> None:
    allowed = SCHEMA.get(prefix)
    if allowed is None:
        return
    for key, val in data.items():
        dotted = f"{prefix}.{key}" if prefix else key
        if key not in allowed:
            raise ConfigError(f"unknown key {dotted!r}")
        if isinstance(val, dict):
            _check_keys(val, key if not prefix else dotted)


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a configuration file; raises :class:`ConfigError`."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    _check_keys(data)
    nu = data.get("nu", 2)
    if nu not in (2, 3):
        raise ConfigError(f"key 'nu': expected 2 or 3, got {nu!r}")
    table = data.get("potential", {}).get("table_path")
    if table is not None:
        tp = Path(table)
        tp = tp if tp.is_absolute() else p.parent / tp
        if not tp.exists():
            raise ConfigError(f"key 'potential.table_path': file {tp} does not exist")
    return RunConfig(data, p, text)


# ---------------------------------------------------------------------------
# output helpers

def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(type(obj))


def write_json(path: Path, data: dict) -> None:
    data = {"schema": 1, **data}
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


# ---------------------------------------------------------------------------
# commands

def cmd_spectrum(cfg: RunConfig, out: Path) -> list[str]:
    V = cfg.potential()
    Y = cfg.geometry(V.rho)
    q = cfg.quadrature()
    s = cfg.section("solver")
    spec = cfg.section("spectrum")
    res = bs_solver.discrete_spectrum(V, Y, int(s.get("max_count", 10)), cfg.tol, q,
                                      s.get("kappa_floor"))
    data = res.to_dict()
    data["n_wells"] = len(Y)
    if spec.get("threshold", False):
        a = float(spec.get("threshold_a", Y.spacing_a or 4 * V.rho))
        cap = spec.get("threshold_max_wells")
        thr = bs_solver.threshold_reference(V, a, cfg.nu, float(spec.get("threshold_tol", 1e-3)), q,
                                            max_wells=None if cap is None else int(cap))
        data["e0_reference"] = thr.ground
        data["threshold_sequence"] = thr.diagnostics.get("sequence")
    write_json(out / "spectrum.json", data)
    files = ["spectrum.json"]
    if "sweep" in spec:
        kappas = np.asarray(spec["sweep"], dtype=float)
        table = bs_solver.kappa_sweep(V, Y, kappas, 3, q)
        bs_solver.write_sweep_csv(table, out / "kappa_sweep.csv")
        files.append("kappa_sweep.csv")
    Y.to_csv(out / "array.csv")
    return files + ["array.csv"]


def cmd_bands(cfg: RunConfig, out: Path) -> list[str]:
    if cfg.nu != 2:
        raise ConfigError("key 'nu': band structures are available for nu = 2 only")
    V = cfg.potential()
    b = cfg.section("bands")
    a = float(b.get("a", 4 * V.rho))
    T = float(b.get("T", 6 * V.rho))
    h = float(b.get("h", V.rho / 8))
    k = int(b.get("k", 4))
    bands = floquet.band_structure(V, a, T, h, int(b.get("theta_points", 9)), k)
    nb, db = floquet.bracketing_bounds(V, a, T, h, k)
    bands.to_csv(out / "bands.csv")
    summary = bands.summary()
    summary.update(neumann=nb.tolist(), dirichlet=db.tolist(),
                   single_well_count=oracles.discrete_count(V, 2))
    summary["gap_count"] = floquet.gap_count(bands, summary["single_well_count"])
    if b.get("richardson", False):
        summary["richardson_edges"] = floquet.richardson_edges(V, a, T, h, k).tolist()
    write_json(out / "bands.json", summary)
    return ["bands.csv", "bands.json"]


def cmd_bend_sweep(cfg: RunConfig, out: Path) -> list[str]:
    V = cfg.potential()
    bs = cfg.section("bend_sweep")
    g = cfg.section("geometry")
    n = int(bs.get("n", g.get("n", 11)))
    a = float(bs.get("a", g.get("a", 4 * V.rho)))
    betas = [float(x) for x in bs.get("betas", [0.0, math.pi / 12, math.pi / 6, math.pi / 4, math.pi / 3])]
    q = cfg.quadrature()
    straight = bs_solver.ground_state(V, geometry.straight_chain(n, a, cfg.nu, V.rho), cfg.tol, q)
    if straight.no_bound_state:
        raise ConvergenceError("straight chain has no bound state; nothing to compare", straight.diagnostics)
    e0 = straight.ground
    rows = []
    for beta in betas:
        r = straight if beta == 0 else bs_solver.ground_state(
            V, geometry.bent_chain(n, a, beta, cfg.nu, V.rho), cfg.tol, q, kappa_hint=straight.kappa_values[0])
        e1 = r.ground if r.ground is not None else 0.0
        kap = r.kappa_values[0] if r.kappa_values else 0.0
        rows.append((beta, e1, e0, n, kap))
    write_csv(out / "bend_sweep.csv", ["beta", "e1", "e0_reference", "n_wells", "kappa"], rows)
    e1 = [r[1] for r in rows]
    write_json(out / "bend_sweep.json", {
        "e0_reference": e0,
        "tol": cfg.tol,
        # asserted: every bent row lies below the straight chain by more than tol
        "bent_below_straight": bool(all(r[1] < e0 - cfg.tol for r in rows if r[0] > 0)),
        # reported only
        "monotone_in_beta": bool(all(x > y for x, y in zip(e1, e1[1:]))),
    })
    return ["bend_sweep.csv", "bend_sweep.json"]


def _search_spec(cfg: RunConfig, default_orders=None) -> optimize.SearchSpec:
    s = cfg.section("search")
    solver = cfg.section("solver")
    orders = None
    if "radial_order" in solver or "angular_order" in solver:
        orders = cfg.orders()
    elif default_orders is not None:
        orders = default_orders
    return optimize.SearchSpec(budget=int(s.get("budget", 400)), restarts=int(s.get("restarts", 3)),
                               seed=cfg.seed, tol=float(s.get("tol", 1e-8)), orders=orders,
                               polish=int(s.get("polish", 3)),
                               threads=int(cfg.overrides.get("threads", 1)))


def cmd_circle_opt(cfg: RunConfig, out: Path) -> list[str]:
    V = cfg.potential()
    s = cfg.section("search")
    n = int(s.get("n", cfg.section("geometry").get("n", 3)))
    R = float(s.get("radius", cfg.section("geometry").get("radius", 4 * V.rho)))
    spec = _search_spec(cfg)
    res = optimize.maximize_circle(n, R, V, V.rho, spec, cfg.nu)
    data = res.to_dict()
    files = ["circle_opt.json"]
    p = cfg.section("perturbation")
    if p:
        rep = optimize.perturbation_test(n, R, V, V.rho, int(p.get("trials", 100)),
                                         p.get("magnitude", 0.2), cfg.seed, cfg.nu,
                                         spec.quadrature(cfg.nu), spec.threads)
        data["perturbation"] = rep.to_dict()
        if not rep.passed:
            write_json(out / "counterexamples.json", {"counterexamples": rep.counterexamples})
            files.append("counterexamples.json")
    write_json(out / "circle_opt.json", data)
    write_csv(out / "circle_trace.csv", ["evaluation", "incumbent"], enumerate(res.trace, 1))
    return files + ["circle_trace.csv"]


def cmd_sphere_opt(cfg: RunConfig, out: Path) -> list[str]:
    V = cfg.potential()
    s = cfg.section("search")
    n = int(s.get("n", cfg.section("geometry").get("n", 4)))
    R = float(s.get("radius", cfg.section("geometry").get("radius", 4 * V.rho)))
    res = optimize.maximize_sphere(n, R, V, V.rho, _search_spec(cfg, (4, 4)))
    write_json(out / "sphere_opt.json", res.to_dict())
    files = ["sphere_opt.json"]
    if res.beaten:
        write_json(out / "preset_beaten.json", res.to_dict())
        files.append("preset_beaten.json")
    return files


def cmd_loop_opt(cfg: RunConfig, out: Path) -> list[str]:
    V = cfg.potential()
    s = cfg.section("search")
    n = int(s.get("n", cfg.section("geometry").get("n", 3)))
    L = float(s.get("length", cfg.section("geometry").get("length", 4 * V.rho * n)))
    res = optimize.maximize_loop(n, L, V, V.rho, _search_spec(cfg), cfg.nu)
    write_json(out / "loop_opt.json", res.to_dict())
    files = ["loop_opt.json"]
    if res.beaten:
        write_json(out / "preset_beaten.json", res.to_dict())
        files.append("preset_beaten.json")
    return files


def cmd_oracle(cfg: RunConfig, out: Path, kind: str | None) -> list[str]:
    o = cfg.section("oracle")
    kind = kind or o.get("kind", "radial")
    if kind == "radial":
        V = cfg.potential()
        states = oracles.radial_channel_states(V, cfg.nu, int(o.get("m_max", 4)))
        evs = oracles.radial_bound_states(V, cfg.nu, int(o.get("m_max", 4)))
        write_json(out / "oracle_radial.json", {
            "eigenvalues": evs,
            "no_bound_state": not evs,
            "channels": [{"energy": s.energy, "kappa": s.kappa, "channel": s.channel,
                          "multiplicity": s.multiplicity} for s in states],
            "moment": potentials.moment(V, cfg.nu),
        })
        return ["oracle_radial.json"]
    if kind == "point":
        centers = o.get("centers")
        if centers is None:
            raise ConfigError("key 'oracle.centers' is required for the point oracle")
        system = oracles.PointInteractionSystem(cfg.nu, float(o.get("alpha", 0.0)), centers)
        evs = oracles.point_spectrum(system)
        write_json(out / "oracle_point.json", {"eigenvalues": evs, "kappas": [math.sqrt(-e) for e in evs],
                                               "no_bound_state": not evs, "alpha": system.alpha})
        return ["oracle_point.json"]
    raise ConfigError(f"key 'oracle.kind': unknown oracle {kind!r}")


def cmd_converge_shrink(cfg: RunConfig, out: Path) -> list[str]:
    if cfg.nu != 3:
        raise ConfigError("key 'nu': the shrinking limit needs nu = 3")
    V = cfg.potential()
    s = cfg.section("shrink")
    centers = s.get("centers", [[0.0, 0.0, 0.0]])
    eps = s.get("eps", [0.4, 0.2, 0.1])
    Y = geometry.WellArray(3, V.rho * max(eps), centers)
    rows = oracles.shrink_convergence(V, Y, float(s.get("mu_prime0", 0.0)), eps, cfg.quadrature(),
                                      min(cfg.tol, 1e-10))
    oracles.write_shrink_csv(rows, out / "shrink.csv")
    diffs = [r.abs_diff for r in rows]
    write_json(out / "shrink.json", {
        "alpha": oracles.shrink_alpha(V, float(s.get("mu_prime0", 0.0))),
        "strictly_decreasing": bool(all(x > y for x, y in zip(diffs, diffs[1:]))),
    })
    return ["shrink.csv", "shrink.json"]


def run(command: str, config_path: str | Path, output_dir: str | Path, *, seed: int | None = None,
        threads: int | None = None, tol: float | None = None, oracle_kind: str | None = None) -> int:
    """Execute one command; returns the process exit status."""
    out = Path(output_dir)
    started = time.time()
    try:
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}")
        cfg = load_config(config_path)
        for key, val in (("seed", seed), ("threads", threads), ("tol", tol)):
            if val is not None:
                cfg.overrides[key] = val
        out.mkdir(parents=True, exist_ok=True)
        handlers = {
            "spectrum": cmd_spectrum, "bands": cmd_bands, "bend-sweep": cmd_bend_sweep,
            "circle-opt": cmd_circle_opt, "sphere-opt": cmd_sphere_opt, "loop-opt": cmd_loop_opt,
            "converge-shrink": cmd_converge_shrink,
        }
        if command == "oracle":
            files = cmd_oracle(cfg, out, oracle_kind)
        else:
            files = handlers[command](cfg, out)
    except (ConfigError, DomainError, OverlapError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, SpectralBoundViolation) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "diagnostics.json", {"error": str(exc),
                                              "diagnostics": getattr(exc, "diagnostics", {})})
        return EXIT_NUMERIC
    manifest = {
        "command": command,
        "oracle_kind": oracle_kind,
        "config_path": str(cfg.path),
        "config_sha256": cfg.hash(),
        "config": cfg.raw,
        "seed": cfg.seed,
        "tol": cfg.tol,
        "threads": cfg.overrides.get("threads", 1),
        "artifacts": files,
        "versions": {"wellspec": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "wall_time_s": round(time.time() - started, 3),
    }
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wellspec", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("kind", nargs="?", choices=("radial", "point"),
                   help="oracle kind (only for the 'oracle' command)")
    p.add_argument("--config", required=True, help="TOML configuration file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None, help="worker cap for parallel evaluations")
    p.add_argument("--tol", type=float, default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.kind is not None and args.command != "oracle":
        print("config error: a kind argument is only accepted by 'oracle'", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, args.config, args.out, seed=args.seed, threads=args.threads,
               tol=args.tol, oracle_kind=args.kind)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
