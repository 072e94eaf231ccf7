"""Command-line front end.

Each subcommand reads its settings from flags and, optionally, an INI file
given by ``--config``; flags win over the file, the file wins over the
defaults.  Numbers are read as exact decimals before conversion.  Every run
writes a JSON document recording the resolved settings.

Exit codes: 0 success, 1 configuration or gate error (a single
``error: <reason>`` line on stderr), 2 weight check diverging, 3 weight
check inconclusive, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGING, EXIT_INCONCLUSIVE, EXIT_NONCONVERGENCE = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Opt:
    name: str
    kind: str
    default: object = None
    help: str = ""


_COMMON = [
    Opt("p", "float", 2.0, "energy exponent"),
    Opt("n", "int", 2, "dimension"),
    Opt("out", "str", None, "output directory (stdout JSON only if omitted)"),
]

_GRID = [
    Opt("domain", "str", None, "domain file (plain-text region format)"),
    Opt("example", "str", None, "built-in example domain instead of a file"),
    Opt("transform", "str", "inversion", "inversion or sphericalization"),
    Opt("center", "floats", None, "inversion centre / sphericalization base point"),
    Opt("h", "float", 1 / 64, "grid spacing"),
    Opt("box", "floats", None, "grid box lo1,..,lon,hi1,..,hin"),
    Opt("r_inf", "float", 1 / 32, "sphericalization: d_a radius of the cut-off ball at infinity"),
    Opt("symmetry_axes", "ints", (), "grid axes with a symmetry plane at their low face"),
    Opt("axisymmetric", "bool", False, "rotationally symmetric about the last axis (inversion only)"),
    Opt("grad_tol", "float", 1e-8, "solver tolerance"),
    Opt("max_iters", "int", 500, "Newton steps per regularization stage"),
]

SPECS = {
    "sphericalize": _COMMON + [
        Opt("a", "floats", None, "base point (default origin)"),
        Opt("pairs", "str", "", "probe pairs 'x1,x2:y1,y2;...'; 'inf' is the point at infinity"),
        Opt("points", "str", "", "density probes 'x1,x2;...'"),
        Opt("disc_radius", "float", None, "tabulate densities on a disc of this radius"),
        Opt("disc_points", "int", 9, "grid points per axis on the disc"),
    ],
    "check-weight": _COMMON + [
        Opt("alpha", "float", 0.0, "power weight exponent"),
        Opt("weight_center", "floats", None, "singular point of the weight (default origin)"),
        Opt("seed", "int", 0, "sampler seed"),
        Opt("radius_min", "float", 1e-3, ""),
        Opt("radius_max", "float", 1.0, ""),
        Opt("balls_per_decade", "int", 10, ""),
        Opt("nodes_per_ball", "int", 64, ""),
        Opt("bound_factor", "float", 10.0, ""),
        Opt("slope_tol", "float", 0.05, ""),
    ],
    "solve": _COMMON + _GRID + [
        Opt("data", "str", "constant:0", "boundary data: constant:c | step:axis,t0,width | linear:axis"),
        Opt("data_inf", "float", None, "value at infinity (required when p < n)"),
    ],
    "harmonic-measure": _COMMON + _GRID + [
        Opt("set", "str", "infinity", "E: all | none | infinity | box:lo..;hi.. [+infinity]"),
        Opt("eval", "str", "", "evaluation points 'x1,x2;...'"),
        Opt("deltas", "floats", None, "decreasing envelope widths (default 8h,4h,2h)"),
    ],
    "check-regularity": _COMMON + [
        Opt("domain", "str", None, "domain file"),
        Opt("example", "str", None, "built-in example domain"),
        Opt("a", "floats", None, "base point"),
        Opt("k", "float", 2.0, "radius of the removed ball"),
        Opt("h", "float", None, "analysis grid spacing"),
        Opt("r_max", "float", 1024.0, "truncation radius"),
        Opt("parabolicity", "bool", False, "also estimate p-parabolicity"),
        Opt("levels", "int", 5, "parabolicity levels"),
        Opt("rho0", "float", 2.0, "parabolicity inner radius"),
        Opt("parabolicity_h", "float", 1 / 16, "parabolicity grid spacing"),
        Opt("symmetry_axes", "ints", (), "parabolicity symmetry axes"),
        Opt("axisymmetric", "bool", False, "parabolicity in the meridian plane"),
    ],
    "invert": _COMMON + [
        Opt("domain", "str", None, "domain file"),
        Opt("example", "str", None, "built-in example domain"),
        Opt("center", "floats", None, "inversion centre (default origin)"),
    ],
    "capacity": _COMMON + [
        Opt("inner", "float", 1.0, "radius of the ball E"),
        Opt("outer", "float", 8.0, "radius of the window ball"),
        Opt("h", "float", 1 / 64, "grid spacing"),
        Opt("symmetry_axes", "ints", None, "symmetry axes (default all for n=2)"),
        Opt("axisymmetric", "bool", None, "meridian reduction (default on for n=3)"),
        Opt("grad_tol", "float", 1e-8, "solver tolerance"),
    ],
}


def _dec(s: str) -> Decimal:
    try:
        d = Decimal(s.strip())
    except InvalidOperation:
        raise ConfigError(f"not a number: {s!r}") from None
    if not d.is_finite():
        raise ConfigError(f"not a finite number: {s!r}")
    return d


def _convert(opt: Opt, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    s = raw.strip()
    if opt.kind == "str":
        return s
    if opt.kind == "bool":
        low = s.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{opt.name}: not a boolean: {raw!r}")
    if opt.kind == "float":
        if "/" in s:
            a, b = s.split("/", 1)
            return float(_dec(a) / _dec(b))
        return float(_dec(s))
    if opt.kind == "int":
        d = _dec(s)
        if d != d.to_integral_value():
            raise ConfigError(f"{opt.name}: not an integer: {raw!r}")
        return int(d)
    if opt.kind == "floats":
        return tuple(float(_dec(v)) for v in s.split(",") if v.strip()) if s else ()
    if opt.kind == "ints":
        return tuple(int(_dec(v)) for v in s.split(",") if v.strip()) if s else ()
    raise ConfigError(f"unknown option kind {opt.kind}")


@dataclass
class RunConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, **{k: list(v) if isinstance(v, tuple) else v
                                                 for k, v in self.values.items()}}


def resolve_config(sub: str, ns: argparse.Namespace) -> RunConfig:
    """Merge defaults, the ``--config`` file and flags, then validate."""
    file_vals = {}
    if getattr(ns, "config", None):
        cp = configparser.ConfigParser()
        try:
            with open(ns.config) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        for sec in ("run", sub):
            if cp.has_section(sec):
                file_vals.update({k.replace("-", "_"): v for k, v in cp.items(sec)})
    known = {o.name for o in SPECS[sub]}
    unknown = sorted(set(file_vals) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    vals = {}
    for opt in SPECS[sub]:
        flag = getattr(ns, opt.name, None)
        raw = flag if flag is not None else file_vals.get(opt.name)
        vals[opt.name] = opt.default if raw is None else _convert(opt, raw)
    cfg = RunConfig(sub, vals)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    from .measures import p_admissible

    p, n = cfg.p, cfg.n
    if not p > 1:
        raise ConfigError("p must exceed 1")
    if n < 2:
        raise ConfigError("n must be at least 2")
    if not p_admissible(p, n):
        raise ConfigError(f"p={p} violates p > n/2 for n={n}")
    for key in ("h", "parabolicity_h"):
        v = cfg.values.get(key)
        if v is not None and not v > 0:
            raise ConfigError(f"{key} must be positive")


def _points(s: str, n: int) -> list:
    out = []
    for item in filter(None, (t.strip() for t in s.split(";"))):
        if item.lower() in ("inf", "infinity"):
            from .geometry import INFINITY

            out.append(INFINITY)
            continue
        v = [float(_dec(c)) for c in item.split(",")]
        if len(v) != n:
            raise ConfigError(f"point {item!r} is not {n}-dimensional")
        out.append(np.array(v))
    return out


def _load_domain(cfg: RunConfig):
    from .domains import examples
    from .domains.csg import DomainParseError, load_domain

    if cfg.values.get("domain"):
        try:
            dom = load_domain(cfg.domain)
        except (OSError, DomainParseError) as exc:
            raise ConfigError(f"domain: {exc}") from None
    elif cfg.values.get("example"):
        name = cfg.example.replace("-", "_")
        makers = {
            "half_plane": lambda: examples.half_space(cfg.n),
            "half_space": lambda: examples.half_space(cfg.n),
            "shifted_half_space": lambda: examples.half_space(cfg.n, 0.5),
            "exterior_ball": lambda: examples.exterior_ball(cfg.n),
            "annulus": lambda: examples.annulus(cfg.n),
            "fingers": examples.fingers,
            "staircase": examples.staircase,
            "slit_plane": examples.slit_plane,
            "punctured_space": lambda: examples.punctured_space(cfg.n),
            "uncountable_rays": lambda: examples.uncountable_rays(6),
        }
        if name not in makers:
            raise ConfigError(f"unknown example {cfg.example!r}; choose from {', '.join(sorted(makers))}")
        dom = makers[name]()
    else:
        raise ConfigError("a --domain file or an --example is required")
    if dom.n != cfg.n:
        raise ConfigError(f"domain dimension {dom.n} does not match n={cfg.n}")
    return dom


def _write_json(cfg: RunConfig, name: str, doc: dict):
    doc = {"config": cfg.to_dict(), "version": __version__, **doc}
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out) / name).write_text(text)
    else:
        sys.stdout.write(text)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _report_dict(rep) -> dict:
    """Solver report without wall-clock time, so reruns write identical bytes."""
    d = rep.to_dict()
    d.pop("seconds", None)
    return d


def _csv_rows(cfg: RunConfig, name: str, header: list, rows: list):
    if not cfg.out:
        return
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    with open(Path(cfg.out) / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_field_csv(path, field_) -> None:
    """Nodal values: ``# n h origin.. dims..`` then ``i0,..,i(n-1),value`` per active node."""
    prob = field_.problem
    act = field_.active
    idx = np.stack(np.unravel_index(act, prob.shape), axis=1)
    with open(path, "w") as fh:
        fh.write("# " + " ".join([str(prob.n), repr(float(prob.h))] + [repr(float(v)) for v in prob.lo]
                                 + [str(s) for s in prob.shape]) + "\n")
        for row, v in zip(idx, field_.values[act]):
            fh.write(",".join(str(int(i)) for i in row) + "," + repr(float(v)) + "\n")


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`: returns (h, origin, shape, indices, values)."""
    with open(path) as fh:
        head = fh.readline().lstrip("#").split()
        n = int(head[0])
        h = float(head[1])
        origin = np.array([float(v) for v in head[2 : 2 + n]])
        shape = tuple(int(v) for v in head[2 + n : 2 + 2 * n])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return h, origin, shape, data[:, :n].astype(int), data[:, n]


def _options(cfg: RunConfig):
    from .solver import SolverOptions

    return SolverOptions(grad_tol=cfg.grad_tol, max_iters=cfg.max_iters)


def _transform(cfg: RunConfig):
    from .solver.pipeline import Transform

    pt = cfg.center or tuple([0.0] * cfg.n)
    if len(pt) != cfg.n:
        raise ConfigError("center has the wrong dimension")
    if cfg.transform == "inversion":
        return Transform.inversion(pt)
    if cfg.transform == "sphericalization":
        return Transform.sphericalization(pt, cfg.r_inf)
    raise ConfigError(f"unknown transform {cfg.transform!r}")


def _box(cfg: RunConfig):
    if not cfg.box:
        return None
    b = cfg.box
    m = 2 if cfg.axisymmetric else cfg.n
    if len(b) != 2 * m:
        raise ConfigError(f"box needs {2 * m} numbers")
    return (np.array(b[:m]), np.array(b[m:]))


def _data_fn(spec: str, n: int):
    kind, _, arg = spec.partition(":")
    try:
        if kind == "constant":
            c = float(_dec(arg or "0"))
            return lambda x: np.full(len(x), c)
        if kind == "step":
            ax, t0, width = arg.split(",")
            ax, t0, width = int(ax), float(_dec(t0)), float(_dec(width))
            return lambda x: np.clip((x[:, ax] - t0) / width + 0.5, 0.0, 1.0)
        if kind == "linear":
            ax = int(arg)
            return lambda x: x[:, ax]
    except (ValueError, IndexError):
        pass
    raise ConfigError(f"bad data spec {spec!r}")


def _boundary_set(spec: str, n: int):
    from .solver.perron import BoundarySet

    parts = [t.strip() for t in spec.split("+")]
    inf = "infinity" in parts
    rest = [t for t in parts if t != "infinity"]
    if not rest:
        return BoundarySet.infinity() if inf else BoundarySet.empty()
    if len(rest) != 1:
        raise ConfigError(f"bad set spec {spec!r}")
    s = rest[0]
    if s == "all":
        return BoundarySet.everything()
    if s == "none":
        return BoundarySet(lambda x: np.zeros(len(x), dtype=bool), inf, "none")
    if s.startswith("box:"):
        pts = _points(s[4:], n)
        if len(pts) != 2:
            raise ConfigError("box sets need 'lo;hi'")
        lo, hi = pts
        return BoundarySet(lambda x: np.all((x >= lo) & (x <= hi), axis=1), inf, s)
    raise ConfigError(f"bad set spec {spec!r}")


def cmd_sphericalize(cfg: RunConfig) -> int:
    """Distances and densities of the sphericalized metric for point pairs."""
    from .geometry import INFINITY, SphericalizationContext, d_a, dhat_bounds, unit_ball_volume
    from .measures import mu_a_density, mu_a_total_mass, muhat_density

    a = cfg.a or tuple([0.0] * cfg.n)
    ctx = SphericalizationContext(np.array(a), cfg.p)
    pair_rows = []
    for item in filter(None, (t.strip() for t in cfg.pairs.split(";"))):
        if ":" not in item:
            raise ConfigError(f"pair {item!r} needs 'x:y'")
        xs, ys = item.split(":", 1)
        x = _points(xs, cfg.n)[0]
        y = _points(ys, cfg.n)[0]
        lo, hi = dhat_bounds(ctx, x, y)
        fmt = lambda z: "inf" if z is INFINITY else " ".join(repr(float(v)) for v in z)  # noqa: E731
        pair_rows.append([fmt(x), fmt(y), d_a(ctx, x, y), lo, hi])
    pts = [q for q in _points(cfg.points, cfg.n) if q is not INFINITY]
    if cfg.disc_radius:
        t = np.linspace(-cfg.disc_radius, cfg.disc_radius, cfg.disc_points)
        grid = np.stack(np.meshgrid(*[t] * cfg.n, indexing="ij"), axis=-1).reshape(-1, cfg.n)
        grid = grid[np.linalg.norm(grid - np.array(a), axis=1) <= cfg.disc_radius]
        pts += list(grid)
    dens_rows = []
    for q in pts:
        r = float(np.linalg.norm(q - np.array(a)))
        dens_rows.append(list(q) + [r, float(mu_a_density(ctx, q)), float(muhat_density(ctx, q))])
    dens_rows.sort(key=lambda row: row[cfg.n])
    mass = mu_a_total_mass(ctx)
    bound = 2.0 / unit_ball_volume(cfg.n)
    _csv_rows(cfg, "pairs.csv", ["x", "y", "d_a", "dhat_lo", "dhat_hi"], pair_rows)
    _csv_rows(cfg, "densities.csv", [f"x{i + 1}" for i in range(cfg.n)] + ["dist_a", "mu_a", "muhat"], dens_rows)
    _write_json(cfg, "sphericalize.json", {
        "pairs": pair_rows, "densities": dens_rows,
        "mu_a_total_mass": mass, "mass_bound": bound, "mass_within_bound": mass <= bound,
    })
    return EXIT_OK


def cmd_check_weight(cfg: RunConfig) -> int:
    """Ap check for a power weight |x - x0|^alpha."""
    from .measures import BallSamplerConfig, NonIntegrableWeightError, PowerWeight, check_ap

    c = cfg.weight_center or tuple([0.0] * cfg.n)
    if len(c) != cfg.n:
        raise ConfigError("weight_center has the wrong dimension")
    sc = BallSamplerConfig(seed=cfg.seed, radius_min=cfg.radius_min, radius_max=cfg.radius_max,
                           balls_per_decade=cfg.balls_per_decade, nodes_per_ball=cfg.nodes_per_ball,
                           bound_factor=cfg.bound_factor, slope_tol=cfg.slope_tol)
    try:
        rep = check_ap(PowerWeight(np.array(c), cfg.alpha), cfg.p, sc)
    except NonIntegrableWeightError as exc:
        raise ConfigError(str(exc)) from None
    _write_json(cfg, "ap_report.json", {"report": rep.to_dict()})
    return {"bounded": EXIT_OK, "diverging": EXIT_DIVERGING}.get(rep.verdict, EXIT_INCONCLUSIVE)


def cmd_solve(cfg: RunConfig) -> int:
    """Solve a Dirichlet problem on an unbounded domain."""
    from .solver import NonConvergenceError
    from .solver.pipeline import GateError, MissingInfinityDataError, solve_unbounded

    dom = _load_domain(cfg)
    f = _data_fn(cfg.data, cfg.n)
    try:
        sol = solve_unbounded(dom, f, cfg.data_inf, _transform(cfg), cfg.h, cfg.p, box=_box(cfg),
                              symmetry_axes=cfg.symmetry_axes, options=_options(cfg),
                              axisymmetric=cfg.axisymmetric)
    except (GateError, MissingInfinityDataError, ValueError) as exc:
        if isinstance(exc, NonConvergenceError):
            raise
        raise ConfigError(str(exc)) from None
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        write_field_csv(Path(cfg.out) / "field.csv", sol.field)
    rep = _report_dict(sol.report)
    _write_json(cfg, "report.json", {**rep, "infinity_node_active": sol.setup.infinity_node_active,
                                     "grid": {"h": sol.setup.problem.h, "origin": sol.setup.problem.lo,
                                              "shape": list(sol.setup.problem.shape)}})
    return EXIT_OK


def cmd_harmonic_measure(cfg: RunConfig) -> int:
    """Perron envelope estimate of the p-harmonic measure of a boundary set."""
    from .solver.perron import pharmonic_measure
    from .solver.pipeline import GateError, prepare_unbounded

    dom = _load_domain(cfg)
    pts = _points(cfg.eval, cfg.n)
    if not pts:
        raise ConfigError("at least one evaluation point is required")
    E = _boundary_set(cfg.set, cfg.n)
    try:
        setup = prepare_unbounded(dom, cfg.p, _transform(cfg), cfg.h, box=_box(cfg),
                                  symmetry_axes=cfg.symmetry_axes, axisymmetric=cfg.axisymmetric)
    except (GateError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if E.includes_infinity and not setup.infinity_node_active:
        E = type(E)(E.predicate, False, E.label)
    deltas = cfg.deltas or ()
    res = pharmonic_measure(setup, E, np.array(pts), deltas=deltas, options=_options(cfg))
    rows = []
    for i, q in enumerate(pts):
        rows.append(list(q) + [float(res.values[i]), float(res.last_decrement[i])])
    _csv_rows(cfg, "values.csv", [f"x{i + 1}" for i in range(cfg.n)] + ["value", "last_decrement"], rows)
    _write_json(cfg, "harmonic_measure.json", {
        "values": res.values, "history": res.history, "deltas": res.perron.deltas,
        "monotone": res.perron.monotone, "max_violation": res.perron.max_violation,
        "within_bounds": res.within_bounds, "certified": res.perron.certified,
        "infinity_node_active": setup.infinity_node_active,
    })
    return EXIT_OK


def cmd_check_regularity(cfg: RunConfig) -> int:
    """Regularity of the point at infinity and p-parabolicity trend."""
    from .domains.analysis import p_parabolicity_estimate, regularity_at_infinity_verdict
    from .solver.pipeline import GateError

    dom = _load_domain(cfg)
    try:
        v = regularity_at_infinity_verdict(dom, cfg.p, a=cfg.a or None, k=cfg.k, h=cfg.h, r_max=cfg.r_max)
    except GateError as exc:
        raise ConfigError(str(exc)) from None
    doc = {"verdict": v.verdict, "evidence": v.evidence}
    if cfg.parabolicity:
        par = p_parabolicity_estimate(dom, None, cfg.p, J=cfg.levels, a=cfg.a or None, rho0=cfg.rho0,
                                      h=cfg.parabolicity_h, symmetry_axes=cfg.symmetry_axes,
                                      axisymmetric=cfg.axisymmetric)
        doc["parabolicity"] = par.to_dict()
    _write_json(cfg, "regularity.json", doc)
    return EXIT_OK


def cmd_invert(cfg: RunConfig) -> int:
    """Image of a domain under inversion."""
    from .transforms import InversionMap, admissibility_check, invert_domain

    dom = _load_domain(cfg)
    c = cfg.center or tuple([0.0] * cfg.n)
    m = InversionMap(cfg.p, cfg.n, np.array(c))
    try:
        img = invert_domain(m, dom)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        text = img.to_text()
    except NotImplementedError:
        text = None
    lo, hi = img.bounding_box()
    if cfg.out and text is not None:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out) / "image.dom").write_text(text)
    _write_json(cfg, "invert.json", {
        "image": text, "bounding_box": [lo, hi], "weight_exponent": 2 * (cfg.p - cfg.n),
        "admissible": admissibility_check(cfg.p, cfg.n),
    })
    return EXIT_OK


def cmd_capacity(cfg: RunConfig) -> int:
    """Variational capacity of a ball in a concentric ball."""
    from .domains.csg import Ball
    from .solver.capacity import variational_capacity

    n, p = cfg.n, cfg.p
    r, R = cfg.inner, cfg.outer
    if not 0 < r < R:
        raise ConfigError("need 0 < inner < outer")
    axi = cfg.axisymmetric if cfg.axisymmetric is not None else n == 3
    if axi and n < 3:
        raise ConfigError("the meridian reduction needs n >= 3")
    sym = cfg.symmetry_axes
    if sym is None:
        # the ball is symmetric in every grid axis (z only, in the meridian plane)
        sym = (1,) if axi else tuple(range(n))
    opts = _options_cap(cfg)
    res = variational_capacity(Ball([0] * n, r), Ball([0] * n, R), p, cfg.h, symmetry_axes=sym,
                               axisymmetric=axi, options=opts)
    exact = annulus_capacity(n, p, r, R)
    _write_json(cfg, "capacity.json", {
        "capacity": res.value, "closed_form": exact, "relative_error": res.value / exact - 1,
        "report": _report_dict(res.report) if res.report else None, "symmetry_axes": list(sym), "axisymmetric": axi,
    })
    return EXIT_OK


def _options_cap(cfg):
    from .solver import SolverOptions

    return SolverOptions(grad_tol=cfg.grad_tol)


def annulus_capacity(n: int, p: float, r: float, R: float) -> float:
    """p-capacity of ``closure(B(0, r))`` in ``B(0, R)`` (radial closed form)."""
    from .transforms import sphere_area

    w = sphere_area(n)
    if p == n:
        return w * math.log(R / r) ** (1 - p)
    e = (p - n) / (p - 1)
    integral = (R**e - r**e) / e
    return w * integral ** (1 - p)


_COMMANDS = {
    "sphericalize": cmd_sphericalize,
    "check-weight": cmd_check_weight,
    "solve": cmd_solve,
    "harmonic-measure": cmd_harmonic_measure,
    "check-regularity": cmd_check_regularity,
    "invert": cmd_invert,
    "capacity": cmd_capacity,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sphericalize", description="p-harmonic problems on unbounded domains")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, opts in SPECS.items():
        sp = sub.add_parser(name, help=(_COMMANDS[name].__doc__ or "").strip() or None)
        sp.add_argument("--config", help="INI file with [run] and [%s] sections" % name)
        for o in opts:
            flag = "--" + o.name.replace("_", "-")
            if o.kind == "bool":
                sp.add_argument(flag, dest=o.name, nargs="?", const="true", default=None, help=o.help)
            else:
                sp.add_argument(flag, dest=o.name, default=None, help=o.help)
    return ap


def main(argv=None) -> int:
    from .solver import NonConvergenceError

    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = resolve_config(ns.command, ns)
        return _COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"error: no convergence: {exc}", file=sys.stderr)
        if getattr(ns, "out", None):
            Path(ns.out).mkdir(parents=True, exist_ok=True)
            (Path(ns.out) / "report.json").write_text(json.dumps(_jsonable(_report_dict(exc.report)), indent=2, sort_keys=True) + "\n")
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
