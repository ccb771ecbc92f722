"""Batch front end: covers, grid extensions, verification suites, cusp reports.

Subcommands write their artifacts into --out and exit with 0 when every
invariant holds, 1 when one fails and 2 when the configuration is invalid.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from dataclasses import field as dc_field
from pathlib import Path

import numpy as np

from .domain import Domain, domain_from_json
from .extend_l1 import ExtendConfig, ExtensionHandle
from .extend_w11 import CalibrationError, CorrectorStack, band_points, calibrate, identity_suite
from .fields import CATALOG, catalog
from .verify import (
    CuspScenario,
    Report,
    cusp_flux,
    cusp_lowerbound,
    exponent_window,
    fd_orders,
    norm_ratio,
    stokes_check,
)
from .whitney import blowup_bounds, cube_side

__all__ = ["RunConfig", "ConfigError", "load_config", "cmd_cover", "cmd_extend", "cmd_verify",
           "cmd_counterexample", "main"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SUITES = ("l1-core", "w11-identities", "cusp")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    domain: dict = dc_field(default_factory=lambda: {"type": "rectangle", "min": [0.0, 0.0], "max": [1.0, 1.0]})
    field: dict = dc_field(default_factory=lambda: {"name": "stream_poly", "params": {}})
    simplex: str = "flat"
    quad_order: int = 2
    simplex_degree: int = 4
    mollify_eps: float | None = None
    mc_samples: int | None = None
    min_level: int = 0
    max_level: int = 10
    cover_depth: int = 6
    grid: dict = dc_field(default_factory=lambda: {"points": 33})
    norm_depth: int = 6
    mode: str = "l1"
    seed: int | None = 0
    workers: int = 1
    out: str = "out"

    def digest(self) -> str:
        """Hash of the settings that determine results; out and workers do not."""
        keep = {k: v for k, v in asdict(self).items() if k not in ("out", "workers")}
        return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()[:16]

    def extend_config(self) -> ExtendConfig:
        return ExtendConfig(min_level=self.min_level, max_level=self.max_level, quad_order=self.quad_order,
                            simplex_degree=self.simplex_degree, simplex=self.simplex,
                            mollify_eps=self.mollify_eps, mc_samples=self.mc_samples,
                            seed=0 if self.seed is None else self.seed)


def _check_type(name, value, kinds, optional=False):
    if value is None and optional:
        return
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ConfigError(f"config field {name!r} has the wrong type")


def validate(cfg: RunConfig) -> RunConfig:
    """Schema checks; raises ConfigError with the offending field."""
    _check_type("domain", cfg.domain, dict)
    _check_type("field", cfg.field, dict)
    _check_type("grid", cfg.grid, dict)
    for name in ("quad_order", "simplex_degree", "min_level", "max_level", "cover_depth", "norm_depth", "workers"):
        _check_type(name, getattr(cfg, name), int)
    _check_type("mollify_eps", cfg.mollify_eps, (int, float), optional=True)
    _check_type("mc_samples", cfg.mc_samples, int, optional=True)
    _check_type("seed", cfg.seed, int, optional=True)
    if cfg.simplex not in ("flat", "curvilinear"):
        raise ConfigError("simplex must be 'flat' or 'curvilinear'")
    if cfg.mode not in ("l1", "w11"):
        raise ConfigError("mode must be 'l1' or 'w11'")
    if cfg.quad_order < 1 or cfg.simplex_degree < 1:
        raise ConfigError("quadrature orders must be positive")
    if not 0 <= cfg.min_level <= cfg.max_level:
        raise ConfigError("cover levels must satisfy 0 <= min_level <= max_level")
    if cfg.mc_samples is not None and cfg.seed is None:
        raise ConfigError("a seed is mandatory when Monte Carlo sampling is enabled")
    if cfg.workers < 1:
        raise ConfigError("workers must be positive")
    if cfg.field.get("name") not in CATALOG:
        raise ConfigError(f"unknown field {cfg.field.get('name')!r}; choose from {', '.join(CATALOG)}")
    if not isinstance(cfg.field.get("params", {}), dict):
        raise ConfigError("field params must be an object")
    pts = cfg.grid.get("points", 33)
    if isinstance(pts, bool) or not isinstance(pts, int) or pts < 2:
        raise ConfigError("grid.points must be an integer >= 2")
    try:
        dom = domain_from_json(cfg.domain)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    for key in ("lo", "hi"):
        if key in cfg.grid and len(cfg.grid[key]) != dom.n:
            raise ConfigError(f"grid.{key} must have {dom.n} entries")
    return cfg


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
    if isinstance(raw.get("field"), str):
        raw["field"] = {"name": raw["field"], "params": {}}
    cfg = RunConfig(**raw)
    if overrides:
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return validate(cfg)


# shared setup ----------------------------------------------------------------------


def _setup(cfg: RunConfig) -> tuple[Domain, object, ExtensionHandle]:
    dom = domain_from_json(cfg.domain)
    u = catalog(cfg.field["name"], dom.n, 0 if cfg.seed is None else cfg.seed, **cfg.field.get("params", {}))
    try:
        handle = ExtensionHandle(dom, u, cfg.extend_config())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return dom, u, handle


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_plain) + "\n")


def _plain(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return str(x)


def _fmt(x: float) -> str:
    # shortest round-trip decimal
    return repr(float(x))


# cover -------------------------------------------------------------------------------


def cover_report(handle: ExtensionHandle, depth: int, seed: int = 0, samples: int = 2000) -> tuple[dict, list]:
    """Cube lists of both covers inside B_theta(domain) and the observed (W)/(J) constants."""
    cover, dom = handle.cover, handle.domain
    lo, hi = dom.bbox
    lo, hi = lo - handle.theta, hi + handle.theta
    interior, i_def = cover.interior.build(depth=depth)
    exterior, e_def = cover.exterior.build(lo, hi, depth=depth)
    c = cover.c
    w1 = all(dom.cube_distance(*blowup_bounds(q))[0] == "interior" for q in interior)
    ratios = [cover.interior.distance(q)[1] / cube_side(q) for q in interior]
    ratios += [cover.exterior.distance(q)[1] / cube_side(q) for q in exterior]
    w3 = min(ratios) >= 1 / c and max(ratios) <= c
    rng = np.random.default_rng(seed)
    overlap = 0
    for y in rng.uniform(lo, hi, size=(samples, dom.n)):
        cubes, status = cover.exterior.locate(y)
        if status == "ok":
            overlap = max(overlap, len(cubes))
        cubes, status = cover.interior.locate(y)
        if status == "ok":
            overlap = max(overlap, len(cubes))
    bound = 12 if dom.n == 2 else 56
    props = cover.properties(exterior)
    j_ok = props["J2_max_size_ratio"] <= 4 and all(np.isfinite(props[k]) for k in ("J3_C", "J4_C", "J5_C"))
    report = {
        "W1_blowups_inside": w1,
        "W2_max_overlap": overlap,
        "W2_bound": bound,
        "W3_c": c,
        "W3_observed": [min(ratios), max(ratios)],
        "J": props,
        "eta": cover.eta,
        "theta": handle.theta,
        "q0": list(cover.q0),
        "depth": depth,
        "uncovered_measure": {"interior": i_def, "exterior": e_def},
        "counts": {"interior": len(interior), "exterior": len(exterior)},
        "pass": bool(w1 and w3 and overlap <= bound and j_ok),
    }
    rows = [("interior", q, None) for q in interior] + [("exterior", q, cover.psi(q)) for q in exterior]
    return report, rows


def cmd_cover(cfg: RunConfig) -> int:
    _, _, handle = _setup(cfg)
    report, rows = cover_report(handle, cfg.cover_depth, 0 if cfg.seed is None else cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    n = handle.n
    with open(out / "cover.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["side", "level"] + [f"i{j + 1}" for j in range(n)] + ["side_length", "psi_level"]
                   + [f"psi_i{j + 1}" for j in range(n)])
        for side, q, t in rows:
            tail = [t[0], *t[1:]] if t is not None else [""] * (n + 1)
            w.writerow([side, q[0], *q[1:], _fmt(cube_side(q)), *tail])
    _write_json(out / "cover_report.json", {"config_hash": cfg.digest(), **report})
    return EXIT_PASS if report["pass"] else EXIT_FAIL


# extend ------------------------------------------------------------------------------


def _grid(cfg: RunConfig, dom: Domain, theta: float) -> np.ndarray:
    lo, hi = dom.bbox
    lo = np.asarray(cfg.grid.get("lo", lo - theta), dtype=float)
    hi = np.asarray(cfg.grid.get("hi", hi + theta), dtype=float)
    axes = [np.linspace(a, b, cfg.grid.get("points", 33)) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dom.n)


def sample(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray, list[str], ExtensionHandle]:
    """Grid points, extension values and region labels, in grid order."""
    dom, _, handle = _setup(cfg)
    if cfg.mode == "w11":
        stack = CorrectorStack(handle)
        F, support = stack.assemble, 2 * handle.theta
    else:
        F, support = handle.evaluate, handle.theta
    Y = _grid(cfg, dom, handle.theta)

    def one(y):
        sd = float(dom.signed_distance(y))
        region = "interior" if sd >= 0 else ("zero" if -sd > support else "exterior")
        return np.asarray(F(y), dtype=float), region

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = list(pool.map(one, Y))
    U = np.array([r[0] for r in results]).reshape(len(Y), dom.n)
    return Y, U, [r[1] for r in results], handle


def cmd_extend(cfg: RunConfig) -> int:
    Y, U, regions, handle = sample(cfg)
    n = handle.n
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    names = ["x", "y", "z"][:n] + [f"u{j + 1}" for j in range(n)] + ["region"]
    with open(out / "extension.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for y, v, r in zip(Y, U, regions):
            w.writerow([*map(_fmt, y), *map(_fmt, v), r])
    zero_ok = all(np.all(v == 0) for v, r in zip(U, regions) if r == "zero")
    inner = [i for i, r in enumerate(regions) if r == "interior"]
    restrict_ok = bool(np.array_equal(U[inner], handle.field(Y[inner]))) if inner else True
    summary = {"config_hash": cfg.digest(), "mode": cfg.mode, "theta": handle.theta, "eta": handle.cover.eta,
               "points": len(Y), "regions": {k: regions.count(k) for k in ("interior", "exterior", "zero")},
               "restriction_exact": restrict_ok, "zero_beyond_support": bool(zero_ok),
               "notices": handle.notices}
    if cfg.mode == "l1":
        summary["norm_ratios"] = {str(p): norm_ratio(handle, p, depth=cfg.norm_depth)["ratio"]
                                  for p in (1, 2, np.inf)}
    _write_json(out / "summary.json", summary)
    return EXIT_PASS if restrict_ok and zero_ok else EXIT_FAIL


# verify --------------------------------------------------------------------------------


def _solenoidal(u, dom: Domain, seed: int) -> bool:
    lo, hi = dom.bbox
    X = np.random.default_rng(seed).uniform(lo, hi, size=(64, dom.n))
    return bool(np.max(np.abs(u.divergence(X))) <= 1e-10 * (1 + np.max(np.abs(u(X)))))


def suite_l1_core(cfg: RunConfig) -> list[Report]:
    dom, u, handle = _setup(cfg)
    seed = 0 if cfg.seed is None else cfg.seed
    rng = np.random.default_rng(seed)
    lo, hi = dom.bbox
    reports = []
    X = rng.uniform(lo, hi, size=(400, dom.n))
    X = X[dom.contains(X)][:200]
    got = handle.evaluate_many(X)
    reports.append(Report("restriction", {"samples": len(X)}, [float(np.max(np.abs(got - u(X))))], None,
                          bool(np.array_equal(got, u(X)))))
    far = []
    while len(far) < 200:
        y = rng.uniform(lo - 2 * handle.theta, hi + 2 * handle.theta)
        if -float(dom.signed_distance(y)) > handle.theta:
            far.append(y)
    vals = handle.evaluate_many(far)
    reports.append(Report("support", {"samples": len(far), "theta": handle.theta},
                          [float(np.max(np.abs(vals)))], None, bool(np.all(vals == 0))))
    sol = _solenoidal(u, dom, seed)
    P = band_points(handle, 20, seed)
    hs = (1e-2, 5e-3, 2.5e-3)
    norms = np.zeros(len(hs))
    for y in P:
        d = -float(dom.signed_distance(y))
        vals, _ = fd_orders(handle.evaluate, y, [h * d for h in hs], dom)
        norms += np.square(vals)
    norms = np.sqrt(norms)
    orders = [float(np.log2(a / b)) for a, b in zip(norms[:-1], norms[1:])]
    reports.append(Report("pointwise_divergence", {"points": len(P), "rel_steps": list(hs), "field_solenoidal": sol},
                          norms.tolist(), min(orders), sol and min(orders) >= 1.9))
    res = []
    poly = catalog("stream_poly", dom.n, seed, degree=3)
    for _ in range(50):
        V = rng.normal(size=(dom.n + 1, dom.n))
        res.append(stokes_check(poly, V, degree=6)["residual"])
    reports.append(Report("stokes", {"simplices": 50, "degree": 6}, [max(res)], None, max(res) <= 1e-8))
    return reports


def suite_w11(cfg: RunConfig) -> list[Report]:
    dom, u, handle = _setup(cfg)
    seed = 0 if cfg.seed is None else cfg.seed
    stack = CorrectorStack(handle)
    P = band_points(handle, 30 if dom.n == 2 else 10, seed)
    res = identity_suite(stack, P)
    sol = _solenoidal(u, dom, seed)
    worst = {k: float(np.max(np.abs(v))) for k, v in res.items()}
    reports = [Report("dE0_equals_S1", {"points": len(P)}, [worst["dE0"]], None, worst["dE0"] <= 1e-4)]
    for k in range(1, dom.n):
        key = f"dR{k}"
        reports.append(Report(f"dR{k}_identity", {"points": len(P)}, [worst[key]], None, worst[key] <= 1e-4))
    reports.append(Report("S_n_vanishes", {"field_solenoidal": sol}, [worst["S_n"]], None,
                          worst["S_n"] <= 1e-6 if sol else True))
    reports.append(Report("assembled_divergence", {"coefficients": {int(k): v for k, v in stack.c.items()}},
                          [worst["assemble"]], None, worst["assemble"] <= 1e-5))
    try:
        cal = calibrate(stack, P[: min(len(P), 10)])
        reports.append(Report("calibration", {}, [cal["telescoping"]["max_residual"]], None, True, {"detail": cal}))
    except CalibrationError as exc:
        reports.append(Report("calibration", {}, [], None, False, {"error": str(exc)}))
    return reports


def suite_cusp(cfg: RunConfig, gamma: float = 0.5, alpha: float = 2.5, p: float = 1.0) -> list[Report]:
    sc = CuspScenario(gamma, alpha, p)
    s_grid = np.geomspace(1e-4, sc.eta, 9)
    table = [cusp_flux(sc, s) for s in s_grid]
    err = [abs(r["quadrature"] - r["closed_form"]) for r in table]
    reports = [Report("cusp_flux", {"gamma": gamma, "alpha": alpha}, err, None, max(err) <= 1e-8,
                      {"table": table})]
    lb = cusp_lowerbound(sc)
    reports.append(Report("cusp_growth", {"p": p}, [abs(lb["fitted_growth"] - lb["predicted_growth"])],
                          lb["fitted_growth"], abs(lb["fitted_growth"] - lb["predicted_growth"]) <= 0.01
                          and lb["monotone"]))
    ctrl = cusp_lowerbound(_control(sc))
    reports.append(Report("cusp_control", {"p": ctrl["exponent"]}, [ctrl["partial"][-1]], None,
                          ctrl["converges"] and abs(ctrl["partial"][-1] - ctrl["partial"][-2]) < 1e-3))
    return reports


def cmd_verify(cfg: RunConfig, suite: str) -> int:
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    runner = {"l1-core": suite_l1_core, "w11-identities": suite_w11, "cusp": suite_cusp}[suite]
    reports = runner(cfg)
    passed = all(r.passed for r in reports)
    _write_json(Path(cfg.out) / f"verify_{suite}.json",
                {"config_hash": cfg.digest(), "suite": suite, "pass": passed,
                 "reports": [r.to_json() for r in reports]})
    return EXIT_PASS if passed else EXIT_FAIL


# counterexample ------------------------------------------------------------------------


def _control(sc: CuspScenario) -> CuspScenario:
    """Same gamma and alpha with p shrunk until the lower-bound exponent exceeds -1."""
    lo = exponent_window(sc.gamma, sc.n, sc.side, sc.alpha)["p_interval"][0]
    p = 0.8 * lo
    return CuspScenario(sc.gamma, sc.alpha, p, sc.side, sc.n, check_window=False)


def counterexample(gamma: float, side: str = "plus", p: float | None = None, alpha: float | None = None,
                   n: int = 2) -> dict:
    window = exponent_window(gamma, n, side, alpha)
    out = {"window": window}
    if window["empty"]:
        out["pass"] = False
        return out
    a = window["alpha"]
    if p is None:
        lo, hi = window["p_interval"]
        p = 1.0 if lo < 1 < hi else (lo + min(hi, lo + 2)) / 2
    sc = CuspScenario(gamma, a, p, side, n)
    s_grid = np.geomspace(1e-4, min(sc.eta, 0.999), 9)
    table = [cusp_flux(sc, float(s)) for s in s_grid]
    err = max(abs(r["quadrature"] - r["closed_form"]) for r in table)
    lb = cusp_lowerbound(sc)
    ctrl = cusp_lowerbound(_control(sc))
    growth_ok = abs(lb["fitted_growth"] - lb["predicted_growth"]) <= 0.02 * lb["predicted_growth"]
    out.update({
        "scenario": {"gamma": gamma, "alpha": a, "p": p, "side": side, "n": n, "eta": sc.eta},
        "flux_table": table, "flux_max_error": err,
        "lower_bound": {k: lb[k] for k in ("exponent", "predicted_growth", "fitted_growth", "doubling_ratio",
                                           "monotone")},
        "control": {"p": _control(sc).p, "exponent": ctrl["exponent"], "converges": ctrl["converges"],
                    "limit": ctrl["partial"][-1]},
        "pass": bool(err <= 1e-8 and growth_ok and lb["monotone"] and ctrl["converges"]),
    })
    return out


def cmd_counterexample(cfg: RunConfig, gamma: float, side: str = "plus", p: float | None = None,
                       alpha: float | None = None, n: int = 2) -> int:
    try:
        result = counterexample(gamma, side, p, alpha, n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _write_json(Path(cfg.out) / "counterexample.json", {"config_hash": cfg.digest(), **result})
    return EXIT_PASS if result["pass"] else EXIT_FAIL


# entry point -----------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--quad-order", type=int, metavar="Q")
    common.add_argument("--simplex", choices=("flat", "curvilinear"))
    common.add_argument("--mode", choices=("l1", "w11"))
    ap = argparse.ArgumentParser(prog="divext", description="Divergence-free extension toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("cover", parents=[common], help="dump Whitney covers and their invariants")
    sub.add_parser("extend", parents=[common], help="sample the extension on a grid")
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", choices=SUITES)
    c = sub.add_parser("counterexample", parents=[common], help="cusp obstruction report")
    c.add_argument("--gamma", type=float, default=0.5)
    c.add_argument("--side", choices=("plus", "minus"), default="plus")
    c.add_argument("--p", type=float)
    c.add_argument("--alpha", type=float)
    c.add_argument("--n", type=int, default=2)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"out": args.out, "seed": args.seed, "quad_order": args.quad_order,
                                        "simplex": args.simplex, "mode": args.mode})
        if args.command == "cover":
            return cmd_cover(cfg)
        if args.command == "extend":
            return cmd_extend(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        return cmd_counterexample(cfg, args.gamma, args.side, args.p, args.alpha, args.n)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
