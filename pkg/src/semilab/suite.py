"""Configuration-driven verification suites.

A suite config (TOML) names inputs and lists checks::

    seed = 7

    [inputs.chain]
    q = [[-1.0, 1.0], [1.0, -1.0]]

    [[checks]]
    name = "hille_yosida"
    input = "chain"
    omega = 0.0

Each registered check returns a :class:`CheckResult` whose rows all carry
the anchor string of the statement being verified. Reports are written as
canonical JSON (sorted keys) plus one CSV per check.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import markov, prob, resolvent, semigroup, seminorm, yosida
from .core import Operator, as_matrix, sup_norm
from .report import plain

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["ConfigError", "CheckResult", "CHECKS", "load_config", "run_suite", "emit_tables",
           "canonical_json", "demo_config_path"]


class ConfigError(ValueError):
    pass


@dataclass
class CheckResult:
    name: str
    anchor: str
    passed: bool
    columns: list
    rows: list
    stochastic: bool = False
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return plain({"name": self.name, "anchor": self.anchor, "pass": self.passed,
                      "stochastic": self.stochastic, "summary": self.summary,
                      "columns": self.columns, "rows": self.rows})


@dataclass
class _Check:
    fn: Callable
    anchor: str
    stochastic: bool = False


CHECKS: dict[str, _Check] = {}


def _register(name: str, anchor: str, stochastic: bool = False):
    def deco(fn):
        CHECKS[name] = _Check(fn, anchor, stochastic)
        return fn
    return deco


def demo_config_path() -> Path:
    return Path(__file__).parent / "data" / "demo.toml"


def canonical_json(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=True) + "\n"


def load_config(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    cfg.setdefault("_base", str(path.parent))
    return cfg


def _load_input(spec: dict, base: str) -> dict:
    if "file" in spec:
        data = json.loads((Path(base) / spec["file"]).read_text())
        return {**data, **{k: v for k, v in spec.items() if k != "file"}}
    return spec


def _matrix_of(inp: dict) -> np.ndarray:
    if "q" in inp:
        return as_matrix(inp["q"])
    if "entries" in inp:
        return Operator.from_dict(inp).entries
    if "matrix" in inp:
        return as_matrix(inp["matrix"])
    raise ConfigError("input needs one of 'q', 'entries' or 'matrix'")


def _rows_pass(rows) -> bool:
    return all(bool(r["pass"]) for r in rows)


# deterministic checks -------------------------------------------------------

@_register("semigroup_law", "semigroup law T(t)T(s) = T(t+s)")
def _semigroup_law(p, ctx):
    h = semigroup.SemigroupHandle(ctx.matrix(p))
    rows = []
    for t, s in p.get("pairs", [[p.get("t", 0.3), p.get("s", 0.3)]]):
        r = semigroup.semigroup_law_check(h, t, s, tol=p.get("tol", ctx.tol))
        rows.append({"t": t, "s": s, "deviation": r.lhs, "tol": r.rhs, "pass": r.passed})
    return ["t", "s", "deviation", "tol", "pass"], rows


@_register("integral_identity", "generator identities T(t)x - x = A int_0^t T(s)x ds = int_0^t T(s)Ax ds")
def _integral_identity(p, ctx):
    a = ctx.matrix(p)
    h = semigroup.SemigroupHandle(a)
    tol = p.get("tol", 1e-7)
    levels = p.get("levels", 14)
    rows = []
    for t in p.get("times", [0.5, 1.0]):
        for x in _samples(p, a.shape[0]):
            target = h.apply(t, x) - x
            avg = semigroup.cesaro_average(h, t, x, levels).value
            avg_ax = semigroup.cesaro_average(h, t, a @ x, levels).value
            e1 = sup_norm(a @ (t * avg) - target)
            e2 = sup_norm(t * avg_ax - target)
            rows.append({"t": t, "err_A_of_integral": e1, "err_integral_of_Ax": e2, "tol": tol,
                         "pass": max(e1, e2) <= tol})
    return ["t", "err_A_of_integral", "err_integral_of_Ax", "tol", "pass"], rows


@_register("averaging_bound", "averaging bound ||T(h)x_r - x_r|| <= (2h/r) sup ||T(s)x||")
def _averaging_bound(p, ctx):
    h = semigroup.SemigroupHandle(ctx.matrix(p))
    rows = []
    for r in p.get("r", [1.0]):
        for hs in p.get("h", [0.1]):
            for x in _samples(p, h.dim):
                rep = semigroup.averaging_bound_check(h, r, hs, x)
                rows.append({"r": r, "h": hs, "lhs": rep.lhs, "rhs": rep.rhs, "pass": rep.passed})
    return ["r", "h", "lhs", "rhs", "pass"], rows


@_register("type_bound", "exponential bound e^{-omega t}||T(t)x|| <= M||x||")
def _type_bound(p, ctx):
    a = ctx.matrix(p)
    h = semigroup.SemigroupHandle(a)
    omega = p.get("omega", 0.0)
    tb = semigroup.fit_type_bound(h, omega, p.get("horizon", 1.0))
    limit = p.get("max_M", math.inf)
    return ["omega", "M", "max_M", "pass"], [{"omega": omega, "M": tb.M, "max_M": limit, "pass": tb.M <= limit}]


@_register("resolvent_consistency", "resolvent as Laplace transform R(lambda)x = int e^{-lambda t}T(t)x dt")
def _resolvent_consistency(p, ctx):
    a = ctx.matrix(p)
    tb = semigroup.certified_type_bound(a)
    tol = p.get("rtol", 1e-8)
    rows = []
    for off in p.get("lambda_offsets", [1.0, 2.0, 10.0]):
        lam = tb.omega + off
        for x in _samples(p, a.shape[0]):
            yq = resolvent.resolvent_quadrature(a, lam, x, tb)
            ys = resolvent.resolvent_solve(a, lam, x)
            rel = sup_norm(yq - ys) / max(sup_norm(ys), 1e-300)
            rows.append({"lambda": lam, "rel_error": rel, "rtol": tol, "pass": rel <= tol})
    return ["lambda", "rel_error", "rtol", "pass"], rows


@_register("hille_yosida", "Hille-Yosida resolvent condition ||(n(lambda-omega)R(n lambda))^n|| <= M")
def _hille_yosida(p, ctx):
    a = ctx.matrix(p)
    M, omega = p.get("M", 1.0), p.get("omega", 0.0)
    grid = p.get("lambda_grid", [0.5, 1.0, 2.0, 5.0])
    try:
        rep = resolvent.hille_yosida_check(a, M, omega, p.get("n_max", 20), grid,
                                           rtol=p.get("rtol", 1e-10))
    except resolvent.SpectrumHit as exc:
        row = {"n": exc.n, "lambda": exc.lam / exc.n if exc.n else exc.lam, "ratio": math.inf,
               "bound": M, "pass": False}
        return ["n", "lambda", "ratio", "bound", "pass"], [row], {"failing": row, "reason": str(exc)}
    rows = [{**r, "bound": M, "pass": r["ratio"] <= M * (1 + p.get("rtol", 1e-10))} for r in rep.table]
    summary = {"worst_ratio": rep.worst_ratio, "argmax": rep.argmax}
    if not rep.passed:
        summary["failing"] = rep.argmax
    return ["n", "lambda", "ratio", "bound", "pass"], rows, summary


@_register("resolvent_convergence", "lambda R(lambda)x -> x and lambda R(lambda)Ax -> Ax")
def _resolvent_convergence(p, ctx):
    a = ctx.matrix(p)
    rep = resolvent.resolvent_convergence_check(a, p.get("lambdas", [1.0, 10.0, 100.0, 1000.0]),
                                                tol=p.get("tol", 1e-2))
    rows = [{**r, "pass": rep.passed} for r in rep.details["table"]]
    return ["lambda", "err_x", "err_Ax", "pass"], rows


@_register("yosida_convergence", "Yosida approximants: ||T_n(t)x - T(t)x|| <= t||A_n x - Ax||")
def _yosida_convergence(p, ctx):
    a = ctx.matrix(p)
    t = p.get("t", 1.0)
    x = _samples(p, a.shape[0])[0]
    indices = p.get("indices", [4, 8, 16, 32, 64, 128])
    scheme = yosida.YosidaScheme(a, indices)
    exact = semigroup.exp_series(a, t, x, tol=1e-15, shift=semigroup.uniformization_shift(a))
    rows = []
    prev = None
    for n in scheme.indices:
        val, cert = yosida.yosida_limit(scheme, t, x, (prev or n, n))
        err = sup_norm(val - exact)
        rows.append({"n": n, "certificate": cert.limit_gap_bound, "true_error": err,
                     "cauchy_bound": cert.cauchy_bound, "rigorous": cert.rigorous,
                     "pass": err <= cert.limit_gap_bound * (1 + 1e-9) + 1e-13})
        prev = n
    return ["n", "certificate", "true_error", "cauchy_bound", "rigorous", "pass"], rows


@_register("joint_equicontinuity", "joint equi-continuity of the approximating semigroups")
def _joint_equicontinuity(p, ctx):
    scheme = yosida.YosidaScheme(ctx.matrix(p), p.get("indices", [1, 2, 4, 8, 16]))
    rep = yosida.joint_equicontinuity_scan(scheme, p.get("horizon", 2.0))
    return ["sup_norm", "bound", "resolvent_bound", "pass"], [
        {"sup_norm": rep.lhs, "bound": rep.rhs, "resolvent_bound": rep.details["resolvent_bound"],
         "pass": rep.passed}]


@_register("chernoff", "Chernoff bound P[(1/n) sum X_i > c] <= exp(-n sup(c theta - log E e^{theta X}))")
def _chernoff(p, ctx):
    rows = chernoff_table(prob.parse_distribution(p["dist"]), p.get("n", 1), p.get("c"))
    return ["c", "exact_tail", "bound", "pass"], rows


@_register("gamma_dominator", "dominating variable Y with P[Y > c] = exp(-phi(c, lambda0))")
def _gamma_dominator(p, ctx):
    out = prob.gamma_dominator_check(p.get("lam0", 1.0), p.get("n_list", list(range(1, 11))),
                                     p.get("lam_list", [1.0, 2.0, 5.0]))
    rows = [{k: r[k] for k in ("n", "lambda", "worst_c", "worst_gap", "pass")} for r in out["rows"]]
    return ["n", "lambda", "worst_c", "worst_gap", "pass"], rows


@_register("poisson_dominator", "dominating variable for ceil(Poisson(nt)/n), t <= T")
def _poisson_dominator(p, ctx):
    T = p.get("T", 1.0)
    ts = p.get("t_list", [T * k / 4 for k in range(1, 5)])
    out = prob.poisson_dominator_check(T, p.get("n_list", list(range(1, 11))), ts)
    rows = [{k: r[k] for k in ("n", "t", "worst_c", "worst_gap", "pass")} for r in out["rows"]]
    return ["n", "t", "worst_c", "worst_gap", "pass"], rows


@_register("dominate", "stochastic domination P[eta1 >= r] >= P[eta2 >= r]")
def _dominate(p, ctx):
    v = prob.dominates(prob.parse_distribution(p["d1"]), prob.parse_distribution(p["d2"]))
    expect = p.get("expect", True)
    return ["d1", "d2", "worst_c", "worst_gap", "dominates", "pass"], [
        {"d1": p["d1"], "d2": p["d2"], "worst_c": v.worst_c, "worst_gap": v.worst_gap,
         "dominates": v.passed, "pass": v.passed == expect}]


@_register("seminorm_membership", "norm-dominated seminorms p <= ||.|| and countable convexity")
def _seminorm_membership(p, ctx):
    dim = p["dim"]
    rows = []
    for i, raw in enumerate(p["specs"]):
        s = seminorm.SeminormSpec(raw["weights"], raw["sets"], dim)
        rep = seminorm.dominated_by_norm_check(s, n_samples=p.get("samples", 1000), seed=ctx.seed or 0)
        # a member must never exceed the norm; the expected membership is optional
        ok = rep["in_N"] == raw.get("expect", rep["in_N"]) and (not rep["in_N"] or rep["violations"] == 0)
        rows.append({"spec": i, "in_N": rep["in_N"], "worst_ratio": rep["worst_ratio"], "pass": ok})
    return ["spec", "in_N", "worst_ratio", "pass"], rows


@_register("extension", "generator of the transition semigroup extends the martingale-problem operator")
def _extension(p, ctx):
    q = ctx.matrix(p)
    f = np.asarray(p["f"], dtype=float)
    rep = markov.generator_extension_check(q, f, p.get("K", list(range(q.shape[0]))),
                                           p.get("t_seq", [1.0, 0.1, 0.01, 0.001]))
    rows = [{"t": r["t"], "error": r["error"], "bound": rep.rhs, "pass": rep.passed}
            for r in rep.details["table"]]
    return ["t", "error", "bound", "pass"], rows


@_register("c0_preservation", "C0-invariance and preservation of probability measures")
def _c0(p, ctx):
    q = ctx.matrix(p)
    boundary = p.get("boundary", ctx.input(p).get("boundary", []))
    out = markov.c0_and_probability_preservation(q, boundary, p.get("t", 1.0))
    expect = p.get("expect_c0", True)
    return ["t", "row_sum_error", "boundary_leak", "c0_invariant", "pass"], [
        {"t": p.get("t", 1.0), "row_sum_error": out["row_sum_error"], "boundary_leak": out["boundary_leak"],
         "c0_invariant": out["c0_invariant"],
         "pass": out["probability_preserving"] and out["c0_invariant"] == expect}]


# stochastic checks ----------------------------------------------------------

@_register("martingale", "martingale problem: f(X(t)) - f(X(0)) - int_0^t Af(X(s)) ds is a martingale",
           stochastic=True)
def _martingale(p, ctx):
    q = ctx.matrix(p)
    f = np.asarray(p["f"], dtype=float)
    af = np.asarray(p["Af"], dtype=float) if "Af" in p else q @ f
    rep = markov.martingale_check(q, f, af, p.get("pairs", [[0.5, 1.0]]), p.get("N", 100_000), ctx.seed)
    rows = [{k: r[k] for k in ("s", "t", "state", "count", "mean", "se", "status", "pass")}
            for r in rep.rows]
    expect = p.get("expect", True)
    for r in rows:
        if r["status"] == "inconclusive":
            r["pass"] = True
        elif not expect:
            r["pass"] = True
    ok = rep.passed if expect else (not rep.passed and rep.max_z > p.get("min_effect", 5.0))
    return (["s", "t", "state", "count", "mean", "se", "status", "pass"], rows,
            {"max_z": rep.max_z, "expect_martingale": expect, "pass_override": ok})


@_register("transition_mc", "transition semigroup S(t)f(x) = E[f(X(t)) | X(0) = x]", stochastic=True)
def _transition_mc(p, ctx):
    q = ctx.matrix(p)
    f = np.asarray(p["f"], dtype=float)
    t = p.get("t", 1.0)
    exact = markov.transition_matrix(q, t) @ f
    rows = []
    for x0 in p.get("x0", [0]):
        est, se = markov.transition_mc(q, t, f, x0, p.get("N", 100_000), ctx.seed + x0)
        diff = abs(est - exact[x0])
        rows.append({"x0": x0, "estimate": est, "se": se, "exact": exact[x0],
                     "pass": diff <= 3 * se or diff <= 1e-12})
    return ["x0", "estimate", "se", "exact", "pass"], rows


@_register("containment", "compact containment sup_x P_x[X(t) in K_hat for t <= T] >= 1 - eps",
           stochastic=True)
def _containment(p, ctx):
    q = ctx.matrix(p)
    est = markov.compact_containment(q, p["K"], p["K_hat"], p.get("T", 1.0), p.get("N", 10_000), ctx.seed)
    eps = p.get("epsilon", 0.05)
    rows = [{"state": x, "probability": pr, "se": se, "pass": pr >= 1 - eps}
            for x, (pr, se) in sorted(est.per_state.items())]
    return ["state", "probability", "se", "pass"], rows


def _samples(p: dict, dim: int) -> list:
    if "x" in p:
        xs = np.atleast_2d(np.asarray(p["x"], dtype=float))
        return list(xs)
    return list(np.eye(dim))


class _Context:
    def __init__(self, cfg: dict, seed):
        self.cfg = cfg
        self.seed = seed
        self.tol = float(cfg.get("tol", 1e-10))
        self.base = cfg.get("_base", ".")
        self._inputs = {}

    def input(self, p: dict) -> dict:
        name = p.get("input")
        if name is None:
            return p
        if name not in self._inputs:
            spec = self.cfg.get("inputs", {}).get(name)
            if spec is None:
                raise ConfigError(f"unknown input {name!r}")
            self._inputs[name] = _load_input(spec, self.base)
        return self._inputs[name]

    def matrix(self, p: dict) -> np.ndarray:
        return _matrix_of(self.input(p))


def chernoff_table(dist, n: int, c_values=None) -> list:
    """Rows ``(c, exact_tail, bound)`` for the mean of ``n`` i.i.d. copies of ``dist``.

    ``dist`` is the summand law: Exponential(rate) or Poisson(mean).
    """
    if isinstance(dist, prob.Exponential):
        log_mgf, theta_max = prob.exponential_log_mgf(dist.rate)
        mean_law = prob.Gamma(n, n * dist.rate)
        exact = lambda c: float(mean_law.sf(c))  # noqa: E731
        mean = 1.0 / dist.rate
    elif isinstance(dist, prob.Poisson):
        log_mgf, theta_max = prob.poisson_log_mgf(dist.mean)
        total = prob.Poisson(n * dist.mean)
        exact = lambda c: float(total.sf(n * c))  # noqa: E731
        mean = dist.mean
    else:
        raise ConfigError("chernoff supports exponential and poisson summands")
    if c_values is None:
        c_values = list(np.linspace(max(mean, 1e-9), mean + 10 * max(mean, 1.0), 16))
    rows = []
    for c in c_values:
        b = prob.chernoff_bound(log_mgf, c, n, theta_max).bound
        e = exact(c)
        rows.append({"c": float(c), "exact_tail": e, "bound": b, "pass": e <= b})
    return rows


def run_suite(cfg: dict, seed: int | None = None) -> tuple[int, dict]:
    """Run every configured check; return ``(exit_code, report)``.

    Exit code 0 when all checks pass, 1 when some check fails. Configuration
    problems raise :class:`ConfigError` (exit code 2 at the CLI).
    """
    seed = cfg.get("seed") if seed is None else seed
    checks = cfg.get("checks", [])
    if not isinstance(checks, list):
        raise ConfigError("'checks' must be an array of tables")
    for i, p in enumerate(checks):
        name = p.get("name")
        if name not in CHECKS:
            raise ConfigError(f"check #{i}: unknown check {name!r}; known: {sorted(CHECKS)}")
        if CHECKS[name].stochastic and seed is None:
            raise ConfigError(f"check #{i} ({name}) is stochastic and needs a seed")
    ctx = _Context(cfg, None if seed is None else int(seed))
    results = []
    for i, p in enumerate(checks):
        spec = CHECKS[p["name"]]
        try:
            out = spec.fn(p, ctx)
        except KeyError as exc:
            raise ConfigError(f"check #{i} ({p['name']}): missing parameter {exc}") from None
        except (ValueError, TypeError, IndexError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"check #{i} ({p['name']}): {exc}") from None
        columns, rows = out[0], out[1]
        summary = dict(out[2]) if len(out) > 2 else {}
        passed = summary.pop("pass_override", _rows_pass(rows))
        rows = [{"anchor": spec.anchor, **r} for r in rows]
        results.append(CheckResult(p["name"], spec.anchor, bool(passed), ["anchor", *columns], rows,
                                   spec.stochastic, summary))
    all_pass = all(r.passed for r in results)
    report = {"seed": seed, "pass": all_pass, "checks": [r.to_dict() for r in results]}
    return (0 if all_pass else 1), report


def emit_tables(report: dict, out_dir) -> list[Path]:
    """Write one CSV per check (``NN_name.csv``) with the check's column order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, chk in enumerate(report["checks"]):
        path = out / f"{i:02d}_{chk['name']}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=chk["columns"], extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            for row in chk["rows"]:
                w.writerow({k: _fmt(row.get(k)) for k in chk["columns"]})
        paths.append(path)
    return paths


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v
