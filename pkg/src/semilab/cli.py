"""Command-line entry point ``semilab``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on
configuration or usage errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import generate, markov, prob, resolvent, semigroup, yosida
from .core import Operator, as_matrix, sup_norm
from .report import plain
from .suite import (ConfigError, canonical_json, chernoff_table, demo_config_path, emit_tables,
                    load_config, run_suite)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _pairs(text: str) -> list:
    # "0:0.5,0.5:1" -> [(0, 0.5), (0.5, 1)]
    return [tuple(float(v) for v in item.split(":")) for item in text.split(",") if item.strip()]


def _load_matrix(arg: str) -> np.ndarray:
    """Matrix from a JSON file or an inline JSON string (nested list, operator or Q-matrix object)."""
    text = arg.strip()
    if not text.startswith(("[", "{")):
        try:
            text = Path(arg).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {arg}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON for matrix: {exc}") from None
    if isinstance(data, dict):
        if "q" in data:
            return as_matrix(data["q"])
        if "entries" in data:
            return Operator.from_dict(data).entries
        raise ConfigError("matrix object needs 'q' or 'entries'")
    return as_matrix(data)


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _code(passed: bool) -> int:
    return EXIT_OK if passed else EXIT_FAIL


# subcommands ---------------------------------------------------------------

def cmd_generate(a) -> int:
    rng = np.random.default_rng(a.seed)
    if a.kind == "qmatrix":
        m = generate.random_q_matrix(a.dim, rng, a.scale)
        text = json.dumps(markov.QMatrix(m).to_dict(), sort_keys=True)
    elif a.kind == "dissipative":
        text = Operator(generate.random_dissipative(a.dim, rng, a.scale)).to_json()
    elif a.kind == "birth-death":
        text = json.dumps(markov.QMatrix(generate.birth_death(a.dim, a.scale, a.scale)).to_dict(),
                          sort_keys=True)
    else:
        text = Operator(generate.random_generator(a.dim, rng, a.scale)).to_json()
    _write(text + "\n", a.out)
    return EXIT_OK


def cmd_resolvent(a) -> int:
    m = _load_matrix(a.operator)
    x = np.asarray(_floats(a.x)) if a.x else np.ones(m.shape[0])
    direct = resolvent.resolvent_solve(m, a.lam, x)
    out = {"lambda": a.lam, "x": x, "direct_solve": direct}
    passed = True
    if a.method == "quadrature":
        y, info = resolvent.resolvent_quadrature(m, a.lam, x, tol=a.tol, return_info=True)
        rel = sup_norm(y - direct) / max(sup_norm(direct), 1e-300)
        out.update(quadrature=y, rel_error=rel, **info)
        passed = rel <= 1e-8
    _write(canonical_json(out), a.out)
    return _code(passed)


def cmd_hille_yosida(a) -> int:
    m = _load_matrix(a.operator)
    try:
        rep = resolvent.hille_yosida_check(m, a.m, a.omega, a.nmax, a.lambda_grid, rtol=a.tol)
        out = rep.to_dict()
    except resolvent.SpectrumHit as exc:
        out = {"pass": False, "worst_ratio": float("inf"), "bound": a.m,
               "argmax": {"n": exc.n, "lambda": exc.lam / exc.n if exc.n else exc.lam},
               "reason": str(exc)}
    _write(canonical_json(out), a.out)
    return _code(out["pass"])


def cmd_yosida(a) -> int:
    cfg = {"inputs": {"a": {"matrix": _load_matrix(a.operator).tolist()}},
           "checks": [{"name": "yosida_convergence", "input": "a", "t": a.t,
                       "indices": a.indices, **({"x": _floats(a.x)} if a.x else {})}]}
    code, report = run_suite(cfg, seed=a.seed)
    chk = report["checks"][0]
    _write(_csv(chk["rows"], ["n", "certificate", "true_error"]), a.out)
    return code


def cmd_chernoff(a) -> int:
    rows = chernoff_table(prob.parse_distribution(a.dist), a.n, a.c)
    _write(_csv(rows, ["c", "exact_tail", "bound"]), a.out)
    return _code(all(r["pass"] for r in rows))


def cmd_dominate(a) -> int:
    v = prob.dominates(prob.parse_distribution(a.d1), prob.parse_distribution(a.d2))
    _write(canonical_json({"d1": a.d1, "d2": a.d2, **v.to_dict()}), a.out)
    return _code(v.passed)


def cmd_markov_sim(a) -> int:
    traj = markov.simulate(_load_matrix(a.chain), a.x0, a.T, a.seed)
    out = {"seed": a.seed, "horizon": a.T, "times": traj.times, "states": traj.states}
    _write(canonical_json(out), a.out)
    return EXIT_OK


def cmd_martingale(a) -> int:
    q = _load_matrix(a.chain)
    f = np.asarray(_floats(a.f))
    af = np.asarray(_floats(a.af)) if a.af else q @ f
    rep = markov.martingale_check(q, f, af, _pairs(a.pairs), a.N, a.seed)
    _write(canonical_json(rep.to_dict()), a.out)
    return _code(rep.passed)


def cmd_containment(a) -> int:
    est = markov.compact_containment(_load_matrix(a.chain), _ints(a.K), _ints(a.K_hat), a.T, a.N, a.seed)
    out = {"seed": a.seed, "probability": est.probability, "se": est.se, "worst_state": est.worst_state,
           "per_state": {str(k): {"probability": p, "se": s} for k, (p, s) in est.per_state.items()},
           "pass": est.probability >= 1 - a.epsilon}
    _write(canonical_json(out), a.out)
    return _code(out["pass"])


def cmd_extension(a) -> int:
    q = _load_matrix(a.chain)
    K = _ints(a.K) if a.K else list(range(q.shape[0]))
    rep = markov.generator_extension_check(q, _floats(a.f), K, a.t_seq)
    _write(canonical_json(rep.to_dict()), a.out)
    return _code(rep.passed)


def cmd_suite(a) -> int:
    path = demo_config_path() if a.demo or not a.config else Path(a.config)
    cfg = load_config(path)
    if a.tol is not None:
        cfg["tol"] = a.tol
    code, report = run_suite(cfg, seed=a.seed)
    text = canonical_json(report)
    if a.out:
        out = Path(a.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text)
        emit_tables(report, out)
    else:
        sys.stdout.write(text)
    for chk in report["checks"]:
        print(f"{'PASS' if chk['pass'] else 'FAIL'}  {chk['name']}", file=sys.stderr)
        if not chk["pass"] and "failing" in chk["summary"]:
            print(f"      failing at {json.dumps(plain(chk['summary']['failing']), sort_keys=True)}",
                  file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--out", default=None, help="output file (directory for 'suite')")
    common.add_argument("--tol", type=float, default=None, help="numerical tolerance")
    common.add_argument("--config", default=None, help="TOML suite configuration")

    p = argparse.ArgumentParser(prog="semilab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="random or structured generator as JSON")
    g.add_argument("--kind", choices=["qmatrix", "dissipative", "birth-death", "gaussian"], default="qmatrix")
    g.add_argument("--dim", type=int, default=4)
    g.add_argument("--scale", type=float, default=1.0)
    g.set_defaults(func=cmd_generate, seed_default=0)

    r = sub.add_parser("resolvent", parents=[common], help="R(lambda)x by solve or quadrature")
    r.add_argument("--operator", required=True)
    r.add_argument("--lam", type=float, required=True)
    r.add_argument("--x", default=None)
    r.add_argument("--method", choices=["direct_solve", "quadrature"], default="quadrature")
    r.set_defaults(func=cmd_resolvent, tol_default=1e-11)

    h = sub.add_parser("hille-yosida", parents=[common], help="resolvent power bound on a grid")
    h.add_argument("--operator", required=True)
    h.add_argument("--m", type=float, default=1.0)
    h.add_argument("--omega", type=float, default=0.0)
    h.add_argument("--nmax", type=int, default=20)
    h.add_argument("--lambda-grid", type=_floats, default=[0.5, 1.0, 2.0, 5.0])
    h.set_defaults(func=cmd_hille_yosida, tol_default=1e-10)

    y = sub.add_parser("yosida", parents=[common], help="approximant convergence table (CSV)")
    y.add_argument("--operator", required=True)
    y.add_argument("--t", type=float, default=1.0)
    y.add_argument("--x", default=None)
    y.add_argument("--indices", type=_ints, default=[8, 16, 32, 64, 128])
    y.set_defaults(func=cmd_yosida)

    c = sub.add_parser("chernoff", parents=[common], help="exact tail vs Chernoff bound (CSV)")
    c.add_argument("--dist", required=True, help="summand law, e.g. exponential:1 or poisson:2")
    c.add_argument("--c", type=_floats, default=None)
    c.add_argument("--n", type=int, default=1)
    c.set_defaults(func=cmd_chernoff)

    d = sub.add_parser("dominate", parents=[common], help="test P[d1 > c] >= P[d2 > c]")
    d.add_argument("--d1", required=True)
    d.add_argument("--d2", required=True)
    d.set_defaults(func=cmd_dominate)

    m = sub.add_parser("markov-sim", parents=[common], help="simulate one trajectory")
    m.add_argument("--chain", required=True)
    m.add_argument("--x0", type=int, default=0)
    m.add_argument("--T", type=float, default=1.0)
    m.set_defaults(func=cmd_markov_sim, seed_default=0)

    mg = sub.add_parser("martingale-check", parents=[common], help="martingale residual test")
    mg.add_argument("--chain", required=True)
    mg.add_argument("--f", required=True)
    mg.add_argument("--af", default=None, help="claimed generator image (default Qf)")
    mg.add_argument("--pairs", default="0:0.5,0.5:1")
    mg.add_argument("--N", type=int, default=100_000)
    mg.set_defaults(func=cmd_martingale, seed_default=0)

    ct = sub.add_parser("containment", parents=[common], help="compact containment probability")
    ct.add_argument("--chain", required=True)
    ct.add_argument("--K", required=True)
    ct.add_argument("--K-hat", dest="K_hat", required=True)
    ct.add_argument("--T", type=float, default=1.0)
    ct.add_argument("--N", type=int, default=10_000)
    ct.add_argument("--epsilon", type=float, default=0.05)
    ct.set_defaults(func=cmd_containment, seed_default=0)

    e = sub.add_parser("extension-check", parents=[common], help="difference quotients vs Qf")
    e.add_argument("--chain", required=True)
    e.add_argument("--f", required=True)
    e.add_argument("--K", default=None)
    e.add_argument("--t-seq", type=_floats, default=[1.0, 0.1, 0.01, 0.001])
    e.set_defaults(func=cmd_extension)

    s = sub.add_parser("suite", parents=[common], help="run a TOML-configured verification suite")
    s.add_argument("--demo", action="store_true", help="run the bundled demo configuration")
    s.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.seed is None and hasattr(args, "seed_default"):
        args.seed = args.seed_default
    if args.tol is None and hasattr(args, "tol_default"):
        args.tol = args.tol_default
    if args.command != "suite" and args.config:
        print("--config only applies to 'suite'", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
