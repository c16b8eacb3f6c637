"""Continuous-time Markov chains on finite state spaces and martingale-problem checks.

Simulation is the exact jump chain: exponential holding times with rate
``-Q_ii`` and jumps proportional to the off-diagonal row. Batches are split
into fixed blocks of trajectories, each driven by its own Philox substream
keyed by ``(seed, block index)``, so results depend only on the seed and the
trajectory index. Path integrals of piecewise-constant paths are exact.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import as_matrix, as_vector, op_norm, sup_norm
from .report import CheckReport
from .semigroup import SERIES_TOL, exp_series, uniformization_shift

__all__ = [
    "QMatrix",
    "QVerdict",
    "validate_q",
    "Trajectory",
    "simulate",
    "simulate_batch",
    "BatchPaths",
    "transition_mc",
    "MartingaleReport",
    "martingale_check",
    "ContainmentEstimate",
    "compact_containment",
    "generator_extension_check",
    "c0_and_probability_preservation",
    "transition_matrix",
    "BLOCK_SIZE",
]

ROW_SUM_TOL = 1e-12
BLOCK_SIZE = 8192
MIN_CONDITIONING = 30


@dataclass(eq=False)
class QMatrix:
    q: np.ndarray
    metric: np.ndarray | None = None
    boundary: tuple = ()

    def __post_init__(self):
        self.q = as_matrix(self.q)
        if self.metric is not None:
            self.metric = np.asarray(self.metric, dtype=float)
            if self.metric.shape != self.q.shape:
                raise ValueError("metric must match the state space size")
        self.boundary = tuple(int(b) for b in self.boundary)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def to_dict(self) -> dict:
        return {"q": self.q.tolist(),
                "metric": None if self.metric is None else self.metric.tolist(),
                "boundary": list(self.boundary)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "QMatrix":
        return cls(data["q"], data.get("metric"), data.get("boundary", ()))

    @classmethod
    def from_json(cls, text: str) -> "QMatrix":
        return cls.from_dict(json.loads(text))


def _q(Q) -> np.ndarray:
    return Q.q if isinstance(Q, QMatrix) else as_matrix(Q)


@dataclass
class QVerdict:
    valid: bool
    problems: list

    def __bool__(self) -> bool:
        return self.valid


def validate_q(Q) -> QVerdict:
    q = _q(Q)
    problems = []
    off = q - np.diag(np.diag(q))
    for i, j in zip(*np.nonzero(off < 0)):
        problems.append(f"negative rate q[{i},{j}] = {q[i, j]:g}")
    sums = q.sum(axis=1)
    for i in np.nonzero(np.abs(sums) > ROW_SUM_TOL * np.maximum(1.0, np.abs(q).sum(axis=1)))[0]:
        problems.append(f"row {i} sums to {sums[i]:g}")
    return QVerdict(not problems, problems)


def _require_q(Q) -> np.ndarray:
    q = _q(Q)
    v = validate_q(q)
    if not v:
        raise ValueError("invalid Q-matrix: " + "; ".join(v.problems))
    return q


def _jump_tables(q: np.ndarray):
    rates = -np.diag(q).copy()
    rates[rates < 0] = 0.0
    off = np.clip(q - np.diag(np.diag(q)), 0.0, None)
    n = q.shape[0]
    probs = np.zeros_like(q)
    moving = rates > 0
    probs[moving] = off[moving] / off[moving].sum(axis=1, keepdims=True)
    probs[~moving, np.arange(n)[~moving]] = 1.0
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    return rates, cdf


def _generator(seed: int, block: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(block),))))


@dataclass
class Trajectory:
    """Piecewise-constant path: state ``states[i]`` on ``[times[i], times[i+1])``."""

    times: np.ndarray
    states: np.ndarray
    horizon: float

    @property
    def n_jumps(self) -> int:
        return len(self.times) - 1

    def state_at(self, t: float) -> int:
        if not 0 <= t <= self.horizon:
            raise ValueError("time outside the horizon")
        return int(self.states[np.searchsorted(self.times, t, side="right") - 1])

    def integral(self, g, a: float, b: float) -> float:
        """``int_a^b g(X(s)) ds`` evaluated exactly."""
        g = np.asarray(g, dtype=float)
        edges = np.append(self.times, self.horizon)
        lo = np.clip(edges[:-1], a, b)
        hi = np.clip(edges[1:], a, b)
        return float(np.sum(g[self.states] * (hi - lo)))


def simulate(Q, x0: int, T: float, seed: int) -> Trajectory:
    q = _require_q(Q)
    rates, cdf = _jump_tables(q)
    gen = _generator(seed)
    times, states = [0.0], [int(x0)]
    t, s = 0.0, int(x0)
    while True:
        if rates[s] == 0:
            break
        t += gen.standard_exponential() / rates[s]
        if t >= T:
            break
        s = int(np.searchsorted(cdf[s], gen.random(), side="right"))
        times.append(t)
        states.append(s)
    return Trajectory(np.array(times), np.array(states, dtype=int), float(T))


@dataclass
class BatchPaths:
    """Path functionals of a batch: states at ``times`` and running integrals.

    ``integrals[g, j, k] = int_0^{times[j]} g(X_k(s)) ds``; ``exited[k]`` is
    set when trajectory ``k`` jumped outside ``inside`` before the last time.
    """

    times: np.ndarray
    states: np.ndarray
    integrals: np.ndarray
    exited: np.ndarray
    jumps: np.ndarray


def _simulate_block(rates, cdf, x0, times, gs, gen, inside):
    n_traj = x0.size
    t_end = times[-1]
    m = times.size
    states_at = np.empty((m, n_traj), dtype=int)
    ints = np.zeros((len(gs), m, n_traj))
    exited = np.zeros(n_traj, dtype=bool)
    jumps = np.zeros(n_traj, dtype=int)
    cur_t = np.zeros(n_traj)
    state = x0.copy()
    active = np.arange(n_traj)
    gmat = np.array(gs, dtype=float).reshape(len(gs), rates.size)
    while active.size:
        s = state[active]
        r = rates[s]
        e = gen.standard_exponential(active.size)
        u = gen.random(active.size)
        with np.errstate(divide="ignore"):
            hold = np.where(r > 0, e / np.where(r > 0, r, 1.0), np.inf)
        t0 = cur_t[active]
        t1 = t0 + hold
        lo = np.searchsorted(times, t0, side="left")
        hi = np.searchsorted(times, t1, side="left")
        for j in range(m):
            hit = (lo <= j) & (j < hi)
            states_at[j, active[hit]] = s[hit]
        if gs:
            seg = np.clip(np.minimum(t1[None, :], times[:, None]) - t0[None, :], 0.0, None)
            ints[:, :, active] += gmat[:, s][:, None, :] * seg[None, :, :]
        nxt = (cdf[s] < u[:, None]).sum(axis=1)
        jumped = t1 < t_end
        if inside is not None:
            exited[active[jumped & ~inside[nxt]]] = True
        jumps[active[jumped]] += 1
        state[active] = np.where(jumped, nxt, s)
        cur_t[active] = t1
        active = active[jumped]
    return states_at, ints, exited, jumps


def simulate_batch(Q, x0, times, N: int, seed: int, gs=(), inside=None,
                   block_size: int = BLOCK_SIZE) -> BatchPaths:
    """Simulate ``N`` trajectories and record states and path integrals at ``times``.

    ``x0`` is a start state or an array of ``N`` start states. ``gs`` lists
    functions (vectors over states) to integrate; ``inside`` is an optional
    boolean mask over states used for exit detection.
    """
    q = _require_q(Q)
    rates, cdf = _jump_tables(q)
    times = np.asarray(sorted(set(float(t) for t in np.atleast_1d(times))))
    if times[0] < 0:
        raise ValueError("times must be >= 0")
    starts = np.full(N, int(x0), dtype=int) if np.ndim(x0) == 0 else np.asarray(x0, dtype=int)
    if starts.size != N:
        raise ValueError("need one start state per trajectory")
    inside_mask = None if inside is None else np.asarray(inside, dtype=bool)
    parts = []
    for b, lo in enumerate(range(0, N, block_size)):
        gen = _generator(seed, b)
        parts.append(_simulate_block(rates, cdf, starts[lo:lo + block_size], times, list(gs), gen, inside_mask))
    return BatchPaths(
        times,
        np.concatenate([p[0] for p in parts], axis=1),
        np.concatenate([p[1] for p in parts], axis=2),
        np.concatenate([p[2] for p in parts]),
        np.concatenate([p[3] for p in parts]),
    )


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return math.nan, math.nan
    if np.ptp(values) == 0:
        return float(values[0]), 0.0
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.inf
    return float(np.mean(values)), se


def transition_mc(Q, t: float, f, x0: int, N: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo ``S(t)f(x0) = E[f(X(t)) | X(0) = x0]`` with its standard error."""
    if N < 100:
        raise ValueError("N must be >= 100")
    f = as_vector(f)
    paths = simulate_batch(Q, x0, [t], N, seed)
    return _mean_se(f[paths.states[0]])


@dataclass
class MartingaleReport:
    """Residual statistics of ``M_f(t) - M_f(s)`` conditioned on ``X(s) = y``."""

    rows: list = field(default_factory=list)
    seed: int = 0
    n_paths: int = 0
    z_threshold: float = 3.0

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows if r["status"] != "inconclusive")

    @property
    def max_z(self) -> float:
        zs = [abs(r["mean"]) / r["se"] if r["se"] > 0 else (0.0 if r["mean"] == 0 else math.inf)
              for r in self.rows if r["status"] != "inconclusive"]
        return max(zs, default=0.0)

    def to_dict(self) -> dict:
        return {"pass": self.passed, "max_z": self.max_z, "seed": self.seed,
                "n_paths": self.n_paths, "rows": self.rows}


def martingale_check(Q_for_sim, f, Af_claimed, time_pairs, N: int = 100_000, seed: int = 0,
                     initial=None, z: float = 3.0, floor: float = 1e-12,
                     min_count: int = MIN_CONDITIONING) -> MartingaleReport:
    """Test that ``f(X(t)) - f(X(0)) - int_0^t Af(X(u)) du`` has martingale increments.

    For each ``(s, t)`` and each state ``y`` reached at time ``s`` at least
    ``min_count`` times, the increment over ``[s, t]`` is averaged over
    trajectories with ``X(s) = y``; the row passes when
    ``|mean| <= z * se`` or ``|mean| <= floor``. Rows with fewer than
    ``min_count`` samples, or with zero spread from a non-absorbing state,
    are marked inconclusive. Start states default to a
    deterministic round-robin over all states.
    """
    q = _require_q(Q_for_sim)
    f = as_vector(f)
    g = as_vector(Af_claimed)
    n = q.shape[0]
    starts = np.arange(N) % n if initial is None else (
        np.full(N, int(initial)) if np.ndim(initial) == 0 else np.asarray(initial, dtype=int))
    pairs = [(float(s), float(t)) for s, t in time_pairs]
    if any(not 0 <= s < t for s, t in pairs):
        raise ValueError("need 0 <= s < t for every pair")
    times = sorted({v for p in pairs for v in p} | {0.0})
    paths = simulate_batch(q, starts, times, N, seed, gs=[g])
    idx = {t: j for j, t in enumerate(paths.times)}
    rows = []
    for s, t in pairs:
        js, jt = idx[s], idx[t]
        xs, xt = paths.states[js], paths.states[jt]
        incr = f[xt] - f[xs] - (paths.integrals[0, jt] - paths.integrals[0, js])
        for y in range(n):
            sel = incr[xs == y]
            mean, se = _mean_se(sel)
            if sel.size < min_count:
                rows.append({"s": s, "t": t, "state": y, "count": int(sel.size), "mean": mean,
                             "se": se, "status": "inconclusive", "pass": False})
                continue
            if se == 0.0 and abs(mean) > floor and q[y, y] != 0.0:
                # no variation observed although y can jump: sample too small to judge
                rows.append({"s": s, "t": t, "state": y, "count": int(sel.size), "mean": mean,
                             "se": se, "status": "inconclusive", "pass": False})
                continue
            ok = abs(mean) <= z * se or abs(mean) <= floor
            rows.append({"s": s, "t": t, "state": y, "count": int(sel.size), "mean": mean, "se": se,
                         "status": "pass" if ok else "fail", "pass": bool(ok)})
    return MartingaleReport(rows, seed, N, z)


@dataclass
class ContainmentEstimate:
    probability: float
    se: float
    worst_state: int
    per_state: dict


def compact_containment(Q, K, K_hat, T: float, N: int = 10_000, seed: int = 0) -> ContainmentEstimate:
    """``min_{x in K} P_x[X(s) in K_hat for all s <= T]`` with ``N`` paths per start state."""
    q = _require_q(Q)
    K = sorted(int(k) for k in K)
    K_hat = set(int(k) for k in K_hat)
    if not set(K) <= K_hat:
        raise ValueError("K must be a subset of K_hat")
    inside = np.zeros(q.shape[0], dtype=bool)
    inside[list(K_hat)] = True
    per_state = {}
    for i, x in enumerate(K):
        paths = simulate_batch(q, x, [T], N, seed * 1_000_003 + i, inside=inside)
        p = 1.0 - float(np.mean(paths.exited))
        per_state[x] = (p, math.sqrt(max(p * (1.0 - p), 0.0) / N))
    worst = min(per_state, key=lambda x: per_state[x][0])
    return ContainmentEstimate(per_state[worst][0], per_state[worst][1], worst, per_state)


def transition_matrix(Q, t: float) -> np.ndarray:
    """``exp(tQ)`` by the uniformized exponential series."""
    q = _q(Q)
    return exp_series(q, t, np.eye(q.shape[0]), shift=uniformization_shift(q))


def generator_extension_check(Q, f, K, t_seq, slack: float | None = None) -> CheckReport:
    """Difference quotients ``sup_{x in K} |(S(t)f - f)/t - Qf|`` along decreasing ``t``.

    Passes iff the errors are nonincreasing and the last one is at most
    ``1.01 * (t/2) ||Q^2 f|| e^{t ||Q||}``, the Taylor remainder bound.

    An increase is only counted when it exceeds the evaluation noise of both
    quotients. By default that noise is the series accuracy divided by ``t``
    plus rounding in ``Qf``; pass ``slack`` to use a fixed absolute value instead.
    """
    q = _q(Q)
    f = as_vector(f)
    K = sorted(int(k) for k in K)
    ts = [float(t) for t in t_seq]
    if any(t <= 0 for t in ts) or any(b >= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_seq must be positive and decreasing")
    qf = q @ f
    rows = []
    for t in ts:
        st = exp_series(q, t, f, shift=uniformization_shift(q))
        err = float(np.max(np.abs(((st - f) / t - qf)[K])))
        rows.append({"t": t, "error": err})
    t_last = ts[-1]
    bound = 1.01 * 0.5 * t_last * sup_norm(q @ qf) * math.exp(t_last * op_norm(q))
    if slack is None:
        scale = 1.0 + sup_norm(f)
        eps = np.finfo(float).eps
        noise = [(SERIES_TOL + 64 * eps) * scale / t + 64 * eps * op_norm(q) * scale for t in ts]
    else:
        noise = [0.5 * slack] * len(ts)
    mono = all(r1["error"] <= r0["error"] + n0 + n1
               for r0, r1, n0, n1 in zip(rows, rows[1:], noise, noise[1:]))
    final = rows[-1]["error"]
    return CheckReport(final, bound, bool(mono and final <= bound), grid=ts,
                       details={"table": rows, "monotone": mono})


def c0_and_probability_preservation(Q, boundary, t: float, f=None, tol: float = 1e-10) -> dict:
    """Finite-space shadows of the C0-invariance and probability-preservation hypotheses.

    (i) rows of ``exp(tQ)`` are probability vectors; (ii) functions vanishing
    on ``boundary`` still vanish there after ``S(t)``. Without ``f`` every
    indicator of a non-boundary state is tested, which spans all such
    functions.
    """
    q = _q(Q)
    n = q.shape[0]
    boundary = sorted(int(b) for b in boundary)
    p = transition_matrix(q, t)
    row_err = float(np.max(np.abs(p.sum(axis=1) - 1.0)))
    min_entry = float(p.min())
    prob_ok = row_err <= tol and min_entry >= -tol
    if f is None:
        interior = [i for i in range(n) if i not in boundary]
        fs = np.eye(n)[:, interior]
    else:
        fs = as_vector(f)[:, None]
        if boundary and np.any(fs[boundary] != 0):
            raise ValueError("f must vanish on the boundary states")
    leak = float(np.max(np.abs((p @ fs)[boundary]))) if boundary and fs.size else 0.0
    absorbing = bool(all(np.all(q[b] == 0) for b in boundary))
    c0_ok = leak <= tol
    return {"probability_preserving": prob_ok, "row_sum_error": row_err, "min_entry": min_entry,
            "c0_invariant": c0_ok, "boundary_leak": leak, "boundary_absorbing": absorbing,
            "pass": prob_ok and c0_ok}
