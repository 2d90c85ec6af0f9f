"""Searches for small values of the inequality's ratio and of related quantities.

Inner problems minimise a degree-0 homogeneous function of a weight vector,
so they are solved on the unit sphere: projected (sub)gradient steps with a
geometrically decaying step length, then a compass search polish whose polls
are evaluated in one batch.  Outer problems walk over point configurations by
simulated annealing.

Every random choice is drawn from a substream keyed on (seed, purpose,
index), and parallel results are merged by index, so results do not depend on
the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize as sciopt
from scipy import stats
from scipy.stats import qmc

from pointineq import serialize
from pointineq.errors import (
    ConvergenceFailure,
    InputError,
    InvalidDimensionError,
    InvalidOptionsError,
    NumericalError,
    TooManyPointsError,
)
from pointineq.forms import _cubed_differences, interaction_matrix, ratio_quotient
from pointineq.geometry import (
    PointConfig,
    SphereConfig,
    make_config,
    make_sphere_config,
    normalize_config,
    pairwise_distances,
)
from pointineq.systems import augmented_quotient, sphere_system, spectrum

EVIDENCE_LABEL = "numerical search result; exploratory evidence, not a proof"

# substream purposes
_INNER, _CHAIN, _CLUSTER, _POLISH = 0, 1, 2, 3


@dataclass(frozen=True)
class SearchOptions:
    seed: int = 0
    restarts: int = 8
    max_iters: int = 200
    step_init: float = 0.2
    min_separation: float = 1.0
    max_diameter: float = 10.0
    initial_temperature: float = 0.05
    decay: float = 0.995
    tolerance: float = 1e-15
    inner_restarts: int = 2
    inner_iters: int = 40
    min_chord: float = 0.1
    workers: int = 1
    softmax_temperature: float | None = None

    def __post_init__(self):
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= int(self.seed) < 2**64):
            raise InvalidOptionsError("seed must be an integer in [0, 2**64)")
        for name in ("restarts", "max_iters", "inner_restarts", "inner_iters", "workers"):
            if int(getattr(self, name)) < 1:
                raise InvalidOptionsError(f"{name} must be a positive integer")
        for name in ("step_init", "min_separation", "max_diameter", "initial_temperature", "min_chord"):
            if not getattr(self, name) > 0:
                raise InvalidOptionsError(f"{name} must be positive")
        if not self.min_separation < self.max_diameter:
            raise InvalidOptionsError("min_separation must be smaller than max_diameter")
        if not 0 < self.decay < 1:
            raise InvalidOptionsError("decay must lie in (0, 1)")
        if self.tolerance < 0:
            raise InvalidOptionsError("tolerance must be non-negative")
        if self.softmax_temperature is not None and not self.softmax_temperature > 0:
            raise InvalidOptionsError("softmax_temperature must be positive when set")

    def replace(self, **changes) -> "SearchOptions":
        return SearchOptions(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SearchReport:
    seed: int
    objective_kind: str  # "min-ratio" | "min-sigma"
    best_value: float
    best_config: PointConfig | SphereConfig
    best_weights: np.ndarray | None
    iterations_used: int
    history: list = field(default_factory=list)
    options: dict | None = None

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "objective_kind": self.objective_kind,
            "best_value": self.best_value,
            "best_config": self.best_config.to_dict(),
            "best_weights": None if self.best_weights is None else self.best_weights.tolist(),
            "iterations_used": self.iterations_used,
            "history": [[int(i), float(v)] for i, v in self.history],
            "options": self.options,
            "label": EVIDENCE_LABEL,
        }

    def dumps(self) -> str:
        return serialize.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchReport":
        cfg_doc = doc["best_config"]
        if doc["objective_kind"] == "min-sigma":
            cfg = make_sphere_config(cfg_doc["points"])
        else:
            cfg = make_config(cfg_doc["points"])
        w = doc.get("best_weights")
        return cls(
            seed=int(doc["seed"]),
            objective_kind=doc["objective_kind"],
            best_value=float(doc["best_value"]),
            best_config=cfg,
            best_weights=None if w is None else np.asarray(w, dtype=float),
            iterations_used=int(doc["iterations_used"]),
            history=[(int(i), float(v)) for i, v in doc["history"]],
            options=doc.get("options"),
        )

    def history_csv(self) -> str:
        lines = ["iteration,best_value"]
        lines += [f"{int(i)},{serialize.format_float(v)}" for i, v in self.history]
        return "\n".join(lines) + "\n"


def report_options(opts: SearchOptions) -> dict:
    """Options that can influence results; the thread count cannot."""
    d = opts.to_dict()
    d.pop("workers")
    return d


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _map_ordered(fn, items, workers: int):
    """map() that may run on threads; output order always follows ``items``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _unit(z: np.ndarray) -> np.ndarray:
    return z / math.sqrt(z @ z)


def _random_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    return _unit(rng.standard_normal(n))


# -- inner minimisation on the unit sphere ---------------------------------


def _descend(value, value_grad, z, iters: int, step_init: float):
    """Projected normalised (sub)gradient steps with geometric step decay.

    ``value_grad(z)`` returns ``value(z)`` together with a (sub)gradient.
    """
    f, g = value_grad(z)
    best_z, best_f = z, f
    decay = 1e-3 ** (1.0 / iters)
    step = step_init
    for it in range(iters):
        g = g - (g @ z) * z
        gn = math.sqrt(g @ g)
        if not gn > 0 or not math.isfinite(gn):
            break
        z = _unit(z - (step / gn) * g)
        if it == iters - 1:
            f = value(z)  # no further step needs the gradient
        else:
            f, g = value_grad(z)
        if f < best_f:
            best_z, best_f = z, f
        step *= decay
    return best_z, best_f


def _compass(values, z, f, rng, delta: float, delta_min: float, rtol: float, max_polls: int = 2000):
    """Compass search on the sphere.

    Polls +-e_i and +-q_i for a random orthonormal basis q (redrawn whenever
    the step shrinks), moving to the best improving poll point.
    """
    n = len(z)
    eye = np.eye(n)
    basis = np.linalg.qr(rng.standard_normal((n, n)))[0].T
    for _ in range(max_polls):
        if delta < delta_min:
            break
        dirs = np.vstack([eye, -eye, basis, -basis])
        cand = z + delta * dirs
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        vals = values(cand)
        k = int(np.argmin(vals))
        if vals[k] < f - rtol * abs(f):
            z, f = cand[k], float(vals[k])
            delta *= 1.5
        else:
            delta *= 0.5
            basis = np.linalg.qr(rng.standard_normal((n, n)))[0].T
    return z, f


@dataclass(frozen=True)
class _SphereProblem:
    value: object  # scalar objective, the one reported
    value_grad: object  # z -> (value(z), descent direction source)
    values: object  # batched objective for compass polls
    n: int


def _solve_from(problem: _SphereProblem, z0, rng, iters, step_init, delta_min, rtol):
    z, f = _descend(problem.value, problem.value_grad, _unit(np.asarray(z0, dtype=float)), iters, step_init)
    z, _ = _compass(problem.values, z, problem.value(z), rng, step_init / 4.0, delta_min, rtol)
    z = _unit(z)
    return z, problem.value(z)


def _multistart(problem: _SphereProblem, starts, opts: SearchOptions, iters, delta_min, key, workers=1):
    """Run one descent+polish per start; return the lowest (z, f), ties by start index."""

    def run(idx):
        rng = substream(opts.seed, _POLISH, *key, idx)
        try:
            return _solve_from(problem, starts[idx], rng, iters, opts.step_init, delta_min, opts.tolerance)
        except (FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError):
            return None, math.inf

    results = _map_ordered(run, range(len(starts)), workers)
    finite = [(f, i) for i, (_, f) in enumerate(results) if np.isfinite(f)]
    if not finite:
        raise ConvergenceFailure("no restart produced a finite objective value")
    f, i = min(finite)
    return results[i][0], f


def _ratio_problem(quotient, softmax_temperature=None) -> _SphereProblem:
    smooth = quotient if softmax_temperature is None else _with_softmax(quotient, softmax_temperature)
    return _SphereProblem(quotient.exact_value, smooth.value_and_subgradient, quotient.values, quotient.n)


def _with_softmax(quotient, t):
    from dataclasses import replace

    return replace(quotient, softmax_temperature=t)


def _starts(n, count, opts, key, warm=None):
    starts = [] if warm is None else [np.asarray(warm, dtype=float)]
    for r in range(count):
        starts.append(_random_unit(substream(opts.seed, _INNER, *key, r), n))
    return starts


def min_ratio_over_U(config: PointConfig, opts: SearchOptions | None = None, u0=None, _key=()):
    """Smallest I1/I2 found over weight vectors for a fixed configuration.

    Returns ``(u, value)`` with ``u`` of unit norm.  ``u0`` adds a warm start
    ahead of the ``opts.restarts`` random ones.
    """
    opts = opts or SearchOptions()
    q = ratio_quotient(config)
    problem = _ratio_problem(q, opts.softmax_temperature)
    starts = _starts(q.n, opts.restarts, opts, _key, warm=u0)
    return _multistart(problem, starts, opts, opts.max_iters, 1e-10, _key, workers=opts.workers)


def _quick_min_ratio(q, opts: SearchOptions, warm, key):
    """Cheap inner solve used at every annealing step."""
    problem = _ratio_problem(q, opts.softmax_temperature)
    starts = _starts(q.n, opts.inner_restarts, opts, key, warm=warm)
    return _multistart(problem, starts, opts, opts.inner_iters, 1e-7, key)


# -- brute-force oracle ----------------------------------------------------


def quasi_random_sphere(n: int, samples: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points pushed through the normal quantile, then normalised."""
    h = qmc.Halton(d=n, scramble=True, rng=seed).random(samples)
    g = stats.norm.ppf(np.clip(h, 1e-15, 1.0 - 1e-15))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def brute_force_minimize(values, scalar, n: int, samples: int, polish: int = 10, seed: int = 0, chunk: int = 1 << 16):
    """Sample ``samples`` sphere points, then Nelder-Mead from the best ``polish``.

    ``values`` evaluates a batch of rows, ``scalar`` a single vector; the
    objective must be invariant under positive rescaling.
    """
    best_vals = np.empty(0)
    best_pts = np.empty((0, n))
    done = 0
    gen = qmc.Halton(d=n, scramble=True, rng=seed)
    while done < samples:
        k = min(chunk, samples - done)
        g = stats.norm.ppf(np.clip(gen.random(k), 1e-15, 1.0 - 1e-15))
        pts = g / np.linalg.norm(g, axis=1, keepdims=True)
        vals = values(pts)
        best_vals = np.concatenate([best_vals, vals])
        best_pts = np.vstack([best_pts, pts])
        keep = np.argsort(best_vals, kind="stable")[: max(polish, 1)]
        best_vals, best_pts = best_vals[keep], best_pts[keep]
        done += k
    z_best, f_best = best_pts[0], float(scalar(best_pts[0]))
    for z0 in best_pts[:polish]:
        res = sciopt.minimize(
            scalar, z0, method="Nelder-Mead", options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": 4000 * n}
        )
        z = _unit(res.x)
        f = float(scalar(z))
        if f < f_best:
            z_best, f_best = z, f
    return z_best, f_best


def brute_force_min_ratio(config: PointConfig, samples: int = 10**6, polish: int = 10, seed: int = 0) -> float:
    """Upper bound on inf_u I1/I2 from quasi-random sampling plus Nelder-Mead polish.

    Independent of the descent machinery; limited to p <= 5.
    """
    if config.p > 5:
        raise TooManyPointsError(f"brute force is limited to p <= 5, got p={config.p}")
    if samples < 1:
        raise InputError("samples must be positive")
    q = ratio_quotient(config)
    return brute_force_minimize(q.values, q.exact_value, q.n, samples, polish=polish, seed=seed)[1]


# -- critical residual -----------------------------------------------------


@dataclass(frozen=True)
class _CriticalObjective:
    """|A u|^2 + sum_i |u_i sum_j c_ij u_j|^2 over weight vectors u."""

    a: np.ndarray
    c: np.ndarray  # (p, p, m)

    def value(self, u) -> float:
        r1 = self.a @ u
        r2 = u[:, None] * np.einsum("ijm,j->im", self.c, u)
        return float(r1 @ r1 + np.sum(r2 * r2))

    def values(self, us) -> np.ndarray:
        r1 = us @ self.a.T
        r2 = us[:, :, None] * np.einsum("ijm,nj->nim", self.c, us)
        return np.einsum("ni,ni->n", r1, r1) + np.einsum("nim,nim->n", r2, r2)

    def value_and_grad(self, u):
        return self.value(u), self.grad(u)

    def grad(self, u) -> np.ndarray:
        r1 = self.a @ u
        g = np.einsum("ijm,j->im", self.c, u)
        h = u[:, None] * g
        out = 2.0 * (self.a.T @ r1)
        out += 2.0 * np.einsum("i,ijm,im->j", u, self.c, h)
        out += 2.0 * np.einsum("im,im->i", g, h)
        return out


def min_critical_residual(config: PointConfig, opts: SearchOptions | None = None):
    """Minimise |r1(u)|^2 + |r2(u)|^2 over unit u; returns (u, value)."""
    opts = opts or SearchOptions()
    obj = _CriticalObjective(interaction_matrix(config), _cubed_differences(config.points, pairwise_distances(config)))
    problem = _SphereProblem(obj.value, obj.value_and_grad, obj.values, config.p)
    starts = _starts(config.p, opts.restarts, opts, ())
    return _multistart(problem, starts, opts, opts.max_iters, 1e-10, (), workers=opts.workers)


def min_augmented_ratio(points, opts: SearchOptions | None = None):
    """Minimise the point-at-infinity quotient over unit (u_1..u_{p-1}, u_tilde).

    Returns ``(z, value)`` where the last entry of ``z`` is the weight carried
    by the point at infinity.
    """
    opts = opts or SearchOptions()
    q = augmented_quotient(points)
    problem = _ratio_problem(q, opts.softmax_temperature)
    starts = _starts(q.n, opts.restarts, opts, ())
    return _multistart(problem, starts, opts, opts.max_iters, 1e-10, (), workers=opts.workers)


# -- outer searches --------------------------------------------------------


def _feasible_normalized(x: np.ndarray, opts: SearchOptions):
    """Normalise, rescale to min distance ``min_separation``; None if infeasible."""
    try:
        cfg = normalize_config(make_config(x))
    except InputError:
        return None
    y = cfg.points * opts.min_separation
    if pairwise_distances(PointConfig(y)).max() > opts.max_diameter:
        return None
    return PointConfig(y)


def _anneal(init, propose, evaluate, opts: SearchOptions, rng):
    """Generic annealing loop over states carrying (value, payload).

    ``evaluate(state, payload)`` returns (value, payload); the payload of the
    current state is offered as warm start for the next evaluation.
    """
    state = init
    f, payload = evaluate(state, None, 0)
    best = (f, state, payload)
    trace = [f]
    temp = opts.initial_temperature
    for t in range(1, opts.max_iters + 1):
        cand = propose(state, rng)
        if cand is not None:
            fc, pc = evaluate(cand, payload, t)
            delta = (fc - f) / max(abs(f), 1e-300)
            if delta <= 0 or rng.random() < math.exp(-delta / temp):
                state, f, payload = cand, fc, pc
                if f < best[0]:
                    best = (f, state, payload)
        trace.append(best[0])
        temp *= opts.decay
    return best, trace


def _merge_traces(traces):
    merged = np.min(np.array(traces), axis=0)
    history = [(0, float(merged[0]))]
    for i in range(1, len(merged)):
        if merged[i] < history[-1][1]:
            history.append((i, float(merged[i])))
    return history


def min_ratio_over_configs(p: int, m: int, opts: SearchOptions | None = None) -> SearchReport:
    """Anneal over normalised configurations for the smallest inner minimum of I1/I2.

    ``opts.restarts`` independent chains of ``opts.max_iters`` proposals each;
    a proposal moves one point by a Gaussian step of size ``step_init``
    times the minimum separation.  The best configuration found is
    re-solved with a full multi-start inner minimisation.
    """
    opts = opts or SearchOptions()
    if p < 2:
        raise InputError("p must be at least 2")
    if not 1 <= m <= p - 1:
        raise InvalidDimensionError(f"need 1 <= m <= p-1, got p={p}, m={m}; affine_reduce first")

    def chain(c):
        rng = substream(opts.seed, _CHAIN, c)
        init = None
        for _ in range(10000):
            init = _feasible_normalized(rng.uniform(-1.0, 1.0, size=(p, m)) * opts.max_diameter / 2, opts)
            if init is not None:
                break
        if init is None:
            raise ConvergenceFailure("could not draw a feasible starting configuration")

        def propose(cfg, rng):
            x = cfg.points.copy()
            k = rng.integers(p)
            x[k] += rng.normal(scale=opts.step_init * opts.min_separation, size=m)
            return _feasible_normalized(x, opts)

        def evaluate(cfg, warm, t):
            u, f = _quick_min_ratio(ratio_quotient(cfg), opts, warm, (c, t))
            return f, u

        return _anneal(init, propose, evaluate, opts, rng)

    results = _map_ordered(chain, range(opts.restarts), opts.workers)
    f, c = min((res[0][0], c) for c, res in enumerate(results))
    _, best_cfg, best_u = results[c][0]
    history = _merge_traces([res[1] for res in results])

    u, value = min_ratio_over_U(best_cfg, opts.replace(workers=1), u0=best_u, _key=(opts.restarts, 0))
    if value > f:
        u = best_u
        value = ratio_quotient(best_cfg).exact_value(u)
    if value < history[-1][1]:
        history.append((opts.max_iters + 1, value))
    return SearchReport(
        seed=opts.seed,
        objective_kind="min-ratio",
        best_value=value,
        best_config=best_cfg,
        best_weights=u,
        iterations_used=opts.max_iters * opts.restarts,
        history=history,
        options=report_options(opts),
    )


def _min_chord(y: np.ndarray) -> float:
    d = np.sqrt(np.sum((y[:, None, :] - y[None, :, :]) ** 2, axis=-1))
    d[np.diag_indices(len(y))] = np.inf
    return float(d.min())


def min_sigma_over_configs(p: int, m: int, opts: SearchOptions | None = None) -> SearchReport:
    """Anneal over p points on S^m for the smallest sigma_min of the sphere system."""
    opts = opts or SearchOptions()
    if p < 2 or m < 1:
        raise InvalidDimensionError(f"need p >= 2 and m >= 1, got p={p}, m={m}")

    def feasible(y):
        y = y / np.linalg.norm(y, axis=1, keepdims=True)
        return y if _min_chord(y) >= opts.min_chord else None

    def chain(c):
        rng = substream(opts.seed, _CHAIN, c)
        init = None
        for _ in range(10000):
            init = feasible(rng.standard_normal((p, m + 1)))
            if init is not None:
                break
        if init is None:
            raise InputError(f"cannot place {p} points on S^{m} with min chord {opts.min_chord}")

        def propose(y, rng):
            y = y.copy()
            k = rng.integers(p)
            y[k] += rng.normal(scale=opts.step_init * 0.5, size=m + 1)
            return feasible(y)

        def evaluate(y, warm, t):
            rep = spectrum(sphere_system(SphereConfig(y)))
            return rep.sigma_min, rep.null_candidate

        return _anneal(init, propose, evaluate, opts, rng)

    results = _map_ordered(chain, range(opts.restarts), opts.workers)
    f, c = min((res[0][0], c) for c, res in enumerate(results))
    _, best_y, best_v = results[c][0]
    cfg = make_sphere_config(best_y)
    rep = spectrum(sphere_system(cfg))
    return SearchReport(
        seed=opts.seed,
        objective_kind="min-sigma",
        best_value=rep.sigma_min,
        best_config=cfg,
        best_weights=rep.null_candidate,
        iterations_used=opts.max_iters * opts.restarts,
        history=_merge_traces([res[1] for res in results]),
        options=report_options(opts),
    )


# -- far-cluster stress ----------------------------------------------------


def far_cluster_config(p: int, m: int, separation: float, seed: int = 0) -> PointConfig:
    """p-2 points drawn uniformly in the unit ball plus two receding points.

    The cluster is fixed by ``seed`` (pairwise distances at least 0.5); the far
    points sit at ``separation * e_1`` and ``(separation + 1) * e_1``.
    """
    rng = substream(seed, _CLUSTER)
    s = p - 2
    for _ in range(100000):
        g = rng.standard_normal((s, m))
        r = rng.random(s) ** (1.0 / m)
        cluster = g / np.linalg.norm(g, axis=1, keepdims=True) * r[:, None]
        if s < 2 or pairwise_distances(PointConfig(cluster)).copy()[~np.eye(s, dtype=bool)].min() >= 0.5:
            break
    far = np.zeros((2, m))
    far[:, 0] = [separation, separation + 1.0]
    return make_config(np.vstack([cluster, far]))


def cluster_far_stress(p: int, m: int, separations, opts: SearchOptions | None = None):
    """Inner minimum of I1/I2 as two points recede from a fixed cluster.

    Returns a list of (separation, estimate) rows; every estimate must be
    positive.
    """
    opts = opts or SearchOptions()
    if p < 4:
        raise InputError("stress scenario needs p >= 4")
    seps = [float(s) for s in separations]
    if not seps:
        raise InputError("no separations given")
    if any(s < 2 for s in seps):
        raise InputError("every separation must be at least 2")
    if any(b <= a for a, b in zip(seps, seps[1:])):
        raise InputError("separations must be strictly increasing")
    rows = []
    for sep in seps:
        cfg = far_cluster_config(p, m, sep, seed=opts.seed)
        _, est = min_ratio_over_U(cfg, opts)
        if not est > 0:
            raise NumericalError(f"non-positive estimate {est!r} at separation {sep!r}")
        rows.append((sep, est))
    return rows


def stress_csv(rows) -> str:
    lines = ["separation,min_ratio_estimate"]
    lines += [f"{serialize.format_float(s)},{serialize.format_float(v)}" for s, v in rows]
    return "\n".join(lines) + "\n"
