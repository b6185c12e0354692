"""Stochastic nested linearized ADMM.

Each iteration: nested-gradient estimate ``v``; Gauss-Seidel sweep of
proximal y-updates; one preconditioned x-step; dual step
``z <- z - rho (A x + sum B_j y_j - c)``.  The linearization metrics
``G = r I - rho eta A^T A`` and ``H_j = tau_j I - rho B_j^T B_j`` are never
formed: with them each block subproblem has a closed-form solution.
"""
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import (
    StationarityTriple,
    TraceRecord,
    augmented_lagrangian,
    descent_constants,
    potential,
    potential_weights,
    stationarity,
    value_and_gradient,
)
from .estimators import (
    ESTIMATORS,
    MINIBATCH,
    SPIDER,
    BatchPlan,
    minibatch_step,
    spider_recurse,
    spider_refresh,
    variance_bound_spider,
)
from .exceptions import ConfigError, EmptyRun, InvalidTolerance, NumericalFailure
from .problem import FINITE_SUM, MODES, ONLINE
from .prox import prox
from .validation import check_random_state

RHO_CONSTANT = math.sqrt(98.0)
SURROGATE_SAMPLES = 10_000
# relative slack when checking r and tau against their lower bounds
_BOUND_RTOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """All scalars a run needs.

    ``LF`` is carried along because the potential and the diagnostic
    constants depend on it; ``epsilon`` records the calibration target.
    """

    rho: float
    eta: float
    r: float
    tau: tuple
    plan: BatchPlan
    K: int
    estimator: str = SPIDER
    mode: str = FINITE_SUM
    seed: int = 0
    alpha: float = 0.5
    LF: float = 1.0
    epsilon: float = None

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}; expected one of {ESTIMATORS}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        for name in ("rho", "eta", "r", "LF"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.K) != self.K or self.K < 0:
            raise ConfigError(f"K must be a nonnegative integer, got {self.K}")

    def validate(self, problem):
        """Certify ``G >= I`` and ``H_j >= I`` through the spectral bounds of ``problem``."""
        sp = problem.spectral
        check_r(self, sp)
        if len(self.tau) != problem.m:
            raise ConfigError(f"need {problem.m} tau values, got {len(self.tau)}")
        for j in range(problem.m):
            check_tau(self, sp, j)
        if self.mode == FINITE_SUM and problem.oracle.mode != FINITE_SUM:
            raise ConfigError("finite-sum mode needs a finite-sum oracle")
        return self


def check_r(config, sp):
    bound = config.rho * config.eta * sp.sigma_max_A + 1
    if config.r < bound * (1 - _BOUND_RTOL):
        raise ConfigError(f"r={config.r} violates r >= rho*eta*sigma_max_A + 1 = {bound}")


def check_tau(config, sp, j):
    bound = config.rho * sp.sigma_max_B[j] + 1
    if config.tau[j] < bound * (1 - _BOUND_RTOL):
        raise ConfigError(f"tau[{j}]={config.tau[j]} violates tau >= rho*sigma_max_B + 1 = {bound}")


@dataclass
class IterateState:
    x: np.ndarray
    y: list
    z: np.ndarray
    x_prev: np.ndarray
    k: int = 0

    def copy(self):
        return IterateState(self.x.copy(), [yj.copy() for yj in self.y], self.z.copy(), self.x_prev.copy(), self.k)


@dataclass
class SolveReport:
    """Result of :func:`run`.

    ``x, y, z`` is the output triple, iterate ``output_index`` drawn
    uniformly from ``1..K``.  ``history`` holds every iterate ``0..K`` and the
    estimates ``v^0..v^{K-1}``.
    """

    x: np.ndarray
    y: list
    z: np.ndarray
    output_index: int
    trace: list
    total_samples: int
    wall_time: float
    config: SolverConfig
    Lambda: float = None
    gamma: float = None
    history: dict = field(default=None, repr=False)

    def samples_to_eps(self, eps):
        """Samples used when ``sqrt(stat_total)`` first drops to ``eps``; ``None`` if never.

        The starting point ``k = 0`` does not count.
        """
        for rec in self.trace[1:]:
            if rec.stationarity.total ** 0.5 <= eps:
                return rec.samples_used
        return None

    def min_stationarity(self, upto=None):
        recs = self.trace[1 : None if upto is None else upto + 1]
        return min(r.stationarity.total for r in recs)


def _ceil(x):
    return max(1, math.ceil(x - 1e-9))


def _step_sizes(p, q):
    LF2 = p.LF**2
    return (
        _ceil(27 * p.ell1**4 * q / LF2),
        _ceil(3 * p.ell2**2 * p.L1**2 * q / LF2),
        _ceil(27 * p.ell1**4 * p.L2**2 * q / LF2),
    )


def _equal_allocation(coefs, target):
    # sum of coef/size = target with every term equal to target / 3
    return tuple(_ceil(3 * c / target) if c > 0 else 1 for c in coefs)


def calibrate(
    problem,
    profile=None,
    mode=FINITE_SUM,
    alpha=0.5,
    eps=1e-2,
    q_override=None,
    estimator=SPIDER,
    K=1000,
    seed=0,
):
    """Step sizes, penalty, linearization scalars and batch plan.

    ``rho = sqrt(98) L_F kappa_G / (sigma_min_A alpha)``; ``eta`` is resolved
    in two passes (provisional ``sigma_min(G) = 1``, then ``r`` at its lower
    bound, then ``eta = 2 alpha sigma_min(G) / (3 L_F)``); ``r`` and ``tau_j``
    sit exactly at their lower bounds.
    """
    if not eps > 0:
        raise InvalidTolerance(f"eps must be positive, got {eps}")
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if estimator not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {estimator!r}")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    p = profile if profile is not None else problem.profile
    if p is None:
        raise ConfigError("calibration needs a SmoothnessProfile")
    sp = problem.spectral
    LF = p.LF

    rho = RHO_CONSTANT * LF * sp.kappa_G / (sp.sigma_min_A * alpha)
    eta0 = 2 * alpha / (3 * LF)
    r = rho * eta0 * sp.sigma_max_A + 1
    g_min = r - rho * eta0 * sp.sigma_max_A
    eta = 2 * alpha * g_min / (3 * LF)
    # r depends on eta; the lower bound is restored with the final step size
    r = rho * eta * sp.sigma_max_A + 1
    tau = tuple(rho * b + 1 for b in sp.sigma_max_B)

    oracle = problem.oracle
    if estimator == MINIBATCH:
        coefs = (
            27 * p.ell1**2 * p.L2**2 * p.delta**2,
            3 * p.ell2**2 * p.sigma1**2,
            27 * p.ell1**2 * p.sigma2**2,
        )
        s, b1, b2 = _equal_allocation(coefs, eps**2 / 3)
        plan = BatchPlan(s=s, b1=b1, b2=b2, S=1, B1=1, B2=1, q=1)
    elif mode == FINITE_SUM:
        if oracle.mode != FINITE_SUM:
            raise ConfigError("finite-sum calibration needs a finite-sum oracle")
        q = q_override or _ceil(math.sqrt(2 * oracle.n1 + oracle.n2))
        s, b1, b2 = _step_sizes(p, q)
        plan = BatchPlan(s=s, b1=b1, b2=b2, S=oracle.n1, B1=oracle.n1, B2=oracle.n2, q=q)
    else:
        q = q_override or _ceil(1 / eps)
        s, b1, b2 = _step_sizes(p, q)
        coefs = (27 * p.ell1**2 * p.delta**2, 3 * p.ell2**2 * p.sigma1**2, 27 * p.ell1**2 * p.sigma2**2)
        S, B1, B2 = _equal_allocation(coefs, eps**2 / 3)
        plan = BatchPlan(s=s, b1=b1, b2=b2, S=S, B1=B1, B2=B2, q=q)
    return SolverConfig(
        rho=rho,
        eta=eta,
        r=r,
        tau=tau,
        plan=plan,
        K=K,
        estimator=estimator,
        mode=mode,
        seed=seed,
        alpha=alpha,
        LF=LF,
        epsilon=eps,
    )


def update_y_block(problem, config, state, j, z_current):
    """Proximal update of block ``j``; blocks ``< j`` in ``state.y`` are already new."""
    check_tau(config, problem.spectral, j)
    res = problem.residual(state.x, state.y) - z_current / config.rho
    tau = config.tau[j]
    w = state.y[j] - (config.rho / tau) * (problem.B[j].T @ res)
    return prox(problem.regs[j], 1.0 / tau, w)


def update_x(problem, config, state, v, y_new):
    """Exact minimizer of the linearized x-subproblem (uses ``G/eta + rho A^T A = (r/eta) I``)."""
    check_r(config, problem.spectral)
    A = problem.A
    direction = v - A.T @ state.z + config.rho * (A.T @ problem.residual(state.x, y_new))
    return state.x - (config.eta / config.r) * direction


def update_z(problem, config, x_new, y_new, z):
    return z - config.rho * problem.residual(x_new, y_new)


def _estimate(problem, config, plan, k, x, x_prev, est, rng):
    oracle = problem.oracle
    if config.estimator == MINIBATCH:
        return minibatch_step(oracle, x, plan, rng, prev=est)
    if k % plan.q == 0:
        return spider_refresh(oracle, x, plan, config.mode, rng, prev=est)
    return spider_recurse(oracle, est, x, x_prev, plan, rng)


def run(problem, config, callbacks=None, x0=None, keep_history=True, record_every=1, stop_eps=None):
    """Execute ``config.K`` iterations of the stochastic nested ADMM.

    Parameters
    ----------
    callbacks : iterable of callables, optional
        Each is called as ``cb(k, state, record)`` after iteration ``k``; it
        receives copies and cannot alter the run.
    x0 : array, optional
        Starting point (default zero); ``y`` and ``z`` start at zero.
    keep_history : bool
        Keep all iterates and estimates in ``report.history``.
    record_every : int
        Stationarity and potential are computed every ``record_every``
        iterations (and at ``K``); cheaper for long runs.
    stop_eps : float, optional
        Stop once a recorded ``sqrt(stat_total)`` is ``<= stop_eps``.

    Raises
    ------
    EmptyRun
        If ``config.K == 0``.
    NumericalFailure
        If an iterate becomes non-finite.
    """
    if config.K == 0:
        raise EmptyRun("iteration budget K is 0")
    config.validate(problem)
    t0 = time.perf_counter()
    rng = check_random_state(config.seed)
    plan = config.plan.for_oracle(problem.oracle) if config.mode == FINITE_SUM else config.plan
    callbacks = list(callbacks or ())

    grad_oracle = problem.oracle
    if problem.oracle.mode == ONLINE:
        grad_oracle = problem.oracle.surrogate(SURROGATE_SAMPLES, np.random.default_rng([config.seed, 1]))

    c2 = variance_bound_spider(problem.profile, plan, config.mode)[1] if problem.profile is not None else 0.0
    weights = potential_weights(problem, config, c2)
    lam, gamma = descent_constants(problem, config, c2)

    x, y, z = problem.zero_point()
    if x0 is not None:
        x = np.array(x0, dtype=float)
    state = IterateState(x, y, z, x.copy(), 0)
    xs = [x.copy()]
    ys, zs, vs = [[yj.copy() for yj in y]], [z.copy()], []

    def record(k, samples, dz):
        Fv, g = value_and_gradient(grad_oracle, state.x)
        stat = stationarity(problem, state.x, state.y, state.z, grad=g)
        if grad_oracle is not problem.oracle:
            stat = StationarityTriple(stat.feas, stat.grad, stat.subdiff, True)
        lag = augmented_lagrangian(problem, state.x, state.y, state.z, config.rho, F_value=Fv)
        pot = potential(problem, xs, config, k, lag, weights)
        res = float(np.linalg.norm(problem.residual(state.x, state.y)))
        return TraceRecord(k, samples, stat, lag, pot, dz, res)

    trace = [record(0, 0, 0.0)]
    est = None
    for k in range(config.K):
        est = _estimate(problem, config, plan, k, state.x, state.x_prev, est, rng)
        v = est.v
        for j in range(problem.m):
            state.y[j] = update_y_block(problem, config, state, j, state.z)
        x_new = update_x(problem, config, state, v, state.y)
        z_new = update_z(problem, config, x_new, state.y, state.z)
        dz = float(np.linalg.norm(z_new - state.z))
        state.x_prev, state.x, state.z, state.k = state.x, x_new, z_new, k + 1
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(z_new))):
            raise NumericalFailure(f"non-finite iterate at k={k + 1}", iterations=k + 1)
        xs.append(x_new.copy())
        if keep_history:
            ys.append([yj.copy() for yj in state.y])
            zs.append(z_new.copy())
            vs.append(v.copy())
        if (k + 1) % record_every == 0 or k + 1 == config.K:
            rec = record(k + 1, est.samples_used, dz)
            trace.append(rec)
            for cb in callbacks:
                cb(k + 1, state.copy(), rec)
            if stop_eps is not None and rec.stationarity.total <= stop_eps**2:
                break

    n_done = state.k
    out = int(np.random.default_rng([config.seed, 2]).integers(1, n_done + 1))
    if keep_history:
        x_out, y_out, z_out = xs[out], ys[out], zs[out]
    else:
        # without history only the last iterate is available
        out = n_done
        x_out, y_out, z_out = state.x, state.y, state.z
    history = {"x": xs, "y": ys, "z": zs, "v": vs} if keep_history else None
    return SolveReport(
        x=x_out.copy(),
        y=[yj.copy() for yj in y_out],
        z=z_out.copy(),
        output_index=out,
        trace=trace,
        total_samples=est.samples_used,
        wall_time=time.perf_counter() - t0,
        config=config,
        Lambda=lam,
        gamma=gamma,
        history=history,
    )


def with_overrides(config, **overrides):
    """Copy of ``config`` with the given fields replaced (``None`` values ignored)."""
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
