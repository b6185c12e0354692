"""Stationarity measures, augmented Lagrangian, potential and test oracles."""
from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientHistory, InvalidStep, UnsupportedMode
from .problem import (
    FINITE_SUM,
    composition_value,
    eval_f1,
    eval_f2,
    eval_grad_f2,
    eval_jac_f1,
    full_batch,
)
from .prox import eval_reg, subdiff_distance
from .validation import check_vector, check_y_blocks

TRACE_COLUMNS = (
    "k",
    "samples",
    "primal_residual",
    "stat_x",
    "stat_y",
    "stat_z",
    "stat_total",
    "aug_lagrangian",
    "potential",
)


@dataclass(frozen=True)
class StationarityTriple:
    """Squared stationarity gaps of a primal-dual point.

    ``feas`` is the squared constraint residual, ``grad`` the squared
    x-gradient gap ``||F'(x) - A^T z||^2`` and ``subdiff`` the summed squared
    distances ``dist(B_j^T z, d r_j(y_j))^2``.
    """

    feas: float
    grad: float
    subdiff: float
    surrogate: bool = False

    @property
    def total(self):
        return self.feas + self.grad + self.subdiff


@dataclass(frozen=True)
class TraceRecord:
    k: int
    samples_used: int
    stationarity: StationarityTriple
    aug_lag: float
    potential: float
    dual_step_norm: float
    primal_residual: float

    def row(self):
        s = self.stationarity
        return (
            self.k,
            self.samples_used,
            self.primal_residual,
            s.grad,
            s.subdiff,
            s.feas,
            s.total,
            self.aug_lag,
            self.potential,
        )


def _gradient_oracle(problem, gradient_oracle):
    oracle = gradient_oracle if gradient_oracle is not None else problem.oracle
    if oracle.mode != FINITE_SUM:
        raise UnsupportedMode("exact F' does not exist online; pass a finite-sum surrogate oracle")
    return oracle


def value_and_gradient(oracle, x):
    """``(F(x), F'(x))`` with exact means, sharing the inner pass."""
    all1, all2 = full_batch(oracle, 1), full_batch(oracle, 2)
    w = eval_f1(oracle, all1, x)
    jac = eval_jac_f1(oracle, all1, x)
    return eval_f2(oracle, all2, w), jac.T @ eval_grad_f2(oracle, all2, w)


def stationarity(problem, x, y, z, gradient_oracle=None, grad=None):
    """Squared gaps of the three stationarity conditions at ``(x, y, z)``.

    ``gradient_oracle`` replaces the problem oracle for ``F'`` (used with a
    large-sample surrogate in online mode, and flagged as such).  A
    precomputed ``grad`` skips the gradient evaluation.
    """
    x = check_vector(x, size=problem.dim_x, name="x")
    y = check_y_blocks(y, problem.block_dims)
    z = check_vector(z, size=problem.dim_c, name="z")
    if grad is None:
        oracle = _gradient_oracle(problem, gradient_oracle)
        grad = value_and_gradient(oracle, x)[1]
    r = problem.residual(x, y)
    gx = grad - problem.A.T @ z
    sub = 0.0
    for reg, Bj, yj in zip(problem.regs, problem.B, y):
        sub += subdiff_distance(reg, yj, Bj.T @ z) ** 2
    surrogate = gradient_oracle is not None and gradient_oracle is not problem.oracle
    return StationarityTriple(float(r @ r), float(gx @ gx), float(sub), surrogate)


def lagrangian_subgrad_dist(problem, x, y, z, gradient_oracle=None):
    """Distance from 0 to the subdifferential of the plain Lagrangian."""
    return stationarity(problem, x, y, z, gradient_oracle).total ** 0.5


def augmented_lagrangian(problem, x, y, z, rho, F_value=None):
    """``F(x) + sum r_j(y_j) - <z, res> + rho/2 ||res||^2``."""
    x = check_vector(x, size=problem.dim_x, name="x")
    y = check_y_blocks(y, problem.block_dims)
    z = check_vector(z, size=problem.dim_c, name="z")
    if F_value is None:
        F_value = composition_value(problem, x)
    r = problem.residual(x, y)
    regs = sum(eval_reg(reg, yj) for reg, yj in zip(problem.regs, y))
    return float(F_value + regs - z @ r + 0.5 * rho * (r @ r))


def finite_diff_gradient(problem, x, h=1e-5):
    """Central differences of ``F`` along every coordinate."""
    if not h > 0:
        raise InvalidStep(f"finite-difference step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (composition_value(problem, x + e) - composition_value(problem, x - e)) / (2 * h)
    return g


@dataclass(frozen=True)
class PotentialWeights:
    """Coefficients of the potential function.

    ``step`` multiplies ``||x^k - x^{k-1}||^2``; ``epoch`` multiplies the
    sum of squared steps since the last SPIDER refresh (zero for the
    mini-batch estimator).
    """

    step: float
    epoch: float
    q: int


def potential_weights(problem, config, c2=0.0):
    sp = problem.spectral
    LF = config.LF
    g_max = config.r - config.rho * config.eta * sp.sigma_min_A
    step = 3 * g_max**2 / (config.rho * sp.sigma_min_A * config.eta**2) + 9 * LF**2 / (config.rho * sp.sigma_min_A)
    epoch = 2 * c2 / (config.rho * sp.sigma_min_A) if config.estimator == "spider" else 0.0
    return PotentialWeights(step, epoch, config.plan.q)


def epoch_start(k, q):
    """First iteration of the epoch that contains ``k``."""
    return q * (k // q)


def potential(problem, x_history, config, k, aug_lag, weights):
    """Potential ``R_k`` from the iterate history ``x_history[0..k]``.

    ``R_k = L_rho(k) + w.step ||x^k - x^{k-1}||^2
    + w.epoch * sum_{i=e}^{k-1} ||x^{i+1} - x^i||^2`` where ``e`` is the
    first iteration of the current epoch, and ``x^{-1} = x^0``.
    """
    if len(x_history) < k + 1:
        raise InsufficientHistory(f"potential at k={k} needs {k + 1} iterates, got {len(x_history)}")
    if k == 0:
        return aug_lag
    dx = x_history[k] - x_history[k - 1]
    value = aug_lag + weights.step * float(dx @ dx)
    if weights.epoch:
        e = epoch_start(k, weights.q)
        for i in range(e, k):
            d = x_history[i + 1] - x_history[i]
            value += weights.epoch * float(d @ d)
    return value


def descent_constants(problem, config, c2=0.0):
    """Diagnostic constants ``(Lambda, gamma)``; logged, never used to gate a run."""
    sp = problem.spectral
    LF, rho, eta = config.LF, config.rho, config.eta
    g_min = config.r - rho * eta * sp.sigma_max_A
    g_max = config.r - rho * eta * sp.sigma_min_A
    lam = (
        g_min / eta
        + rho * sp.sigma_min_A / 2
        - LF
        - 6 * g_max**2 / (rho * sp.sigma_min_A * eta**2)
        - 9 * LF**2 / (rho * sp.sigma_min_A)
        - 2 * c2 / (rho * sp.sigma_min_A)
    )
    h_min = min(t - rho * b for t, b in zip(config.tau, sp.sigma_max_B))
    return lam, min(h_min, lam)


def dual_bound_rhs(problem, config, err_k, err_prev, dx_next, dx_cur):
    """Right-hand side of the dual-step bound assembled from realised quantities.

    ``err_k`` and ``err_prev`` are the squared estimator errors
    ``||v - F'(x)||^2`` at iterations ``k`` and ``k-1``; ``dx_next`` and
    ``dx_cur`` are ``||x^{k+1}-x^k||^2`` and ``||x^k-x^{k-1}||^2``.
    """
    sp = problem.spectral
    g_max = config.r - config.rho * config.eta * sp.sigma_min_A
    s = sp.sigma_min_A
    dv = 3 * err_k + 3 * config.LF**2 * dx_cur + 3 * err_prev
    return 3 * dv / s + 3 * g_max**2 / (s * config.eta**2) * (dx_next + dx_cur)
