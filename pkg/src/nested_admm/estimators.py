"""Nested gradient estimators: plain mini-batch and SPIDER/SARAH recursion.

Both build ``v = Z1^T Z2`` from three estimates::

    Y  ~ f_1(x)        (inner value)
    Z1 ~ f_1'(x)       (inner Jacobian, shape (l, d))
    Z2 ~ f_2'(Y)       (outer gradient)

Sampling is uniform with replacement.  A SPIDER correction evaluates the
same batch at both points of the step, and the outer correction is taken
between consecutive inner estimates ``Y`` (the outer map lives on the inner
range, not on ``x``).
"""
import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import EpochBoundary, UnsupportedMode
from .problem import (
    FINITE_SUM,
    MODES,
    eval_f1,
    eval_grad_f2,
    eval_jac_f1,
    exact_nested_gradient,
    full_batch,
    sample_batch,
)

MINIBATCH = "minibatch"
SPIDER = "spider"
ESTIMATORS = (MINIBATCH, SPIDER)


@dataclass(frozen=True)
class BatchPlan:
    """Batch sizes and epoch length.

    ``S, B1, B2`` are the refresh sizes of SPIDER; ``s, b1, b2`` the per-step
    sizes (mini-batch steps or SPIDER corrections); ``q`` the epoch length.
    """

    s: int = 1
    b1: int = 1
    b2: int = 1
    S: int = 1
    B1: int = 1
    B2: int = 1
    q: int = 1

    def __post_init__(self):
        for name in ("s", "b1", "b2", "S", "B1", "B2", "q"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ValueError(f"batch plan field {name} must be a positive integer, got {val}")
            object.__setattr__(self, name, int(val))

    @property
    def step_samples(self):
        return self.s + self.b1 + self.b2

    @property
    def refresh_samples(self):
        return self.S + self.B1 + self.B2

    def for_oracle(self, oracle):
        """Plan with finite-sum refresh sizes pinned to the population sizes."""
        if oracle.mode != FINITE_SUM:
            return self
        return replace(self, S=oracle.n1, B1=oracle.n1, B2=oracle.n2)


@dataclass
class EstimatorState:
    """Current nested-gradient estimate.

    ``v`` is always ``Z1.T @ Z2``; ``samples_used`` counts component draws
    since the estimator was started.
    """

    Y: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray
    v: np.ndarray = field(init=False)
    k_in_epoch: int = 0
    samples_used: int = 0

    def __post_init__(self):
        self.v = self.Z1.T @ self.Z2


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


def minibatch_step(oracle, x, plan, rng, prev=None):
    """Independent mini-batch estimate at ``x`` with sizes ``s, b1, b2``."""
    S = sample_batch(oracle, 1, plan.s, rng)
    B1 = sample_batch(oracle, 1, plan.b1, rng)
    B2 = sample_batch(oracle, 2, plan.b2, rng)
    Y = eval_f1(oracle, S, x)
    Z1 = eval_jac_f1(oracle, B1, x)
    Z2 = eval_grad_f2(oracle, B2, Y)
    used = (prev.samples_used if prev is not None else 0) + plan.step_samples
    return EstimatorState(Y, Z1, Z2, k_in_epoch=0, samples_used=used)


def spider_refresh(oracle, x, plan, mode, rng, prev=None):
    """Start a SPIDER epoch at ``x``.

    In finite-sum mode all three quantities use the full component sets, so
    ``v`` equals the exact gradient.  In online mode batches of sizes
    ``S, B1, B2`` are drawn.
    """
    _check_mode(mode)
    if mode == FINITE_SUM:
        if oracle.mode != FINITE_SUM:
            raise UnsupportedMode("finite-sum refresh needs a finite-sum oracle")
        S, B1, B2 = full_batch(oracle, 1), full_batch(oracle, 1), full_batch(oracle, 2)
    else:
        S = sample_batch(oracle, 1, plan.S, rng)
        B1 = sample_batch(oracle, 1, plan.B1, rng)
        B2 = sample_batch(oracle, 2, plan.B2, rng)
    Y = eval_f1(oracle, S, x)
    Z1 = eval_jac_f1(oracle, B1, x)
    Z2 = eval_grad_f2(oracle, B2, Y)
    used = (prev.samples_used if prev is not None else 0) + S.size + B1.size + B2.size
    return EstimatorState(Y, Z1, Z2, k_in_epoch=0, samples_used=used)


def spider_recurse(oracle, prev, x_new, x_prev, plan, rng):
    """One SPIDER correction from ``x_prev`` to ``x_new``.

    Raises
    ------
    EpochBoundary
        If the epoch of length ``plan.q`` is exhausted; refresh instead.
    """
    if prev.k_in_epoch >= plan.q - 1:
        raise EpochBoundary(f"epoch of length {plan.q} exhausted; a refresh is due")
    S = sample_batch(oracle, 1, plan.s, rng)
    B1 = sample_batch(oracle, 1, plan.b1, rng)
    B2 = sample_batch(oracle, 2, plan.b2, rng)
    Y = prev.Y + (eval_f1(oracle, S, x_new) - eval_f1(oracle, S, x_prev))
    Z1 = prev.Z1 + (eval_jac_f1(oracle, B1, x_new) - eval_jac_f1(oracle, B1, x_prev))
    Z2 = prev.Z2 + (eval_grad_f2(oracle, B2, Y) - eval_grad_f2(oracle, B2, prev.Y))
    return EstimatorState(
        Y, Z1, Z2, k_in_epoch=prev.k_in_epoch + 1, samples_used=prev.samples_used + plan.step_samples
    )


def variance_bound_minibatch(profile, plan):
    """Mean-squared-error bound of the mini-batch nested gradient."""
    p = profile
    return (
        27 * p.ell1**2 * p.sigma2**2 / plan.b2
        + 27 * p.ell1**2 * p.L2**2 * p.delta**2 / plan.s
        + 3 * p.ell2**2 * p.sigma1**2 / plan.b1
    )


def variance_bound_spider(profile, plan, mode):
    """Constants ``(C1, C2)`` of the SPIDER bound ``C1 + C2 * sum ||dx||^2``.

    ``C1`` is the refresh error and vanishes in finite-sum mode.
    """
    _check_mode(mode)
    p = profile
    if mode == FINITE_SUM:
        c1 = 0.0
    else:
        c1 = (
            27 * p.ell1**2 * p.sigma2**2 / plan.B2
            + 27 * p.ell1**2 * p.delta**2 / plan.S
            + 3 * p.ell2**2 * p.sigma1**2 / plan.B1
        )
    c2 = 27 * p.ell1**4 * p.L2**2 / plan.b2 + 27 * p.ell1**4 / plan.s + 3 * p.ell2**2 * p.L1**2 / plan.b1
    return c1, c2


def estimator_errors(oracle, x_path, estimator_kind, plan, trials, seed, mode=FINITE_SUM, exact_gradient=None):
    """Squared errors ``||v_k - F'(x_k)||^2``, shape ``(trials, len(x_path))``.

    SPIDER refreshes at the first path point and recurses along the rest, so
    the path must fit in one epoch.  Trial ``t`` uses the generator seeded
    with ``(seed, t)``.  ``exact_gradient(x)`` supplies ``F'`` when the
    oracle is online; finite-sum oracles use exact means.
    """
    if exact_gradient is None:
        if oracle.mode != FINITE_SUM:
            raise UnsupportedMode("online oracles need an exact_gradient callable")
        exact_gradient = lambda x: exact_nested_gradient(oracle, x)  # noqa: E731
    if estimator_kind not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator_kind!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    path = [np.asarray(x, dtype=float) for x in x_path]
    exact = [exact_gradient(x) for x in path]
    out = np.empty((trials, len(path)))
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        state = None
        for k, x in enumerate(path):
            if estimator_kind == MINIBATCH:
                state = minibatch_step(oracle, x, plan, rng, prev=state)
            elif k == 0:
                state = spider_refresh(oracle, x, plan, mode, rng)
            else:
                state = spider_recurse(oracle, state, x, path[k - 1], plan, rng)
            diff = state.v - exact[k]
            out[t, k] = diff @ diff
    return out


def empirical_mse(oracle, x_path, estimator_kind, plan, trials, seed, mode=FINITE_SUM, exact_gradient=None):
    """Monte-Carlo mean of ``||v - F'(x)||^2`` at every point of ``x_path``."""
    errors = estimator_errors(oracle, x_path, estimator_kind, plan, trials, seed, mode, exact_gradient)
    return errors.mean(axis=0).tolist()


def write_error_rows(errors, path):
    """Write per-trial squared errors as CSV rows ``trial, k, mse``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "k", "mse"])
        for t, row in enumerate(np.asarray(errors)):
            for k, val in enumerate(row):
                writer.writerow([t, k, repr(float(val))])
