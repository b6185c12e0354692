"""Linearly constrained two-level stochastic composition problems.

The model is::

    min_{x, y_1..y_m}  F(x) + sum_j r_j(y_j)
    s.t.               A x + sum_j B_j y_j = c

with ``F(x) = E_{xi2} f_{2,xi2}( E_{xi1} f_{1,xi1}(x) )``.  Component maps
are reached through a :class:`~nested_admm.oracles.CompositionOracle`; this
module holds the problem container, the batch-mean evaluators, the exact
chain-rule gradient and the spectral quantities of the coupling matrices.
"""
from dataclasses import dataclass, field, fields
from functools import cached_property

import numpy as np

from .exceptions import (
    DimensionError,
    EmptyBatch,
    InsufficientProbes,
    InvalidMatrix,
    NumericalFailure,
    UnsupportedMode,
)
from .prox import Regularizer, eval_reg
from .validation import check_matrix, check_vector

FINITE_SUM = "finite-sum"
ONLINE = "online"
MODES = (FINITE_SUM, ONLINE)


@dataclass(frozen=True)
class SmoothnessProfile:
    """Regularity constants of the component maps.

    Attributes
    ----------
    ell1, ell2 : float
        Lipschitz constants of ``f_1`` and ``f_2`` components (``ell2`` also
        bounds the outer gradient norm).
    L1, L2 : float
        Lipschitz constants of the component Jacobians / gradients.
    LF : float
        Smoothness constant of ``F``.
    delta : float
        Bound on the standard deviation of inner function values.
    sigma1, sigma2 : float
        Bounds on the standard deviation of the inner Jacobian (Frobenius)
        and of the outer gradient.
    """

    ell1: float
    ell2: float
    L1: float
    L2: float
    LF: float
    delta: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        for f in fields(self):
            val = float(getattr(self, f.name))
            if not np.isfinite(val) or val < 0:
                raise ValueError(f"profile constant {f.name} must be finite and >= 0, got {val}")
            object.__setattr__(self, f.name, val)
        # these three are divided by during calibration
        for name in ("ell1", "ell2", "LF"):
            if getattr(self, name) <= 0:
                raise ValueError(f"profile constant {name} must be > 0")

    def scaled(self, factor):
        return SmoothnessProfile(**{f.name: factor * getattr(self, f.name) for f in fields(self)})

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class SpectralSummary:
    """Extreme eigenvalues of ``A^T A`` and ``B_j^T B_j``."""

    sigma_min_A: float
    sigma_max_A: float
    sigma_max_B: tuple
    kappa_G: float


def _power_iteration(apply, n, tol, max_iter, scale):
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    mu = 0.0
    for it in range(1, max_iter + 1):
        w = apply(v)
        mu = float(v @ w)
        if np.linalg.norm(w - mu * v) <= tol * scale:
            return mu, it
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, it
        v = w / nrm
    raise NumericalFailure(f"power iteration did not converge in {max_iter} iterations", iterations=max_iter)


def spectral_bounds(M, tol=1e-10, max_iter=10_000):
    """Smallest and largest eigenvalue of ``M^T M`` by power iteration.

    The largest eigenvalue comes from plain power iteration; the smallest
    from power iteration on the shifted matrix ``sigma_max I - M^T M``.
    Iteration stops once the eigen-residual is below ``tol * sigma_max``,
    which bounds the absolute eigenvalue error by the same amount.

    Returns
    -------
    (sigma_min, sigma_max) : tuple of float
    """
    M = check_matrix(M, name="M")
    if not np.any(M):
        raise InvalidMatrix("spectral_bounds needs a nonzero matrix")
    n = M.shape[1]
    gram = M.T @ M
    fro = float(np.sum(gram * gram)) ** 0.5
    smax, _ = _power_iteration(lambda v: gram @ v, n, tol, max_iter, fro)
    shifted = smax * np.eye(n) - gram
    if not np.any(np.abs(shifted) > tol * smax):
        return smax, smax
    gap, _ = _power_iteration(lambda v: shifted @ v, n, tol, max_iter, smax)
    smin = max(smax - gap, 0.0)
    return smin, smax


@dataclass(frozen=True)
class Batch:
    """Weighted index multiset; ``weights`` sum to one.

    ``size`` is the nominal number of draws, which can exceed the number of
    distinct indices when sampling with replacement.
    """

    indices: np.ndarray
    weights: np.ndarray
    size: int

    @classmethod
    def from_indices(cls, index_set):
        idx = np.asarray(index_set, dtype=np.int64).reshape(-1)
        if idx.size == 0:
            raise EmptyBatch("index set is empty")
        return cls(idx, np.full(idx.size, 1.0 / idx.size), int(idx.size))

    @classmethod
    def full(cls, n):
        return cls(np.arange(n, dtype=np.int64), np.full(n, 1.0 / n), int(n))


def as_batch(index_set):
    if isinstance(index_set, Batch):
        return index_set
    return Batch.from_indices(index_set)


def full_batch(oracle, level):
    if oracle.mode != FINITE_SUM:
        raise UnsupportedMode("full component sets only exist for finite-sum oracles")
    return Batch.full(oracle.n1 if level == 1 else oracle.n2)


def sample_batch(oracle, level, size, rng):
    """Draw ``size`` component indices of ``level`` uniformly with replacement.

    For finite-sum oracles, batches larger than the population are drawn as
    multinomial counts, which has the same law as explicit draws but costs
    O(N) instead of O(size).
    """
    size = int(size)
    if size < 1:
        raise EmptyBatch(f"batch size must be >= 1, got {size}")
    if oracle.mode == FINITE_SUM:
        n = oracle.n1 if level == 1 else oracle.n2
        if size <= n:
            return Batch(rng.integers(0, n, size=size), np.full(size, 1.0 / size), size)
        counts = rng.multinomial(size, np.full(n, 1.0 / n))
        nz = np.flatnonzero(counts)
        return Batch(nz, counts[nz] / size, size)
    idx = oracle.draw_indices(level, size, rng)
    return Batch(idx, np.full(size, 1.0 / size), size)


def _check_indices(oracle, batch, level):
    if oracle.mode == FINITE_SUM:
        n = oracle.n1 if level == 1 else oracle.n2
        if batch.indices.min() < 0 or batch.indices.max() >= n:
            raise IndexError(f"component index out of range for level {level} (N={n})")


def eval_f1(oracle, index_set, x):
    """Mean of ``f_{1,i}(x)`` over ``index_set``."""
    batch = as_batch(index_set)
    _check_indices(oracle, batch, 1)
    return batch.weights @ oracle.f1_values(batch.indices, x)


def eval_jac_f1(oracle, index_set, x):
    """Mean Jacobian of ``f_{1,i}`` at ``x``, shape ``(l, d)``."""
    batch = as_batch(index_set)
    _check_indices(oracle, batch, 1)
    return np.tensordot(batch.weights, oracle.f1_jacobians(batch.indices, x), axes=1)


def eval_grad_f2(oracle, index_set, w):
    """Mean gradient of ``f_{2,j}`` at ``w``."""
    batch = as_batch(index_set)
    _check_indices(oracle, batch, 2)
    return batch.weights @ oracle.f2_grads(batch.indices, w)


def eval_f2(oracle, index_set, w):
    batch = as_batch(index_set)
    _check_indices(oracle, batch, 2)
    return float(batch.weights @ oracle.f2_values(batch.indices, w))


def _oracle_of(obj):
    return obj.oracle if isinstance(obj, ProblemInstance) else obj


def _require_finite_sum(oracle, what):
    if oracle.mode != FINITE_SUM:
        raise UnsupportedMode(f"{what} needs a finite-sum oracle (got {oracle.mode})")


def composition_value(problem, x):
    """``F(x)`` with exact means over both component sets."""
    oracle = _oracle_of(problem)
    _require_finite_sum(oracle, "composition_value")
    x = check_vector(x, size=oracle.dim_x, name="x")
    w = eval_f1(oracle, full_batch(oracle, 1), x)
    return eval_f2(oracle, full_batch(oracle, 2), w)


def exact_nested_gradient(problem, x):
    """Chain-rule gradient ``f_1'(x)^T f_2'(f_1(x))`` with exact means."""
    oracle = _oracle_of(problem)
    _require_finite_sum(oracle, "exact_nested_gradient")
    x = check_vector(x, size=oracle.dim_x, name="x")
    all1 = full_batch(oracle, 1)
    w = eval_f1(oracle, all1, x)
    jac = eval_jac_f1(oracle, all1, x)
    return jac.T @ eval_grad_f2(oracle, full_batch(oracle, 2), w)


@dataclass
class ProblemInstance:
    """Coupling data, regularizers and composition oracle of one problem.

    Parameters
    ----------
    A : ndarray of shape (p, d)
        Must have full column rank.
    B : list of ndarray, each of shape (p, l_j)
    c : ndarray of shape (p,)
    regs : list of Regularizer, one per block
    oracle : CompositionOracle
    profile : SmoothnessProfile, optional
        Regularity constants; required by calibration.
    generator : dict, optional
        Generator description used to regenerate the oracle on load.
    """

    A: np.ndarray
    B: list
    c: np.ndarray
    regs: list
    oracle: object
    profile: SmoothnessProfile = None
    generator: dict = field(default=None, repr=False)

    def __post_init__(self):
        self.A = check_matrix(self.A, name="A")
        p, d = self.A.shape
        if not self.B:
            raise DimensionError("at least one y block is required")
        self.B = [check_matrix(Bj, shape=(p, None), name=f"B[{j}]") for j, Bj in enumerate(self.B)]
        self.c = check_vector(self.c, size=p, name="c")
        if len(self.regs) != len(self.B):
            raise DimensionError(f"{len(self.B)} blocks but {len(self.regs)} regularizers")
        if not all(isinstance(r, Regularizer) for r in self.regs):
            raise TypeError("regs must be Regularizer instances")
        if self.oracle.dim_x != d:
            raise DimensionError(f"oracle works on x of size {self.oracle.dim_x}, A has {d} columns")

    @property
    def m(self):
        return len(self.B)

    @property
    def dim_x(self):
        return self.A.shape[1]

    @property
    def dim_c(self):
        return self.A.shape[0]

    @property
    def block_dims(self):
        return [Bj.shape[1] for Bj in self.B]

    @cached_property
    def spectral(self):
        smin, smax = spectral_bounds(self.A)
        if smin <= 1e-12 * smax:
            raise InvalidMatrix("A must have full column rank (smallest eigenvalue of A^T A is ~0)")
        bmax = tuple(spectral_bounds(Bj)[1] if np.any(Bj) else 0.0 for Bj in self.B)
        return SpectralSummary(smin, smax, bmax, smax / smin)

    def residual(self, x, y):
        """Constraint residual ``A x + sum_j B_j y_j - c``."""
        r = self.A @ x - self.c
        for Bj, yj in zip(self.B, y):
            r = r + Bj @ yj
        return r

    def zero_point(self):
        return (np.zeros(self.dim_x), [np.zeros(n) for n in self.block_dims], np.zeros(self.dim_c))


def full_objective(problem, x, y_blocks):
    """``F(x) + sum_j r_j(y_j)``; the constraint is not included."""
    if len(y_blocks) != problem.m:
        raise DimensionError(f"expected {problem.m} y blocks, got {len(y_blocks)}")
    total = composition_value(problem, x)
    for j, (reg, yj, nj) in enumerate(zip(problem.regs, y_blocks, problem.block_dims)):
        total += eval_reg(reg, check_vector(yj, size=nj, name=f"y[{j}]"))
    return total


def estimate_profile(oracle, probe_points, rng, profile=None, safety=1.5, max_components=200):
    """Empirical stand-in for the regularity constants of ``oracle``.

    Component norms, Lipschitz ratios over probe pairs and component
    variances are measured at ``probe_points`` and multiplied by ``safety``.
    ``L_F`` is set from the composition bound ``ell1^2 L2 + ell2 L1``.
    A user-supplied ``profile`` is returned unchanged.

    This is a heuristic: the maxima are over finitely many probes, so the
    result is not a certified bound.
    """
    if profile is not None:
        return profile
    probes = [check_vector(p, size=oracle.dim_x, name="probe") for p in probe_points]
    if len(probes) < 2:
        raise InsufficientProbes(f"need at least 2 probe points, got {len(probes)}")

    def components(level):
        if oracle.mode == FINITE_SUM:
            n = oracle.n1 if level == 1 else oracle.n2
            if n <= max_components:
                return np.arange(n)
            return rng.choice(n, size=max_components, replace=False)
        return oracle.draw_indices(level, max_components, rng)

    idx1, idx2 = components(1), components(2)
    vals, jacs, images, grads = [], [], [], []
    for x in probes:
        f1 = oracle.f1_values(idx1, x)
        w = f1.mean(axis=0)
        vals.append(f1)
        jacs.append(oracle.f1_jacobians(idx1, x))
        images.append(w)
        grads.append(oracle.f2_grads(idx2, w))

    ell1 = max(np.linalg.norm(J, ord=2, axis=(1, 2)).max() for J in jacs)
    ell2 = max(np.linalg.norm(g, axis=1).max() for g in grads)
    L1 = L2 = 0.0
    for a in range(len(probes)):
        for b in range(a + 1, len(probes)):
            dx = np.linalg.norm(probes[a] - probes[b])
            if dx > 0:
                dJ = np.linalg.norm(jacs[a] - jacs[b], ord=2, axis=(1, 2)).max()
                L1 = max(L1, dJ / dx)
            dw = np.linalg.norm(images[a] - images[b])
            if dw > 0:
                gb = oracle.f2_grads(idx2, images[b])
                L2 = max(L2, np.linalg.norm(grads[a] - gb, axis=1).max() / dw)

    def spread(arrs):
        # mean squared deviation from the component mean, maximised over probes
        out = 0.0
        for arr in arrs:
            dev = arr - arr.mean(axis=0)
            out = max(out, float(np.mean(np.sum(dev.reshape(len(arr), -1) ** 2, axis=1))))
        return out ** 0.5

    delta, sigma1, sigma2 = spread(vals), spread(jacs), spread(grads)
    ell1, ell2, L1, L2 = (safety * v for v in (ell1, ell2, L1, L2))
    return SmoothnessProfile(
        ell1=ell1,
        ell2=ell2,
        L1=L1,
        L2=L2,
        LF=ell1**2 * L2 + ell2 * L1,
        delta=safety * delta,
        sigma1=safety * sigma1,
        sigma2=safety * sigma2,
    )
