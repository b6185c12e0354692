"""Component-function oracles for nested compositions.

An oracle pairs an *inner* family ``f_{1,i}: R^d -> R^l`` with an *outer*
family ``f_{2,j}: R^l -> R``.  All evaluation methods are vectorised over an
index array and never mutate the oracle, so one oracle can be shared by
concurrent workers; every random draw takes an explicit ``Generator``.

Finite-sum oracles store their components as arrays.  Online oracles
regenerate component ``xi`` on demand from ``(seed, level, xi)`` so that a
replayed index stream replays the same components.
"""
import numpy as np

from .problem import FINITE_SUM, ONLINE


class AffineInner:
    """``f_{1,i}(x) = M_i x + b_i``; ``M`` has shape ``(N, l, d)``."""

    kind = "affine"

    def __init__(self, M, b):
        self.M = np.asarray(M, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.M.ndim != 3 or self.b.shape != self.M.shape[:2]:
            raise ValueError("AffineInner needs M of shape (N, l, d) and b of shape (N, l)")

    def __len__(self):
        return self.M.shape[0]

    @property
    def dims(self):
        return self.M.shape[2], self.M.shape[1]

    def values(self, idx, x):
        return np.einsum("nld,d->nl", self.M[idx], x) + self.b[idx]

    def jacobians(self, idx, x):
        return self.M[idx]

    @classmethod
    def stack(cls, parts):
        return cls(np.stack([p["M"] for p in parts]), np.stack([p["b"] for p in parts]))


class QuadraticOuter:
    """``f_{2,j}(w) = 0.5 ||C_j w - d_j||^2``."""

    kind = "quadratic"

    def __init__(self, C, d):
        self.C = np.asarray(C, dtype=float)
        self.d = np.asarray(d, dtype=float)
        if self.C.ndim != 3 or self.d.shape != self.C.shape[:2]:
            raise ValueError("QuadraticOuter needs C of shape (N, k, l) and d of shape (N, k)")

    def __len__(self):
        return self.C.shape[0]

    def _res(self, idx, w):
        return np.einsum("nkl,l->nk", self.C[idx], w) - self.d[idx]

    def values(self, idx, w):
        r = self._res(idx, w)
        return 0.5 * np.sum(r * r, axis=1)

    def grads(self, idx, w):
        return np.einsum("nkl,nk->nl", self.C[idx], self._res(idx, w))

    @classmethod
    def stack(cls, parts):
        return cls(np.stack([p["C"] for p in parts]), np.stack([p["d"] for p in parts]))


class LogisticOuter:
    """``f_{2,j}(w) = log(1 + exp(-t_j <a_j, w>))`` with labels ``t_j = +-1``."""

    kind = "logistic"

    def __init__(self, a, t):
        self.a = np.asarray(a, dtype=float)
        self.t = np.asarray(t, dtype=float)
        if self.a.ndim != 2 or self.t.shape != self.a.shape[:1]:
            raise ValueError("LogisticOuter needs a of shape (N, l) and t of shape (N,)")

    def __len__(self):
        return self.a.shape[0]

    def values(self, idx, w):
        return np.logaddexp(0.0, -self.t[idx] * (self.a[idx] @ w))

    def grads(self, idx, w):
        margin = self.t[idx] * (self.a[idx] @ w)
        # d/dm log(1 + e^{-m}) = -1 / (1 + e^{m})
        coef = -self.t[idx] * np.exp(-np.logaddexp(0.0, margin))
        return coef[:, None] * self.a[idx]

    @classmethod
    def stack(cls, parts):
        return cls(np.stack([p["a"] for p in parts]), np.array([p["t"] for p in parts]))


class StreamFamily:
    """Family whose component ``xi`` is built by ``make(rng)`` seeded with ``(seed, level, xi)``."""

    def __init__(self, base_cls, make, seed, level):
        self.base_cls = base_cls
        self.make = make
        self.seed = int(seed)
        self.level = int(level)

    def component(self, xi):
        return self.make(np.random.default_rng([self.seed, self.level, int(xi)]))

    def materialize(self, idx):
        return self.base_cls.stack([self.component(i) for i in idx])

    def values(self, idx, arg):
        return self.materialize(idx).values(np.arange(len(idx)), arg)

    def jacobians(self, idx, arg):
        return self.materialize(idx).jacobians(np.arange(len(idx)), arg)

    def grads(self, idx, arg):
        return self.materialize(idx).grads(np.arange(len(idx)), arg)


class CompositionOracle:
    """Indexed access to the components of ``F(x) = E f_2(E f_1(x))``.

    Parameters
    ----------
    inner : AffineInner or StreamFamily
    outer : QuadraticOuter, LogisticOuter or StreamFamily
    dim_x, dim_w : int
        Dimensions ``d`` and ``l``.
    mode : {"finite-sum", "online"}
    """

    def __init__(self, inner, outer, dim_x, dim_w, mode=FINITE_SUM):
        if mode not in (FINITE_SUM, ONLINE):
            raise ValueError(f"unknown oracle mode {mode!r}")
        self.inner = inner
        self.outer = outer
        self.dim_x = int(dim_x)
        self.dim_w = int(dim_w)
        self.mode = mode

    @property
    def n1(self):
        return len(self.inner) if self.mode == FINITE_SUM else None

    @property
    def n2(self):
        return len(self.outer) if self.mode == FINITE_SUM else None

    def f1_values(self, idx, x):
        return self.inner.values(idx, x)

    def f1_jacobians(self, idx, x):
        return self.inner.jacobians(idx, x)

    def f2_values(self, idx, w):
        return self.outer.values(idx, w)

    def f2_grads(self, idx, w):
        return self.outer.grads(idx, w)

    # single-component conveniences
    def eval_f1_component(self, i, x):
        return self.f1_values(np.array([i]), x)[0]

    def jac_f1_component(self, i, x):
        return self.f1_jacobians(np.array([i]), x)[0]

    def grad_f2_component(self, j, w):
        return self.f2_grads(np.array([j]), w)[0]

    def draw_indices(self, level, size, rng):
        """Draw ``size`` component indices from the seeded stream (online mode)."""
        if self.mode == FINITE_SUM:
            n = self.n1 if level == 1 else self.n2
            return rng.integers(0, n, size=size)
        return rng.integers(0, 2**62, size=size, dtype=np.int64)

    def surrogate(self, n, rng):
        """Finite-sum oracle built from ``n`` stream draws per level."""
        if self.mode == FINITE_SUM:
            return self
        inner = self.inner.materialize(self.draw_indices(1, n, rng))
        outer = self.outer.materialize(self.draw_indices(2, n, rng))
        return CompositionOracle(inner, outer, self.dim_x, self.dim_w, FINITE_SUM)
