"""Independent numerical oracles used by the tests.

None of these call into the package's solver code paths; they recompute
the quantities from first principles.
"""
import itertools

import numpy as np

from nested_admm.oracles import AffineInner, CompositionOracle, QuadraticOuter
from nested_admm.problem import ProblemInstance
from nested_admm.prox import Regularizer


def jacobi_eigenvalues(S, tol=1e-14, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    S = np.array(S, dtype=float)
    n = S.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(S**2) - np.sum(np.diag(S) ** 2))
        if off <= tol * max(1.0, np.abs(S).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(S[p, q]) < 1e-300:
                    continue
                theta = (S[q, q] - S[p, p]) / (2 * S[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1)) if theta != 0 else 1.0
                c = 1 / np.sqrt(t**2 + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                S = J.T @ S @ J
    return np.sort(np.diag(S))


def ternary_search(f, lo, hi, iters=200):
    """Minimiser of a unimodal scalar function on ``[lo, hi]``."""
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if f(m1) < f(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def y_subproblem_objective(problem, rho, tau, x, y_blocks, z, j):
    """The y_j subproblem with the metric ``H_j = tau I - rho B_j^T B_j`` formed explicitly."""
    Bj = problem.B[j]
    H = tau * np.eye(Bj.shape[1]) - rho * Bj.T @ Bj
    rest = problem.A @ x - problem.c + sum(problem.B[i] @ y_blocks[i] for i in range(problem.m) if i != j)
    yk = y_blocks[j]

    def smooth(u):
        res = rest + Bj @ u
        return -z @ (Bj @ u) + 0.5 * rho * res @ res + 0.5 * (u - yk) @ H @ (u - yk)

    def grad(u):
        res = rest + Bj @ u
        return -Bj.T @ z + rho * Bj.T @ res + H @ (u - yk)

    return smooth, grad


def projected_gradient_y(problem, rho, tau, x, y_blocks, z, j, iters=20000, tol=1e-13):
    """Minimise the y_j subproblem by projected gradient.

    ``l1`` uses the split ``u = a - b`` with ``a, b >= 0`` (a smooth problem on
    the nonnegative orthant); smooth regularisers use plain gradient descent.
    """
    reg = problem.regs[j]
    smooth, grad = y_subproblem_objective(problem, rho, tau, x, y_blocks, z, j)
    n = problem.B[j].shape[1]
    lam = reg.weight
    if reg.kind == "l1":
        a = np.maximum(y_blocks[j], 0.0)
        b = np.maximum(-y_blocks[j], 0.0)
        step = 1.0 / (2 * tau)
        for _ in range(iters):
            g = grad(a - b)
            a_new = np.maximum(a - step * (g + lam), 0.0)
            b_new = np.maximum(b - step * (-g + lam), 0.0)
            moved = np.abs(a_new - a).max() + np.abs(b_new - b).max()
            a, b = a_new, b_new
            if moved < tol:
                break
        return a - b
    if reg.kind == "squared-l2":
        full_grad = lambda u: grad(u) + 2 * lam * u  # noqa: E731
        L = tau + 2 * lam
    elif reg.kind == "zero":
        full_grad, L = grad, tau
    else:
        raise ValueError(reg.kind)
    u = y_blocks[j].copy()
    for _ in range(iters):
        step = full_grad(u) / L
        u = u - step
        if np.abs(step).max() < tol:
            break
    assert u.shape == (n,)
    return u


def lasso_by_enumeration(M, d, lam):
    """Exact minimiser of ``0.5||Mx - d||^2 + lam ||x||_1`` by trying every sign pattern."""
    n = M.shape[1]
    Q, q = M.T @ M, M.T @ d
    best, best_val = None, np.inf
    for signs in itertools.product((-1, 0, 1), repeat=n):
        s = np.array(signs, dtype=float)
        act = s != 0
        x = np.zeros(n)
        if act.any():
            x[act] = np.linalg.solve(Q[np.ix_(act, act)], q[act] - lam * s[act])
            if np.any(np.sign(x[act]) != s[act]):
                continue
        g = Q @ x - q
        if np.any(np.abs(g[~act]) > lam + 1e-12):
            continue
        val = 0.5 * np.sum((M @ x - d) ** 2) + lam * np.abs(x).sum()
        if val < best_val:
            best, best_val = x, val
    return best


def lasso_instance(M, d, lam):
    """``F(x) = 0.5||Mx - d||^2`` split as ``x - y = 0`` with ``lam ||y||_1``."""
    l, n = M.shape
    inner = AffineInner(M[None], np.zeros((1, l)))
    outer = QuadraticOuter(np.eye(l)[None], d[None])
    oracle = CompositionOracle(inner, outer, n, l)
    return ProblemInstance(np.eye(n), [-np.eye(n)], np.zeros(n), [Regularizer("l1", lam)], oracle)


def single_component_instance(M, C, b=None, dvec=None, A=None, B=None, c=None, regs=None):
    """Instance with one inner and one outer component (exact gradients at any batch size)."""
    l, n = M.shape
    b = np.zeros(l) if b is None else b
    dvec = np.zeros(C.shape[0]) if dvec is None else dvec
    oracle = CompositionOracle(AffineInner(M[None], b[None]), QuadraticOuter(C[None], dvec[None]), n, l)
    A = np.eye(n) if A is None else A
    B = [-np.eye(n)] if B is None else B
    c = np.zeros(A.shape[0]) if c is None else c
    regs = [Regularizer("zero", 0.0) for _ in B] if regs is None else regs
    return ProblemInstance(A, B, c, regs, oracle)


def brute_force_F(oracle, x):
    """``F(x)`` by explicit loops over every component."""
    inner = np.mean([oracle.eval_f1_component(i, x) for i in range(oracle.n1)], axis=0)
    vals = [oracle.f2_values(np.array([j]), inner)[0] for j in range(oracle.n2)]
    return float(np.mean(vals))
