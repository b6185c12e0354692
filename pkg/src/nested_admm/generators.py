"""Synthetic problem generators with certified regularity constants.

Every generator uses affine inner maps ``f_{1,i}(x) = M_i x + b_i`` whose
mean ``M`` has singular values ``(k+1)^-decay``, so the curvature of ``F``
spreads over several orders of magnitude.  Component noise is uniform with
unit variance (bounded support), which keeps every constant of the attached
:class:`SmoothnessProfile` a true upper bound on the ball ``||x|| <= radius``.

Kinds
-----
quadratic-composition
    ``f_{2,j}(w) = 0.5 ||C_j w - d_j||^2``; square, well-conditioned ``A``;
    ``m`` random blocks ``B_j``.
logistic-composition
    ``f_{2,j}(w) = log(1 + exp(-t_j <a_j, w>))``; same coupling as above.
graph-guided-lasso
    quadratic outer level; ``A = [E; 0.1 I]`` with ``E`` the edge-incidence
    matrix of a graph on the ``d`` coordinates, ``B_1 = -I``, ``c = 0`` and an
    ``l1`` penalty on the split variable.
"""
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .exceptions import GeneratorError, UnsupportedMode
from .oracles import AffineInner, CompositionOracle, LogisticOuter, QuadraticOuter, StreamFamily
from .problem import FINITE_SUM, MODES, ONLINE, ProblemInstance, SmoothnessProfile
from .prox import KINDS, Regularizer

QUADRATIC = "quadratic-composition"
LOGISTIC = "logistic-composition"
GRAPH_LASSO = "graph-guided-lasso"
GENERATORS = (QUADRATIC, LOGISTIC, GRAPH_LASSO)
GRAPH_EPS = 0.1

_SQRT3 = 3.0**0.5


@dataclass
class GeneratorSpec:
    """Recipe for a synthetic instance; fully determined by its fields."""

    kind: str = QUADRATIC
    d: int = 20
    l: int = 20
    p: int = None
    n1: int = 50
    n2: int = 50
    m: int = 1
    noise: float = 0.1
    seed: int = 0
    reg_kind: str = "l1"
    reg_weights: list = field(default_factory=lambda: [0.01])
    block_dim: int = None
    decay: float = 1.0
    radius: float = 3.0
    mode: str = FINITE_SUM
    graph: str = "random"
    edge_prob: float = 0.3

    def __post_init__(self):
        if self.kind not in GENERATORS:
            raise GeneratorError(f"unknown generator kind {self.kind!r}; expected one of {GENERATORS}")
        if self.mode not in MODES:
            raise GeneratorError(f"unknown mode {self.mode!r}")
        if self.reg_kind not in KINDS:
            raise GeneratorError(f"unknown regularizer kind {self.reg_kind!r}")
        if self.p is None:
            self.p = self.d
        if isinstance(self.reg_weights, (int, float)):
            self.reg_weights = [float(self.reg_weights)]
        self.reg_weights = [float(w) for w in self.reg_weights]
        for name in ("d", "l", "n1", "n2", "m"):
            if int(getattr(self, name)) < 1:
                raise GeneratorError(f"{name} must be >= 1")
        if self.p < self.d and self.kind != GRAPH_LASSO:
            raise GeneratorError(f"p={self.p} < d={self.d}: A cannot have full column rank")
        if self.kind == GRAPH_LASSO and self.m != 1:
            raise GeneratorError("graph-guided-lasso has exactly one block")
        if len(self.reg_weights) not in (1, self.m):
            raise GeneratorError(f"need 1 or m={self.m} regularizer weights, got {len(self.reg_weights)}")
        if self.noise < 0 or self.radius <= 0:
            raise GeneratorError("noise must be >= 0 and radius > 0")
        if self.graph not in ("random", "path"):
            raise GeneratorError(f"unknown graph {self.graph!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise GeneratorError(f"unknown generator fields: {sorted(unknown)}")
        return cls(**data)


def _uniform(rng, shape):
    # zero mean, unit variance, |entry| <= sqrt(3)
    return rng.uniform(-_SQRT3, _SQRT3, size=shape)


def _orthonormal(rng, n, k):
    q, r = np.linalg.qr(rng.standard_normal((n, k)))
    return q * np.sign(np.diag(r))


def _mean_inner(spec, rng):
    d, l = spec.d, spec.l
    r = min(d, l)
    sv = (np.arange(r) + 1.0) ** (-spec.decay)
    M = _orthonormal(rng, l, r) @ np.diag(sv) @ _orthonormal(rng, d, r).T
    b = rng.standard_normal(l) / np.sqrt(l)
    return M, b


def incidence_matrix(n_nodes, edges):
    """Edge-incidence matrix: row ``e`` has +1 at ``i`` and -1 at ``j`` for edge ``(i, j)``."""
    E = np.zeros((len(edges), n_nodes))
    for row, (i, j) in enumerate(edges):
        E[row, i] = 1.0
        E[row, j] = -1.0
    return E


def graph_edges(spec, rng):
    if spec.graph == "path":
        return [(i, i + 1) for i in range(spec.d - 1)]
    edges = [(i, j) for i in range(spec.d) for j in range(i + 1, spec.d) if rng.random() < spec.edge_prob]
    if not edges:
        raise GeneratorError("random graph has no edges; raise edge_prob")
    return edges


def _coupling(spec, rng):
    if spec.kind == GRAPH_LASSO:
        E = incidence_matrix(spec.d, graph_edges(spec, rng))
        A = np.vstack([E, GRAPH_EPS * np.eye(spec.d)])
        p = A.shape[0]
        return A, [-np.eye(p)], np.zeros(p)
    p, d = spec.p, spec.d
    # singular values in [1, 1.2] keep A well conditioned
    sv = np.linspace(1.0, 1.2, d)
    A = _orthonormal(rng, p, d) @ np.diag(sv) @ _orthonormal(rng, d, d).T
    nb = spec.block_dim or p
    k = min(p, nb)
    B = [
        _orthonormal(rng, p, k) @ np.diag(np.linspace(1.0, 1.2, k)) @ _orthonormal(rng, nb, k).T / np.sqrt(spec.m)
        for _ in range(spec.m)
    ]
    c = rng.standard_normal(p) / np.sqrt(p)
    return A, B, c


def _centered(base, noise):
    # exact empirical mean equal to ``base``
    return base + noise - noise.mean(axis=0)


def _finite_oracle(spec, rng, Mbar, bbar):
    d, l = spec.d, spec.l
    M = _centered(Mbar, spec.noise * _uniform(rng, (spec.n1, l, d)) / np.sqrt(d))
    b = _centered(bbar, spec.noise * _uniform(rng, (spec.n1, l)))
    inner = AffineInner(M, b)
    if spec.kind == LOGISTIC:
        a = rng.standard_normal((spec.n2, l)) / np.sqrt(l) * 2.0
        w_star = rng.standard_normal(l)
        t = np.sign(a @ w_star + 0.3 * rng.standard_normal(spec.n2))
        t[t == 0] = 1.0
        outer = LogisticOuter(a, t)
    else:
        C = _centered(np.eye(l), spec.noise * _uniform(rng, (spec.n2, l, l)) / np.sqrt(l))
        dbar = rng.standard_normal(l) / np.sqrt(l)
        dv = _centered(dbar, spec.noise * _uniform(rng, (spec.n2, l)))
        outer = QuadraticOuter(C, dv)
    return CompositionOracle(inner, outer, d, l, FINITE_SUM)


def _stream_oracle(spec, rng, Mbar, bbar):
    d, l, noise = spec.d, spec.l, spec.noise

    def make_inner(r):
        return {"M": Mbar + noise * _uniform(r, (l, d)) / np.sqrt(d), "b": bbar + noise * _uniform(r, l)}

    inner = StreamFamily(AffineInner, make_inner, spec.seed, 1)
    if spec.kind == LOGISTIC:
        w_star = rng.standard_normal(l)

        def make_outer(r):
            a = r.standard_normal(l) / np.sqrt(l) * 2.0
            a = np.clip(a, -3.0, 3.0)
            t = 1.0 if a @ w_star + 0.3 * r.standard_normal() >= 0 else -1.0
            return {"a": a, "t": t}

        outer = StreamFamily(LogisticOuter, make_outer, spec.seed, 2)
    else:
        dbar = rng.standard_normal(l) / np.sqrt(l)

        def make_outer(r):
            return {"C": np.eye(l) + noise * _uniform(r, (l, l)) / np.sqrt(l), "d": dbar + noise * _uniform(r, l)}

        outer = StreamFamily(QuadraticOuter, make_outer, spec.seed, 2)
        outer.dbar = dbar
        outer.noise = noise
    inner.Mbar, inner.bbar = Mbar, bbar
    return CompositionOracle(inner, outer, d, l, ONLINE)


def population_gradient(oracle, x):
    """Exact ``F'(x)`` of an online quadratic-composition oracle.

    With ``C = I + s U / sqrt(l)`` and unit-variance entries of ``U``,
    ``E[C^T C] = (1 + s^2) I`` and ``E[C^T d] = dbar``, so
    ``F'(x) = Mbar^T ((1 + s^2)(Mbar x + bbar) - dbar)``.
    """
    outer = oracle.outer
    if oracle.mode != ONLINE or not hasattr(outer, "dbar"):
        raise UnsupportedMode("closed-form population gradient exists for online quadratic oracles only")
    Mbar, bbar = oracle.inner.Mbar, oracle.inner.bbar
    return Mbar.T @ ((1 + outer.noise**2) * (Mbar @ x + bbar) - outer.dbar)


def _lam_max(P):
    return float(np.linalg.eigvalsh(P)[-1]) if P.size else 0.0


def certified_profile(oracle, radius, spec=None):
    """Upper bounds on the regularity constants over ``||x|| <= radius``.

    Finite-sum oracles are bounded from their stored components.  Online
    oracles use the support of the uniform noise, which needs ``spec``.
    """
    R = float(radius)
    if oracle.mode == FINITE_SUM:
        inner = oracle.inner
        M, b = inner.M, inner.b
        ell1 = float(np.linalg.norm(M, ord=2, axis=(1, 2)).max())
        D = M - M.mean(axis=0)
        e = b - b.mean(axis=0)
        P1 = np.einsum("nld,nle->de", D, D) / len(M)
        delta = R * _lam_max(P1) ** 0.5 + float(np.mean(np.sum(e * e, axis=1))) ** 0.5
        sigma1 = float(np.mean(np.sum(D * D, axis=(1, 2)))) ** 0.5
        Rw = ell1 * R + float(np.linalg.norm(b, axis=1).max())
        outer = oracle.outer
        if isinstance(outer, LogisticOuter):
            an = np.linalg.norm(outer.a, axis=1)
            ell2, L2 = float(an.max()), float(an.max() ** 2 / 4)
            sigma2 = float(np.mean(an**2)) ** 0.5
        else:
            Q = np.einsum("nkl,nkm->nlm", outer.C, outer.C)
            pv = np.einsum("nkl,nk->nl", outer.C, outer.d)
            qn = np.linalg.norm(Q, ord=2, axis=(1, 2))
            L2 = float(qn.max())
            ell2 = float(np.max(qn * Rw + np.linalg.norm(pv, axis=1)))
            DQ = Q - Q.mean(axis=0)
            P2 = np.einsum("nlm,nlk->mk", DQ, DQ) / len(Q)
            ep = pv - pv.mean(axis=0)
            sigma2 = Rw * _lam_max(P2) ** 0.5 + float(np.mean(np.sum(ep * ep, axis=1))) ** 0.5
    else:
        if spec is None:
            raise GeneratorError("online profiles are certified from the generator spec")
        d, l, s = spec.d, spec.l, spec.noise
        Mbar, bbar = oracle.inner.Mbar, oracle.inner.bbar
        # ||U||_2 <= ||U||_F <= sqrt(3 * rows * cols) for entries in [-sqrt3, sqrt3]
        ell1 = float(np.linalg.norm(Mbar, 2)) + s * _SQRT3 * np.sqrt(l)
        sigma1 = s * np.sqrt(l)
        delta = s * np.sqrt(l) * np.sqrt(R**2 / d + 1.0)
        Rw = ell1 * R + float(np.linalg.norm(bbar)) + s * _SQRT3 * np.sqrt(l)
        if spec.kind == LOGISTIC:
            amax = 3.0 * np.sqrt(l)
            ell2, L2 = amax, amax**2 / 4
            sigma2 = 2.0
        else:
            cn = 1.0 + s * _SQRT3 * np.sqrt(l)
            L2 = cn**2
            ell2 = cn * (cn * Rw + float(np.linalg.norm(oracle.outer.dbar)) + s * _SQRT3 * np.sqrt(l))
            sigma2 = ell2
    L1 = 0.0
    return SmoothnessProfile(
        ell1=ell1, ell2=ell2, L1=L1, L2=L2, LF=ell1**2 * L2 + ell2 * L1, delta=delta, sigma1=sigma1, sigma2=sigma2
    )


def check_profile(oracle, profile, radius, rng, n_points=10, n_components=100, rtol=1e-9):
    """Sampled check that ``profile`` bounds the components on the ball.

    Raises
    ------
    GeneratorError
        If any sampled quantity exceeds its bound.
    """
    d = oracle.dim_x

    def ball_point():
        u = rng.standard_normal(d)
        return radius * rng.random() ** (1.0 / d) * u / np.linalg.norm(u)

    if oracle.mode == FINITE_SUM:
        i1 = np.arange(min(oracle.n1, n_components))
        i2 = np.arange(min(oracle.n2, n_components))
    else:
        i1 = oracle.draw_indices(1, n_components, rng)
        i2 = oracle.draw_indices(2, n_components, rng)

    def fail(what, got, bound):
        raise GeneratorError(f"certified {what}={bound:.6g} violated by sampled value {got:.6g}")

    pts = [ball_point() for _ in range(n_points)]
    prev = None
    for x in pts:
        J = oracle.f1_jacobians(i1, x)
        got = float(np.linalg.norm(J, ord=2, axis=(1, 2)).max())
        if got > profile.ell1 * (1 + rtol):
            fail("ell1", got, profile.ell1)
        f1 = oracle.f1_values(i1, x)
        w = f1.mean(axis=0)
        if oracle.mode == FINITE_SUM:
            var = float(np.mean(np.sum((f1 - f1.mean(axis=0)) ** 2, axis=1)))
            if var > profile.delta**2 * (1 + rtol):
                fail("delta^2", var, profile.delta**2)
            g = oracle.f2_grads(i2, w)
            var2 = float(np.mean(np.sum((g - g.mean(axis=0)) ** 2, axis=1)))
            if var2 > profile.sigma2**2 * (1 + rtol):
                fail("sigma2^2", var2, profile.sigma2**2)
        g = oracle.f2_grads(i2, w)
        got = float(np.linalg.norm(g, axis=1).max())
        if got > profile.ell2 * (1 + rtol):
            fail("ell2", got, profile.ell2)
        if prev is not None:
            w_prev, g_prev = prev
            dw = np.linalg.norm(w - w_prev)
            g_other = oracle.f2_grads(i2, w_prev)
            if dw > 0:
                ratio = float(np.linalg.norm(g - g_other, axis=1).max() / dw)
                if ratio > profile.L2 * (1 + rtol):
                    fail("L2", ratio, profile.L2)
        prev = (w, g)


def generate_instance(spec, rng=None):
    """Build a :class:`ProblemInstance` from ``spec``.

    ``rng`` defaults to a generator seeded with ``spec.seed``; the same seed
    always reproduces bitwise-identical matrices.
    """
    if isinstance(spec, dict):
        spec = GeneratorSpec.from_dict(spec)
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    Mbar, bbar = _mean_inner(spec, rng)
    A, B, c = _coupling(spec, rng)
    if spec.mode == FINITE_SUM:
        oracle = _finite_oracle(spec, rng, Mbar, bbar)
    else:
        oracle = _stream_oracle(spec, rng, Mbar, bbar)
    profile = certified_profile(oracle, spec.radius, spec)
    weights = spec.reg_weights * spec.m if len(spec.reg_weights) == 1 else spec.reg_weights
    regs = [Regularizer(spec.reg_kind, w) for w in weights]
    problem = ProblemInstance(A, B, c, regs, oracle, profile=profile, generator=spec.to_dict())
    problem.spectral  # certifies full column rank of A
    check_profile(oracle, profile, spec.radius, np.random.default_rng([spec.seed, 7]))
    return problem
