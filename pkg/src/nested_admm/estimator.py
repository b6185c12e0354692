"""scikit-learn style front end for the solver."""
from sklearn.base import BaseEstimator

from .diagnostics import stationarity
from .estimators import SPIDER
from .problem import FINITE_SUM, ProblemInstance
from .solver import calibrate, run, with_overrides


class NestedADMM(BaseEstimator):
    """Stochastic nested ADMM as an estimator object.

    ``fit`` takes a :class:`ProblemInstance` in place of a data matrix: the
    "data" of a constrained composition problem is its oracle and coupling.
    Unset step parameters (``rho``, ``eta``, ``r``, ``tau``) are calibrated.

    Attributes
    ----------
    x_, y_, z_ : output triple (uniformly drawn iterate)
    config_ : SolverConfig actually used
    report_ : SolveReport
    trace_ : list of TraceRecord
    n_iter_ : iterations performed
    """

    def __init__(
        self,
        estimator=SPIDER,
        mode=FINITE_SUM,
        max_iter=1000,
        alpha=0.5,
        epsilon=1e-2,
        q=None,
        rho=None,
        eta=None,
        r=None,
        tau=None,
        tol=None,
        record_every=1,
        random_state=0,
    ):
        self.estimator = estimator
        self.mode = mode
        self.max_iter = max_iter
        self.alpha = alpha
        self.epsilon = epsilon
        self.q = q
        self.rho = rho
        self.eta = eta
        self.r = r
        self.tau = tau
        self.tol = tol
        self.record_every = record_every
        self.random_state = random_state

    def _check_problem(self, problem):
        if not isinstance(problem, ProblemInstance):
            raise TypeError(f"fit expects a ProblemInstance, got {type(problem).__name__}")
        return problem

    def fit(self, problem, y=None):
        problem = self._check_problem(problem)
        config = calibrate(
            problem,
            mode=self.mode,
            alpha=self.alpha,
            eps=self.epsilon,
            q_override=self.q,
            estimator=self.estimator,
            K=self.max_iter,
            seed=self.random_state,
        )
        tau = tuple(self.tau) if self.tau is not None else None
        config = with_overrides(config, rho=self.rho, eta=self.eta, r=self.r, tau=tau)
        report = run(problem, config, record_every=self.record_every, stop_eps=self.tol)
        self.config_ = config
        self.report_ = report
        self.trace_ = report.trace
        self.n_iter_ = report.trace[-1].k
        self.x_, self.y_, self.z_ = report.x, report.y, report.z
        return self

    def score(self, problem, y=None):
        """Negative ``sqrt(stat_total)`` at the output triple (higher is better)."""
        problem = self._check_problem(problem)
        return -stationarity(problem, self.x_, self.y_, self.z_).total ** 0.5
