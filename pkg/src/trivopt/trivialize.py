"""Dynamic trivialisation driver.

A run optimises raw coordinates ``v`` with ``x = triv(p, v)``. After each
optimiser update a stopping rule decides whether to move the anchor:
``p <- triv(p, v)``, ``v <- 0`` and the optimiser state is cleared. Rule
``Never`` gives a static trivialisation; ``Always`` with plain gradient descent
is Riemannian gradient descent.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import step_size
from .errors import ContractError, DivergenceError, DomainError
from .manifolds import Euclidean, Manifold, Product
from .optimizers import Optimizer

__all__ = [
    "StoppingRule",
    "Never",
    "Always",
    "EveryK",
    "GradRatio",
    "StepRecord",
    "Trace",
    "TrivRun",
    "step",
    "run",
    "grad_ratio",
    "cached_eval",
    "curvature_lr",
    "F_LIMIT",
]

F_LIMIT = 1e12


class StoppingRule:
    """Decides after each accepted step whether to re-anchor."""

    def fires(self, inner_k: int, ratio: float) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class Never(StoppingRule):
    def fires(self, inner_k, ratio):
        return False


@dataclass(frozen=True)
class Always(StoppingRule):
    def fires(self, inner_k, ratio):
        return True


@dataclass(frozen=True)
class EveryK(StoppingRule):
    """Fire once ``K`` steps have been accepted on the current anchor."""

    K: int

    def __post_init__(self):
        if not (isinstance(self.K, (int, np.integer)) and self.K >= 1):
            raise ContractError(f"EveryK needs a positive integer K, got {self.K!r}")

    def fires(self, inner_k, ratio):
        return inner_k >= self.K


@dataclass(frozen=True)
class GradRatio(StoppingRule):
    """Fire when the pulled-back to Riemannian gradient ratio leaves [eps_low, eps_high]."""

    eps_low: float = 0.1
    eps_high: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.eps_low < 1.0 < self.eps_high):
            raise ContractError(f"GradRatio needs 0 < eps_low < 1 < eps_high, got ({self.eps_low}, {self.eps_high})")

    def fires(self, inner_k, ratio):
        return ratio < self.eps_low or ratio > self.eps_high


@dataclass(frozen=True)
class StepRecord:
    iteration: int
    f: float
    grad_norm_raw: float
    grad_norm_riemannian: float
    stop_fired: bool
    outer_i: int


@dataclass
class Trace:
    records: list = field(default_factory=list)
    converged: bool = False
    final_f: float = math.nan
    final_grad_norm: float = math.nan

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def f_values(self):
        return np.array([r.f for r in self.records])


def _norm(x):
    if isinstance(x, tuple):
        return math.sqrt(sum(float(np.sum(np.square(a))) for a in x))
    return float(np.sqrt(np.sum(np.square(x))))


def _finite(x):
    if isinstance(x, tuple):
        return all(_finite(a) for a in x)
    return bool(np.all(np.isfinite(x)))


def _zeros_like(x):
    if isinstance(x, tuple):
        return tuple(np.zeros_like(a) for a in x)
    return np.zeros_like(x)


def _curved_blocks(spec):
    """Product factors whose chart is not a plain translation; None means every block."""
    if isinstance(spec, Product):
        return [i for i, f in enumerate(spec.factors) if not isinstance(f, Euclidean)]
    return None


def _value_and_grad(objective, x):
    if hasattr(objective, "value_and_grad"):
        return objective.value_and_grad(x)
    if hasattr(objective, "f"):
        return objective.f(x), objective.ambient_grad(x)
    f, g = objective
    return f(x), g(x)


class TrivRun:
    """Mutable optimisation state owned by a single caller.

    Every assignment to ``base`` or ``raw`` bumps ``version``; the lifted
    point ``triv(base, raw)`` is memoised on it and ``eval_count`` counts how
    often it had to be recomputed.
    """

    def __init__(self, spec: Manifold, base, optimizer: Optimizer, rule: StoppingRule = None, raw=None,
                 reset="full"):
        if reset not in ("full", "curved"):
            raise ContractError(f"reset must be 'full' or 'curved', got {reset!r}")
        self.spec = spec
        self.reset = reset
        self.optimizer = optimizer
        self.rule = rule if rule is not None else Never()
        self.version = 0
        self.eval_count = 0
        self.outer_i = 0
        self.inner_k = 0
        self.iteration = 0
        self._cache_version = -1
        self._cache = None
        self._base = spec.check_base(base)
        self._raw = spec.zero_raw() if raw is None else raw

    @property
    def base(self):
        return self._base

    @base.setter
    def base(self, value):
        self._base = value
        self.version += 1

    @property
    def raw(self):
        return self._raw

    @raw.setter
    def raw(self, value):
        self._raw = value
        self.version += 1

    def lifted(self):
        """``spec.lift(base, raw)``, memoised on ``version``."""
        if self._cache_version != self.version:
            self._cache = self.spec.lift(self._base, self._raw)
            self._cache_version = self.version
            self.eval_count += 1
        return self._cache

    def cached_eval(self):
        return self.spec.point(self.lifted())

    def point(self):
        return self.cached_eval()

    def evaluate(self, objective):
        """(f, raw gradient, Riemannian gradient) at the current state."""
        lifted = self.lifted()
        x = self.spec.point(lifted)
        if not _finite(x):
            raise DivergenceError(self.iteration, "non-finite iterate")
        try:
            f, G = _value_and_grad(objective, x)
        except DomainError as exc:
            raise DivergenceError(self.iteration, f"objective undefined at the iterate: {exc}") from None
        f = float(f)
        if not math.isfinite(f) or f > F_LIMIT:
            raise DivergenceError(self.iteration, f"objective value {f!r}")
        if not _finite(G):
            raise DivergenceError(self.iteration, "non-finite ambient gradient")
        g = self.spec.pullback_grad(self._base, self._raw, G)
        if _norm(self._raw) == 0.0:
            g_riem = g
        else:
            g_riem = self.spec.pullback_grad(lifted, self.spec.zero_raw(), G)
        return f, g, g_riem


def _ratio(g_norm, riem_norm):
    return 1.0 if riem_norm < 1e-15 else g_norm / riem_norm


def grad_ratio(run: TrivRun, objective) -> float:
    """||grad (f o triv_p)(v)|| / ||grad f(x)||, both in raw coordinates."""
    _, g, gr = run.evaluate(objective)
    return _ratio(_norm(g), _norm(gr))


def cached_eval(run: TrivRun):
    return run.cached_eval()


def _apply(run: TrivRun, f, g, g_riem):
    gn, rn = _norm(g), _norm(g_riem)
    new_raw = run.optimizer.step(run.raw, g)
    if not _finite(new_raw):
        raise DivergenceError(run.iteration, "non-finite raw coordinates after update")
    fired = bool(run.rule.fires(run.inner_k + 1, _ratio(gn, rn)))
    if fired:
        run.base = run.spec.lift(run.base, new_raw)
        run.raw = _zeros_like(new_raw)
        run.optimizer.reset(None if run.reset == "full" else _curved_blocks(run.spec))
        run.outer_i += 1
        run.inner_k = 0
    else:
        run.raw = new_raw
        run.inner_k += 1
    rec = StepRecord(run.iteration, f, gn, rn, fired, run.outer_i)
    run.iteration += 1
    return rec


def step(run: TrivRun, objective) -> StepRecord:
    """One optimiser update followed by the stopping-rule check. Mutates ``run``."""
    f, g, gr = run.evaluate(objective)
    return _apply(run, f, g, gr)


def run(trun: TrivRun, objective, tol_grad=0.0, max_iter=1000) -> Trace:
    """Step until the raw gradient norm drops below ``tol_grad`` or ``max_iter`` steps.

    On divergence the partial trace is attached to the exception as ``trace``.
    """
    trace = Trace()
    try:
        for _ in range(max_iter):
            f, g, gr = trun.evaluate(objective)
            trace.final_f, trace.final_grad_norm = f, _norm(g)
            if trace.final_grad_norm < tol_grad:
                trace.converged = True
                return trace
            trace.records.append(_apply(trun, f, g, gr))
        if max_iter > 0:
            f, g, _ = trun.evaluate(objective)
            trace.final_f, trace.final_grad_norm = f, _norm(g)
            trace.converged = trace.final_grad_norm < tol_grad
    except DivergenceError as exc:
        exc.trace = trace
        raise
    return trace


def curvature_lr(spec: Manifold, alpha, R):
    """Raw-coordinate learning rate from the guaranteed step of ``spec``'s curvature profile."""
    if spec.curvature is None:
        raise ContractError(f"{spec.name} has no curvature profile; pass a fixed learning rate")
    return step_size(spec.curvature, alpha, R) / spec.frame_gain
