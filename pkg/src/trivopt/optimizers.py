"""Euclidean update rules for raw coordinates.

Raw coordinates may be a single array or a tuple of arrays (product
manifolds). ``lr`` may be a scalar or a tuple with one entry per factor.
Optimisers hold their moment buffers and are reset in place; the functional
:func:`update` and :func:`reset` work on copies instead.
"""
import copy

import numpy as np

from .errors import ContractError, ShapeError

__all__ = ["Optimizer", "GD", "Momentum", "Adam", "update", "reset", "make_optimizer"]


def _leaves(x):
    return x if isinstance(x, tuple) else (x,)


def _rebuild(template, leaves):
    return tuple(leaves) if isinstance(template, tuple) else leaves[0]


class Optimizer:
    def __init__(self, lr):
        lrs = lr if isinstance(lr, tuple) else (lr,)
        if not all(np.isfinite(v) and v > 0.0 for v in lrs):
            raise ContractError(f"learning rate must be positive, got {lr!r}")
        self.lr = lr
        self.t = {}

    def _lr(self, i, count):
        if isinstance(self.lr, tuple):
            if len(self.lr) != count:
                raise ShapeError(f"got {len(self.lr)} learning rates for {count} parameter blocks")
            return self.lr[i]
        return self.lr

    def reset(self, blocks=None):
        """Zero buffers and step counters, for every block or only the given block indices."""
        if blocks is None:
            self.t = {}
            self._clear(None)
        else:
            for i in blocks:
                self.t.pop(i, None)
            self._clear(blocks)
        return self

    def _clear(self, blocks):
        pass

    @staticmethod
    def _drop(buf, blocks):
        if blocks is None:
            buf.clear()
        else:
            for i in blocks:
                buf.pop(i, None)

    def step(self, raw, grad):
        rs, gs = _leaves(raw), _leaves(grad)
        if len(rs) != len(gs):
            raise ShapeError(f"raw has {len(rs)} blocks but gradient has {len(gs)}")
        for r, g in zip(rs, gs):
            if np.shape(r) != np.shape(g):
                raise ShapeError(f"raw shape {np.shape(r)} does not match gradient shape {np.shape(g)}")
        for i in range(len(rs)):
            self.t[i] = self.t.get(i, 0) + 1
        out = [self._step_leaf(i, len(rs), np.asarray(r, dtype=np.float64), np.asarray(g, dtype=np.float64))
               for i, (r, g) in enumerate(zip(rs, gs))]
        return _rebuild(raw, out)

    def _step_leaf(self, i, count, r, g):
        raise NotImplementedError


class GD(Optimizer):
    def _step_leaf(self, i, count, r, g):
        return r - self._lr(i, count) * g

    def __repr__(self):
        return f"GD(lr={self.lr})"


class Momentum(Optimizer):
    """Heavy ball: m <- beta m + g; raw <- raw - lr m."""

    def __init__(self, lr, beta=0.9):
        super().__init__(lr)
        if not 0.0 <= beta < 1.0:
            raise ContractError(f"beta must lie in [0, 1), got {beta}")
        self.beta = beta
        self.m = {}

    def _clear(self, blocks):
        self._drop(self.m, blocks)

    def _step_leaf(self, i, count, r, g):
        m = self.beta * self.m.get(i, np.zeros_like(g)) + g
        self.m[i] = m
        return r - self._lr(i, count) * m

    def __repr__(self):
        return f"Momentum(lr={self.lr}, beta={self.beta})"


class Adam(Optimizer):
    """Adam with bias-corrected moments."""

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(lr)
        for name, b in (("beta1", beta1), ("beta2", beta2)):
            if not 0.0 <= b < 1.0:
                raise ContractError(f"{name} must lie in [0, 1), got {b}")
        if not eps > 0.0:
            raise ContractError(f"eps must be positive, got {eps}")
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {}
        self.v = {}

    def _clear(self, blocks):
        self._drop(self.m, blocks)
        self._drop(self.v, blocks)

    def _step_leaf(self, i, count, r, g):
        m = self.beta1 * self.m.get(i, np.zeros_like(g)) + (1.0 - self.beta1) * g
        v = self.beta2 * self.v.get(i, np.zeros_like(g)) + (1.0 - self.beta2) * g * g
        self.m[i], self.v[i] = m, v
        t = self.t[i]
        mhat = m / (1.0 - self.beta1 ** t)
        vhat = v / (1.0 - self.beta2 ** t)
        return r - self._lr(i, count) * mhat / (np.sqrt(vhat) + self.eps)

    def __repr__(self):
        return f"Adam(lr={self.lr}, beta1={self.beta1}, beta2={self.beta2}, eps={self.eps})"


def update(state: Optimizer, raw, grad):
    """Pure form of ``state.step``: returns ``(new_state, new_raw)`` and leaves ``state`` untouched."""
    new = copy.deepcopy(state)
    return new, new.step(raw, grad)


def reset(state: Optimizer) -> Optimizer:
    return copy.deepcopy(state).reset()


def make_optimizer(name, lr, **kwargs) -> Optimizer:
    table = {"gd": GD, "momentum": Momentum, "adam": Adam}
    try:
        cls = table[name.lower()]
    except KeyError:
        raise ContractError(f"unknown optimiser {name!r}; choose from {sorted(table)}") from None
    return cls(lr, **kwargs)
