"""Backward induction, value iteration and policy evaluation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bellman, riskcore
from .bellman import RandomizedPolicy
from .errors import BadArgs, MaxItersExceeded, NotNormalized, NotStationary
from .mdpmodel import Model

MIN_MAX_ITERS = 1000


@dataclass
class FiniteSolution:
    values: dict  # t -> array over states, t = 1..T
    j0: float
    policy: Optional[RandomizedPolicy] = None

    def to_json(self, model: Model) -> dict:
        out = {"values": _values_json(model, self.values), "j0": self.j0}
        if self.policy is not None:
            out["policy"] = self.policy.to_json(model)
        return out


@dataclass
class InfiniteSolution:
    values: np.ndarray
    policy: Optional[RandomizedPolicy]
    iters: int
    residual: float
    converged: bool
    j0: float
    iterates: list = field(default_factory=list)

    def to_json(self, model: Model) -> dict:
        out = {
            "values": _values_json(model, {None: self.values}),
            "j0": self.j0,
            "iters": self.iters,
            "residual": self.residual,
            "converged": self.converged,
        }
        if self.policy is not None:
            out["policy"] = self.policy.to_json(model)
        return out


def _values_json(model, values):
    return {
        ("all" if t is None else str(t)): {name: float(v[x]) for x, name in enumerate(model.states)}
        for t, v in values.items()
    }


@contextmanager
def _pool(workers):
    if workers is None or workers <= 1:
        yield None
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            yield ex


def _sweep(pool, fn, n):
    """``[fn(x) for x in range(n)]``, optionally on a thread pool (order kept)."""
    if pool is None:
        return [fn(x) for x in range(n)]
    return list(pool.map(fn, range(n)))


def _s_layer(model, v, t, mode, pool):
    res = _sweep(pool, lambda x: bellman.s_op(model, v, t, x, mode), model.n_states)
    return np.array([r[0] for r in res]), [r[1] for r in res]


def _h_layer(model, v, t, policy, pool):
    return np.array(_sweep(pool, lambda x: bellman.g_op(model, v, t, x, policy.weights(t, x)),
                           model.n_states))


def solve_finite(model: Model, mode: str = "auto", workers: Optional[int] = None) -> FiniteSolution:
    """Optimal values ``J*_t`` for ``t = T..1``, ``J*_0`` and the argmin policy."""
    if model.stationary:
        raise BadArgs("solve_finite needs a finite-horizon model; use as_finite(T) to unroll")
    v = np.zeros(model.n_states)
    values, table = {}, {}
    with _pool(workers) as pool:
        for t in range(model.horizon, 0, -1):
            v, lams = _s_layer(model, v, t, mode, pool)
            values[t] = v
            table[t] = lams
    policy = RandomizedPolicy({t: table[t] for t in sorted(table)})
    return FiniteSolution({t: values[t] for t in sorted(values)}, bellman.h0(model, v), policy)


def evaluate_policy_finite(model: Model, policy: RandomizedPolicy, horizon: Optional[int] = None,
                           workers: Optional[int] = None) -> FiniteSolution:
    """Values of a Markov policy by backward composition of the policy operators."""
    T = model.horizon if horizon is None else int(horizon)
    if model.stationary:
        if horizon is None:
            raise BadArgs("give a horizon to evaluate a stationary model over finitely many steps")
        model = model.as_finite(T)
    elif T != model.horizon:
        model = model.truncated(T)
    bellman.check_policy(model, policy, range(1, T + 1))
    v = np.zeros(model.n_states)
    values = {}
    with _pool(workers) as pool:
        for t in range(T, 0, -1):
            v = _h_layer(model, v, t, policy, pool)
            values[t] = v
    return FiniteSolution({t: values[t] for t in sorted(values)}, bellman.h0(model, v))


def effective_horizon(gamma: float, b: float, tol: float) -> int:
    """Smallest ``T >= 0`` with ``gamma**T * b / (1 - gamma) <= tol``."""
    if not (0.0 < gamma < 1.0) or b < 0 or not tol > 0:
        raise BadArgs("need 0 < gamma < 1, b >= 0 and tol > 0")
    bound = b / (1.0 - gamma)
    if bound <= tol:
        return 0
    T = max(0, math.ceil(math.log(tol / bound) / math.log(gamma)))
    # guard the float log against off-by-one in either direction
    while T > 0 and gamma ** (T - 1) * bound <= tol:
        T -= 1
    while gamma**T * bound > tol:
        T += 1
    return T


def _check_stationary(model):
    if not model.stationary:
        raise NotStationary("infinite-horizon routines need a stationary model")
    if not model.gamma < 1.0:
        raise NotStationary("infinite-horizon routines need gamma < 1")
    for sl in model.layers[0]:
        if not riskcore.is_normalized(sl.risk):
            raise NotNormalized("infinite-horizon routines need normalized risk measures")


def _default_max_iters(model, tol):
    if model.gamma == 0.0:
        return MIN_MAX_ITERS
    return max(MIN_MAX_ITERS, 10 * effective_horizon(model.gamma, model.cost_bound, tol))


def _iterate(model, step, tol, max_iters, keep_iterates, strict):
    """Fixed-point iteration from zero; stops once a step is at most tol*(1-gamma)/gamma."""
    g = model.gamma
    threshold = math.inf if g == 0.0 else tol * (1.0 - g) / g
    v = np.zeros(model.n_states)
    iterates = [v] if keep_iterates else []
    residual = math.inf
    extra = None
    for k in range(1, max_iters + 1):
        new, extra = step(v)
        residual = float(np.max(np.abs(new - v)))
        v = new
        if keep_iterates:
            iterates.append(v)
        if residual <= threshold:
            return v, extra, k, residual, True, iterates
    if strict:
        raise MaxItersExceeded(f"no convergence after {max_iters} iterations (last step {residual:.3e})")
    return v, extra, max_iters, residual, False, iterates


def solve_infinite(model: Model, tol: float = 1e-8, max_iters: Optional[int] = None, *,
                   mode: str = "auto", keep_iterates: bool = False, strict: bool = False,
                   workers: Optional[int] = None) -> InfiniteSolution:
    """Value iteration ``v <- S v`` from ``v = 0``.

    On return ``||v - J*|| <= tol`` whenever ``converged`` is true.  Hitting
    ``max_iters`` yields the last iterate with ``converged=False`` (or raises
    MaxItersExceeded when ``strict``).
    """
    _check_stationary(model)
    if not tol > 0:
        raise BadArgs("tol must be positive")
    max_iters = _default_max_iters(model, tol) if max_iters is None else int(max_iters)
    with _pool(workers) as pool:
        v, lams, k, residual, ok, iterates = _iterate(
            model, lambda v: _s_layer(model, v, 1, mode, pool), tol, max_iters, keep_iterates, strict)
    return InfiniteSolution(v, RandomizedPolicy({None: lams}), k, residual, ok,
                            bellman.h0(model, v), iterates)


def evaluate_policy_infinite(model: Model, policy: RandomizedPolicy, tol: float = 1e-8,
                             max_iters: Optional[int] = None, *, strict: bool = False,
                             workers: Optional[int] = None) -> InfiniteSolution:
    _check_stationary(model)
    bellman.check_policy(model, policy, [1])
    max_iters = _default_max_iters(model, tol) if max_iters is None else int(max_iters)
    with _pool(workers) as pool:
        v, _, k, residual, ok, iterates = _iterate(
            model, lambda v: (_h_layer(model, v, 1, policy, pool), None), tol, max_iters, False, strict)
    return InfiniteSolution(v, policy, k, residual, ok, bellman.h0(model, v), iterates)


def bellman_residual(model: Model, v: np.ndarray, mode: str = "auto") -> float:
    """``||S v - v||`` for a stationary model."""
    new, _ = _s_layer(model, np.asarray(v, dtype=float), 1, mode, None)
    return float(np.max(np.abs(new - v)))
