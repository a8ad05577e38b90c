"""Brute-force reference computations used to cross-check the solver.

Nothing here calls into :mod:`riskmdp.bellman` or :mod:`riskmdp.solver`.
Nested risks are computed by walking the explicit tree of histories, policy
optima by exhaustive enumeration, and simplex minima by dense lattices.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import riskcore
from .distkit import Pmf, make_pmf, mix
from .errors import EnumerationTooLarge, TooManyActions, TreeTooLarge
from .mdpmodel import Model

TREE_NODE_CAP = 2_000_000
POLICY_CAP = 1_000_000
GRID_POINT_CAP = 2_000_000


# ---------------------------------------------------------------------------
# policies as history -> weights maps
# ---------------------------------------------------------------------------

def _as_history_policy(policy) -> Callable:
    """Accept a RandomizedPolicy-like object (``weights(t, x)``) or a callable
    taking the history tuple ``(x1, a1, x2, ..., xt)``."""
    if hasattr(policy, "weights"):
        return lambda h: policy.weights(len(h) // 2 + 1, h[-1])
    return policy


def tree_size(model: Model, horizon: int) -> int:
    """Upper bound on the number of history nodes of the trajectory tree."""
    total, layer = 0, len(model.initial)
    for t in range(1, horizon + 1):
        total += layer
        fan = max(sum(tr.successors.size for tr in model.at(t, x).transitions) for x in range(model.n_states))
        layer *= fan
    return total


def _finite_view(model, horizon):
    if horizon is None:
        if model.stationary:
            raise ValueError("a horizon is required for stationary models")
        return model, model.horizon
    if model.stationary:
        return model.as_finite(horizon), horizon
    if horizon > model.horizon:
        raise ValueError(f"horizon {horizon} exceeds the model's {model.horizon}")
    return model, horizon


def tree_risk(model: Model, policy, horizon: Optional[int] = None, *, node_cap: int = TREE_NODE_CAP) -> float:
    """Nested risk of ``policy`` by recursion over the full history tree.

    Each node applies the state's risk measure to the explicit law of
    ``cost + gamma * (child risk)`` over all (action, successor) branches.
    """
    model, T = _finite_view(model, horizon)
    size = tree_size(model, T)
    if size > node_cap:
        raise TreeTooLarge(f"trajectory tree has up to {size} nodes (cap {node_cap})")
    pol = _as_history_policy(policy)
    g = model.gamma

    def node(h):
        t = len(h) // 2 + 1
        x = h[-1]
        w = np.asarray(pol(h), dtype=float)
        atoms = []
        for a, wa in enumerate(w):
            if wa <= 0:
                continue
            tr = model.transition(t, x, a)
            for y, p, c in zip(tr.successors.tolist(), tr.probs.tolist(), tr.costs.tolist()):
                tail = node(h + (a, y)) if t < T else 0.0
                atoms.append((c + g * tail, wa * p))
        return riskcore.evaluate(model.risk(t, x), make_pmf(atoms))

    root = [(g * node((int(x1),)), p) for x1, p in model.initial]
    return riskcore.evaluate(model.risk0, make_pmf(root))


# ---------------------------------------------------------------------------
# simplex lattices
# ---------------------------------------------------------------------------

def simplex_grid(n: int, resolution: int):
    """Simplex points with coordinates in multiples of ``1/resolution``, lexicographic order."""
    for combo in itertools.product(range(resolution + 1), repeat=n - 1):
        s = sum(combo)
        if s <= resolution:
            yield tuple(k / resolution for k in combo) + ((resolution - s) / resolution,)


def _grid_count(n, resolution):
    return math.comb(resolution + n - 1, n - 1)


def grid_simplex_min(pmfs: Sequence[Pmf], spec, resolution: int):
    """Exhaustive lattice minimum of ``lam -> spec(mix(lam, pmfs))``.

    ``resolution`` is the number of lattice steps per unit (100 means 1/100).
    Returns ``(lam, value)``; ties resolve to the first point in lexicographic order.
    """
    n = len(pmfs)
    if n > 4 and _grid_count(n, resolution) > GRID_POINT_CAP:
        raise TooManyActions(f"{n} actions at resolution 1/{resolution} is beyond the oracle's reach")
    best, best_val = None, math.inf
    for lam in simplex_grid(n, resolution):
        val = riskcore.evaluate(spec, mix(lam, pmfs))
        if val < best_val:
            best, best_val = np.array(lam), val
    return best, best_val


# ---------------------------------------------------------------------------
# policy enumeration
# ---------------------------------------------------------------------------

def _weights_grid(n, resolution):
    return [np.array(lam) for lam in simplex_grid(n, resolution)]


def count_history_policies(model: Model, horizon: Optional[int] = None, resolution: int = 1) -> int:
    """Number of distinct history-dependent grid policies on reachable histories."""
    model, T = _finite_view(model, horizon)

    def count(h):
        t = len(h) // 2 + 1
        total = 0
        for lam in _weights_grid(len(model.actions(t, h[-1])), resolution):
            prod = 1
            if t < T:
                for a in np.flatnonzero(lam > 0):
                    for y in model.transition(t, h[-1], int(a)).successors.tolist():
                        prod *= count(h + (int(a), y))
            total += prod
            if total > POLICY_CAP:
                return total
        return total

    out = 1
    for x1, _ in model.initial:
        out *= count((int(x1),))
        if out > POLICY_CAP:
            break
    return out


def _history_assignments(model, T, resolution, h):
    """Yield dicts history -> weights covering every history reachable from ``h``."""
    t = len(h) // 2 + 1
    x = h[-1]
    for lam in _weights_grid(len(model.actions(t, x)), resolution):
        children = []
        if t < T:
            for a in np.flatnonzero(lam > 0):
                for y in model.transition(t, x, int(a)).successors.tolist():
                    children.append(h + (int(a), y))
        subs = [list(_history_assignments(model, T, resolution, c)) for c in children]
        for combo in itertools.product(*subs):
            plan = {h: lam}
            for part in combo:
                plan.update(part)
            yield plan


def enumerate_history_policies(model: Model, horizon: Optional[int] = None, resolution: int = 1,
                               *, cap: int = POLICY_CAP):
    """Minimal tree risk over history-dependent policies whose action weights
    lie on the ``1/resolution`` simplex lattice (``resolution=1``: deterministic).

    Returns ``(min_value, plan)`` where ``plan`` maps history tuples to weights.
    """
    model, T = _finite_view(model, horizon)
    n = count_history_policies(model, T, resolution)
    if n > cap:
        raise EnumerationTooLarge(f"more than {cap} history-dependent policies")
    roots = [int(x1) for x1, _ in model.initial]
    per_root = [list(_history_assignments(model, T, resolution, (x1,))) for x1 in roots]
    best, best_plan = math.inf, None
    for combo in itertools.product(*per_root):
        plan = {}
        for part in combo:
            plan.update(part)
        val = tree_risk(model, plan.__getitem__, T)
        if val < best:
            best, best_plan = val, plan
    return best, best_plan


def enumerate_markov_policies(model: Model, horizon: Optional[int] = None, resolution: int = 8,
                              *, cap: int = 50_000_000):
    """Minimal nested risk over Markov policies with weights on the ``1/resolution`` lattice.

    Every combination of per-(t, x) lattice weights is covered.  Layers are
    evaluated backwards and shared tails are reused, so the cost grows with the
    number of distinct value layers rather than whole policies.  Returns the
    minimal ``J_0`` and the minimizing policy as ``{t: [weights per state]}``.
    """
    model, T = _finite_view(model, horizon)
    grids = {(t, x): _weights_grid(len(model.actions(t, x)), resolution)
             for t in range(1, T + 1) for x in range(model.n_states)}
    total = 1
    for g in grids.values():
        total *= len(g)
    if total > cap:
        raise EnumerationTooLarge(f"{total} Markov grid policies exceed the cap of {cap}")
    g = model.gamma

    def state_value(t, x, lam, v):
        atoms = []
        for a, wa in enumerate(lam):
            if wa <= 0:
                continue
            tr = model.transition(t, x, a)
            for y, p, c in zip(tr.successors.tolist(), tr.probs.tolist(), tr.costs.tolist()):
                atoms.append((c + g * v[y], wa * p))
        return riskcore.evaluate(model.risk(t, x), make_pmf(atoms))

    # each entry: (value vector over states, {t: [lam per state]})
    layers = [(np.zeros(model.n_states), {})]
    for t in range(T, 0, -1):
        nxt = []
        for v, plan in layers:
            options = [[(state_value(t, x, lam, v), lam) for lam in grids[(t, x)]]
                       for x in range(model.n_states)]
            for choice in itertools.product(*options):
                new_plan = dict(plan)
                new_plan[t] = [lam for _, lam in choice]
                nxt.append((np.array([val for val, _ in choice]), new_plan))
        layers = nxt
    best, best_plan = math.inf, None
    for v, plan in layers:
        root = make_pmf([(g * v[int(x1)], p) for x1, p in model.initial])
        val = riskcore.evaluate(model.risk0, root)
        if val < best:
            best, best_plan = val, plan
    return best, best_plan


# ---------------------------------------------------------------------------
# AVaR by quantile integration and the two-control example
# ---------------------------------------------------------------------------

def avar_quantile_integral(kappa: float, mu: Pmf) -> float:
    """``(1/kappa) * integral of the quantile function over [1 - kappa, 1]``,
    integrated piecewise between CDF breakpoints; ``kappa = 0`` gives the ess sup."""
    lo = 1.0 - kappa
    if kappa == 0.0 or lo == 1.0:
        # level below float resolution around 1: the tail is the top atom
        return float(mu.values[-1])
    cum = np.cumsum(mu.probs)
    cum[-1] = 1.0
    edges = np.unique(np.concatenate(([lo, 1.0], cum[(cum > lo) & (cum < 1.0)])))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        idx = min(int(np.searchsorted(cum, mid, side="left")), len(mu) - 1)
        total += (b - a) * float(mu.values[idx])
    # the float interval [1 - kappa, 1] may not have length exactly kappa
    return total / (1.0 - lo)


def avar_qgrid(kappa: float, mu: Pmf, n: int = 200_000) -> float:
    """Midpoint-rule approximation on a uniform grid of quantile levels."""
    if kappa == 0.0:
        return float(mu.values[-1])
    u = 1.0 - kappa + kappa * (np.arange(n) + 0.5) / n
    cum = np.cumsum(mu.probs)
    cum[-1] = 1.0
    idx = np.minimum(np.searchsorted(cum, u, side="left"), len(mu) - 1)
    return float(mu.values[idx].mean())


APPENDIX_A_SCENARIOS = (((1.0, 0.8), (0.1, 0.2)), ((0.5, 1.0),))


def appendix_a_spec():
    return riskcore.kusuoka_spec([(list(eta), 0.0) for eta in APPENDIX_A_SCENARIOS])


def appendix_a_laws():
    """The two control laws and their half-half mixture."""
    c0 = make_pmf([(0.0, 0.9), (5.0, 0.1)])
    c1 = make_pmf([(0.0, 0.5), (1.4, 0.5)])
    return c0, c1, make_pmf([(0.0, 0.7), (1.4, 0.25), (5.0, 0.05)])


def appendix_a():
    """Risk of control 0, control 1 and the fair coin between them."""
    spec = appendix_a_spec()
    return tuple(riskcore.evaluate(spec, mu) for mu in appendix_a_laws())


def appendix_a_by_quantiles():
    """Same three numbers with every AVaR computed by quantile integration."""
    def rho(mu):
        return max(sum(w * avar_quantile_integral(k, mu) for k, w in eta) for eta in APPENDIX_A_SCENARIOS)
    return tuple(rho(mu) for mu in appendix_a_laws())
