"""One-step operators on value layers.

``v`` is always a float array indexed by state.  For a randomized action
``lam`` (weights over the admissible actions at ``(t, x)``) the outcome law is
the mixture over actions of the pushforward of the kernel row under
``y -> cost(t, x, a, y) + gamma * v[y]``; the operators below apply the
state's risk measure to that law and minimize over the action simplex.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from . import distkit, riskcore
from .distkit import Pmf
from .errors import BadWeights, NoActions, PolicyIncomplete
from .mdpmodel import Model
from .riskcore import RiskSpec

# simplex search knobs
GRID_RES_SMALL = 32  # lattice 1/32 for up to 4 actions
GRID_RES_LARGE = 8  # lattice 1/8 above that
SMALL_ACTION_COUNT = 4
MAX_LATTICE_POINTS = 250_000
REFINE_STEP = 1e-6
WEIGHT_DECIMALS = 9
TIE_TOL = 1e-12


class RandomizedPolicy:
    """Per (t, state) weight vectors over the admissible actions.

    ``table`` maps a time index to a list with one weight array per state.
    Stationary policies use the single key ``None``.
    """

    def __init__(self, table: dict):
        self.table = {t: [np.asarray(w, dtype=float) for w in row] for t, row in table.items()}

    @property
    def stationary(self) -> bool:
        return set(self.table) == {None}

    def weights(self, t: int, x: int) -> np.ndarray:
        row = self.table[None] if self.stationary else self.table.get(t)
        if row is None:
            raise PolicyIncomplete(f"policy has no entry for t={t}")
        return row[x]

    def __eq__(self, other):
        if not isinstance(other, RandomizedPolicy) or set(self.table) != set(other.table):
            return False
        return all(
            len(self.table[t]) == len(other.table[t])
            and all(np.array_equal(a, b) for a, b in zip(self.table[t], other.table[t]))
            for t in self.table
        )

    __hash__ = None

    def __repr__(self):
        return f"RandomizedPolicy(times={sorted(self.table, key=lambda t: -1 if t is None else t)})"

    # constructors -----------------------------------------------------------
    @classmethod
    def _build(cls, model: Model, times, make):
        if model.stationary:
            keys = [None]
        else:
            keys = list(times) if times is not None else list(model.times())
        return cls({
            t: [make(t, x, len(model.actions(1 if t is None else t, x))) for x in range(model.n_states)]
            for t in keys
        })

    @classmethod
    def uniform(cls, model: Model, times=None) -> "RandomizedPolicy":
        return cls._build(model, times, lambda t, x, n: np.full(n, 1.0 / n))

    @classmethod
    def deterministic(cls, model: Model, choose=None, times=None) -> "RandomizedPolicy":
        """Dirac policy; ``choose(t, x, n_actions)`` returns the action index (default 0)."""
        def make(t, x, n):
            w = np.zeros(n)
            w[0 if choose is None else choose(t, x, n)] = 1.0
            return w
        return cls._build(model, times, make)

    @classmethod
    def random(cls, model: Model, rng: np.random.Generator, times=None,
               p_vertex: float = 0.3) -> "RandomizedPolicy":
        def make(t, x, n):
            if rng.random() < p_vertex:
                w = np.zeros(n)
                w[int(rng.integers(0, n))] = 1.0
                return w
            return rng.dirichlet(np.ones(n))
        return cls._build(model, times, make)

    # json --------------------------------------------------------------------
    def to_json(self, model: Model) -> dict:
        out = {}
        for t, row in self.table.items():
            key = "all" if t is None else str(t)
            tt = 1 if t is None else t
            out[key] = {
                model.states[x]: [[model.actions(tt, x)[a], float(w[a])] for a in range(len(w)) if w[a] > 0]
                for x, w in enumerate(row)
            }
        return out

    @classmethod
    def from_json(cls, model: Model, data: dict) -> "RandomizedPolicy":
        if not isinstance(data, dict):
            raise PolicyIncomplete("policy must be an object keyed by time")
        table = {}
        for key, per_state in data.items():
            if key == "all":
                t = None
            else:
                try:
                    t = int(key)
                except ValueError:
                    raise PolicyIncomplete(f"bad policy time key {key!r}") from None
            if (t is None) != model.stationary:
                raise PolicyIncomplete(f"policy time key {key!r} does not match the model mode")
            tt = 1 if t is None else t
            if t is not None and not (1 <= t <= model.horizon):
                raise PolicyIncomplete(f"policy time {t} outside 1..{model.horizon}")
            row = []
            for x, name in enumerate(model.states):
                if name not in per_state:
                    raise PolicyIncomplete(f"policy misses state {name!r} at t={key}")
                acts = model.actions(tt, x)
                w = np.zeros(len(acts))
                for action, weight in per_state[name]:
                    if action not in acts:
                        raise PolicyIncomplete(f"action {action!r} not admissible at t={key}, x={name!r}")
                    w[acts.index(action)] += float(weight)
                row.append(w)
            extra = set(per_state) - set(model.states)
            if extra:
                raise PolicyIncomplete(f"policy names unknown states {sorted(extra)}")
            table[t] = row
        return cls(table)


def check_policy(model: Model, policy: RandomizedPolicy, times) -> None:
    """Raise PolicyIncomplete unless ``policy`` covers every (t, x) for ``times``."""
    for t in times:
        for x in range(model.n_states):
            try:
                w = policy.weights(t, x)
            except (KeyError, IndexError, PolicyIncomplete):
                raise PolicyIncomplete(f"policy undefined at t={t}, x={model.states[x]!r}") from None
            n = len(model.actions(t, x))
            if w.shape != (n,):
                raise PolicyIncomplete(f"policy at t={t}, x={model.states[x]!r} has {w.size} weights for {n} actions")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise PolicyIncomplete(f"policy at t={t}, x={model.states[x]!r} is not a probability vector")


# ---------------------------------------------------------------------------
# outcome laws and operators
# ---------------------------------------------------------------------------

def outcome_pmf(model: Model, v: np.ndarray, t: int, x: int, a: int) -> Pmf:
    """Law of ``cost(t, x, a, Y) + gamma * v[Y]`` with ``Y ~ P(t, x, a, .)``."""
    tr = model.transition(t, x, a)
    return distkit.pushforward(tr.costs + model.gamma * v[tr.successors], tr.probs)


def outcome_pmfs(model: Model, v: np.ndarray, t: int, x: int) -> list:
    return [outcome_pmf(model, v, t, x, a) for a in range(len(model.actions(t, x)))]


def _check_lambda(lam, n) -> np.ndarray:
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.shape[0] != n:
        raise BadWeights(f"{lam.shape[0]} weights for {n} admissible actions")
    if np.any(~np.isfinite(lam)) or np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
        raise BadWeights("action weights must form a probability vector")
    return lam


def tilde_p(model: Model, v: np.ndarray, t: int, x: int, lam) -> Pmf:
    n = len(model.actions(t, x))
    lam = _check_lambda(lam, n)
    active = [a for a in range(n) if lam[a] > 0]
    pmfs = [outcome_pmf(model, v, t, x, a) for a in active]
    return distkit.mix(lam[active] / lam[active].sum(), pmfs)


def g_op(model: Model, v: np.ndarray, t: int, x: int, lam) -> float:
    return riskcore.evaluate(model.risk(t, x), tilde_p(model, v, t, x, lam))


def h0(model: Model, v: np.ndarray) -> float:
    """Initial-stage functional: risk0 of ``gamma * v[Y]`` with ``Y ~ initial``."""
    ys = model.initial.values.astype(np.int64)
    law = distkit.pushforward(model.gamma * np.asarray(v, dtype=float)[ys], model.initial.probs)
    return riskcore.evaluate(model.risk0, law)


def h_policy(model: Model, v: np.ndarray, t: int, policy: RandomizedPolicy) -> np.ndarray:
    return np.array([g_op(model, v, t, x, policy.weights(t, x)) for x in range(model.n_states)])


def s_op(model: Model, v: np.ndarray, t: int, x: int, mode: str = "auto"):
    """Bellman minimum at (t, x); returns ``(value, weights)``."""
    lam, value = simplex_min(outcome_pmfs(model, v, t, x), model.risk(t, x), mode)
    return value, lam


# ---------------------------------------------------------------------------
# simplex minimization
# ---------------------------------------------------------------------------

def _common_support(pmfs: Sequence[Pmf]):
    """Merged support ``z`` and a matrix ``Q`` with one probability row per law."""
    allv = np.concatenate([p.values for p in pmfs])
    order = np.sort(allv)
    starts = np.concatenate(([True], np.diff(order) > distkit.MERGE_TOL))
    z = order[starts]
    Q = np.zeros((len(pmfs), z.shape[0]))
    for k, p in enumerate(pmfs):
        idx = np.searchsorted(z, p.values + distkit.MERGE_TOL, side="right") - 1
        np.add.at(Q[k], idx, p.probs)
    return z, Q


def lattice(n: int, res: int) -> np.ndarray:
    """All points of the simplex with coordinates in ``{0, 1/res, ..., 1}``,
    in lexicographically increasing order."""
    if n == 1:
        return np.ones((1, 1))
    pts = []
    # bars positions in increasing order give coordinates in lexicographic order of the
    # reversed composition, so build compositions directly instead
    def rec(prefix, remaining, slots):
        if slots == 1:
            pts.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)
    rec([], res, n)
    return np.asarray(pts, dtype=float) / res


def lattice_size(n: int, res: int) -> int:
    return math.comb(res + n - 1, n - 1)


def default_resolution(n: int) -> int:
    res = GRID_RES_SMALL if n <= SMALL_ACTION_COUNT else GRID_RES_LARGE
    while res > 1 and lattice_size(n, res) > MAX_LATTICE_POINTS:
        res -= 1
    return res


def _round_weights(lam: np.ndarray) -> np.ndarray:
    out = np.round(lam, WEIGHT_DECIMALS)
    out[out < 0] = 0.0
    out[int(np.argmax(out))] += 1.0 - out.sum()
    return out


def _vertex_min(pmfs, spec):
    vals = np.array([riskcore.evaluate(spec, p) for p in pmfs])
    best = int(np.flatnonzero(vals <= vals.min() + TIE_TOL)[0])
    lam = np.zeros(len(pmfs))
    lam[best] = 1.0
    return lam, float(vals[best])


def _refine(spec, z, Q, lam, val, step, min_step):
    n = lam.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    while step >= min_step:
        cands = []
        for i, j in pairs:
            d = min(step, lam[i])
            if d <= 0:
                continue
            c = lam.copy()
            c[i] -= d
            c[j] += d
            cands.append(c)
        if not cands:
            break
        C = np.asarray(cands)
        vals = riskcore.evaluate_rows(spec, z, C @ Q)
        k = int(np.argmin(vals))
        if vals[k] < val - 1e-15:
            lam, val = C[k], float(vals[k])
        else:
            step /= 2.0
    return lam, val


def simplex_min(pmfs: Sequence[Pmf], spec: RiskSpec, mode: str = "auto",
                resolution: Optional[int] = None, refine_step: float = REFINE_STEP):
    """Minimize ``lam -> spec(mix(lam, pmfs))`` over the probability simplex.

    ``mode="vertex"`` only compares the pure actions, ``"grid"`` scans a
    simplex lattice and refines the best point by pairwise mass transfers,
    ``"auto"`` picks vertex search when the spec is certified
    mixture-quasiconcave.  Returns ``(weights, value)``.
    """
    n = len(pmfs)
    if n == 0:
        raise NoActions("no admissible action to optimize over")
    if mode not in ("auto", "vertex", "grid"):
        raise ValueError(f"unknown simplex mode {mode!r}")
    if n == 1:
        return np.ones(1), riskcore.evaluate(spec, pmfs[0])
    if mode == "auto":
        mode = "vertex" if riskcore.is_mixture_quasiconcave(spec) else "grid"
    v_lam, v_val = _vertex_min(pmfs, spec)
    if mode == "vertex":
        return v_lam, v_val

    res = default_resolution(n) if resolution is None else int(resolution)
    z, Q = _common_support(pmfs)
    L = lattice(n, res)
    vals = riskcore.evaluate_rows(spec, z, L @ Q)
    k = int(np.flatnonzero(vals <= vals.min() + TIE_TOL)[0])
    lam, val = _refine(spec, z, Q, L[k].copy(), float(vals[k]), 1.0 / res, refine_step)
    lam = _round_weights(lam)
    active = np.flatnonzero(lam > 0)
    value = riskcore.evaluate(spec, distkit.mix(lam[active], [pmfs[a] for a in active]))
    if active.shape[0] == 1 or value >= v_val:
        # a pure action is at least as good; report it exactly
        return v_lam, v_val
    return lam, value
