"""Finite risk-averse MDP models: data layout, validation, JSON I/O and a
seeded random generator for tests.

Time runs over ``t = 1..T`` in finite mode; a stationary model carries one
layer that is reused at every ``t``.  State and successor references are
integer indices into ``Model.states``.  Stage costs are latent: each kernel
entry ``(successor, prob)`` carries its own cost ``C_t(x, a, successor)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import riskcore
from .distkit import Pmf, make_pmf
from .errors import (
    DistributionError,
    InadmissibleAction,
    ParseError,
    RiskSpecError,
    ValidationError,
)
from .riskcore import RiskSpec

FORMAT_VERSION = 1
ROW_TOL = 1e-12
COST_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Transition:
    """Kernel row ``P(t, x, a, .)`` together with the latent costs."""

    successors: np.ndarray  # int, distinct
    probs: np.ndarray
    costs: np.ndarray

    @classmethod
    def build(cls, successors, probs, costs) -> "Transition":
        succ = np.asarray(successors, dtype=np.int64).ravel()
        p = np.asarray(probs, dtype=float).ravel()
        c = np.asarray(costs, dtype=float).ravel()
        for arr in (succ, p, c):
            arr.setflags(write=False)
        return cls(succ, p, c)

    @classmethod
    def point(cls, successor: int, cost: float = 0.0) -> "Transition":
        return cls.build([successor], [1.0], [cost])

    def __eq__(self, other):
        return (
            isinstance(other, Transition)
            and np.array_equal(self.successors, other.successors)
            and np.array_equal(self.probs, other.probs)
            and np.array_equal(self.costs, other.costs)
        )

    __hash__ = None


@dataclass(frozen=True)
class StateLayer:
    """Admissible actions, per-action transitions and the risk spec at one (t, x)."""

    actions: tuple
    risk: RiskSpec
    transitions: tuple

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Model:
    states: tuple
    gamma: float
    horizon: Optional[int]  # None means stationary infinite horizon
    initial: Pmf  # over state indices
    risk0: RiskSpec
    cost_bound: float
    layers: tuple  # tuple of tuples of StateLayer

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "layers", tuple(tuple(layer) for layer in self.layers))
        diags = check_model(self)
        if diags:
            raise ValidationError(diags)

    @property
    def stationary(self) -> bool:
        return self.horizon is None

    @property
    def n_states(self) -> int:
        return len(self.states)

    def times(self) -> range:
        if self.stationary:
            raise ValueError("stationary models have no finite time grid")
        return range(1, self.horizon + 1)

    def layer(self, t: int) -> tuple:
        if self.stationary:
            return self.layers[0]
        if not (1 <= t <= self.horizon):
            raise IndexError(f"time {t} outside 1..{self.horizon}")
        return self.layers[t - 1]

    def at(self, t: int, x: int) -> StateLayer:
        return self.layer(t)[x]

    def actions(self, t: int, x: int) -> tuple:
        return self.at(t, x).actions

    def risk(self, t: int, x: int) -> RiskSpec:
        return self.at(t, x).risk

    def transition(self, t: int, x: int, a: int) -> Transition:
        sl = self.at(t, x)
        if not (0 <= a < len(sl.actions)):
            raise InadmissibleAction(f"action index {a} not admissible at t={t}, x={self.states[x]!r}")
        return sl.transitions[a]

    def kernel(self, t: int, x: int, a: int) -> Pmf:
        tr = self.transition(t, x, a)
        return make_pmf(zip(tr.successors.tolist(), tr.probs.tolist()))

    def cost(self, t: int, x: int, a: int, y: int) -> float:
        tr = self.transition(t, x, a)
        hit = np.flatnonzero(tr.successors == y)
        return float(tr.costs[hit[0]]) if hit.size else 0.0

    def as_finite(self, horizon: int) -> "Model":
        """Unroll a stationary model over ``horizon`` steps."""
        if not self.stationary:
            raise ValueError("model is already finite")
        return Model(
            states=self.states,
            gamma=self.gamma,
            horizon=int(horizon),
            initial=self.initial,
            risk0=self.risk0,
            cost_bound=self.cost_bound,
            layers=tuple(self.layers[0] for _ in range(horizon)),
        )

    def truncated(self, horizon: int) -> "Model":
        """Finite model keeping only the first ``horizon`` layers."""
        if self.stationary:
            return self.as_finite(horizon)
        if not (1 <= horizon <= self.horizon):
            raise ValueError(f"horizon {horizon} outside 1..{self.horizon}")
        if horizon == self.horizon:
            return self
        return Model(self.states, self.gamma, horizon, self.initial, self.risk0,
                     self.cost_bound, self.layers[:horizon])

    def with_layers(self, layers) -> "Model":
        return Model(self.states, self.gamma, self.horizon, self.initial, self.risk0,
                     self.cost_bound, layers)


def _layer_label(model, li):
    return "all" if model.stationary else li + 1


def check_model(model: Model) -> list:
    """Return a diagnostics list; empty when every invariant holds."""
    diags = []

    def bad(path, msg):
        diags.append({"path": path, "message": msg})

    n = len(model.states)
    if n == 0:
        bad("states", "model has no states")
        return diags
    if len(set(model.states)) != n:
        bad("states", "state identifiers must be unique")
    if not (isinstance(model.gamma, (int, float)) and 0.0 <= model.gamma <= 1.0):
        bad("gamma", f"discount {model.gamma!r} outside [0, 1]")
    if not (math.isfinite(model.cost_bound) and model.cost_bound >= 0):
        bad("cost_bound", "cost bound must be finite and >= 0")
    if model.stationary:
        if len(model.layers) != 1:
            bad("layers", "stationary models carry exactly one layer")
        if model.gamma >= 1.0:
            bad("gamma", "stationary (infinite-horizon) models need gamma < 1")
    else:
        if not (isinstance(model.horizon, int) and model.horizon >= 1):
            bad("mode.horizon", f"horizon must be a positive integer, got {model.horizon!r}")
        elif len(model.layers) != model.horizon:
            bad("layers", f"expected {model.horizon} layers, found {len(model.layers)}")
    init = model.initial.values
    if np.any(init != np.round(init)) or init[0] < 0 or init[-1] >= n:
        bad("initial", "initial law must sit on valid state indices")

    for li, layer in enumerate(model.layers):
        tl = _layer_label(model, li)
        if len(layer) != n:
            bad(f"layers[{li}]", f"layer t={tl} describes {len(layer)} states, expected {n}")
            continue
        for x, sl in enumerate(layer):
            where = f"layers[{li}].states[{x}]"
            who = f"(t={tl}, x={model.states[x]!r}"
            if not sl.actions:
                bad(f"{where}.actions", f"{who}): no admissible action")
            if len(set(sl.actions)) != len(sl.actions):
                bad(f"{where}.actions", f"{who}): duplicate action identifiers")
            if len(sl.transitions) != len(sl.actions):
                bad(f"{where}.transitions",
                    f"{who}): {len(sl.transitions)} transitions for {len(sl.actions)} actions")
            if model.stationary and not riskcore.is_normalized(sl.risk):
                bad(f"{where}.risk", f"{who}): infinite-horizon models need normalized risk measures")
            for a, tr in enumerate(sl.transitions):
                apath = f"{where}.transitions[{a}]"
                aname = sl.actions[a] if a < len(sl.actions) else a
                awho = f"{who}, a={aname!r})"
                if not (tr.successors.shape == tr.probs.shape == tr.costs.shape):
                    bad(apath, f"{awho}: kernel and costs have different lengths")
                    continue
                if tr.successors.size == 0:
                    bad(f"{apath}.kernel", f"{awho}: empty kernel row")
                    continue
                if np.any(tr.successors < 0) or np.any(tr.successors >= n):
                    bad(f"{apath}.kernel", f"{awho}: successor index out of range")
                if np.unique(tr.successors).size != tr.successors.size:
                    bad(f"{apath}.kernel", f"{awho}: repeated successor")
                if np.any(~np.isfinite(tr.probs)) or np.any(tr.probs < 0):
                    bad(f"{apath}.kernel", f"{awho}: negative or non-finite probability")
                elif abs(tr.probs.sum() - 1.0) > ROW_TOL:
                    bad(f"{apath}.kernel", f"{awho}: kernel row sums to {tr.probs.sum()!r}")
                if np.any(~np.isfinite(tr.costs)):
                    bad(f"{apath}.costs", f"{awho}: non-finite cost")
                elif np.any(np.abs(tr.costs) > model.cost_bound + COST_TOL):
                    bad(f"{apath}.costs",
                        f"{awho}: |cost| {np.abs(tr.costs).max()!r} exceeds bound {model.cost_bound!r}")
    return diags


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

_TOP_KEYS = {"format_version", "mode", "gamma", "cost_bound", "states", "initial", "risk0", "layers"}


def model_to_json(model: Model) -> dict:
    if model.stationary:
        mode = {"kind": "stationary"}
    else:
        mode = {"kind": "finite", "horizon": model.horizon}
    layers = []
    for li, layer in enumerate(model.layers):
        layers.append({
            "t": _layer_label(model, li),
            "states": [
                {
                    "actions": list(sl.actions),
                    "risk": riskcore.spec_to_json(sl.risk),
                    "transitions": [
                        {
                            "kernel": [[int(y), float(p)] for y, p in zip(tr.successors, tr.probs)],
                            "costs": tr.costs.tolist(),
                        }
                        for tr in sl.transitions
                    ],
                }
                for sl in layer
            ],
        })
    return {
        "format_version": FORMAT_VERSION,
        "mode": mode,
        "gamma": model.gamma,
        "cost_bound": model.cost_bound,
        "states": list(model.states),
        "initial": [[int(y), p] for y, p in model.initial],
        "risk0": riskcore.spec_to_json(model.risk0),
        "layers": layers,
    }


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, shortest round-trip floats."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def save_model(model: Model) -> str:
    return dumps(model_to_json(model))


def load_model(text: str) -> Model:
    """Parse and validate the JSON encoding of a model."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return model_from_json(doc)


def model_from_json(doc) -> Model:
    diags = []

    def bad(path, msg):
        diags.append({"path": path, "message": msg})

    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    extra = set(doc) - _TOP_KEYS
    if extra:
        bad("", f"unknown field(s) {sorted(extra)}")
    missing = _TOP_KEYS - set(doc)
    if missing:
        raise ValidationError([{"path": "", "message": f"missing field(s) {sorted(missing)}"}])
    if doc["format_version"] != FORMAT_VERSION:
        bad("format_version", f"unsupported format version {doc['format_version']!r}")

    mode = doc["mode"]
    horizon = None
    if not isinstance(mode, dict) or mode.get("kind") not in ("finite", "stationary"):
        raise ValidationError([{"path": "mode", "message": "mode must be {kind: finite|stationary}"}])
    if mode["kind"] == "finite":
        if set(mode) != {"kind", "horizon"} or not isinstance(mode["horizon"], int) \
                or isinstance(mode["horizon"], bool):
            raise ValidationError([{"path": "mode", "message": "finite mode needs an integer horizon"}])
        horizon = mode["horizon"]
    elif set(mode) != {"kind"}:
        bad("mode", "stationary mode takes no other fields")

    states = doc["states"]
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise ValidationError([{"path": "states", "message": "states must be a list of strings"}])

    try:
        initial = make_pmf([(float(y), float(p)) for y, p in doc["initial"]])
    except (DistributionError, TypeError, ValueError) as exc:
        raise ValidationError([{"path": "initial", "message": str(exc)}]) from exc

    try:
        risk0 = riskcore.spec_from_json(doc["risk0"])
    except RiskSpecError as exc:
        raise ValidationError([{"path": "risk0", "message": str(exc)}]) from exc

    layers_doc = doc["layers"]
    if not isinstance(layers_doc, list):
        raise ValidationError([{"path": "layers", "message": "layers must be a list"}])
    layers = []
    for li, ldoc in enumerate(layers_doc):
        lpath = f"layers[{li}]"
        if not isinstance(ldoc, dict) or set(ldoc) != {"t", "states"}:
            bad(lpath, "layer must have exactly the fields t and states")
            continue
        expected_t = "all" if horizon is None else li + 1
        if ldoc["t"] != expected_t:
            bad(f"{lpath}.t", f"expected t={expected_t!r}, found {ldoc['t']!r}")
        layer = []
        for x, sdoc in enumerate(ldoc["states"]):
            spath = f"{lpath}.states[{x}]"
            if not isinstance(sdoc, dict) or set(sdoc) != {"actions", "risk", "transitions"}:
                bad(spath, "state entry must have exactly the fields actions, risk, transitions")
                continue
            try:
                risk = riskcore.spec_from_json(sdoc["risk"])
            except RiskSpecError as exc:
                bad(f"{spath}.risk", str(exc))
                continue
            transitions = []
            ok = True
            for a, tdoc in enumerate(sdoc["transitions"]):
                tpath = f"{spath}.transitions[{a}]"
                try:
                    if set(tdoc) != {"kernel", "costs"}:
                        raise ValueError("transition must have exactly the fields kernel, costs")
                    succ = [int(y) for y, _ in tdoc["kernel"]]
                    probs = [float(p) for _, p in tdoc["kernel"]]
                    costs = [float(c) for c in tdoc["costs"]]
                except (TypeError, ValueError) as exc:
                    bad(tpath, str(exc))
                    ok = False
                    continue
                transitions.append(Transition.build(succ, probs, costs))
            if ok:
                layer.append(StateLayer(tuple(str(s) for s in sdoc["actions"]), risk, tuple(transitions)))
        layers.append(tuple(layer))
    if diags:
        raise ValidationError(diags)
    return Model(
        states=tuple(states),
        gamma=float(doc["gamma"]),
        horizon=horizon,
        initial=initial,
        risk0=risk0,
        cost_bound=float(doc["cost_bound"]),
        layers=tuple(layers),
    )


def validate_document(text: str) -> list:
    """Diagnostics for a model document (empty list when valid).

    Raises ParseError when the text is not JSON at all.
    """
    try:
        load_model(text)
    except ValidationError as exc:
        return exc.diagnostics
    return []


# ---------------------------------------------------------------------------
# random generator
# ---------------------------------------------------------------------------

def _random_eta(rng, max_atoms=3):
    k = int(rng.integers(1, max_atoms + 1))
    kappas = rng.uniform(0.0, 1.0, size=k)
    if rng.random() < 0.3:
        kappas[0] = 1.0
    w = rng.dirichlet(np.ones(k))
    return make_pmf(zip(kappas.tolist(), w.tolist()))


def random_spec(rng, kind="spectral") -> RiskSpec:
    """Random normalized risk spec of the given kind (``"mixed"`` picks one)."""
    if kind == "mixed":
        kind = ["spectral", "entropic", "kusuoka", "combo"][int(rng.integers(0, 4))]
    if kind == "spectral":
        return riskcore.Spectral(_random_eta(rng))
    if kind == "entropic":
        return riskcore.Entropic(float(rng.uniform(0.2, 3.0)))
    if kind == "kusuoka":
        k = int(rng.integers(1, 4))
        betas = [0.0] + rng.uniform(0.0, 0.3, size=k - 1).tolist()
        return riskcore.Kusuoka(tuple(riskcore.Scenario(_random_eta(rng), b) for b in betas))
    if kind == "combo":
        w = float(rng.uniform(0.1, 0.9))
        return riskcore.Combo(((w, random_spec(rng, "entropic")), (1.0 - w, random_spec(rng, "kusuoka"))))
    raise ValueError(f"unknown risk kind {kind!r}")


def random_model(
    seed: int,
    n_states: int,
    n_actions: int,
    horizon: Optional[int] = 3,
    *,
    gamma: float = 0.9,
    risk_kind: str = "spectral",
    max_successors: Optional[int] = None,
    varying_actions: bool = False,
) -> Model:
    """Seeded random model; ``horizon=None`` gives a stationary model.

    Costs are uniform on [-1, 1] (so ``cost_bound = 1``), kernel rows are
    Dirichlet draws over a random subset of successors.  With
    ``varying_actions`` each (t, x) gets between 1 and ``n_actions`` actions.
    """
    if n_states < 1 or n_actions < 1:
        raise ValueError("sizes must be >= 1")
    rng = np.random.default_rng(seed)
    max_succ = n_states if max_successors is None else min(max_successors, n_states)
    n_layers = 1 if horizon is None else horizon

    def state_layer():
        na = int(rng.integers(1, n_actions + 1)) if varying_actions else n_actions
        transitions = []
        for _ in range(na):
            k = int(rng.integers(1, max_succ + 1))
            succ = np.sort(rng.choice(n_states, size=k, replace=False))
            probs = rng.dirichlet(np.ones(k))
            costs = rng.uniform(-1.0, 1.0, size=k)
            transitions.append(Transition.build(succ, probs, costs))
        return StateLayer(tuple(f"a{i}" for i in range(na)), random_spec(rng, risk_kind), tuple(transitions))

    layers = tuple(tuple(state_layer() for _ in range(n_states)) for _ in range(n_layers))
    k0 = int(rng.integers(1, n_states + 1))
    init_states = np.sort(rng.choice(n_states, size=k0, replace=False))
    init_probs = rng.dirichlet(np.ones(k0))
    return Model(
        states=tuple(f"s{i}" for i in range(n_states)),
        gamma=float(gamma),
        horizon=horizon,
        initial=make_pmf(zip(init_states.tolist(), init_probs.tolist())),
        risk0=random_spec(rng, risk_kind),
        cost_bound=1.0,
        layers=layers,
    )


def appendix_a_model(gamma: float = 1.0) -> Model:
    """One-step model with a decision state and controls '0', '1' whose cost
    laws are {0: 0.9, 5: 0.1} and {0: 0.5, 1.4: 0.5}; the state risk is
    max{0.8 E + 0.2 AVaR_0.1, AVaR_0.5}."""
    rho = riskcore.kusuoka_spec([([(1.0, 0.8), (0.1, 0.2)], 0.0), ([(0.5, 1.0)], 0.0)])
    mean = riskcore.spectral_spec([(1.0, 1.0)])
    decide = StateLayer(
        ("0", "1"),
        rho,
        (
            Transition.build([1, 2], [0.9, 0.1], [0.0, 5.0]),
            Transition.build([1, 2], [0.5, 0.5], [0.0, 1.4]),
        ),
    )
    low = StateLayer(("stay",), mean, (Transition.point(1),))
    high = StateLayer(("stay",), mean, (Transition.point(2),))
    return Model(
        states=("decide", "low", "high"),
        gamma=float(gamma),
        horizon=1,
        initial=make_pmf([(0, 1.0)]),
        risk0=mean,
        cost_bound=5.0,
        layers=((decide, low, high),),
    )


def state_index(model: Model, state) -> int:
    try:
        return model.states.index(state)
    except ValueError:
        raise KeyError(f"unknown state {state!r}") from None


def action_index(model: Model, t: int, x: int, action) -> int:
    try:
        return model.actions(t, x).index(action)
    except ValueError:
        raise InadmissibleAction(f"action {action!r} not admissible at t={t}, x={model.states[x]!r}") from None

