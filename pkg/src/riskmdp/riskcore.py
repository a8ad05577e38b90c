"""Distributional convex risk measures evaluated on :class:`Pmf` values.

Four spec kinds are supported: entropic, spectral (a mixture of AVaR
levels), Kusuoka-type (worst penalised spectral measure over a finite list
of scenarios) and weighted combinations of the above.

Each evaluator also has a batched form working on one support vector and a
matrix of probability rows; :mod:`riskmdp.bellman` uses it to score many
randomized actions at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import distkit
from .distkit import Pmf
from .errors import BadEta, BadLevel, BadTau, EmptyScenarios, EntropicOverflow, RiskSpecError

ENTROPIC_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class Entropic:
    tau: float

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise BadTau(f"entropic tau must be a positive finite number, got {self.tau!r}")


@dataclass(frozen=True, eq=False)
class Spectral:
    eta: Pmf

    def __post_init__(self):
        _check_eta(self.eta)

    def __eq__(self, other):
        return isinstance(other, Spectral) and self.eta == other.eta

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Scenario:
    eta: Pmf
    beta: float = 0.0

    def __post_init__(self):
        _check_eta(self.eta)
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise RiskSpecError(f"penalty beta must be finite and >= 0, got {self.beta!r}")

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.eta == other.eta and self.beta == other.beta

    __hash__ = None


@dataclass(frozen=True)
class Kusuoka:
    scenarios: tuple

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        if not self.scenarios:
            raise EmptyScenarios("Kusuoka spec needs at least one scenario")
        for sc in self.scenarios:
            if not isinstance(sc, Scenario):
                raise RiskSpecError(f"expected Scenario, got {type(sc).__name__}")

    __hash__ = None


@dataclass(frozen=True)
class Combo:
    terms: tuple  # of (weight, spec)

    def __post_init__(self):
        terms = tuple((float(w), s) for w, s in self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise RiskSpecError("combination needs at least one term")
        weights = np.array([w for w, _ in terms])
        if np.any(~np.isfinite(weights)) or np.any(weights < 0):
            raise RiskSpecError("combination weights must be finite and >= 0")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise RiskSpecError(f"combination weights sum to {weights.sum()!r}, not 1")

    __hash__ = None


RiskSpec = Union[Entropic, Spectral, Kusuoka, Combo]


def _check_eta(eta):
    if not isinstance(eta, Pmf):
        raise BadEta("eta must be a Pmf on [0, 1]")
    if eta.values[0] < 0.0 or eta.values[-1] > 1.0:
        raise BadEta(f"eta support {eta.values.tolist()} leaves [0, 1]")


def spectral_spec(pairs) -> Spectral:
    """Convenience: ``Spectral`` from ``[(kappa, weight), ...]``."""
    return Spectral(distkit.make_pmf(pairs))


def kusuoka_spec(scenarios) -> Kusuoka:
    """Convenience: ``Kusuoka`` from ``[([(kappa, weight), ...], beta), ...]``."""
    return Kusuoka(tuple(Scenario(distkit.make_pmf(eta), float(beta)) for eta, beta in scenarios))


def is_normalized(spec: RiskSpec) -> bool:
    """Whether ``spec`` assigns zero risk to the point mass at 0."""
    if isinstance(spec, (Entropic, Spectral)):
        return True
    if isinstance(spec, Kusuoka):
        return min(sc.beta for sc in spec.scenarios) == 0.0
    if isinstance(spec, Combo):
        return all(is_normalized(s) for w, s in spec.terms if w > 0)
    raise TypeError(f"unknown risk spec {spec!r}")


def is_mixture_quasiconcave(spec: RiskSpec) -> bool:
    """Static certificate that mixing two laws never lowers the risk below both.

    Entropic and single-scenario measures are concave along mixtures, and
    that property survives convex combination.  Multi-scenario Kusuoka specs
    are not covered.
    """
    if isinstance(spec, (Entropic, Spectral)):
        return True
    if isinstance(spec, Kusuoka):
        return len(spec.scenarios) == 1
    if isinstance(spec, Combo):
        return all(is_mixture_quasiconcave(s) for w, s in spec.terms if w > 0)
    raise TypeError(f"unknown risk spec {spec!r}")


# ---------------------------------------------------------------------------
# batched evaluators: z is a sorted support, P has one probability row per law
# ---------------------------------------------------------------------------

def _avar_rows(kappa: float, z: np.ndarray, P: np.ndarray) -> np.ndarray:
    if kappa == 1.0:
        return P @ z
    if kappa == 0.0:
        # largest atom carrying mass in each row
        last = z.shape[0] - 1 - np.argmax((P > 0)[:, ::-1], axis=1)
        return z[last]
    # mass strictly above each atom
    above = np.cumsum(P[:, ::-1], axis=1)[:, ::-1] - P
    taken = np.clip(kappa - above, 0.0, P)
    return (taken / kappa) @ z


def _entropic_rows(tau: float, z: np.ndarray, P: np.ndarray) -> np.ndarray:
    live = P > 0
    zmax = np.where(live, z, -np.inf).max(axis=1)
    zmin = np.where(live, z, np.inf).min(axis=1)
    if np.any(tau * (zmax - zmin) > ENTROPIC_EXP_LIMIT):
        raise EntropicOverflow(
            f"tau * support range exceeds {ENTROPIC_EXP_LIMIT}; entropic value would overflow"
        )
    with np.errstate(under="ignore"):
        w = np.exp(tau * (z[None, :] - zmax[:, None]))
    return zmax + np.log(np.einsum("ij,ij->i", P, w)) / tau


def _spectral_rows(eta: Pmf, z, P) -> np.ndarray:
    out = np.zeros(P.shape[0])
    for kappa, weight in eta:
        out += weight * _avar_rows(kappa, z, P)
    return out


def evaluate_rows(spec: RiskSpec, z: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Risk of every law ``(z, P[i])``; ``z`` ascending, rows of ``P`` sum to 1."""
    if isinstance(spec, Entropic):
        return _entropic_rows(spec.tau, z, P)
    if isinstance(spec, Spectral):
        return _spectral_rows(spec.eta, z, P)
    if isinstance(spec, Kusuoka):
        vals = [_spectral_rows(sc.eta, z, P) - sc.beta for sc in spec.scenarios]
        return np.max(vals, axis=0)
    if isinstance(spec, Combo):
        out = np.zeros(P.shape[0])
        for w, s in spec.terms:
            if w > 0:
                out += w * evaluate_rows(s, z, P)
        return out
    raise TypeError(f"unknown risk spec {spec!r}")


# ---------------------------------------------------------------------------
# single-law API
# ---------------------------------------------------------------------------

def avar(kappa: float, mu: Pmf) -> float:
    """Average value-at-risk: mean of the worst ``kappa`` upper tail.

    ``kappa = 1`` gives the mean and ``kappa = 0`` the essential supremum.
    """
    if not (0.0 <= kappa <= 1.0):
        raise BadLevel(f"AVaR level must lie in [0, 1], got {kappa!r}")
    return float(_avar_rows(float(kappa), mu.values, mu.probs[None, :])[0])


def entropic(tau: float, mu: Pmf) -> float:
    if not (math.isfinite(tau) and tau > 0):
        raise BadTau(f"entropic tau must be a positive finite number, got {tau!r}")
    return float(_entropic_rows(float(tau), mu.values, mu.probs[None, :])[0])


def spectral(eta: Pmf, mu: Pmf) -> float:
    _check_eta(eta)
    return float(_spectral_rows(eta, mu.values, mu.probs[None, :])[0])


def kusuoka(scenarios: Sequence, mu: Pmf) -> float:
    """Worst penalised spectral value; ``scenarios`` are ``Scenario`` objects
    or ``(eta, beta)`` pairs."""
    if len(scenarios) == 0:
        raise EmptyScenarios("Kusuoka evaluation needs at least one scenario")
    scs = [sc if isinstance(sc, Scenario) else Scenario(sc[0], float(sc[1])) for sc in scenarios]
    return evaluate(Kusuoka(tuple(scs)), mu)


def evaluate(spec: RiskSpec, mu: Pmf) -> float:
    return float(evaluate_rows(spec, mu.values, mu.probs[None, :])[0])


# ---------------------------------------------------------------------------
# JSON encoding
# ---------------------------------------------------------------------------

def spec_to_json(spec: RiskSpec) -> dict:
    if isinstance(spec, Entropic):
        return {"kind": "entropic", "tau": spec.tau}
    if isinstance(spec, Spectral):
        return {"kind": "spectral", "eta": spec.eta.to_json()}
    if isinstance(spec, Kusuoka):
        return {
            "kind": "kusuoka",
            "scenarios": [{"eta": sc.eta.to_json(), "beta": sc.beta} for sc in spec.scenarios],
        }
    if isinstance(spec, Combo):
        return {
            "kind": "combo",
            "terms": [{"weight": w, "spec": spec_to_json(s)} for w, s in spec.terms],
        }
    raise TypeError(f"unknown risk spec {spec!r}")


def _expect_keys(data, allowed, where):
    if not isinstance(data, dict):
        raise RiskSpecError(f"{where}: expected an object")
    extra = set(data) - set(allowed)
    if extra:
        raise RiskSpecError(f"{where}: unknown field(s) {sorted(extra)}")
    missing = set(allowed) - set(data)
    if missing:
        raise RiskSpecError(f"{where}: missing field(s) {sorted(missing)}")


def spec_from_json(data) -> RiskSpec:
    if not isinstance(data, dict) or "kind" not in data:
        raise RiskSpecError("risk spec must be an object with a 'kind' field")
    kind = data["kind"]
    try:
        if kind == "entropic":
            _expect_keys(data, ("kind", "tau"), "entropic")
            return Entropic(float(data["tau"]))
        if kind == "spectral":
            _expect_keys(data, ("kind", "eta"), "spectral")
            return Spectral(distkit.pmf_from_json(data["eta"]))
        if kind == "kusuoka":
            _expect_keys(data, ("kind", "scenarios"), "kusuoka")
            scs = []
            for sc in data["scenarios"]:
                _expect_keys(sc, ("eta", "beta"), "kusuoka scenario")
                scs.append(Scenario(distkit.pmf_from_json(sc["eta"]), float(sc["beta"])))
            return Kusuoka(tuple(scs))
        if kind == "combo":
            _expect_keys(data, ("kind", "terms"), "combo")
            terms = []
            for term in data["terms"]:
                _expect_keys(term, ("weight", "spec"), "combo term")
                terms.append((float(term["weight"]), spec_from_json(term["spec"])))
            return Combo(tuple(terms))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, RiskSpecError):
            raise
        raise RiskSpecError(f"malformed {kind} spec: {exc}") from exc
    raise RiskSpecError(f"unknown risk spec kind {kind!r}")
