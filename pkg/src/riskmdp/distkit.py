"""Finite discrete distributions on the real line.

A :class:`Pmf` stores strictly increasing atom values and their
probabilities as read-only numpy arrays.  Every constructor funnels through
the same canonicalisation: sort, merge atoms closer than ``MERGE_TOL``,
drop atoms lighter than ``PRUNE_TOL`` and renormalise.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadLevel,
    BadWeights,
    DistributionError,
    EmptySupport,
    LengthMismatch,
    MassNotOne,
    NegativeProb,
    NegativeScale,
)

MERGE_TOL = 1e-12
PRUNE_TOL = 1e-15
MASS_TOL = 1e-9


class Pmf:
    """Immutable probability mass function with finite support.

    Build instances with :func:`make_pmf`, :func:`from_arrays` or
    :meth:`Pmf.dirac`; the raw constructor trusts its inputs.
    """

    __slots__ = ("values", "probs", "_cum")

    def __init__(self, values: np.ndarray, probs: np.ndarray):
        values.setflags(write=False)
        probs.setflags(write=False)
        self.values = values
        self.probs = probs
        self._cum = None

    @classmethod
    def dirac(cls, c: float) -> "Pmf":
        return cls(np.array([float(c)]), np.array([1.0]))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __iter__(self):
        return iter(zip(self.values.tolist(), self.probs.tolist()))

    def __repr__(self) -> str:
        body = ", ".join(f"{v:.6g}: {p:.6g}" for v, p in self)
        return f"Pmf({{{body}}})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(
            self.probs, other.probs
        )

    __hash__ = None

    def allclose(self, other: "Pmf", atol: float = 1e-12) -> bool:
        return (
            len(self) == len(other)
            and np.allclose(self.values, other.values, rtol=0.0, atol=atol)
            and np.allclose(self.probs, other.probs, rtol=0.0, atol=atol)
        )

    @property
    def cumulative(self) -> np.ndarray:
        """CDF evaluated at each atom; the last entry is exactly 1."""
        if self._cum is None:
            cum = np.cumsum(self.probs)
            cum[-1] = 1.0
            cum.setflags(write=False)
            self._cum = cum
        return self._cum

    def to_json(self) -> list:
        return [[v, p] for v, p in self]


def _canonical(values: np.ndarray, probs: np.ndarray) -> Pmf:
    order = np.argsort(values, kind="stable")
    values = values[order]
    probs = probs[order]
    if values.shape[0] > 1:
        # start a new atom wherever the gap to the previous value exceeds MERGE_TOL
        starts = np.flatnonzero(np.concatenate(([True], np.diff(values) > MERGE_TOL)))
        if starts.shape[0] < values.shape[0]:
            probs = np.add.reduceat(probs, starts)
            values = values[starts]
    keep = probs >= PRUNE_TOL
    if not keep.all():
        values = values[keep]
        probs = probs[keep]
    if values.shape[0] == 0:
        raise EmptySupport("distribution has no atom with positive mass")
    total = probs.sum()
    if total != 1.0:
        probs = probs / total
    return Pmf(np.ascontiguousarray(values, dtype=float), np.ascontiguousarray(probs, dtype=float))


def from_arrays(values, probs) -> Pmf:
    """Validated constructor from parallel value/probability arrays."""
    values = np.asarray(values, dtype=float).ravel()
    probs = np.asarray(probs, dtype=float).ravel()
    if values.shape != probs.shape:
        raise LengthMismatch(f"{values.shape[0]} values but {probs.shape[0]} probabilities")
    if values.shape[0] == 0:
        raise EmptySupport("no atoms given")
    if not np.all(np.isfinite(values)):
        raise DistributionError("atom values must be finite")
    if not np.all(np.isfinite(probs)):
        raise DistributionError("probabilities must be finite")
    if np.any(probs < 0):
        raise NegativeProb(f"negative probability {probs.min()!r}")
    total = probs.sum()
    if abs(total - 1.0) > MASS_TOL:
        raise MassNotOne(f"probabilities sum to {total!r}")
    return _canonical(values.copy(), probs.copy())


def make_pmf(pairs: Iterable[Sequence[float]]) -> Pmf:
    """Build a Pmf from ``(value, prob)`` pairs.

    Duplicate values are merged, zero-mass atoms dropped and the masses
    renormalised.

    >>> make_pmf([(0, 0.5), (0, 0.2), (1, 0.3)]).to_json()
    [[0.0, 0.7], [1.0, 0.3]]
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptySupport("no atoms given")
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DistributionError("expected a list of (value, prob) pairs")
    return from_arrays(arr[:, 0], arr[:, 1])


def pushforward(values, probs) -> Pmf:
    """Law of ``f(Y)`` given the images ``values`` of ``Y``'s atoms.

    Same as :func:`from_arrays` but meant for internal use where the
    probabilities are known to be a distribution already.
    """
    return from_arrays(values, probs)


def shift(mu: Pmf, c: float) -> Pmf:
    """Convolution with a point mass at ``c``."""
    return Pmf(mu.values + float(c), mu.probs.copy())


def scale(mu: Pmf, gamma: float) -> Pmf:
    if gamma < 0:
        raise NegativeScale(f"scale factor must be >= 0, got {gamma!r}")
    if gamma == 0:
        return Pmf.dirac(0.0)
    return _canonical(mu.values * float(gamma), mu.probs.copy())


def mix(weights, mus: Sequence[Pmf]) -> Pmf:
    """Mixture ``sum_k weights[k] * mus[k]``."""
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.shape[0] != len(mus):
        raise LengthMismatch(f"{weights.shape[0]} weights for {len(mus)} distributions")
    if len(mus) == 0:
        raise EmptySupport("cannot mix an empty list")
    if np.any(~np.isfinite(weights)) or np.any(weights < 0):
        raise BadWeights("mixture weights must be finite and non-negative")
    if abs(weights.sum() - 1.0) > MASS_TOL:
        raise BadWeights(f"mixture weights sum to {weights.sum()!r}")
    active = [k for k in range(len(mus)) if weights[k] > 0]
    if len(active) == 1:
        return mus[active[0]]
    values = np.concatenate([mus[k].values for k in active])
    probs = np.concatenate([weights[k] * mus[k].probs for k in active])
    return _canonical(values, probs)


def cdf(mu: Pmf, r: float) -> float:
    idx = np.searchsorted(mu.values, r, side="right")
    if idx == 0:
        return 0.0
    return float(mu.cumulative[idx - 1])


def quantile(mu: Pmf, u: float) -> float:
    """Left-continuous inverse ``inf{r : F(r) >= u}`` for ``u`` in (0, 1]."""
    if not (0.0 < u <= 1.0):
        raise BadLevel(f"quantile level must lie in (0, 1], got {u!r}")
    idx = int(np.searchsorted(mu.cumulative, u, side="left"))
    return float(mu.values[min(idx, len(mu) - 1)])


def fosd_dominates(mu: Pmf, nu: Pmf, tol: float = 1e-12) -> bool:
    """True when ``mu``'s CDF lies above ``nu``'s everywhere (``mu`` is less risky)."""
    grid = np.union1d(mu.values, nu.values)
    f_mu = _cdf_many(mu, grid)
    f_nu = _cdf_many(nu, grid)
    return bool(np.all(f_mu >= f_nu - tol))


def _cdf_many(mu: Pmf, r: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(mu.values, r, side="right")
    cum = np.concatenate(([0.0], mu.cumulative))
    return cum[idx]


def mean(mu: Pmf) -> float:
    return float(mu.values @ mu.probs)


def ess_sup(mu: Pmf) -> float:
    return float(mu.values[-1])


def ess_inf(mu: Pmf) -> float:
    return float(mu.values[0])


def pmf_from_json(data) -> Pmf:
    return make_pmf([(float(v), float(p)) for v, p in data])
