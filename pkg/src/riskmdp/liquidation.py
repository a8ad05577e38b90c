"""Limit-order-book liquidation model.

A state is a pair (book, inventory).  The book holds one signed integer per
price level ``0..N_S``: negative entries are resting buy volume, positive
entries resting sell volume.  Level 0 always carries unbounded buy interest,
stored as the integer ``SENTINEL``.  The agent posts ask volumes per price
level; between two epochs the asks clear against the per-level ceiling
average of the current and next book.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import riskcore
from .distkit import make_pmf
from .errors import InvalidBook, NegativeAsk, SizeOverflow
from .mdpmodel import Model, StateLayer, Transition

SENTINEL = -(10**12)  # unbounded buy interest at price 0; far below any inventory
MAX_STATES = 20_000
MAX_ACTIONS = 5_000


@dataclass(frozen=True)
class LobState:
    book: tuple
    inventory: int

    def label(self) -> str:
        levels = ",".join("-inf" if v == SENTINEL else str(v) for v in self.book)
        return f"m=[{levels}];u={self.inventory}"


def check_book(book) -> np.ndarray:
    """Return ``book`` as an int array or raise InvalidBook."""
    m = np.asarray(book, dtype=np.int64)
    if m.ndim != 1 or m.shape[0] < 1:
        raise InvalidBook("book must be a non-empty vector")
    if m[0] != SENTINEL:
        raise InvalidBook("level 0 must hold the unbounded-buy sentinel")
    # buy side (<= 0) must sit entirely below the sell side (>= 0)
    pos = np.flatnonzero(m > 0)
    neg = np.flatnonzero(m < 0)
    if pos.size and neg.size and pos[0] < neg[-1]:
        raise InvalidBook(f"book {m.tolist()} has sell volume below buy volume")
    return m


def average_book(m, m_next) -> np.ndarray:
    """Per-level ceiling of the mean of two books (sentinel preserved)."""
    m = check_book(m)
    m_next = check_book(m_next)
    if m.shape != m_next.shape:
        raise InvalidBook("books have different numbers of price levels")
    avg = -((-(m + m_next)) // 2)
    avg[0] = SENTINEL
    return avg


def matched_volumes(a, m_bar) -> np.ndarray:
    """Volume matched at each price level.

    Level ``s`` absorbs ``min(bid_s, (A_s - B_s)_+)``, where ``bid_s`` is the
    resting buy volume at ``s``, ``A_s`` the asks posted at prices ``<= s``
    and ``B_s`` the buy volume resting strictly above ``s``.
    """
    a = np.asarray(a, dtype=np.int64)
    if np.any(a < 0):
        raise NegativeAsk(f"ask vector {a.tolist()} has a negative entry")
    m_bar = check_book(m_bar)
    if a.shape != m_bar.shape:
        raise InvalidBook(f"{a.shape[0]} ask levels for a book with {m_bar.shape[0]} levels")
    bids = np.where(m_bar < 0, -m_bar, 0)
    asks_at_or_below = np.cumsum(a)
    bids_above = np.concatenate((np.cumsum(bids[::-1])[::-1][1:], [0]))
    return np.minimum(bids, np.maximum(asks_at_or_below - bids_above, 0))


def clear(a, m_bar) -> tuple:
    """Units sold and cash received when asks ``a`` meet the averaged book."""
    vol = matched_volumes(a, m_bar)
    return int(vol.sum()), int(np.arange(vol.shape[0]) @ vol)


def ask_vectors(n_levels: int, budget: int) -> list:
    """All non-negative integer vectors of length ``n_levels`` summing to at most ``budget``."""
    out = []
    for total in range(budget + 1):
        for bars in itertools.combinations(range(total + n_levels - 1), n_levels - 1):
            edges = (-1,) + bars + (total + n_levels - 1,)
            out.append(tuple(edges[i + 1] - edges[i] - 1 for i in range(n_levels)))
    return sorted(out)


BookDynamics = Callable[[int, int, int, tuple], Sequence]


def default_book_dynamics(n_s: int, p_stay: float = 0.6):
    """Two books, one with thin and one with deep buy interest; the market
    keeps the current book with probability ``p_stay``.

    Returns ``(books, dynamics)`` where ``dynamics(t, book_idx, inventory, ask)``
    yields ``(next_book_idx, prob)`` pairs.
    """
    if n_s < 1:
        raise ValueError("need at least one positive price level")
    thin = (SENTINEL,) + (-1,) * (n_s - 1) + (1,)
    deep = (SENTINEL,) + (-2,) * (n_s - 1) + (-1,)
    books = [thin, deep]

    def dynamics(t, b, u, a):
        return [(b, p_stay), (1 - b, 1.0 - p_stay)]

    return books, dynamics


def liquidation_risk(t: int, horizon: int, u: int, u0: int, tau: float = 1.0, scenarios=None):
    """Blend of entropic and Kusuoka measures with weight ``t / horizon`` on the latter."""
    frac = u / u0 if u0 > 0 else 0.0
    if scenarios is None:
        scenarios = [([(1.0, 0.5), (0.5 * frac, 0.5)], 0.0), ([(frac, 1.0)], 0.0)]
    else:
        scenarios = scenarios(u, u0)
    w = t / horizon
    return riskcore.Combo(((1.0 - w, riskcore.Entropic(tau)), (w, riskcore.kusuoka_spec(scenarios))))


def build_liquidation(
    n_s: int,
    u0: int,
    horizon: int,
    book_dynamics=None,
    tau: float = 1.0,
    kusuoka_scenarios=None,
    *,
    clearing=clear,
    initial_books: Optional[Sequence[int]] = None,
    max_states: int = MAX_STATES,
):
    """Finite liquidation model over ``horizon`` epochs.

    ``book_dynamics`` is a ``(books, dynamics)`` pair as returned by
    :func:`default_book_dynamics`.  ``kusuoka_scenarios(u, u0)`` may replace the
    default inventory-dependent scenario list; ``clearing(a, m_bar)`` may
    replace the matching rule.  The initial law is uniform over
    ``initial_books`` (default: all books) with full inventory.

    Returns ``(model, lob_states)`` with ``lob_states[i]`` describing state ``i``.
    """
    if n_s < 1 or u0 < 0 or horizon < 1:
        raise ValueError("need n_s >= 1, u0 >= 0 and horizon >= 1")
    books, dynamics = book_dynamics if book_dynamics is not None else default_book_dynamics(n_s)
    books = [tuple(int(v) for v in check_book(b)) for b in books]
    if any(len(b) != n_s + 1 for b in books):
        raise InvalidBook(f"books must have {n_s + 1} levels")
    n_states = len(books) * (u0 + 1)
    if n_states > max_states:
        raise SizeOverflow(f"{n_states} states exceed the cap of {max_states}")
    # vectors of n_s + 1 non-negative integers with sum <= u0
    if math.comb(u0 + n_s + 1, n_s + 1) > MAX_ACTIONS:
        raise SizeOverflow(f"ask-vector count exceeds the cap of {MAX_ACTIONS}")

    lob = [LobState(b, u) for b in books for u in range(u0 + 1)]
    index = {(s.book, s.inventory): i for i, s in enumerate(lob)}
    asks_by_u = {u: ask_vectors(n_s + 1, u) for u in range(u0 + 1)}
    averaged = {(i, j): average_book(books[i], books[j]) for i in range(len(books)) for j in range(len(books))}

    def state_layer(t, bi, u):
        if t == horizon:
            asks = [(u,) + (0,) * n_s]
        else:
            asks = asks_by_u[u]
        transitions = []
        for a in asks:
            succ, probs, costs = [], [], []
            for bj, p in dynamics(t, bi, u, a):
                if p <= 0:
                    continue
                delta, gain = clearing(np.asarray(a), averaged[(bi, bj)])
                succ.append(index[(books[bj], u - delta)])
                probs.append(float(p))
                costs.append(-float(gain))
            order = np.argsort(succ)
            transitions.append(Transition.build(np.asarray(succ)[order], np.asarray(probs)[order],
                                                np.asarray(costs)[order]))
        names = tuple("a=" + ",".join(map(str, a)) for a in asks)
        return StateLayer(names, liquidation_risk(t, horizon, u, u0, tau, kusuoka_scenarios), tuple(transitions))

    layers = tuple(
        tuple(state_layer(t, bi, s.inventory) for s in lob for bi in [books.index(s.book)])
        for t in range(1, horizon + 1)
    )
    starts = range(len(books)) if initial_books is None else initial_books
    starts = list(starts)
    initial = make_pmf([(index[(books[b], u0)], 1.0 / len(starts)) for b in starts])
    model = Model(
        states=tuple(s.label() for s in lob),
        gamma=1.0,
        horizon=horizon,
        initial=initial,
        risk0=riskcore.spectral_spec([(1.0, 1.0)]),
        cost_bound=float(n_s * u0),
        layers=layers,
    )
    return model, lob
