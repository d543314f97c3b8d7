"""Long-short weights and the momentum decorator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .graph import TradeSignalSet

Scheme = Literal["equal", "utility_proportional"]
LONG, SHORT = "long", "short"


def _leg(members: list[int], u: np.ndarray, scheme: str) -> np.ndarray:
    if scheme == "equal":
        return np.full(len(members), 1.0 / len(members))
    mags = np.abs(u[members])
    total = mags.sum()
    if not total > 0:
        # all-zero utilities in the leg: proportional weights are undefined
        return np.full(len(members), 1.0 / len(members))
    return mags / total


def allocate(signals: TradeSignalSet, utilities, scheme: Scheme = "utility_proportional") -> np.ndarray:
    """Weights summing to +1 over the long leg and -1 over the short leg.

    ``utility_proportional`` sizes each position by ``|u|`` relative to its
    leg; ``equal`` splits each leg evenly. An empty leg gets no weight.
    """
    if scheme not in ("equal", "utility_proportional"):
        raise ValueError(f"unknown allocation scheme {scheme!r}")
    u = np.asarray(utilities, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("utilities must be finite")
    w = np.zeros(len(u))
    longs, shorts = sorted(signals.longs), sorted(signals.shorts)
    if longs:
        w[longs] = _leg(longs, u, scheme)
    if shorts:
        w[shorts] = -_leg(shorts, u, scheme)
    return w


@dataclass(frozen=True)
class PositionRegistry:
    side: dict[int, str] = field(default_factory=dict)
    entry_date: dict[int, object] = field(default_factory=dict)

    def held(self, which: str) -> set[int]:
        return {s for s, v in self.side.items() if v == which}


def momentum_update(
    registry: PositionRegistry,
    utilities,
    new_signals: TradeSignalSet,
    scoreable=None,
    date=None,
) -> tuple[PositionRegistry, TradeSignalSet]:
    """Carry held positions forward until their utility sign turns.

    A held long survives while ``u > 0``, a held short while ``u < 0``; a
    security flagged non-scoreable is dropped regardless. Survivors join the
    new signals, except that a fresh signal on the opposite side wins.
    """
    u = np.asarray(utilities, dtype=float)
    ok = np.ones(len(u), dtype=bool) if scoreable is None else np.asarray(scoreable, dtype=bool)

    kept_long = {s for s in registry.held(LONG) if ok[s] and u[s] > 0}
    kept_short = {s for s in registry.held(SHORT) if ok[s] and u[s] < 0}
    longs = set(new_signals.longs) | (kept_long - new_signals.shorts)
    shorts = set(new_signals.shorts) | (kept_short - new_signals.longs)

    side, entry = {}, {}
    for leg, members in ((LONG, longs), (SHORT, shorts)):
        for s in sorted(members):
            side[s] = leg
            same = registry.side.get(s) == leg
            entry[s] = registry.entry_date[s] if same and s in registry.entry_date else date
    merged = TradeSignalSet(frozenset(longs), frozenset(shorts), dict(new_signals.relation))
    return PositionRegistry(side, entry), merged
