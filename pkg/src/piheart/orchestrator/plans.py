"""Session plans: fixed movie order, counterbalanced modality order.

Each plan runs the three movies in the same order while the three feedback
modalities are permuted; permutations are spread round-robin across pairs so
any order effect cancels out.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class Modality(str, Enum):
    WithoutHeart = "WithoutHeart"
    WithOwnHeart = "WithOwnHeart"
    WithNeighborHeart = "WithNeighborHeart"


MOVIE_ORDER = ("big bunny", "overwatch", "for the birds")


def routing_for(modality: Modality, device_a: str, device_b: str) -> dict[str, str]:
    """Heart-rate routing as source device -> target device."""
    if modality is Modality.WithOwnHeart:
        return {device_a: device_a, device_b: device_b}
    if modality is Modality.WithNeighborHeart:
        return {device_a: device_b, device_b: device_a}
    return {}


@dataclass(frozen=True)
class Segment:
    movie: str
    modality: Modality


@dataclass(frozen=True)
class SessionPlan:
    pair_id: str
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        movies = tuple(s.movie for s in self.segments)
        if movies != MOVIE_ORDER:
            raise ValueError(f"movie order must be {MOVIE_ORDER}, got {movies}")
        modalities = sorted(s.modality for s in self.segments)
        if modalities != sorted(Modality):
            raise ValueError("each modality must appear exactly once")

    @classmethod
    def from_order(cls, pair_id: str, order: tuple[Modality, ...]) -> "SessionPlan":
        return cls(
            pair_id=pair_id,
            segments=tuple(Segment(movie, m) for movie, m in zip(MOVIE_ORDER, order)),
        )

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "segments": [{"movie": s.movie, "modality": s.modality.value} for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionPlan":
        return cls(
            pair_id=data["pair_id"],
            segments=tuple(
                Segment(s["movie"], Modality(s["modality"])) for s in data["segments"]
            ),
        )


def generate_condition_orders(n_pairs: int, seed: int = 0) -> list[SessionPlan]:
    """Counterbalanced plans: the six modality permutations assigned
    round-robin (after a seeded shuffle), so counts differ by at most one and
    are exactly n/6 each when 6 divides n."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    permutations = sorted(itertools.permutations(Modality))
    random.Random(seed).shuffle(permutations)
    return [
        SessionPlan.from_order(f"pair{i + 1:02d}", permutations[i % len(permutations)])
        for i in range(n_pairs)
    ]


def save_plan(plan: SessionPlan, path: str | Path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_plan(path: str | Path) -> SessionPlan:
    return SessionPlan.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
