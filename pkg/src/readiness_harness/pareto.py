"""Non-dominated sets over mixed maximize/minimize objectives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DataError


@dataclass(frozen=True)
class Objective:
    metric: str
    direction: str = "maximize"

    def __post_init__(self) -> None:
        if self.direction not in ("maximize", "minimize"):
            raise DataError(f"objective direction must be maximize or minimize, got {self.direction!r}")

    @classmethod
    def parse(cls, text: str) -> Objective:
        """``"score:max"`` / ``"p95_latency_ms:min"`` (default maximize)."""
        metric, _, direction = text.partition(":")
        direction = {"": "maximize", "max": "maximize", "min": "minimize"}.get(direction, direction)
        return cls(metric, direction)


LATENCY_SCORE = (Objective("p95_latency_ms", "minimize"), Objective("score", "maximize"))


@dataclass(frozen=True)
class FrontierPoint:
    run_id: str
    coordinates: Mapping[str, float] = field(hash=False)

    def value(self, metric: str) -> float:
        try:
            return self.coordinates[metric]
        except KeyError:
            raise DataError(f"point {self.run_id!r} has no value for objective {metric!r}") from None


def _cost_vector(p: FrontierPoint, objectives: Sequence[Objective]) -> tuple[float, ...]:
    """Objective vector in all-minimize form."""
    return tuple(
        p.value(o.metric) if o.direction == "minimize" else -p.value(o.metric) for o in objectives
    )


def dominates(a: FrontierPoint, b: FrontierPoint, objectives: Sequence[Objective]) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and strictly better once."""
    va, vb = _cost_vector(a, objectives), _cost_vector(b, objectives)
    return all(x <= y for x, y in zip(va, vb)) and any(x < y for x, y in zip(va, vb))


def frontier(points: Iterable[FrontierPoint], objectives: Sequence[Objective]) -> list[FrontierPoint]:
    """Non-dominated subset, sorted by the first objective ascending.

    Points are swept in lexicographic order of their all-minimize vectors.
    Any dominator of a point sorts strictly before it, and by transitivity a
    dominated point is always dominated by an archive member, so comparing
    against the archive alone is exact. Duplicates never dominate each other
    and are all kept.
    """
    if not objectives:
        raise DataError("at least one objective is required")
    keyed = [(_cost_vector(p, objectives), p) for p in points]
    keyed.sort(key=lambda kv: (kv[0], kv[1].run_id))
    archive: list[tuple[tuple[float, ...], FrontierPoint]] = []
    for vec, p in keyed:
        dominated = False
        for avec, _ in archive:
            if all(x <= y for x, y in zip(avec, vec)) and avec != vec:
                dominated = True
                break
        if not dominated:
            archive.append((vec, p))
    first = objectives[0].metric
    return sorted(
        (p for _, p in archive),
        key=lambda p: (p.value(first), _cost_vector(p, objectives), p.run_id),
    )


@dataclass
class FrontierExport:
    """Scatter of every point plus the frontier subset for one grouping."""

    objectives: tuple[Objective, ...]
    group: tuple = ()
    scatter: list[FrontierPoint] = field(default_factory=list)
    frontier: list[FrontierPoint] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        on_front = {p.run_id for p in self.frontier}
        return {
            "objectives": [{"metric": o.metric, "direction": o.direction} for o in self.objectives],
            "group": list(self.group),
            "scatter": [
                {"run_id": p.run_id, **dict(p.coordinates), "on_frontier": p.run_id in on_front}
                for p in self.scatter
            ],
            "frontier": [{"run_id": p.run_id, **dict(p.coordinates)} for p in self.frontier],
            "diagnostics": list(self.diagnostics),
        }


def format_coordinates(
    points: Iterable[FrontierPoint], x: str, y: str, *, x_scale: float = 1.0, decimals: int = 3
) -> str:
    """pgfplots ``coordinates`` body, e.g. ``(2.722,0.814) (3.033,0.837)``."""
    return " ".join(
        f"({p.value(x) * x_scale:.{decimals}f},{p.value(y):.{decimals}f})" for p in points
    )


def parse_coordinates(text: str, x: str = "x", y: str = "y", *, x_scale: float = 1.0) -> list[FrontierPoint]:
    """Inverse of :func:`format_coordinates`; run ids are the point indices."""
    points = []
    body = text.replace("\n", " ")
    for i, chunk in enumerate(part for part in body.split(")") if "(" in part):
        inner = chunk.split("(", 1)[1]
        try:
            xs, ys = (float(v) for v in inner.split(","))
        except ValueError:
            raise DataError(f"bad coordinate {inner!r}") from None
        points.append(FrontierPoint(f"p{i:03d}", {x: xs * x_scale, y: ys}))
    return points
