"""Fusions of propositional modal logics that share an S5 modality E.

The algorithms are those of the first-order pipeline with E playing the role
of the quantifier: types are read per world of an E-class, the realisability
sentence uses []E / <>E, and the local prefix alternates E with []i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .fusion import STRATEGIES, FusionEngine
from .semantics import Frame
from .syntax import SHARED, Formula


@dataclass(eq=False)
class SharedS5Config:
    """Two propositional deciders for the languages {[]1, []E} and {[]2, []E}."""

    d1: Any
    d2: Any
    domain_mode: str = "xd"
    global_strategy: str = "subset_enumeration"
    subset_budget: int = 4096
    emit_countermodels: bool = False
    _engine: Any = field(default=None, repr=False)

    def __post_init__(self):
        if self.global_strategy not in STRATEGIES:
            raise ValueError(f"unknown global strategy {self.global_strategy!r}")
        for k, d in (("1", self.d1), ("2", self.d2)):
            specs = getattr(d, "specs", None)
            if specs is not None:
                if SHARED not in specs or specs[SHARED].condition != "equivalence":
                    raise ValueError(f"decider {k} must interpret []E as an equivalence")
                if k not in specs:
                    raise ValueError(f"decider {k} does not speak modality {k}")

    def engine(self) -> FusionEngine:
        if self._engine is None:
            self._engine = FusionEngine(self, prop=True)
        return self._engine


def decide_global_shared_s5(cfg: SharedS5Config, phi: Formula, psi: Formula):
    return cfg.engine().decide_global(phi, psi)


def decide_local_shared_s5(cfg: SharedS5Config, phi: Formula):
    return cfg.engine().decide_local(phi)


def e_classes(frame: Frame) -> dict[int, frozenset[int]]:
    """World -> its E-class."""
    out = {}
    for w in frame.worlds:
        out[w] = frozenset(frame.successors(SHARED, w)) | {w}
    return out


def e_distance(frame: Frame, mod: str, w: int) -> dict[frozenset[int], int]:
    """Shortest S-path length from w's E-class to every reachable E-class, S = E;R;E."""
    cls = e_classes(frame)
    start = cls[w]
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for c in frontier:
            for u in c:
                for v in frame.successors(mod, u):
                    d = cls[v]
                    if d not in dist:
                        dist[d] = dist[c] + 1
                        nxt.append(d)
        frontier = nxt
    return dist
