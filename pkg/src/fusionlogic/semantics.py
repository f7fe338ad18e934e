"""Kripke frames and models, the truth definition, frame classes and enumeration."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .syntax import SHARED, VAR, And, Atom, Box, Eq, Exists, Formula, Letter, Not, Verum

Pair = tuple[int, int]


@dataclass(frozen=True)
class Frame:
    worlds: tuple[int, ...]
    relations: Mapping[str, frozenset[Pair]]

    def __post_init__(self):
        if not self.worlds:
            raise ValueError("a frame needs at least one world")
        ws = tuple(sorted(set(self.worlds)))
        object.__setattr__(self, "worlds", ws)
        rels = {m: frozenset((int(a), int(b)) for a, b in r) for m, r in self.relations.items()}
        wset = set(ws)
        for m, r in rels.items():
            for a, b in r:
                if a not in wset or b not in wset:
                    raise ValueError(f"relation {m} mentions a world outside the frame")
        object.__setattr__(self, "relations", rels)
        succ = {m: {w: tuple(sorted(b for a, b in r if a == w)) for w in ws} for m, r in rels.items()}
        object.__setattr__(self, "_succ", succ)

    def successors(self, mod: str, w: int) -> tuple[int, ...]:
        try:
            return self._succ[mod][w]
        except KeyError:
            raise ValueError(f"frame has no relation for modality {mod!r}") from None

    @property
    def modality_ids(self) -> frozenset[str]:
        return frozenset(self.relations)

    def __hash__(self):
        return hash((self.worlds, tuple(sorted((m, tuple(sorted(r))) for m, r in self.relations.items()))))

    def __eq__(self, other):
        return (isinstance(other, Frame) and self.worlds == other.worlds
                and dict(self.relations) == dict(other.relations))


def disjoint_union(frames: Sequence[Frame]) -> Frame:
    """Relabel worlds consecutively and union the relations."""
    worlds: list[int] = []
    rels: dict[str, set[Pair]] = {}
    offset = 0
    mods = set().union(*(f.modality_ids for f in frames))
    for f in frames:
        shift = {w: offset + k for k, w in enumerate(f.worlds)}
        worlds.extend(shift.values())
        for m in mods:
            rels.setdefault(m, set()).update((shift[a], shift[b]) for a, b in f.relations.get(m, ()))
        offset += len(f.worlds)
    return Frame(tuple(worlds), {m: frozenset(r) for m, r in rels.items()})


# --------------------------------------------------------------- frame classes


def _compose(r: Iterable[Pair], s: Iterable[Pair]) -> set[Pair]:
    """Diagrammatic composition: first r, then s."""
    by_src: dict[int, list[int]] = {}
    for a, b in s:
        by_src.setdefault(a, []).append(b)
    return {(a, c) for a, b in r for c in by_src.get(b, ())}


def is_equivalence(worlds: Sequence[int], r: frozenset[Pair]) -> bool:
    if any((w, w) not in r for w in worlds):
        return False
    if any((b, a) not in r for a, b in r):
        return False
    return _compose(r, r) <= r


def is_difference(worlds: Sequence[int], r: frozenset[Pair]) -> bool:
    """Disjoint union of difference frames: R is inequality within each component."""
    if any(a == b for a, b in r):
        return False
    if any((b, a) not in r for a, b in r):
        return False
    return all((a, c) in r for a, c in _compose(r, r) if a != c)


def _partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]


@dataclass(frozen=True)
class FrameClassSpec:
    """A frame class closed under disjoint unions.

    ``condition`` is one of "all", "equivalence", "difference" or "custom";
    custom classes supply ``predicate(worlds, relation)`` and a one-world
    ``unit`` relation used for degenerate grafts.
    """

    condition: str = "all"
    predicate: Callable[[Sequence[int], frozenset], bool] | None = None
    unit_reflexive: bool | None = None

    def __post_init__(self):
        if self.condition not in ("all", "equivalence", "difference", "custom"):
            raise ValueError(f"unknown frame condition {self.condition!r}")
        if self.condition == "custom" and (self.predicate is None or self.unit_reflexive is None):
            raise ValueError("custom classes need a predicate and a unit frame")

    def holds(self, worlds: Sequence[int], r: frozenset[Pair]) -> bool:
        if self.condition == "all":
            return True
        if self.condition == "equivalence":
            return is_equivalence(worlds, r)
        if self.condition == "difference":
            return is_difference(worlds, r)
        return bool(self.predicate(worlds, r))

    def relations(self, worlds: Sequence[int]) -> Iterator[frozenset[Pair]]:
        worlds = list(worlds)
        if self.condition in ("equivalence", "difference"):
            refl = self.condition == "equivalence"
            for part in _partitions(worlds):
                yield frozenset((a, b) for block in part for a in block for b in block
                                if refl or a != b)
            return
        pairs = [(a, b) for a in worlds for b in worlds]
        for bits in range(1 << len(pairs)):
            r = frozenset(p for k, p in enumerate(pairs) if bits >> k & 1)
            if self.condition == "all" or self.holds(worlds, r):
                yield r

    def unit_relation(self, w: int) -> frozenset[Pair]:
        if self.condition == "equivalence":
            return frozenset({(w, w)})
        if self.condition == "custom":
            return frozenset({(w, w)}) if self.unit_reflexive else frozenset()
        return frozenset()


K_FRAMES = FrameClassSpec("all")
S5_FRAMES = FrameClassSpec("equivalence")
DIFF_FRAMES = FrameClassSpec("difference")


def enumerate_frames(spec: FrameClassSpec | Mapping[str, FrameClassSpec], n: int,
                     modality_ids: Sequence[str] = ("1",)) -> Iterator[Frame]:
    """All frames on worlds 0..n-1 whose relations lie in the given classes."""
    if n < 1:
        raise ValueError("n must be positive")
    specs = spec if isinstance(spec, Mapping) else {m: spec for m in modality_ids}
    mods = sorted(specs)
    worlds = tuple(range(n))
    for rels in itertools.product(*(list(specs[m].relations(worlds)) for m in mods)):
        yield Frame(worlds, dict(zip(mods, rels)))


def frame_property(F: Frame, which: str | tuple) -> bool:
    """lcom(i), rcom(i), equivalence(id), difference(id) or nontrivial(id)."""
    if isinstance(which, str):
        name, _, arg = which.partition("(")
        arg = arg.rstrip(")")
    else:
        name, arg = which
    rel = lambda m: F.relations.get(m, frozenset())
    if name == "lcom":
        e, r = rel(SHARED), rel(arg)
        return _compose(e, r) <= _compose(r, e)
    if name == "rcom":
        e, r = rel(SHARED), rel(arg)
        return _compose(r, e) <= _compose(e, r)
    if name == "equivalence":
        return is_equivalence(F.worlds, rel(arg))
    if name == "difference":
        return is_difference(F.worlds, rel(arg))
    if name == "nontrivial":
        return any(a != b for a, b in rel(arg))
    raise ValueError(f"unknown frame property {which!r}")


# ------------------------------------------------------------------- models


@dataclass(frozen=True)
class FOKripkeModel:
    frame: Frame
    domains: Mapping[int, frozenset[int]]
    preds: Mapping[str, Mapping[int, frozenset[int]]] = field(default_factory=dict)
    consts: Mapping[str, Mapping[int, int]] = field(default_factory=dict)
    mode: str = "xd"

    def __post_init__(self):
        object.__setattr__(self, "domains", {int(w): frozenset(d) for w, d in self.domains.items()})
        object.__setattr__(self, "preds", {p: {int(w): frozenset(s) for w, s in m.items()}
                                           for p, m in self.preds.items()})
        object.__setattr__(self, "consts", {c: {int(w): int(e) for w, e in m.items()}
                                            for c, m in self.consts.items()})

    @property
    def worlds(self) -> tuple[int, ...]:
        return self.frame.worlds

    def extension(self, pred: str, w: int) -> frozenset[int]:
        return self.preds.get(pred, {}).get(w, frozenset())

    def const(self, c: str, w: int) -> int:
        try:
            return self.consts[c][w]
        except KeyError:
            raise ValueError(f"constant {c!r} is undefined at world {w}") from None

    def elements(self) -> frozenset[int]:
        return frozenset().union(*self.domains.values())

    def validate(self) -> None:
        errs = model_errors(self)
        if errs:
            raise ValueError("; ".join(errs))

    def to_json(self) -> dict:
        return model_to_json(self)


def model_errors(M: FOKripkeModel) -> list[str]:
    errs: list[str] = []
    ws = M.frame.worlds
    if set(M.domains) != set(ws):
        errs.append("domains must be given for exactly the frame's worlds")
        return errs
    for w in ws:
        if not M.domains[w]:
            errs.append(f"domain of world {w} is empty")
    if M.mode not in ("xd", "cd"):
        errs.append(f"unknown domain mode {M.mode!r}")
    if M.mode == "cd" and len({M.domains[w] for w in ws}) > 1:
        errs.append("constant-domain model with differing domains")
    for m, r in M.frame.relations.items():
        for a, b in r:
            if not M.domains[a] <= M.domains[b]:
                errs.append(f"expanding-domain condition fails on {m}-edge ({a},{b})")
    for p, ext in M.preds.items():
        for w, s in ext.items():
            if w not in M.domains or not s <= M.domains[w]:
                errs.append(f"extension of {p} at {w} leaves the domain")
    for c, vals in M.consts.items():
        for w in ws:
            if w not in vals:
                errs.append(f"constant {c} undefined at world {w}")
            elif vals[w] not in M.domains[w]:
                errs.append(f"constant {c} at world {w} denotes outside the domain")
    return errs


def validate(M: FOKripkeModel) -> bool:
    return not model_errors(M)


class Evaluator:
    """Memoised truth definition for one model."""

    def __init__(self, M: FOKripkeModel):
        self.M = M
        self.cache: dict[tuple, bool] = {}

    def term(self, t: str, w: int, e: int) -> int:
        return e if t == VAR else self.M.const(t, w)

    def check(self, w: int, e: int | None, f: Formula) -> bool:
        key = (f, w, e if f.free else None)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        M = self.M
        if isinstance(f, Verum):
            r = True
        elif isinstance(f, Atom):
            r = self.term(f.term, w, e) in M.extension(f.pred, w)
        elif isinstance(f, Eq):
            r = self.term(f.left, w, e) == self.term(f.right, w, e)
        elif isinstance(f, Not):
            r = not self.check(w, e, f.body)
        elif isinstance(f, And):
            r = self.check(w, e, f.left) and self.check(w, e, f.right)
        elif isinstance(f, Box):
            r = all(self.check(v, e, f.body) for v in M.frame.successors(f.mod, w))
        elif isinstance(f, Exists):
            r = any(self.check(w, d, f.body) for d in sorted(M.domains[w]))
        else:
            raise TypeError(f"cannot evaluate {f!r} in a first-order model")
        self.cache[key] = r
        return r

    def holds_at(self, w: int, f: Formula) -> bool:
        if not f.free:
            return self.check(w, None, f)
        return all(self.check(w, e, f) for e in sorted(self.M.domains[w]))

    def holds_globally(self, f: Formula, worlds: Iterable[int] | None = None) -> bool:
        ws = self.M.worlds if worlds is None else worlds
        return all(self.holds_at(w, f) for w in ws)


def check(M: FOKripkeModel, w: int, a: int | Mapping[str, int], f: Formula) -> bool:
    e = a[VAR] if isinstance(a, Mapping) else a
    return Evaluator(M).check(w, e, f)


def holds_at(M: FOKripkeModel, w: int, f: Formula) -> bool:
    return Evaluator(M).holds_at(w, f)


def holds_globally(M: FOKripkeModel, f: Formula, worlds: Iterable[int] | None = None) -> bool:
    """True at every world (or at the given worlds, e.g. a prefix minus its frontier)."""
    return Evaluator(M).holds_globally(f, worlds)


def enumerate_domains(worlds: Sequence[int], frame: Frame, n_elems: int, mode: str) -> Iterator[dict[int, frozenset[int]]]:
    elems = frozenset(range(n_elems))
    if mode == "cd":
        yield {w: elems for w in worlds}
        return
    subsets = [frozenset(c) for k in range(1, n_elems + 1) for c in itertools.combinations(range(n_elems), k)]
    for choice in itertools.product(subsets, repeat=len(worlds)):
        dom = dict(zip(worlds, choice))
        if frozenset().union(*choice) != elems:
            continue
        if all(dom[a] <= dom[b] for r in frame.relations.values() for a, b in r):
            yield dom


def _subsets(s: frozenset[int]) -> list[frozenset[int]]:
    items = sorted(s)
    return [frozenset(c) for k in range(len(items) + 1) for c in itertools.combinations(items, k)]


def enumerate_fomodels(spec, n_worlds: int, n_elems: int, mode: str,
                       preds: Iterable[str] = (), consts: Iterable[str] = (),
                       modality_ids: Sequence[str] = ("1",)) -> Iterator[FOKripkeModel]:
    """Every model on worlds 0..n-1 and elements 0..k-1 (each element used somewhere)."""
    if n_elems < 1:
        raise ValueError("n_elems must be positive")
    preds = sorted(set(preds))
    consts = sorted(set(consts))
    for frame in enumerate_frames(spec, n_worlds, modality_ids):
        ws = frame.worlds
        for dom in enumerate_domains(ws, frame, n_elems, mode):
            slots = [(p, w) for p in preds for w in ws]
            pred_choices = [_subsets(dom[w]) for _, w in slots]
            cslots = [(c, w) for c in consts for w in ws]
            const_choices = [sorted(dom[w]) for _, w in cslots]
            for pc in itertools.product(*pred_choices):
                interp: dict[str, dict[int, frozenset[int]]] = {p: {} for p in preds}
                for (p, w), s in zip(slots, pc):
                    interp[p][w] = s
                for cc in itertools.product(*const_choices):
                    cmap: dict[str, dict[int, int]] = {c: {} for c in consts}
                    for (c, w), e in zip(cslots, cc):
                        cmap[c][w] = e
                    yield FOKripkeModel(frame, dom, interp, cmap, mode)


# -------------------------------------------------------- propositional models


@dataclass(frozen=True)
class PropKripkeModel:
    frame: Frame
    valuation: Mapping[str, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "valuation", {p: frozenset(s) for p, s in self.valuation.items()})


def check_prop(M: PropKripkeModel, w: int, f: Formula, _cache: dict | None = None) -> bool:
    cache = {} if _cache is None else _cache

    def go(w: int, g: Formula) -> bool:
        key = (g, w)
        hit = cache.get(key)
        if hit is not None:
            return hit
        if isinstance(g, Verum):
            r = True
        elif isinstance(g, Letter):
            r = w in M.valuation.get(g.name, ())
        elif isinstance(g, Not):
            r = not go(w, g.body)
        elif isinstance(g, And):
            r = go(w, g.left) and go(w, g.right)
        elif isinstance(g, Box):
            r = all(go(v, g.body) for v in M.frame.successors(g.mod, w))
        else:
            raise TypeError(f"{g!r} is not a propositional formula")
        cache[key] = r
        return r

    return go(w, f)


def prop_holds_globally(M: PropKripkeModel, f: Formula) -> bool:
    cache: dict = {}
    return all(check_prop(M, w, f, cache) for w in M.frame.worlds)


def enumerate_propmodels(specs: Mapping[str, FrameClassSpec], n: int, letters: Iterable[str],
                         frame_filter: Callable[[Frame], bool] | None = None) -> Iterator[PropKripkeModel]:
    letters = sorted(set(letters))
    ws = tuple(range(n))
    subsets = _subsets(frozenset(ws))
    for frame in enumerate_frames(specs, n):
        if frame_filter is not None and not frame_filter(frame):
            continue
        for vals in itertools.product(subsets, repeat=len(letters)):
            yield PropKripkeModel(frame, dict(zip(letters, vals)))


def prop_companion(M: FOKripkeModel) -> tuple[PropKripkeModel, dict[tuple[int, int], int]]:
    """Product reading: worlds are (world, element) pairs, E relates equal worlds."""
    pairs = [(w, e) for w in M.worlds for e in sorted(M.domains[w])]
    index = {p: k for k, p in enumerate(pairs)}
    rels: dict[str, set[Pair]] = {}
    for m, r in M.frame.relations.items():
        rels[m] = {(index[(a, e)], index[(b, e)]) for a, b in r for e in M.domains[a]
                   if (b, e) in index}
    rels[SHARED] = {(index[(w, e)], index[(w, d)]) for w in M.worlds
                    for e in M.domains[w] for d in M.domains[w]}
    val = {p: frozenset(index[(w, e)] for w, s in ext.items() for e in s)
           for p, ext in M.preds.items()}
    frame = Frame(tuple(range(len(pairs))), {m: frozenset(r) for m, r in rels.items()})
    return PropKripkeModel(frame, val), index


# --------------------------------------------------------------- interchange


def model_to_json(M: FOKripkeModel) -> dict:
    ws = list(M.worlds)
    return {
        "worlds": ws,
        "relations": {m: sorted([a, b] for a, b in r) for m, r in sorted(M.frame.relations.items())},
        "domains": {str(w): sorted(M.domains[w]) for w in ws},
        "preds": {p: {str(w): sorted(s) for w, s in sorted(ext.items())}
                  for p, ext in sorted(M.preds.items())},
        "consts": {c: {str(w): e for w, e in sorted(v.items())} for c, v in sorted(M.consts.items())},
        "mode": M.mode,
    }


def model_from_json(data: Mapping | str) -> FOKripkeModel:
    if isinstance(data, str):
        data = json.loads(data)
    frame = Frame(tuple(data["worlds"]),
                  {m: frozenset(tuple(p) for p in r) for m, r in data.get("relations", {}).items()})
    return FOKripkeModel(
        frame,
        {int(w): frozenset(d) for w, d in data["domains"].items()},
        {p: {int(w): frozenset(s) for w, s in ext.items()} for p, ext in data.get("preds", {}).items()},
        {c: {int(w): int(e) for w, e in v.items()} for c, v in data.get("consts", {}).items()},
        data.get("mode", "xd"),
    )


def dump_model(M: FOKripkeModel) -> str:
    return json.dumps(model_to_json(M), sort_keys=True)


def frame_to_dot(F: Frame, name: str = "frame") -> str:
    lines = [f"digraph {name} {{"]
    for w in F.worlds:
        lines.append(f"  w{w};")
    for m, r in sorted(F.relations.items()):
        for a, b in sorted(r):
            lines.append(f'  w{a} -> w{b} [label="{m}"];')
    lines.append("}")
    return "\n".join(lines)


def restrict_model(M: FOKripkeModel, keep: Iterable[int]) -> FOKripkeModel:
    """Submodel on a world subset (used to drop unreachable worlds)."""
    keep = sorted(set(keep))
    ks = set(keep)
    frame = Frame(tuple(keep), {m: frozenset((a, b) for a, b in r if a in ks and b in ks)
                                for m, r in M.frame.relations.items()})
    return FOKripkeModel(
        frame, {w: M.domains[w] for w in keep},
        {p: {w: s for w, s in ext.items() if w in ks} for p, ext in M.preds.items()},
        {c: {w: e for w, e in v.items() if w in ks} for c, v in M.consts.items()},
        M.mode,
    )
