"""Component deciders: the outcome type, the decider contract and two implementations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol, Sequence, runtime_checkable

from .quasistates import Basis, enumerate_quasistates, enumerate_types
from .search import find_model, realizable_quasistates as sat_realizable
from .semantics import (
    Evaluator, FOKripkeModel, Frame, FrameClassSpec, S5_FRAMES, check_prop, enumerate_fomodels,
    prop_holds_globally,
)
from .syntax import SHARED, Atom, Formula, Not, constants, modalities, predicates, subformulas


# ------------------------------------------------------------------ outcomes


@dataclass(frozen=True)
class Valid:
    kind = "valid"

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Invalid:
    witness: Any = None
    world: int = 0
    certificate: Any = None
    kind = "invalid"


@dataclass(frozen=True)
class Unknown:
    reason: str = "search bound exhausted"
    kind = "unknown"


DecisionOutcome = Valid | Invalid | Unknown


def is_valid(o) -> bool:
    return isinstance(o, Valid)


def is_invalid(o) -> bool:
    return isinstance(o, Invalid)


def is_unknown(o) -> bool:
    return isinstance(o, Unknown)


@dataclass
class Realizable:
    """Quasistates (as sets of sign vectors) found realised, with witnesses.

    ``complete`` says the list is exhaustive under the decider's own
    completeness assumption.
    """

    found: list[tuple[frozenset, Any]]
    complete: bool


@runtime_checkable
class ComponentDecider(Protocol):
    modality: str
    mode: str
    complete: bool

    def decide_local(self, phi: Formula) -> DecisionOutcome: ...

    def decide_global(self, phi: Formula, psi: Formula) -> DecisionOutcome: ...


class ContractError(ValueError):
    pass


# ---------------------------------------------------------- bounded decider


class BoundedDecider:
    """Model search over a frame class up to fixed world/element bounds.

    With ``assume_fmp`` the caller asserts the bounds are large enough, so an
    exhausted search means Valid; otherwise it means Unknown.
    """

    def __init__(self, spec: FrameClassSpec, max_worlds: int, max_elems: int, mode: str = "xd",
                 assume_fmp: bool = False, modality: str = "1", *, prop: bool = False,
                 commute: Sequence[str] = (), engine: str = "sat"):
        if max_worlds < 1 or max_elems < 1:
            raise ValueError("bounds must be positive")
        if mode not in ("xd", "cd"):
            raise ValueError(f"unknown domain mode {mode!r}")
        if engine not in ("sat", "enumerate"):
            raise ValueError(f"unknown search engine {engine!r}")
        self.spec = spec
        self.max_worlds = max_worlds
        self.max_elems = max_elems
        self.mode = mode
        self.complete = assume_fmp
        self.modality = modality
        self.prop = prop
        self.engine = engine
        self.specs: dict[str, FrameClassSpec] = {modality: spec}
        self.commute: tuple[tuple[str, str], ...] = ()
        if prop:
            self.specs[SHARED] = S5_FRAMES
            self.commute = tuple((kind, modality) for kind in commute)
        self._cache: dict[tuple, Any] = {}
        self.calls = 0

    def __repr__(self):
        fmp = ", fmp" if self.complete else ""
        kind = "prop" if self.prop else self.mode
        return (f"BoundedDecider({self.spec.condition}, {self.modality}, {kind}, "
                f"{self.max_worlds}w/{self.max_elems}e{fmp})")

    @property
    def completeness_note(self) -> str:
        if self.complete:
            return "exhausted searches are reported Valid (finite model bound asserted)"
        return "exhausted searches are reported Unknown"

    def _check_query(self, *fs: Formula) -> None:
        allowed = set(self.specs)
        for f in fs:
            bad = modalities(f) - allowed
            if bad:
                raise ContractError(f"modality {sorted(bad)[0]!r} is outside this decider's language")

    def _exhausted(self) -> DecisionOutcome:
        if self.complete:
            return Valid()
        return Unknown(f"no model with <= {self.max_worlds} worlds and <= {self.max_elems} elements")

    def _search(self, **kw):
        self.calls += 1
        if self.engine == "enumerate" and not self.prop:
            return self._enumerate(**kw)
        return find_model(self.specs, self.max_worlds, self.max_elems, self.mode,
                          prop=self.prop, commute=self.commute, **kw)

    def _enumerate(self, global_=(), refute_root=()):
        from .search import SearchResult
        fs = list(global_) + list(refute_root)
        preds = predicates(fs)
        consts = constants(fs)
        for n in range(1, self.max_worlds + 1):
            for k in range(1, self.max_elems + 1):
                for M in enumerate_fomodels(self.specs, n, k, self.mode, preds, consts):
                    ev = Evaluator(M)
                    if not all(ev.holds_globally(f) for f in global_):
                        continue
                    for w in M.worlds:
                        if all(not ev.holds_at(w, f) for f in refute_root):
                            return SearchResult(True, _reroot(M, w), 0)
        return SearchResult(False)

    def _confirm(self, model, refuted: Sequence[Formula], globals_: Sequence[Formula] = ()) -> None:
        if self.prop:
            for f in refuted:
                assert not check_prop(model, 0, f), "search returned a non-refuting model"
            for f in globals_:
                assert prop_holds_globally(model, f), "search returned a non-model"
            return
        ev = Evaluator(model)
        for f in refuted:
            assert not ev.holds_at(0, f), "search returned a non-refuting model"
        for f in globals_:
            assert ev.holds_globally(f), "search returned a non-model"

    def decide_local(self, phi: Formula) -> DecisionOutcome:
        self._check_query(phi)
        key = ("local", phi)
        if key not in self._cache:
            r = self._search(refute_root=[phi])
            if r.found:
                self._confirm(r.model, [phi])
                self._cache[key] = Invalid(r.model, 0)
            else:
                self._cache[key] = self._exhausted()
        return self._cache[key]

    def decide_global(self, phi: Formula, psi: Formula) -> DecisionOutcome:
        self._check_query(phi, psi)
        key = ("global", phi, psi)
        if key not in self._cache:
            r = self._search(global_=[phi], refute_root=[psi])
            if r.found:
                self._confirm(r.model, [psi], [phi])
                self._cache[key] = Invalid(r.model, 0)
            else:
                self._cache[key] = self._exhausted()
        return self._cache[key]

    def realizable_quasistates(self, fs: Sequence[Formula], global_premise: Formula | None = None) -> Realizable:
        """Sign-vector sets over fs realised at some world of a bounded model of the premise."""
        prem = [] if global_premise is None else [global_premise]
        self._check_query(*fs, *prem)
        key = ("realize", tuple(fs), global_premise)
        if key not in self._cache:
            self.calls += 1
            found = sat_realizable(self.specs, self.max_worlds, self.max_elems, self.mode, fs,
                                   global_=prem, prop=self.prop, commute=self.commute)
            self._cache[key] = Realizable(found, self.complete)
        return self._cache[key]


def _reroot(M: FOKripkeModel, w: int) -> FOKripkeModel:
    """Swap world w with world 0 so the distinguished world is 0."""
    if w == 0:
        return M
    sw = lambda v: 0 if v == w else (w if v == 0 else v)
    frame = Frame(M.frame.worlds, {m: frozenset((sw(a), sw(b)) for a, b in r)
                                   for m, r in M.frame.relations.items()})
    return FOKripkeModel(frame, {sw(v): d for v, d in M.domains.items()},
                         {p: {sw(v): s for v, s in ext.items()} for p, ext in M.preds.items()},
                         {c: {sw(v): e for v, e in m.items()} for c, m in M.consts.items()},
                         M.mode)


def bounded_decider(spec: FrameClassSpec, max_worlds: int, max_elems: int, mode: str = "xd",
                    assume_fmp: bool = False, modality: str = "1", **kw) -> BoundedDecider:
    return BoundedDecider(spec, max_worlds, max_elems, mode, assume_fmp, modality, **kw)


def prop_bounded_decider(spec: FrameClassSpec, max_worlds: int, modality: str = "1",
                         mode: str = "xd", assume_fmp: bool = False,
                         max_class: int | None = None) -> BoundedDecider:
    """Decider for [L, S5]-style bimodal logics: lcom always, rcom as well for cd.

    ``max_class`` caps the size of E-classes (the analogue of a domain bound).
    """
    commute = ("lcom",) if mode == "xd" else ("lcom", "rcom")
    return BoundedDecider(spec, max_worlds, max_class or max_worlds, mode, assume_fmp, modality,
                          prop=True, commute=commute)


# --------------------------------------------------------------- FO1 decider


class Fo1Decider:
    """Quantifier-only fragment, decided exactly by quasistate search."""

    complete = True
    completeness_note = "complete: modality-free formulas are decided exactly"

    def __init__(self, modality: str = "1", mode: str = "xd"):
        self.modality = modality
        self.mode = mode

    def _check(self, *fs: Formula) -> None:
        for f in fs:
            if modalities(f):
                raise ContractError("the quantifier-only decider received a modal formula")
            if constants(f) or any(type(g).__name__ == "Eq" for g in subformulas(f)):
                raise ContractError("the quantifier-only decider is equality-free")

    def _search(self, everywhere: Formula | None, refute: Formula):
        """A quasistate whose types all contain `everywhere` and one lacks `refute`."""
        roots = [refute] + ([everywhere] if everywhere is not None else [])
        basis = Basis(subformulas(roots), prop=False)
        types = list(enumerate_types(basis))
        if everywhere is not None:
            types = [t for t in types if basis.contains(t, everywhere)]
        for t in types:
            if basis.contains(t, refute):
                continue
            sig = t & basis.quant_mask
            pool = [u for u in types if u & basis.quant_mask == sig]
            pool = [u for u in pool if all(sig >> k & 1 or not u >> b & 1 for k, b in basis.quant)]
            if t not in pool:
                continue
            if all(not sig >> k & 1 or any(u >> b & 1 for u in pool) for k, b in basis.quant):
                return basis, pool, t
        return None

    def _witness(self, basis: Basis, pool: list[int], t: int) -> FOKripkeModel:
        order = [t] + [u for u in pool if u != t]
        atoms = [f for f in basis.formulas if isinstance(f, Atom)]
        preds = {a.pred: {0: frozenset(e for e, u in enumerate(order) if basis.contains(u, a))}
                 for a in atoms}
        frame = Frame((0,), {self.modality: frozenset()})
        return FOKripkeModel(frame, {0: frozenset(range(len(order)))}, preds, {}, self.mode)

    def decide_local(self, phi: Formula) -> DecisionOutcome:
        self._check(phi)
        hit = self._search(None, phi)
        if hit is None:
            return Valid()
        M = self._witness(*hit)
        assert not Evaluator(M).check(0, 0, phi)
        return Invalid(M, 0)

    def decide_global(self, phi: Formula, psi: Formula) -> DecisionOutcome:
        self._check(phi, psi)
        hit = self._search(phi, psi)
        if hit is None:
            return Valid()
        return Invalid(self._witness(*hit), 0)


def fo1_decider(modality: str = "1", mode: str = "xd") -> Fo1Decider:
    return Fo1Decider(modality, mode)


def realizable_by_queries(decider, basis: Basis, fs: Sequence[Formula],
                          global_premise: Formula | None, realise) -> Realizable:
    """Fallback for deciders without a batch interface: test every quasistate."""
    found = []
    complete = True
    for q in enumerate_quasistates(basis):
        target = Not(realise(q))
        out = (decider.decide_local(target) if global_premise is None
               else decider.decide_global(global_premise, target))
        if isinstance(out, Invalid):
            vec = frozenset(tuple(bool(t >> k & 1) for k in range(len(basis))) for t in q)
            found.append((vec, out.witness))
        elif isinstance(out, Unknown):
            complete = False
    return Realizable(found, complete)
