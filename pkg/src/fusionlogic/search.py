"""SAT-backed bounded model search.

Encodes "there is a model with n worlds and at most k elements over the given
frame classes satisfying these constraints" as CNF and hands it to a SAT
solver.  Every model it returns is decoded into an ordinary Kripke model so
callers can (and do) re-check it with the plain truth definition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from pysat.card import CardEnc, EncType
from pysat.solvers import Solver

from .semantics import (
    FOKripkeModel, Frame, FrameClassSpec, PropKripkeModel,
)
from .syntax import (
    SHARED, VAR, And, Atom, Box, Eq, Exists, Formula, Letter, Not, Verum,
    constants as formula_constants, letters as formula_letters,
    predicates as formula_predicates,
)

SOLVER = "m22"


class Encoding:
    """CNF for one model size.

    ``prop`` models have no elements; there ``n_elems`` caps the size of each
    E-class instead, mirroring a first-order domain bound.
    """

    def __init__(self, specs: Mapping[str, FrameClassSpec], n_worlds: int, n_elems: int,
                 mode: str = "xd", prop: bool = False,
                 commute: Sequence[tuple[str, str]] = ()):
        self.specs = dict(specs)
        self.n = n_worlds
        self.k = 1 if prop else n_elems
        self.mode = mode
        self.prop = prop
        self.solver = Solver(name=SOLVER)
        self.nvars = 0
        self.true = self.new()
        self.add([self.true])
        self.rel: dict[str, dict[tuple[int, int], int]] = {}
        self.dom: dict[tuple[int, int], int] = {}
        self.atoms: dict[tuple[str, int, int], int] = {}
        self.consts: dict[tuple[str, int, int], int] = {}
        self.memo: dict[tuple, int] = {}
        self._frame()
        if prop and SHARED in self.rel and n_elems < n_worlds:
            self._cap_classes(n_elems)
        for kind, mod in commute:
            self._commute(kind, mod)
        self._domains()

    # -- plumbing
    def new(self) -> int:
        self.nvars += 1
        return self.nvars

    def add(self, clause: Iterable[int]) -> None:
        self.solver.add_clause(list(clause))

    def close(self) -> None:
        self.solver.delete()

    @property
    def worlds(self) -> range:
        return range(self.n)

    @property
    def elems(self) -> range:
        return range(self.k)

    # -- frame
    def _frame(self) -> None:
        W = self.worlds
        for m, spec in sorted(self.specs.items()):
            R = {(a, b): self.new() for a in W for b in W}
            self.rel[m] = R
            cond = spec.condition
            if cond == "equivalence":
                for a in W:
                    self.add([R[a, a]])
            if cond == "difference":
                for a in W:
                    self.add([-R[a, a]])
            if cond in ("equivalence", "difference"):
                for a, b in itertools.product(W, W):
                    self.add([-R[a, b], R[b, a]])
                for a, b, c in itertools.product(W, W, W):
                    if cond == "equivalence" or a != c:
                        self.add([-R[a, b], -R[b, c], R[a, c]])
            if cond == "custom":
                selectors = []
                for r in spec.relations(list(W)):
                    s = self.new()
                    selectors.append(s)
                    for pair, v in R.items():
                        self.add([-s, v if pair in r else -v])
                self.add(selectors)

    def _cap_classes(self, cap: int) -> None:
        E = self.rel[SHARED]
        for w in self.worlds:
            cnf = CardEnc.atmost([E[w, v] for v in self.worlds], bound=cap,
                                 top_id=self.nvars, encoding=EncType.seqcounter)
            self.nvars = max(self.nvars, cnf.nv)
            for clause in cnf.clauses:
                self.add(clause)

    def _commute(self, kind: str, mod: str) -> None:
        """lcom: E;R within R;E.  rcom: R;E within E;R (diagrammatic order)."""
        E, R = self.rel[SHARED], self.rel[mod]
        first, second = (E, R) if kind == "lcom" else (R, E)
        other1, other2 = (R, E) if kind == "lcom" else (E, R)
        W = self.worlds
        mids: dict[tuple[int, int, int], int] = {}
        for a, c, b in itertools.product(W, W, W):
            z = self.new()
            mids[a, c, b] = z
            self.add([-z, other1[a, c]])
            self.add([-z, other2[c, b]])
        for a, c, b in itertools.product(W, W, W):
            self.add([-first[a, c], -second[c, b]] + [mids[a, d, b] for d in W])

    def _domains(self) -> None:
        W, K = self.worlds, self.elems
        if self.prop:
            for w in W:
                self.dom[w, 0] = self.true
            return
        if self.mode == "cd":
            alive = [self.new() for _ in K]
            self.add(alive)
            for w in W:
                for e in K:
                    self.dom[w, e] = alive[e]
            return
        for w in W:
            for e in K:
                self.dom[w, e] = self.new()
            self.add([self.dom[w, e] for e in K])
        for R in self.rel.values():
            for (a, b), r in R.items():
                for e in K:
                    self.add([-self.dom[a, e], -r, self.dom[b, e]])

    # -- signature
    def atom(self, pred: str, w: int, e: int) -> int:
        key = (pred, w, e)
        v = self.atoms.get(key)
        if v is None:
            v = self.atoms[key] = self.new()
        return v

    def const(self, c: str, w: int, e: int) -> int:
        key = (c, w, 0)
        if key not in self.consts:
            for ww in self.worlds:
                vs = []
                for d in self.elems:
                    v = self.new()
                    self.consts[c, ww, d] = v
                    self.add([-v, self.dom[ww, d]])
                    vs.append(v)
                self.add(vs)
                for a, b in itertools.combinations(vs, 2):
                    self.add([-a, -b])
        return self.consts[c, w, e]

    def _and(self, lits: Sequence[int]) -> int:
        if not lits:
            return self.true
        if len(lits) == 1:
            return lits[0]
        v = self.new()
        for l in lits:
            self.add([-v, l])
        self.add([v] + [-l for l in lits])
        return v

    def _or(self, lits: Sequence[int]) -> int:
        return -self._and([-l for l in lits])

    def _term_is(self, t: str, w: int, e: int, d: int) -> int:
        """Literal for 'term t denotes element d' (under x -> e)."""
        if t == VAR:
            return self.true if d == e else -self.true
        return self.const(t, w, d)

    # -- formulas
    def lit(self, f: Formula, w: int, e: int = 0) -> int:
        key = (f, w, e if f.free else None)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        r = self._encode(f, w, e)
        self.memo[key] = r
        return r

    def _encode(self, f: Formula, w: int, e: int) -> int:
        if isinstance(f, Verum):
            return self.true
        if isinstance(f, Not):
            return -self.lit(f.body, w, e)
        if isinstance(f, And):
            return self._and([self.lit(f.left, w, e), self.lit(f.right, w, e)])
        if isinstance(f, Letter):
            return self.atom(f.name, w, 0)
        if isinstance(f, Atom):
            if f.term == VAR:
                return self.atom(f.pred, w, e)
            return self._or([self._and([self.const(f.term, w, d), self.atom(f.pred, w, d)])
                             for d in self.elems])
        if isinstance(f, Eq):
            if f.left == f.right:
                return self.true
            return self._or([self._and([self._term_is(f.left, w, e, d), self._term_is(f.right, w, e, d)])
                             for d in self.elems])
        if isinstance(f, Box):
            R = self.rel.get(f.mod)
            if R is None:
                raise ValueError(f"no frame class given for modality {f.mod!r}")
            v = self.new()
            bad = []
            for u in self.worlds:
                t = self.lit(f.body, u, e)
                self.add([-v, -R[w, u], t])
                z = self.new()
                self.add([-z, R[w, u]])
                self.add([-z, -t])
                bad.append(z)
            self.add([v] + bad)
            return v
        if isinstance(f, Exists):
            if self.prop:
                raise ValueError("quantifier in a propositional query")
            if not f.body.free:
                return self.lit(f.body, w, e)
            return self._or([self._and([self.dom[w, d], self.lit(f.body, w, d)]) for d in self.elems])
        raise TypeError(f"cannot encode {f!r}")

    # -- constraints
    def require_global(self, f: Formula, worlds: Iterable[int] | None = None) -> None:
        for w in (self.worlds if worlds is None else worlds):
            if not f.free:
                self.add([self.lit(f, w)])
                continue
            for e in self.elems:
                self.add([-self.dom[w, e], self.lit(f, w, e)])

    def require_at(self, f: Formula, w: int = 0) -> None:
        self.require_global(f, [w])

    def refute_lit(self, f: Formula, w: int = 0) -> int:
        """A literal that holds iff f fails at w for some element of the domain."""
        if not f.free:
            return -self.lit(f, w)
        return self._or([self._and([self.dom[w, e], -self.lit(f, w, e)]) for e in self.elems])

    def refute_at(self, f: Formula, w: int = 0) -> None:
        self.add([self.refute_lit(f, w)])

    def solve(self, assumptions: Sequence[int] = ()) -> bool:
        return self.solver.solve(assumptions=list(assumptions))

    # -- decoding
    def _value(self, model: set[int], lit: int) -> bool:
        return lit in model

    def decode(self, preds: Iterable[str] = (), consts: Iterable[str] = ()) -> FOKripkeModel:
        model = set(self.solver.get_model())
        val = lambda l: l in model
        W = list(self.worlds)
        rels = {m: frozenset(p for p, v in R.items() if val(v)) for m, R in self.rel.items()}
        raw = {w: [e for e in self.elems if val(self.dom[w, e])] for w in W}
        used = sorted(set().union(*map(set, raw.values())))
        relabel = {e: k for k, e in enumerate(used)}
        domains = {w: frozenset(relabel[e] for e in raw[w]) for w in W}
        ext = {p: {w: frozenset(relabel[e] for e in raw[w] if val(self.atom(p, w, e))) for w in W}
               for p in sorted(set(preds))}
        cmap = {}
        for c in sorted(set(consts)):
            cmap[c] = {w: next(relabel[e] for e in self.elems if val(self.const(c, w, e))) for w in W}
        return FOKripkeModel(Frame(tuple(W), rels), domains, ext, cmap, self.mode)

    def decode_prop(self, letters: Iterable[str] = ()) -> PropKripkeModel:
        model = set(self.solver.get_model())
        W = list(self.worlds)
        rels = {m: frozenset(p for p, v in R.items() if v in model) for m, R in self.rel.items()}
        val = {p: frozenset(w for w in W if self.atom(p, w, 0) in model) for p in sorted(set(letters))}
        return PropKripkeModel(Frame(tuple(W), rels), val)

    # -- quasistate readout at a world
    def members(self, w: int) -> list[tuple[int, int, int]]:
        """(presence literal, world, element) for each member of w's quasistate.

        First-order: the elements of the domain.  Propositional: the worlds of
        w's E-class, each carrying one type.
        """
        if self.prop:
            E = self.rel[SHARED]
            return [(E[w, v], v, 0) for v in self.worlds]
        return [(self.dom[w, e], w, e) for e in self.elems]

    def prepare(self, fs: Sequence[Formula], w: int = 0) -> None:
        """Encode fs at every member of w before solving, so readout sees real values."""
        for _, v, e in self.members(w):
            for f in fs:
                self.lit(f, v, e)

    def read_quasistate(self, fs: Sequence[Formula], w: int = 0) -> frozenset[tuple[bool, ...]]:
        model = set(self.solver.get_model())
        out = set()
        for present, v, e in self.members(w):
            if present in model:
                out.add(tuple(self.lit(f, v, e) in model for f in fs))
        return frozenset(out)

    def block_quasistate(self, fs: Sequence[Formula], q: frozenset[tuple[bool, ...]], w: int = 0) -> None:
        """Forbid world w from realising exactly the sign-vector set q."""
        types = sorted(q)
        mem = self.members(w)
        eq: dict[tuple[int, int], int] = {}
        for m, (present, v, e) in enumerate(mem):
            lits = [self.lit(f, v, e) for f in fs]
            for j, t in enumerate(types):
                match = [l if s else -l for l, s in zip(lits, t)]
                eq[m, j] = self._and([present] + match)
        outs = [self._and([present] + [-eq[m, j] for j in range(len(types))])
                for m, (present, _, _) in enumerate(mem)]
        misses = [self._and([-eq[m, j] for m in range(len(mem))]) for j in range(len(types))]
        self.add(outs + misses)


def signature_of(fs: Iterable[Formula]) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    fs = list(fs)
    return formula_predicates(fs), formula_constants(fs), formula_letters(fs)


@dataclass
class SearchResult:
    found: bool
    model: FOKripkeModel | PropKripkeModel | None = None
    world: int = 0


def find_model(specs: Mapping[str, FrameClassSpec], max_worlds: int, max_elems: int, mode: str, *,
               global_: Sequence[Formula] = (), at_root: Sequence[Formula] = (),
               refute_root: Sequence[Formula] = (), refute_somewhere: Sequence[Formula] = (),
               prop: bool = False, commute: Sequence[tuple[str, str]] = (),
               min_worlds: int = 1) -> SearchResult:
    """Search sizes min..max worlds for a model meeting the constraints.

    ``refute_somewhere`` formulas must each fail at the root world; since all
    worlds are interchangeable in the encoding this is "fails somewhere".
    """
    allf = list(global_) + list(at_root) + list(refute_root) + list(refute_somewhere)
    preds, consts, lets = signature_of(allf)
    for n in range(min_worlds, max_worlds + 1):
        enc = Encoding(specs, n, max_elems, mode, prop, commute)
        try:
            for f in global_:
                enc.require_global(f)
            for f in at_root:
                enc.require_at(f, 0)
            for f in list(refute_root) + list(refute_somewhere):
                enc.refute_at(f, 0)
            if enc.solve():
                m = enc.decode_prop(lets) if prop else enc.decode(preds, consts)
                return SearchResult(True, m, 0)
        finally:
            enc.close()
    return SearchResult(False)


def realizable_quasistates(specs: Mapping[str, FrameClassSpec], max_worlds: int, max_elems: int,
                           mode: str, fs: Sequence[Formula], *, global_: Sequence[Formula] = (),
                           prop: bool = False, commute: Sequence[tuple[str, str]] = (),
                           ) -> list[tuple[frozenset[tuple[bool, ...]], object]]:
    """All sign-vector sets over fs realised at some world of some bounded model.

    Each result comes with a witness model in which world 0 realises it.
    """
    seen: dict[frozenset, object] = {}
    preds, consts, lets = signature_of(list(fs) + list(global_))
    for n in range(1, max_worlds + 1):
        enc = Encoding(specs, n, max_elems, mode, prop, commute)
        try:
            for f in global_:
                enc.require_global(f)
            enc.prepare(fs)
            for q in seen:
                enc.block_quasistate(fs, q)
            while enc.solve():
                q = enc.read_quasistate(fs)
                seen[q] = enc.decode_prop(lets) if prop else enc.decode(preds, consts)
                enc.block_quasistate(fs, q)
        finally:
            enc.close()
    return sorted(seen.items(), key=lambda kv: sorted(kv[0]))
