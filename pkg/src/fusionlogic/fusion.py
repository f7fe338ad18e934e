"""Deciding local and global consequence in a fusion from component deciders.

Global consequence searches for a set Q of quasistates meeting the three
non-derivability conditions.  Local consequence recurses on alternation depth:
membership of each quasistate in Q_i is itself a local question of smaller
depth.  Invalid local outcomes can be turned into finite countermodels by
grafting component witnesses into a tapered cactus.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .deciders import (
    ContractError, Invalid, Realizable, Unknown, Valid, realizable_by_queries,
)
from .measures import COMPONENTS, adp, adp_i, gamma, md, other, surrogate, theta
from .quasistates import Basis, dump_quasistate, realisability, realisability_disj
from .search import find_model
from .semantics import (
    K_FRAMES, Evaluator, FOKripkeModel, Frame, FrameClassSpec, model_errors,
)
from .syntax import (
    NAV, SHARED, VAR, And, Atom, Box, Eq, Exists, Formula, Implies, Not, box_iE_upto, box_upto,
    constants, dbox, ddiamond, modalities, prop_letter, subformulas, Forall, to_str,
)

STRATEGIES = ("subset_enumeration", "elimination_fixpoint")


@dataclass(eq=False)
class FusionConfig:
    d1: Any
    d2: Any
    domain_mode: str = "xd"
    global_strategy: str = "subset_enumeration"
    emit_countermodels: bool = False
    subset_budget: int = 4096
    _engine: Any = field(default=None, repr=False)

    def __post_init__(self):
        if self.domain_mode not in ("xd", "cd"):
            raise ValueError(f"unknown domain mode {self.domain_mode!r}")
        if self.global_strategy not in STRATEGIES:
            raise ValueError(f"unknown global strategy {self.global_strategy!r}")
        for k, d in (("1", self.d1), ("2", self.d2)):
            if getattr(d, "modality", k) != k:
                raise ValueError(f"decider for component {k} speaks modality {d.modality!r}")
            if getattr(d, "mode", self.domain_mode) != self.domain_mode:
                raise ValueError("component deciders must share the domain mode")

    def engine(self) -> "FusionEngine":
        if self._engine is None:
            self._engine = FusionEngine(self, prop=False)
        return self._engine


@dataclass
class QSet:
    """Q_i(phi) as computed: sure members, undetermined ones, and whether the
    candidate pool was exhaustive."""

    basis: Basis
    sure: list[frozenset]
    unsure: list[frozenset]
    complete: bool


def _bits(vec: Sequence[bool]) -> int:
    t = 0
    for k, b in enumerate(vec):
        if b:
            t |= 1 << k
    return t


def _qkey(q: frozenset) -> tuple:
    return tuple(sorted(q))


class FusionEngine:
    """Shared machinery for the first-order and the shared-S5 pipelines."""

    def __init__(self, cfg, prop: bool):
        self.cfg = cfg
        self.prop = prop
        self._local: dict[Formula, Any] = {}
        self._Q: dict[tuple[str, Formula], QSet] = {}
        self.stats = {"local_calls": 0, "component_calls": 0}

    # -- helpers
    def dec(self, i: str):
        return self.cfg.d1 if i == "1" else self.cfg.d2

    def sur(self, i: str, f: Formula) -> Formula:
        return surrogate(i, f, self.prop)

    def prefix(self, i: str, m: int, f: Formula) -> Formula:
        return box_iE_upto(i, m, f) if self.prop else box_upto(i, m, f)

    def check_language(self, *fs: Formula) -> None:
        allowed = set(COMPONENTS) | ({SHARED} if self.prop else set())
        for f in fs:
            bad = modalities(f) - allowed
            if bad:
                raise ContractError(f"modality {sorted(bad)[0]!r} is not part of the fused language")
            if not self.prop and (constants(f) or any(isinstance(g, Eq) for g in subformulas(f))):
                raise ContractError("fusion decisions are defined for equality-free formulas")
            if self.prop and any(isinstance(g, (Atom, Exists, Eq)) for g in subformulas(f)):
                raise ContractError("the shared-S5 pipeline takes propositional formulas")

    def realized(self, i: str, basis: Basis, premise: Formula | None) -> tuple[set[frozenset], bool]:
        """Quasistates over basis realised in component i under a global premise."""
        d = self.dec(i)
        fs = [self.sur(i, f) for f in basis.formulas]
        self.stats["component_calls"] += 1
        if hasattr(d, "realizable_quasistates"):
            r: Realizable = d.realizable_quasistates(fs, premise)
        else:
            sub_basis = basis
            r = realizable_by_queries(d, sub_basis, fs, premise,
                                      lambda q: self.sur(i, realisability(sub_basis, q)))
        return {frozenset(_bits(v) for v in vec) for vec, _ in r.found}, r.complete

    # -- local consequence
    def decide_local(self, phi: Formula):
        self.check_language(phi)
        return self._decide_local(phi)

    def _decide_local(self, phi: Formula):
        if phi in self._local:
            return self._local[phi]
        self.stats["local_calls"] += 1
        value, i = adp(phi)
        if value == 0:
            self.stats["component_calls"] += 1
            out = self.dec(i).decide_local(phi)
            if isinstance(out, Invalid):
                out = Invalid(None, 0, certificate=out.witness)
        else:
            out = self._lemma(i, phi, value)
        self._local[phi] = out
        return out

    def _l3(self, i: str, phi: Formula, basis: Basis, Q: Iterable[frozenset]):
        m = md(i, phi)
        ante = self.prefix(i, m, self.sur(i, realisability_disj(basis, Q)))
        self.stats["component_calls"] += 1
        return self.dec(i).decide_local(Implies(ante, self.sur(i, phi)))

    def _lemma(self, i: str, phi: Formula, value: int):
        Qs = self.compute_Q(i, phi, value)
        lo = self._l3(i, phi, Qs.basis, Qs.sure)
        if isinstance(lo, Invalid):
            return Invalid(None, 0, certificate=lo.witness)
        if not Qs.complete:
            return Unknown("component search could not bound the quasistate candidates")
        if not Qs.unsure:
            return lo if isinstance(lo, Valid) else Unknown(lo.reason)
        hi = self._l3(i, phi, Qs.basis, Qs.sure + Qs.unsure)
        if isinstance(hi, Valid):
            return Valid()
        return Unknown("undetermined quasistate memberships change the outcome")

    def compute_Q(self, i: str, phi: Formula, bound: int | None = None) -> QSet:
        """Q_i(phi): Theta-quasistates whose realisability sentence is satisfiable."""
        key = (i, phi)
        if key in self._Q:
            return self._Q[key]
        basis = Basis(theta(i, subformulas(phi)), prop=self.prop)
        j = other(i)
        cands, complete = self.realized(j, basis, None)
        needs_recursion = any(isinstance(f, Box) and f.mod == i for f in basis.formulas)
        sure, unsure = [], []
        for q in sorted(cands, key=_qkey):
            if not needs_recursion:
                # q-hat lies in component j's language and was just realised there
                sure.append(q)
                continue
            target = Not(realisability(basis, q))
            if bound is not None:
                assert adp(target)[0] < bound, "alternation depth failed to decrease"
            out = self._decide_local(target)
            if isinstance(out, Invalid):
                sure.append(q)
            elif isinstance(out, Unknown):
                unsure.append(q)
        res = QSet(basis, sure, unsure, complete)
        self._Q[key] = res
        return res

    # -- global consequence
    def decide_global(self, phi: Formula, psi: Formula):
        self.check_language(phi, psi)
        basis = Basis(subformulas([phi, psi]), prop=self.prop)
        c1, ok1 = self.realized("1", basis, self.sur("1", phi))
        c2, ok2 = self.realized("2", basis, self.sur("2", phi))
        cands = sorted(c1 & c2, key=_qkey)
        complete = ok1 and ok2
        if self.cfg.global_strategy == "elimination_fixpoint":
            return self._fixpoint(phi, psi, basis, cands, complete)
        return self._subsets(phi, psi, basis, cands, complete)

    def _conditions(self, phi, psi, basis, Q: list[frozenset]):
        """Check (C1)-(C3) for Q: returns 'holds', 'fails' or 'unknown', plus a witness."""
        Qhat = realisability_disj(basis, Q)
        prem1 = And(self.sur("1", phi), self.sur("1", Qhat))
        r1, ok1 = self.realized("1", basis, prem1)
        r2, ok2 = self.realized("2", basis, self.sur("2", Qhat))
        status = "holds"
        for q in Q:
            if q not in r1 or q not in r2:
                if ok1 and ok2:
                    return "fails", None
                status = "unknown"
        self.stats["component_calls"] += 1
        c1 = self.dec("1").decide_global(prem1, self.sur("1", psi))
        if isinstance(c1, Valid):
            return "fails", None
        if isinstance(c1, Unknown):
            return "unknown", None
        return status, c1.witness

    def _certificate(self, basis: Basis, Q: list[frozenset]) -> dict:
        return {"basis": [to_str(f) for f in basis.formulas],
                "quasistates": [dump_quasistate(basis, q) for q in Q]}

    def _subsets(self, phi, psi, basis, cands, complete):
        """Largest candidate sets first; Q = {} comes last (its sentence is falsum)."""
        n = len(cands)
        pending = False
        tried = 0
        for size in range(n, -1, -1):
            for combo in itertools.combinations(range(n), size):
                tried += 1
                if tried > self.cfg.subset_budget:
                    return Unknown(f"subset budget of {self.cfg.subset_budget} exhausted "
                                   f"over {n} candidate quasistates")
                Q = [cands[k] for k in combo]
                status, _ = self._conditions(phi, psi, basis, Q)
                if status == "holds":
                    return Invalid(None, 0, certificate=self._certificate(basis, Q))
                if status == "unknown":
                    pending = True
        if pending or not complete:
            return Unknown("some candidate sets could not be ruled out")
        return Valid()

    def _fixpoint(self, phi, psi, basis, cands, complete):
        S = list(cands)
        exact = complete
        while True:
            Shat = realisability_disj(basis, S)
            r1, ok1 = self.realized("1", basis, And(self.sur("1", phi), self.sur("1", Shat)))
            r2, ok2 = self.realized("2", basis, self.sur("2", Shat))
            exact = exact and ok1 and ok2
            keep = [q for q in S if q in r1 and q in r2]
            if keep == S:
                break
            S = keep
        status, _ = self._conditions(phi, psi, basis, S)
        if status == "holds":
            return Invalid(None, 0, certificate=self._certificate(basis, S))
        if status == "fails" and exact:
            return Valid()
        return Unknown("elimination could not be completed exactly")


# ---------------------------------------------------------------- the cactus


@dataclass
class TaperedRun:
    """An element of the cactus: the worlds it lives in and its type slice at each."""

    values: dict[int, frozenset]  # world -> frozenset of (formula, sign)

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self.values)


@dataclass
class Cactus:
    worlds: list[int]
    relations: dict[str, set[tuple[int, int]]]
    root: int
    runs: list[TaperedRun]
    thorns: set[int]
    stage: str


class _Ids:
    def __init__(self):
        self.n = 0

    def fresh(self) -> int:
        self.n += 1
        return self.n - 1


def _restrict(vals: frozenset, keep: frozenset) -> frozenset:
    return frozenset(p for p in vals if p[0] in keep)


def _merge(a: frozenset, b: frozenset) -> frozenset:
    da = dict(a)
    for f, s in b:
        if da.setdefault(f, s) != s:
            raise AssertionError(f"graft disagrees on {to_str(f)}")
    return frozenset(da.items())


def _distances(frame: Frame, mod: str, root: int) -> dict[int, int]:
    dist = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for w in frontier:
            for v in frame.successors(mod, w):
                if v not in dist:
                    dist[v] = dist[w] + 1
                    nxt.append(v)
        frontier = nxt
    return dist


def _spec_of(d) -> FrameClassSpec:
    return getattr(d, "spec", K_FRAMES)


class CactusBuilder:
    def __init__(self, engine: FusionEngine):
        if engine.prop:
            raise ValueError("countermodels are built for the first-order pipeline")
        self.E = engine
        self.ids = _Ids()

    def build(self, j: str, chi: Formula, full: bool) -> Cactus | None:
        E = self.E
        k = other(j)
        Phi = subformulas(chi)
        m = md(j, chi)
        if adp_i(j, chi) == 0:
            basis = None
            query = E.sur(j, chi)
        else:
            Qs = E.compute_Q(j, chi)
            basis = Qs.basis
            ante = E.prefix(j, m, E.sur(j, realisability_disj(basis, Qs.sure)))
            query = Implies(ante, E.sur(j, chi))
        out = E.dec(j).decide_local(query)
        if not isinstance(out, Invalid) or out.witness is None:
            return None
        M0: FOKripkeModel = out.witness
        ev = Evaluator(M0)
        dist = _distances(M0.frame, j, 0)
        h = {w: (m - dist[w]) if w in dist else -1 for w in M0.worlds}
        ren = {w: self.ids.fresh() for w in M0.worlds}
        slices = {w: gamma(j, h[w], Phi) for w in M0.worlds}
        sur_of = {f: E.sur(j, f) for f in Phi}
        if basis is not None:
            sur_of.update({f: E.sur(j, f) for f in basis.formulas})

        runs: list[TaperedRun] = []
        for e in sorted(M0.elements()):
            vals = {}
            for w in M0.worlds:
                if e in M0.domains[w]:
                    vals[ren[w]] = frozenset((f, ev.check(w, e, sur_of[f])) for f in slices[w])
            runs.append(TaperedRun(vals))

        rel_j = {(ren[a], ren[b]) for a, b in M0.frame.relations.get(j, ())}
        rels = {j: set(rel_j), k: set()}
        worlds = [ren[w] for w in M0.worlds]
        spec_k = _spec_of(E.dec(k))
        thorns = set(M0.worlds) if full else set(M0.worlds) - {0}
        for v in sorted(thorns):
            V = ren[v]
            phiv = frozenset(theta(j, Phi)) & slices[v] if basis is not None else frozenset()
            if not any(isinstance(f, Box) and f.mod == k for f in phiv):
                rels[k] |= set(spec_k.unit_relation(V))
                continue
            qv = frozenset(_type_bits(basis, ev, v, e, sur_of) for e in M0.domains[v])
            child = self.build(k, Not(realisability(basis, qv)), full=False)
            if child is None:
                return None
            runs = self._graft(runs, V, child, phiv)
            worlds += [w for w in child.worlds if w != child.root]
            for mod, pairs in child.relations.items():
                for a, b in pairs:
                    a2 = V if a == child.root else a
                    b2 = V if b == child.root else b
                    rels.setdefault(mod, set()).add((a2, b2))
        return Cactus(worlds, rels, ren[0], runs, set(), j)

    @staticmethod
    def _graft(runs: list[TaperedRun], V: int, child: Cactus, phiv: frozenset) -> list[TaperedRun]:
        through = [c for c in child.runs if child.root in c.values]
        elsewhere = [c for c in child.runs if child.root not in c.values]
        by_key: dict[frozenset, list[TaperedRun]] = {}
        for c in through:
            by_key.setdefault(_restrict(c.values[child.root], phiv), []).append(c)
        out: list[TaperedRun] = []
        used: set[int] = set()
        for r in runs:
            if V not in r.values:
                out.append(r)
                continue
            matches = by_key.get(_restrict(r.values[V], phiv), [])
            if not matches:
                raise AssertionError("no child run matches a parent run at the graft world")
            for c in matches:
                used.add(id(c))
                vals = dict(r.values)
                for w, s in c.values.items():
                    if w == child.root:
                        vals[V] = _merge(vals[V], s)
                    else:
                        vals[w] = s
                out.append(TaperedRun(vals))
        if any(id(c) not in used for c in through):
            raise AssertionError("a child run found no parent partner")
        return out + [TaperedRun(dict(c.values)) for c in elsewhere]


def _type_bits(basis: Basis, ev: Evaluator, w: int, e: int, sur_of: dict) -> int:
    t = 0
    for n, f in enumerate(basis.formulas):
        if ev.check(w, e, sur_of[f]):
            t |= 1 << n
    return t


def cactus_to_model(c: Cactus, mode: str, preds: Iterable[str]) -> FOKripkeModel:
    """Runs become elements; P holds of run r at w iff P(x) is in r(w)."""
    order = [c.root] + sorted(w for w in c.worlds if w != c.root)
    num = {w: n for n, w in enumerate(order)}
    rels = {mod: frozenset((num[a], num[b]) for a, b in pairs) for mod, pairs in c.relations.items()}
    frame = Frame(tuple(range(len(order))), rels)
    domains = {num[w]: frozenset(n for n, r in enumerate(c.runs) if w in r.values) for w in order}
    ext = {}
    for p in sorted(preds):
        a = Atom(p, VAR)
        ext[p] = {num[w]: frozenset(n for n, r in enumerate(c.runs)
                                    if w in r.values and (a, True) in r.values[w])
                  for w in order}
    if mode == "cd":
        every = frozenset(range(len(c.runs)))
        if any(d != every for d in domains.values()):
            raise AssertionError("constant-domain cactus has a partial run")
    return FOKripkeModel(frame, domains, ext, {}, mode)


# ------------------------------------------------------------ public surface


def decide_global_fusion(cfg: FusionConfig, phi: Formula, psi: Formula):
    return cfg.engine().decide_global(phi, psi)


def decide_local_fusion(cfg: FusionConfig, phi: Formula):
    out = cfg.engine().decide_local(phi)
    if cfg.emit_countermodels and isinstance(out, Invalid) and out.witness is None:
        M = build_countermodel_local(cfg, phi)
        if M is not None:
            return Invalid(M, 0, certificate=out.certificate)
    return out


def compute_Q(cfg: FusionConfig, i: str, phi: Formula) -> QSet:
    return cfg.engine().compute_Q(i, phi)


def build_countermodel_local(cfg: FusionConfig, phi: Formula) -> FOKripkeModel | None:
    eng = cfg.engine()
    if not isinstance(eng.decide_local(phi), Invalid):
        return None
    _, i = adp(phi)
    cactus = CactusBuilder(eng).build(i, phi, full=True)
    if cactus is None:
        return None
    preds = {g.pred for g in subformulas(phi) if isinstance(g, Atom)}
    M = cactus_to_model(cactus, cfg.domain_mode, preds)
    errs = model_errors(M)
    if errs:
        raise AssertionError(f"cactus model is malformed: {errs[0]}")
    for mod, d in (("1", cfg.d1), ("2", cfg.d2)):
        spec = _spec_of(d)
        if not spec.holds(M.frame.worlds, M.frame.relations.get(mod, frozenset())):
            raise AssertionError(f"relation {mod} left its frame class")
    if Evaluator(M).holds_at(0, phi):
        raise AssertionError("cactus model does not refute the formula")
    return M


# ---------------------------------------------------------------- the oracle


def fused_oracle(spec1: FrameClassSpec, spec2: FrameClassSpec, max_worlds: int, max_elems: int,
                 mode: str, phi: Formula, psi: Formula | None = None):
    """Direct search over fused frames.

    Local form (psi None): a model refuting phi at a world.  Global form: a
    model of phi everywhere refuting psi somewhere.  Exhaustion is reported
    Valid on the understanding that the bounds are taken as sufficient.
    """
    specs = {"1": spec1, "2": spec2}
    if psi is None:
        r = find_model(specs, max_worlds, max_elems, mode, refute_root=[phi])
        if r.found:
            assert not Evaluator(r.model).holds_at(0, phi)
    else:
        r = find_model(specs, max_worlds, max_elems, mode, global_=[phi], refute_root=[psi])
    return Invalid(r.model, 0) if r.found else Valid()


# ---------------------------------------------- a formula without finite models


def global_fmp_counterexample() -> tuple[Formula, Callable[[int], tuple[FOKripkeModel, set[int]]]]:
    """A formula with an infinite global model but no finite one.

    Returns the formula and a builder for the k-step prefix of its intended
    model, together with the frontier worlds whose successors are cut off.
    """
    p = prop_letter(NAV)
    Q = Atom("Q", VAR)
    phi = And(And(Forall(ddiamond(p, Q)), Implies(Exists(Q), Exists(Not(Q)))),
              Forall(Implies(Q, dbox(p, Q))))
    return phi, global_fmp_prefix


def global_fmp_prefix(k: int) -> tuple[FOKripkeModel, set[int]]:
    """Chain a_0 b_0 a_1 b_1 ... a_k linked by both relations; a_n carry the letter.

    Level n (a_n and b_n) has Q = {1..n} over the domain {1..n+1}.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    chain = []
    for n in range(k + 1):
        chain.append(("a", n))
        if n < k:
            chain.append(("b", n))
    num = {w: i for i, w in enumerate(chain)}
    edges = frozenset((i, i + 1) for i in range(len(chain) - 1))
    frame = Frame(tuple(range(len(chain))), {"1": edges, "2": edges})
    domains = {num[w]: frozenset(range(1, w[1] + 2)) for w in chain}
    qext = {num[w]: frozenset(range(1, w[1] + 1)) for w in chain}
    nav = {num[w]: (domains[num[w]] if w[0] == "a" else frozenset()) for w in chain}
    M = FOKripkeModel(frame, domains, {"Q": qext, prop_letter(NAV).body.pred: nav}, {}, "xd")
    frontier = {num[("a", k)]} | ({num[("b", k - 1)]} if k >= 1 else set())
    return M, frontier
