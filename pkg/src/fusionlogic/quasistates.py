"""Types and quasistates over a subformula-closed set, as bitsets.

A ``Basis`` fixes a canonical order of the set; a type is an int whose bit k
says whether the k-th formula is in.  A quasistate is a frozenset of such ints.

The saturation clause is parameterised: first-order bases treat ``E x . f``
members existentially, propositional bases treat ``[]E f`` members
universally (the dual of ``<>E``).
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Sequence

from .syntax import (
    SHARED, And, Atom, Box, Exists, Formula, Not, Verum, conj, disj, Diamond, Forall,
    subformulas, to_str,
)
from .semantics import Evaluator, FOKripkeModel

TypeBits = int
Quasistate = frozenset  # frozenset[TypeBits]


def canonical_order(fs: Iterable[Formula]) -> tuple[Formula, ...]:
    return tuple(sorted(set(fs), key=lambda f: (f.size, to_str(f))))


class Basis:
    """A subformula-closed set in canonical order, with its saturation clause."""

    def __init__(self, formulas: Iterable[Formula], prop: bool | None = None):
        fs = canonical_order(formulas)
        missing = subformulas(fs) - set(fs)
        if missing:
            raise ValueError(f"basis is not closed under subformulas: {to_str(next(iter(missing)))}")
        self.formulas = fs
        self.index = {f: k for k, f in enumerate(fs)}
        if prop is None:
            prop = not any(isinstance(f, (Atom, Exists)) for f in fs)
        self.prop = prop
        # quantified members: (member index, body index)
        self.quant: list[tuple[int, int]] = []
        for k, f in enumerate(fs):
            if prop and isinstance(f, Box) and f.mod == SHARED:
                self.quant.append((k, self.index[f.body]))
            elif not prop and isinstance(f, Exists):
                self.quant.append((k, self.index[f.body]))
        self.quant_mask = 0
        for k, _ in self.quant:
            self.quant_mask |= 1 << k

    def __len__(self) -> int:
        return len(self.formulas)

    def __iter__(self):
        return iter(self.formulas)

    def __eq__(self, other):
        return isinstance(other, Basis) and self.formulas == other.formulas and self.prop == other.prop

    def __hash__(self):
        return hash((self.formulas, self.prop))

    def bit(self, f: Formula) -> int:
        return 1 << self.index[f]

    def members(self, t: TypeBits) -> list[Formula]:
        return [f for k, f in enumerate(self.formulas) if t >> k & 1]

    def signed(self, t: TypeBits) -> list[Formula]:
        return [f if t >> k & 1 else Not(f) for k, f in enumerate(self.formulas)]

    def contains(self, t: TypeBits, f: Formula) -> bool:
        return bool(t >> self.index[f] & 1)

    def sub_basis(self, fs: Iterable[Formula]) -> "Basis":
        return Basis(fs, self.prop)


def is_type(basis: Basis, t: TypeBits) -> bool:
    for k, f in enumerate(basis.formulas):
        v = t >> k & 1
        if isinstance(f, Verum) and not v:
            return False
        if isinstance(f, Not) and v == (t >> basis.index[f.body] & 1):
            return False
        if isinstance(f, And):
            both = (t >> basis.index[f.left] & 1) and (t >> basis.index[f.right] & 1)
            if v != both:
                return False
    return True


def enumerate_types(basis: Basis) -> Iterator[TypeBits]:
    """All (t1)/(t2)-consistent sign patterns, in increasing bit order of free members."""
    free = [k for k, f in enumerate(basis.formulas) if not isinstance(f, (Not, And, Verum))]
    fs = basis.formulas
    idx = basis.index
    for combo in range(1 << len(free)):
        t = 0
        for j, k in enumerate(free):
            if combo >> j & 1:
                t |= 1 << k
        # fs is ordered by size, so children are decided before parents
        for k, f in enumerate(fs):
            if isinstance(f, Verum):
                t |= 1 << k
            elif isinstance(f, Not):
                if not t >> idx[f.body] & 1:
                    t |= 1 << k
            elif isinstance(f, And):
                if t >> idx[f.left] & 1 and t >> idx[f.right] & 1:
                    t |= 1 << k
        yield t


def is_quasistate(basis: Basis, q: Iterable[TypeBits]) -> bool:
    q = list(q)
    if not q or not all(is_type(basis, t) for t in q):
        return False
    sig = q[0] & basis.quant_mask
    if any(t & basis.quant_mask != sig for t in q):
        return False
    return _witnessed(basis, sig, q)


def _witnessed(basis: Basis, sig: int, q: Sequence[TypeBits]) -> bool:
    for k, b in basis.quant:
        inside = bool(sig >> k & 1)
        if basis.prop:  # []E f: every type has f
            ok = all(t >> b & 1 for t in q)
        else:  # E x . f: some type has f
            ok = any(t >> b & 1 for t in q)
        if inside != ok:
            return False
    return True


def _allowed(basis: Basis, sig: int, t: TypeBits) -> bool:
    """Whether t may sit in a quasistate with quantifier signature sig."""
    for k, b in basis.quant:
        inside = bool(sig >> k & 1)
        has = bool(t >> b & 1)
        if basis.prop and inside and not has:
            return False
        if not basis.prop and not inside and has:
            return False
    return True


def enumerate_quasistates(basis: Basis, types: Iterable[TypeBits] | None = None) -> Iterator[Quasistate]:
    """Every quasistate, grouped by quantifier signature, subsets in binary order."""
    groups: dict[int, list[TypeBits]] = {}
    for t in (enumerate_types(basis) if types is None else types):
        groups.setdefault(t & basis.quant_mask, []).append(t)
    for sig in sorted(groups):
        allowed = [t for t in groups[sig] if _allowed(basis, sig, t)]
        for bits in range(1, 1 << len(allowed)):
            q = [t for k, t in enumerate(allowed) if bits >> k & 1]
            if _witnessed(basis, sig, q):
                yield frozenset(q)


def count_quasistates_bruteforce(basis: Basis) -> list[Quasistate]:
    """Reference filter: all non-empty type subsets passing (qs)."""
    ts = list(enumerate_types(basis))
    out = []
    for k in range(1, len(ts) + 1):
        for combo in itertools.combinations(ts, k):
            if is_quasistate(basis, combo):
                out.append(frozenset(combo))
    return out


# --------------------------------------------------------- realisability


def type_formula(basis: Basis, t: TypeBits) -> Formula:
    """t(x): conjunction of the signed members."""
    return conj(basis.signed(t))


def realisability(basis: Basis, q: Iterable[TypeBits]) -> Formula:
    """forall x OR t(x) & AND exists x t(x)   (prop: []E OR t & AND <>E t)."""
    ts = sorted(q)
    if not ts:
        raise ValueError("a quasistate is non-empty")
    bodies = [type_formula(basis, t) for t in ts]
    if basis.prop:
        return And(Box(SHARED, disj(bodies)), conj([Diamond(SHARED, b) for b in bodies]))
    return And(Forall(disj(bodies)), conj([Exists(b) for b in bodies]))


def realisability_disj(basis: Basis, Q: Iterable[Quasistate]) -> Formula:
    qs = sorted(Q, key=lambda q: sorted(q))
    return disj([realisability(basis, q) for q in qs])


# ---------------------------------------------------------- restrictions


def restrict(basis: Basis, t: TypeBits, sub: Basis) -> TypeBits:
    out = 0
    for k, f in enumerate(sub.formulas):
        if t >> basis.index[f] & 1:
            out |= 1 << k
    return out


def restrict_q(basis: Basis, q: Iterable[TypeBits], sub: Basis) -> Quasistate:
    return frozenset(restrict(basis, t, sub) for t in q)


def type_of_element(M: FOKripkeModel, w: int, e: int, basis: Basis,
                    ev: Evaluator | None = None) -> TypeBits:
    if e not in M.domains[w]:
        raise ValueError(f"element {e} is not in the domain of world {w}")
    ev = ev or Evaluator(M)
    t = 0
    for k, f in enumerate(basis.formulas):
        if ev.check(w, e, f):
            t |= 1 << k
    return t


def quasistate_at(M: FOKripkeModel, w: int, basis: Basis, ev: Evaluator | None = None) -> Quasistate:
    ev = ev or Evaluator(M)
    return frozenset(type_of_element(M, w, e, basis, ev) for e in sorted(M.domains[w]))


def dump_type(basis: Basis, t: TypeBits) -> str:
    return ", ".join(to_str(f) for f in basis.signed(t))


def dump_quasistate(basis: Basis, q: Iterable[TypeBits]) -> str:
    lines = ["["]
    for t in sorted(q):
        lines.append("  " + dump_type(basis, t))
    lines.append("]")
    return "\n".join(lines)
