"""Formula trees for one-variable modal logic, with parser, printer and builders.

The core node kinds are Atom, Eq, Not, And, Box, Exists and Verum for the
first-order language, plus Letter for propositional formulas.  Every other
connective (or, implication, the universal quantifier, diamonds, proposition
letters in the first-order language, falsum) is produced by a builder function
that expands into the core.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

VAR = "x"
SHARED = "E"  # the shared S5 modality of the propositional language
NAV = "__nav"  # reserved navigation letter used by dbox/ddiamond


class Formula:
    """Base class of all formula nodes.  Nodes are immutable and hash-cached."""

    __slots__ = ("_hash", "free", "size")

    def _init(self, key: tuple, free: bool, size: int) -> None:
        object.__setattr__(self, "_hash", hash(key))
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "size", size)

    def __setattr__(self, name, value):
        raise AttributeError("formulas are immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(other) is not type(self) or other._hash != self._hash:
            return False
        return self._fields() == other._fields()

    def _fields(self) -> tuple:
        raise NotImplementedError

    def children(self) -> tuple["Formula", ...]:
        return ()

    @property
    def closed(self) -> bool:
        return not self.free

    def __repr__(self) -> str:
        return f"<{to_str(self)}>"

    def __str__(self) -> str:
        return to_str(self)


class Verum(Formula):
    __slots__ = ()

    def __init__(self) -> None:
        self._init(("T",), False, 1)

    def _fields(self):
        return ()


class Atom(Formula):
    __slots__ = ("pred", "term")

    def __init__(self, pred: str, term: str = VAR) -> None:
        object.__setattr__(self, "pred", pred)
        object.__setattr__(self, "term", term)
        self._init(("A", pred, term), term == VAR, 1)

    def _fields(self):
        return (self.pred, self.term)


class Eq(Formula):
    __slots__ = ("left", "right")

    def __init__(self, left: str, right: str) -> None:
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._init(("=", left, right), VAR in (left, right), 1)

    def _fields(self):
        return (self.left, self.right)


class Letter(Formula):
    __slots__ = ("name",)

    def __init__(self, name: str) -> None:
        object.__setattr__(self, "name", name)
        self._init(("L", name), False, 1)

    def _fields(self):
        return (self.name,)


class Not(Formula):
    __slots__ = ("body",)

    def __init__(self, body: Formula) -> None:
        object.__setattr__(self, "body", body)
        self._init(("~", body._hash), body.free, body.size + 1)

    def _fields(self):
        return (self.body,)

    def children(self):
        return (self.body,)


class And(Formula):
    __slots__ = ("left", "right")

    def __init__(self, left: Formula, right: Formula) -> None:
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._init(("&", left._hash, right._hash), left.free or right.free,
                   left.size + right.size + 1)

    def _fields(self):
        return (self.left, self.right)

    def children(self):
        return (self.left, self.right)


class Box(Formula):
    __slots__ = ("mod", "body")

    def __init__(self, mod: str, body: Formula) -> None:
        object.__setattr__(self, "mod", mod)
        object.__setattr__(self, "body", body)
        self._init(("[]", mod, body._hash), body.free, body.size + 1)

    def _fields(self):
        return (self.mod, self.body)

    def children(self):
        return (self.body,)


class Exists(Formula):
    __slots__ = ("body",)

    def __init__(self, body: Formula) -> None:
        object.__setattr__(self, "body", body)
        self._init(("E", body._hash), False, body.size + 1)

    def _fields(self):
        return (self.body,)

    def children(self):
        return (self.body,)


# ---------------------------------------------------------------- languages


@dataclass(frozen=True)
class Language:
    """Signature a formula is checked against.

    ``predicates`` and ``constants`` set to None accept any name.
    """

    modality_ids: frozenset = frozenset({"1", "2"})
    predicates: frozenset | None = None
    equality: bool = False
    constants: frozenset | None = None

    def __post_init__(self):
        object.__setattr__(self, "modality_ids", frozenset(self.modality_ids))
        if not self.modality_ids:
            raise ValueError("a language needs at least one modality")
        if self.predicates is not None:
            object.__setattr__(self, "predicates", frozenset(self.predicates))
        if self.constants is not None:
            object.__setattr__(self, "constants", frozenset(self.constants))
            if self.constants and not self.equality:
                raise ValueError("constants require equality")

    def check(self, f: Formula) -> None:
        """Raise ValueError when ``f`` is not a formula of this language."""
        for g in iter_nodes(f):
            if isinstance(g, Box) and g.mod not in self.modality_ids:
                raise ValueError(f"unknown modality {g.mod!r}")
            terms: tuple = ()
            if isinstance(g, Atom):
                if self.predicates is not None and g.pred not in self.predicates:
                    raise ValueError(f"unknown predicate {g.pred!r}")
                terms = (g.term,)
            elif isinstance(g, Eq):
                if not self.equality:
                    raise ValueError("equality is not available in this language")
                terms = (g.left, g.right)
            for t in terms:
                if t == VAR:
                    continue
                if not self.equality:
                    raise ValueError(f"constant {t!r} needs a language with equality")
                if self.constants is not None and t not in self.constants:
                    raise ValueError(f"unknown constant {t!r}")


# ------------------------------------------------------------------ builders

TOP = Verum()
BOT = Not(TOP)


def top() -> Formula:
    return TOP


def bottom() -> Formula:
    return BOT


def neg(f: Formula) -> Formula:
    return Not(f)


def _balanced(op: Callable[[Formula, Formula], Formula], items: Sequence[Formula]) -> Formula:
    # balanced trees keep recursion depth logarithmic for long conjunctions
    if len(items) == 1:
        return items[0]
    mid = len(items) // 2
    return op(_balanced(op, items[:mid]), _balanced(op, items[mid:]))


def conj(*items: Formula | Iterable[Formula]) -> Formula:
    fs = _flatten(items)
    return _balanced(And, fs) if fs else TOP


def disj(*items: Formula | Iterable[Formula]) -> Formula:
    fs = _flatten(items)
    return _balanced(lambda a, b: Or(a, b), fs) if fs else BOT


def _flatten(items) -> list[Formula]:
    out: list[Formula] = []
    for it in items:
        if isinstance(it, Formula):
            out.append(it)
        else:
            out.extend(it)
    return out


def Or(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def Implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, Not(b)))


def Iff(a: Formula, b: Formula) -> Formula:
    return And(Implies(a, b), Implies(b, a))


def Forall(f: Formula) -> Formula:
    return Not(Exists(Not(f)))


def Diamond(mod: str, f: Formula) -> Formula:
    return Not(Box(mod, Not(f)))


def letter_pred(name: str) -> str:
    return name.upper()


def prop_letter(name: str) -> Formula:
    """First-order reading of a proposition letter: p is E x . P(x)."""
    return Exists(Atom(letter_pred(name), VAR))


def box_upto(mod: str, n: int, f: Formula) -> Formula:
    """f & []f & ... & []^n f."""
    parts = [f]
    cur = f
    for _ in range(n):
        cur = Box(mod, cur)
        parts.append(cur)
    return conj(parts)


def box_plus(mod: str, f: Formula) -> Formula:
    return And(f, Box(mod, f))


def diamond_plus(mod: str, f: Formula) -> Formula:
    return Or(f, Diamond(mod, f))


def dbox(p: Formula, psi: Formula, m1: str = "1", m2: str = "2") -> Formula:
    """Two-step box guided by the navigation letter p."""
    return And(
        Implies(p, Box(m1, Implies(Not(p), Box(m2, Implies(p, psi))))),
        Implies(Not(p), Box(m1, Implies(p, Box(m2, Implies(Not(p), psi))))),
    )


def ddiamond(p: Formula, psi: Formula, m1: str = "1", m2: str = "2") -> Formula:
    return Not(dbox(p, Not(psi), m1, m2))


def counter(p: Formula, psi: Formula, psi2: Formula, m1: str = "1", m2: str = "2") -> Formula:
    """forall x (psi -> dbox psi2) & forall x (ddiamond psi2 -> psi)."""
    if not psi.free and not psi2.free:
        raise ValueError("counter expects open arguments")
    return And(
        Forall(Implies(psi, dbox(p, psi2, m1, m2))),
        Forall(Implies(ddiamond(p, psi2, m1, m2), psi)),
    )


def next_step(p: Formula, psi: Formula, m1: str = "1", m2: str = "2") -> Formula:
    if psi.free:
        raise ValueError("next expects a closed argument")
    return And(ddiamond(p, psi, m1, m2), dbox(p, psi, m1, m2))


def card(marker: Formula, pred: str, const: str, box: str = "D", boxc: str = "C") -> Formula:
    """The cardinality sentence: at marker worlds the C-component has |pred| worlds."""
    if marker.free:
        raise ValueError("card expects a closed marker formula")
    is_c = Eq(VAR, const)
    unique = box_plus(boxc, Forall(Implies(is_c, Box(boxc, Not(is_c)))))
    count = Forall(Iff(Atom(pred, VAR), diamond_plus(boxc, is_c)))
    return box_plus(box, Implies(marker, And(unique, count)))


def box_iE(mod: str, m: int, f: Formula) -> Formula:
    """[]E []i []E applied m times."""
    for _ in range(m):
        f = Box(SHARED, Box(mod, Box(SHARED, f)))
    return f


def box_iE_upto(mod: str, m: int, f: Formula) -> Formula:
    return conj([box_iE(mod, k, f) for k in range(m + 1)])


def barcan(mod: str) -> Formula:
    """BF: A x . []P(x) -> [] A x . P(x)."""
    p = Atom("P", VAR)
    return Implies(Forall(Box(mod, p)), Box(mod, Forall(p)))


def converse_barcan(mod: str) -> Formula:
    p = Atom("P", VAR)
    return Implies(Box(mod, Forall(p)), Forall(Box(mod, p)))


MACROS: dict[str, Callable[[], Formula]] = {
    "BF1": lambda: barcan("1"),
    "BF2": lambda: barcan("2"),
    "CBF1": lambda: converse_barcan("1"),
    "CBF2": lambda: converse_barcan("2"),
}


# ------------------------------------------------------------ traversal etc.


def iter_nodes(f: Formula) -> Iterator[Formula]:
    """Every node occurrence of f, parents before children."""
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(reversed(g.children()))


def subformulas(f: Formula | Iterable[Formula]) -> frozenset[Formula]:
    seen: set[Formula] = set()
    stack = [f] if isinstance(f, Formula) else list(f)
    while stack:
        g = stack.pop()
        if g in seen:
            continue
        seen.add(g)
        stack.extend(g.children())
    return frozenset(seen)


def predicates(f: Formula | Iterable[Formula]) -> frozenset[str]:
    return frozenset(g.pred for g in subformulas(f) if isinstance(g, Atom))


def letters(f: Formula | Iterable[Formula]) -> frozenset[str]:
    return frozenset(g.name for g in subformulas(f) if isinstance(g, Letter))


def constants(f: Formula | Iterable[Formula]) -> frozenset[str]:
    out: set[str] = set()
    for g in subformulas(f):
        if isinstance(g, Atom):
            out.add(g.term)
        elif isinstance(g, Eq):
            out.update((g.left, g.right))
    out.discard(VAR)
    return frozenset(out)


def modalities(f: Formula | Iterable[Formula]) -> frozenset[str]:
    return frozenset(g.mod for g in subformulas(f) if isinstance(g, Box))


def uses_equality(f: Formula | Iterable[Formula]) -> bool:
    return any(isinstance(g, Eq) for g in subformulas(f)) or bool(constants(f))


def transform(f: Formula, leaf: Callable[[Formula], Formula | None],
              memo: dict | None = None) -> Formula:
    """Rebuild f bottom-up; ``leaf`` may replace any node (returning None keeps it)."""
    memo = {} if memo is None else memo

    def go(g: Formula) -> Formula:
        hit = memo.get(g)
        if hit is not None:
            return hit
        r = leaf(g)
        if r is None:
            if isinstance(g, Not):
                b = go(g.body)
                r = g if b is g.body else Not(b)
            elif isinstance(g, And):
                a, b = go(g.left), go(g.right)
                r = g if (a is g.left and b is g.right) else And(a, b)
            elif isinstance(g, Box):
                b = go(g.body)
                r = g if b is g.body else Box(g.mod, b)
            elif isinstance(g, Exists):
                b = go(g.body)
                r = g if b is g.body else Exists(b)
            else:
                r = g
        memo[g] = r
        return r

    return go(f)


def substitute(f: Formula, sigma: Mapping[str, Formula]) -> Formula:
    """Uniformly replace atoms P(x) by sigma[P]."""
    for img in sigma.values():
        if not isinstance(img, Formula) or isinstance(img, Letter):
            raise ValueError("substitution images must be first-order formulas")

    def leaf(g):
        if isinstance(g, Atom) and g.pred in sigma:
            if g.term != VAR:
                raise ValueError(f"cannot substitute into {g.pred}({g.term})")
            return sigma[g.pred]
        return None

    return transform(f, leaf)


def substitute_prop(f: Formula, sigma: Mapping[str, Formula]) -> Formula:
    return transform(f, lambda g: sigma.get(g.name) if isinstance(g, Letter) else None)


def translate_star(f: Formula) -> Formula:
    """P(x) -> P, E x -> <>E, modalities kept."""

    def leaf(g):
        if isinstance(g, Eq) or (isinstance(g, Atom) and g.term != VAR):
            raise ValueError("translation is defined for equality-free formulas only")
        if isinstance(g, Atom):
            return Letter(g.pred)
        if isinstance(g, Exists):
            return Diamond(SHARED, translate_star(g.body))
        if isinstance(g, Box) and g.mod == SHARED:
            raise ValueError(f"modality {SHARED!r} is reserved for the translation")
        return None

    return transform(f, leaf)


def translate_star_inv(f: Formula) -> Formula:
    def leaf(g):
        if isinstance(g, Letter):
            return Atom(g.name, VAR)
        if (isinstance(g, Not) and isinstance(g.body, Box) and g.body.mod == SHARED
                and isinstance(g.body.body, Not)):
            return Exists(translate_star_inv(g.body.body.body))
        if isinstance(g, Box) and g.mod == SHARED:
            raise ValueError("formula is not in the image of the translation")
        return None

    return transform(f, leaf)


# ------------------------------------------------------------------ printing

_IMP, _OR, _AND, _UN = 1, 2, 3, 4


def _match_or(g: Formula):
    if isinstance(g, Not) and isinstance(g.body, And):
        a, b = g.body.left, g.body.right
        if isinstance(a, Not) and isinstance(b, Not):
            return a.body, b.body
    return None


def _match_imp(g: Formula):
    if isinstance(g, Not) and isinstance(g.body, And) and isinstance(g.body.right, Not):
        return g.body.left, g.body.right.body
    return None


def to_str(f: Formula) -> str:
    """Print with recovered sugar; the output reparses to the same tree."""
    memo: dict[Formula, tuple[str, int]] = {}

    def wrap(g: Formula, need: int) -> str:
        s, lvl = go(g)
        return s if lvl >= need else f"({s})"

    def go(g: Formula) -> tuple[str, int]:
        hit = memo.get(g)
        if hit is not None:
            return hit
        r: tuple[str, int]
        if isinstance(g, Verum):
            r = ("true", 5)
        elif isinstance(g, Atom):
            r = (f"{g.pred}({g.term})", 5)
        elif isinstance(g, Eq):
            r = (f"{g.left} = {g.right}", 5)
        elif isinstance(g, Letter):
            r = (g.name, 5)
        elif isinstance(g, And):
            r = (f"{wrap(g.left, _AND)} & {wrap(g.right, _UN)}", _AND)
        elif isinstance(g, Exists):
            r = (f"E x . {wrap(g.body, _UN)}", _UN)
        elif isinstance(g, Box):
            r = (f"[]{g.mod} {wrap(g.body, _UN)}", _UN)
        elif isinstance(g, Not):
            b = g.body
            pair_or = _match_or(g)
            pair_imp = _match_imp(g)
            if isinstance(b, Verum):
                r = ("false", 5)
            elif pair_or:
                r = (f"{wrap(pair_or[0], _OR)} | {wrap(pair_or[1], _AND)}", _OR)
            elif pair_imp:
                r = (f"{wrap(pair_imp[0], _OR)} -> {wrap(pair_imp[1], _IMP)}", _IMP)
            elif isinstance(b, Exists) and isinstance(b.body, Not):
                r = (f"A x . {wrap(b.body.body, _UN)}", _UN)
            elif isinstance(b, Box) and isinstance(b.body, Not):
                r = (f"<>{b.mod} {wrap(b.body.body, _UN)}", _UN)
            else:
                r = (f"~{wrap(b, _UN)}", _UN)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[g] = r
        return r

    return go(f)[0]


# ------------------------------------------------------------------- parsing


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<box>\[\](?P<boxid>[A-Za-z0-9_]+))
  | (?P<dia><>(?P<diaid>[A-Za-z0-9_]+))
  | (?P<macro><(?P<macroid>[A-Za-z][A-Za-z0-9_]*)>)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()~&|.=])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    out: list[_Tok] = []
    pos, line, col0 = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - col0 + 1)
        kind = m.lastgroup
        if kind in ("boxid", "diaid", "macroid"):
            kind = {"boxid": "box", "diaid": "dia", "macroid": "macro"}[kind]
        col = pos - col0 + 1
        if kind == "ws":
            chunk = m.group()
            nl = chunk.count("\n")
            if nl:
                line += nl
                col0 = pos + chunk.rfind("\n") + 1
        elif kind == "box":
            out.append(_Tok("box", m.group("boxid"), line, col))
        elif kind == "dia":
            out.append(_Tok("dia", m.group("diaid"), line, col))
        elif kind == "macro":
            out.append(_Tok("macro", m.group("macroid"), line, col))
        elif kind == "arrow":
            out.append(_Tok("->", "->", line, col))
        elif kind == "ident":
            out.append(_Tok("ident", m.group(), line, col))
        else:
            out.append(_Tok(m.group(), m.group(), line, col))
        pos = m.end()
    out.append(_Tok("eof", "", line, len(text) - col0 + 1))
    return out


_KEYWORDS = {"E", "A", "true", "false"}


class _Parser:
    def __init__(self, text: str, lang: Language, prop: bool, allow_reserved: bool):
        self.toks = _tokenize(text)
        self.i = 0
        self.lang = lang
        self.prop = prop
        self.allow_reserved = allow_reserved

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self, kind: str | None = None) -> _Tok:
        t = self.peek()
        if kind is not None and t.kind != kind:
            want = "end of input" if kind == "eof" else repr(kind)
            got = "end of input" if t.kind == "eof" else repr(t.text)
            raise ParseError(f"expected {want}, found {got}", t.line, t.col)
        self.i += 1
        return t

    def fail(self, msg: str, t: _Tok | None = None):
        t = t or self.peek()
        raise ParseError(msg, t.line, t.col)

    def name(self, t: _Tok) -> str:
        if t.text.startswith("__") and not self.allow_reserved:
            self.fail(f"identifier {t.text!r} is reserved", t)
        return t.text

    def modality(self, t: _Tok) -> str:
        if t.text not in self.lang.modality_ids:
            self.fail(f"unknown modality {t.text!r}", t)
        return t.text

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.peek().kind == "->":
            self.take()
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek().kind == "|":
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.peek().kind == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        t = self.peek()
        if t.kind == "~":
            self.take()
            return Not(self.unary())
        if t.kind == "box":
            self.take()
            return Box(self.modality(t), self.unary())
        if t.kind == "dia":
            self.take()
            return Diamond(self.modality(t), self.unary())
        if t.kind == "(":
            self.take()
            f = self.formula()
            self.take(")")
            return f
        if t.kind == "macro":
            self.take()
            if self.prop or t.text not in MACROS:
                self.fail(f"unknown macro <{t.text}>", t)
            f = MACROS[t.text]()
            self.lang.check(f)
            return f
        if t.kind == "ident" and t.text in ("E", "A") and not self.prop:
            self.take()
            v = self.take("ident")
            if v.text != VAR:
                self.fail("only the variable x can be bound", v)
            self.take(".")
            body = self.unary()
            return Exists(body) if t.text == "E" else Forall(body)
        if t.kind == "ident":
            return self.atomic()
        self.fail("expected a formula" if t.kind != "eof" else "unexpected end of input", t)

    def term(self, t: _Tok) -> str:
        if t.text == VAR:
            return VAR
        if t.text in _KEYWORDS:
            self.fail(f"{t.text!r} cannot be used as a term", t)
        if not self.lang.equality:
            self.fail(f"constant {t.text!r} needs a language with equality", t)
        name = self.name(t)
        if self.lang.constants is not None and name not in self.lang.constants:
            self.fail(f"unknown constant {name!r}", t)
        return name

    def atomic(self) -> Formula:
        t = self.take("ident")
        if t.text == "true":
            return TOP
        if t.text == "false":
            return BOT
        if t.text in _KEYWORDS:
            self.fail(f"unexpected keyword {t.text!r}", t)
        if self.prop:
            return Letter(self.name(t))
        nxt = self.peek()
        if nxt.kind == "(":
            pred = self.name(t)
            if self.lang.predicates is not None and pred not in self.lang.predicates:
                self.fail(f"unknown predicate {pred!r}", t)
            self.take("(")
            arg = self.take("ident")
            term = self.term(arg)
            self.take(")")
            return Atom(pred, term)
        if nxt.kind == "=":
            if not self.lang.equality:
                self.fail("equality is not available in this language", nxt)
            left = self.term(t)
            self.take("=")
            right = self.term(self.take("ident"))
            return Eq(left, right)
        if t.text == VAR:
            self.fail("the variable x cannot stand alone", t)
        name = self.name(t)
        pred = letter_pred(name)
        if self.lang.predicates is not None and pred not in self.lang.predicates:
            self.fail(f"unknown predicate {pred!r} for letter {name!r}", t)
        return prop_letter(name)


DEFAULT_LANGUAGE = Language()


def parse(text: str, lang: Language | None = None, *, allow_reserved: bool = False) -> Formula:
    """Parse a first-order formula.  Lower-case letters p abbreviate E x . P(x)."""
    p = _Parser(text, lang or DEFAULT_LANGUAGE, prop=False, allow_reserved=allow_reserved)
    f = p.formula()
    p.take("eof")
    return f


def parse_prop(text: str, modality_ids: Iterable[str] = ("1", "2", SHARED),
               *, allow_reserved: bool = False) -> Formula:
    lang = Language(modality_ids=frozenset(modality_ids))
    p = _Parser(text, lang, prop=True, allow_reserved=allow_reserved)
    f = p.formula()
    p.take("eof")
    return f


def is_prop(f: Formula) -> bool:
    return not any(isinstance(g, (Atom, Eq, Exists)) for g in subformulas(f))
