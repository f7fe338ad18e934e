"""Surrogates, Theta extraction, md/Gamma slices and alternation depth.

Components are named by the modality ids "1" and "2".  Any other modality
(for instance the shared "E") is transparent to every measure here.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from typing import Iterable

from .syntax import (
    VAR, Atom, Box, Exists, Formula, Letter, Not, conj, Forall, subformulas,
    to_str, transform,
)

COMPONENTS = ("1", "2")

# surrogate name -> boxed formula it stands for
_REGISTRY: dict[str, Formula] = {}


def other(i: str) -> str:
    if i not in COMPONENTS:
        raise ValueError(f"component must be '1' or '2', got {i!r}")
    return "2" if i == "1" else "1"


def surrogate_name(boxed: Formula) -> str:
    digest = hashlib.sha1(to_str(boxed).encode()).hexdigest()[:12]
    name = f"__s{boxed.mod}_{digest}"
    prev = _REGISTRY.setdefault(name, boxed)
    if prev != boxed:  # pragma: no cover - would need a sha1 collision
        raise RuntimeError(f"surrogate name clash for {name}")
    return name


def surrogate_atom(boxed: Formula, prop: bool) -> Formula:
    name = surrogate_name(boxed)
    if prop:
        return Letter(name)
    return Atom(name, VAR) if boxed.free else Forall(Atom(name, VAR))


def is_surrogate_name(name: str) -> bool:
    return name.startswith("__s") and name in _REGISTRY


def surrogate_target(name: str) -> Formula:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown surrogate {name!r}") from None


def _is_prop(f: Formula) -> bool:
    return not any(isinstance(g, (Atom, Exists)) for g in subformulas(f))


@lru_cache(maxsize=None)
def surrogate(i: str, f: Formula, prop: bool | None = None) -> Formula:
    """sur_i(f): replace maximal boxes of the other component by surrogates."""
    j = other(i)
    if prop is None:
        prop = _is_prop(f)

    def leaf(g):
        if isinstance(g, Box) and g.mod == j:
            return surrogate_atom(g, prop)
        return None

    return transform(f, leaf)


def surrogate_signature(i: str, f: Formula) -> dict[str, tuple[Formula, bool]]:
    """Map each surrogate name used by sur_i(f) to (boxed formula, closed?)."""
    j = other(i)
    out: dict[str, tuple[Formula, bool]] = {}
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Box) and g.mod == j:
            out[surrogate_name(g)] = (g, g.closed)
            continue
        stack.extend(g.children())
    return out


def restore(i: str, f: Formula) -> Formula:
    """rsur_i: put back the boxes of the other component, surrogated for component j."""
    j = other(i)
    prop = _is_prop(f)

    def back(name: str) -> Formula:
        boxed = surrogate_target(name)
        if boxed.mod != j:
            raise ValueError(f"surrogate {name} stands for a []{boxed.mod} formula")
        return Box(j, surrogate(j, boxed.body, prop))

    def leaf(g):
        if isinstance(g, Letter) and g.name.startswith("__s"):
            return back(g.name)
        if isinstance(g, Atom) and g.pred.startswith("__s"):
            boxed = surrogate_target(g.pred)
            if boxed.closed:
                raise ValueError(f"surrogate {g.pred} of a closed box must appear as A x . {g.pred}(x)")
            return back(g.pred)
        if (isinstance(g, Not) and isinstance(g.body, Exists) and isinstance(g.body.body, Not)
                and isinstance(g.body.body.body, Atom) and g.body.body.body.pred.startswith("__s")):
            name = g.body.body.body.pred
            if surrogate_target(name).closed:
                return back(name)
        return None

    return transform(f, leaf)


def has_surrogates(f: Formula) -> bool:
    for g in subformulas(f):
        if isinstance(g, Letter) and g.name.startswith("__s"):
            return True
        if isinstance(g, Atom) and g.pred.startswith("__s"):
            return True
    return False


def restore_chain_length(i: str, f: Formula, limit: int = 64) -> int:
    """Length of the shortest restore chain rebuilding f from sur_i(f)."""
    cur = surrogate(i, f)
    comp = i
    n = 0
    while cur != f:
        if n >= limit:
            raise RuntimeError("restore chain did not converge")
        cur = restore(comp, cur)
        comp = other(comp)
        n += 1
    return n


# ------------------------------------------------------------------ measures


@lru_cache(maxsize=None)
def md(i: str, f: Formula) -> int:
    """Nesting depth of component-i boxes."""
    if isinstance(f, Box):
        return md(i, f.body) + (1 if f.mod == i else 0)
    kids = f.children()
    return max((md(i, k) for k in kids), default=0)


def md_set(i: str, fs: Iterable[Formula]) -> int:
    return max((md(i, f) for f in fs), default=0)


@lru_cache(maxsize=None)
def _alternations(f: Formula, last: str) -> int:
    if isinstance(f, Box) and f.mod in COMPONENTS:
        step = 1 if f.mod != last else 0
        return step + _alternations(f.body, f.mod)
    return max((_alternations(k, last) for k in f.children()), default=0)


def adp_i(i: str, f: Formula | Iterable[Formula]) -> int:
    other(i)
    if isinstance(f, Formula):
        return _alternations(f, i)
    return max((_alternations(g, i) for g in f), default=0)


def adp(f: Formula | Iterable[Formula]) -> tuple[int, str]:
    """(alternation depth, leading component); ties go to component 1."""
    if not isinstance(f, Formula):
        f = tuple(f)
    a1, a2 = adp_i("1", f), adp_i("2", f)
    return (a1, "1") if a1 <= a2 else (a2, "2")


def theta(i: str, phi: Iterable[Formula]) -> frozenset[Formula]:
    """Atoms (letters) of phi plus all subformulas of its other-component boxes."""
    j = other(i)
    gens: list[Formula] = []
    for g in phi:
        if isinstance(g, (Letter,)) or (isinstance(g, Atom) and g.term == VAR):
            gens.append(g)
        elif isinstance(g, Box) and g.mod == j:
            gens.append(g)
    return subformulas(gens)


def gamma(i: str, h: int, phi: Iterable[Formula]) -> frozenset[Formula]:
    if h < 0:
        return frozenset()
    return frozenset(g for g in phi if md(i, g) <= h)


def check_dagger(i: str, phi: Iterable[Formula]) -> bool:
    """Property (dagger) for a set whose adp is led by component i."""
    phi = frozenset(phi)
    value, _ = adp(phi)
    if adp_i(i, phi) != value:
        return True
    th = theta(i, phi)
    return adp(th)[0] == max(0, value - 1) and adp_i(other(i), th) == adp(th)[0]


def sur_all(i: str, fs: Iterable[Formula]) -> list[Formula]:
    return [surrogate(i, f) for f in fs]


def conj_sur(i: str, fs: Iterable[Formula]) -> Formula:
    return surrogate(i, conj(list(fs)))
