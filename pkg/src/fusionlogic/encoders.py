"""Formula generators for Diophantine systems and two-counter machines.

Each generator has a companion that builds a model of the intended reading,
so an encoding can be checked end to end with the model checker.

Diophantine encodings use two modalities: "D" over difference frames and "C"
over finite difference frames.  Symbol names are fixed per variable and per
equation index so printed formulas are stable:

    P_y, C_y        value and marker predicates of variable y
    c_e_i           i-th constant of equation e (y = n)
    Q_e_1, Q_e_2    summand predicates of equation e (y = z1 + z2)
    J_e, c_e, Q_e   selector predicate, constant and block predicate (y = z1 * z2)
    k_n             the constant of the n-th cardinality sentence
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence, Union

from .semantics import FOKripkeModel, Frame
from .syntax import (
    NAV, VAR, And, Atom, Box, Eq, Exists, Forall, Formula, Iff, Implies, Not,
    box_plus, card, conj, counter, diamond_plus, disj, next_step, prop_letter,
)

DIFF_BOX = "D"
FIN_BOX = "C"

# ------------------------------------------------------------- equations


@dataclass(frozen=True)
class Const:
    y: str
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("constants in elementary equations are positive")

    def __str__(self):
        return f"{self.y} = {self.n}"


@dataclass(frozen=True)
class Sum:
    y: str
    z1: str
    z2: str

    def __str__(self):
        return f"{self.y} = {self.z1} + {self.z2}"


@dataclass(frozen=True)
class Prod:
    y: str
    z1: str
    z2: str

    def __str__(self):
        return f"{self.y} = {self.z1} * {self.z2}"


ElementaryEquation = Union[Const, Sum, Prod]

_NAME = r"[A-Za-z][A-Za-z0-9]*"
_EQ_LINE = re.compile(rf"^\s*({_NAME})\s*=\s*(?:(\d+)|({_NAME})\s*([+*])\s*({_NAME}))\s*$")


def parse_equations(text: str) -> list[ElementaryEquation]:
    """Lines `y = 3`, `y = z1 + z2`, `y = z1 * z2`; `#` starts a comment."""
    out: list[ElementaryEquation] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _EQ_LINE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: cannot read equation {raw.strip()!r}")
        y, n, z1, op, z2 = m.groups()
        if n is not None:
            out.append(Const(y, int(n)))
        else:
            out.append(Sum(y, z1, z2) if op == "+" else Prod(y, z1, z2))
    return out


def equation_variables(E: Sequence[ElementaryEquation]) -> list[str]:
    seen: dict[str, None] = {}
    for e in E:
        for v in ((e.y,) if isinstance(e, Const) else (e.y, e.z1, e.z2)):
            seen.setdefault(v, None)
    return list(seen)


def satisfies(E: Sequence[ElementaryEquation], sol: Mapping[str, int]) -> bool:
    for e in E:
        if isinstance(e, Const):
            ok = sol[e.y] == e.n
        elif isinstance(e, Sum):
            ok = sol[e.y] == sol[e.z1] + sol[e.z2]
        else:
            ok = sol[e.y] == sol[e.z1] * sol[e.z2]
        if not ok:
            return False
    return all(sol[v] >= 1 for v in equation_variables(E))


def _marker(y: str) -> Formula:
    return Exists(Atom(f"C_{y}", VAR))


def encode_diophantine(E: Sequence[ElementaryEquation]) -> Formula:
    """A formula satisfiable over D x D_fin frames iff E has a positive solution."""
    if not E:
        raise ValueError("empty equation system")
    parts: list[Formula] = []
    cards = iter(range(10 ** 9))

    def card_of(marker: Formula, pred: str) -> Formula:
        return card(marker, pred, f"k_{next(cards)}", DIFF_BOX, FIN_BOX)

    for y in equation_variables(E):
        I = _marker(y)
        P = Atom(f"P_{y}", VAR)
        parts.append(diamond_plus(DIFF_BOX, And(I, Box(DIFF_BOX, Not(I)))))
        parts.append(card_of(I, P.pred))
        parts.append(Exists(P))
        parts.append(box_plus(DIFF_BOX, Forall(Implies(P, Box(DIFF_BOX, P)))))

    for idx, e in enumerate(E, 1):
        Py = Atom(f"P_{e.y}", VAR)
        if isinstance(e, Const):
            cs = [f"c_{idx}_{i}" for i in range(1, e.n + 1)]
            parts.append(Forall(Iff(Py, disj([Eq(VAR, c) for c in cs]))))
            parts.extend(Not(Eq(a, b)) for a, b in combinations(cs, 2))
        elif isinstance(e, Sum):
            Q1, Q2 = Atom(f"Q_{idx}_1", VAR), Atom(f"Q_{idx}_2", VAR)
            parts.append(card_of(_marker(e.z1), Q1.pred))
            parts.append(card_of(_marker(e.z2), Q2.pred))
            parts.append(box_plus(DIFF_BOX, Forall(Implies(Q1, box_plus(DIFF_BOX, Not(Q2))))))
            parts.append(box_plus(DIFF_BOX, Implies(Exists(Q1), _marker(e.z1))))
            parts.append(box_plus(DIFF_BOX, Implies(Exists(Q2), _marker(e.z2))))
            parts.append(Forall(Iff(Py, disj([diamond_plus(DIFF_BOX, Q1),
                                                diamond_plus(DIFF_BOX, Q2)]))))
        else:
            J = And(Atom(f"J_{idx}", VAR), Eq(f"c_{idx}", VAR))
            someJ = Exists(J)
            Q = Atom(f"Q_{idx}", VAR)
            parts.append(Forall(Iff(Atom(f"P_{e.z2}", VAR), diamond_plus(DIFF_BOX, J))))
            parts.append(box_plus(DIFF_BOX, Forall(Implies(J, Box(DIFF_BOX, Not(J))))))
            parts.append(card_of(someJ, f"P_{e.z1}"))
            parts.append(card_of(someJ, Q.pred))
            parts.append(box_plus(DIFF_BOX, Forall(Implies(Q, Box(DIFF_BOX, Not(Q))))))
            parts.append(box_plus(DIFF_BOX, Implies(Exists(Q), someJ)))
            parts.append(Forall(Iff(Py, diamond_plus(DIFF_BOX, Q))))
    return conj(parts)


class _WitnessBuilder:
    """World inventory: one D-clique over every world; C-cliques partition it.

    * each variable y gets a marker world whose C-clique has sol[y] worlds;
    * each product y = z1 * z2 gets sol[z2] selector worlds, each with its own
      C-clique of sol[z1] worlds.
    Every value set P_y is {0, ..., sol[y] - 1} at every world.
    """

    def __init__(self, E, sol):
        self.E = E
        self.sol = sol
        self.worlds = 0
        self.cliques: list[list[int]] = []
        self.preds: dict[str, dict[int, set[int]]] = {}
        self.consts: dict[str, dict[int, int]] = {}

    def clique(self, size: int) -> list[int]:
        ws = list(range(self.worlds, self.worlds + size))
        self.worlds += size
        self.cliques.append(ws)
        return ws

    def ext(self, pred: str, w: int) -> set[int]:
        return self.preds.setdefault(pred, {}).setdefault(w, set())

    def build(self) -> FOKripkeModel:
        E, sol = self.E, self.sol
        variables = equation_variables(E)
        card_no = iter(range(10 ** 9))
        counted: list[tuple[str, list[int], list[int]]] = []  # (constant, clique, values)

        markers = {}
        for y in variables:
            ws = self.clique(sol[y])
            markers[y] = ws
            self.ext(f"C_{y}", ws[0]).add(0)
            counted.append((f"k_{next(card_no)}", ws, list(range(sol[y]))))

        for idx, e in enumerate(E, 1):
            if isinstance(e, Sum):
                n1, n2 = sol[e.z1], sol[e.z2]
                for k, (z, vals) in enumerate(((e.z1, range(n1)), (e.z2, range(n1, n1 + n2))), 1):
                    ws = markers[z]
                    self.ext(f"Q_{idx}_{k}", ws[0]).update(vals)
                    counted.append((f"k_{next(card_no)}", ws, list(vals)))
            elif isinstance(e, Prod):
                n1, n2 = sol[e.z1], sol[e.z2]
                kz1, kq = f"k_{next(card_no)}", f"k_{next(card_no)}"
                for b in range(n2):
                    ws = self.clique(n1)
                    self.ext(f"J_{idx}", ws[0]).add(b)
                    self.consts.setdefault(f"c_{idx}", {})[ws[0]] = b
                    block = list(range(b * n1, (b + 1) * n1))
                    self.ext(f"Q_{idx}", ws[0]).update(block)
                    counted.append((kz1, ws, list(range(n1))))
                    counted.append((kq, ws, block))

        W = list(range(self.worlds))
        n_elems = max(sol[v] for v in variables)
        domain = frozenset(range(n_elems))

        for y in variables:
            for w in W:
                self.ext(f"P_{y}", w).update(range(sol[y]))
        for idx, e in enumerate(E, 1):
            if isinstance(e, Const):
                for i in range(1, e.n + 1):
                    self.consts[f"c_{idx}_{i}"] = {w: i - 1 for w in W}
        for name, ws, vals in counted:
            m = self.consts.setdefault(name, {})
            for w, v in zip(ws, vals):
                m[w] = v

        # constants default to element 0 where unconstrained
        consts = {c: {w: m.get(w, 0) for w in W} for c, m in self.consts.items()}
        D = frozenset((a, b) for a in W for b in W if a != b)
        C = frozenset((a, b) for ws in self.cliques for a in ws for b in ws if a != b)
        frame = Frame(tuple(W), {DIFF_BOX: D, FIN_BOX: C})
        preds = {p: {w: frozenset(ext.get(w, ())) for w in W} for p, ext in self.preds.items()}
        return FOKripkeModel(frame, {w: domain for w in W}, preds, consts, "cd")


def witness_model_diophantine(E: Sequence[ElementaryEquation], solution: Mapping[str, int]) -> FOKripkeModel:
    """A finite constant-domain model of encode_diophantine(E) built from a solution."""
    missing = [v for v in equation_variables(E) if v not in solution]
    if missing:
        raise ValueError(f"no value for variable {missing[0]}")
    if not satisfies(E, solution):
        raise ValueError("the assignment does not solve the system")
    return _WitnessBuilder(list(E), dict(solution)).build()


# ----------------------------------------------------------- Minsky machines


@dataclass(frozen=True)
class Inc:
    reg: int
    nxt: int


@dataclass(frozen=True)
class Dec:
    reg: int
    if_pos: int
    if_zero: int


@dataclass(frozen=True)
class MinskyMachine:
    """States q0..qN; instruction i runs in state qi; qN halts."""

    instructions: tuple[Union[Inc, Dec], ...]

    def __post_init__(self):
        N = self.halting
        for i, ins in enumerate(self.instructions):
            if ins.reg not in (1, 2):
                raise ValueError(f"instruction {i}: registers are r1 and r2")
            targets = (ins.nxt,) if isinstance(ins, Inc) else (ins.if_pos, ins.if_zero)
            if any(not 0 <= t <= N for t in targets):
                raise ValueError(f"instruction {i}: state out of range")

    @property
    def halting(self) -> int:
        return len(self.instructions)

    def step(self, q: int, v: tuple[int, int]) -> tuple[int, tuple[int, int]]:
        ins = self.instructions[q]
        vals = list(v)
        k = ins.reg - 1
        if isinstance(ins, Inc):
            vals[k] += 1
            return ins.nxt, (vals[0], vals[1])
        if vals[k] > 0:
            vals[k] -= 1
            return ins.if_pos, (vals[0], vals[1])
        return ins.if_zero, (vals[0], vals[1])

    def run(self, steps: int) -> list[tuple[int, int, int]]:
        """Configurations (q, v1, v2) from (q0, 0, 0), stopping early on halting."""
        q, v = 0, (0, 0)
        out = [(q, *v)]
        for _ in range(steps):
            if q == self.halting:
                break
            q, v = self.step(q, v)
            out.append((q, *v))
        return out


_INC = re.compile(r"^q(\d+)\s*:\s*inc\s+r([12])\s*->\s*q(\d+)$")
_DEC = re.compile(r"^q(\d+)\s*:\s*dec\s+r([12])\s*->\s*q(\d+)\s*\|\s*q(\d+)$")
_HALT = re.compile(r"^halt\s*:?\s*q(\d+)$")


def parse_minsky(text: str) -> MinskyMachine:
    """Lines `q0: inc r1 -> q1`, `q0: dec r1 -> q1 | q2` and `halt q2`."""
    table: dict[int, Union[Inc, Dec]] = {}
    halt = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _INC.match(line):
            q, r, j = map(int, m.groups())
            ins: Union[Inc, Dec] = Inc(r, j)
        elif m := _DEC.match(line):
            q, r, j, l = map(int, m.groups())
            ins = Dec(r, j, l)
        elif m := _HALT.match(line):
            halt = int(m.group(1))
            continue
        else:
            raise ValueError(f"line {lineno}: cannot read instruction {raw.strip()!r}")
        if q in table:
            raise ValueError(f"line {lineno}: state q{q} has two instructions")
        table[q] = ins
    N = len(table)
    if halt is None:
        halt = N
    if halt != N or sorted(table) != list(range(N)):
        raise ValueError("instructions must cover q0..q(N-1) with qN the halting state")
    return MinskyMachine(tuple(table[i] for i in range(N)))


def state_letter(i: int) -> Formula:
    return prop_letter(f"q{i}")


def encode_minsky(M: MinskyMachine) -> tuple[Formula, Formula, Formula]:
    """(init, state discipline, transitions) for the machine on input (0, 0)."""
    p = prop_letter(NAV)
    N = M.halting
    V = {k: Atom(f"V{k}", VAR) for k in (1, 2)}
    Vc = {k: Atom(f"V{k}", "c") for k in (1, 2)}
    is_c = Eq(VAR, "c")

    init = conj([state_letter(0), Not(Exists(V[1])), Not(Exists(V[2]))])
    exclusive = [Not(And(state_letter(i), state_letter(j))) for i, j in combinations(range(N), 2)]
    states = conj(exclusive + [Not(state_letter(N))])

    def keep(k: int) -> Formula:
        return counter(p, V[k], V[k])

    rules: list[Formula] = []
    for i, ins in enumerate(M.instructions):
        k = ins.reg
        q = state_letter(i)
        if isinstance(ins, Inc):
            rules.append(Implies(And(q, Not(Vc[k])),
                                 conj([next_step(p, state_letter(ins.nxt)),
                                       counter(p, disj([V[k], is_c]), V[k]), keep(3 - k)])))
        else:
            rules.append(Implies(And(q, Vc[k]),
                                 conj([next_step(p, state_letter(ins.if_pos)),
                                       counter(p, And(V[k], Not(is_c)), V[k]), keep(3 - k)])))
            rules.append(Implies(And(q, Not(Exists(V[k]))),
                                 conj([next_step(p, state_letter(ins.if_zero)), keep(k), keep(3 - k)])))
    transitions = conj(rules)
    return init, states, transitions


@dataclass
class MinskyPrefix:
    model: FOKripkeModel
    root: int
    path: list[int]  # the configuration worlds w^0, w^1, ...
    frontier: set[int]
    configs: list[tuple[int, int, int]]


def simulate_minsky_model(M: MinskyMachine, steps: int) -> MinskyPrefix:
    """Path w0 R1 v0 R2 w1 R1 v1 ... with configuration n interpreted at w^n.

    The last configuration world is the frontier: its successor is cut off.
    Registers are sets of elements; c picks the element to add or remove.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    configs = M.run(steps)
    n = len(configs)
    domain = frozenset(range(n + 1))
    cfg_worlds = [2 * i for i in range(n)]
    mids = [2 * i + 1 for i in range(n - 1)]
    W = tuple(range(2 * n - 1))
    R1 = frozenset((2 * i, 2 * i + 1) for i in range(n - 1))
    R2 = frozenset((2 * i + 1, 2 * i + 2) for i in range(n - 1))
    frame = Frame(W, {"1": R1, "2": R2})

    regs: list[dict[int, frozenset[int]]] = []
    cvals: list[int] = []
    cur = {1: frozenset(), 2: frozenset()}
    for i, (q, _, _) in enumerate(configs):
        regs.append(dict(cur))
        if q == M.halting:
            cvals.append(0)
            break
        ins = M.instructions[q]
        k = ins.reg
        if isinstance(ins, Dec) and cur[k]:
            c = min(cur[k])
        else:
            c = min(domain - cur[k])
        cvals.append(c)
        if i + 1 < n:
            nxt = dict(cur)
            if isinstance(ins, Inc):
                nxt[k] = cur[k] | {c}
            elif cur[k]:
                nxt[k] = cur[k] - {c}
            cur = nxt

    preds: dict[str, dict[int, frozenset[int]]] = {}
    nav = prop_letter(NAV).body.pred
    empty = frozenset()
    for name in [nav, "V1", "V2"] + [state_letter(j).body.pred for j in range(M.halting + 1)]:
        preds[name] = {w: empty for w in W}
    consts = {"c": {w: 0 for w in W}}
    for i, w in enumerate(cfg_worlds):
        q = configs[i][0]
        preds[nav][w] = domain
        preds[state_letter(q).body.pred][w] = domain
        preds["V1"][w] = regs[i][1]
        preds["V2"][w] = regs[i][2]
        consts["c"][w] = cvals[i]
    for i, v in enumerate(mids):
        preds["V1"][v] = regs[i][1]
        preds["V2"][v] = regs[i][2]
    model = FOKripkeModel(frame, {w: domain for w in W}, preds, consts, "cd")
    return MinskyPrefix(model, 0, cfg_worlds, {cfg_worlds[-1]}, configs)
