import pytest

from fusionlogic.encoders import (
    Const, Dec, Inc, MinskyMachine, Prod, Sum, encode_diophantine, encode_minsky, parse_equations,
    parse_minsky, satisfies, simulate_minsky_model, state_letter, witness_model_diophantine,
)
from fusionlogic.search import find_model
from fusionlogic.semantics import DIFF_FRAMES, Evaluator, model_errors
from fusionlogic.syntax import (
    NAV, VAR, Atom, Eq, Forall, Iff, Not, constants, prop_letter, subformulas, to_str,
)

DIO_SPECS = {"D": DIFF_FRAMES, "C": DIFF_FRAMES}


def test_parse_equations():
    E = parse_equations("y = 3\n# comment\ny = z1 + z2\n\ny=z1*z2  # product\n")
    assert E == [Const("y", 3), Sum("y", "z1", "z2"), Prod("y", "z1", "z2")]
    with pytest.raises(ValueError):
        parse_equations("y = z1 - z2")
    with pytest.raises(ValueError):
        parse_equations("y = 0")


def test_single_constant_encoding():
    phi = encode_diophantine([Const("y", 1)])
    assert constants(phi) & {"c_1_1", "c_1_2"} == {"c_1_1"}
    assert Forall(Iff(Atom("P_y"), Eq(VAR, "c_1_1"))) in subformulas(phi)


def test_encoding_is_deterministic():
    text = "y=4\na=2\nb=2\ny=a*b"
    assert to_str(encode_diophantine(parse_equations(text))) == to_str(encode_diophantine(parse_equations(text)))


def test_conflicting_constants_are_allowed():
    encode_diophantine([Const("y", 1), Const("y", 2)])


@pytest.mark.parametrize("text,sol", [
    ("y=1", dict(y=1)),
    ("y=2\nz1=1\nz2=1\ny=z1+z2", dict(y=2, z1=1, z2=1)),
    ("y=1\nz1=1\nz2=1\ny=z1*z2", dict(y=1, z1=1, z2=1)),
    ("y=4\na=2\nb=2\ny=a*b", dict(y=4, a=2, b=2)),
    ("y=3\na=2\nb=1\ny=a+b", dict(y=3, a=2, b=1)),
    ("y=2\nz=1\ny=z+z", dict(y=2, z=1)),
    ("y=3\na=3\nb=1\ny=a*b", dict(y=3, a=3, b=1)),
])
def test_witness_models_satisfy_encoding(text, sol):
    E = parse_equations(text)
    M = witness_model_diophantine(E, sol)
    assert model_errors(M) == []
    assert M.mode == "cd"
    assert DIFF_FRAMES.holds(M.worlds, M.frame.relations["D"])
    assert DIFF_FRAMES.holds(M.worlds, M.frame.relations["C"])
    assert Evaluator(M).holds_globally(encode_diophantine(E))


def test_witness_rejects_non_solutions():
    E = parse_equations("y=2\nz=1\ny=z+z")
    with pytest.raises(ValueError):
        witness_model_diophantine(E, dict(y=3, z=1))
    with pytest.raises(ValueError):
        witness_model_diophantine(E, dict(y=2))
    assert satisfies(E, dict(y=2, z=1)) and not satisfies(E, dict(y=1, z=1))


def test_unsolvable_system_has_no_small_model():
    phi = encode_diophantine(parse_equations("y=1\nz=1\ny=z+z"))
    assert not find_model(DIO_SPECS, 6, 4, "cd", refute_root=[Not(phi)]).found


def test_solvable_system_found_by_search():
    phi = encode_diophantine(parse_equations("y=2\nz=1\ny=z+z"))
    r = find_model(DIO_SPECS, 4, 2, "cd", refute_root=[Not(phi)])
    assert r.found and Evaluator(r.model).holds_at(0, phi)


INC = "q0: inc r1 -> q1\nhalt q1"
LOOP = "q0: dec r1 -> q1 | q0\nhalt q1"


def test_parse_minsky():
    M = parse_minsky("q0: inc r1 -> q1\nq1: dec r2 -> q0 | q2\nhalt q2")
    assert M.instructions == (Inc(1, 1), Dec(2, 0, 2))
    assert M.halting == 2
    with pytest.raises(ValueError):
        parse_minsky("q0: inc r3 -> q1")
    with pytest.raises(ValueError):
        parse_minsky("q0: inc r1 -> q5")
    with pytest.raises(ValueError):
        parse_minsky("q1: inc r1 -> q0")


def test_run_minsky():
    M = parse_minsky("q0: inc r1 -> q1\nq1: dec r1 -> q2 | q0\nhalt q2")
    assert M.run(5) == [(0, 0, 0), (1, 1, 0), (2, 0, 0)]


def test_zero_instruction_machine():
    M = MinskyMachine(())
    init, states, trans = encode_minsky(M)
    assert states == Not(state_letter(0))
    P = simulate_minsky_model(M, 3)
    ev = Evaluator(P.model)
    assert ev.holds_at(0, init) and not ev.holds_at(0, states)


def test_step_zero_prefix():
    M = parse_minsky(LOOP)
    P = simulate_minsky_model(M, 0)
    assert len(P.model.worlds) == 1
    assert Evaluator(P.model).holds_at(0, encode_minsky(M)[0])


def test_increment_prefix():
    M = parse_minsky(INC)
    P = simulate_minsky_model(M, 1)
    w1 = P.path[1]
    assert len(P.model.extension("V1", w1)) == 1
    ev = Evaluator(P.model)
    _, states, _ = encode_minsky(M)
    assert not ev.holds_at(w1, states)


def test_navigation_letter_marks_path():
    for text, k in ((INC, 1), (LOOP, 4)):
        P = simulate_minsky_model(parse_minsky(text), k)
        ev = Evaluator(P.model)
        nav = prop_letter(NAV)
        assert [w for w in P.model.worlds if ev.holds_at(w, nav)] == P.path


def test_looping_prefix_is_consistent():
    M = parse_minsky(LOOP)
    init, states, trans = encode_minsky(M)
    for k in range(1, 5):
        P = simulate_minsky_model(M, k)
        ev = Evaluator(P.model)
        assert ev.holds_at(P.root, init)
        for w in P.model.worlds:
            if w not in P.frontier:
                assert ev.holds_at(w, states) and ev.holds_at(w, trans)


def test_counting_machine_prefix():
    """r1 counts up to two, then down to zero, then halts."""
    text = "\n".join([
        "q0: inc r1 -> q1", "q1: inc r1 -> q2", "q2: dec r1 -> q2 | q3",
        "q3: inc r2 -> q4", "halt q4",
    ])
    M = parse_minsky(text)
    init, states, trans = encode_minsky(M)
    configs = M.run(10)
    assert configs[-1][0] == M.halting
    P = simulate_minsky_model(M, 10)
    ev = Evaluator(P.model)
    inner = [w for w in P.model.worlds if w not in P.frontier]
    assert all(ev.holds_at(w, trans) for w in inner)
    assert not all(ev.holds_at(w, states) for w in P.model.worlds)
    for (q, v1, v2), w in zip(configs, P.path):
        assert len(P.model.extension("V1", w)) == v1 and len(P.model.extension("V2", w)) == v2
