import pytest

from corpus import fused_corpus
from fusionlogic.deciders import Invalid, Unknown, Valid, bounded_decider
from fusionlogic.fusion import (
    FusionConfig, build_countermodel_local, compute_Q, decide_global_fusion, decide_local_fusion,
    fused_oracle, global_fmp_counterexample, global_fmp_prefix,
)
from fusionlogic.quasistates import enumerate_quasistates, realisability
from fusionlogic.semantics import K_FRAMES, S5_FRAMES, Evaluator, model_errors
from fusionlogic.syntax import (
    BOT, TOP, And, Atom, Box, Diamond, Implies, Not, barcan, converse_barcan, prop_letter,
)

P, Q = Atom("P"), Atom("Q")
p, r = prop_letter("p"), prop_letter("r")


def config(spec=K_FRAMES, mode="xd", strategy="subset_enumeration", fmp=True, **kw):
    return FusionConfig(bounded_decider(spec, 3, 2, mode, fmp, "1"),
                        bounded_decider(spec, 3, 2, mode, fmp, "2"), mode, strategy, **kw)


def test_global_examples():
    cfg = config()
    assert isinstance(decide_global_fusion(cfg, TOP, TOP), Valid)
    assert isinstance(decide_global_fusion(cfg, TOP, barcan("1")), Invalid)
    assert isinstance(decide_global_fusion(cfg, BOT, Box("1", Box("2", P))), Valid)


def test_global_invalid_carries_quasistate_certificate():
    out = decide_global_fusion(config(), TOP, barcan("1"))
    assert set(out.certificate) == {"basis", "quasistates"}


def test_local_examples():
    cfg = config()
    assert isinstance(decide_local_fusion(cfg, Implies(Box("1", And(P, Q)), Box("1", P))), Valid)
    assert isinstance(decide_local_fusion(cfg, Implies(Box("1", Box("2", p)), Box("2", Box("1", p)))), Invalid)
    assert isinstance(decide_local_fusion(cfg, converse_barcan("2")), Valid)


def test_config_checks():
    with pytest.raises(ValueError):
        FusionConfig(bounded_decider(K_FRAMES, 1, 1, "xd", modality="2"),
                     bounded_decider(K_FRAMES, 1, 1, "xd", modality="2"))
    with pytest.raises(ValueError):
        FusionConfig(bounded_decider(K_FRAMES, 1, 1, "xd", modality="1"),
                     bounded_decider(K_FRAMES, 1, 1, "cd", modality="2"), "xd")
    with pytest.raises(ValueError):
        config(strategy="greedy")


def test_equality_rejected():
    from fusionlogic.syntax import VAR, Eq
    with pytest.raises(ValueError):
        decide_local_fusion(config(), Eq(VAR, "c"))


def test_no_countermodel_for_valid_formula():
    assert build_countermodel_local(config(), Not(Not(Implies(P, P)))) is None


def test_countermodel_for_commutation():
    phi = Implies(Box("1", Box("2", p)), Box("2", Box("1", p)))
    M = build_countermodel_local(config(), phi)
    assert model_errors(M) == []
    assert not Evaluator(M).holds_at(0, phi)


def test_countermodel_for_running_example_satisfies_it():
    phi = And(Diamond("1", Diamond("2", p)), Diamond("2", Diamond("2", Diamond("1", r))))
    M = build_countermodel_local(config(), Not(phi))
    assert Evaluator(M).holds_at(0, phi)


def test_emitted_countermodel_is_attached():
    phi = Implies(Box("1", Box("2", p)), Box("2", Box("1", p)))
    out = decide_local_fusion(config(emit_countermodels=True), phi)
    assert not Evaluator(out.witness).holds_at(0, phi)


def test_unknown_without_fmp():
    out = decide_local_fusion(config(fmp=False), Implies(Box("1", Box("2", P)), Box("1", Box("2", P))))
    assert isinstance(out, Unknown)


def test_unknown_never_contradicts_fmp_run():
    strict, trusting = config(fmp=False), config()
    for f in fused_corpus(25, seed=3, min_adp=1):
        a = decide_local_fusion(strict, f)
        if not isinstance(a, Unknown):
            assert a.kind == decide_local_fusion(trusting, f).kind


def test_subset_budget_exhaustion_is_unknown():
    cfg = config(subset_budget=1)
    out = decide_global_fusion(cfg, Box("1", Box("2", P)), Box("2", Box("1", P)))
    assert isinstance(out, (Unknown, Invalid))
    if isinstance(out, Unknown):
        assert "budget" in out.reason


@pytest.mark.parametrize("spec,mode", [(K_FRAMES, "xd"), (S5_FRAMES, "cd")])
def test_strategies_agree(spec, mode):
    subset, fix = config(spec, mode), config(spec, mode, "elimination_fixpoint")
    fs = fused_corpus(24, seed=11, max_nodes=6)
    for a, b in zip(fs[::2], fs[1::2]):
        assert decide_global_fusion(subset, a, b).kind == decide_global_fusion(fix, a, b).kind


def test_compute_Q_matches_oracle():
    """Q_i(phi) from the recursion equals the quasistates whose negated sentence the oracle refutes."""
    cfg = config()
    checked = 0
    for phi in fused_corpus(20, seed=5, max_nodes=6, min_adp=1):
        qs = compute_Q(cfg, "1", phi)
        assert qs.complete and not qs.unsure
        if len(qs.basis) > 2:
            continue
        everything = list(enumerate_quasistates(qs.basis))
        checked += 1
        sure = set(qs.sure)
        for q in everything:
            oracle = fused_oracle(K_FRAMES, K_FRAMES, 3, 2, "xd", Not(realisability(qs.basis, q)))
            assert (q in sure) == isinstance(oracle, Invalid)
    assert checked >= 3


def test_local_agrees_with_oracle_sample():
    cfg = config(S5_FRAMES, "cd")
    for f in fused_corpus(30, seed=2, min_adp=1):
        assert decide_local_fusion(cfg, f).kind == fused_oracle(S5_FRAMES, S5_FRAMES, 3, 2, "cd", f).kind


def test_global_fmp_prefixes():
    phi, build = global_fmp_counterexample()
    M0, frontier0 = build(0)
    assert len(M0.worlds) == 1 and frontier0 == {0}
    assert M0.extension("Q", 0) == frozenset()
    for k in (1, 2, 3):
        M, frontier = build(k)
        assert model_errors(M) == []
        ev = Evaluator(M)
        assert all(ev.holds_at(w, phi) for w in M.worlds if w not in frontier)
    assert global_fmp_prefix(2)[0] == build(2)[0]
