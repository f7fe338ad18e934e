"""Batch command-line front end.

Exit status: 0 valid / holds, 1 invalid / fails, 2 unknown, 10 and above for
usage (10), parse (11) and input-contract (12) errors.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .deciders import ContractError, Invalid, Unknown, Valid, bounded_decider, prop_bounded_decider
from .encoders import (
    encode_diophantine, encode_minsky, parse_equations, parse_minsky, simulate_minsky_model,
    witness_model_diophantine,
)
from .fusion import STRATEGIES, FusionConfig, decide_global_fusion, decide_local_fusion, fused_oracle
from .fusion import global_fmp_counterexample
from .prop_fusion import SharedS5Config, decide_global_shared_s5, decide_local_shared_s5
from .quasistates import Basis, dump_quasistate, enumerate_quasistates
from .semantics import (
    DIFF_FRAMES, K_FRAMES, S5_FRAMES, Evaluator, FOKripkeModel, dump_model, frame_to_dot,
    model_errors, model_from_json, model_to_json,
)
from .syntax import Language, ParseError, parse, subformulas, to_str, translate_star, translate_star_inv

EXIT_VALID, EXIT_INVALID, EXIT_UNKNOWN = 0, 1, 2
EXIT_USAGE, EXIT_PARSE, EXIT_CONTRACT = 10, 11, 12

LOGICS = {"K": K_FRAMES, "S5": S5_FRAMES, "Diff": DIFF_FRAMES}
DECIDABLE = ("K", "S5")


class InputError(Exception):
    """Bad input data; carries its exit status."""

    def __init__(self, msg: str, code: int = EXIT_CONTRACT):
        super().__init__(msg)
        self.code = code


def worker_cap() -> int:
    """Worker count from FUSION_THREADS (default 1)."""
    raw = os.environ.get("FUSION_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"FUSION_THREADS must be a positive integer, got {raw!r}", EXIT_USAGE) from None
    if n < 1:
        raise InputError("FUSION_THREADS must be a positive integer", EXIT_USAGE)
    return n


def read_text(arg: str) -> str:
    """A literal argument, or the contents of a file when written as @path."""
    if arg.startswith("@"):
        try:
            return Path(arg[1:]).read_text()
        except OSError as e:
            raise InputError(f"cannot read {arg[1:]}: {e.strerror}", EXIT_USAGE) from None
    return arg


def parse_formula(text: str, lang: Language | None = None):
    try:
        return parse(read_text(text).strip(), lang)
    except ParseError as e:
        raise InputError(f"parse error: {e}", EXIT_PARSE) from None
    except ValueError as e:
        raise InputError(str(e), EXIT_PARSE) from None


def outcome_code(out) -> int:
    if isinstance(out, Valid):
        return EXIT_VALID
    if isinstance(out, Invalid):
        return EXIT_INVALID
    return EXIT_UNKNOWN


def jsonable(obj):
    if isinstance(obj, FOKripkeModel):
        return model_to_json(obj)
    if isinstance(obj, (dict, list, str, int, float, bool)) or obj is None:
        return obj
    return repr(obj)


def emit(fmt: str, record: dict, human: list[str]) -> None:
    if fmt == "json":
        click.echo(json.dumps(record, sort_keys=True))
    else:
        for line in human:
            click.echo(line)


def write_file(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise InputError(f"cannot write {path}: {e.strerror}", EXIT_USAGE) from None


# ------------------------------------------------------------------ options


def logic_options(f):
    opts = [
        click.option("--l1", default="K", type=click.Choice(list(LOGICS)), help="Logic of modality 1."),
        click.option("--l2", default="K", type=click.Choice(list(LOGICS)), help="Logic of modality 2."),
        click.option("--mode", default="xd", type=click.Choice(["xd", "cd"]), help="Domain mode."),
        click.option("--max-worlds", default=3, type=click.IntRange(1), show_default=True),
        click.option("--max-elems", default=2, type=click.IntRange(1), show_default=True),
        click.option("--assume-fmp-bound/--no-assume-fmp-bound", default=True, show_default=True,
                     help="Treat the bounds as sufficient, so exhausted searches mean valid; "
                          "without it they mean unknown."),
        click.option("--strategy", default=STRATEGIES[0], type=click.Choice(list(STRATEGIES))),
        click.option("--subset-budget", default=4096, type=click.IntRange(1), show_default=True),
        click.option("--via-shared-s5", is_flag=True,
                     help="Decide the propositional translation with a shared S5 modality."),
        click.option("--format", "fmt", default="human", type=click.Choice(["human", "json"])),
        click.option("--witness", type=click.Path(dir_okay=False), help="Write a countermodel (JSON)."),
        click.option("--certificate", type=click.Path(dir_okay=False), help="Write the certificate (JSON)."),
        click.option("--dot", type=click.Path(dir_okay=False), help="Write the witness frame as DOT."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _decider_specs(l1: str, l2: str):
    for name in (l1, l2):
        if name not in DECIDABLE:
            raise InputError(f"no decider for {name}; it is available to check-model only", EXIT_USAGE)
    return LOGICS[l1], LOGICS[l2]


def make_config(o: dict, prop: bool):
    s1, s2 = _decider_specs(o["l1"], o["l2"])
    if prop:
        # one E-class plays the role of one domain: cap classes at max_elems
        worlds = o["max_worlds"] * o["max_elems"]
        d1 = prop_bounded_decider(s1, worlds, "1", o["mode"], o["assume_fmp_bound"], o["max_elems"])
        d2 = prop_bounded_decider(s2, worlds, "2", o["mode"], o["assume_fmp_bound"], o["max_elems"])
        return SharedS5Config(d1, d2, o["mode"], o["strategy"], o["subset_budget"])
    d1 = bounded_decider(s1, o["max_worlds"], o["max_elems"], o["mode"], o["assume_fmp_bound"], "1")
    d2 = bounded_decider(s2, o["max_worlds"], o["max_elems"], o["mode"], o["assume_fmp_bound"], "2")
    return FusionConfig(d1, d2, o["mode"], o["strategy"], emit_countermodels=bool(o["witness"] or o["dot"]),
                        subset_budget=o["subset_budget"])


def report(o: dict, out, query: dict) -> int:
    record = dict(query, outcome=out.kind)
    human = [out.kind]
    if isinstance(out, Unknown):
        record["reason"] = out.reason
        human.append(f"reason: {out.reason}")
    if isinstance(out, Invalid):
        if o["certificate"] and out.certificate is not None:
            write_file(o["certificate"], json.dumps(jsonable(out.certificate), sort_keys=True, indent=1))
            human.append(f"certificate written to {o['certificate']}")
        if out.witness is not None:
            if o["witness"]:
                write_file(o["witness"], dump_model(out.witness))
                human.append(f"witness written to {o['witness']}")
            if o["dot"]:
                write_file(o["dot"], frame_to_dot(out.witness.frame, "witness") + "\n")
        elif o["witness"]:
            human.append("no concrete witness within the bounds")
        record["witness"] = o["witness"] if out.witness is not None else None
    emit(o["fmt"], record, human)
    return outcome_code(out)


def _global_witness(o: dict, phi, psi, out):
    """Global outcomes carry a certificate; look for a concrete model on request."""
    if not isinstance(out, Invalid) or out.witness is not None or not (o["witness"] or o["dot"]):
        return out
    s1, s2 = _decider_specs(o["l1"], o["l2"])
    found = fused_oracle(s1, s2, o["max_worlds"], o["max_elems"], o["mode"], phi, psi)
    if isinstance(found, Invalid):
        return Invalid(found.witness, 0, out.certificate)
    return out


# ----------------------------------------------------------------- commands


@click.group()
@click.version_option(package_name="fusionlogic")
def main():
    """Decision procedures and encoders for fused one-variable modal logics."""


@main.command("decide-local")
@click.argument("formula")
@logic_options
def decide_local_cmd(formula, **o):
    """Is FORMULA valid in the fusion (local consequence of the empty set)?"""
    worker_cap()
    phi = parse_formula(formula)
    if o["via_shared_s5"]:
        out = decide_local_shared_s5(make_config(o, prop=True), translate_star(phi))
    else:
        out = decide_local_fusion(make_config(o, prop=False), phi)
    return report(o, out, {"command": "decide-local", "formula": to_str(phi)})


@main.command("decide-global")
@click.option("--phi", required=True, help="Global premise.")
@click.option("--psi", required=True, help="Conclusion.")
@logic_options
def decide_global_cmd(phi, psi, **o):
    """Does PSI follow from PHI under global consequence?"""
    worker_cap()
    f, g = parse_formula(phi), parse_formula(psi)
    if o["via_shared_s5"]:
        out = decide_global_shared_s5(make_config(o, prop=True), translate_star(f), translate_star(g))
    else:
        out = decide_global_fusion(make_config(o, prop=False), f, g)
        out = _global_witness(o, f, g, out)
    return report(o, out, {"command": "decide-global", "phi": to_str(f), "psi": to_str(g)})


@main.command("check-model")
@click.argument("model", type=click.Path(exists=True, dir_okay=False))
@click.argument("formula")
@click.option("--world", type=int, default=None, help="Check at this world (default: every world).")
@click.option("--l1", type=click.Choice(list(LOGICS)), help="Require relation 1 to be in this class.")
@click.option("--l2", type=click.Choice(list(LOGICS)), help="Require relation 2 to be in this class.")
@click.option("--format", "fmt", default="human", type=click.Choice(["human", "json"]))
@click.option("--dot", type=click.Path(dir_okay=False), help="Write the model frame as DOT.")
def check_model_cmd(model, formula, world, l1, l2, fmt, dot):
    """Model-check FORMULA on the JSON MODEL, at one world or globally."""
    try:
        M = model_from_json(Path(model).read_text())
    except (ValueError, KeyError, TypeError) as e:
        raise InputError(f"malformed model file: {e}", EXIT_PARSE) from None
    errs = model_errors(M)
    if errs:
        raise InputError(f"invalid model: {errs[0]}")
    for mod, name in (("1", l1), ("2", l2)):
        if name and not LOGICS[name].holds(M.worlds, M.frame.relations.get(mod, frozenset())):
            raise InputError(f"relation {mod} is not a {name} frame")
    mods = frozenset(M.frame.relations) | {"1", "2"}
    phi = parse_formula(formula, Language(modality_ids=mods, equality=True))
    ev = Evaluator(M)
    if world is not None:
        if world not in M.worlds:
            raise InputError(f"world {world} is not in the model")
        failing = [] if ev.holds_at(world, phi) else [world]
    else:
        failing = [w for w in M.worlds if not ev.holds_at(w, phi)]
    if dot:
        write_file(dot, frame_to_dot(M.frame, "model") + "\n")
    holds = not failing
    emit(fmt, {"command": "check-model", "formula": to_str(phi), "holds": holds, "failing_worlds": failing},
         ["holds" if holds else "fails", *(f"fails at world {w}" for w in failing)])
    return EXIT_VALID if holds else EXIT_INVALID


@main.command("enumerate-quasistates")
@click.argument("formula")
@click.option("--format", "fmt", default="human", type=click.Choice(["human", "json"]))
def enumerate_quasistates_cmd(formula, fmt):
    """List the quasistates over the subformulas of FORMULA."""
    phi = parse_formula(formula, Language(modality_ids={"1", "2"}, equality=True))
    basis = Basis(subformulas(phi), prop=False)
    qs = [dump_quasistate(basis, q) for q in enumerate_quasistates(basis)]
    emit(fmt, {"command": "enumerate-quasistates", "basis": [to_str(f) for f in basis.formulas],
               "quasistates": qs}, [f"{len(qs)} quasistates", *qs])
    return EXIT_VALID


@main.command("translate-star")
@click.argument("formula")
@click.option("--inverse", is_flag=True, help="Map a shared-S5 propositional formula back.")
def translate_star_cmd(formula, inverse):
    """Print the translation of FORMULA into the propositional shared-S5 language."""
    if inverse:
        from .syntax import parse_prop
        try:
            f = parse_prop(read_text(formula).strip())
        except ValueError as e:
            raise InputError(f"parse error: {e}", EXIT_PARSE) from None
        try:
            click.echo(to_str(translate_star_inv(f)))
        except ValueError as e:
            raise InputError(str(e)) from None
        return EXIT_VALID
    phi = parse_formula(formula)
    try:
        click.echo(to_str(translate_star(phi)))
    except ValueError as e:
        raise InputError(str(e)) from None
    return EXIT_VALID


@main.command("encode-diophantine")
@click.argument("equations")
@click.option("--solution", help="Comma-separated values, e.g. y=2,z=1; builds and checks a witness model.")
@click.option("--witness", type=click.Path(dir_okay=False), help="Write the witness model (JSON).")
def encode_diophantine_cmd(equations, solution, witness):
    """Print the formula for the equation system EQUATIONS (text or @file)."""
    try:
        E = parse_equations(read_text(equations))
        phi = encode_diophantine(E)
    except ValueError as e:
        raise InputError(str(e), EXIT_PARSE) from None
    click.echo(to_str(phi))
    if solution is None:
        return EXIT_VALID
    try:
        sol = {k.strip(): int(v) for k, v in (item.split("=") for item in solution.split(","))}
    except ValueError:
        raise InputError(f"cannot read solution {solution!r}", EXIT_USAGE) from None
    try:
        M = witness_model_diophantine(E, sol)
    except ValueError as e:
        raise InputError(str(e)) from None
    if witness:
        write_file(witness, dump_model(M))
    ok = Evaluator(M).holds_globally(phi)
    click.echo(f"witness model with {len(M.worlds)} worlds: {'holds' if ok else 'fails'}")
    return EXIT_VALID if ok else EXIT_INVALID


@main.command("encode-minsky")
@click.argument("machine")
@click.option("--simulate", type=click.IntRange(0), help="Build the prefix model of this many steps.")
@click.option("--witness", type=click.Path(dir_okay=False), help="Write the prefix model (JSON).")
def encode_minsky_cmd(machine, simulate, witness):
    """Print the initial, state and transition formulas of MACHINE (text or @file)."""
    try:
        M = parse_minsky(read_text(machine))
    except ValueError as e:
        raise InputError(str(e), EXIT_PARSE) from None
    init, states, trans = encode_minsky(M)
    for name, f in (("init", init), ("states", states), ("transitions", trans)):
        click.echo(f"{name}: {to_str(f)}")
    if simulate is None:
        return EXIT_VALID
    P = simulate_minsky_model(M, simulate)
    if witness:
        write_file(witness, dump_model(P.model))
    ev = Evaluator(P.model)
    inner = [w for w in P.model.worlds if w not in P.frontier]
    ok = (ev.holds_at(P.root, init) and all(ev.holds_at(w, states) for w in P.model.worlds)
          and all(ev.holds_at(w, trans) for w in inner))
    click.echo(f"prefix of {len(P.configs) - 1} steps, frontier {sorted(P.frontier)}: "
               f"{'consistent' if ok else 'violated'}")
    return EXIT_VALID if ok else EXIT_INVALID


@main.command("counterexample-gfmp")
@click.option("--prefix", "k", type=click.IntRange(0), default=None, help="Also build the k-step prefix model.")
@click.option("--witness", type=click.Path(dir_okay=False), help="Write the prefix model (JSON).")
def counterexample_gfmp_cmd(k, witness):
    """Print a formula whose global models are all infinite."""
    phi, prefix = global_fmp_counterexample()
    click.echo(to_str(phi))
    if k is None:
        return EXIT_VALID
    M, frontier = prefix(k)
    if witness:
        write_file(witness, dump_model(M))
    ev = Evaluator(M)
    ok = all(ev.holds_at(w, phi) for w in M.worlds if w not in frontier)
    click.echo(f"prefix with {len(M.worlds)} worlds, frontier {sorted(frontier)}: "
               f"{'holds off the frontier' if ok else 'fails'}")
    return EXIT_VALID if ok else EXIT_INVALID


# ------------------------------------------------------------- entry points


def run(argv: list[str] | None = None) -> int:
    """Run one command and return its exit status."""
    try:
        rv = main.main(args=argv, prog_name="fusionlogic", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except InputError as e:
        click.echo(f"error: {e}", err=True)
        return e.code
    except ContractError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_CONTRACT
    except click.Abort:
        return EXIT_USAGE
    return rv if isinstance(rv, int) else 0


def entry() -> None:
    sys.exit(run())


if __name__ == "__main__":
    entry()
