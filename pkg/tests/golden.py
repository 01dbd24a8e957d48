"""Hand-built Hilbert proofs: accepted ones and mutants with their expected diagnostics."""

from dataclasses import replace

from beswork.hilbert import (
    Axiom, ExInst, Gen, HilbertProof, Hyp, Line, MP, ProofBuilder, finish, identity_lines,
)
from beswork.syntax import parse_formula as P


def _b(system, *ctx):
    return ProofBuilder(system, [P(c) for c in ctx])


def identity():
    b = _b("I")
    return finish(b, identity_lines(b, P("p")))


def k_use():
    b = _b("I", "p")
    return finish(b, b.mp(b.hyp(P("p")), b.axiom("K", P("p -> q -> p"))))


def s_use():
    b = _b("I", "p -> q -> r", "p -> q")
    s = b.axiom("S", P("(p -> q -> r) -> (p -> q) -> p -> r"))
    k = b.mp(b.hyp(P("p -> q -> r")), s)
    return finish(b, b.mp(b.hyp(P("p -> q")), k))


def all_elim():
    b = _b("I", "forall x P(x)")
    return finish(b, b.mp(b.hyp(P("forall x P(x)")), b.axiom("AllE", P("forall x P(x) -> P(c)"))))


def and_intro():
    b = _b("I", "p", "q")
    k = b.mp(b.hyp(P("p")), b.axiom("AndI", P("p -> q -> p & q")))
    return finish(b, b.mp(b.hyp(P("q")), k))


def and_elim(side):
    b = _b("I", "p & q")
    goal = "p" if side == 1 else "q"
    return finish(b, b.mp(b.hyp(P("p & q")), b.axiom(f"AndE{side}", P(f"p & q -> {goal}"))))


def or_intro(side):
    h = "p" if side == 1 else "q"
    b = _b("I", h)
    return finish(b, b.mp(b.hyp(P(h)), b.axiom(f"OrI{side}", P(f"{h} -> p | q"))))


def or_elim():
    b = _b("I", "p -> r", "q -> r", "p | q")
    ax = b.axiom("OrE", P("(p -> r) -> (q -> r) -> (p | q) -> r"))
    k = b.mp(b.hyp(P("q -> r")), b.mp(b.hyp(P("p -> r")), ax))
    return finish(b, b.mp(b.hyp(P("p | q")), k))


def ex_intro():
    b = _b("I", "P(c)")
    return finish(b, b.mp(b.hyp(P("P(c)")), b.axiom("ExI", P("P(c) -> exists x P(x)"))))


def neg_intro():
    b = _b("I", "p -> q", "p -> ~q")
    ax = b.axiom("NegI", P("(p -> q) -> (p -> ~q) -> ~p"))
    return finish(b, b.mp(b.hyp(P("p -> ~q")), b.mp(b.hyp(P("p -> q")), ax)))


def efq():
    b = _b("I", "~p", "p")
    k = b.mp(b.hyp(P("~p")), b.axiom("EFQ", P("~p -> p -> q")))
    return finish(b, b.mp(b.hyp(P("p")), k))


def dne():
    b = _b("C", "~~p")
    return finish(b, b.mp(b.hyp(P("~~p")), b.axiom("DNE", P("~~p -> p"))))


def generalization():
    b = _b("I")
    kid = identity_lines(b, P("P(x)"))
    k = b.mp(kid, b.axiom("K", P("(P(x) -> P(x)) -> Q(c) -> P(x) -> P(x)")))
    return finish(b, b.gen(k, "x"))


def existential_instantiation():
    b = _b("I")
    k = b.axiom("ExI", P("P(x) -> exists x P(x)"))
    return finish(b, b.exinst(k, "x"))


def swapped_mp():
    # operands listed major first
    pf = k_use()
    lines = list(pf.lines)
    last = lines[-1]
    lines[-1] = replace(last, just=MP(last.just.major, last.just.minor))
    return HilbertProof(pf.system, pf.context, tuple(lines))


def classical_identity():
    b = _b("C")
    return finish(b, identity_lines(b, P("~~p -> p")))


def chained_quantifiers():
    # forall x forall y R(x,y) |- R(c,d)
    b = _b("I", "forall x forall y R(x, y)")
    k = b.mp(b.hyp(P("forall x forall y R(x, y)")),
             b.axiom("AllE", P("(forall x forall y R(x, y)) -> forall y R(c, y)")))
    return finish(b, b.mp(k, b.axiom("AllE", P("(forall y R(c, y)) -> R(c, d)"))))


ACCEPTED = {
    "identity": identity, "k_use": k_use, "s_use": s_use, "all_elim": all_elim,
    "and_intro": and_intro, "and_elim1": lambda: and_elim(1), "and_elim2": lambda: and_elim(2),
    "or_intro1": lambda: or_intro(1), "or_intro2": lambda: or_intro(2), "or_elim": or_elim,
    "ex_intro": ex_intro, "neg_intro": neg_intro, "efq": efq, "dne": dne,
    "generalization": generalization, "existential_instantiation": existential_instantiation,
    "swapped_mp": swapped_mp, "classical_identity": classical_identity,
    "chained_quantifiers": chained_quantifiers,
}


def _proof(system, ctx, rows):
    return HilbertProof(system, tuple(P(c) for c in ctx),
                        tuple(Line(i + 1, P(f), j) for i, (f, j) in enumerate(rows)))


def _reindexed(pf, k, new_index):
    lines = list(pf.lines)
    lines[k] = replace(lines[k], index=new_index)
    return HilbertProof(pf.system, pf.context, tuple(lines))


# (name, proof, line, diagnostic fragment)
def mutants():
    return [
        ("gen_free_in_antecedent",
         _proof("I", ["P(x) -> Q(x)"], [("P(x) -> Q(x)", Hyp()),
                                         ("P(x) -> forall x Q(x)", Gen(1, "x"))]),
         2, "x free in antecedent"),
        ("exinst_free_in_consequent",
         _proof("I", ["P(x) -> Q(x)"], [("P(x) -> Q(x)", Hyp()),
                                         ("(exists x P(x)) -> Q(x)", ExInst(1, "x"))]),
         2, "x free in consequent"),
        ("mp_wrong_operands",
         _proof("I", ["p", "q -> r"], [("p", Hyp()), ("q -> r", Hyp()), ("r", MP(1, 2))]),
         3, "modus ponens operands"),
        ("mp_wrong_conclusion",
         _proof("I", ["p", "p -> q"], [("p", Hyp()), ("p -> q", Hyp()), ("r", MP(1, 2))]),
         3, "modus ponens operands"),
        ("hypothesis_not_in_context",
         _proof("I", ["p"], [("q", Hyp())]), 1, "hypothesis not in context"),
        ("dne_in_I",
         _proof("I", [], [("~~p -> p", Axiom("DNE"))]), 1, "not available in system I"),
        ("not_an_instance",
         _proof("I", [], [("p -> p", Axiom("K"))]), 1, "not an instance of K"),
        ("forward_reference",
         _proof("I", ["p"], [("q", MP(1, 2)), ("p", Hyp())]), 1, "not an earlier line"),
        ("gen_wrong_shape",
         _proof("I", ["q -> P(x)"], [("q -> P(x)", Hyp()), ("forall x (q -> P(x))", Gen(1, "x"))]),
         2, "generalization conclusion must be"),
        ("index_not_increasing",
         _reindexed(k_use(), 2, 1), 1, "does not increase"),
        ("all_elim_capture",
         _proof("I", [], [("(forall x forall y R(x, y)) -> forall y R(y, y)", Axiom("AllE"))]),
         1, "not an instance of AllE"),
    ]
