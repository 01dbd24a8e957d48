import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beswork.atomic import SECOND, AtomicRule, BaseDerivation, level
from beswork.generators import nullary, random_k_proof
from beswork.hilbert import (
    TOP, Axiom, Hyp, ProofBuilder, check_proof, deduction_elaborate, finish, prove_identity,
)
from beswork.simulation import (
    ExtractionError, SimulationError, build_natural_base, check_decoder_laws, check_flat_clauses,
    check_levels, completeness_pipeline, extract_hilbert, in_fragment, make_flat_map,
    prepare_simulation, simulate_hilbert, to_implicational, validate_in_base,
)
from beswork.syntax import BOT, FORALL, Quant, constants_of, const, imp, parse_formula as P

import golden
from strategies import formulas

ATOMS = nullary("pq")


class TestFlatMap:
    def test_identity_subformulae(self):
        fm = make_flat_map([], P("p -> p"), with_top=False)
        assert set(fm.xi) == {P("p -> p"), P("p")}
        assert len(set(fm.flat.values())) == 2

    def test_top_is_added(self):
        fm = make_flat_map([], P("p -> p"))
        assert TOP in fm.xi and BOT in fm.xi

    def test_quantifier_free_decoders_invert(self):
        fm = make_flat_map([P("p & q")], P("q | p"))
        assert fm.eigen == {}
        for f, a in fm.flat.items():
            assert fm.sharp_l(a) == fm.sharp_r(a) == f

    def test_eigen_instance(self):
        fm = make_flat_map([], P("forall x P(x)"))
        assert fm.eigen == {"x": "ev_x"}
        assert P("P(ev_x)") in fm.xi
        assert fm.flat_of(P("P(x)")) == fm.flat[P("P(ev_x)")]
        a = fm.flat[P("P(ev_x)")]
        assert fm.sharp_r(a) == P("P(x)") and fm.sharp_l(a) == P("forall x P(x)")

    def test_eigen_clash(self):
        with pytest.raises(SimulationError, match="already occurs"):
            make_flat_map([], P("forall x P(x) -> P(ev_x)"))

    def test_off_image_atoms_decode_to_themselves(self):
        fm = make_flat_map([], P("p -> p"))
        assert fm.sharp_l(P("p")) == fm.sharp_r(P("p")) == P("p")

    @settings(max_examples=40, deadline=None)
    @given(formulas(max_leaves=4))
    def test_invariants(self, f):
        fm = make_flat_map([], f)
        flats = list(fm.flat.values())
        assert len(set(flats)) == len(flats)
        source_preds = {p for p, _ in __import__("beswork.syntax", fromlist=["x"]).predicates_of(fm.goal)}
        assert not {a.pred for a in flats} & source_preds
        assert not set(fm.eigen.values()) & constants_of(fm.goal)
        assert check_decoder_laws(fm) == []
        assert make_flat_map([], f).flat == fm.flat


class TestNaturalBase:
    def test_identity_base_rules(self):
        fm = make_flat_map([], P("p -> p"), with_top=False)
        nb = build_natural_base(fm, "K")
        flat = nb.fm.flat
        assert AtomicRule((), flat[P("p -> p -> p")]) in nb.system
        mp = AtomicRule(((frozenset(), flat[P("p")]), (frozenset(), flat[P("p -> p")])), flat[P("p")])
        assert mp in nb.system

    def test_dne_only_in_K(self):
        fm = make_flat_map([], P("~~p -> p"))
        k, j = build_natural_base(fm, "K"), build_natural_base(fm, "J")
        dne = AtomicRule((), fm.flat[P("~~p -> p")])
        assert dne in k.system and dne not in j.system
        assert k.stats.get("DNE") and not j.stats.get("DNE")

    def test_levels(self):
        for goal in ("~~p -> p", "forall x (P(x) -> P(x))", "(p -> q) -> p -> q"):
            fm = make_flat_map([], P(goal))
            assert check_levels(build_natural_base(fm, "K")) == []
            assert all(level(r) != SECOND for r in build_natural_base(fm, "K").system)
        j = build_natural_base(make_flat_map([], P("p | q -> q | p")), "J")
        assert any(level(r) == SECOND for r in j.system)

    def test_gen_side_condition(self):
        fm = make_flat_map([P("forall x (q -> P(x))")], P("q -> forall x P(x)"))
        nb = build_natural_base(fm, "K")
        gens = [r for r in nb.system if nb.classify(r)[0] == "GEN"]
        assert gens
        for r in gens:
            concl = nb.fm.inverse[r.conclusion]
            assert isinstance(concl.right, Quant) and concl.right.q == FORALL
            assert f"ev_{concl.right.var}" not in constants_of(concl.left)

    def test_structural_membership_agrees_with_enumeration(self):
        fm = make_flat_map([], P("forall x (P(x) -> P(x))"))
        full = build_natural_base(fm, "K")
        lazy = build_natural_base(full.fm, "K", enumerate_rules=False)
        missing = [str(r) for r in full.system if r not in lazy]
        assert missing == []


class TestSimulate:
    def test_identity(self):
        pf = prove_identity(P("p"), "C")
        fm, nb = prepare_simulation(pf, "K")
        d = simulate_hilbert(pf, fm, nb)
        assert d.size() == 5 and validate_in_base(d, nb) == []

    def test_hypothesis_line(self):
        from beswork.hilbert import ProofBuilder, finish
        b = ProofBuilder("C", [P("p")])
        pf = finish(b, b.hyp(P("p")))
        fm, nb = prepare_simulation(pf, "K")
        d = simulate_hilbert(pf, fm, nb)
        assert d.is_ref and d.atom == fm.flat[P("p")]

    def test_dne_in_J(self):
        pf = golden.dne()
        fm, nb = prepare_simulation(pf, "J")
        with pytest.raises(SimulationError, match="DNE"):
            simulate_hilbert(pf, fm, nb)

    def test_exinst_has_no_rule(self):
        pf = golden.existential_instantiation()
        fm, nb = prepare_simulation(pf, "J")
        with pytest.raises(SimulationError, match="existential instantiation"):
            simulate_hilbert(pf, fm, nb)


class TestExtract:
    def test_round_trip_identity(self):
        pf = prove_identity(P("p"), "C")
        fm, nb = prepare_simulation(pf, "K")
        out = extract_hilbert(simulate_hilbert(pf, fm, nb), nb)
        assert check_proof(out).ok and out.system == "C" and out.conclusion == P("p -> p")

    def test_dne_axiom(self):
        fm = make_flat_map([], P("~~p -> p"))
        nb = build_natural_base(fm, "K")
        a = fm.flat[P("~~p -> p")]
        out = extract_hilbert(BaseDerivation(frozenset(), a, AtomicRule((), a)), nb)
        assert out.system == "C" and len(out) == 1
        assert isinstance(out.lines[0].just, Axiom) and out.lines[0].just.scheme == "DNE"

    def test_ref(self):
        fm = make_flat_map([P("p & q")], P("p"))
        nb = build_natural_base(fm, "J")
        a = fm.flat[P("p & q")]
        out = extract_hilbert(BaseDerivation(frozenset({a}), a), nb)
        assert len(out) == 1 and isinstance(out.lines[0].just, Hyp)

    def test_foreign_rule_named(self):
        fm = make_flat_map([], P("p -> p"))
        nb = build_natural_base(fm, "K")
        a = fm.flat[P("p")]
        with pytest.raises(ExtractionError, match="root"):
            extract_hilbert(BaseDerivation(frozenset(), a, AtomicRule((), a)), nb)


K_GOLDEN = ["identity", "k_use", "s_use", "all_elim", "dne", "generalization",
            "classical_identity", "chained_quantifiers", "swapped_mp"]
J_GOLDEN = ["identity", "k_use", "s_use", "all_elim", "and_intro", "and_elim1", "and_elim2",
            "or_intro1", "or_intro2", "ex_intro", "neg_intro", "generalization"]


@pytest.mark.parametrize("variant,name", [("K", n) for n in K_GOLDEN] + [("J", n) for n in J_GOLDEN])
def test_golden_round_trip(variant, name):
    pf = golden.ACCEPTED[name]()
    res = completeness_pipeline(list(pf.context), pf.conclusion, variant, source=pf, allow_and=True)
    assert res.ok, res.transcript
    assert res.proof.conclusion == pf.conclusion and set(res.proof.context) <= set(pf.context)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_round_trip(seed):
    rng = random.Random(seed)
    ctx = [P("p"), P("p -> q")] if seed % 2 else []
    pf = random_k_proof(rng, ATOMS, context=ctx)
    res = completeness_pipeline(list(pf.context), pf.conclusion, "K", source=pf)
    assert res.ok
    assert res.proof.conclusion == pf.conclusion and set(res.proof.context) <= set(pf.context)


class TestPipeline:
    def test_identity_by_search(self):
        res = completeness_pipeline([], P("p -> p"), "K")
        assert res.ok and res.route == "search"
        for section in ("FLATMAP", "BASE", "DERIVATION", "EXTRACTED-PROOF", "VERDICT"):
            assert f"== {section} ==" in res.transcript

    def test_dne_classical(self):
        res = completeness_pipeline([], P("~~p -> p"), "K")
        assert res.ok
        assert any(isinstance(ln.just, Axiom) and ln.just.scheme == "DNE" for ln in res.proof.lines)

    def test_dne_intuitionistic_fails(self):
        res = completeness_pipeline([], P("~~p -> p"), "J")
        assert not res.ok and res.derivation is None and "FAIL" in res.transcript

    def test_fragment_enforced(self):
        with pytest.raises(SimulationError, match="fragment"):
            completeness_pipeline([], P("p | q -> q | p"), "K")

    def test_disjunction_swap_needs_discharge(self):
        res = completeness_pipeline([], P("(p | q) -> (q | p)"), "J")
        assert res.ok and res.route == "search+discharge(1)"

    def test_non_fresh_witnesses_are_excluded(self):
        res = completeness_pipeline([P("exists x P(x)")], P("exists y P(y)"), "J")
        assert res.ok and "excluded" in res.transcript


def test_fragment_helpers():
    assert in_fragment(P("forall x (P(x) -> bot)"))
    assert not in_fragment(P("p & q"))
    assert in_fragment(P("p & q"), allow_and=True)
    for f in ("p & q", "p | q", "exists x P(x)", "p | q -> exists x (P(x) & q)"):
        assert in_fragment(to_implicational(P(f)))


def test_clause_checks_on_simple_bases():
    fm = make_flat_map([], P("(p -> q) -> p -> q"))
    assert all(c.ok for c in check_flat_clauses(build_natural_base(fm, "K")))
    fm = make_flat_map([], P("forall x (P(x) -> P(x))"))
    assert all(c.ok for c in check_flat_clauses(build_natural_base(fm, "K")))


def test_clause_iv_gap_in_J():
    # flat(p & q) derives flat(q & p), but the implication is not derivable
    fm = make_flat_map([], P("p & q -> q & p"))
    nb = build_natural_base(fm, "J")
    bad = [c for c in check_flat_clauses(nb) if not c.ok]
    assert [(c.clause, c.lhs, c.rhs) for c in bad] == [("iv", False, True)]


def test_search_is_limited_to_the_subformula_set():
    # bot -> p needs ~~p, which is not a subformula; a source proof supplies it
    assert not completeness_pipeline([], P("bot -> p"), "K").ok
    b = ProofBuilder("C", [P("bot")])
    nn = b.mp(b.hyp(P("bot")), b.axiom("K", P("bot -> ~p -> bot")))
    pf = deduction_elaborate(finish(b, b.mp(nn, b.axiom("DNE", P("~~p -> p")))), P("bot"))
    res = completeness_pipeline([], pf.conclusion, "K", source=pf)
    assert res.ok and res.route == "simulate"
