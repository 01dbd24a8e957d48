"""The nine release criteria, each at its stated scale and tolerance.

Every test records a one-line verdict that is repeated in the pytest
terminal summary under "acceptance criteria".
"""

import itertools
import random
import time

from beswork.atomic import AtomicSystem, derives, rule, validate_derivation
from beswork.generators import (
    nullary, random_atomic_system, random_efq_input, random_exists_elim_input,
    random_hypothetical_proof, random_or_elim_inputs,
)
from beswork.hilbert import (
    AXIOMS, Axiom, ProofBuilder, check_proof, deduction_elaborate, derive_efq,
    derive_exists_elim, derive_or_elim, finish, system_schemes,
)
from beswork.props import atcomp_sweep, clause_survey, monotonicity_sweep, rule_sets_upto
from beswork.simulation import build_natural_base, completeness_pipeline, make_flat_map
from beswork.support import Basis, Evaluator, SupportTable, formulas_by_weight
from beswork.syntax import (
    Instantiation, atom, const, imp, instantiate_scheme, parse_formula as P, print_formula,
    scheme_formula_vars, substitute,
)

import golden
from oracles import DirectSupport, check_witness, oracle_derives, saturate
from report import record


def _elapsed(t0):
    return time.perf_counter() - t0


# 1 -------------------------------------------------------------------------

def test_c1_hilbert_golden_suite():
    t0 = time.perf_counter()
    used = set()
    accepted = 0
    for make in golden.ACCEPTED.values():
        pf = make()
        accepted += check_proof(pf).ok
        used |= {ln.just.scheme for ln in pf.lines if isinstance(ln.just, Axiom)}
    rejected = 0
    muts = golden.mutants()
    for _, pf, line, fragment in muts:
        v = check_proof(pf)
        rejected += (not v.ok) and any(k == line and fragment in m for k, m in v.diagnostics)
    secs = _elapsed(t0)
    ok = (accepted == len(golden.ACCEPTED) >= 15 and used == set(AXIOMS)
          and rejected == len(muts) >= 10 and secs < 1.0)
    record(1, ok, f"{accepted}/{len(golden.ACCEPTED)} accepted, schemes used {len(used)}/{len(AXIOMS)}, "
                  f"{rejected}/{len(muts)} mutants rejected at the right line", secs)
    assert ok


# 2 -------------------------------------------------------------------------

ATOMS3 = nullary("pqr")


def _deduction(rng):
    pf, phi = random_hypothetical_proof(rng, "I", ATOMS3, rng.random() < 0.5)
    out = deduction_elaborate(pf, phi)
    rest = set(pf.context) - {phi}
    return out, out.conclusion == imp(phi, pf.conclusion) and set(out.context) <= rest


def _or_elim(rng):
    pf0, pf1, pf2 = random_or_elim_inputs(rng, ATOMS3)
    out = derive_or_elim(pf0, pf1, pf2)
    d = pf0.conclusion
    allowed = set(pf0.context) | (set(pf1.context) - {d.left}) | (set(pf2.context) - {d.right})
    return out, (out.conclusion == pf1.conclusion == pf2.conclusion
                 and set(out.context) <= allowed)


def _efq(rng):
    pf, phi = random_efq_input(rng, ATOMS3)
    out = derive_efq(pf, phi)
    return out, out.conclusion == phi and out.context == pf.context


def _exists_elim(rng):
    pf0, pf1, t = random_exists_elim_input(rng)
    out = derive_exists_elim(pf0, pf1, t)
    ex = pf0.conclusion
    inst = substitute(ex.body, ex.var, t)
    allowed = set(pf0.context) | (set(pf1.context) - {inst})
    return out, out.conclusion == pf1.conclusion and set(out.context) <= allowed


def test_c2_elaborator_soundness():
    t0 = time.perf_counter()
    rng = random.Random(2)
    tallies = {}
    for name, fn in (("deduction", _deduction), ("or-elim", _or_elim), ("efq", _efq),
                     ("exists-elim", _exists_elim)):
        good = 0
        for _ in range(500):
            out, shape = fn(rng)
            good += check_proof(out).ok and shape
        tallies[name] = good
    secs = _elapsed(t0)
    ok = all(v == 500 for v in tallies.values()) and secs < 30
    record(2, ok, ", ".join(f"{k} {v}/500" for k, v in tallies.items()), secs)
    assert ok


# 3 -------------------------------------------------------------------------

def test_c3_derivability_matches_saturation():
    t0 = time.perf_counter()
    rng = random.Random(3)
    atoms = nullary("pqrstu")
    agree = witnesses = positives = 0
    for _ in range(1000):
        sysm = random_atomic_system(rng, atoms, max_rules=10, max_premises=2, max_hyps=2)
        assert len(sysm) <= 10
        ctx = frozenset(rng.sample(atoms, rng.randint(0, 2)))
        table = saturate(sysm, ctx)[ctx]
        for goal in atoms:
            ok, w = derives(sysm, ctx, goal)
            agree += ok == (goal in table)
            if ok:
                positives += 1
                witnesses += check_witness(w, sysm) and not validate_derivation(w, sysm)
    secs = _elapsed(t0)
    ok = agree == 6000 and witnesses == positives and secs < 60
    record(3, ok, f"{agree}/6000 queries agree, {witnesses}/{positives} witnesses re-validate", secs)
    assert ok


# 4 -------------------------------------------------------------------------

def test_c4_monotonicity_exhaustive():
    t0 = time.perf_counter()
    p, q, r = ATOMS3
    pool = [rule(p), rule(q, p), rule(r, ((p,), q)), rule(p, r)]
    sweep = monotonicity_sweep(ATOMS3, pool, 4)
    # second route on the low weights: the memoised clause evaluator
    basis = Basis.powerset(pool, ATOMS3)
    table, ev = SupportTable(basis), Evaluator(basis)
    mismatches = sum(bool((table.mask(f) >> i) & 1) != ev.supports(i, (), f)
                     for fs in formulas_by_weight(ATOMS3, 2) for f in fs
                     for i in range(len(basis)))
    secs = _elapsed(t0)
    ok = sweep.bases == 16 and not sweep.violations and not mismatches
    record(4, ok, f"{sweep.formulas} formulas x {sweep.bases} bases, "
                  f"{len(sweep.violations)} violations, {mismatches} route mismatches", secs)
    assert ok


# 5 -------------------------------------------------------------------------

def test_c5_atomic_cut_exhaustive():
    t0 = time.perf_counter()
    p, q, r, s = atoms = nullary("pqrs")
    pool = [rule(q, p), rule(r, p, q), rule(s, ((p,), q)), rule(p, ((q, r), s)), rule(r, s)]
    sweep = atcomp_sweep(atoms, rule_sets_upto(pool, 3))
    secs = _elapsed(t0)
    ok = not sweep.failures
    record(5, ok, f"{sweep.instances} instances over {sweep.bases} bases, "
                  f"{len(sweep.failures)} failures", secs)
    assert ok


# 6 -------------------------------------------------------------------------

def test_c6_flattening_clauses():
    t0 = time.perf_counter()
    rng = random.Random(6)
    surveys = [clause_survey(rng, v, 10, ATOMS3[:2], depth=2, extensions=3) for v in ("K", "J")]
    secs = _elapsed(t0)
    checks = sum(len(s.checks) for s in surveys)
    held = sum(c.ok for s in surveys for _, _, c in s.checks)
    small = all(xi <= 8 for s in surveys for _, xi, _ in s.bases)
    failed = [f"{s.variant} ({c.clause}) {print_formula(c.formula)}"
              for s in surveys for _, _, c in s.failures]
    ok = (small and checks >= 200 and held == checks and secs < 120
          and sum(len(s.bases) for s in surveys) == 20)
    detail = f"{held}/{checks} biconditionals hold over 20 bases"
    if failed:
        detail += "; fails: " + "; ".join(sorted(set(failed)))
    record(6, ok, detail, secs)
    assert ok, detail


# 7 -------------------------------------------------------------------------

K_SEARCH = ["~~p -> p", "forall x P(x) -> P(c)", "p -> q -> p",
            "(p -> q -> r) -> (p -> q) -> p -> r", "p -> p", "forall x (P(x) -> P(x))",
            "~p -> p -> bot", "p -> ~~p", "(p -> q) -> (q -> r) -> p -> r",
            "(forall x P(x)) -> forall y P(y)"]
K_SIMULATE = ["identity", "k_use", "s_use", "all_elim", "dne", "generalization",
              "chained_quantifiers", "classical_identity"]
J_SEARCH = ["(p | q) -> (q | p)", "P(c) -> exists x P(x)", "P(d) -> exists y P(y)",
            "p & q -> p", "p -> p | q", "p & q -> q & p", "(p -> q) -> (p -> ~q) -> ~p",
            "forall x P(x) -> exists x P(x)", "~p -> p -> q",
            "(p -> r) -> (q -> r) -> p | q -> r", "p -> q -> p & q"]
J_SIMULATE = ["and_intro", "or_intro1", "ex_intro", "neg_intro", "and_elim2"]


def _bot_implies_anything():
    # bot |- ~~p by K and MP, then DNE; discharged
    b = ProofBuilder("C", [P("bot")])
    nn = b.mp(b.hyp(P("bot")), b.axiom("K", P("bot -> ~p -> bot")))
    pf = finish(b, b.mp(nn, b.axiom("DNE", P("~~p -> p"))))
    return deduction_elaborate(pf, P("bot"))


def test_c7_completeness_round_trip():
    t0 = time.perf_counter()
    cases = [("K", [], P(f), None) for f in K_SEARCH]
    cases += [("J", [], P(f), None) for f in J_SEARCH]
    for v, names in (("K", K_SIMULATE), ("J", J_SIMULATE)):
        for n in names:
            pf = golden.ACCEPTED[n]()
            cases.append((v, list(pf.context), pf.conclusion, pf))
    pf = _bot_implies_anything()
    cases.append(("K", [], pf.conclusion, pf))
    failed = []
    for v, ctx, goal, src in cases:
        res = completeness_pipeline(ctx, goal, v, source=src, allow_and=src is not None)
        exact = (res.ok and res.proof.conclusion == res.goal
                 and set(res.proof.context) <= set(res.gamma) and check_proof(res.proof).ok)
        if not exact:
            failed.append(f"{v} {print_formula(goal)}")
    secs = _elapsed(t0)
    ok = len(cases) >= 20 and not failed and secs < 120
    record(7, ok, f"{len(cases) - len(failed)}/{len(cases)} sequents round-trip"
                  + (f"; fails: {', '.join(failed)}" if failed else ""), secs)
    assert ok


# 8 -------------------------------------------------------------------------

def _dne_outcome(variant):
    fm = make_flat_map([], P("~~p -> p"))
    nb = build_natural_base(fm, variant)
    goal = nb.fm.flat[P("~~p -> p")]
    found, _ = derives(nb.system, (), goal)
    by_oracle = oracle_derives(nb.system, (), goal)
    res = completeness_pipeline([], P("~~p -> p"), variant, discharge=False)
    return found, by_oracle, res.ok, res.transcript


def test_c8_dne_separation():
    t0 = time.perf_counter()
    j1, k1 = _dne_outcome("J"), _dne_outcome("K")
    j2, k2 = _dne_outcome("J"), _dne_outcome("K")
    secs = _elapsed(t0)
    ok = (j1[:3] == (False, False, False) and k1[:3] == (True, True, True)
          and j1 == j2 and k1 == k2 and secs < 60)
    record(8, ok, f"J derives flat goal: {j1[0]} (oracle {j1[1]}), "
                  f"K: {k1[0]} (oracle {k1[1]}), repeat identical: {j1 == j2 and k1 == k2}", secs)
    assert ok


# 9 -------------------------------------------------------------------------

def _scheme_instances(names, fillers, terms):
    out = []
    for name in names:
        s = AXIOMS[name]
        fvs = sorted(scheme_formula_vars(s))
        for combo in itertools.product(fillers, repeat=len(fvs)):
            for t in terms:
                out.append((name, instantiate_scheme(
                    s, Instantiation(dict(zip(fvs, combo)), {"x": "x"}, {"t": t}))))
    return list(dict.fromkeys(out))


def test_c9_soundness_spot_suite():
    t0 = time.perf_counter()
    c = const("c")
    p, q = nullary("pq")
    pc = atom("P", c)
    atoms = [p, q, pc]
    quantified = {"AllE", "ExI"}
    names = system_schemes("I")
    insts = _scheme_instances([n for n in names if n not in quantified], atoms, [c])
    insts += _scheme_instances(sorted(quantified), [P("P(x)"), p, q], [c])
    seeds = [[], [rule(q, p)], [rule(pc, ((p,), q)), rule(p, pc)]]
    failures = []
    checked = 0
    for extra in seeds:
        basis = Basis.zero_completed([AtomicSystem(extra)], atoms, [c])
        ev = Evaluator(basis)
        direct = DirectSupport([s.rules for s in basis.systems], atoms, [c])
        for name, f in insts:
            for i, s in enumerate(basis.systems):
                checked += 1
                a, b = ev.supports(i, (), f), direct.holds(s.rules, f)
                if not (a and b):
                    failures.append((name, print_formula(f), i, a, b))
    dne = _scheme_instances(["DNE"], atoms + [P("p -> q"), P("bot")], [c])
    pools = [[rule(p), rule(q), rule(pc)], [rule(p), rule(q, p), rule(pc), rule(q)],
             [rule(q), rule(pc, q), rule(p), rule(p, pc)]]
    for pool in pools:
        basis = Basis.powerset(pool, atoms, [c])
        ev = Evaluator(basis)
        direct = DirectSupport([s.rules for s in basis.systems], atoms, [c])
        for name, f in dne:
            for i, s in enumerate(basis.systems):
                checked += 1
                a, b = ev.supports(i, (), f), direct.holds(s.rules, f)
                if not (a and b):
                    failures.append((name, print_formula(f), i, a, b))
    secs = _elapsed(t0)
    ok = not failures
    detail = f"{checked - len(failures)}/{checked} (instance, base) pairs supported by both routes"
    if failures:
        detail += "; first: " + repr(failures[0])
    record(9, ok, detail, secs)
    assert ok, failures[:5]
