"""Flattening, the natural bases K and J, and translation between Hilbert
proofs and derivations in those bases.

A flat map sends every formula of the subformula set (closed, quantifiers
unfolded over the term universe) to a fresh nullary atom ``flat_k``.  Open
formulas are flattened through their eigen-instance: each variable ``x`` has
an eigen constant ``ev_x`` and an open formula is replaced by the closed
formula with its free variables swapped for their eigen constants.

The natural base is generated from the subformula set.  Axiom rules range
their formula slots over that set; modus ponens is available for every
implication whose flat exists; atom slots ``P`` range over the flats of the
subformula set plus the source atoms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .atomic import AtomicRule, AtomicSystem, BaseDerivation, Deriver, level, print_derivation, rule, validate_derivation, FIRST, ZERO
from .hilbert import (
    AXIOMS, TOP, Axiom, ElaborationError, ExInst, Gen, HilbertProof, Hyp, MP,
    ProofBuilder, Verdict, check_proof, deduction_elaborate, derive_efq,
    derive_exists_elim, derive_or_elim, finish, is_axiom_instance,
    match_scheme, print_proof, _match_term_position,
)
from .syntax import (
    AND, BOT, EXISTS, FORALL, IMP, OR, App, Atom, Bin, Bot, Formula, Quant,
    SBin, SBot, SQuant, SSubst, SVar, Scheme, Signature, Term, Var, atoms_of,
    all_vars, closed_terms, const, conj, disj, exists, formula_terms, forall,
    free_var_order, free_vars, imp, neg, predicates_of, print_formula, size,
    subformulae, substitute, subterms, universal_closure,
)

EIGEN_PREFIX = "ev_"
FLAT_PREFIX = "flat_"
VARIANTS = ("K", "J")


class SimulationError(ValueError):
    pass


class ExtractionError(ValueError):
    def __init__(self, node: str, msg: str):
        super().__init__(f"{node}: {msg}")
        self.node = node


# ---------------------------------------------------------------------------
# flat maps


def _canonical(f: Formula):
    return (size(f), print_formula(f))


class _Capture(Exception):
    pass


@dataclass(eq=False)
class FlatMap:
    gamma: tuple
    goal: Formula
    base_terms: tuple        # CT of the declared signature
    terms: tuple             # CT, then eigen constants, then other closed terms of the sources
    eigen: dict              # variable name -> eigen constant name
    xi: tuple                # subformula set in canonical order
    flat: dict               # formula -> atom
    source_atoms: tuple

    def __post_init__(self):
        self.inverse = {a: f for f, a in self.flat.items()}
        self.uneigen = {c: v for v, c in self.eigen.items()}
        self.xi_set = frozenset(self.xi)
        self.term_set = frozenset(self.terms)

    # encoding

    def bar(self, f: Formula) -> Formula:
        """Replace free variables by their eigen constants."""
        for v in free_var_order(f):
            if v not in self.eigen:
                raise SimulationError(f"variable {v} has no eigen constant")
            f = substitute(f, v, const(self.eigen[v]))
        return f

    def flat_of(self, f: Formula) -> Atom:
        g = self.bar(f) if free_vars(f) else f
        try:
            return self.flat[g]
        except KeyError:
            raise SimulationError(f"{print_formula(f)} has no flat") from None

    def has_flat(self, f: Formula) -> bool:
        try:
            g = self.bar(f) if free_vars(f) else f
        except SimulationError:
            return False
        return g in self.flat

    # decoding

    def eigens_in(self, f: Formula) -> set:
        return {t.symbol for t in formula_terms(f)
                if isinstance(t, App) and not t.args and t.symbol in self.uneigen}

    def eigen_free(self, f: Formula) -> bool:
        return not self.eigens_in(f)

    def decode(self, f: Formula) -> Formula:
        """Swap eigen constants back to their variables (raises on capture)."""
        return _decode(f, self.uneigen, frozenset())

    def decodable(self, f: Formula) -> bool:
        try:
            self.decode(f)
        except _Capture:
            return False
        return True

    def sharp_r(self, a: Atom) -> Formula:
        f = self.inverse.get(a)
        if f is None:
            return a
        return self.decode(f)

    def sharp_l(self, a: Atom) -> Formula:
        f = self.inverse.get(a)
        if f is None:
            return a
        return universal_closure(self.decode(f))

    # universes

    @property
    def p_universe(self) -> tuple:
        """Atoms the P-slots of the second-level rules range over."""
        return tuple(self.flat[f] for f in self.xi) + self.source_atoms

    def extend(self, formulas: Iterable[Formula]) -> "FlatMap":
        """A copy with flats for further closed formulas (numbered after the existing ones)."""
        new = sorted({f for f in formulas if f not in self.flat}, key=_canonical)
        flat = dict(self.flat)
        taken = {a.pred for a in self.source_atoms} | self._source_predicates()
        k = len(flat)
        for f in new:
            while f"{FLAT_PREFIX}{k}" in taken:
                k += 1
            flat[f] = Atom(f"{FLAT_PREFIX}{k}", ())
            k += 1
        return FlatMap(self.gamma, self.goal, self.base_terms, self.terms, self.eigen,
                       self.xi, flat, self.source_atoms)

    def _source_predicates(self) -> set:
        out: set = set()
        for f in self.gamma + (self.goal,):
            out |= {p for p, _ in predicates_of(f)}
        return out

    def describe(self) -> str:
        lines = [f"terms: {', '.join(_print_term(t) for t in self.terms)}",
                 "eigen: " + (", ".join(f"{v} -> {c}" for v, c in sorted(self.eigen.items())) or "(none)")]
        for f in self.xi:
            lines.append(f"{print_formula(self.flat[f])} := {print_formula(f)}")
        return "\n".join(lines)


def _print_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if not t.args:
        return t.symbol
    return f"{t.symbol}({', '.join(_print_term(a) for a in t.args)})"


def _decode_term(t: Term, inv: dict, bound: frozenset) -> Term:
    if isinstance(t, Var):
        return t
    if not t.args and t.symbol in inv:
        v = inv[t.symbol]
        if v in bound:
            raise _Capture(v)
        return Var(v)
    return App(t.symbol, tuple(_decode_term(a, inv, bound) for a in t.args))


def _decode(f: Formula, inv: dict, bound: frozenset) -> Formula:
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(_decode_term(a, inv, bound) for a in f.args))
    if isinstance(f, Bot):
        return f
    if isinstance(f, Bin):
        return Bin(f.op, _decode(f.left, inv, bound), _decode(f.right, inv, bound))
    return Quant(f.q, f.var, _decode(f.body, inv, bound | {f.var}))


def make_flat_map(gamma: Iterable[Formula], goal: Formula, sig: Optional[Signature] = None,
                  extra: Iterable[Formula] = (), with_top: bool = True) -> FlatMap:
    """Flat map for the sequent ``gamma |> goal``.

    ``extra`` adds further (possibly open) formulas to the subformula set,
    which is how proof lines are made simulable.  ``with_top`` adds the
    provable formula ``bot -> (bot -> bot)`` used by the universal clause.
    """
    gamma = tuple(universal_closure(g) for g in gamma)
    goal = universal_closure(goal)
    extra = tuple(extra)
    everything = gamma + (goal,) + extra
    if sig is None:
        sig = Signature.from_formulas(everything)
    variables: list = []
    for f in everything:
        for v in sorted(all_vars(f)):
            if v not in variables:
                variables.append(v)
    used = set(sig.constants) | {t.symbol for f in everything for t in formula_terms(f)
                                 if isinstance(t, App)}
    eigen = {}
    for v in variables:
        c = f"{EIGEN_PREFIX}{v}"
        if c in used:
            raise SimulationError(f"eigen constant {c} already occurs in the sequent")
        eigen[v] = c
    base_terms = closed_terms(sig)
    terms = list(base_terms) + [const(eigen[v]) for v in variables]
    proto = FlatMap(gamma, goal, tuple(base_terms), tuple(terms), eigen, (), {}, ())
    sources = list(gamma) + [goal] + [proto.bar(f) for f in extra]
    if with_top:
        sources.append(TOP)
    for f in sources:
        for t in formula_terms(f):
            for s in subterms(t):
                if isinstance(s, App) and s not in terms and not any(isinstance(u, Var) for u in subterms(s)):
                    terms.append(s)
    xi: dict = {}
    for f in sources:
        for g in subformulae(f, terms):
            xi[g] = None
    xi_sorted = tuple(sorted(xi, key=_canonical))
    src_atoms: dict = {}
    for f in gamma + (goal,) + tuple(sources):
        for a in sorted(atoms_of(f), key=print_formula):
            if not free_vars(a) and not any(isinstance(t, App) and t.symbol in eigen.values()
                                            for t in formula_terms(a)):
                src_atoms[a] = None
    fm = FlatMap(gamma, goal, tuple(base_terms), tuple(terms), eigen, xi_sorted, {},
                 tuple(src_atoms))
    return fm.extend(xi_sorted)


# ---------------------------------------------------------------------------
# natural bases

X, Y, Z = SVar("X"), SVar("Y"), SVar("Z")

AXIOM_RULES = {
    "K": ("K",),
    "J": ("K", "S", "AllE", "AndI", "AndE1", "AndE2", "OrI1", "OrI2", "ExI", "NegI"),
}


def axiom_schemes(variant: str, allow_and: bool = False) -> tuple:
    if variant == "K":
        out = ("K", "S", "AllE", "DNE")
        if allow_and:
            out += ("AndI", "AndE1", "AndE2")
        return out
    if variant == "J":
        return AXIOM_RULES["J"]
    raise SimulationError(f"unknown variant {variant!r}")


def rule_schemas(variant: str) -> tuple:
    if variant == "K":
        return ("MP", "GEN")
    return ("MP", "GEN", "OR-ELIM", "EFQ-RULE", "EX-ELIM")


def _scheme_nodes(s: Scheme):
    """Non-variable subschemes (each one the shape of some subformula of an instance)."""
    if isinstance(s, (SVar, SSubst)):
        return
    yield s
    if isinstance(s, SBin):
        yield from _scheme_nodes(s.left)
        yield from _scheme_nodes(s.right)
    elif isinstance(s, SQuant):
        yield from _scheme_nodes(s.body)


@dataclass
class NaturalBase:
    variant: str
    fm: FlatMap
    allow_and: bool = False
    enumerate_rules: bool = True
    info: dict = field(default_factory=dict)      # rule -> (schema, data)
    stats: dict = field(default_factory=dict)
    _system: Optional[AtomicSystem] = None

    @property
    def system(self) -> AtomicSystem:
        if self._system is None:
            raise SimulationError("this natural base was built without enumerating its rules")
        return self._system

    @property
    def hilbert_system(self) -> str:
        return "C" if self.variant == "K" else "I"

    def __contains__(self, r: AtomicRule) -> bool:
        return self.classify(r) is not None

    # -- membership by structure ------------------------------------------

    def _xi_slots_ok(self, s: Scheme, inst) -> bool:
        xi, fm = self.fm.xi_set, self.fm
        ok = True

        def go(node: Scheme, under_quant: bool):
            nonlocal ok
            if isinstance(node, SVar):
                if not under_quant and inst.formulas.get(node.name) not in xi:
                    ok = False
            elif isinstance(node, SBin):
                go(node.left, False)
                go(node.right, False)
            elif isinstance(node, SQuant):
                body = node.body
                if isinstance(body, SVar):
                    q = Quant(node.q, inst.variables[node.var], inst.formulas[body.name])
                    if q not in xi:
                        ok = False
                else:
                    go(body, False)
            elif isinstance(node, SSubst):
                t = inst.terms.get(node.term)
                if t is not None and t not in fm.term_set:
                    ok = False
        go(s, False)
        return ok

    def axiom_instance(self, f: Formula) -> Optional[tuple]:
        """(scheme, instantiation) if ``f`` is one of this base's axiom formulas."""
        if not self.fm.decodable(f):
            return None
        for name in axiom_schemes(self.variant, self.allow_and):
            inst = match_scheme(AXIOMS[name], f)
            if inst is not None and self._xi_slots_ok(AXIOMS[name], inst):
                return name, inst
        return None

    def in_domain(self, f: Formula) -> bool:
        """Whether ``f`` is a subformula of some formula the base speaks about."""
        if f in self.fm.xi_set:
            return True
        if not self.fm.decodable(f):
            return False
        for name in axiom_schemes(self.variant, self.allow_and):
            for node in _scheme_nodes(AXIOMS[name]):
                inst = match_scheme(node, f)
                if inst is not None and self._xi_slots_ok(node, inst):
                    return True
        return self._gen_formula(f) is not None

    def _gen_formula(self, f: Formula) -> Optional[tuple]:
        """Recognise a GEN premise ``xi -> phi[x:=ev_x]``; returns (xi, forall x phi)."""
        if not (isinstance(f, Bin) and f.op == IMP):
            return None
        xi = f.left
        if xi not in self.fm.xi_set:
            return None
        for q in self.fm.xi:
            if isinstance(q, Quant) and q.q == FORALL:
                ev = const(self.fm.eigen[q.var])
                if substitute(q.body, q.var, ev) == f.right and not _mentions(xi, ev):
                    return xi, q
        return None

    def classify(self, r: AtomicRule) -> Optional[tuple]:
        """(schema, data) when ``r`` is an instance of one of the variant's rules."""
        if r in self.info:
            return self.info[r]
        out = self._classify(r)
        return out

    def _classify(self, r: AtomicRule) -> Optional[tuple]:
        fm = self.fm
        dec = fm.inverse
        prem = r.premises
        if not prem:
            f = dec.get(r.conclusion)
            if f is None:
                return None
            hit = self.axiom_instance(f)
            return (hit[0], hit[1]) if hit else None
        if all(not h for h, _ in prem) and len(prem) == 2:
            a, b = dec.get(prem[0][1]), dec.get(prem[1][1])
            c = dec.get(r.conclusion)
            if (a is not None and b is not None and c is not None and b == imp(a, c)
                    and self.in_domain(b) and self.in_domain(a)):
                return ("MP", None)
        if len(prem) == 1 and not prem[0][0]:
            f, g = dec.get(prem[0][1]), dec.get(r.conclusion)
            if f is not None and g is not None:
                hit = self._gen_formula(f)
                if hit and g == imp(hit[0], hit[1]) and fm.decodable(g) and fm.decodable(f):
                    return ("GEN", hit[1].var)
            if self.variant == "J" and f == BOT and r.conclusion in fm.p_universe:
                return ("EFQ-RULE", None)
        if self.variant != "J":
            return None
        p = r.conclusion
        if p not in fm.p_universe:
            return None
        if len(prem) == 3:
            (h1, p1), (h2, p2), (h3, p3) = prem
            d = dec.get(p3)
            if (p1 == p and p2 == p and not h3 and isinstance(d, Bin) and d.op == OR
                    and d in fm.xi_set and h1 == {fm.flat.get(d.left)} and h2 == {fm.flat.get(d.right)}):
                return ("OR-ELIM", d)
        if len(prem) == 2:
            (h1, p1), (h2, p2) = prem
            e = dec.get(p1)
            if (not h1 and p2 == p and isinstance(e, Quant) and e.q == EXISTS
                    and e in fm.xi_set and len(h2) == 1):
                inst = dec.get(next(iter(h2)))
                if inst is not None:
                    for t in fm.terms:
                        if substitute(e.body, e.var, t) == inst:
                            return ("EX-ELIM", (e, t))
        return None


def _mentions(f: Formula, t: Term) -> bool:
    return any(s == t for s in formula_terms(f))


def build_natural_base(fm: FlatMap, variant: str, allow_and: bool = False,
                       enumerate_rules: bool = True) -> NaturalBase:
    """All instances of the variant's rules over the flat map's subformula set.

    With ``enumerate_rules=False`` nothing is generated; membership is then
    decided structurally by ``NaturalBase.classify``.
    """
    if variant not in VARIANTS:
        raise SimulationError(f"unknown variant {variant!r}")
    if not enumerate_rules:
        return NaturalBase(variant, fm, allow_and, False)
    xi = [f for f in fm.xi]
    terms = fm.terms
    templates: list = []       # (schema, data, conclusion, premises)
    formulas: dict = {}

    def note(f: Formula):
        stack = [f]
        while stack:
            g = stack.pop()
            if g in formulas:
                continue
            formulas[g] = None
            if isinstance(g, Bin):
                stack += [g.left, g.right]

    def axiom(name: str, f: Formula):
        if fm.decodable(f):
            note(f)
            templates.append((name, None, ("f", f), ()))

    schemes = axiom_schemes(variant, allow_and)
    pairs = list(itertools.product(xi, xi))
    if "K" in schemes:
        for a, b in pairs:
            axiom("K", imp(a, imp(b, a)))
    if "S" in schemes:
        for a, b, c in itertools.product(xi, xi, xi):
            axiom("S", imp(imp(a, imp(b, c)), imp(imp(a, b), imp(a, c))))
    if "AllE" in schemes:
        for q in xi:
            if isinstance(q, Quant) and q.q == FORALL:
                for t in terms:
                    axiom("AllE", imp(q, substitute(q.body, q.var, t)))
    if "AndI" in schemes:
        for a, b in pairs:
            axiom("AndI", imp(a, imp(b, conj(a, b))))
    if "AndE1" in schemes:
        for a, b in pairs:
            axiom("AndE1", imp(conj(a, b), a))
    if "AndE2" in schemes:
        for a, b in pairs:
            axiom("AndE2", imp(conj(a, b), b))
    if "OrI1" in schemes:
        for a, b in pairs:
            axiom("OrI1", imp(a, disj(a, b)))
    if "OrI2" in schemes:
        for a, b in pairs:
            axiom("OrI2", imp(b, disj(a, b)))
    if "ExI" in schemes:
        for q in xi:
            if isinstance(q, Quant) and q.q == EXISTS:
                for t in terms:
                    axiom("ExI", imp(substitute(q.body, q.var, t), q))
    if "NegI" in schemes:
        for a, b in pairs:
            axiom("NegI", imp(imp(a, b), imp(imp(a, neg(b)), neg(a))))
    if "DNE" in schemes:
        for a in xi:
            axiom("DNE", imp(neg(neg(a)), a))
    for q in xi:
        if isinstance(q, Quant) and q.q == FORALL:
            ev = const(fm.eigen[q.var])
            body = substitute(q.body, q.var, ev)
            for s in xi:
                if _mentions(s, ev):
                    continue
                prem, concl = imp(s, body), imp(s, q)
                if fm.decodable(prem) and fm.decodable(concl):
                    note(prem)
                    note(concl)
                    templates.append(("GEN", q.var, ("f", concl), ((None, ("f", prem)),)))
    for f in xi:
        note(f)
    for f in list(formulas):
        if isinstance(f, Bin) and f.op == IMP and f.left in formulas:
            templates.append(("MP", None, ("f", f.right), ((None, ("f", f.left)), (None, ("f", f)))))
    ext = fm.extend(formulas)
    universe = ext.p_universe
    if variant == "J":
        for d in xi:
            if isinstance(d, Bin) and d.op == OR:
                for p in universe:
                    templates.append(("OR-ELIM", d, ("a", p), (
                        (("f", d.left), ("a", p)), (("f", d.right), ("a", p)), (None, ("f", d)))))
        if BOT in ext.flat:
            for p in universe:
                templates.append(("EFQ-RULE", None, ("a", p), ((None, ("f", BOT)),)))
        for e in xi:
            if isinstance(e, Quant) and e.q == EXISTS:
                for t in terms:
                    inst = substitute(e.body, e.var, t)
                    for p in universe:
                        templates.append(("EX-ELIM", (e, t), ("a", p), (
                            (None, ("f", e)), (("f", inst), ("a", p)))))

    def res(slot):
        kind, v = slot
        return v if kind == "a" else ext.flat[v]

    rules: list = []
    info: dict = {}
    stats: dict = {}
    for schema, data, concl, prems in templates:
        ps = []
        for hyp, p in prems:
            hs = frozenset() if hyp is None else frozenset([res(hyp)])
            ps.append((hs, res(p)))
        r = AtomicRule(tuple(ps), res(concl), schema)
        if r in info:
            continue
        if not prems:
            data = match_scheme(AXIOMS[schema], concl[1])
        info[r] = (schema, data)
        rules.append(r)
        stats[schema] = stats.get(schema, 0) + 1
    nb = NaturalBase(variant, ext, allow_and, True, info, stats,
                     AtomicSystem(rules, keep_order=True))
    return nb


def check_levels(nb: NaturalBase) -> list:
    """Rules of the wrong level for the variant (K must be zero/first level)."""
    if nb.variant != "K":
        return []
    return [r for r in nb.system if level(r) not in (ZERO, FIRST)]


def check_decoder_laws(fm: FlatMap) -> list:
    """Pointwise decoder conditions over every flat and the source atoms."""
    problems = []
    for f, a in fm.flat.items():
        try:
            r, l_ = fm.sharp_r(a), fm.sharp_l(a)
        except _Capture:
            continue
        if fm.eigen_free(f):
            if not (r == f and l_ == f):
                problems.append(f"{print_formula(a)}: eigen-free formula not decoded to itself")
        else:
            if free_vars(r) != set(fm.uneigen[c] for c in fm.eigens_in(f)):
                problems.append(f"{print_formula(a)}: right decoder misses an eigen constant")
            if l_ != universal_closure(r):
                problems.append(f"{print_formula(a)}: left decoder is not the closure of the right one")
        if fm.bar(r) != f:
            problems.append(f"{print_formula(a)}: re-encoding the decoded formula does not round trip")
    for a in fm.source_atoms:
        if a not in fm.inverse and fm.sharp_l(a) != fm.sharp_r(a):
            problems.append(f"{print_formula(a)}: off-image decoders differ")
    return problems


# ---------------------------------------------------------------------------
# Hilbert proof -> base derivation


def _line_formula_for_base(fm: FlatMap, f: Formula) -> Formula:
    return fm.bar(f) if free_vars(f) else f


def simulate_hilbert(pf: HilbertProof, fm: FlatMap, nb: NaturalBase) -> BaseDerivation:
    """Translate a checking Hilbert proof into a derivation of ``flat(Gamma) |- flat(conclusion)``."""
    v = check_proof(pf)
    if not v.ok:
        k, msg = v.diagnostics[0]
        raise SimulationError(f"proof does not check (line {k}: {msg})")
    if pf.system == "C" and nb.variant == "J":
        if any(isinstance(ln.just, Axiom) and ln.just.scheme == "DNE" for ln in pf.lines):
            raise SimulationError("DNE has no counterpart in the intuitionistic natural base")
    ctx = frozenset(fm.flat_of(g) for g in pf.context)
    nodes: dict = {}
    for ln in pf.lines:
        f, j = ln.formula, ln.just
        if not fm.has_flat(f):
            raise SimulationError(f"line {ln.index}: {print_formula(f)} is outside the flat map")
        a = fm.flat_of(f)
        if isinstance(j, Hyp):
            nodes[ln.index] = BaseDerivation(ctx, a)
            continue
        if isinstance(j, Axiom):
            r = AtomicRule((), a, j.scheme)
            kids: tuple = ()
        elif isinstance(j, MP):
            minor, major = j.minor, j.major
            fmaj = _formula_at(pf, major)
            if not (isinstance(fmaj, Bin) and fmaj.op == IMP and fmaj.left == _formula_at(pf, minor)):
                minor, major = major, minor
            r = AtomicRule(((frozenset(), fm.flat_of(_formula_at(pf, minor))),
                            (frozenset(), fm.flat_of(_formula_at(pf, major)))), a, "MP")
            kids = (nodes[minor], nodes[major])
        elif isinstance(j, Gen):
            prem = _formula_at(pf, j.line)
            r = AtomicRule(((frozenset(), fm.flat_of(prem)),), a, "GEN")
            kids = (nodes[j.line],)
        else:
            raise SimulationError(f"line {ln.index}: existential instantiation has no simulation rule")
        hit = nb.classify(r)
        if hit is None:
            what = j.scheme if isinstance(j, Axiom) else type(j).__name__
            raise SimulationError(f"line {ln.index}: no {what} rule of the {nb.variant} base yields "
                                  f"{print_formula(f)}")
        nodes[ln.index] = BaseDerivation(ctx, a, r, kids)
    return nodes[pf.lines[-1].index]


def _formula_at(pf: HilbertProof, index: int) -> Formula:
    for ln in pf.lines:
        if ln.index == index:
            return ln.formula
    raise KeyError(index)


class _MembershipView:
    """Lets validate_derivation check rules against a structurally defined base."""

    def __init__(self, nb: NaturalBase):
        self.nb = nb

    def __contains__(self, r) -> bool:
        return r in self.nb


def validate_in_base(d: BaseDerivation, nb: NaturalBase) -> list:
    target = nb._system if nb._system is not None else _MembershipView(nb)
    return validate_derivation(d, target)


def prepare_simulation(pf: HilbertProof, variant: str, sig: Optional[Signature] = None,
                       allow_and: bool = False) -> tuple:
    """Flat map and (structural) natural base large enough to simulate ``pf``."""
    fm = make_flat_map(pf.context, pf.conclusion, sig,
                       extra=[ln.formula for ln in pf.lines])
    return fm, build_natural_base(fm, variant, allow_and, enumerate_rules=False)


# ---------------------------------------------------------------------------
# base derivation -> Hilbert proof


def extract_hilbert(d: BaseDerivation, nb: NaturalBase) -> HilbertProof:
    """Decode a derivation in the natural base into a Hilbert proof.

    The proof lives in C for the K base and in I for the J base; its context
    is the left decoding of the root context and its conclusion the right
    decoding of the root atom.
    """
    return _Extractor(nb).run(d, "root")


class _Extractor:
    def __init__(self, nb: NaturalBase):
        self.nb = nb
        self.fm = nb.fm
        self.system = nb.hilbert_system

    def context(self, atoms: Iterable[Atom], path: str) -> list:
        out = []
        for a in sorted(atoms, key=print_formula):
            out.append(self.left(a, path))
        return list(dict.fromkeys(out))

    def left(self, a: Atom, path: str) -> Formula:
        try:
            return self.fm.sharp_l(a)
        except _Capture:
            raise ExtractionError(path, f"{print_formula(a)} cannot be decoded") from None

    def right(self, a: Atom, path: str) -> Formula:
        try:
            return self.fm.sharp_r(a)
        except _Capture:
            raise ExtractionError(path, f"{print_formula(a)} cannot be decoded") from None

    def run(self, d: BaseDerivation, path: str) -> HilbertProof:
        ctx = self.context(d.context, path)
        goal = self.right(d.atom, path)
        if d.rule is None:
            b = ProofBuilder(self.system, ctx)
            k = b.hyp(self.left(d.atom, path))
            while b.formula(k) != goal:
                q = b.formula(k)
                if not (isinstance(q, Quant) and q.q == FORALL):
                    raise ExtractionError(path, "hypothesis does not specialise to the decoded atom")
                k = b.mp(k, b.axiom("AllE", imp(q, q.body)))
            return finish(b, k)
        hit = self.nb.classify(d.rule)
        if hit is None:
            raise ExtractionError(path, f"rule {d.rule} is not in the {self.nb.variant} base")
        schema, data = hit
        kids = [self.run(c, f"{path}.{i}") for i, c in enumerate(d.children)]
        try:
            return self._app(schema, data, d, ctx, goal, kids, path)
        except ElaborationError as e:
            raise ExtractionError(path, str(e)) from None

    def _app(self, schema, data, d, ctx, goal, kids, path) -> HilbertProof:
        b = ProofBuilder(self.system, ctx)
        if not d.rule.premises:
            hit = is_axiom_instance(goal, self.system)
            if hit is None:
                raise ExtractionError(path, f"{print_formula(goal)} is not an axiom of {self.system}")
            return finish(b, b.add(goal, Axiom(hit[0], hit[1])))
        if schema == "MP":
            k0, k1 = b.include(kids[0]), b.include(kids[1])
            return finish(b, b.mp(k0, k1))
        if schema == "GEN":
            k = b.include(kids[0])
            return finish(b, b.gen(k, goal.right.var))
        if schema == "EFQ-RULE":
            return derive_efq(kids[0], goal)
        if schema == "OR-ELIM":
            pf1, pf2, pf0 = kids
            dj = pf0.conclusion
            la = self.left(self.fm.flat[data.left], path)
            lb = self.left(self.fm.flat[data.right], path)
            if la != dj.left or lb != dj.right:
                raise ExtractionError(path, "disjunct mentions an eigen constant; "
                                            "its hypothesis decodes to a closure")
            return derive_or_elim(pf0, pf1, pf2)
        if schema == "EX-ELIM":
            e, t = data
            pf0, pf1 = kids
            if not self.fm.eigen_free(substitute(e.body, e.var, t)):
                raise ExtractionError(path, f"witness {_print_term(t)} gives an instance that "
                                            "mentions an eigen constant")
            return derive_exists_elim(pf0, pf1, t)
        raise ExtractionError(path, f"unknown schema {schema}")


# ---------------------------------------------------------------------------
# search and the end-to-end pipeline


@dataclass
class SearchResult:
    derivation: Optional[BaseDerivation]
    proof: Optional[HilbertProof]
    banned: list
    error: Optional[str] = None


def search_and_extract(nb: NaturalBase, ctx: Iterable[Atom], goal: Atom,
                       max_retries: int = 40) -> SearchResult:
    """Find a derivation and extract it, banning rule instances whose extraction fails."""
    ctx = frozenset(ctx)
    system = nb.system
    banned: list = []
    for _ in range(max_retries + 1):
        w = Deriver(system).witness(ctx, goal)
        if w is None:
            return SearchResult(None, None, banned,
                                "no derivation" + (" after excluding rules" if banned else ""))
        try:
            pf = extract_hilbert(w, nb)
            return SearchResult(w, pf, banned)
        except ExtractionError as e:
            node = _node_at(w, e.node)
            if node is None or node.rule is None:
                return SearchResult(w, None, banned, str(e))
            banned.append((node.rule, str(e)))
            system = AtomicSystem([r for r in system.ordered if r != node.rule], keep_order=True)
    return SearchResult(None, None, banned, "retry budget exhausted")


def _node_at(d: BaseDerivation, path: str) -> Optional[BaseDerivation]:
    parts = path.split(".")[1:]
    node = d
    for p in parts:
        i = int(p)
        if i >= len(node.children):
            return None
        node = node.children[i]
    return node


IMPLICATIONAL = frozenset({IMP, FORALL})


def in_fragment(f: Formula, allow_and: bool = False) -> bool:
    """Only bot, ->, forall (and & when allowed)."""
    if isinstance(f, (Atom, Bot)):
        return True
    if isinstance(f, Bin):
        if f.op == IMP or (allow_and and f.op == AND):
            return in_fragment(f.left, allow_and) and in_fragment(f.right, allow_and)
        return False
    return f.q == FORALL and in_fragment(f.body, allow_and)


def to_implicational(f: Formula) -> Formula:
    """Classical rewrite into bot, ->, forall (a plumbing helper, not a proof step)."""
    if isinstance(f, (Atom, Bot)):
        return f
    if isinstance(f, Bin):
        a, b = to_implicational(f.left), to_implicational(f.right)
        if f.op == IMP:
            return imp(a, b)
        if f.op == AND:
            return neg(imp(a, neg(b)))
        return imp(neg(a), b)
    body = to_implicational(f.body)
    if f.q == FORALL:
        return forall(f.var, body)
    return neg(forall(f.var, neg(body)))


@dataclass
class PipelineResult:
    gamma: tuple
    goal: Formula
    variant: str
    route: str
    derivation: Optional[BaseDerivation]
    proof: Optional[HilbertProof]
    verdict: Optional[Verdict]
    transcript: str
    ok: bool
    fm: Optional[FlatMap] = None
    nb: Optional[NaturalBase] = None


def completeness_pipeline(gamma: Sequence[Formula], goal: Formula, variant: str,
                          source: Optional[HilbertProof] = None,
                          sig: Optional[Signature] = None, allow_and: bool = False,
                          discharge: bool = True) -> PipelineResult:
    """Flatten, obtain a base derivation (by simulation or search), extract, re-check.

    Without a source proof the base is searched exhaustively.  If the flat
    goal is not derivable and the goal is an implication, its antecedent is
    moved into the context and the extracted proof is discharged again with
    the deduction theorem (``discharge``).
    """
    if variant not in VARIANTS:
        raise SimulationError(f"unknown variant {variant!r}")
    gamma = tuple(universal_closure(g) for g in gamma)
    goal = universal_closure(goal)
    if variant == "K":
        for f in gamma + (goal,):
            if not in_fragment(f, allow_and):
                raise SimulationError(f"{print_formula(f)} is outside the fragment handled by the K base")
    out: list = []
    if source is not None:
        fm, nb = prepare_simulation(source, variant, sig, allow_and)
        d = simulate_hilbert(source, fm, nb)
        problems = validate_in_base(d, nb)
        if problems:
            raise SimulationError(f"simulated derivation does not validate: {problems[0]}")
        pf = extract_hilbert(d, nb)
        route = "simulate"
        out.append(_section("FLATMAP", fm.describe()))
        out.append(_section("BASE", f"variant {variant} (membership checked per rule)\n"
                            + _rule_counts(d, nb)))
        out.append(_section("DERIVATION", print_derivation(d).rstrip()))
        return _finish(gamma, goal, variant, route, d, pf, out, fm, nb)
    moved: list = []
    g, ctx = goal, list(gamma)
    while True:
        fm = make_flat_map(ctx, g, sig)
        nb = build_natural_base(fm, variant, allow_and)
        res = search_and_extract(nb, [nb.fm.flat[c] for c in ctx], nb.fm.flat[g])
        out.append(_section("FLATMAP", nb.fm.describe() if not moved else
                            f"(after moving {len(moved)} antecedent(s) into the context)\n"
                            + fm.describe()))
        out.append(_section("BASE", f"variant {variant}, {len(nb.system)} rules\n"
                            + "\n".join(f"{k}: {v}" for k, v in nb.stats.items())))
        for r, why in res.banned:
            out.append(f"excluded {r.label or 'rule'} instance {r}: {why}")
        if res.proof is not None:
            break
        if not (discharge and isinstance(g, Bin) and g.op == IMP):
            out.append(_section("DERIVATION", f"none found ({res.error})"))
            out.append(_section("VERDICT", "FAIL (search exhausted)"))
            return PipelineResult(gamma, goal, variant, "search", None, None, None,
                                  "\n".join(out), False, fm, nb)
        moved.append(g.left)
        ctx.append(g.left)
        g = g.right
    pf = res.proof
    out.append(_section("DERIVATION", print_derivation(res.derivation).rstrip()))
    for a in reversed(moved):
        pf = deduction_elaborate(pf, a)
    route = "search" if not moved else f"search+discharge({len(moved)})"
    return _finish(gamma, goal, variant, route, res.derivation, pf, out, fm, nb)


def _rule_counts(d: BaseDerivation, nb: NaturalBase) -> str:
    counts: dict = {}
    for n in d.nodes():
        if n.rule is not None:
            s = nb.classify(n.rule)[0]
            counts[s] = counts.get(s, 0) + 1
    return "\n".join(f"{k}: {v}" for k, v in counts.items()) or "(ref only)"


def _section(name: str, body: str) -> str:
    return f"== {name} ==\n{body}"


def _finish(gamma, goal, variant, route, d, pf, out, fm, nb) -> PipelineResult:
    verdict = check_proof(pf)
    same = pf.conclusion == goal and set(pf.context) <= set(gamma)
    out.append(_section("EXTRACTED-PROOF", print_proof(pf).rstrip()))
    status = "PASS" if verdict.ok and same else "FAIL"
    detail = [f"route: {route}", f"system: {pf.system}", f"checks: {verdict.ok}",
              f"proves source sequent: {same}"]
    for k, msg in verdict.diagnostics:
        detail.append(f"line {k}: {msg}")
    out.append(_section("VERDICT", status + "\n" + "\n".join(detail)))
    return PipelineResult(gamma, goal, variant, route, d, pf, verdict, "\n".join(out),
                          verdict.ok and same, fm, nb)


# ---------------------------------------------------------------------------
# desk-scale checks of the flattening clauses


@dataclass
class ClauseCheck:
    clause: str
    formula: Formula
    lhs: bool
    rhs: bool

    @property
    def ok(self) -> bool:
        return self.lhs == self.rhs


def clause_instances(nb: NaturalBase) -> list:
    """Eigen-free members of the subformula set that the and/imp/forall clauses talk about."""
    out = []
    fm = nb.fm
    for f in fm.xi:
        if not fm.eigen_free(f):
            continue
        if isinstance(f, Bin) and f.op == AND and (nb.variant == "J" or nb.allow_and):
            out.append(("ii", f))
        elif isinstance(f, Bin) and f.op == IMP:
            out.append(("iv", f))
        elif isinstance(f, Quant) and f.q == FORALL:
            out.append(("v", f))
    return out


def check_flat_clauses(nb: NaturalBase, extension: Iterable[AtomicRule] = (),
                       which: Iterable = None) -> list:
    """Both sides of the and/imp/forall flattening clauses, by atomic derivability."""
    system = nb.system if not extension else AtomicSystem(list(nb.system.ordered) + list(extension),
                                                          keep_order=True)
    der = Deriver(system)
    fm = nb.fm
    empty: frozenset = frozenset()
    out = []
    for clause, f in (which if which is not None else clause_instances(nb)):
        lhs = der.derives(empty, fm.flat[f])
        if clause == "ii":
            rhs = der.derives(empty, fm.flat[f.left]) and der.derives(empty, fm.flat[f.right])
        elif clause == "iv":
            rhs = der.derives({fm.flat[f.left]}, fm.flat[f.right])
        else:
            rhs = all(der.derives(empty, fm.flat[substitute(f.body, f.var, t)]) for t in fm.terms)
        out.append(ClauseCheck(clause, f, lhs, rhs))
    return out
