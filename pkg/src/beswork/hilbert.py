"""Hilbert-Frege consequence for classical (C) and intuitionistic (I) logic.

Proofs are explicit line lists.  Each line carries a justification that the
checker re-verifies; the elaborators build new proofs out of checked ones
(deduction theorem, or-elimination, ex falso, exists-elimination).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .syntax import (
    AND, BOT, EXISTS, FORALL, IMP, OR, App, Atom, Bin, Bot, Formula,
    Instantiation, ParseError, Quant, SBin, SBot, SQuant, SSubst, SVar,
    Scheme, Signature, SubstitutionError, Term, Var, all_vars, conj,
    formula_terms, free_vars, imp, instantiate_scheme, is_closed_term,
    parse_formula, parse_term, print_formula, replace_term, substitute_term,
    term_replace, term_vars,
)

# ---------------------------------------------------------------------------
# axiom schemes

X, Y, Z = SVar("X"), SVar("Y"), SVar("Z")


def _i(a, b):
    return SBin(IMP, a, b)


def _n(a):
    return SBin(IMP, a, SBot())


AXIOMS: dict[str, Scheme] = {
    "K": _i(X, _i(Y, X)),
    "S": _i(_i(X, _i(Y, Z)), _i(_i(X, Y), _i(X, Z))),
    "AllE": _i(SQuant(FORALL, "x", X), SSubst(X, "x", "t")),
    "AndI": _i(X, _i(Y, SBin(AND, X, Y))),
    "AndE1": _i(SBin(AND, X, Y), X),
    "AndE2": _i(SBin(AND, X, Y), Y),
    "OrI1": _i(X, SBin(OR, X, Y)),
    "OrI2": _i(Y, SBin(OR, X, Y)),
    "OrE": _i(_i(X, Z), _i(_i(Y, Z), _i(SBin(OR, X, Y), Z))),
    "ExI": _i(SSubst(X, "x", "t"), SQuant(EXISTS, "x", X)),
    "NegI": _i(_i(X, Y), _i(_i(X, _n(Y)), _n(X))),
    "EFQ": _i(_n(X), _i(X, Y)),
    "DNE": _i(_n(_n(X)), X),
}

SYSTEMS = ("C", "I")


def system_schemes(system: str) -> tuple:
    if system == "C":
        return tuple(AXIOMS)
    if system == "I":
        return tuple(k for k in AXIOMS if k != "DNE")
    raise ValueError(f"unknown system {system!r}")


def _match_term_position(body: Formula, x: str, target: Formula) -> Optional[dict]:
    """Walk ``body`` and ``target`` together; collect what replaced free ``x``.

    Returns {'t': term} (or {} if ``x`` has no free occurrence), or None if
    ``target`` is not of the form body[x -> t].
    """
    found: dict = {}

    def terms(a: Term, b: Term, bound: frozenset) -> bool:
        if isinstance(a, Var) and a.name == x and x not in bound:
            if "t" in found:
                return found["t"] == b
            found["t"] = b
            return True
        if isinstance(a, Var) or isinstance(b, Var):
            return a == b
        return (a.symbol == b.symbol and len(a.args) == len(b.args)
                and all(terms(p, q, bound) for p, q in zip(a.args, b.args)))

    def go(f: Formula, g: Formula, bound: frozenset) -> bool:
        if type(f) is not type(g):
            return False
        if isinstance(f, Atom):
            return (f.pred == g.pred and len(f.args) == len(g.args)
                    and all(terms(p, q, bound) for p, q in zip(f.args, g.args)))
        if isinstance(f, Bot):
            return True
        if isinstance(f, Bin):
            return f.op == g.op and go(f.left, g.left, bound) and go(f.right, g.right, bound)
        return f.q == g.q and f.var == g.var and go(f.body, g.body, bound | {f.var})

    if not go(body, target, frozenset()):
        return None
    return found


def match_scheme(s: Scheme, phi: Formula) -> Optional[Instantiation]:
    """Find an instantiation with instantiate_scheme(s, inst) == phi."""
    fvars: dict = {}
    vvars: dict = {}
    pending: list = []

    def go(s: Scheme, f: Formula) -> bool:
        if isinstance(s, SVar):
            if s.name in fvars:
                return fvars[s.name] == f
            fvars[s.name] = f
            return True
        if isinstance(s, SBot):
            return isinstance(f, Bot)
        if isinstance(s, SBin):
            return isinstance(f, Bin) and f.op == s.op and go(s.left, f.left) and go(s.right, f.right)
        if isinstance(s, SQuant):
            if not (isinstance(f, Quant) and f.q == s.q):
                return False
            if s.var in vvars and vvars[s.var] != f.var:
                return False
            vvars[s.var] = f.var
            return go(s.body, f.body)
        pending.append((s, f))
        return True

    if not go(s, phi):
        return None
    terms: dict = {}
    for node, target in pending:
        if not isinstance(node.scheme, SVar) or node.scheme.name not in fvars or node.var not in vvars:
            return None
        body, x = fvars[node.scheme.name], vvars[node.var]
        found = _match_term_position(body, x, target)
        if found is None:
            return None
        if "t" in found:
            if node.term in terms and terms[node.term] != found["t"]:
                return None
            terms[node.term] = found["t"]
    inst = Instantiation(fvars, vvars, terms)
    try:
        if instantiate_scheme(s, inst) != phi:
            return None
    except SubstitutionError:
        return None
    return inst


def is_axiom_instance(phi: Formula, system: str) -> Optional[tuple]:
    """Return (scheme id, instantiation) for the first matching scheme, else None."""
    for name in system_schemes(system):
        inst = match_scheme(AXIOMS[name], phi)
        if inst is not None:
            return name, inst
    return None


# ---------------------------------------------------------------------------
# proof objects


@dataclass(frozen=True)
class Axiom:
    scheme: str
    inst: Optional[Instantiation] = None


@dataclass(frozen=True)
class Hyp:
    pass


@dataclass(frozen=True)
class MP:
    minor: int   # line proving phi
    major: int   # line proving phi -> psi


@dataclass(frozen=True)
class Gen:
    line: int
    var: str


@dataclass(frozen=True)
class ExInst:
    line: int
    var: str


Justification = Union[Axiom, Hyp, MP, Gen, ExInst]


@dataclass(frozen=True)
class Line:
    index: int
    formula: Formula
    just: Justification


@dataclass(frozen=True)
class HilbertProof:
    system: str
    context: tuple
    lines: tuple

    @property
    def conclusion(self) -> Formula:
        return self.lines[-1].formula

    def __len__(self) -> int:
        return len(self.lines)


@dataclass
class Verdict:
    ok: bool
    diagnostics: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _diag(index: int, msg: str) -> tuple:
    return (index, msg)


def check_proof(pf: HilbertProof, system: Optional[str] = None) -> Verdict:
    """Check every line against its justification; collect line diagnostics."""
    system = system or pf.system
    if system not in SYSTEMS:
        return Verdict(False, [_diag(0, f"unknown system {system!r}")])
    diags: list = []
    if not pf.lines:
        return Verdict(False, [_diag(0, "proof has no lines")])
    context = set(pf.context)
    allowed = set(system_schemes(system))
    seen: dict = {}
    last = 0
    for ln in pf.lines:
        k, f, j = ln.index, ln.formula, ln.just
        if k <= last:
            diags.append(_diag(k, f"line index {k} does not increase"))
        last = max(last, k)

        def ref(i: int) -> Optional[Formula]:
            if i not in seen:
                diags.append(_diag(k, f"reference to line {i}, which is not an earlier line"))
                return None
            return seen[i]

        if isinstance(j, Hyp):
            if f not in context:
                diags.append(_diag(k, "hypothesis not in context"))
        elif isinstance(j, Axiom):
            if j.scheme not in AXIOMS:
                diags.append(_diag(k, f"unknown axiom scheme {j.scheme}"))
            elif j.scheme not in allowed:
                diags.append(_diag(k, f"axiom {j.scheme} is not available in system {system}"))
            elif j.inst is not None:
                try:
                    got = instantiate_scheme(AXIOMS[j.scheme], j.inst)
                except (KeyError, SubstitutionError) as e:
                    diags.append(_diag(k, f"bad instantiation of {j.scheme}: {e}"))
                else:
                    if got != f:
                        diags.append(_diag(k, f"instantiation of {j.scheme} gives "
                                              f"{print_formula(got)}, not the line formula"))
            elif match_scheme(AXIOMS[j.scheme], f) is None:
                diags.append(_diag(k, f"formula is not an instance of {j.scheme}"))
        elif isinstance(j, MP):
            a, b = ref(j.minor), ref(j.major)
            if a is not None and b is not None:
                ok = (isinstance(b, Bin) and b.op == IMP and b.left == a and b.right == f) or \
                     (isinstance(a, Bin) and a.op == IMP and a.left == b and a.right == f)
                if not ok:
                    diags.append(_diag(k, f"modus ponens operands {j.minor},{j.major} "
                                          "do not form phi, phi -> (line formula)"))
        elif isinstance(j, Gen):
            p = ref(j.line)
            if p is not None:
                if not (isinstance(p, Bin) and p.op == IMP):
                    diags.append(_diag(k, "generalization premise is not an implication"))
                elif f != Bin(IMP, p.left, Quant(FORALL, j.var, p.right)):
                    diags.append(_diag(k, "generalization conclusion must be "
                                          "psi -> forall x phi for premise psi -> phi"))
                elif j.var in free_vars(p.left):
                    diags.append(_diag(k, f"{j.var} free in antecedent"))
        elif isinstance(j, ExInst):
            p = ref(j.line)
            if p is not None:
                if not (isinstance(p, Bin) and p.op == IMP):
                    diags.append(_diag(k, "existential instantiation premise is not an implication"))
                elif f != Bin(IMP, Quant(EXISTS, j.var, p.left), p.right):
                    diags.append(_diag(k, "existential instantiation conclusion must be "
                                          "exists x phi -> psi for premise phi -> psi"))
                elif j.var in free_vars(p.right):
                    diags.append(_diag(k, f"{j.var} free in consequent"))
        else:
            diags.append(_diag(k, f"unknown justification {j!r}"))
        seen[k] = f
    return Verdict(not diags, diags)


class ElaborationError(ValueError):
    pass


class ProofBuilder:
    """Accumulates lines, reusing any earlier line that proves the same formula."""

    def __init__(self, system: str, context: Iterable[Formula]):
        self.system = system
        self.context = tuple(dict.fromkeys(context))
        self.lines: list = []
        self.by_formula: dict = {}

    def add(self, f: Formula, just: Justification) -> int:
        if f in self.by_formula:
            return self.by_formula[f]
        k = len(self.lines) + 1
        self.lines.append(Line(k, f, just))
        self.by_formula[f] = k
        return k

    def hyp(self, f: Formula) -> int:
        if f not in self.context:
            raise ElaborationError(f"{print_formula(f)} is not a hypothesis")
        return self.add(f, Hyp())

    def axiom(self, scheme: str, f: Formula) -> int:
        inst = match_scheme(AXIOMS[scheme], f)
        if inst is None:
            raise ElaborationError(f"{print_formula(f)} is not an instance of {scheme}")
        return self.add(f, Axiom(scheme, inst))

    def mp(self, i: int, j: int) -> int:
        a, b = self.formula(i), self.formula(j)
        if not (isinstance(b, Bin) and b.op == IMP and b.left == a):
            raise ElaborationError("modus ponens operands do not fit")
        return self.add(b.right, MP(i, j))

    def gen(self, i: int, x: str) -> int:
        p = self.formula(i)
        return self.add(Bin(IMP, p.left, Quant(FORALL, x, p.right)), Gen(i, x))

    def exinst(self, i: int, x: str) -> int:
        p = self.formula(i)
        return self.add(Bin(IMP, Quant(EXISTS, x, p.left), p.right), ExInst(i, x))

    def formula(self, i: int) -> Formula:
        return self.lines[i - 1].formula

    def include(self, pf: HilbertProof) -> int:
        """Copy the lines of ``pf``; returns the index of its conclusion."""
        remap: dict = {}
        for ln in pf.lines:
            j = ln.just
            if ln.formula in self.by_formula:
                remap[ln.index] = self.by_formula[ln.formula]
                continue
            if isinstance(j, Hyp):
                remap[ln.index] = self.hyp(ln.formula)
                continue
            if isinstance(j, MP):
                j = MP(remap[j.minor], remap[j.major])
            elif isinstance(j, Gen):
                j = Gen(remap[j.line], j.var)
            elif isinstance(j, ExInst):
                j = ExInst(remap[j.line], j.var)
            remap[ln.index] = self.add(ln.formula, j)
        return remap[pf.lines[-1].index]

    def build(self, goal: Optional[int] = None) -> HilbertProof:
        if goal is None:
            goal = len(self.lines)
        return finish(self, goal)


def _prune(pf: HilbertProof, goal: int) -> HilbertProof:
    """Keep only the lines the goal line depends on, renumbered, goal last."""
    by_index = {ln.index: ln for ln in pf.lines}
    need: set = set()
    stack = [goal]
    while stack:
        k = stack.pop()
        if k in need:
            continue
        need.add(k)
        j = by_index[k].just
        if isinstance(j, MP):
            stack += [j.minor, j.major]
        elif isinstance(j, (Gen, ExInst)):
            stack.append(j.line)
    order = sorted(need)
    renum = {k: i + 1 for i, k in enumerate(order)}
    out = []
    for k in order:
        ln = by_index[k]
        j = ln.just
        if isinstance(j, MP):
            j = MP(renum[j.minor], renum[j.major])
        elif isinstance(j, Gen):
            j = Gen(renum[j.line], j.var)
        elif isinstance(j, ExInst):
            j = ExInst(renum[j.line], j.var)
        out.append(Line(renum[k], ln.formula, j))
    return HilbertProof(pf.system, pf.context, tuple(out))


def finish(b: ProofBuilder, goal: int) -> HilbertProof:
    return _prune(HilbertProof(b.system, b.context, tuple(b.lines)), goal)


def _require_checks(pf: HilbertProof, what: str) -> None:
    v = check_proof(pf)
    if not v.ok:
        k, msg = v.diagnostics[0]
        raise ElaborationError(f"{what} does not check (line {k}: {msg})")


# ---------------------------------------------------------------------------
# small lemmas (no generalization lines, so they discharge freely)


def identity_lines(b: ProofBuilder, a: Formula) -> int:
    """``a -> a`` from S and K."""
    aa = imp(a, a)
    k1 = b.axiom("K", imp(a, imp(aa, a)))
    s = b.axiom("S", imp(imp(a, imp(aa, a)), imp(imp(a, aa), aa)))
    k3 = b.mp(k1, s)
    k4 = b.axiom("K", imp(a, aa))
    return b.mp(k4, k3)


def prove_identity(a: Formula, system: str = "I", context: Iterable[Formula] = ()) -> HilbertProof:
    b = ProofBuilder(system, context)
    return finish(b, identity_lines(b, a))


def _weaken(b: ProofBuilder, k: int, a: Formula) -> int:
    """From line k proving c, derive a -> c."""
    c = b.formula(k)
    return b.mp(k, b.axiom("K", imp(c, imp(a, c))))


def _chain(b: ProofBuilder, ka: int, kab: int, a: Formula) -> int:
    """From a -> c and a -> (c -> d), derive a -> d via S."""
    ac = b.formula(ka)
    acd = b.formula(kab)
    d = acd.right.right
    s = b.axiom("S", imp(acd, imp(ac, imp(a, d))))
    return b.mp(ka, b.mp(kab, s))


def deduction_elaborate(pf: HilbertProof, phi: Formula) -> HilbertProof:
    """Turn a proof of ``phi, Gamma |- psi`` into one of ``Gamma |- phi -> psi``."""
    _require_checks(pf, "input proof")
    rest = [g for g in pf.context if g != phi]
    b = ProofBuilder(pf.system, rest)
    out: dict = {}   # source line -> builder line proving phi -> formula
    src: dict = {}   # source line -> builder line proving formula (when phi-free)
    for ln in pf.lines:
        f, j = ln.formula, ln.just
        if isinstance(j, Hyp) and f == phi:
            out[ln.index] = identity_lines(b, phi)
        elif isinstance(j, Hyp):
            src[ln.index] = b.hyp(f)
            out[ln.index] = _weaken(b, src[ln.index], phi)
        elif isinstance(j, Axiom):
            src[ln.index] = b.add(f, j)
            out[ln.index] = _weaken(b, src[ln.index], phi)
        elif isinstance(j, MP):
            minor = pf.lines[_pos(pf, j.minor)].formula
            major = pf.lines[_pos(pf, j.major)].formula
            mi, ma = j.minor, j.major
            if not (isinstance(major, Bin) and major.left == minor):
                mi, ma = ma, mi
            out[ln.index] = _chain(b, out[mi], out[ma], phi)
        elif isinstance(j, Gen):
            if j.var in free_vars(phi):
                raise ElaborationError(
                    f"line {ln.index}: cannot discharge {print_formula(phi)} over a "
                    f"generalization on {j.var}, which is free in it")
            out[ln.index] = _gen_under(b, out[j.line], phi, j.var)
        elif isinstance(j, ExInst):
            if j.var in free_vars(phi):
                raise ElaborationError(
                    f"line {ln.index}: cannot discharge {print_formula(phi)} over an "
                    f"existential instantiation on {j.var}, which is free in it")
            out[ln.index] = _exinst_under(b, out[j.line], phi, j.var)
    return finish(b, out[pf.lines[-1].index])


def _pos(pf: HilbertProof, index: int) -> int:
    for i, ln in enumerate(pf.lines):
        if ln.index == index:
            return i
    raise KeyError(index)


def _discharge_all(system: str, hyps: Sequence[Formula], body) -> HilbertProof:
    """Build a proof from ``hyps`` with ``body(builder)`` then discharge them right to left."""
    b = ProofBuilder(system, hyps)
    pf = finish(b, body(b))
    for h in reversed(hyps):
        pf = deduction_elaborate(pf, h)
    return pf


def _gen_under(b: ProofBuilder, k: int, a: Formula, x: str) -> int:
    """From a -> (psi -> th) derive a -> (psi -> forall x th); x not free in a, psi."""
    f = b.formula(k)
    psi, th = f.right.left, f.right.right
    ap = conj(a, psi)

    def export(bb: ProofBuilder) -> int:
        h = bb.hyp(f)
        c = bb.hyp(ap)
        ka = bb.mp(c, bb.axiom("AndE1", imp(ap, a)))
        kp = bb.mp(c, bb.axiom("AndE2", imp(ap, psi)))
        return bb.mp(kp, bb.mp(ka, h))

    lemma1 = _discharge_all(b.system, [f, ap], export)
    k1 = b.mp(k, b.include(lemma1))                  # (a & psi) -> th
    k2 = b.gen(k1, x)                                 # (a & psi) -> forall x th
    g = b.formula(k2)

    def imprt(bb: ProofBuilder) -> int:
        h = bb.hyp(g)
        ka = bb.hyp(a)
        kp = bb.hyp(psi)
        c = bb.mp(kp, bb.mp(ka, bb.axiom("AndI", imp(a, imp(psi, ap)))))
        return bb.mp(c, h)

    lemma2 = _discharge_all(b.system, [g, a, psi], imprt)
    return b.mp(k2, b.include(lemma2))


def _permute(b: ProofBuilder, k: int) -> int:
    """From p -> (q -> r) derive q -> (p -> r)."""
    f = b.formula(k)
    p, q, r = f.left, f.right.left, f.right.right

    def body(bb: ProofBuilder) -> int:
        h = bb.hyp(f)
        kq = bb.hyp(q)
        kp = bb.hyp(p)
        return bb.mp(kq, bb.mp(kp, h))

    lemma = _discharge_all(b.system, [f, q, p], body)
    return b.mp(k, b.include(lemma))


def _exinst_under(b: ProofBuilder, k: int, a: Formula, x: str) -> int:
    """From a -> (th -> psi) derive a -> (exists x th -> psi)."""
    k1 = _permute(b, k)          # th -> (a -> psi)
    k2 = b.exinst(k1, x)         # exists x th -> (a -> psi)
    return _permute(b, k2)


# ---------------------------------------------------------------------------
# derived rules


def _same_system(*pfs: HilbertProof) -> str:
    systems = {p.system for p in pfs}
    if len(systems) != 1:
        raise ElaborationError(f"input proofs come from different systems: {sorted(systems)}")
    return systems.pop()


def _rebase(pf: HilbertProof, context: Sequence[Formula]) -> HilbertProof:
    return HilbertProof(pf.system, tuple(dict.fromkeys(context)), pf.lines)


def derive_or_elim(pf0: HilbertProof, pf1: HilbertProof, pf2: HilbertProof) -> HilbertProof:
    """From G |- a | b, a,G |- c and b,G |- c build G |- c."""
    system = _same_system(pf0, pf1, pf2)
    for p, name in ((pf0, "first"), (pf1, "second"), (pf2, "third")):
        _require_checks(p, f"{name} proof")
    d = pf0.conclusion
    if not (isinstance(d, Bin) and d.op == OR):
        raise ElaborationError("first proof must conclude a disjunction")
    a, bb_, c = d.left, d.right, pf1.conclusion
    if pf2.conclusion != c:
        raise ElaborationError("the two case proofs conclude different formulas")
    gamma = list(pf0.context)
    for p, h in ((pf1, a), (pf2, bb_)):
        if h not in p.context:
            raise ElaborationError(f"case proof context lacks {print_formula(h)}")
    d1 = deduction_elaborate(_rebase(pf1, [a] + gamma + list(pf1.context)), a)
    d2 = deduction_elaborate(_rebase(pf2, [bb_] + gamma + list(pf2.context)), bb_)
    ctx = gamma + [g for g in d1.context + d2.context if g not in gamma]
    b = ProofBuilder(system, ctx)
    k0 = b.include(pf0)
    k1 = b.include(d1)
    k2 = b.include(d2)
    ax = b.axiom("OrE", imp(imp(a, c), imp(imp(bb_, c), imp(d, c))))
    return finish(b, b.mp(k0, b.mp(k2, b.mp(k1, ax))))


def derive_efq(pf: HilbertProof, phi: Formula) -> HilbertProof:
    """From G |- bot build G |- phi."""
    _require_checks(pf, "input proof")
    if pf.conclusion != BOT:
        raise ElaborationError("input proof must conclude bot")
    if phi == BOT:
        return pf
    b = ProofBuilder(pf.system, pf.context)
    kb = b.include(pf)
    kid = identity_lines(b, BOT)
    ax = b.axiom("EFQ", imp(imp(BOT, BOT), imp(BOT, phi)))
    return finish(b, b.mp(kb, b.mp(kid, ax)))


def _occurs(t: Term, f: Formula) -> bool:
    return any(s == t for s in formula_terms(f))


def _fresh_variable(avoid: set, base: str = "v") -> str:
    i = 0
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


TOP = imp(BOT, imp(BOT, BOT))


def derive_exists_elim(pf0: HilbertProof, pf1: HilbertProof, t: Term) -> HilbertProof:
    """From G |- exists x a and a[x->t], G |- c build G |- c (t fresh)."""
    system = _same_system(pf0, pf1)
    _require_checks(pf0, "existential proof")
    _require_checks(pf1, "case proof")
    e = pf0.conclusion
    if not (isinstance(e, Quant) and e.q == EXISTS):
        raise ElaborationError("first proof must conclude an existential")
    if not is_closed_term(t):
        raise ElaborationError(f"witness {t} is not closed")
    x, a, c = e.var, e.body, pf1.conclusion
    inst = substitute_term(a, x, t)
    gamma = list(pf0.context)
    for g in gamma + [g for g in pf1.context if g != inst]:
        if _occurs(t, g):
            raise ElaborationError(f"witness {t} is not fresh: occurs in context formula {print_formula(g)}")
    if _occurs(t, a):
        raise ElaborationError(f"witness {t} is not fresh: occurs in {print_formula(a)}")
    if _occurs(t, c):
        raise ElaborationError(f"witness {t} is not fresh: occurs in conclusion {print_formula(c)}")
    if inst not in pf1.context:
        raise ElaborationError(f"case proof context lacks {print_formula(inst)}")
    if x in free_vars(c):
        raise ElaborationError(f"{x} is free in the conclusion {print_formula(c)}")
    d = deduction_elaborate(pf1, inst)          # G |- a[x->t] -> c
    avoid: set = set()
    for ln in d.lines:
        avoid |= all_vars(ln.formula)
    avoid |= all_vars(a) | all_vars(c)
    y = _fresh_variable(avoid)
    d = _abstract(d, t, Var(y))                 # G |- a[x->y] -> c
    ctx = gamma + [g for g in d.context if g not in gamma]
    b = ProofBuilder(system, ctx)
    k = b.include(d)
    ay_c = b.formula(k)
    ktop = b.axiom("K", TOP)
    kw = b.mp(k, b.axiom("K", imp(ay_c, imp(TOP, ay_c))))      # T -> (a[x->y] -> c)
    kg = b.gen(kw, y)                                           # T -> forall y (...)
    kall = b.mp(ktop, kg)
    back = imp(a, c)
    kinst = b.mp(kall, b.axiom("AllE", imp(b.formula(kall), back)))   # a -> c
    kex = b.exinst(kinst, x)                                    # exists x a -> c
    k0 = b.include(pf0)
    return finish(b, b.mp(k0, kex))


def _abstract(pf: HilbertProof, t: Term, v: Var) -> HilbertProof:
    lines = []
    for ln in pf.lines:
        j = ln.just
        if isinstance(j, Axiom) and j.inst is not None:
            terms = {k: _abstract_term(s, t, v) for k, s in j.inst.terms.items()}
            inst = Instantiation({k: replace_term(f, t, v) for k, f in j.inst.formulas.items()},
                                 dict(j.inst.variables), terms)
            j = Axiom(j.scheme, inst)
        lines.append(Line(ln.index, replace_term(ln.formula, t, v), j))
    ctx = tuple(replace_term(g, t, v) for g in pf.context)
    return HilbertProof(pf.system, ctx, tuple(lines))


def _abstract_term(s: Term, t: Term, v: Var) -> Term:
    return term_replace(s, t, v)


# ---------------------------------------------------------------------------
# proof file format

_LINE = re.compile(r"^\s*(\d+)\s*\.\s*(.*?)\s+by\s+(.*?)\s*$")


def _split_top(text: str) -> list:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if "".join(cur).strip():
        parts.append("".join(cur).strip())
    return parts


def _parse_just(text: str, sig: Optional[Signature], lineno: int) -> Justification:
    m = re.match(r"^(\w+)\s*(?:\((.*)\))?$", text.strip())
    if not m:
        raise ParseError(f"line {lineno}: cannot read justification {text!r}")
    kind, args = m.group(1).lower(), m.group(2)
    parts = _split_top(args) if args else []
    try:
        if kind == "hyp":
            return Hyp()
        if kind == "mp":
            return MP(int(parts[0]), int(parts[1]))
        if kind == "gen":
            return Gen(int(parts[0]), parts[1])
        if kind == "exi":
            return ExInst(int(parts[0]), parts[1])
        if kind == "axiom":
            scheme = parts[0]
            if len(parts) == 1:
                return Axiom(scheme)
            fs, vs, ts = {}, {}, {}
            for p in parts[1:]:
                key, val = p.split(":=", 1)
                key = key.strip()
                if key in ("X", "Y", "Z"):
                    fs[key] = parse_formula(val, sig)
                elif key == "x":
                    vs[key] = val.strip()
                elif key == "t":
                    ts[key] = parse_term(val, sig)
                else:
                    raise ParseError(f"line {lineno}: unknown metavariable {key}")
            return Axiom(scheme, Instantiation(fs, vs, ts))
    except (IndexError, ValueError) as e:
        raise ParseError(f"line {lineno}: malformed justification {text!r} ({e})") from None
    raise ParseError(f"line {lineno}: unknown rule {kind!r}")


def parse_proof(text: str, sig: Optional[Signature] = None) -> HilbertProof:
    system = None
    context: list = []
    lines: list = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("system"):
            system = line.split()[1] if len(line.split()) > 1 else None
            if system not in SYSTEMS:
                raise ParseError(f"line {lineno}: system must be C or I")
            continue
        if line.startswith("context:"):
            body = line[len("context:"):]
            context = [parse_formula(p, sig) for p in body.split(";") if p.strip()]
            continue
        m = _LINE.match(line)
        if not m:
            raise ParseError(f"line {lineno}: expected 'n. FORMULA by RULE'")
        idx, ftext, jtext = m.groups()
        try:
            f = parse_formula(ftext, sig)
        except ParseError as e:
            raise ParseError(f"line {lineno}: {e}") from None
        lines.append(Line(int(idx), f, _parse_just(jtext, sig, lineno)))
    if system is None:
        raise ParseError("missing 'system C|I' header")
    if not lines:
        raise ParseError("proof has no lines")
    return HilbertProof(system, tuple(context), tuple(lines))


def _print_just(j: Justification) -> str:
    if isinstance(j, Hyp):
        return "hyp"
    if isinstance(j, MP):
        return f"mp({j.minor},{j.major})"
    if isinstance(j, Gen):
        return f"gen({j.line},{j.var})"
    if isinstance(j, ExInst):
        return f"exi({j.line},{j.var})"
    if j.inst is None:
        return f"axiom({j.scheme})"
    parts = [j.scheme]
    parts += [f"{k}:={print_formula(v)}" for k, v in sorted(j.inst.formulas.items())]
    parts += [f"{k}:={v}" for k, v in sorted(j.inst.variables.items())]
    parts += [f"{k}:={v}" for k, v in sorted(j.inst.terms.items())]
    return f"axiom({', '.join(parts)})"


def print_proof(pf: HilbertProof) -> str:
    out = [f"system {pf.system}"]
    if pf.context:
        out.append("context: " + "; ".join(print_formula(g) for g in pf.context))
    for ln in pf.lines:
        out.append(f"{ln.index}. {print_formula(ln.formula)} by {_print_just(ln.just)}")
    return "\n".join(out) + "\n"
