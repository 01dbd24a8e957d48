"""Seeded random objects for the property harnesses and the test-suite."""

from __future__ import annotations

import random
from typing import Sequence

from .atomic import AtomicRule, AtomicSystem
from .hilbert import HilbertProof, ProofBuilder, finish
from .syntax import (
    AND, BOT, FORALL, IMP, OR, Atom, Bin, Formula, Quant, Var, atom,
    const, disj, exists, forall, free_vars, imp, neg, substitute,
)


def nullary(names: Sequence[str]) -> list:
    return [Atom(n, ()) for n in names]


def random_formula(rng: random.Random, atoms: Sequence[Formula], depth: int,
                   ops: Sequence[str] = (IMP, AND, OR), bot: bool = True) -> Formula:
    if depth <= 0 or rng.random() < 0.3:
        if bot and rng.random() < 0.1:
            return BOT
        return rng.choice(list(atoms))
    op = rng.choice(list(ops))
    return Bin(op, random_formula(rng, atoms, depth - 1, ops, bot),
               random_formula(rng, atoms, depth - 1, ops, bot))


def random_quantified(rng: random.Random, preds: Sequence[str], consts: Sequence[str],
                      depth: int, ops: Sequence[str] = (IMP,),
                      quants: Sequence[str] = (FORALL,), var: str = "x",
                      open_: bool = False) -> Formula:
    """A formula over unary predicates with one bound variable at a time.

    Closed unless ``open_``, in which case ``var`` may occur free.
    """
    def leaf(bound: bool) -> Formula:
        t = Var(var) if bound and rng.random() < 0.7 else const(rng.choice(list(consts)))
        return atom(rng.choice(list(preds)), t)

    def go(d: int, bound: bool) -> Formula:
        if d <= 0 or rng.random() < 0.3:
            return leaf(bound)
        if not bound and quants and rng.random() < 0.4:
            return Quant(rng.choice(list(quants)), var, go(d - 1, True))
        return Bin(rng.choice(list(ops)), go(d - 1, bound), go(d - 1, bound))

    return go(depth, open_)


def random_atomic_system(rng: random.Random, atoms: Sequence[Atom], max_rules: int = 10,
                         max_premises: int = 2, max_hyps: int = 2) -> AtomicSystem:
    rules = []
    for _ in range(rng.randint(0, max_rules)):
        prem = []
        for _ in range(rng.randint(0, max_premises)):
            hyps = frozenset(rng.sample(list(atoms), rng.randint(0, max_hyps)))
            prem.append((hyps, rng.choice(list(atoms))))
        rules.append(AtomicRule(tuple(prem), rng.choice(list(atoms))))
    return AtomicSystem(rules)


# ---------------------------------------------------------------------------
# random checking Hilbert proofs


def grow_proof(rng: random.Random, b: ProofBuilder, pool: Sequence[Formula], steps: int,
               schemes: Sequence[str] = ("K", "S")) -> None:
    """Append random but correct lines: axioms over the pool and existing lines, MP."""
    for _ in range(steps):
        lines = [ln.formula for ln in b.lines]
        r = rng.random()
        if lines and r < 0.45:
            a = rng.choice(lines)
            c = rng.choice(list(pool) + lines)
            k = b.by_formula[a]
            b.mp(k, b.axiom("K", imp(a, imp(c, a))))
        elif r < 0.7 and "S" in schemes:
            impls = [f for f in lines if isinstance(f, Bin) and f.op == IMP
                     and isinstance(f.right, Bin) and f.right.op == IMP]
            if impls:
                f = rng.choice(impls)
                a, bb, c = f.left, f.right.left, f.right.right
                k = b.mp(b.by_formula[f], b.axiom("S", imp(f, imp(imp(a, bb), imp(a, c)))))
                if imp(a, bb) in b.by_formula:
                    b.mp(b.by_formula[imp(a, bb)], k)
        else:
            impls = [f for f in lines if isinstance(f, Bin) and f.op == IMP and f.left in b.by_formula]
            if impls:
                f = rng.choice(impls)
                b.mp(b.by_formula[f.left], b.by_formula[f])
            elif lines:
                a = rng.choice(lines)
                b.axiom("K", imp(a, imp(rng.choice(list(pool)), a)))


def random_hypothetical_proof(rng: random.Random, system: str, atoms: Sequence[Formula],
                              quantified: bool = False) -> tuple:
    """A checking proof whose context contains a distinguished closed hypothesis.

    Returns (proof, hypothesis).  With ``quantified`` the proof also contains
    generalization and existential-instantiation lines on a variable that is
    not free in the hypothesis.
    """
    pool = [random_formula(rng, atoms, 2) for _ in range(3)]
    phi = random_formula(rng, atoms, 2)
    gamma = [random_formula(rng, atoms, 2) for _ in range(rng.randint(0, 2))]
    ctx = [phi] + [g for g in gamma if g != phi]
    b = ProofBuilder(system, ctx)
    for h in ctx:
        if rng.random() < 0.8:
            b.hyp(h)
    if not b.lines:
        b.hyp(phi)
    grow_proof(rng, b, pool, rng.randint(1, 8))
    if quantified:
        q = atom("Q", Var("x"))
        a = rng.choice([ln.formula for ln in b.lines])
        k = b.axiom("K", imp(a, imp(q, a)))
        kg = b.gen(k, "x")                           # a -> forall x (Q(x) -> a)
        kq = b.mp(b.by_formula[a], k)                # Q(x) -> a
        ke = b.exinst(kq, "x")                       # exists x Q(x) -> a
        if rng.random() < 0.5:
            b.mp(b.by_formula[a], kg)
        if rng.random() < 0.5:
            b.axiom("K", imp(b.formula(ke), imp(a, b.formula(ke))))
    pick = rng.choice(b.lines)
    return finish(b, pick.index), phi


def random_or_elim_inputs(rng: random.Random, atoms: Sequence[Formula]) -> tuple:
    """(pf0, pf1, pf2) for or-elimination, all in system I."""
    a, c = random_formula(rng, atoms, 1), random_formula(rng, atoms, 1)
    d = disj(a, c)
    gamma = [random_formula(rng, atoms, 2) for _ in range(rng.randint(0, 2))]
    mode = rng.randrange(3)
    if mode == 0:
        target = d
    elif mode == 1 and gamma:
        target = gamma[0]
    else:
        target = imp(random_formula(rng, atoms, 1), d)
    b0 = ProofBuilder("I", [d] + gamma)
    pf0 = finish(b0, b0.hyp(d))
    proofs = []
    for h, side in ((a, "OrI1"), (c, "OrI2")):
        b = ProofBuilder("I", [h] + gamma + [d])
        kh = b.hyp(h)
        grow_proof(rng, b, [a, c], rng.randint(0, 4))
        kd = b.mp(kh, b.axiom(side, imp(h, d)))
        if target == d:
            k = kd
        elif gamma and target == gamma[0]:
            k = b.hyp(gamma[0])
        else:
            k = b.mp(kd, b.axiom("K", imp(d, target)))
        proofs.append(finish(b, k))
    return pf0, proofs[0], proofs[1]


def random_efq_input(rng: random.Random, atoms: Sequence[Formula], system: str = "I") -> tuple:
    a = random_formula(rng, atoms, 1)
    gamma = [a, neg(a)] + [random_formula(rng, atoms, 2) for _ in range(rng.randint(0, 2))]
    b = ProofBuilder(system, gamma)
    k = b.mp(b.hyp(a), b.hyp(neg(a)))
    grow_proof(rng, b, atoms, rng.randint(0, 3))
    pf = finish(b, k)
    target = rng.choice([random_formula(rng, atoms, 2), BOT,
                         forall("x", atom("P", Var("x")))])
    return pf, target


def random_exists_elim_input(rng: random.Random, consts: Sequence[str] = ("c", "d"),
                             fresh: str = "e") -> tuple:
    """(pf0, pf1, t) with t fresh."""
    preds = ["P", "Q"]
    body = random_quantified(rng, preds, consts, 2, quants=(), open_=True)
    if "x" not in free_vars(body):
        body = Bin(IMP, atom("P", Var("x")), body)
    ex = exists("x", body)
    t = const(fresh)
    inst = substitute(body, "x", t)
    gamma = [random_quantified(rng, preds, consts, 2) for _ in range(rng.randint(0, 2))]
    b0 = ProofBuilder("I", [ex] + gamma)
    pf0 = finish(b0, b0.hyp(ex))
    b = ProofBuilder("I", [inst] + gamma)
    k = b.hyp(inst)
    grow_proof(rng, b, [atom("P", const(consts[0]))], rng.randint(0, 3))
    goal = rng.randrange(3)
    if goal == 0:
        kk = b.mp(k, b.axiom("ExI", imp(inst, ex)))
    elif goal == 1 and gamma:
        kk = b.hyp(gamma[0])
    else:
        kk = b.axiom("K", imp(atom("P", const(consts[0])), imp(ex, atom("P", const(consts[0])))))
    return pf0, finish(b, kk), t


def random_k_proof(rng: random.Random, atoms: Sequence[Formula], steps: int = 6,
                   context: Sequence[Formula] = ()) -> HilbertProof:
    """A checking C-proof using only K, S and MP (simulable in the K base)."""
    b = ProofBuilder("C", context)
    for h in context:
        b.hyp(h)
    pool = [random_formula(rng, atoms, 1, ops=(IMP,)) for _ in range(2)]
    if not b.lines:
        a = rng.choice(pool)
        b.axiom("K", imp(a, imp(rng.choice(pool), a)))
    grow_proof(rng, b, pool, steps)
    return finish(b, rng.choice(b.lines).index)
