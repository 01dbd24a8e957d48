"""Support over an explicit finite basis.

Every clause quantifies over finite data: extensions are the members of the
basis that contain the current base, closed terms come from a fixed finite
universe, and the atoms quantified in the bot/or/exists clauses come from a
declared atom universe.  ``supports`` follows the clauses literally;
``SupportTable`` computes the same relation for all bases at once as bitmasks
and is what the exhaustive sweeps use.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

from .atomic import AtomicRule, AtomicSystem, Deriver, rule
from .syntax import (
    AND, EXISTS, FORALL, IMP, OR, Atom, Bin, Bot, Formula, Quant, Term,
    free_vars, print_formula, substitute, universal_closure, weight,
)


class BasisError(ValueError):
    pass


class Basis:
    """A finite set of atomic systems with a closed-term and atom universe."""

    def __init__(self, systems: Iterable[AtomicSystem], atoms: Iterable[Atom],
                 terms: Iterable[Term] = (), *, zero_complete: bool = False,
                 union_closed: bool = False):
        uniq = list(dict.fromkeys(systems))
        self.systems = tuple(uniq)
        self.index = {s: i for i, s in enumerate(self.systems)}
        self.atoms = tuple(dict.fromkeys(atoms))
        self.terms = tuple(terms)
        self._derivers = [Deriver(s) for s in self.systems]
        self._ext = [tuple(j for j, c in enumerate(self.systems) if b.rules <= c.rules)
                     for b in self.systems]
        self.zero_complete = zero_complete
        self.union_closed = union_closed
        if zero_complete and not self.is_zero_complete():
            raise BasisError("basis declared zero-level-complete but is not")
        if union_closed and not self.is_union_closed():
            raise BasisError("basis declared union-closed but is not")

    def __len__(self):
        return len(self.systems)

    def __iter__(self):
        return iter(self.systems)

    def is_zero_complete(self) -> bool:
        for s in self.systems:
            for q in self.atoms:
                if s | [rule(q)] not in self.index:
                    return False
        return True

    def is_union_closed(self) -> bool:
        return all(a | b in self.index for a in self.systems for b in self.systems)

    def position(self, base: AtomicSystem) -> int:
        try:
            return self.index[base]
        except KeyError:
            raise BasisError("base is not a member of the basis") from None

    def deriver(self, i: int) -> Deriver:
        return self._derivers[i]

    def extension_indices(self, i: int) -> tuple:
        return self._ext[i]

    @classmethod
    def powerset(cls, pool: Sequence[AtomicRule], atoms: Iterable[Atom],
                 terms: Iterable[Term] = (), base: Iterable[AtomicRule] = ()) -> "Basis":
        pool = list(pool)
        systems = [AtomicSystem(list(base) + list(c))
                   for n in range(len(pool) + 1)
                   for c in itertools.combinations(pool, n)]
        return cls(systems, atoms, terms, union_closed=True)

    @classmethod
    def zero_completed(cls, systems: Iterable[AtomicSystem], atoms: Iterable[Atom],
                       terms: Iterable[Term] = ()) -> "Basis":
        atoms = list(atoms)
        zero = [rule(q) for q in atoms]
        out = []
        for s in systems:
            for n in range(len(zero) + 1):
                for c in itertools.combinations(zero, n):
                    out.append(s | c)
        return cls(out, atoms, terms, zero_complete=True)


def extensions(basis: Basis, base: AtomicSystem) -> list:
    """All members of ``basis`` that contain ``base``."""
    i = basis.position(base)
    return [basis.systems[j] for j in basis.extension_indices(i)]


@dataclass
class SupportQuery:
    basis: Basis
    base: AtomicSystem
    context: tuple
    goal: Formula


class Evaluator:
    """Clause-by-clause evaluation with a per-basis memo table.

    ``trace`` (if given) is called as ``trace(outer_goal, inner_goal)`` for
    every recursive support call on a single formula, so callers can watch
    the weight measure.
    """

    def __init__(self, basis: Basis, trace: Optional[Callable] = None):
        self.basis = basis
        self.memo: dict = {}
        self.trace = trace

    def supports(self, i: int, context: Iterable[Formula], goal: Formula) -> bool:
        ctx = frozenset(_close(g) for g in context)
        goal = _close(goal)
        if not ctx:
            return self._at(i, goal)
        key = (i, ctx, goal)
        if key not in self.memo:
            self.memo[key] = all(
                self._at(j, goal)
                for j in self.basis.extension_indices(i)
                if all(self._at(j, g) for g in ctx))
        return self.memo[key]

    def _at(self, i: int, goal: Formula, parent: Optional[Formula] = None) -> bool:
        key = (i, goal)
        if key in self.memo:
            return self.memo[key]
        b = self.basis
        if isinstance(goal, Atom):
            val = b.deriver(i).derives(frozenset(), goal)
        elif isinstance(goal, Bot):
            val = all(self._sub(i, a, goal) for a in b.atoms)
        elif isinstance(goal, Bin) and goal.op == AND:
            val = self._sub(i, goal.left, goal) and self._sub(i, goal.right, goal)
        elif isinstance(goal, Bin) and goal.op == IMP:
            val = all(self._sub(j, goal.right, goal)
                      for j in b.extension_indices(i) if self._sub(j, goal.left, goal))
        elif isinstance(goal, Bin) and goal.op == OR:
            val = all(self._sub(j, p, goal)
                      for j in b.extension_indices(i)
                      for p in b.atoms
                      if self._entails(j, goal.left, p, goal) and self._entails(j, goal.right, p, goal))
        elif isinstance(goal, Quant) and goal.q == FORALL:
            val = all(self._sub(i, substitute(goal.body, goal.var, t), goal) for t in b.terms)
        elif isinstance(goal, Quant) and goal.q == EXISTS:
            insts = [substitute(goal.body, goal.var, t) for t in b.terms]
            val = all(self._sub(j, p, goal)
                      for j in b.extension_indices(i)
                      for p in b.atoms
                      if all(self._entails(j, f, p, goal) for f in insts))
        else:
            raise TypeError(f"not a formula: {goal!r}")
        self.memo[key] = val
        return val

    def _sub(self, i: int, f: Formula, parent: Formula) -> bool:
        if self.trace is not None:
            self.trace(parent, f)
        return self._at(i, f)

    def _entails(self, i: int, hyp: Formula, p: Atom, parent: Formula) -> bool:
        # hyp ||-_i p by the (Inf) clause
        if self.trace is not None:
            self.trace(parent, hyp)
        return all(self._at(j, p) for j in self.basis.extension_indices(i) if self._at(j, hyp))


def _close(f: Formula) -> Formula:
    return f if not free_vars(f) else universal_closure(f)


_EVALUATORS: dict = {}


def _evaluator(basis: Basis) -> Evaluator:
    ev = _EVALUATORS.get(id(basis))
    if ev is None or ev.basis is not basis:
        ev = Evaluator(basis)
        _EVALUATORS.clear()
        _EVALUATORS[id(basis)] = ev
    return ev


def supports(q: SupportQuery) -> bool:
    """Truth of ``context ||-_base goal`` relative to the query's basis."""
    ev = _evaluator(q.basis)
    return ev.supports(q.basis.position(q.base), q.context, q.goal)


def supports_valid(basis: Basis, context: Iterable[Formula], goal: Formula) -> bool:
    """``context ||- goal``: support in every base of the basis."""
    ev = _evaluator(basis)
    context = tuple(context)
    return all(ev.supports(i, context, goal) for i in range(len(basis)))


# ---------------------------------------------------------------------------
# bitmask evaluation


class SupportTable:
    """Support of a formula at every base, as an int bitmask over the basis."""

    def __init__(self, basis: Basis):
        self.basis = basis
        n = len(basis)
        self.n = n
        self.full = (1 << n) - 1
        self.ext = [sum(1 << j for j in basis.extension_indices(i)) for i in range(n)]
        self.atom_mask: dict = {}
        for a in basis.atoms:
            self.atom_mask[a] = self._derive_mask(a)
        self._memo: dict = {}
        self.imp = lru_cache(maxsize=None)(self._imp)

    def _derive_mask(self, a: Atom) -> int:
        m = 0
        for i in range(self.n):
            if self.basis.deriver(i).derives(frozenset(), a):
                m |= 1 << i
        return m

    def atom(self, a: Atom) -> int:
        if a not in self.atom_mask:
            self.atom_mask[a] = self._derive_mask(a)
        return self.atom_mask[a]

    def _imp(self, ma: int, mb: int) -> int:
        """Bases all of whose extensions in ma are also in mb."""
        bad = ma & ~mb & self.full
        return sum(1 << i for i in range(self.n) if not (self.ext[i] & bad))

    def upclosed_avoiding(self, bad: int) -> int:
        return sum(1 << i for i in range(self.n) if not (self.ext[i] & bad))

    def bot(self) -> int:
        m = self.full
        for a in self.basis.atoms:
            m &= self.atom(a)
        return m

    def disj(self, ma: int, mb: int) -> int:
        bad = 0
        for a in self.basis.atoms:
            pm = self.atom(a)
            bad |= self.imp(ma, pm) & self.imp(mb, pm) & ~pm
        return self.upclosed_avoiding(bad & self.full)

    def mask(self, f: Formula) -> int:
        f = _close(f)
        if f in self._memo:
            return self._memo[f]
        if isinstance(f, Atom):
            m = self.atom(f)
        elif isinstance(f, Bot):
            m = self.bot()
        elif isinstance(f, Bin) and f.op == AND:
            m = self.mask(f.left) & self.mask(f.right)
        elif isinstance(f, Bin) and f.op == IMP:
            m = self.imp(self.mask(f.left), self.mask(f.right))
        elif isinstance(f, Bin) and f.op == OR:
            m = self.disj(self.mask(f.left), self.mask(f.right))
        elif isinstance(f, Quant) and f.q == FORALL:
            m = self.full
            for t in self.basis.terms:
                m &= self.mask(substitute(f.body, f.var, t))
        else:
            insts = [self.mask(substitute(f.body, f.var, t)) for t in self.basis.terms]
            bad = 0
            for a in self.basis.atoms:
                pm = self.atom(a)
                hyp = self.full
                for im in insts:
                    hyp &= self.imp(im, pm)
                bad |= hyp & ~pm
            m = self.upclosed_avoiding(bad & self.full)
        self._memo[f] = m
        return m

    def is_monotone(self, m: int) -> bool:
        return all(not (m >> i) & 1 or (self.ext[i] & m) == self.ext[i] for i in range(self.n))


# ---------------------------------------------------------------------------
# harnesses


@dataclass
class MonotonicityReport:
    checked: int = 0
    pairs: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_monotonicity(basis: Basis, formulas: Iterable[Formula]) -> MonotonicityReport:
    """For every sampled formula and every B <= C in the basis: B supports => C supports."""
    ev = _evaluator(basis)
    rep = MonotonicityReport()
    n = len(basis)
    for f in formulas:
        rep.checked += 1
        truth = [ev.supports(i, (), f) for i in range(n)]
        for i in range(n):
            for j in basis.extension_indices(i):
                rep.pairs += 1
                if truth[i] and not truth[j]:
                    rep.violations.append((print_formula(f), i, j))
    return rep


def check_monotonicity_masks(table: SupportTable, masks: Iterable[tuple]) -> MonotonicityReport:
    """Bitmask variant: ``masks`` yields (label, mask) pairs."""
    rep = MonotonicityReport()
    cache: dict = {}
    for label, m in masks:
        rep.checked += 1
        ok = cache.get(m)
        if ok is None:
            ok = cache[m] = table.is_monotone(m)
        if not ok:
            rep.violations.append(label)
    return rep


class UnsupportedConfiguration(ValueError):
    pass


@dataclass
class AtomicCutReport:
    instances: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_atomic_cut(basis: Basis, q_atoms: Iterable[Atom], p_atoms: Iterable[Atom],
                     goal: Atom) -> AtomicCutReport:
    """``Q, P |-_B goal`` iff every extension deriving all of Q has ``P |-_X goal``."""
    if not basis.is_zero_complete():
        raise UnsupportedConfiguration("atomic cut harness needs a zero-level-complete basis")
    q_atoms, p_atoms = frozenset(q_atoms), frozenset(p_atoms)
    rep = AtomicCutReport()
    for i in range(len(basis)):
        rep.instances += 1
        lhs = basis.deriver(i).derives(q_atoms | p_atoms, goal)
        rhs = all(basis.deriver(j).derives(p_atoms, goal)
                  for j in basis.extension_indices(i)
                  if all(basis.deriver(j).derives(frozenset(), q) for q in q_atoms))
        if lhs != rhs:
            rep.failures.append((i, lhs, rhs))
    return rep


def check_atomic_completeness(basis: Basis, p_atoms: Iterable[Atom], goal: Atom) -> AtomicCutReport:
    """``P ||-_B goal`` (support, via the Inf clause) iff ``P |-_B goal``, at every base."""
    ev = _evaluator(basis)
    p_atoms = frozenset(p_atoms)
    rep = AtomicCutReport()
    for i in range(len(basis)):
        rep.instances += 1
        sem = ev.supports(i, tuple(p_atoms), goal)
        syn = basis.deriver(i).derives(p_atoms, goal)
        if sem != syn:
            rep.failures.append((i, sem, syn))
    return rep


def formulas_by_weight(atoms: Sequence[Atom], max_weight: int,
                       ops: Sequence[str] = (AND, OR, IMP)) -> list:
    """Quantifier-free formulas over ``atoms`` grouped by weight (index = weight)."""
    from .syntax import BOT
    levels: list = [list(atoms)]
    for w in range(1, max_weight + 1):
        cur = [BOT] if w == 1 else []
        for wl in range(w):
            wr = w - 1 - wl
            for a in levels[wl]:
                for b in levels[wr]:
                    for op in ops:
                        cur.append(Bin(op, a, b))
        levels.append(cur)
    return levels
