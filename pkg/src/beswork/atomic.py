"""Atomic rules, atomic systems and derivability between closed atoms.

A rule ``{H1 => P1, ..., Hn => Pn} => P`` is stored as a tuple of
``(frozenset(Hi), Pi)`` premises plus a conclusion.  Derivability is the
inductive relation generated by *ref* (``P in ctx``) and *app* (every
premise ``Pi`` derivable from ``ctx | Hi``).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .syntax import (
    Atom, Formula, ParseError, Signature, Term, Var, is_closed_term,
    parse_formula, print_formula, term_vars, _subst_in_term,
)

ZERO, FIRST, SECOND = "zero", "first", "second"


@dataclass(frozen=True)
class AtomicRule:
    premises: tuple   # ((frozenset of atoms, atom), ...)
    conclusion: Atom
    label: str = field(default="", compare=False, hash=False)

    @property
    def level(self) -> str:
        return level(self)

    def atoms(self) -> set:
        out = {self.conclusion}
        for hyps, p in self.premises:
            out |= hyps
            out.add(p)
        return out

    def __str__(self) -> str:
        return print_rule(self)


def rule(conclusion: Atom, *premises, label: str = "") -> AtomicRule:
    """Build a rule; each premise is an atom or a ``(hyps, atom)`` pair."""
    prem = []
    for p in premises:
        if isinstance(p, tuple):
            hyps, a = p
            prem.append((frozenset(hyps), a))
        else:
            prem.append((frozenset(), p))
    return AtomicRule(tuple(prem), conclusion, label)


def level(r: AtomicRule) -> str:
    if not r.premises:
        return ZERO
    if all(not hyps for hyps, _ in r.premises):
        return FIRST
    return SECOND


def _atom_closed(a: Atom) -> bool:
    return all(is_closed_term(t) for t in a.args)


class AtomicSystem:
    """A finite set of closed atomic rules, indexed by conclusion."""

    def __init__(self, rules: Iterable[AtomicRule] = (), keep_order: bool = False):
        rules = list(rules)
        self.rules = frozenset(rules)
        for r in self.rules:
            if not all(_atom_closed(a) for a in r.atoms()):
                raise ValueError(f"atomic system rules must be closed: {r}")
        # deterministic order; callers that care about rule priority pass keep_order
        if keep_order:
            self.ordered = tuple(dict.fromkeys(rules))
        else:
            self.ordered = tuple(sorted(self.rules, key=_rule_key))
        self.by_conclusion: dict = {}
        for r in self.ordered:
            self.by_conclusion.setdefault(r.conclusion, []).append(r)

    def __iter__(self):
        return iter(self.ordered)

    def __len__(self):
        return len(self.rules)

    def __contains__(self, r):
        return r in self.rules

    def __eq__(self, other):
        return isinstance(other, AtomicSystem) and self.rules == other.rules

    def __hash__(self):
        return hash(self.rules)

    def __le__(self, other):
        return self.rules <= other.rules

    def __or__(self, other):
        extra = other.rules if isinstance(other, AtomicSystem) else frozenset(other)
        return AtomicSystem(self.rules | extra)

    def __repr__(self):
        return "AtomicSystem{" + "; ".join(print_rule(r) for r in self.ordered) + "}"

    def atoms(self) -> set:
        out: set = set()
        for r in self.rules:
            out |= r.atoms()
        return out

    def levels(self) -> set:
        return {level(r) for r in self.rules}


def _rule_key(r: AtomicRule):
    return (print_rule(r),)


# ---------------------------------------------------------------------------
# derivations


@dataclass(frozen=True)
class BaseDerivation:
    context: frozenset
    atom: Atom
    rule: Optional[AtomicRule] = None     # None means ref
    children: tuple = ()

    @property
    def is_ref(self) -> bool:
        return self.rule is None

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)

    def nodes(self) -> Iterator["BaseDerivation"]:
        yield self
        for c in self.children:
            yield from c.nodes()


def validate_derivation(d: BaseDerivation, system: AtomicSystem) -> list:
    """Independent re-check of a derivation tree; returns a list of problems."""
    problems = []

    def go(node: BaseDerivation, path: str):
        if node.rule is None:
            if node.atom not in node.context:
                problems.append(f"{path}: ref on {print_formula(node.atom)} not in context")
            if node.children:
                problems.append(f"{path}: ref node has children")
            return
        r = node.rule
        if r not in system:
            problems.append(f"{path}: rule {print_rule(r)} not in the system")
        if r.conclusion != node.atom:
            problems.append(f"{path}: rule concludes {print_formula(r.conclusion)}")
        if len(node.children) != len(r.premises):
            problems.append(f"{path}: {len(node.children)} subderivations for "
                            f"{len(r.premises)} premises")
            return
        for i, ((hyps, p), child) in enumerate(zip(r.premises, node.children)):
            if child.context != node.context | hyps or child.atom != p:
                problems.append(f"{path}.{i}: premise judgment mismatch")
            go(child, f"{path}.{i}")

    go(d, "root")
    return problems


class Deriver:
    """Memoised derivability for one atomic system.

    ``closure(ctx)`` is the set of atoms derivable from ``ctx``; premises
    with a larger context recurse (contexts only grow, so this terminates)
    and premises whose hypotheses are already in ``ctx`` are handled by a
    fixpoint loop.  The first rule that adds an atom is kept as its witness.
    """

    def __init__(self, system: AtomicSystem):
        self.system = system
        self._closure: dict = {}
        self._why: dict = {}

    def closure(self, ctx: Iterable[Atom]) -> frozenset:
        ctx = frozenset(ctx)
        if ctx in self._closure:
            return self._closure[ctx]
        derived: dict = {a: None for a in sorted(ctx, key=print_formula)}
        # premises whose hypotheses add nothing are counted down as atoms
        # arrive; the others are only looked at once those are satisfied
        waiting: dict = {}
        count: list = []
        queue: list = []
        rules = self.system.ordered
        for i, r in enumerate(rules):
            need = {p for hyps, p in r.premises if hyps <= ctx and p not in derived}
            count.append(len(need))
            for p in need:
                waiting.setdefault(p, []).append(i)
            if not need:
                queue.append(i)
        pos = 0
        while pos < len(queue):
            i = queue[pos]
            pos += 1
            r = rules[i]
            if r.conclusion in derived:
                continue
            if not all(hyps <= ctx or p in self.closure(ctx | hyps) for hyps, p in r.premises):
                continue
            derived[r.conclusion] = r
            for j in waiting.get(r.conclusion, ()):
                count[j] -= 1
                if count[j] == 0:
                    queue.append(j)
        result = frozenset(derived)
        self._closure[ctx] = result
        self._why[ctx] = derived
        return result

    def derives(self, ctx: Iterable[Atom], goal: Atom) -> bool:
        return goal in self.closure(ctx)

    def witness(self, ctx: Iterable[Atom], goal: Atom) -> Optional[BaseDerivation]:
        ctx = frozenset(ctx)
        if goal not in self.closure(ctx):
            return None
        r = self._why[ctx][goal]
        if r is None:
            return BaseDerivation(ctx, goal)
        kids = tuple(self.witness(ctx | hyps, p) for hyps, p in r.premises)
        return BaseDerivation(ctx, goal, r, kids)


def derives(system: AtomicSystem, ctx: Iterable[Atom], goal: Atom):
    """Return (bool, witness-or-None) for ``ctx |-_system goal``."""
    d = Deriver(system)
    w = d.witness(ctx, goal)
    return w is not None, w


# ---------------------------------------------------------------------------
# open rules


@dataclass(frozen=True)
class OpenAtomicRule:
    premises: tuple
    conclusion: Atom

    def variables(self) -> list:
        seen: list = []
        for a in [self.conclusion] + [p for _, p in self.premises] + \
                 [h for hs, _ in self.premises for h in sorted(hs, key=print_formula)]:
            for t in a.args:
                for v in sorted(term_vars(t)):
                    if v not in seen:
                        seen.append(v)
        return seen

    def instance(self, theta: dict) -> AtomicRule:
        def sub(a: Atom) -> Atom:
            args = a.args
            for v, t in theta.items():
                args = tuple(_subst_in_term(x, v, t) for x in args)
            return Atom(a.pred, args)

        return AtomicRule(tuple((frozenset(sub(h) for h in hs), sub(p)) for hs, p in self.premises),
                          sub(self.conclusion))


def open_rule(conclusion: Atom, *premises) -> OpenAtomicRule:
    r = rule(conclusion, *premises)
    return OpenAtomicRule(r.premises, r.conclusion)


def close_open_system(rules: Iterable[OpenAtomicRule], terms: Iterable[Term]) -> AtomicSystem:
    """All instances of the open rules with variables mapped into ``terms``."""
    terms = list(terms)
    out = []
    for r in rules:
        vs = r.variables()
        for combo in itertools.product(terms, repeat=len(vs)):
            out.append(r.instance(dict(zip(vs, combo))))
    return AtomicSystem(out)


def _open_derives(rules: Iterable[OpenAtomicRule], goal: Atom) -> bool:
    # open derivability: rules used verbatim, atoms compared syntactically
    rs = [AtomicRule(r.premises, r.conclusion) for r in rules]
    sysm = _UncheckedSystem(rs)
    return Deriver(sysm).derives(frozenset(), goal)


class _UncheckedSystem(AtomicSystem):
    def __init__(self, rules):
        self.rules = frozenset(rules)
        self.ordered = tuple(sorted(self.rules, key=_rule_key))
        self.by_conclusion = {}


@dataclass
class CorrespondenceReport:
    open_derivable: bool
    closed_derivable: bool
    witness: Optional[dict]

    @property
    def agree(self) -> bool:
        return self.open_derivable == self.closed_derivable


def open_correspondence_check(rules: Iterable[OpenAtomicRule], goal: Atom,
                              terms: Iterable[Term]) -> CorrespondenceReport:
    """Compare open derivability of ``goal`` with derivability of some instance in the closure."""
    rules = list(rules)
    terms = list(terms)
    left = _open_derives(rules, goal)
    closed = close_open_system(rules, terms)
    der = Deriver(closed)
    gvars: list = []
    for t in goal.args:
        for v in sorted(term_vars(t)):
            if v not in gvars:
                gvars.append(v)
    witness = None
    for combo in itertools.product(terms, repeat=len(gvars)):
        theta = dict(zip(gvars, combo))
        inst = OpenAtomicRule((), goal).instance(theta).conclusion
        if der.derives(frozenset(), inst):
            witness = theta
            break
    return CorrespondenceReport(left, witness is not None, witness)


# ---------------------------------------------------------------------------
# base file format


def print_rule(r) -> str:
    concl = print_formula(r.conclusion)
    if not r.premises:
        return f"=> {concl}"
    if all(not hs for hs, _ in r.premises):
        return ", ".join(print_formula(p) for _, p in r.premises) + f" => {concl}"
    parts = []
    for hs, p in r.premises:
        hyps = ", ".join(sorted(print_formula(h) for h in hs))
        parts.append(f"[{hyps}] => {print_formula(p)}")
    return "{ " + " ; ".join(parts) + " } => " + concl


def _atom(text: str, sig: Optional[Signature]) -> Atom:
    f = parse_formula(text.strip(), sig)
    if not isinstance(f, Atom):
        raise ParseError(f"expected an atom, got {text.strip()!r}")
    return f


def _split_commas(text: str) -> list:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p for p in (s.strip() for s in parts) if p]


def parse_rule(text: str, sig: Optional[Signature] = None) -> AtomicRule:
    text = text.strip()
    if text.startswith("{"):
        close = text.index("}")
        body, rest = text[1:close], text[close + 1:].strip()
        if not rest.startswith("=>"):
            raise ParseError(f"expected '=>' after premise block in {text!r}")
        concl = _atom(rest[2:], sig)
        prem = []
        for chunk in body.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            m = re.match(r"^\[(.*?)\]\s*=>\s*(.+)$", chunk)
            if not m:
                raise ParseError(f"malformed premise {chunk!r}")
            hyps = frozenset(_atom(h, sig) for h in _split_commas(m.group(1)))
            prem.append((hyps, _atom(m.group(2), sig)))
        return AtomicRule(tuple(prem), concl)
    if "=>" not in text:
        raise ParseError(f"rule needs '=>': {text!r}")
    left, right = text.rsplit("=>", 1)
    prem = tuple((frozenset(), _atom(p, sig)) for p in _split_commas(left))
    return AtomicRule(prem, _atom(right, sig))


def parse_base(text: str, sig: Optional[Signature] = None) -> AtomicSystem:
    rules = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rules.append(parse_rule(line, sig))
        except ParseError as e:
            raise ParseError(f"line {lineno}: {e}") from None
    return AtomicSystem(rules)


def print_base(system: AtomicSystem) -> str:
    return "".join(print_rule(r) + "\n" for r in system)


def print_derivation(d: BaseDerivation, indent: int = 0) -> str:
    ctx = ", ".join(sorted(print_formula(a) for a in d.context))
    head = f"{'  ' * indent}{ctx} |- {print_formula(d.atom)}"
    head += "   [ref]" if d.rule is None else f"   [{d.rule.label or print_rule(d.rule)}]"
    return "\n".join([head] + [print_derivation(c, indent + 1) for c in d.children])
