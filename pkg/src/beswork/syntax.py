"""First-order terms, formulas and formula schemes.

Formulas are immutable, hashable dataclasses.  Negation is not a separate
node: ``~F`` is parsed to ``F -> bot``.  Substitution only ever replaces a
variable by a term; the public :func:`substitute` insists on closed terms,
while :func:`substitute_term` (used for scheme instantiation and proof
abstraction) accepts open terms and refuses variable capture instead.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Union


class SyntaxError_(Exception):
    """Raised for malformed formula text, with a character position."""

    def __init__(self, message: str, position: int = -1):
        self.message = message
        self.position = position
        where = f" at position {position}" if position >= 0 else ""
        super().__init__(f"{message}{where}")


ParseError = SyntaxError_


class SubstitutionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class App:
    """A constant (no arguments) or a function application."""

    symbol: str
    args: tuple = ()

    def __str__(self) -> str:
        if not self.args:
            return self.symbol
        return f"{self.symbol}({','.join(str(a) for a in self.args)})"


Term = Union[Var, App]


def const(name: str) -> App:
    return App(name, ())


def term_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    out: set[str] = set()
    for a in t.args:
        out |= term_vars(a)
    return out


def is_closed_term(t: Term) -> bool:
    return not term_vars(t)


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


def term_replace(t: Term, old: Term, new: Term) -> Term:
    """Replace every occurrence of the subterm ``old`` in ``t``."""
    if t == old:
        return new
    if isinstance(t, App) and t.args:
        return App(t.symbol, tuple(term_replace(a, old, new) for a in t.args))
    return t


# ---------------------------------------------------------------------------
# formulas

AND, OR, IMP = "&", "|", "->"
FORALL, EXISTS = "forall", "exists"


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple = ()

    def __str__(self) -> str:
        return print_formula(self)


@dataclass(frozen=True)
class Bot:
    def __str__(self) -> str:
        return "bot"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return print_formula(self)


@dataclass(frozen=True)
class Quant:
    q: str
    var: str
    body: "Formula"

    def __str__(self) -> str:
        return print_formula(self)


Formula = Union[Atom, Bot, Bin, Quant]

BOT = Bot()


def imp(a: Formula, b: Formula) -> Formula:
    return Bin(IMP, a, b)


def conj(a: Formula, b: Formula) -> Formula:
    return Bin(AND, a, b)


def disj(a: Formula, b: Formula) -> Formula:
    return Bin(OR, a, b)


def neg(a: Formula) -> Formula:
    return Bin(IMP, a, BOT)


def forall(x: str, body: Formula) -> Formula:
    return Quant(FORALL, x, body)


def exists(x: str, body: Formula) -> Formula:
    return Quant(EXISTS, x, body)


def atom(pred: str, *args: Term) -> Atom:
    return Atom(pred, tuple(args))


def free_vars(phi: Formula) -> set[str]:
    """Variables with at least one free occurrence in ``phi``."""
    if isinstance(phi, Atom):
        out: set[str] = set()
        for t in phi.args:
            out |= term_vars(t)
        return out
    if isinstance(phi, Bot):
        return set()
    if isinstance(phi, Bin):
        return free_vars(phi.left) | free_vars(phi.right)
    return free_vars(phi.body) - {phi.var}


def is_closed(phi: Formula) -> bool:
    return not free_vars(phi)


def all_vars(phi: Formula) -> set[str]:
    """Free and bound variable names."""
    if isinstance(phi, Atom):
        out: set[str] = set()
        for t in phi.args:
            out |= term_vars(t)
        return out
    if isinstance(phi, Bot):
        return set()
    if isinstance(phi, Bin):
        return all_vars(phi.left) | all_vars(phi.right)
    return all_vars(phi.body) | {phi.var}


def formula_terms(phi: Formula) -> Iterator[Term]:
    """All subterm occurrences of ``phi``, left to right."""
    if isinstance(phi, Atom):
        for t in phi.args:
            yield from subterms(t)
    elif isinstance(phi, Bin):
        yield from formula_terms(phi.left)
        yield from formula_terms(phi.right)
    elif isinstance(phi, Quant):
        yield from formula_terms(phi.body)


def constants_of(phi: Formula) -> set[str]:
    return {t.symbol for t in formula_terms(phi) if isinstance(t, App) and not t.args}


def predicates_of(phi: Formula) -> set[tuple[str, int]]:
    if isinstance(phi, Atom):
        return {(phi.pred, len(phi.args))}
    if isinstance(phi, Bot):
        return set()
    if isinstance(phi, Bin):
        return predicates_of(phi.left) | predicates_of(phi.right)
    return predicates_of(phi.body)


def atoms_of(phi: Formula) -> set[Atom]:
    if isinstance(phi, Atom):
        return {phi}
    if isinstance(phi, Bot):
        return set()
    if isinstance(phi, Bin):
        return atoms_of(phi.left) | atoms_of(phi.right)
    return atoms_of(phi.body)


def _subst_in_term(t: Term, x: str, s: Term) -> Term:
    if isinstance(t, Var):
        return s if t.name == x else t
    if not t.args:
        return t
    return App(t.symbol, tuple(_subst_in_term(a, x, s) for a in t.args))


def substitute_term(phi: Formula, x: str, t: Term) -> Formula:
    """Replace free occurrences of ``x`` by ``t``; ``t`` may be open.

    Raises SubstitutionError if a variable of ``t`` would be captured.
    """
    tvars = term_vars(t)

    def go(f: Formula) -> Formula:
        if isinstance(f, Atom):
            if not f.args:
                return f
            return Atom(f.pred, tuple(_subst_in_term(a, x, t) for a in f.args))
        if isinstance(f, Bot):
            return f
        if isinstance(f, Bin):
            return Bin(f.op, go(f.left), go(f.right))
        if f.var == x:
            return f
        if f.var in tvars and x in free_vars(f.body):
            raise SubstitutionError(
                f"substituting {t} for {x} would capture {f.var}")
        return Quant(f.q, f.var, go(f.body))

    return go(phi)


def substitute(phi: Formula, x: str, t: Term) -> Formula:
    """``phi[x -> t]`` for a closed term ``t``; bound occurrences are kept."""
    if not is_closed_term(t):
        raise SubstitutionError(f"substituted term {t} is not closed")
    return substitute_term(phi, x, t)


def replace_term(phi: Formula, old: Term, new: Term) -> Formula:
    """Replace every occurrence of the term ``old`` (bound positions included)."""
    if isinstance(phi, Atom):
        if not phi.args:
            return phi
        return Atom(phi.pred, tuple(term_replace(a, old, new) for a in phi.args))
    if isinstance(phi, Bot):
        return phi
    if isinstance(phi, Bin):
        return Bin(phi.op, replace_term(phi.left, old, new),
                   replace_term(phi.right, old, new))
    return Quant(phi.q, phi.var, replace_term(phi.body, old, new))


def free_var_order(phi: Formula) -> list[str]:
    """Free variables in order of first occurrence in the printed form."""
    seen: list[str] = []

    def walk_term(t: Term, bound: frozenset):
        if isinstance(t, Var):
            if t.name not in bound and t.name not in seen:
                seen.append(t.name)
        else:
            for a in t.args:
                walk_term(a, bound)

    def walk(f: Formula, bound: frozenset):
        if isinstance(f, Atom):
            for a in f.args:
                walk_term(a, bound)
        elif isinstance(f, Bin):
            walk(f.left, bound)
            walk(f.right, bound)
        elif isinstance(f, Quant):
            walk(f.body, bound | {f.var})

    walk(phi, frozenset())
    return seen


def universal_closure(phi: Formula) -> Formula:
    """Bind the free variables of ``phi``, innermost = first occurring.

    ``P(x,y)`` closes to ``forall y forall x P(x,y)``.
    """
    out = phi
    for v in free_var_order(phi):
        out = Quant(FORALL, v, out)
    return out


def weight(phi: Formula) -> int:
    if isinstance(phi, Atom):
        return 0
    if isinstance(phi, Bot):
        return 1
    if isinstance(phi, Bin):
        return weight(phi.left) + weight(phi.right) + 1
    return weight(phi.body) + 1


def size(phi: Formula) -> int:
    if isinstance(phi, (Atom, Bot)):
        return 1
    if isinstance(phi, Bin):
        return size(phi.left) + size(phi.right) + 1
    return size(phi.body) + 1


def subformulae(phi: Formula, terms: Iterable[Term]) -> tuple:
    """Closed subformulae of a closed formula, quantifiers unfolded over ``terms``.

    Returned in discovery order without duplicates.
    """
    if not is_closed(phi):
        raise ValueError(f"subformulae needs a closed formula, got {print_formula(phi)}")
    terms = list(terms)
    out: dict = {}
    stack = [phi]
    while stack:
        f = stack.pop()
        if f in out:
            continue
        out[f] = None
        if isinstance(f, Bin):
            stack.append(f.right)
            stack.append(f.left)
        elif isinstance(f, Quant):
            for t in reversed(terms):
                stack.append(substitute(f.body, f.var, t))
    return tuple(out)


# ---------------------------------------------------------------------------
# signatures and closed terms


@dataclass(frozen=True)
class Signature:
    constants: tuple = ()
    functions: tuple = ()   # ((name, arity), ...)
    predicates: tuple = ()  # ((name, arity), ...)
    depth: int = 1

    def __post_init__(self):
        names = [c for c in self.constants] + [f for f, _ in self.functions] \
            + [p for p, _ in self.predicates]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise ValueError(f"names declared twice: {sorted(dup)}")
        if self.depth < 0:
            raise ValueError("term depth bound must be >= 0")

    @property
    def function_arity(self) -> dict:
        return dict(self.functions)

    @property
    def predicate_arity(self) -> dict:
        return dict(self.predicates)

    def with_constants(self, extra: Iterable[str]) -> "Signature":
        new = tuple(c for c in extra if c not in self.constants)
        return Signature(self.constants + new, self.functions, self.predicates, self.depth)

    def with_predicates(self, extra: Iterable[tuple]) -> "Signature":
        have = dict(self.predicates)
        new = tuple((p, n) for p, n in extra if p not in have)
        return Signature(self.constants, self.functions, self.predicates + new, self.depth)

    @classmethod
    def from_formulas(cls, formulas: Iterable[Formula], depth: int = 1,
                      default_constant: str = "c") -> "Signature":
        consts: list = []
        funcs: dict = {}
        preds: dict = {}
        for f in formulas:
            for t in formula_terms(f):
                if isinstance(t, App):
                    if t.args:
                        funcs.setdefault(t.symbol, len(t.args))
                    elif t.symbol not in consts:
                        consts.append(t.symbol)
            for p, n in sorted(predicates_of(f)):
                preds.setdefault(p, n)
        if not consts:
            consts.append(default_constant)
        return cls(tuple(consts), tuple(funcs.items()), tuple(preds.items()), depth)


def closed_terms(sig: Signature) -> tuple:
    """Closed terms of depth <= ``sig.depth``, by depth then declaration order."""
    if not sig.constants:
        raise ValueError("signature declares no constants; closed-term universe is empty")
    levels = [[const(c) for c in sig.constants]]
    seen = set(levels[0])
    for _ in range(sig.depth):
        pool = [t for lvl in levels for t in lvl]
        new = []
        for f, n in sig.functions:
            for args in itertools.product(pool, repeat=n):
                t = App(f, tuple(args))
                if t not in seen:
                    seen.add(t)
                    new.append(t)
        if not new:
            break
        levels.append(new)
    return tuple(t for lvl in levels for t in lvl)


_DECL = re.compile(r"^\s*(const|fun|pred|depth)\s+(.*?)\s*$")


def parse_signature(text: str) -> Signature:
    """Read ``const c`` / ``fun f/1`` / ``pred P/2`` / ``depth 1`` lines."""
    consts, funcs, preds, depth = [], [], [], 1
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _DECL.match(line)
        if not m:
            raise ParseError(f"line {lineno}: cannot read declaration {line!r}")
        kind, rest = m.groups()
        try:
            if kind == "const":
                consts.extend(n.strip() for n in rest.split(",") if n.strip())
            elif kind == "depth":
                depth = int(rest)
            else:
                name, arity = rest.split("/")
                (funcs if kind == "fun" else preds).append((name.strip(), int(arity)))
        except ValueError:
            raise ParseError(f"line {lineno}: malformed declaration {line!r}") from None
    return Signature(tuple(consts), tuple(funcs), tuple(preds), depth)


# ---------------------------------------------------------------------------
# text grammar

_TOKEN = re.compile(r"\s*(?:(->)|([()~&|,])|([A-Za-z_][A-Za-z0-9_']*))")
_KEYWORDS = {"forall", "exists", "bot"}
_VARIABLE_INITIALS = "uvwxyz"


def _tokenize(text: str) -> list:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastindex)
        toks.append((m.group(m.lastindex), start))
        pos = m.end()
    toks.append(("<eof>", n))
    return toks


class _Parser:
    def __init__(self, text: str, sig: Optional[Signature]):
        self.toks = _tokenize(text)
        self.i = 0
        self.sig = sig

    def peek(self) -> str:
        return self.toks[self.i][0]

    def pos(self) -> int:
        return self.toks[self.i][1]

    def take(self, expected: Optional[str] = None) -> str:
        tok, pos = self.toks[self.i]
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r} but found {tok!r}", pos)
        self.i += 1
        return tok

    def ident(self) -> str:
        tok, pos = self.toks[self.i]
        if not (tok[0].isalpha() or tok[0] == "_") or tok in _KEYWORDS:
            raise ParseError(f"expected a name but found {tok!r}", pos)
        self.i += 1
        return tok

    # F ::= D (-> F)?     D ::= C (| C)*     C ::= U (& U)*
    def formula(self, bound: frozenset) -> Formula:
        left = self.disjunction(bound)
        if self.peek() == "->":
            self.take()
            return Bin(IMP, left, self.formula(bound))
        return left

    def disjunction(self, bound):
        f = self.conjunction(bound)
        while self.peek() == "|":
            self.take()
            f = Bin(OR, f, self.conjunction(bound))
        return f

    def conjunction(self, bound):
        f = self.unary(bound)
        while self.peek() == "&":
            self.take()
            f = Bin(AND, f, self.unary(bound))
        return f

    def unary(self, bound) -> Formula:
        tok = self.peek()
        if tok == "~":
            self.take()
            return neg(self.unary(bound))
        if tok in (FORALL, EXISTS):
            self.take()
            pos = self.pos()
            x = self.ident()
            if self.sig is not None and (x in self.sig.constants
                                         or x in self.sig.function_arity
                                         or x in self.sig.predicate_arity):
                raise ParseError(f"{x!r} is declared as a non-variable symbol", pos)
            return Quant(tok, x, self.unary(bound | {x}))
        if tok == "(":
            self.take()
            f = self.formula(bound)
            self.take(")")
            return f
        if tok == "bot":
            self.take()
            return BOT
        return self.atomic(bound)

    def atomic(self, bound) -> Formula:
        pos = self.pos()
        name = self.ident()
        args: tuple = ()
        if self.peek() == "(":
            self.take()
            items = []
            if self.peek() != ")":
                items.append(self.term(bound))
                while self.peek() == ",":
                    self.take()
                    items.append(self.term(bound))
            self.take(")")
            args = tuple(items)
        if self.sig is not None:
            ar = self.sig.predicate_arity
            if name not in ar:
                raise ParseError(f"unknown predicate {name!r}", pos)
            if ar[name] != len(args):
                raise ParseError(
                    f"predicate {name} has arity {ar[name]}, given {len(args)} arguments", pos)
        return Atom(name, args)

    def term(self, bound) -> Term:
        pos = self.pos()
        name = self.ident()
        if self.peek() == "(":
            self.take()
            items = [self.term(bound)]
            while self.peek() == ",":
                self.take()
                items.append(self.term(bound))
            self.take(")")
            if self.sig is not None:
                ar = self.sig.function_arity
                if name not in ar:
                    raise ParseError(f"unknown function symbol {name!r}", pos)
                if ar[name] != len(items):
                    raise ParseError(
                        f"function {name} has arity {ar[name]}, given {len(items)} arguments", pos)
            return App(name, tuple(items))
        if name in bound:
            return Var(name)
        if self.sig is not None:
            if name in self.sig.constants:
                return const(name)
            if name in self.sig.function_arity:
                raise ParseError(f"function {name} used without arguments", pos)
            if name in self.sig.predicate_arity:
                raise ParseError(f"predicate {name} used as a term", pos)
            return Var(name)
        return Var(name) if name[0] in _VARIABLE_INITIALS else const(name)


def parse_formula(text: str, sig: Optional[Signature] = None) -> Formula:
    """Parse formula text.

    With a signature, undeclared names in term position are variables and
    predicates/functions must be declared with the right arity.  Without
    one, free names starting with u-z are variables and the rest constants.
    """
    p = _Parser(text, sig)
    f = p.formula(frozenset())
    if p.peek() != "<eof>":
        raise ParseError(f"unexpected {p.peek()!r} after formula", p.pos())
    return f


def parse_term(text: str, sig: Optional[Signature] = None) -> Term:
    p = _Parser(text, sig)
    t = p.term(frozenset())
    if p.peek() != "<eof>":
        raise ParseError(f"unexpected {p.peek()!r} after term", p.pos())
    return t


# precedence levels: 0 ->, 1 |, 2 &, 3 unary/atomic
def _level(f: Formula) -> int:
    if isinstance(f, Bin):
        if f.op == IMP and not isinstance(f.right, Bot):
            return 0
        if f.op == IMP:
            return 3
        return 1 if f.op == OR else 2
    return 3


def print_formula(f: Formula) -> str:
    if isinstance(f, Atom):
        if not f.args:
            return f.pred
        return f"{f.pred}({','.join(str(a) for a in f.args)})"
    if isinstance(f, Bot):
        return "bot"
    if isinstance(f, Quant):
        return f"{f.q} {f.var} {_wrap(f.body, 3)}"
    if f.op == IMP and isinstance(f.right, Bot):
        return f"~{_wrap(f.left, 3)}"
    if f.op == IMP:
        return f"{_wrap(f.left, 1)} -> {_wrap(f.right, 0)}"
    lvl = _level(f)
    return f"{_wrap(f.left, lvl)} {f.op} {_wrap(f.right, lvl + 1)}"


def _wrap(f: Formula, min_level: int) -> str:
    s = print_formula(f)
    return s if _level(f) >= min_level else f"({s})"


# ---------------------------------------------------------------------------
# formula schemes


@dataclass(frozen=True)
class SVar:
    name: str


@dataclass(frozen=True)
class SBot:
    pass


@dataclass(frozen=True)
class SBin:
    op: str
    left: "Scheme"
    right: "Scheme"


@dataclass(frozen=True)
class SQuant:
    """Quantifier node; ``var`` names a variable metavariable."""

    q: str
    var: str
    body: "Scheme"


@dataclass(frozen=True)
class SSubst:
    """``scheme`` with variable-metavariable ``var`` replaced by term-metavariable ``term``."""

    scheme: "Scheme"
    var: str
    term: str


Scheme = Union[SVar, SBot, SBin, SQuant, SSubst]


@dataclass(frozen=True)
class Instantiation:
    """Values for formula-, variable- and term-metavariables of a scheme."""

    formulas: Mapping = field(default_factory=dict)
    variables: Mapping = field(default_factory=dict)
    terms: Mapping = field(default_factory=dict)

    def __hash__(self):
        return hash((tuple(sorted(self.formulas.items(), key=lambda kv: kv[0])),
                     tuple(sorted(self.variables.items())),
                     tuple(sorted(self.terms.items(), key=lambda kv: kv[0]))))

    def map_formulas(self, fn) -> "Instantiation":
        return Instantiation({k: fn(v) for k, v in self.formulas.items()},
                             dict(self.variables), dict(self.terms))


class MissingBinding(KeyError):
    pass


def scheme_formula_vars(s: Scheme) -> set[str]:
    if isinstance(s, SVar):
        return {s.name}
    if isinstance(s, SBot):
        return set()
    if isinstance(s, SBin):
        return scheme_formula_vars(s.left) | scheme_formula_vars(s.right)
    if isinstance(s, SQuant):
        return scheme_formula_vars(s.body)
    return scheme_formula_vars(s.scheme)


def instantiate_scheme(s: Scheme, inst: Instantiation) -> Formula:
    """Apply an instantiation; substitution nodes substitute after instantiating.

    A substitution node whose variable is not free in the instantiated body
    does not need a term binding.
    """
    if isinstance(s, SVar):
        try:
            return inst.formulas[s.name]
        except KeyError:
            raise MissingBinding(f"no formula bound to {s.name}") from None
    if isinstance(s, SBot):
        return BOT
    if isinstance(s, SBin):
        return Bin(s.op, instantiate_scheme(s.left, inst), instantiate_scheme(s.right, inst))
    if isinstance(s, SQuant):
        return Quant(s.q, _var_binding(inst, s.var), instantiate_scheme(s.body, inst))
    body = instantiate_scheme(s.scheme, inst)
    x = _var_binding(inst, s.var)
    if x not in free_vars(body):
        return body
    if s.term not in inst.terms:
        raise MissingBinding(f"no term bound to {s.term}")
    return substitute_term(body, x, inst.terms[s.term])


def _var_binding(inst: Instantiation, meta: str) -> str:
    try:
        return inst.variables[meta]
    except KeyError:
        raise MissingBinding(f"no variable bound to {meta}") from None
