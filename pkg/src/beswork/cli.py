"""Command-line entry point.

Exit codes: 0 success / true, 1 checked false or rejected, 2 input error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path
from typing import Optional

from . import atomic, hilbert, simulation, support
from .syntax import (ParseError, Signature, parse_formula, parse_signature, parse_term,
                     print_formula)

OK, FALSE, INPUT, INTERNAL = 0, 1, 2, 3


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def _sig(args) -> Optional[Signature]:
    return parse_signature(_read(args.sig)) if getattr(args, "sig", None) else None


def _formulas(text: Optional[str], sig) -> list:
    if not text:
        return []
    return [parse_formula(s, sig) for s in text.split(";") if s.strip()]


# ---------------------------------------------------------------------------
# basis files


def load_basis(path: str) -> support.Basis:
    """Read a basis file.

    Directives, one per line (``#`` starts a comment)::

        atoms p, q, r            atom universe (default: atoms of all rules)
        terms c, d               closed-term universe for the quantifier clauses
        base other.base          add a base file (path relative to this file)
        rule p, q => r           add a base with this single rule to the listing
        pool p => q              add a rule to the pool
        powerset-of-pool         cross every listed base with every subset of the pool
        zero-complete over p, q  cross with every subset of {=> p, => q}
    """
    root = Path(path).parent
    bases: list = []
    pool: list = []
    atoms: list = []
    terms: list = []
    powerset = False
    zero_over: Optional[list] = None
    for lineno, raw in enumerate(_read(path).splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if word == "atoms":
                atoms += [atomic._atom(a, None) for a in atomic._split_commas(rest)]
            elif word == "terms":
                terms += [parse_term(t) for t in atomic._split_commas(rest)]
            elif word == "base":
                bases.append(atomic.parse_base(_read(str(root / rest))))
            elif word == "rule":
                bases.append(atomic.AtomicSystem([atomic.parse_rule(rest)]))
            elif word == "pool":
                pool.append(atomic.parse_rule(rest))
            elif word == "powerset-of-pool":
                powerset = True
            elif word == "zero-complete":
                if not rest.startswith("over"):
                    raise InputError(f"{path}:{lineno}: expected 'zero-complete over <atoms>'")
                zero_over = [atomic._atom(a, None) for a in atomic._split_commas(rest[4:])]
            else:
                raise InputError(f"{path}:{lineno}: unknown directive {word!r}")
        except ParseError as e:
            raise InputError(f"{path}:{lineno}: {e}") from None
    if not bases:
        bases = [atomic.AtomicSystem()]
    systems = bases
    if powerset:
        systems = [b | c for b in systems
                   for n in range(len(pool) + 1) for c in itertools.combinations(pool, n)]
    elif pool:
        raise InputError(f"{path}: pool rules given without powerset-of-pool")
    if not atoms:
        seen: set = set()
        for s in systems:
            seen |= s.atoms()
        atoms = sorted(seen, key=print_formula) + [a for a in (zero_over or []) if a not in seen]
    if zero_over is not None:
        zero = [atomic.rule(q) for q in zero_over]
        systems = [s | c for s in systems
                   for n in range(len(zero) + 1) for c in itertools.combinations(zero, n)]
    return support.Basis(systems, atoms, terms)


# ---------------------------------------------------------------------------
# commands


def cmd_parse(args) -> int:
    sig = _sig(args)
    texts = [args.formula] if args.formula else \
        [l for l in _read(args.file).splitlines() if l.strip() and not l.lstrip().startswith("#")]
    for t in texts:
        print(print_formula(parse_formula(t, sig)))
    return OK


def cmd_check_proof(args) -> int:
    pf = hilbert.parse_proof(_read(args.file), _sig(args))
    v = hilbert.check_proof(pf, args.system)
    system = args.system or pf.system
    if v.ok:
        print(f"ACCEPT  system {system}, {len(pf)} lines, proves {print_formula(pf.conclusion)}")
        return OK
    print(f"REJECT  system {system}")
    for k, msg in v.diagnostics:
        print(f"  line {k}: {msg}")
    return FALSE


def cmd_derive(args) -> int:
    sig = _sig(args)
    system = atomic.parse_base(_read(args.base), sig)
    ctx = [atomic._atom(a, sig) for a in atomic._split_commas(args.context or "")]
    goal = atomic._atom(args.goal, sig)
    ok, witness = atomic.derives(system, ctx, goal)
    if not ok:
        print(f"NOT DERIVABLE  {print_formula(goal)}")
        return FALSE
    problems = atomic.validate_derivation(witness, system)
    if problems:
        print(f"witness does not validate: {problems[0]}", file=sys.stderr)
        return INTERNAL
    print(f"DERIVABLE  {print_formula(goal)}")
    print(atomic.print_derivation(witness))
    return OK


def cmd_support(args) -> int:
    basis = load_basis(args.basis)
    sig = _sig(args)
    goal = parse_formula(args.goal, sig)
    ctx = tuple(_formulas(args.context, sig))
    if args.base is not None:
        base = atomic.parse_base(_read(args.base), sig)
        try:
            basis.position(base)
        except support.BasisError as e:
            raise InputError(str(e)) from None
        ok = support.supports(support.SupportQuery(basis, base, ctx, goal))
        where = args.base
    else:
        ok = support.supports_valid(basis, ctx, goal)
        where = f"every base of {args.basis}"
    lhs = ", ".join(print_formula(c) for c in ctx)
    print(f"{'SUPPORTED' if ok else 'NOT SUPPORTED'}  {lhs} ||- {print_formula(goal)}  at {where}"
          f"  ({len(basis)} bases)")
    return OK if ok else FALSE


def _source_proof(args):
    pf = hilbert.parse_proof(_read(args.proof), _sig(args))
    v = hilbert.check_proof(pf)
    if not v.ok:
        k, msg = v.diagnostics[0]
        raise InputError(f"{args.proof} does not check (line {k}: {msg})")
    return pf


def cmd_simulate(args) -> int:
    pf = _source_proof(args)
    fm, nb = simulation.prepare_simulation(pf, args.variant, _sig(args), args.allow_and)
    d = simulation.simulate_hilbert(pf, fm, nb)
    problems = simulation.validate_in_base(d, nb)
    if problems:
        print(f"derivation does not validate: {problems[0]}", file=sys.stderr)
        return INTERNAL
    print("== FLATMAP ==")
    print(fm.describe())
    print("== DERIVATION ==")
    print(atomic.print_derivation(d))
    return OK


def cmd_extract(args) -> int:
    sig = _sig(args)
    if args.proof:
        pf = _source_proof(args)
        fm, nb = simulation.prepare_simulation(pf, args.variant, sig, args.allow_and)
        d = simulation.simulate_hilbert(pf, fm, nb)
        out = simulation.extract_hilbert(d, nb)
    else:
        gamma, goal = _formulas(args.context, sig), parse_formula(args.goal, sig)
        fm = simulation.make_flat_map(gamma, goal, sig)
        nb = simulation.build_natural_base(fm, args.variant, args.allow_and)
        res = simulation.search_and_extract(nb, [fm.flat_of(g) for g in fm.gamma], fm.flat_of(fm.goal))
        if res.proof is None:
            print(f"NO DERIVATION  {res.error}")
            return FALSE
        out = res.proof
    v = hilbert.check_proof(out)
    print(hilbert.print_proof(out), end="")
    if not v.ok:
        print(f"extracted proof does not check: {v.diagnostics[0]}", file=sys.stderr)
        return INTERNAL
    return OK


def cmd_roundtrip(args) -> int:
    sig = _sig(args)
    source = _source_proof(args) if args.proof else None
    if source is not None:
        gamma, goal = list(source.context), source.conclusion
    else:
        if not args.goal:
            raise InputError("roundtrip needs --goal or --proof")
        gamma, goal = _formulas(args.context, sig), parse_formula(args.goal, sig)
    res = simulation.completeness_pipeline(gamma, goal, args.variant, source=source, sig=sig,
                                           allow_and=args.allow_and)
    print(res.transcript)
    return OK if res.ok else FALSE


def cmd_props(args) -> int:
    from . import props
    rep = props.run_all(seed=args.seed, depth=args.depth, n_atoms=args.atoms,
                        variants=[args.variant] if args.variant else ["K", "J"],
                        samples=args.samples)
    print(rep.text())
    print(rep.timings(), file=sys.stderr)
    if args.figures:
        from . import plots
        for path in plots.render_all(rep, args.figures):
            print(f"wrote {path}")
    return OK if rep.ok else FALSE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beswork",
                                description="Hilbert proofs, atomic bases and base-extension support.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        sp.add_argument("--sig", help="signature file (const/fun/pred/depth lines)")
        return sp

    sp = add("parse", cmd_parse, "print formulas in normal form")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--formula")
    g.add_argument("file", nargs="?")

    sp = add("check-proof", cmd_check_proof, "check a Hilbert proof file")
    sp.add_argument("file")
    sp.add_argument("--system", choices=["C", "I"], help="override the proof's system line")

    sp = add("derive", cmd_derive, "atomic derivability in a base file")
    sp.add_argument("--base", required=True)
    sp.add_argument("--goal", required=True)
    sp.add_argument("--context", help="comma-separated atoms")

    sp = add("support", cmd_support, "evaluate support over a basis file")
    sp.add_argument("--basis", required=True)
    sp.add_argument("--goal", required=True)
    sp.add_argument("--context", help="';'-separated formulas")
    sp.add_argument("--base", help="base file to evaluate at (default: every base)")

    for name, fn, help_ in (("simulate", cmd_simulate, "simulate a Hilbert proof in a natural base"),
                            ("extract", cmd_extract, "extract a Hilbert proof from a base derivation"),
                            ("roundtrip", cmd_roundtrip, "flatten, derive, extract and re-check")):
        sp = add(name, fn, help_)
        sp.add_argument("--variant", choices=simulation.VARIANTS, default="K")
        sp.add_argument("--allow-and", action="store_true",
                        help="admit conjunction in the classical base")
        if name == "simulate":
            sp.add_argument("proof")
        else:
            sp.add_argument("--proof", help="source Hilbert proof (default: search the base)")
            sp.add_argument("--goal")
            sp.add_argument("--context", help="';'-separated formulas")

    sp = add("props", cmd_props, "run the seeded property harnesses")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--depth", type=int, default=2, help="formula depth for sampled goals")
    sp.add_argument("--atoms", type=int, default=3, help="number of nullary atoms")
    sp.add_argument("--variant", choices=simulation.VARIANTS)
    sp.add_argument("--samples", type=int, default=10, help="natural bases per variant")
    sp.add_argument("--figures", metavar="DIR", help="write matplotlib figures to DIR")
    return p


def _validate(args) -> None:
    if args.command == "props":
        if not 1 <= args.atoms <= 5:
            raise InputError("--atoms must be between 1 and 5")
        if not 0 <= args.depth <= 4:
            raise InputError("--depth must be between 0 and 4")
        if args.samples < 1:
            raise InputError("--samples must be positive")
    if args.command in ("extract",) and not (args.goal or args.proof):
        raise InputError("extract needs --goal or --proof")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return INPUT if e.code else OK
    try:
        _validate(args)
        return args.fn(args)
    except (InputError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return INPUT
    except (hilbert.ElaborationError, simulation.SimulationError,
            simulation.ExtractionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return FALSE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return INPUT
    except (AssertionError, RuntimeError) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return INTERNAL


if __name__ == "__main__":
    sys.exit(main())
