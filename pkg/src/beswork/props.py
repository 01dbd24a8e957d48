"""Seeded property harnesses behind ``beswork props`` and the acceptance suite."""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from typing import Sequence

from .atomic import AtomicRule, AtomicSystem, rule
from .generators import nullary, random_formula, random_quantified
from .simulation import (NaturalBase, build_natural_base, check_flat_clauses,
                         clause_instances, make_flat_map)
from .support import (Basis, SupportTable, check_atomic_cut, check_monotonicity_masks,
                      formulas_by_weight)
from .syntax import AND, EXISTS, FORALL, IMP, OR, Formula, print_formula

MAX_XI = 8


# ---------------------------------------------------------------------------
# monotonicity


@dataclass
class MonotonicitySweep:
    pool: list
    bases: int
    formulas: int
    violations: list
    by_weight: dict          # weight -> (formulas, violations)
    support_by_size: dict    # base size -> mean fraction of formulas supported


def random_pool(rng: random.Random, atoms: Sequence, n: int = 4) -> list:
    """Distinct zero- and first-level rules over ``atoms``, one second-level rule if possible."""
    out: list = []
    while len(out) < n:
        kind = rng.random()
        c = rng.choice(atoms)
        if kind < 0.3:
            r = rule(c)
        elif kind < 0.8:
            r = rule(c, *rng.sample(list(atoms), rng.randint(1, min(2, len(atoms)))))
        else:
            h = rng.choice(atoms)
            r = rule(c, ((h,), rng.choice(atoms)))
        if r not in out:
            out.append(r)
    return out


def monotonicity_sweep(atoms: Sequence, pool: Sequence[AtomicRule], max_weight: int,
                       ops=(AND, OR, IMP)) -> MonotonicitySweep:
    basis = Basis.powerset(pool, atoms)
    table = SupportTable(basis)
    levels = formulas_by_weight(list(atoms), max_weight, ops)
    violations: list = []
    by_weight: dict = {}
    counts = [0] * len(basis)
    total = 0
    for w, fs in enumerate(levels):
        masks = [(print_formula(f), table.mask(f)) for f in fs]
        rep = check_monotonicity_masks(table, masks)
        by_weight[w] = (len(fs), len(rep.violations))
        violations += rep.violations
        for _, m in masks:
            for i in range(len(basis)):
                counts[i] += (m >> i) & 1
        total += len(fs)
    by_size: dict = {}
    for i, s in enumerate(basis.systems):
        by_size.setdefault(len(s), []).append(counts[i] / max(total, 1))
    return MonotonicitySweep(list(pool), len(basis), total, violations, by_weight,
                             {k: sum(v) / len(v) for k, v in sorted(by_size.items())})


# ---------------------------------------------------------------------------
# atomic cut over zero-level-complete bases


@dataclass
class AtCompSweep:
    bases: int
    instances: int
    failures: list


def atcomp_sweep(atoms: Sequence, extra_rule_sets: Sequence[Sequence[AtomicRule]]) -> AtCompSweep:
    """For each rule set R: the basis R x subsets of zero-level rules; every Q, P, goal."""
    instances = 0
    failures: list = []
    nbases = 0
    subsets = [frozenset(c) for n in range(len(atoms) + 1) for c in itertools.combinations(atoms, n)]
    for rs in extra_rule_sets:
        basis = Basis.zero_completed([AtomicSystem(rs)], atoms)
        nbases += len(basis)
        for q in subsets:
            for p in subsets:
                for g in atoms:
                    rep = check_atomic_cut(basis, q, p, g)
                    instances += rep.instances
                    failures += [(tuple(rs), q, p, g, f) for f in rep.failures]
    return AtCompSweep(nbases, instances, failures)


def rule_sets_upto(pool: Sequence[AtomicRule], k: int) -> list:
    return [list(c) for n in range(k + 1) for c in itertools.combinations(pool, n)]


# ---------------------------------------------------------------------------
# flattening clauses over generated natural bases


@dataclass
class ClauseSurvey:
    variant: str
    bases: list = field(default_factory=list)          # (sequent text, |xi|, rules)
    checks: list = field(default_factory=list)         # (base no, extension no, ClauseCheck)
    seconds: float = 0.0

    def tally(self) -> dict:
        out: dict = {}
        for _, _, c in self.checks:
            ok, n = out.get(c.clause, (0, 0))
            out[c.clause] = (ok + c.ok, n + 1)
        return out

    @property
    def failures(self) -> list:
        return [(b, e, c) for b, e, c in self.checks if not c.ok]


def random_goal(rng: random.Random, variant: str, atoms: Sequence, depth: int) -> Formula:
    if variant == "K":
        ops = (IMP,)
        quants = (FORALL,)
    else:
        ops = (IMP, AND, OR)
        quants = (FORALL, EXISTS)
    if rng.random() < 0.3:
        return random_quantified(rng, ["P"], ["c"], depth + 1, ops=ops, quants=quants)
    return random_formula(rng, atoms, depth + 1, ops=ops)


def sample_natural_bases(rng: random.Random, variant: str, n: int, atoms: Sequence,
                         depth: int = 2, max_xi: int = MAX_XI) -> list:
    """``n`` natural bases for random goals with a small subformula set and at least one clause instance."""
    out: list = []
    seen: set = set()
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 200 * n:
            raise RuntimeError("could not sample enough small goals")
        g = random_goal(rng, variant, atoms, depth)
        if g in seen:
            continue
        fm = make_flat_map([], g)
        if len(fm.xi) > max_xi or len(fm.base_terms) > 3:
            continue
        nb = build_natural_base(fm, variant)
        if not clause_instances(nb):
            continue
        seen.add(g)
        out.append(nb)
    return out


def zero_extensions(rng: random.Random, nb: NaturalBase, k: int) -> list:
    """The empty extension and ``k`` random sets of zero-level flat facts."""
    flats = [nb.fm.flat[f] for f in nb.fm.xi if nb.fm.eigen_free(f)]
    out = [()]
    for _ in range(k):
        size = rng.randint(1, min(2, len(flats)))
        out.append(tuple(rule(a) for a in sorted(rng.sample(flats, size), key=print_formula)))
    return out


def clause_survey(rng: random.Random, variant: str, n_bases: int, atoms: Sequence,
                  depth: int = 2, extensions: int = 3) -> ClauseSurvey:
    t0 = time.perf_counter()
    rep = ClauseSurvey(variant)
    for b, nb in enumerate(sample_natural_bases(rng, variant, n_bases, atoms, depth)):
        rep.bases.append((print_formula(nb.fm.goal), len(nb.fm.xi), len(nb.system)))
        for e, ext in enumerate(zero_extensions(rng, nb, extensions)):
            for c in check_flat_clauses(nb, ext):
                rep.checks.append((b, e, c))
    rep.seconds = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------


@dataclass
class PropsReport:
    seed: int
    monotonicity: MonotonicitySweep
    atcomp: AtCompSweep
    surveys: list
    seconds: dict

    @property
    def ok(self) -> bool:
        return (not self.monotonicity.violations and not self.atcomp.failures
                and all(not s.failures for s in self.surveys))

    def text(self) -> str:
        m, a = self.monotonicity, self.atcomp
        lines = [f"seed {self.seed}",
                 f"monotonicity: {m.formulas} formulas x {m.bases} bases, "
                 f"{len(m.violations)} violations",
                 f"atomic cut: {a.instances} instances over {a.bases} bases, "
                 f"{len(a.failures)} failures"]
        for s in self.surveys:
            parts = ", ".join(f"({k}) {ok}/{n}" for k, (ok, n) in sorted(s.tally().items()))
            lines.append(f"clauses {s.variant}: {len(s.bases)} bases, {parts}")
            for b, e, c in s.failures[:5]:
                lines.append(f"  fail ({c.clause}) {print_formula(c.formula)}  base {b} ext {e}: "
                             f"lhs {c.lhs} rhs {c.rhs}")
            if len(s.failures) > 5:
                lines.append(f"  ... {len(s.failures) - 5} more")
        lines.append("PASS" if self.ok else "FAIL")
        return "\n".join(lines)

    def timings(self) -> str:
        parts = [f"{k} {v:.2f}s" for k, v in self.seconds.items()]
        parts += [f"clauses {s.variant} {s.seconds:.2f}s" for s in self.surveys]
        return "timings: " + ", ".join(parts)


def run_all(seed: int = 0, depth: int = 2, n_atoms: int = 3, variants=("K", "J"),
            samples: int = 10) -> PropsReport:
    rng = random.Random(seed)
    atoms = nullary("pqrst"[:n_atoms])
    secs: dict = {}
    t0 = time.perf_counter()
    pool = random_pool(rng, atoms)
    mono = monotonicity_sweep(atoms, pool, depth + 1)
    secs["monotonicity"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    at = atcomp_sweep(atoms, rule_sets_upto(random_pool(rng, atoms), 1))
    secs["atcomp"] = time.perf_counter() - t0
    surveys = [clause_survey(rng, v, samples, atoms[:2], depth) for v in variants]
    return PropsReport(seed, mono, at, surveys, secs)
