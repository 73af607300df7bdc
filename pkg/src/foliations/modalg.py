"""Module membership, involutivity and pointwise invariants.

Everything here is exact.  The generated submodule of the rank-n free
module over Q[x_1..x_n] is handled through a Buchberger-style Groebner
basis; relations among the generators (syzygies) come from a second
Groebner run in rank n+k under a block order that eliminates the value
components.  Pointwise data at a rational point x:

* tangent dimension  = rank of the k x n matrix of generator values,
* fiber dimension    = k - rank of the evaluated syzygy generators
  (evaluation is a ring map, so the evaluated image of the relation
  module equals the span of the evaluated generators),
* isotropy dimension = fiber - tangent.

Note: the coefficient ring is the polynomial ring, standing in for the
ring of smooth functions.  On the homogeneous examples shipped with the
test-suite the fiber dimensions agree with the smooth ones, but equality
of polynomial and smooth fiber data is not claimed in general.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Callable, Sequence

from .errors import ArityError, BudgetError
from .vfparse import FoliationSpec, Poly, VectorField, grevlex_key, lie_bracket

__all__ = [
    "Budget",
    "DEFAULT_BUDGET",
    "ModuleGB",
    "SyzygyBasis",
    "MembershipResult",
    "InvolutivityReport",
    "BracketWitness",
    "SingularLocusReport",
    "module_groebner",
    "contains",
    "is_involutive",
    "syzygy_basis",
    "fiber_dim",
    "tangent_dim",
    "isotropy_dim",
    "singular_locus",
    "minimal_local_generators",
    "rank_exact",
    "as_point",
]

Element = tuple[Poly, ...]  # an element of a free module R^r


@dataclass(frozen=True)
class Budget:
    """Termination guard for basis computations.

    Exceeding either limit raises :class:`BudgetError`; results are never
    silently truncated.
    """

    max_pair_degree: int = 20
    max_reduction_steps: int = 1_000_000


DEFAULT_BUDGET = Budget()


@dataclass(frozen=True)
class ModuleGB:
    """Groebner basis of the submodule of R^n generated by the spec's fields.

    ``basis`` elements are monic and autoreduced; ``order`` is a human
    readable descriptor of the module term order.
    """

    source: FoliationSpec
    basis: tuple[Element, ...]
    order: str
    reprs: tuple[Element, ...] = field(repr=False, default=())
    # reprs[j] expresses basis[j] as a combination of the original generators


@dataclass(frozen=True)
class SyzygyBasis:
    """Generating set of the relation module of the spec's generators.

    Every ``relations`` entry r satisfies sum_i r[i] * X_i = 0 exactly.
    """

    source: FoliationSpec
    relations: tuple[Element, ...]


@dataclass(frozen=True)
class MembershipResult:
    member: bool
    certificate: tuple[Poly, ...] | None  # coefficients f with sum f_i X_i = X

    def __bool__(self) -> bool:
        return self.member


@dataclass(frozen=True)
class BracketWitness:
    i: int  # 1-based generator indices
    j: int
    bracket: VectorField


@dataclass(frozen=True)
class InvolutivityReport:
    closed: bool
    witnesses: tuple[BracketWitness, ...]


@dataclass(frozen=True)
class SingularLocusReport:
    generic_rank: int
    minor_ideal: tuple[Poly, ...]


def as_point(coords: Sequence, nvars: int) -> tuple[Fraction, ...]:
    """Coerce a coordinate sequence to exact rationals, checking arity."""
    pt = tuple(Fraction(c) for c in coords)
    if len(pt) != nvars:
        raise ArityError(f"point has {len(pt)} coordinates, expected {nvars}")
    return pt


# ---------------------------------------------------------------------------
# Groebner engine on free-module elements
# ---------------------------------------------------------------------------

KeyFn = Callable[[tuple[int, ...], int], tuple]


def _top_key(mon: tuple[int, ...], pos: int) -> tuple:
    # term-over-position: grevlex on monomials, lower position wins ties
    return (grevlex_key(mon), -pos)


def _make_elim_key(split: int) -> KeyFn:
    # any term in positions < split beats any term in positions >= split
    def key(mon: tuple[int, ...], pos: int) -> tuple:
        return (1 if pos < split else 0, grevlex_key(mon), -pos)

    return key


def _lead(elem: Element, key: KeyFn):
    """(key, position, monomial, coefficient) of the leading term, or None."""
    best = None
    for pos, p in enumerate(elem):
        if p.terms:
            mon, coeff = p.terms[0]
            k = key(mon, pos)
            if best is None or k > best[0]:
                best = (k, pos, mon, coeff)
    return best


def _divides(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    return all(x <= y for x, y in zip(a, b))


def _sub_scaled(elem: Element, other: Element, mon: tuple[int, ...], coeff: Fraction) -> Element:
    """elem - coeff * x^mon * other"""
    return tuple(a - b.mul_term(mon, coeff) for a, b in zip(elem, other))


def _scale(elem: Element, coeff: Fraction) -> Element:
    return tuple(p * coeff for p in elem)


def _is_zero(elem: Element) -> bool:
    return all(p.is_zero for p in elem)


def _reduce(
    elem: Element,
    basis: list[Element],
    leads: list,
    key: KeyFn,
    counter: list[int],
    budget: Budget,
    skip: int = -1,
):
    """Full normal form of ``elem`` modulo ``basis``; returns (rem, quotients).

    ``quotients`` is aligned with ``basis`` and satisfies
    elem = sum quotients[b] * basis[b] + rem.
    """
    nvars = elem[0].nvars
    work = list(elem)
    rem = [Poly.zero(nvars) for _ in elem]
    quots = [Poly.zero(nvars) for _ in basis]
    while True:
        ld = _lead(tuple(work), key)
        if ld is None:
            break
        _, pos, mon, coeff = ld
        reducer = -1
        for bi, lb in enumerate(leads):
            if bi != skip and lb[1] == pos and _divides(lb[2], mon):
                reducer = bi
                break
        counter[0] += 1
        if counter[0] > budget.max_reduction_steps:
            raise BudgetError(
                f"reduction step budget of {budget.max_reduction_steps} exceeded"
            )
        if reducer < 0:
            t = Poly.term(nvars, mon, coeff)
            work[pos] = work[pos] - t
            rem[pos] = rem[pos] + t
        else:
            lb = leads[reducer]
            fac_mon = tuple(a - b for a, b in zip(mon, lb[2]))
            fac_coeff = coeff / lb[3]
            g = basis[reducer]
            for i in range(len(work)):
                work[i] = work[i] - g[i].mul_term(fac_mon, fac_coeff)
            quots[reducer] = quots[reducer] + Poly.term(nvars, fac_mon, fac_coeff)
    return tuple(rem), quots


def _unit_row(nvars: int, length: int, index: int) -> Element:
    return tuple(
        Poly.constant(1, nvars) if i == index else Poly.zero(nvars) for i in range(length)
    )


def _groebner(
    gens: Sequence[Element],
    nvars: int,
    key: KeyFn,
    budget: Budget,
    track: bool = False,
):
    """Buchberger with optional tracking of combinations of the inputs.

    Returns (basis, reprs); ``reprs[j]`` (rank len(gens)) expresses
    basis[j] in the inputs when ``track`` is set, else ().
    """
    k = len(gens)
    basis: list[Element] = []
    reprs: list[Element] = []
    leads: list = []
    counter = [0]

    def push(elem: Element, rep: Element | None):
        ld = _lead(elem, key)
        inv = Fraction(1) / ld[3]
        basis.append(_scale(elem, inv))
        leads.append((ld[0], ld[1], ld[2], Fraction(1)))
        if track:
            reprs.append(_scale(rep, inv))

    for idx, g in enumerate(gens):
        if _is_zero(g):
            continue
        push(g, _unit_row(nvars, k, idx) if track else None)

    pairs: list[tuple[int, int, int]] = []

    def add_pairs(j: int):
        for i in range(j):
            if leads[i][1] == leads[j][1]:  # same leading position
                lcm = tuple(max(a, b) for a, b in zip(leads[i][2], leads[j][2]))
                heapq.heappush(pairs, (sum(lcm), i, j))

    for j in range(len(basis)):
        add_pairs(j)

    while pairs:
        deg, i, j = heapq.heappop(pairs)
        if deg > budget.max_pair_degree:
            raise BudgetError(
                f"S-pair degree {deg} exceeds cap {budget.max_pair_degree}"
            )
        li, lj = leads[i], leads[j]
        lcm = tuple(max(a, b) for a, b in zip(li[2], lj[2]))
        ui = tuple(a - b for a, b in zip(lcm, li[2]))
        uj = tuple(a - b for a, b in zip(lcm, lj[2]))
        s = tuple(
            a.mul_term(ui, Fraction(1)) - b.mul_term(uj, Fraction(1))
            for a, b in zip(basis[i], basis[j])
        )
        rem, quots = _reduce(s, basis, leads, key, counter, budget)
        if _is_zero(rem):
            continue
        rep = None
        if track:
            rep = tuple(
                a.mul_term(ui, Fraction(1)) - b.mul_term(uj, Fraction(1))
                for a, b in zip(reprs[i], reprs[j])
            )
            for b, q in enumerate(quots):
                if not q.is_zero:
                    rep = tuple(r - q * s_ for r, s_ in zip(rep, reprs[b]))
        push(rem, rep)
        add_pairs(len(basis) - 1)

    # minimalize: drop elements whose lead is divisible by another's lead
    # (strict divisibility cannot cycle; among equal leads the first stays)
    def _redundant(i: int) -> bool:
        for j in range(len(basis)):
            if j == i or leads[j][1] != leads[i][1]:
                continue
            if _divides(leads[j][2], leads[i][2]):
                if leads[j][2] != leads[i][2] or j < i:
                    return True
        return False

    kept = [i for i in range(len(basis)) if not _redundant(i)]
    basis = [basis[i] for i in kept]
    leads = [leads[i] for i in kept]
    if track:
        reprs = [reprs[i] for i in kept]

    # tail-reduce each element against the others (leads stay fixed)
    for i in range(len(basis)):
        rem, quots = _reduce(basis[i], basis, leads, key, counter, budget, skip=i)
        basis[i] = rem
        if track:
            rep = reprs[i]
            for b, q in enumerate(quots):
                if not q.is_zero:
                    rep = tuple(r - q * s_ for r, s_ in zip(rep, reprs[b]))
            reprs[i] = rep

    order = sorted(range(len(basis)), key=lambda i: leads[i][0], reverse=True)
    basis = [basis[i] for i in order]
    if track:
        reprs = [reprs[i] for i in order]
    return tuple(basis), tuple(reprs)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


@lru_cache(maxsize=128)
def module_groebner(spec: FoliationSpec, budget: Budget = DEFAULT_BUDGET) -> ModuleGB:
    """Groebner basis of the generated submodule of R^n.

    Deterministic for a fixed spec: the basis is monic, autoreduced and
    sorted by leading term.
    """
    gens = [g.components for g in spec.generators]
    basis, reprs = _groebner(gens, spec.nvars, _top_key, budget, track=True)
    return ModuleGB(
        source=spec,
        basis=basis,
        order="TOP(grevlex; lower position wins ties)",
        reprs=reprs,
    )


def contains(gb: ModuleGB, x: VectorField) -> MembershipResult:
    """Decide membership of ``x`` in the module; certificates are re-checked.

    On membership the returned coefficients f satisfy sum f_i X_i = X
    exactly (verified symbolically before returning).
    """
    spec = gb.source
    if x.nvars != spec.nvars:
        raise ArityError("vector field arity does not match the spec")
    counter = [0]
    leads = [_lead(b, _top_key) for b in gb.basis]
    rem, quots = _reduce(
        x.components, list(gb.basis), leads, _top_key, counter, DEFAULT_BUDGET
    )
    if not _is_zero(rem):
        return MembershipResult(member=False, certificate=None)
    cert = [Poly.zero(spec.nvars) for _ in range(spec.k)]
    for b, q in enumerate(quots):
        if q.is_zero:
            continue
        for i in range(spec.k):
            cert[i] = cert[i] + q * gb.reprs[b][i]
    # paranoia: a certificate must re-verify exactly
    check = VectorField.zero(spec.nvars)
    for f, gen in zip(cert, spec.generators):
        check = check + gen.scale(f)
    assert check == x, "internal error: membership certificate failed verification"
    return MembershipResult(member=True, certificate=tuple(cert))


def is_involutive(spec: FoliationSpec, budget: Budget = DEFAULT_BUDGET) -> InvolutivityReport:
    """Check closure under Lie brackets; failing pairs come with the bracket."""
    gb = module_groebner(spec, budget)
    witnesses = []
    for a, b in combinations(range(spec.k), 2):
        br = lie_bracket(spec.generators[a], spec.generators[b])
        if not contains(gb, br).member:
            witnesses.append(BracketWitness(i=a + 1, j=b + 1, bracket=br))
    return InvolutivityReport(closed=not witnesses, witnesses=tuple(witnesses))


@lru_cache(maxsize=128)
def syzygy_basis(spec: FoliationSpec, budget: Budget = DEFAULT_BUDGET) -> SyzygyBasis:
    """Generating set of the relation module {r : sum r_i X_i = 0}.

    Computed from a rank-(n+k) Groebner basis of the elements
    (X_i ; e_i) under a block order in which value components dominate;
    basis elements with vanishing value block are exactly a generating
    set (indeed a Groebner basis) of the relation module.
    """
    if spec.k < 1:
        raise ArityError("syzygy_basis needs at least one generator")
    n, k = spec.nvars, spec.k
    augmented = []
    for i, g in enumerate(spec.generators):
        augmented.append(g.components + _unit_row(n, k, i))
    basis, _ = _groebner(augmented, n, _make_elim_key(n), budget, track=False)
    relations = []
    for elem in basis:
        if all(p.is_zero for p in elem[:n]):
            relations.append(elem[n:])
    for rel in relations:
        check = VectorField.zero(n)
        for f, gen in zip(rel, spec.generators):
            check = check + gen.scale(f)
        assert check.is_zero, "internal error: relation does not annihilate the generators"
    return SyzygyBasis(source=spec, relations=tuple(relations))


def rank_exact(rows: Sequence[Sequence[Fraction]]) -> int:
    """Rank of a matrix of exact rationals (Gaussian elimination, no thresholds)."""
    m = [list(r) for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    row = 0
    for col in range(ncols):
        pivot = next((r for r in range(row, len(m)) if m[r][col]), None)
        if pivot is None:
            continue
        m[row], m[pivot] = m[pivot], m[row]
        pv = m[row][col]
        for r in range(row + 1, len(m)):
            if m[r][col]:
                f = m[r][col] / pv
                m[r] = [a - f * b for a, b in zip(m[r], m[row])]
        rank += 1
        row += 1
        if row == len(m):
            break
    return rank


def tangent_dim(spec: FoliationSpec, point: Sequence) -> int:
    """Dimension of the span of the generator values at a rational point."""
    pt = as_point(point, spec.nvars)
    if spec.k == 0:
        return 0
    return rank_exact([list(g(pt)) for g in spec.generators])


def fiber_dim(spec: FoliationSpec, point: Sequence, budget: Budget = DEFAULT_BUDGET) -> int:
    """k minus the rank of the syzygy generators evaluated at the point."""
    pt = as_point(point, spec.nvars)
    if spec.k == 0:
        return 0
    syz = syzygy_basis(spec, budget)
    if not syz.relations:
        return spec.k
    rows = [[p(pt) for p in rel] for rel in syz.relations]
    return spec.k - rank_exact(rows)


def isotropy_dim(spec: FoliationSpec, point: Sequence, budget: Budget = DEFAULT_BUDGET) -> int:
    """fiber_dim - tangent_dim; nonnegative."""
    d = fiber_dim(spec, point, budget) - tangent_dim(spec, point)
    assert d >= 0, "internal error: fiber dimension below tangent dimension"
    return d


def _det(mat: list[list[Poly]]) -> Poly:
    n = len(mat)
    if n == 1:
        return mat[0][0]
    nvars = mat[0][0].nvars
    out = Poly.zero(nvars)
    for j in range(n):
        entry = mat[0][j]
        if entry.is_zero:
            continue
        minor = [[row[c] for c in range(n) if c != j] for row in mat[1:]]
        term = entry * _det(minor)
        out = out + term if j % 2 == 0 else out - term
    return out


def singular_locus(spec: FoliationSpec) -> SingularLocusReport:
    """Generic rank of the generator matrix plus the minor ideal cutting out
    the locus where the rank drops.

    ``minor_ideal`` lists the nonzero r x r minors (r the generic rank) of
    the k x n coefficient matrix, in row/column enumeration order.  No
    radical or primary decomposition is attempted.
    """
    k, n = spec.k, spec.nvars
    if k == 0:
        return SingularLocusReport(generic_rank=0, minor_ideal=())
    matrix = [list(g.components) for g in spec.generators]
    for size in range(min(k, n), 0, -1):
        minors = []
        for rows in combinations(range(k), size):
            for cols in combinations(range(n), size):
                d = _det([[matrix[r][c] for c in cols] for r in rows])
                if not d.is_zero:
                    minors.append(d)
        if minors:
            return SingularLocusReport(generic_rank=size, minor_ideal=tuple(minors))
    return SingularLocusReport(generic_rank=0, minor_ideal=())


def minimal_local_generators(
    spec: FoliationSpec, point: Sequence, budget: Budget = DEFAULT_BUDGET
) -> tuple[int, ...]:
    """Greedy lowest-index set of generators whose fiber classes at the point
    form a basis.  Returned indices are 1-based (file order); the size equals
    the fiber dimension.
    """
    if spec.k < 1:
        raise ArityError("minimal_local_generators needs at least one generator")
    pt = as_point(point, spec.nvars)
    syz = syzygy_basis(spec, budget)
    base_rows = [[p(pt) for p in rel] for rel in syz.relations]
    k = spec.k
    target = fiber_dim(spec, pt, budget)
    picked: list[int] = []
    rows = list(base_rows)
    rank = rank_exact(rows)
    for i in range(k):
        if len(picked) == target:
            break
        candidate = rows + [[Fraction(1) if j == i else Fraction(0) for j in range(k)]]
        r = rank_exact(candidate)
        if r > rank:
            rows = candidate
            rank = r
            picked.append(i + 1)
    assert len(picked) == target, "internal error: independent subset smaller than fiber"
    return tuple(picked)
