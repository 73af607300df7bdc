"""Flows of generator combinations and the parametrized chart they induce.

The only integrator is classical fixed-step 4th-order Runge-Kutta
(reproducibility beats speed at this scale).  A duration t is split into
ceil(|t|/h) steps: full steps of the configured size plus one remainder
step, signed.  Per combined field the whole RK4 step is compiled to a
Python function with the rational coefficients folded in as float
constants, so repeated flows of the same field are cheap; compilation is
memoized.

The first-variation system (point, linearization) shares the same
kernel: the linearization v evolves by v' = J(x(t)) v with J the matrix
of partial derivatives of the combined field.

Randomness (leaf sampling, sample-point generation) comes from a
xorshift64* generator so that sequences are reproducible from a seed
across platforms and implementations:

    state ^= state >> 12
    state ^= (state << 25) mod 2^64
    state ^= state >> 27
    output = (state * 0x2545F4914F6CDD1D) mod 2^64

and uniform doubles in [0, 1) are ``(output >> 11) * 2^-53``.  A zero
seed is replaced by 0x9E3779B97F4A7C15.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .errors import ArityError, BlowUpError, BudgetError, PreconditionError
from .modalg import as_point, tangent_dim
from .vfparse import FoliationSpec

__all__ = [
    "NumericOptions",
    "DEFAULT_OPTIONS",
    "FlowStep",
    "FlowWord",
    "FlowChart",
    "Transversal",
    "ChartRankEntry",
    "ChartRankReport",
    "FlowBoxReport",
    "XorShift64Star",
    "flow",
    "flow_jet",
    "word_inverse",
    "word_compose",
    "leaf_sample",
    "chart_at",
    "chart_rank_check",
    "flow_box",
    "numerical_rank",
    "random_rational_points",
]


@dataclass(frozen=True)
class NumericOptions:
    """Knobs for the numerical kernels; all strictly positive."""

    step_size: float = 1e-3
    max_steps: int = 1_000_000
    fd_epsilon: float = 1e-5
    rank_rel_threshold: float = 1e-8
    domain_bound: float = 1e10

    def __post_init__(self):
        for name in ("step_size", "max_steps", "fd_epsilon", "rank_rel_threshold", "domain_bound"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_OPTIONS = NumericOptions()


class XorShift64Star:
    """Seeded deterministic generator (xorshift64*, constants in module docs)."""

    _MASK = (1 << 64) - 1
    _MULT = 0x2545F4914F6CDD1D
    _ZERO_SEED = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        s = int(seed) & self._MASK
        self._state = s if s else self._ZERO_SEED

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & self._MASK
        x ^= x >> 27
        self._state = x
        return (x * self._MULT) & self._MASK

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def symmetric(self) -> float:
        """Uniform double in [-1, 1)."""
        return 2.0 * self.uniform() - 1.0

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        return lo + int(self.uniform() * (hi - lo + 1))


def random_rational_points(
    rng: XorShift64Star, nvars: int, count: int, denominator: int = 4, max_numer: int = 8
) -> list[tuple[Fraction, ...]]:
    """Random rational points with coordinates m/denominator, |m| <= max_numer."""
    pts = []
    for _ in range(count):
        pts.append(
            tuple(
                Fraction(rng.randint(-max_numer, max_numer), denominator)
                for _ in range(nvars)
            )
        )
    return pts


@dataclass(frozen=True)
class FlowStep:
    """One flow of the combined field sum_i coeffs[i] * X_i for ``duration``."""

    coeffs: tuple[Fraction, ...]
    duration: float


class FlowWord:
    """A finite composition of generator-combination flows.

    Steps act in list order: the first step is applied first.  The empty
    word is the identity.
    """

    __slots__ = ("spec", "steps")

    def __init__(self, spec: FoliationSpec, steps: Sequence = ()):
        norm = []
        for step in steps:
            if isinstance(step, FlowStep):
                coeffs, duration = step.coeffs, step.duration
            else:
                coeffs, duration = step
            coeffs = tuple(Fraction(c) for c in coeffs)
            if len(coeffs) != spec.k:
                raise ArityError(
                    f"step has {len(coeffs)} coefficients, expected {spec.k}"
                )
            norm.append(FlowStep(coeffs, float(duration)))
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "steps", tuple(norm))

    def __setattr__(self, name, value):
        raise AttributeError("FlowWord is immutable")

    def __len__(self) -> int:
        return len(self.steps)

    def __eq__(self, other):
        if not isinstance(other, FlowWord):
            return NotImplemented
        return self.spec == other.spec and self.steps == other.steps

    def __hash__(self):
        return hash((self.spec, self.steps))

    def __repr__(self):
        body = "; ".join(
            ",".join(str(c) for c in s.coeffs) + f"@{s.duration:g}" for s in self.steps
        )
        return f"FlowWord[{body}]"


def word_inverse(word: FlowWord) -> FlowWord:
    """Reversed steps with negated durations (one-parameter group inverses)."""
    return FlowWord(
        word.spec, tuple(FlowStep(s.coeffs, -s.duration) for s in reversed(word.steps))
    )


def word_compose(w1: FlowWord, w2: FlowWord) -> FlowWord:
    """The word acting as w1 after w2 (function-composition order):
    flow(word_compose(w1, w2), x) == flow(w1, flow(w2, x)).
    """
    if w1.spec != w2.spec:
        raise ArityError("words are built over different specs")
    return FlowWord(w1.spec, w2.steps + w1.steps)


# ---------------------------------------------------------------------------
# Compiled RK4 kernels
# ---------------------------------------------------------------------------


def _combined_terms(spec: FoliationSpec, coeffs: tuple) -> list[list[tuple[tuple[int, ...], float]]]:
    """Per component: float-folded terms of the field sum_i coeffs[i] * X_i."""
    out = []
    for j in range(spec.nvars):
        acc: dict[tuple[int, ...], object] = {}
        for c, g in zip(coeffs, spec.generators):
            if not c:
                continue
            for expt, q in g.components[j].terms:
                acc[expt] = acc.get(expt, 0) + c * q
        terms = [(e, float(v)) for e, v in sorted(acc.items()) if float(v) != 0.0]
        out.append(terms)
    return out


def _diff_terms(terms, var: int):
    out = []
    for expt, c in terms:
        e = expt[var]
        if e:
            new = list(expt)
            new[var] = e - 1
            out.append((tuple(new), c * e))
    return out


def _terms_src(terms, names: list[str]) -> str:
    parts = []
    for expt, c in terms:
        factors = [repr(c)]
        for name, e in zip(names, expt):
            factors.extend([name] * e)
        parts.append("*".join(factors))
    return " + ".join(parts) if parts else "0.0"


def _compile(src: str, fn_name: str):
    ns: dict = {}
    exec(compile(src, f"<generated {fn_name}>", "exec"), ns)
    return ns[fn_name]


@lru_cache(maxsize=1024)
def _flow_step_fn(spec: FoliationSpec, coeffs: tuple):
    """Compiled single RK4 step for the combined field: f(state, h) -> tuple."""
    comb = _combined_terms(spec, coeffs)
    n = spec.nvars
    lines = ["def _step(state, h):"]
    names = [f"x{j}" for j in range(n)]
    for j in range(n):
        lines.append(f"    x{j} = state[{j}]")
    stage_points = [names]
    for s, scale in ((1, "0.5*h"), (2, "0.5*h"), (3, "h")):
        pv = stage_points[-1]
        for j in range(n):
            lines.append(f"    k{s}_{j} = " + _terms_src(comb[j], pv))
        nxt = [f"p{s}_{j}" for j in range(n)]
        for j in range(n):
            lines.append(f"    p{s}_{j} = x{j} + {scale}*k{s}_{j}")
        stage_points.append(nxt)
    pv = stage_points[-1]
    for j in range(n):
        lines.append(f"    k4_{j} = " + _terms_src(comb[j], pv))
    outs = ", ".join(
        f"x{j} + h*(k1_{j} + 2.0*k2_{j} + 2.0*k3_{j} + k4_{j})/6.0" for j in range(n)
    )
    lines.append(f"    return ({outs}{',' if n == 1 else ''})")
    return _compile("\n".join(lines), "_step")


@lru_cache(maxsize=512)
def _var_step_fn(spec: FoliationSpec, coeffs: tuple):
    """Compiled RK4 step for the first-variation system.

    State layout: n point coordinates followed by the n x n linearization
    in row-major order.
    """
    comb = _combined_terms(spec, coeffs)
    jac = [[_diff_terms(comb[j], m) for m in range(spec.nvars)] for j in range(spec.nvars)]
    n = spec.nvars
    lines = ["def _step(state, h):"]
    for j in range(n):
        lines.append(f"    x{j} = state[{j}]")
    for j in range(n):
        for l in range(n):
            lines.append(f"    v{j}_{l} = state[{n + j * n + l}]")

    def emit_stage(s: int, pv: list[str], vv):
        for j in range(n):
            lines.append(f"    k{s}x{j} = " + _terms_src(comb[j], pv))
        for j in range(n):
            for m in range(n):
                lines.append(f"    j{s}_{j}_{m} = " + _terms_src(jac[j][m], pv))
        for j in range(n):
            for l in range(n):
                prods = " + ".join(f"j{s}_{j}_{m}*{vv(m, l)}" for m in range(n))
                lines.append(f"    k{s}v{j}_{l} = {prods}")

    emit_stage(1, [f"x{j}" for j in range(n)], lambda m, l: f"v{m}_{l}")
    for s, scale in ((2, "0.5*h"), (3, "0.5*h"), (4, "h")):
        prev = s - 1
        for j in range(n):
            lines.append(f"    p{s}x{j} = x{j} + {scale}*k{prev}x{j}")
        for j in range(n):
            for l in range(n):
                lines.append(f"    p{s}v{j}_{l} = v{j}_{l} + {scale}*k{prev}v{j}_{l}")
        emit_stage(s, [f"p{s}x{j}" for j in range(n)], lambda m, l, s=s: f"p{s}v{m}_{l}")
    outs = [
        f"x{j} + h*(k1x{j} + 2.0*k2x{j} + 2.0*k3x{j} + k4x{j})/6.0" for j in range(n)
    ]
    outs += [
        f"v{j}_{l} + h*(k1v{j}_{l} + 2.0*k2v{j}_{l} + 2.0*k3v{j}_{l} + k4v{j}_{l})/6.0"
        for j in range(n)
        for l in range(n)
    ]
    lines.append(f"    return ({', '.join(outs)})")
    return _compile("\n".join(lines), "_step")


def _check_box(state, bound: float, t: float):
    for v in state:
        if not (-bound <= v <= bound):  # also catches NaN
            raise BlowUpError("trajectory left the domain box", time=t)


def _segment(
    duration: float,
    state: tuple,
    opts: NumericOptions,
    t0: float,
    step_fn,
) -> tuple:
    if duration == 0.0:
        return state
    h = opts.step_size
    total = abs(duration)
    sign = 1.0 if duration > 0 else -1.0
    nfull = int(total / h)
    rem = total - nfull * h
    if nfull + 1 > opts.max_steps:
        raise BudgetError(f"flow would need more than {opts.max_steps} steps")
    bound = opts.domain_bound
    t = 0.0
    for _ in range(nfull):
        state = step_fn(state, sign * h)
        t += h
        _check_box(state, bound, t0 + sign * t)
    if rem > 1e-15:
        state = step_fn(state, sign * rem)
        t += rem
        _check_box(state, bound, t0 + sign * t)
    return state


def _flow_segment(spec, coeffs, duration, x, opts, t0=0.0) -> tuple:
    return _segment(duration, tuple(x), opts, t0, _flow_step_fn(spec, tuple(coeffs)))


def _flow_segment_jet(spec, coeffs, duration, x, v_flat, opts, t0=0.0) -> tuple:
    state = tuple(x) + tuple(v_flat)
    out = _segment(duration, state, opts, t0, _var_step_fn(spec, tuple(coeffs)))
    n = spec.nvars
    return out[:n], out[n:]


def _check_word(spec: FoliationSpec, word: FlowWord):
    if word.spec != spec:
        raise ArityError("word was built over a different spec")


def flow(
    spec: FoliationSpec, word: FlowWord, x0: Sequence, opts: NumericOptions = DEFAULT_OPTIONS
) -> tuple[float, ...]:
    """Endpoint of the word applied to x0; the empty word returns x0 exactly."""
    _check_word(spec, word)
    x = tuple(float(v) for v in x0)
    if len(x) != spec.nvars:
        raise ArityError(f"point has {len(x)} coordinates, expected {spec.nvars}")
    t_acc = 0.0
    for step in word.steps:
        x = _flow_segment(spec, step.coeffs, step.duration, x, opts, t0=t_acc)
        t_acc += step.duration
    return x


def flow_jet(
    spec: FoliationSpec, word: FlowWord, x0: Sequence, opts: NumericOptions = DEFAULT_OPTIONS
) -> tuple[tuple[float, ...], tuple[tuple[float, ...], ...]]:
    """Endpoint plus the derivative of the word's map at x0.

    The linearization is integrated alongside the point (first-variation
    system), which composes correctly across steps; returned row-major.
    """
    _check_word(spec, word)
    n = spec.nvars
    x = tuple(float(v) for v in x0)
    if len(x) != n:
        raise ArityError(f"point has {len(x)} coordinates, expected {n}")
    v = tuple(1.0 if i == j else 0.0 for i in range(n) for j in range(n))
    t_acc = 0.0
    for step in word.steps:
        x, v = _flow_segment_jet(spec, step.coeffs, step.duration, x, v, opts, t0=t_acc)
        t_acc += step.duration
    rows = tuple(tuple(v[i * n : (i + 1) * n]) for i in range(n))
    return x, rows


def leaf_sample(
    spec: FoliationSpec,
    x0: Sequence,
    n_steps: int,
    rng_seed: int,
    opts: NumericOptions = DEFAULT_OPTIONS,
) -> list[tuple[float, ...]]:
    """Random walk along the generated flows; returns the visited points.

    Per step the combination coefficients are uniform on [-1,1]^k and the
    duration uniform on [0, 0.1]; all randomness comes from the seeded
    xorshift64* generator, so output is reproducible.
    """
    rng = XorShift64Star(rng_seed)
    x = tuple(float(v) for v in x0)
    if len(x) != spec.nvars:
        raise ArityError(f"point has {len(x)} coordinates, expected {spec.nvars}")
    points = [x]
    for _ in range(n_steps):
        coeffs = tuple(rng.symmetric() for _ in range(spec.k))
        duration = 0.1 * rng.uniform()
        x = _flow_segment(spec, coeffs, duration, x, opts)
        points.append(x)
    return points


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowChart:
    """The parametrized chart R^k x M with source (y,x) -> x and target
    (y,x) -> time-1 flow of sum_i y_i X_i from x.
    """

    spec: FoliationSpec
    base_point: tuple[float, ...]
    k: int
    opts: NumericOptions = field(default=DEFAULT_OPTIONS)

    def source(self, y: Sequence, x: Sequence) -> tuple[float, ...]:
        self._check_y(y)
        return tuple(float(v) for v in x)

    def target(self, y: Sequence, x: Sequence | None = None) -> tuple[float, ...]:
        self._check_y(y)
        pt = self.base_point if x is None else tuple(float(v) for v in x)
        coeffs = tuple(float(c) for c in y)
        return _flow_segment(self.spec, coeffs, 1.0, pt, self.opts)

    def _check_y(self, y: Sequence):
        if len(y) != self.k:
            raise ArityError(f"parameter has {len(y)} entries, expected {self.k}")


def chart_at(
    spec: FoliationSpec, x0: Sequence, opts: NumericOptions = DEFAULT_OPTIONS
) -> FlowChart:
    """Chart centered at x0 with one parameter per generator."""
    pt = tuple(float(v) for v in x0)
    if len(pt) != spec.nvars:
        raise ArityError(f"point has {len(pt)} coordinates, expected {spec.nvars}")
    return FlowChart(spec=spec, base_point=pt, k=spec.k, opts=opts)


def _param_jacobian(chart: FlowChart, x: Sequence) -> list[list[float]]:
    """d(target)/dy at (0, x) by central differences; n x k, column per parameter."""
    eps = chart.opts.fd_epsilon
    n = chart.spec.nvars
    cols = []
    for i in range(chart.k):
        yp = tuple(eps if j == i else 0.0 for j in range(chart.k))
        ym = tuple(-eps if j == i else 0.0 for j in range(chart.k))
        fp = chart.target(yp, x)
        fm = chart.target(ym, x)
        cols.append([(a - b) / (2.0 * eps) for a, b in zip(fp, fm)])
    return [[cols[i][j] for i in range(chart.k)] for j in range(n)]


@dataclass(frozen=True)
class ChartRankEntry:
    point: tuple[Fraction, ...]
    rank: int
    tangent: int

    @property
    def match(self) -> bool:
        return self.rank == self.tangent


@dataclass(frozen=True)
class ChartRankReport:
    entries: tuple[ChartRankEntry, ...]
    ok: bool

    @property
    def mismatches(self) -> tuple[ChartRankEntry, ...]:
        return tuple(e for e in self.entries if not e.match)


def chart_rank_check(
    chart: FlowChart, x0: Sequence, samples: Sequence[Sequence] = ()
) -> ChartRankReport:
    """Check rank d(target)/dy|_(0,x) == tangent dimension at rational points.

    ``x0`` is checked first, then every point in ``samples``.  Points must
    be rational so the tangent dimension is exact.
    """
    spec = chart.spec
    points = [as_point(x0, spec.nvars)] + [as_point(p, spec.nvars) for p in samples]
    entries = []
    for pt in points:
        jac = _param_jacobian(chart, tuple(float(c) for c in pt))
        rank = numerical_rank(jac, chart.opts.rank_rel_threshold)
        entries.append(ChartRankEntry(point=pt, rank=rank, tangent=tangent_dim(spec, pt)))
    return ChartRankReport(entries=tuple(entries), ok=all(e.match for e in entries))


# ---------------------------------------------------------------------------
# Flow-box map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Transversal:
    """Affine hyperplane: base point plus n-1 direction vectors."""

    point: tuple[float, ...]
    directions: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class FlowBoxReport:
    jacobian: tuple[tuple[float, ...], ...]
    invertible: bool


def _default_transversal(spec: FoliationSpec, x0: tuple, value: tuple) -> Transversal:
    # coordinate hyperplane dropping the axis where the field is largest
    drop = max(range(spec.nvars), key=lambda i: abs(value[i]))
    dirs = tuple(
        tuple(1.0 if i == j else 0.0 for i in range(spec.nvars))
        for j in range(spec.nvars)
        if j != drop
    )
    return Transversal(point=tuple(float(v) for v in x0), directions=dirs)


def flow_box(
    spec: FoliationSpec,
    gen_index: int,
    x0: Sequence,
    transversal: Transversal | None = None,
    opts: NumericOptions = DEFAULT_OPTIONS,
) -> FlowBoxReport:
    """Jacobian at (t,v)=(0,x0) of h(t,v) = (time-t flow of the chosen
    generator started on the transversal), with an invertibility verdict.

    ``gen_index`` is 1-based.  Column 0 differentiates in t and
    approximates the generator value at x0; the remaining columns are the
    transversal directions.
    """
    if not 1 <= gen_index <= spec.k:
        raise ArityError(f"generator index {gen_index} out of range 1..{spec.k}")
    gen = spec.generators[gen_index - 1]
    n = spec.nvars
    exact = all(isinstance(c, (int, Fraction)) for c in x0)
    if exact:
        value = gen(as_point(x0, n))
        if all(v == 0 for v in value):
            raise PreconditionError("the chosen generator vanishes at the base point")
    pt = tuple(float(v) for v in x0)
    if len(pt) != n:
        raise ArityError(f"point has {len(pt)} coordinates, expected {n}")
    fvalue = gen(pt)
    if not exact and max(abs(v) for v in fvalue) < 1e-12:
        raise PreconditionError("the chosen generator vanishes at the base point")
    if transversal is None:
        transversal = _default_transversal(spec, pt, fvalue)
    if len(transversal.directions) != n - 1:
        raise ArityError(f"transversal needs {n - 1} direction vectors")
    _require_on_transversal(pt, transversal)

    eps = opts.fd_epsilon
    coeffs = tuple(
        Fraction(1) if i == gen_index - 1 else Fraction(0) for i in range(spec.k)
    )
    cols = []
    fp = _flow_segment(spec, coeffs, eps, pt, opts)
    fm = _flow_segment(spec, coeffs, -eps, pt, opts)
    cols.append([(a - b) / (2.0 * eps) for a, b in zip(fp, fm)])
    for d in transversal.directions:
        if len(d) != n:
            raise ArityError("transversal direction has wrong length")
        pp = tuple(a + eps * b for a, b in zip(pt, d))
        pm = tuple(a - eps * b for a, b in zip(pt, d))
        # time-0 flow is the identity, so this reproduces the direction exactly
        cols.append([(a - b) / (2.0 * eps) for a, b in zip(pp, pm)])
    jac = tuple(tuple(cols[i][j] for i in range(n)) for j in range(n))
    invertible = numerical_rank(jac, opts.rank_rel_threshold) == n
    return FlowBoxReport(jacobian=jac, invertible=invertible)


def _require_on_transversal(pt: tuple, transversal: Transversal, tol: float = 1e-9):
    r = [a - b for a, b in zip(pt, transversal.point)]
    dirs = transversal.directions
    if dirs:
        import numpy as np

        d = np.array(dirs, dtype=float).T
        coeffs, *_ = np.linalg.lstsq(d, np.array(r, dtype=float), rcond=None)
        residual = np.array(r) - d @ coeffs
        err = float(max(abs(residual))) if residual.size else 0.0
    else:
        err = max(abs(v) for v in r) if r else 0.0
    if err > tol:
        raise PreconditionError("base point does not lie on the transversal")


# ---------------------------------------------------------------------------
# Numerical rank
# ---------------------------------------------------------------------------


def numerical_rank(matrix: Sequence[Sequence[float]], rel_threshold: float = 1e-8) -> int:
    """Rank by pivoted elimination; pivots below rel_threshold * (largest
    pivot) count as zero.  An exactly zero matrix has rank 0.
    """
    a = [list(map(float, row)) for row in matrix]
    if not a or not a[0]:
        return 0
    nr, nc = len(a), len(a[0])
    threshold = None
    r = 0
    while r < min(nr, nc):
        best, bi, bj = 0.0, r, r
        for i in range(r, nr):
            for j in range(r, nc):
                v = abs(a[i][j])
                if v > best:
                    best, bi, bj = v, i, j
        if threshold is None:
            if best == 0.0:
                return 0
            threshold = rel_threshold * best
        if best < threshold:
            break
        a[r], a[bi] = a[bi], a[r]
        for row in a:
            row[r], row[bj] = row[bj], row[r]
        pv = a[r][r]
        for i in range(r + 1, nr):
            if a[i][r]:
                f = a[i][r] / pv
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        r += 1
    return r
