"""Exact polynomial vector fields over the rationals.

Provides multivariate polynomials with arbitrary-precision rational
coefficients (:class:`Poly`), vector fields as tuples of coefficient
polynomials (:class:`VectorField`), finitely generated families of such
fields (:class:`FoliationSpec`), the Lie bracket, and a small textual
language for writing fields down.

Grammar (whitespace-insensitive)::

    expr := ['+'|'-'] term (('+'|'-') term)*
    term := poly '*' 'd'var | 'd'var
    poly := sums / products / powers of integer or rational literals
            ('p/q') and variables, '^' for exponents, parentheses allowed

Example: ``(x^2 - 1/2*y)*dx + 3*dy``.

All values in this module are immutable; no floating point enters the
symbolic layer.  Terms are kept in graded-reverse-lexicographic order so
equal polynomials have identical representations (and identical hashes).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

from .errors import ArityError, ParseError, UnknownVariableError

__all__ = [
    "Poly",
    "VectorField",
    "FoliationSpec",
    "parse_vector_field",
    "differentiate",
    "lie_bracket",
    "format_poly",
    "format_vector_field",
    "grevlex_key",
]


def grevlex_key(expt: tuple[int, ...]) -> tuple:
    """Sort key: bigger key = bigger monomial under grevlex."""
    return (sum(expt), tuple(-e for e in reversed(expt)))


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    raise TypeError(f"expected an exact rational coefficient, got {type(value).__name__}")


class Poly:
    """A multivariate polynomial over Q in ``nvars`` variables.

    ``terms`` is a tuple of ``(exponent_tuple, Fraction)`` pairs with no
    zero coefficients, sorted descending in grevlex order.
    """

    __slots__ = ("nvars", "terms", "_hash")

    def __init__(self, nvars: int, terms: Iterable[tuple[tuple[int, ...], Fraction]] = ()):
        if nvars < 1:
            raise ArityError("nvars must be positive")
        acc: dict[tuple[int, ...], Fraction] = {}
        for expt, coeff in terms:
            expt = tuple(expt)
            if len(expt) != nvars:
                raise ArityError(f"exponent vector {expt} has length {len(expt)}, expected {nvars}")
            if any(e < 0 or not isinstance(e, int) for e in expt):
                raise ArityError(f"exponents must be nonnegative integers, got {expt}")
            c = acc.get(expt, Fraction(0)) + _as_fraction(coeff)
            if c:
                acc[expt] = c
            elif expt in acc:
                del acc[expt]
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(
            self, "terms", tuple(sorted(acc.items(), key=lambda t: grevlex_key(t[0]), reverse=True))
        )
        object.__setattr__(self, "_hash", hash((nvars, self.terms)))

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Poly":
        return cls(nvars, ())

    @classmethod
    def constant(cls, value, nvars: int) -> "Poly":
        c = _as_fraction(value)
        if not c:
            return cls.zero(nvars)
        return cls(nvars, (((0,) * nvars, c),))

    @classmethod
    def variable(cls, index: int, nvars: int) -> "Poly":
        if not 0 <= index < nvars:
            raise ArityError(f"variable index {index} out of range for {nvars} variables")
        expt = tuple(1 if i == index else 0 for i in range(nvars))
        return cls(nvars, ((expt, Fraction(1)),))

    @classmethod
    def term(cls, nvars: int, expt: tuple[int, ...], coeff) -> "Poly":
        return cls(nvars, ((expt, coeff),))

    # -- queries -----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e, _ in self.terms)

    def constant_value(self) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        if not self.is_constant:
            raise ValueError("polynomial is not constant")
        return self.terms[0][1]

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if self.is_zero:
            return -1
        return max(sum(e) for e, _ in self.terms)

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "Poly | None":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ArityError("polynomials have different numbers of variables")
            return other
        if isinstance(other, (int, Fraction)):
            return Poly.constant(other, self.nvars)
        return None

    def __add__(self, other):
        p = self._coerce(other)
        if p is None:
            return NotImplemented
        return Poly(self.nvars, self.terms + p.terms)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, tuple((e, -c) for e, c in self.terms))

    def __sub__(self, other):
        p = self._coerce(other)
        if p is None:
            return NotImplemented
        return self + (-p)

    def __rsub__(self, other):
        p = self._coerce(other)
        if p is None:
            return NotImplemented
        return p + (-self)

    def __mul__(self, other):
        p = self._coerce(other)
        if p is None:
            return NotImplemented
        acc: dict[tuple[int, ...], Fraction] = {}
        for ea, ca in self.terms:
            for eb, cb in p.terms:
                key = tuple(x + y for x, y in zip(ea, eb))
                c = acc.get(key, Fraction(0)) + ca * cb
                if c:
                    acc[key] = c
                elif key in acc:
                    del acc[key]
        return Poly(self.nvars, acc.items())

    __rmul__ = __mul__

    def mul_term(self, expt: tuple[int, ...], coeff) -> "Poly":
        """Multiply by a single term coeff * x^expt."""
        c = _as_fraction(coeff)
        if not c:
            return Poly.zero(self.nvars)
        return Poly(
            self.nvars,
            tuple((tuple(a + b for a, b in zip(e, expt)), q * c) for e, q in self.terms),
        )

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Poly.constant(1, self.nvars)
        for _ in range(exponent):
            result = result * self
        return result

    def differentiate(self, var_index: int) -> "Poly":
        """Exact formal partial derivative with respect to variable ``var_index``."""
        if not 0 <= var_index < self.nvars:
            raise ArityError(f"variable index {var_index} out of range for {self.nvars} variables")
        out = []
        for expt, coeff in self.terms:
            e = expt[var_index]
            if e:
                new = list(expt)
                new[var_index] = e - 1
                out.append((tuple(new), coeff * e))
        return Poly(self.nvars, out)

    def __call__(self, point: Sequence):
        """Evaluate at a point; exact over rationals, float if coords are floats."""
        if len(point) != self.nvars:
            raise ArityError(f"point has {len(point)} coordinates, expected {self.nvars}")
        total = Fraction(0)
        for expt, coeff in self.terms:
            v = coeff
            for x, e in zip(point, expt):
                if e:
                    v = v * x**e
            total = total + v
        return total

    # -- identity ----------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly.constant(other, self.nvars)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return self._hash

    def __repr__(self):
        names = tuple(f"x{i}" for i in range(self.nvars))
        return f"Poly<{format_poly(self, names)}>"


class VectorField:
    """A polynomial vector field: component ``i`` multiplies d/dx_i."""

    __slots__ = ("components", "_hash")

    def __init__(self, components: Sequence[Poly]):
        components = tuple(components)
        if not components:
            raise ArityError("a vector field needs at least one component")
        n = components[0].nvars
        for p in components:
            if not isinstance(p, Poly):
                raise TypeError("components must be Poly instances")
            if p.nvars != n:
                raise ArityError("all components must share the same number of variables")
        if len(components) != n:
            raise ArityError(f"{len(components)} components for {n} variables")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "_hash", hash(components))

    def __setattr__(self, name, value):
        raise AttributeError("VectorField is immutable")

    @classmethod
    def zero(cls, nvars: int) -> "VectorField":
        return cls(tuple(Poly.zero(nvars) for _ in range(nvars)))

    @property
    def nvars(self) -> int:
        return self.components[0].nvars

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for p in self.components)

    def __add__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        if other.nvars != self.nvars:
            raise ArityError("vector fields have different numbers of variables")
        return VectorField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        return self + (-other)

    def __neg__(self):
        return VectorField(tuple(-p for p in self.components))

    def scale(self, factor) -> "VectorField":
        """Multiply every component by a Poly or exact rational."""
        if not isinstance(factor, Poly):
            factor = Poly.constant(factor, self.nvars)
        return VectorField(tuple(factor * p for p in self.components))

    def apply_to(self, f: Poly) -> Poly:
        """Directional derivative X(f) = sum_i X_i * df/dx_i."""
        if f.nvars != self.nvars:
            raise ArityError("function and field have different numbers of variables")
        out = Poly.zero(self.nvars)
        for i, comp in enumerate(self.components):
            out = out + comp * f.differentiate(i)
        return out

    def __call__(self, point: Sequence) -> tuple:
        return tuple(p(point) for p in self.components)

    def __eq__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return self._hash

    def __repr__(self):
        names = tuple(f"x{i}" for i in range(self.nvars))
        return f"VectorField<{format_vector_field(self, names)}>"


class FoliationSpec:
    """An ordered, finitely generated family of polynomial vector fields.

    The module generated by ``generators`` over the polynomial ring in
    ``var_names`` is the object all other operations work with.  An empty
    generator list is legal and denotes the zero module.
    """

    __slots__ = ("nvars", "var_names", "generators", "_hash")

    def __init__(self, var_names: Sequence[str], generators: Sequence[VectorField] = ()):
        var_names = tuple(var_names)
        if not var_names:
            raise ArityError("at least one variable is required")
        if len(set(var_names)) != len(var_names):
            raise ParseError("variable names must be distinct")
        for name in var_names:
            if not name.isidentifier():
                raise ParseError(f"invalid variable name '{name}'")
        generators = tuple(generators)
        for g in generators:
            if not isinstance(g, VectorField):
                raise TypeError("generators must be VectorField instances")
            if g.nvars != len(var_names):
                raise ArityError(
                    f"generator has {g.nvars} components, expected {len(var_names)}"
                )
        object.__setattr__(self, "nvars", len(var_names))
        object.__setattr__(self, "var_names", var_names)
        object.__setattr__(self, "generators", generators)
        object.__setattr__(self, "_hash", hash((var_names, generators)))

    def __setattr__(self, name, value):
        raise AttributeError("FoliationSpec is immutable")

    @property
    def k(self) -> int:
        """Number of generators."""
        return len(self.generators)

    def __eq__(self, other):
        if not isinstance(other, FoliationSpec):
            return NotImplemented
        return self.var_names == other.var_names and self.generators == other.generators

    def __hash__(self):
        return self._hash

    def __repr__(self):
        gens = "; ".join(format_vector_field(g, self.var_names) for g in self.generators)
        return f"FoliationSpec(vars={' '.join(self.var_names)}; {gens or '0'})"


def differentiate(p: Poly, var_index: int) -> Poly:
    """Exact formal partial derivative of ``p`` with respect to variable ``var_index``."""
    return p.differentiate(var_index)


def lie_bracket(x: VectorField, y: VectorField) -> VectorField:
    """Lie bracket [X,Y]^i = sum_j X^j dY^i/dx_j - Y^j dX^i/dx_j, exact over Q."""
    if x.nvars != y.nvars:
        raise ArityError("vector fields have different numbers of variables")
    n = x.nvars
    comps = []
    for i in range(n):
        acc = Poly.zero(n)
        for j in range(n):
            acc = acc + x.components[j] * y.components[i].differentiate(j)
            acc = acc - y.components[j] * x.components[i].differentiate(j)
        comps.append(acc)
    return VectorField(comps)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_OPERATORS = set("+-*/^()")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(("int", text[i:j], i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
        elif ch in _OPERATORS:
            tokens.append((ch, ch, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", column=i + 1)
    tokens.append(("end", "", n))
    return tokens


class _Val:
    """Intermediate parse value: a scalar polynomial plus differential parts.

    ``d`` maps a variable index i to the polynomial coefficient of dx_i.
    """

    __slots__ = ("p", "d")

    def __init__(self, p: Poly, d: dict[int, Poly] | None = None):
        self.p = p
        self.d = d or {}


class _Parser:
    def __init__(self, text: str, var_names: Sequence[str]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.nvars = len(var_names)
        self.var_index = {name: i for i, name in enumerate(var_names)}

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.take()
        if tok[0] != kind:
            raise ParseError(
                f"expected {kind!r} but found {tok[1] or 'end of input'!r}", column=tok[2] + 1
            )
        return tok

    # value algebra -------------------------------------------------------

    def _zero(self) -> Poly:
        return Poly.zero(self.nvars)

    def _neg(self, v: _Val) -> _Val:
        return _Val(-v.p, {i: -q for i, q in v.d.items()})

    def _add(self, a: _Val, b: _Val) -> _Val:
        d = dict(a.d)
        for i, q in b.d.items():
            d[i] = d.get(i, self._zero()) + q
        return _Val(a.p + b.p, d)

    def _mul(self, a: _Val, b: _Val, op_col: int) -> _Val:
        if a.d and b.d:
            raise ParseError("product of two differentials is not a vector field", column=op_col)
        if b.d:
            a, b = b, a
        # now b is purely scalar
        return _Val(a.p * b.p, {i: q * b.p for i, q in a.d.items()})

    def _div(self, a: _Val, b: _Val, op_col: int) -> _Val:
        if b.d:
            raise ParseError("cannot divide by a differential", column=op_col)
        if not b.p.is_constant:
            raise ParseError("division only by nonzero rational constants", column=op_col)
        c = b.p.constant_value()
        if not c:
            raise ParseError("division by zero", column=op_col)
        inv = Fraction(1) / c
        return _Val(a.p * inv, {i: q * inv for i, q in a.d.items()})

    def _pow(self, a: _Val, exponent: int, op_col: int) -> _Val:
        if a.d:
            if exponent == 1:
                return a
            raise ParseError("cannot raise a differential to a power", column=op_col)
        return _Val(a.p**exponent)

    # grammar -------------------------------------------------------------

    def parse_atom(self) -> _Val:
        kind, text, pos = self.take()
        if kind == "int":
            return _Val(Poly.constant(int(text), self.nvars))
        if kind == "name":
            if text in self.var_index:
                return _Val(Poly.variable(self.var_index[text], self.nvars))
            if len(text) > 1 and text[0] == "d" and text[1:] in self.var_index:
                i = self.var_index[text[1:]]
                return _Val(self._zero(), {i: Poly.constant(1, self.nvars)})
            raise UnknownVariableError(text, column=pos + 1)
        if kind == "(":
            val = self.parse_sum()
            self.expect(")")
            return val
        raise ParseError(f"unexpected token {text or 'end of input'!r}", column=pos + 1)

    def parse_power(self) -> _Val:
        base = self.parse_atom()
        if self.peek()[0] == "^":
            _, _, op_pos = self.take()
            tok = self.expect("int")
            base = self._pow(base, int(tok[1]), op_pos + 1)
        return base

    def parse_product(self) -> _Val:
        val = self.parse_power()
        while self.peek()[0] in ("*", "/"):
            op, _, op_pos = self.take()
            rhs = self.parse_power()
            if op == "*":
                val = self._mul(val, rhs, op_pos + 1)
            else:
                val = self._div(val, rhs, op_pos + 1)
        return val

    def parse_sum(self) -> _Val:
        sign = 1
        while self.peek()[0] in ("+", "-"):
            if self.take()[0] == "-":
                sign = -sign
        val = self.parse_product()
        if sign < 0:
            val = self._neg(val)
        while self.peek()[0] in ("+", "-"):
            op, _, _ = self.take()
            rhs = self.parse_product()
            val = self._add(val, rhs if op == "+" else self._neg(rhs))
        return val


def parse_vector_field(text: str, var_names: Sequence[str]) -> VectorField:
    """Parse ``text`` into the vector field it denotes over ``var_names``.

    Every top-level term must carry a differential direction (``dx``,
    ``3*dy``, ``(x^2-1)*dx`` ...).  Raises :class:`ParseError` with a
    1-based column on malformed input, :class:`UnknownVariableError` for
    undeclared identifiers.
    """
    parser = _Parser(text, var_names)
    n = parser.nvars
    acc = _Val(Poly.zero(n))
    sign = 1
    if parser.peek()[0] in ("+", "-"):
        while parser.peek()[0] in ("+", "-"):
            if parser.take()[0] == "-":
                sign = -sign
    while True:
        term_pos = parser.peek()[2]
        if parser.peek()[0] == "end":
            raise ParseError("empty expression" if not acc.d else "trailing operator",
                             column=term_pos + 1)
        val = parser.parse_product()
        if not val.d:
            raise ParseError(
                "term has no differential direction (expected '*d<var>')", column=term_pos + 1
            )
        if not val.p.is_zero:
            raise ParseError(
                "term mixes scalar and differential parts", column=term_pos + 1
            )
        acc = parser._add(acc, val if sign > 0 else parser._neg(val))
        kind, text_, pos = parser.peek()
        if kind == "end":
            break
        if kind in ("+", "-"):
            parser.take()
            sign = 1 if kind == "+" else -1
            continue
        raise ParseError(f"unexpected token {text_!r}", column=pos + 1)
    return VectorField(tuple(acc.d.get(i, Poly.zero(n)) for i in range(n)))


# ---------------------------------------------------------------------------
# Printing (canonical; parse(format(X)) == X exactly)
# ---------------------------------------------------------------------------


def _format_monomial(expt: tuple[int, ...], var_names: Sequence[str]) -> str:
    parts = []
    for name, e in zip(var_names, expt):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


def format_poly(p: Poly, var_names: Sequence[str]) -> str:
    """Canonical text form of a polynomial (terms in grevlex-descending order)."""
    if p.is_zero:
        return "0"
    out = []
    for expt, coeff in p.terms:
        mono = _format_monomial(expt, var_names)
        mag = abs(coeff)
        if not mono:
            body = str(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{mag}*{mono}"
        if not out:
            out.append(body if coeff > 0 else f"-{body}")
        else:
            out.append(f" + {body}" if coeff > 0 else f" - {body}")
    return "".join(out)


def format_vector_field(x: VectorField, var_names: Sequence[str]) -> str:
    """Canonical text form of a vector field; the zero field prints as ``0*d<var>``."""
    pieces = []
    for i, p in enumerate(x.components):
        if p.is_zero:
            continue
        dvar = f"d{var_names[i]}"
        if len(p.terms) > 1:
            pieces.append(f"({format_poly(p, var_names)})*{dvar}")
        else:
            expt, coeff = p.terms[0]
            mono = _format_monomial(expt, var_names)
            mag = abs(coeff)
            if mono:
                body = f"{mono}*{dvar}" if mag == 1 else f"{mag}*{mono}*{dvar}"
            else:
                body = dvar if mag == 1 else f"{mag}*{dvar}"
            pieces.append(body if coeff > 0 else f"-{body}")
    if not pieces:
        return f"0*d{var_names[0]}"
    out = pieces[0]
    for s in pieces[1:]:
        out += f" - {s[1:]}" if s.startswith("-") else f" + {s}"
    return out
