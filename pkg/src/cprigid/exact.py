"""Exact rationals, rational functions of one symbol ``m``, and small dense
exact linear algebra.

Rationals are :class:`fractions.Fraction`.  Polynomials are stored densely as
tuples of Fractions, lowest degree first, with no trailing zeros.
"""

from __future__ import annotations

from fractions import Fraction
from functools import reduce
from math import gcd, lcm
from typing import Iterable, Sequence, Union

Rat = Fraction
Number = Union[int, Fraction]

__all__ = [
    "Rat",
    "RatFn",
    "RatMatrix",
    "PoleError",
    "SingularMatrixError",
    "solve_linear",
    "poly_str",
]


class PoleError(ZeroDivisionError):
    """A rational function was evaluated at a root of its denominator."""


class SingularMatrixError(ZeroDivisionError):
    """Elimination met an identically vanishing pivot column."""

    def __init__(self, column: int):
        super().__init__(f"singular matrix: no nonzero pivot in column {column}")
        self.column = column


# ---------------------------------------------------------------------------
# dense polynomial helpers

Poly = tuple
_ONE: Poly = (Fraction(1),)


def _trim(c: Iterable[Fraction]) -> Poly:
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _padd(a: Poly, b: Poly) -> Poly:
    n = max(len(a), len(b))
    return _trim((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n))


def _pneg(a: Poly) -> Poly:
    return tuple(-x for x in a)


def _pmul(a: Poly, b: Poly) -> Poly:
    if not a or not b:
        return ()
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _trim(out)


def _pscale(a: Poly, s: Fraction) -> Poly:
    if s == 0:
        return ()
    return tuple(x * s for x in a)


def _pdivmod(a: Poly, b: Poly) -> tuple[Poly, Poly]:
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    r = list(a)
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    lb = b[-1]
    while len(r) >= len(b) and r:
        shift = len(r) - len(b)
        f = r[-1] / lb
        q[shift] = f
        for i, y in enumerate(b):
            r[shift + i] -= f * y
        r = list(_trim(r))
    return _trim(q), tuple(r)


def _pmonic(a: Poly) -> Poly:
    return _pscale(a, 1 / a[-1]) if a else ()


def _pgcd(a: Poly, b: Poly) -> Poly:
    while b:
        a, b = b, _pdivmod(a, b)[1]
    return _pmonic(a)


def _peval(a: Poly, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(a):
        acc = acc * x + c
    return acc


def _pint(a: Poly) -> tuple[Fraction, tuple[int, ...]]:
    """Write ``a = s * p`` with ``p`` primitive integer, leading coeff > 0."""
    if not a:
        return 0, ()
    den = reduce(lcm, (x.denominator for x in a), 1)
    ints = [int(x * den) for x in a]
    content = reduce(gcd, (abs(x) for x in ints))
    if ints[-1] < 0:
        content = -content
    return Fraction(content, den), tuple(x // content for x in ints)


def poly_str(coeffs: Sequence[int], var: str = "m") -> str:
    """Render integer coefficients (lowest first) as ``3*m^2 - m + 2``."""
    terms = []
    for k in range(len(coeffs) - 1, -1, -1):
        c = coeffs[k]
        if c == 0:
            continue
        mag = abs(c)
        if k == 0:
            body = str(mag)
        else:
            mono = var if k == 1 else f"{var}^{k}"
            body = mono if mag == 1 else f"{mag}*{mono}"
        sign = "-" if c < 0 else "+"
        terms.append((sign, body))
    if not terms:
        return "0"
    first_sign, first = terms[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in terms[1:]:
        out += f" {sign} {body}"
    return out


def _rational_roots(p: tuple[int, ...]) -> list[Fraction]:
    """Rational roots of an integer polynomial (rational root theorem)."""
    roots = []
    p = list(p)
    while p and p[0] == 0:
        roots.append(Fraction(0))
        p.pop(0)
    if len(p) < 2:
        return roots
    a0, an = abs(p[0]), abs(p[-1])

    def divisors(k):
        return [d for d in range(1, k + 1) if k % d == 0]

    cands = {Fraction(s * a, b) for a in divisors(a0) for b in divisors(an) for s in (1, -1)}
    poly = tuple(Fraction(x) for x in p)
    for r in sorted(cands):
        while len(poly) > 1 and _peval(poly, r) == 0:
            roots.append(r)
            poly = _pdivmod(poly, (-r, Fraction(1)))[0]
    return roots


# ---------------------------------------------------------------------------


class RatFn:
    """Rational function in ``m`` with rational coefficients, kept canonical.

    Numerator and denominator are coprime and the denominator is monic, so two
    equal functions have identical representations.
    """

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: Iterable = (), den: Iterable = (1,)):
        num = _trim(Fraction(x) for x in num)
        den = _trim(Fraction(x) for x in den)
        if not den:
            raise ZeroDivisionError("rational function with zero denominator")
        if not num:
            self.num, self.den = (), (Fraction(1),)
        else:
            if len(den) > 1:
                g = _pgcd(num, den)
                if len(g) > 1:
                    num = _pdivmod(num, g)[0]
                    den = _pdivmod(den, g)[0]
            lead = den[-1]
            if lead != 1:
                num, den = _pscale(num, 1 / lead), _pscale(den, 1 / lead)
            self.num, self.den = num, den
        self._hash = None

    @classmethod
    def _canonical(cls, num: Poly, den: Poly) -> "RatFn":
        """Wrap an already canonical (trimmed, coprime, monic) pair."""
        out = cls.__new__(cls)
        out.num, out.den, out._hash = num, den if num else _ONE, None
        return out

    # constructors -------------------------------------------------------
    @classmethod
    def const(cls, c: Number) -> "RatFn":
        c = Fraction(c)
        return cls._canonical((c,) if c else (), _ONE)

    @classmethod
    def symbol(cls) -> "RatFn":
        return cls((0, 1))

    @classmethod
    def coerce(cls, x) -> "RatFn":
        if isinstance(x, RatFn):
            return x
        if isinstance(x, (int, Fraction)):
            return cls.const(x)
        raise TypeError(f"cannot coerce {type(x).__name__} to RatFn")

    # predicates ---------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return len(self.num) <= 1 and len(self.den) == 1

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self.num[0] if self.num else Fraction(0)

    # arithmetic ---------------------------------------------------------
    def _bin(self, other):
        try:
            return RatFn.coerce(other)
        except TypeError:
            return None

    def __add__(self, other):
        o = self._bin(other)
        if o is None:
            return NotImplemented
        if self.den == o.den:
            if self.den == _ONE:
                return RatFn._canonical(_padd(self.num, o.num), _ONE)
            return RatFn(_padd(self.num, o.num), self.den)
        return RatFn(_padd(_pmul(self.num, o.den), _pmul(o.num, self.den)), _pmul(self.den, o.den))

    __radd__ = __add__

    def __neg__(self):
        return RatFn._canonical(_pneg(self.num), self.den)

    def __sub__(self, other):
        o = self._bin(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._bin(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        o = self._bin(other)
        if o is None:
            return NotImplemented
        if o.is_zero() or self.is_zero():
            return RatFn()
        if self.den == _ONE and o.den == _ONE:
            return RatFn._canonical(_pmul(self.num, o.num), _ONE)
        return RatFn(_pmul(self.num, o.num), _pmul(self.den, o.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._bin(other)
        if o is None:
            return NotImplemented
        if o.is_zero():
            raise ZeroDivisionError("division by the zero rational function")
        return RatFn(_pmul(self.num, o.den), _pmul(self.den, o.num))

    def __rtruediv__(self, other):
        o = self._bin(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, k: int):
        if k < 0:
            return RatFn.const(1) / (self ** (-k))
        out = RatFn.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        o = self._bin(other)
        if o is None:
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash

    # evaluation ---------------------------------------------------------
    def eval(self, m0: Number) -> Fraction:
        m0 = Fraction(m0)
        d = _peval(self.den, m0)
        if d == 0:
            raise PoleError(f"{self} has a pole at m = {m0}")
        return _peval(self.num, m0) / d

    def subs(self, m0: Number) -> "RatFn":
        return RatFn.const(self.eval(m0))

    def compose(self, q: "RatFn") -> "RatFn":
        """Substitute the symbol by the rational function ``q``."""
        q = RatFn.coerce(q)

        def horner(p: Poly) -> "RatFn":
            out = RatFn()
            for c in reversed(p):
                out = out * q + c
            return out

        return horner(self.num) / horner(self.den)

    def __float__(self):
        return float(self.constant_value())

    # rendering ----------------------------------------------------------
    def int_parts(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Integer numerator/denominator coefficient lists with one overall
        content factor folded into the numerator and a positive leading
        denominator coefficient."""
        if self.is_zero():
            return (), (1,)
        cn, pn = _pint(self.num)
        cd, pd = _pint(self.den)
        s = cn / cd
        return tuple(x * s.numerator for x in pn), tuple(x * s.denominator for x in pd)

    def canonical_str(self) -> str:
        n, d = self.int_parts()
        if not n:
            return "0"
        if d == (1,):
            return poly_str(n)
        return f"({poly_str(n)})/({poly_str(d)})"

    def factored_str(self) -> str:
        """Human-oriented form with rational linear factors pulled out, e.g.
        ``-24*(m - 1)*(4*m^3 - m^2 + m + 2)/((m + 1)*(2*m + 1))``."""
        if self.is_zero():
            return "0"
        cn, pn = _pint(self.num)
        cd, pd = _pint(self.den)
        scale = cn / cd
        nf, nrest = _split_linear(pn)
        df, drest = _split_linear(pd)
        scale *= nrest[0] / drest[0]
        nfacs = nf + ([nrest[1]] if len(nrest[1]) > 1 else [])
        dfacs = df + ([drest[1]] if len(drest[1]) > 1 else [])

        def powers(facs):
            out = []
            for f in facs:
                if out and out[-1][0] == f:
                    out[-1][1] += 1
                else:
                    out.append([f, 1])
            return [f"({poly_str(f)})" + (f"^{k}" if k > 1 else "") for f, k in out]

        def prod(facs):
            return "*".join(powers(facs))

        dfacs_str = powers(dfacs)
        if scale.denominator != 1:
            dfacs_str = [str(scale.denominator)] + dfacs_str
        c = scale.numerator
        if nfacs:
            top = prod(nfacs)
            top = top if c == 1 else ("-" + top if c == -1 else f"{c}*{top}")
        else:
            top = str(c)
        if not dfacs_str:
            return top
        bottom = dfacs_str[0] if len(dfacs_str) == 1 else "(" + "*".join(dfacs_str) + ")"
        return f"{top}/{bottom}"

    def rational_roots(self) -> list[Fraction]:
        return _rational_roots(_pint(self.num)[1])

    def __repr__(self):
        return f"RatFn({self.canonical_str()})"

    __str__ = canonical_str


def _split_linear(p: tuple[int, ...]):
    """Split a primitive integer polynomial into primitive linear factors
    (sorted) and a leftover ``(lead, rest)``."""
    facs = []
    rest = tuple(Fraction(x) for x in p)
    for r in _rational_roots(p):
        lin = (-r.numerator, r.denominator)
        facs.append(lin)
        rest = _pdivmod(rest, (Fraction(-r.numerator), Fraction(r.denominator)))[0]
    c, prim = _pint(rest)
    facs.sort(key=lambda f: (f[1], f[0]))
    return facs, (c, prim)


# ---------------------------------------------------------------------------


class RatMatrix:
    """Dense matrix of :class:`RatFn` entries."""

    def __init__(self, rows: Sequence[Sequence]):
        self.entries = [[RatFn.coerce(x) for x in row] for row in rows]
        if not self.entries or not self.entries[0]:
            raise ValueError("matrix must be non-empty")
        w = len(self.entries[0])
        if any(len(r) != w for r in self.entries):
            raise ValueError("ragged matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other):
        return isinstance(other, RatMatrix) and self.entries == other.entries

    def transpose(self) -> "RatMatrix":
        r, c = self.shape
        return RatMatrix([[self.entries[i][j] for i in range(r)] for j in range(c)])

    def __matmul__(self, other):
        if isinstance(other, RatMatrix):
            r, k = self.shape
            k2, c = other.shape
            if k != k2:
                raise ValueError("shape mismatch")
            return RatMatrix(
                [[sum((self.entries[i][t] * other.entries[t][j] for t in range(k)), RatFn()) for j in range(c)] for i in range(r)]
            )
        vec = [RatFn.coerce(x) for x in other]
        r, k = self.shape
        if len(vec) != k:
            raise ValueError("shape mismatch")
        return [sum((self.entries[i][t] * vec[t] for t in range(k)), RatFn()) for i in range(r)]

    def scale(self, s) -> "RatMatrix":
        return RatMatrix([[s * x for x in row] for row in self.entries])

    def inverse(self) -> "RatMatrix":
        n, c = self.shape
        if n != c:
            raise ValueError("inverse of a non-square matrix")
        aug = [row[:] + [RatFn.const(1) if i == j else RatFn() for j in range(n)] for i, row in enumerate(self.entries)]
        _gauss_jordan(aug, n)
        return RatMatrix([row[n:] for row in aug])

    def eval(self, m0: Number) -> list[list[Fraction]]:
        out = []
        for i, row in enumerate(self.entries):
            vals = []
            for j, x in enumerate(row):
                try:
                    vals.append(x.eval(m0))
                except PoleError as exc:
                    raise PoleError(f"entry ({i},{j}) = {x} has a pole at m = {m0}") from exc
            out.append(vals)
        return out

    def __repr__(self):
        return "RatMatrix([" + ", ".join("[" + ", ".join(str(x) for x in r) + "]" for r in self.entries) + "])"


def _gauss_jordan(aug: list[list[RatFn]], n: int) -> None:
    for col in range(n):
        piv = next((r for r in range(col, n) if not aug[r][col].is_zero()), None)
        if piv is None:
            raise SingularMatrixError(col)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(n):
            if r != col and not aug[r][col].is_zero():
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]


def solve_linear(M: RatMatrix, b: Sequence) -> list[RatFn]:
    """Solve ``M x = b`` exactly; raises :class:`SingularMatrixError`."""
    n, c = M.shape
    if n != c:
        raise ValueError("solve_linear needs a square matrix")
    if len(b) != n:
        raise ValueError("right-hand side has the wrong length")
    aug = [row[:] + [RatFn.coerce(b[i])] for i, row in enumerate(M.entries)]
    _gauss_jordan(aug, n)
    return [row[n] for row in aug]
