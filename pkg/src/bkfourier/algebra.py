import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import Poly, isprime, symbols

from .errors import FieldError, SizeLimitError

logger = logging.getLogger(__name__)

DEFAULT_FIELD_LIMIT = 128

Rational = Fraction
Scalar = Union[int, Fraction]

_U = symbols("u")


def _digits(values: np.ndarray, p: int, k: int) -> np.ndarray:
    out = np.zeros((values.size, k), dtype=np.int64)
    rest = values.astype(np.int64).copy()
    for i in range(k):
        out[:, i], rest = rest % p, rest // p
    return out


def _is_irreducible(coeffs: Sequence[int], p: int) -> bool:
    return Poly.from_list(list(reversed(coeffs)), _U, modulus=p).is_irreducible


def smallest_irreducible(p: int, k: int) -> Tuple[int, ...]:
    if k == 1:
        return (0, 1)
    for lower in product(range(p), repeat=k):
        coeffs = tuple(lower) + (1,)
        if lower[0] != 0 and _is_irreducible(coeffs, p):
            return coeffs
    raise FieldError(f"no irreducible polynomial of degree {k} over F_{p}")


class FieldCtx:
    def __init__(self, p: int, k: int, modulus: Sequence[int]):
        self.p = p
        self.k = k
        self.q = p**k
        self.modulus = tuple(int(c) for c in modulus)
        self.elements = np.arange(self.q, dtype=np.int64)
        self.units = self.elements[1:]
        self.digits = _digits(self.elements, p, k)
        self._weights = p ** np.arange(k, dtype=np.int64)

        self.add = ((self.digits[:, None, :] + self.digits[None, :, :]) % p) @ self._weights
        self.neg = ((-self.digits) % p) @ self._weights
        self.sub = self.add[:, self.neg]
        self.mul = self._multiplication_table()
        self.inv = np.argmax(self.mul == 1, axis=1)
        self.inv[0] = 0
        self.rank = self.digits @ (p ** np.arange(k - 1, -1, -1, dtype=np.int64))
        self.order = np.argsort(self.rank, kind="stable")

        self.frobenius = self.power(self.elements, p)
        self.trace = self._trace_table()
        self.square = self.mul[self.elements, self.elements]
        self.is_square = np.zeros(self.q, dtype=bool)
        self.is_square[self.square] = True
        self.sqrt = np.full(self.q, -1, dtype=np.int64)
        for x in self.order:
            if self.sqrt[self.square[x]] < 0:
                self.sqrt[self.square[x]] = x
        self.quadratic = np.where(self.is_square, 1, -1).astype(np.int64)
        self.quadratic[0] = 0
        non_squares = [int(x) for x in self.order if not self.is_square[x]]
        self.nonsquare = non_squares[0] if non_squares else None
        self.two = int(self.add[1, 1])

    def __repr__(self) -> str:
        return f"FieldCtx(p={self.p}, k={self.k}, modulus={list(self.modulus)})"

    @property
    def odd(self) -> bool:
        return self.p != 2

    def _multiplication_table(self) -> np.ndarray:
        p, k = self.p, self.k
        spread = np.zeros((k, k, 2 * k - 1), dtype=np.int64)
        for i in range(k):
            for j in range(k):
                spread[i, j, i + j] = 1
        reduction = np.zeros((2 * k - 1, k), dtype=np.int64)
        current = np.zeros(k, dtype=np.int64)
        current[0] = 1
        tail = np.array(self.modulus[:k], dtype=np.int64)
        for d in range(2 * k - 1):
            reduction[d] = current
            top = current[k - 1]
            current = np.roll(current, 1)
            current[0] = 0
            current = (current - top * tail) % p
        full = np.einsum("xi,yj,ijd->xyd", self.digits, self.digits, spread)
        return ((full @ reduction) % p) @ self._weights

    def _trace_table(self) -> np.ndarray:
        total = self.elements.copy()
        current = self.elements.copy()
        for _ in range(1, self.k):
            current = self.frobenius[current]
            total = self.add[total, current]
        assert (total < self.p).all()
        return total

    def power(self, values: np.ndarray, exponent: int) -> np.ndarray:
        result = np.ones_like(values)
        base = np.asarray(values, dtype=np.int64).copy()
        e = exponent
        while e:
            if e & 1:
                result = self.mul[result, base]
            base = self.mul[base, base]
            e >>= 1
        return result

    def elem(self, value: Union[int, Sequence[int]]) -> "FieldElem":
        if isinstance(value, (list, tuple)):
            value = int(np.dot([c % self.p for c in value], self._weights[: len(value)]))
        if not 0 <= int(value) < self.q:
            raise FieldError(f"{value} is not an element index of F_{self.q}")
        return FieldElem(self, int(value))

    def from_int(self, n: int) -> int:
        return int(n) % self.p

    def format(self, x: int) -> str:
        if self.k == 1:
            return str(int(x))
        return "[" + " ".join(str(int(c)) for c in self.digits[int(x)]) + "]"

    def require_odd(self, what: str) -> None:
        if not self.odd:
            raise FieldError(f"{what} needs odd characteristic, got F_{self.q}")


@dataclass(frozen=True)
class FieldElem:
    ctx: FieldCtx
    value: int

    @property
    def coeffs(self) -> Tuple[int, ...]:
        return tuple(int(c) for c in self.ctx.digits[self.value])

    def _other(self, other) -> int:
        if isinstance(other, FieldElem):
            if other.ctx is not self.ctx:
                raise FieldError("operands live in different fields")
            return other.value
        if isinstance(other, (int, np.integer)):
            return self.ctx.from_int(int(other))
        raise TypeError(f"cannot combine a field element with {type(other).__name__}")

    def __add__(self, other):
        y = self._other(other)
        return FieldElem(self.ctx, int(self.ctx.add[self.value, y]))

    __radd__ = __add__

    def __sub__(self, other):
        y = self._other(other)
        return FieldElem(self.ctx, int(self.ctx.sub[self.value, y]))

    def __rsub__(self, other):
        return FieldElem(self.ctx, self._other(other)) - self

    def __neg__(self):
        return FieldElem(self.ctx, int(self.ctx.neg[self.value]))

    def __mul__(self, other):
        y = self._other(other)
        return FieldElem(self.ctx, int(self.ctx.mul[self.value, y]))

    __rmul__ = __mul__

    def __truediv__(self, other):
        y = self._other(other)
        if y == 0:
            raise ZeroDivisionError("division by zero in a finite field")
        return FieldElem(self.ctx, int(self.ctx.mul[self.value, self.ctx.inv[y]]))

    def __pow__(self, exponent: int):
        if exponent < 0:
            return FieldElem(self.ctx, 1) / self ** (-exponent)
        return FieldElem(self.ctx, int(self.ctx.power(np.array([self.value]), exponent)[0]))

    def __bool__(self) -> bool:
        return self.value != 0

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"F{self.ctx.q}({self.ctx.format(self.value)})"


@lru_cache(maxsize=None)
def _make_field(p: int, k: int) -> FieldCtx:
    ctx = FieldCtx(p, k, smallest_irreducible(p, k))
    logger.debug("built %r", ctx)
    return ctx


def make_field(p: int, k: int = 1, limit: int = DEFAULT_FIELD_LIMIT) -> FieldCtx:
    if not isprime(p):
        raise FieldError(f"characteristic {p} is not prime")
    if k < 1:
        raise FieldError(f"extension degree must be positive, got {k}")
    if p**k > limit:
        raise SizeLimitError(f"F_{p}^{k} has {p ** k} elements, limit is {limit}")
    return _make_field(p, k)


class QuadExtCtx:
    """F_{q^2} = F_q[w]/(w^2 + c1 w + c0); element a0 + a1 w has index a0 + q*a1."""

    def __init__(self, base: FieldCtx):
        self.base = base
        q = base.q
        self.q = q
        self.size = q * q
        self.modulus2 = self._find_modulus()
        c0, c1 = self.modulus2
        idx = np.arange(self.size, dtype=np.int64)
        self.elements = idx
        self.a0 = idx % q
        self.a1 = idx // q
        b = base

        a0, a1 = self.a0[:, None], self.a1[:, None]
        b0, b1 = self.a0[None, :], self.a1[None, :]
        t = b.mul[a1, b1]
        r0 = b.sub[b.mul[a0, b0], b.mul[c0, t]]
        r1 = b.sub[b.add[b.mul[a0, b1], b.mul[a1, b0]], b.mul[c1, t]]
        self.mul = r0 + q * r1
        self.add = b.add[a0, b0] + q * b.add[a1, b1]
        self.neg = b.neg[self.a0] + q * b.neg[self.a1]
        self.inv = np.argmax(self.mul == 1, axis=1)
        self.inv[0] = 0
        self.rank = b.rank[self.a0] * q + b.rank[self.a1]
        self.order = np.argsort(self.rank, kind="stable")

        self.frobenius = self.power(idx, q)
        assert (self.frobenius[self.frobenius] == idx).all()
        fixed = np.flatnonzero(self.frobenius == idx)
        assert fixed.size == q and (fixed < q).all()

        self.square = self.mul[idx, idx]
        self.is_square = np.zeros(self.size, dtype=bool)
        self.is_square[self.square] = True
        self.sqrt = np.full(self.size, -1, dtype=np.int64)
        for x in self.order:
            if self.sqrt[self.square[x]] < 0:
                self.sqrt[self.square[x]] = x
        self.twisted = np.flatnonzero(self.frobenius == self.neg)
        self.norm_one = np.flatnonzero(self.power(idx, q + 1) == 1)

    def __repr__(self) -> str:
        return f"QuadExtCtx(q={self.q}, modulus2={list(self.modulus2)})"

    def _find_modulus(self) -> Tuple[int, int]:
        b = self.base
        for c0 in b.order:
            if c0 == 0:
                continue
            for c1 in b.order:
                values = b.add[b.add[b.square, b.mul[c1, b.elements]], c0]
                if (values != 0).all():
                    return int(c0), int(c1)
        raise FieldError(f"no irreducible quadratic over F_{b.q}")

    def power(self, values: np.ndarray, exponent: int) -> np.ndarray:
        result = np.ones_like(values)
        base = np.asarray(values, dtype=np.int64).copy()
        e = exponent
        while e:
            if e & 1:
                result = self.mul[result, base]
            base = self.mul[base, base]
            e >>= 1
        return result

    def is_base(self, x: int) -> bool:
        return int(x) < self.q

    def format(self, x: int) -> str:
        return f"{self.base.format(self.a0[x])}+{self.base.format(self.a1[x])}w"


@lru_cache(maxsize=None)
def make_quad_ext(base: FieldCtx) -> QuadExtCtx:
    return QuadExtCtx(base)


@dataclass(frozen=True)
class CycNum:
    p: int
    coeffs: Tuple[Fraction, ...]

    @classmethod
    def zero(cls, p: int) -> "CycNum":
        return cls(p, tuple(Fraction(0) for _ in range(p - 1)))

    @classmethod
    def from_int(cls, p: int, n: Scalar) -> "CycNum":
        return cls(p, (Fraction(n),) + tuple(Fraction(0) for _ in range(p - 2)))

    @classmethod
    def from_counts(cls, p: int, counts: Sequence[Scalar]) -> "CycNum":
        if len(counts) != p:
            raise ValueError(f"expected {p} exponent counts, got {len(counts)}")
        last = Fraction(counts[p - 1])
        return cls(p, tuple(Fraction(counts[i]) - last for i in range(p - 1)))

    @classmethod
    def zeta(cls, p: int, exponent: int) -> "CycNum":
        counts = [0] * p
        counts[exponent % p] = 1
        return cls.from_counts(p, counts)

    @classmethod
    def parse(cls, p: int, text: str) -> "CycNum":
        body = text.strip().lstrip("[").rstrip("]")
        return cls(p, tuple(Fraction(part.strip()) for part in body.split(",")))

    def _lift(self) -> List[Fraction]:
        return list(self.coeffs) + [Fraction(0)]

    def _coerce(self, other) -> Optional["CycNum"]:
        if isinstance(other, CycNum):
            if other.p != self.p:
                raise ValueError(f"cannot combine Q(zeta_{self.p}) with Q(zeta_{other.p})")
            return other
        if isinstance(other, (int, Fraction, np.integer)):
            return CycNum.from_int(self.p, int(other) if isinstance(other, np.integer) else other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return CycNum(self.p, tuple(a + b for a, b in zip(self.coeffs, o.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return CycNum(self.p, tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, np.integer)):
            factor = Fraction(int(other)) if isinstance(other, np.integer) else Fraction(other)
            return CycNum(self.p, tuple(a * factor for a in self.coeffs))
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        p = self.p
        a, b = self._lift(), o._lift()
        out = [Fraction(0)] * p
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    if bj:
                        out[(i + j) % p] += ai * bj
        return CycNum.from_counts(p, out)

    __rmul__ = __mul__

    def __truediv__(self, other: Scalar):
        return self * (Fraction(1) / Fraction(other))

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.p == o.p and self.coeffs == o.coeffs

    def __hash__(self) -> int:
        return hash((self.p, self.coeffs))

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is not rational")
        return self.coeffs[0]

    def to_counts(self) -> List[Fraction]:
        return self._lift()

    def __str__(self) -> str:
        return "[" + ", ".join(str(c) for c in self.coeffs) + "]"

    def __repr__(self) -> str:
        return f"CycNum(p={self.p}, {self})"


class CharacterSums:
    """psi(x) = zeta_p^{Tr(r x)} and the sums built from it; r = 1 unless a twist is requested."""

    def __init__(self, ctx: FieldCtx, twist: int = 1):
        if twist == 0:
            raise FieldError("psi twist must be non-zero")
        self.ctx = ctx
        self.p = ctx.p
        self.twist = int(twist)
        self.trace = ctx.trace[ctx.mul[self.twist, ctx.elements]]
        self.quad = make_quad_ext(ctx) if ctx.odd else None
        units = ctx.units
        self._inv_sq = ctx.square[ctx.inv[units]]

        self._kappa = [self.psi_sum(ctx.mul[self._inv_sq, b]) for b in ctx.elements]
        self._line = [self.psi_sum(ctx.mul[units, t]) for t in ctx.elements]
        self._crucial = [
            self.psi_sum(ctx.add[units, ctx.mul[self._inv_sq, u]]) for u in ctx.elements
        ]
        if ctx.odd:
            twisted = self.quad.twisted[self.quad.twisted != 0]
            inv_sq2 = self.quad.square[self.quad.inv[twisted]]
            assert (inv_sq2 < ctx.q).all()
            self._kappa_prime = [self.psi_sum(ctx.mul[inv_sq2, b]) for b in ctx.elements]
            squares = units[ctx.is_square[units]]
            others = units[~ctx.is_square[units]]
            self._gauss = [
                self.psi_sum(ctx.mul[squares, b]) - self.psi_sum(ctx.mul[others, b])
                for b in ctx.elements
            ]

    def counts(self, values: np.ndarray) -> np.ndarray:
        return np.bincount(self.trace[np.asarray(values).ravel()], minlength=self.p)

    def psi(self, x: int) -> CycNum:
        return CycNum.zeta(self.p, int(self.trace[int(x)]))

    def psi_sum(self, values: Iterable[int]) -> CycNum:
        arr = np.asarray(values if isinstance(values, np.ndarray) else list(values), dtype=np.int64)
        if arr.size == 0:
            return CycNum.zero(self.p)
        return CycNum.from_counts(self.p, [int(c) for c in self.counts(arr)])

    def line_sum(self, t: int) -> CycNum:
        """sum over s in F_q^x of psi(s t)"""
        return self._line[int(t)]

    def kappa(self, b: int) -> CycNum:
        return self._kappa[int(b)]

    def kappa_prime(self, b: int) -> CycNum:
        self.ctx.require_odd("kappa'")
        return self._kappa_prime[int(b)]

    def gauss(self, b: int) -> CycNum:
        self.ctx.require_odd("S(alpha_o, psi_b)")
        return self._gauss[int(b)]

    def crucial(self, u: int) -> CycNum:
        """sum over s in F_q^x of psi(s + s^-2 u)"""
        return self._crucial[int(u)]

    def mixed(self, u: int, b: int) -> CycNum:
        """sum over s in F_q^x of psi(s u + s^-2 b)"""
        if u == 0:
            return self._kappa[int(b)]
        return self._crucial[int(self.ctx.mul[self.ctx.square[u], b])]


_CHAR_CACHE: Dict[tuple, CharacterSums] = {}


def make_chars(ctx: FieldCtx, twist: int = 1) -> CharacterSums:
    key = (ctx.p, ctx.k, ctx.modulus, int(twist))
    chars = _CHAR_CACHE.get(key)
    if chars is None:
        chars = _CHAR_CACHE.setdefault(key, CharacterSums(ctx, twist))
    return chars


def character_twist(ctx: FieldCtx) -> CharacterSums:
    ctx.require_odd("a non-square twist of psi")
    return make_chars(ctx, ctx.nonsquare)


def trace_to_prime(x: FieldElem) -> int:
    return int(x.ctx.trace[x.value])


def alpha_o(x: FieldElem) -> int:
    x.ctx.require_odd("alpha_o")
    return int(x.ctx.quadratic[x.value])


def psi(x: FieldElem) -> CycNum:
    return make_chars(x.ctx).psi(x.value)


def gauss_S(b: FieldElem) -> CycNum:
    return make_chars(b.ctx).gauss(b.value)


def kappa(b: FieldElem) -> CycNum:
    return make_chars(b.ctx).kappa(b.value)


def kappa_prime(b: FieldElem) -> CycNum:
    return make_chars(b.ctx).kappa_prime(b.value)


def crucial_identity_holds(ctx: FieldCtx) -> bool:
    chars = make_chars(ctx)
    for tau in ctx.elements:
        lhs = chars.line_sum(tau)
        rhs = chars.psi_sum(ctx.mul[ctx.units, ctx.square[tau]])
        expected = ctx.q - 1 if tau == 0 else -1
        if not (lhs == rhs == expected):
            return False
    return True
