import logging
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import CharacterSums, CycNum, FieldCtx, make_chars
from .errors import FieldError
from .groupoid import (
    DEFAULT_MATRIX_CAP,
    FiniteGroupoid,
    GroupAction,
    InvolutivityResult,
    KernelFn,
    check_involutive,
    orbits,
)
from .groups import Mat, arith, matrices
from .kernels import IdentityCheck, compare_values

logger = logging.getLogger(__name__)

Vector = Tuple[int, ...]


class _QuadraticForm:
    """Split normal form on F_q^n: sum of v_i v_(n-1-i) over i < m, plus c v_m^2 when n is odd."""

    def __init__(self, ctx: FieldCtx, m: int, n: int, c: int = 0):
        ctx.require_odd("quadratic spaces")
        if m < 0:
            raise FieldError(f"m must be non-negative, got {m}")
        self.ctx = ctx
        self.q = ctx.q
        self.m = m
        self.n = n
        self.c = int(c)
        self._ar = arith(ctx)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(q={self.q}, n={self.n}, c={self.ctx.format(self.c)})"

    @property
    def odd(self) -> bool:
        return self.n % 2 == 1

    @property
    def expected_scale(self) -> int:
        return self.q ** (self.n - 1)

    @cached_property
    def vectors(self) -> np.ndarray:
        return np.array(list(product(range(self.q), repeat=self.n)), dtype=np.int64)

    def _require_dim(self, v: Sequence[int]) -> None:
        if len(v) != self.n:
            raise FieldError(f"expected a vector of length {self.n}, got {len(v)}")

    def values(self, vectors: np.ndarray) -> np.ndarray:
        """Q on the last axis of an index array."""
        ctx = self.ctx
        vectors = np.asarray(vectors, dtype=np.int64)
        total = np.zeros(vectors.shape[:-1], dtype=np.int64)
        for i in range(self.m):
            total = ctx.add[total, ctx.mul[vectors[..., i], vectors[..., self.n - 1 - i]]]
        if self.odd:
            total = ctx.add[total, ctx.mul[self.c, ctx.square[vectors[..., self.m]]]]
        return total

    def polarize(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """B(v', v) = Q(v' + v) - Q(v') - Q(v), broadcasting over the leading axes."""
        ctx = self.ctx
        left = np.asarray(left, dtype=np.int64)
        right = np.asarray(right, dtype=np.int64)
        both = ctx.add[left, right]
        return ctx.sub[ctx.sub[self.values(both), self.values(left)], self.values(right)]

    def eval_Q(self, v: Sequence[int]) -> int:
        self._require_dim(v)
        add, mul = self._ar.add, self._ar.mul
        n = self.n
        total = 0
        for i in range(self.m):
            total = add[total][mul[v[i]][v[n - 1 - i]]]
        if self.odd:
            total = add[total][mul[self.c][self._ar.square[v[self.m]]]]
        return total

    def eval_B(self, v1: Sequence[int], v: Sequence[int]) -> int:
        self._require_dim(v1)
        self._require_dim(v)
        ar = self._ar
        both = [ar.add[a][b] for a, b in zip(v1, v)]
        return ar.sub[ar.sub[self.eval_Q(both)][self.eval_Q(v1)]][self.eval_Q(v)]

    def gram(self) -> np.ndarray:
        basis = np.eye(self.n, dtype=np.int64)
        return self.polarize(basis[:, None, :], basis[None, :, :])

    def radical(self) -> np.ndarray:
        basis = np.eye(self.n, dtype=np.int64)
        pairings = self.polarize(self.vectors[:, None, :], basis[None, :, :])
        return self.vectors[(pairings == 0).all(axis=1)]

    def nondegenerate(self) -> bool:
        return len(self.radical()) == 1

    @cached_property
    def isotropic(self) -> np.ndarray:
        return self.vectors[self.values(self.vectors) == 0]

    def format_vector(self, v: Sequence[int]) -> str:
        return "(" + ",".join(self.ctx.format(int(c)) for c in v) + ")"


class QuadSpace(_QuadraticForm):
    def __init__(self, ctx: FieldCtx, m: int, c: int = 1):
        if c == 0:
            raise FieldError("the middle coefficient c must be non-zero")
        super().__init__(ctx, m, 2 * m + 1, c)


class EvenQuadSpace(_QuadraticForm):
    def __init__(self, ctx: FieldCtx, m: int):
        if m < 1:
            raise FieldError(f"the hyperbolic space needs m >= 1, got {m}")
        super().__init__(ctx, m, 2 * m)


def scaling_action(space: _QuadraticForm, points: List[Vector], name: str) -> GroupAction:
    ar = arith(space.ctx)
    mul, rank = ar.mul, ar.rank

    return GroupAction(
        name,
        points,
        list(range(1, space.q)),
        lambda s, v: tuple(mul[s][c] for c in v),
        identity=1,
        compose=lambda s, t: mul[s][t],
        sort_key=lambda v: tuple(rank[c] for c in v),
        label=space.format_vector,
    )


def isotropic_groupoid(space: _QuadraticForm) -> FiniteGroupoid:
    """[{Q = 0} / F_q^x]"""
    points = [tuple(int(c) for c in v) for v in space.isotropic]
    if space.odd:
        assert len(points) == space.q ** (2 * space.m), f"{space}: {len(points)} isotropic vectors"
    return orbits(scaling_action(space, points, f"cone-{space.n}-F{space.q}"))


def cone_kernel(space: _QuadraticForm, chars: Optional[CharacterSums] = None) -> KernelFn:
    """K([v'], [v]) = sum over s of psi(B(s v', v))."""
    chars = chars if chars is not None else make_chars(space.ctx)
    groupoid = isotropic_groupoid(space)
    cache: Dict[Tuple[Vector, Vector], CycNum] = {}

    def evaluate(y: Vector, x: Vector) -> CycNum:
        value = cache.get((y, x))
        if value is None:
            value = cache.setdefault((y, x), chars.line_sum(space.eval_B(y, x)))
        return value

    return KernelFn(groupoid.action, evaluate, f"cone-kernel-{space.n}-F{space.q}")


def isotropic_psi_sum(
    space: _QuadraticForm, v1: Sequence[int], chars: Optional[CharacterSums] = None
) -> CycNum:
    """f(v') = sum of psi(B(v', v)) over the isotropic v."""
    chars = chars if chars is not None else make_chars(space.ctx)
    space._require_dim(v1)
    return chars.psi_sum(space.polarize(np.asarray(v1)[None, :], space.isotropic))


def isotropic_closed(space: QuadSpace, v1: Sequence[int]) -> CycNum:
    ctx = space.ctx
    q, m = space.q, space.m
    at_zero = q ** (2 * m) if not any(v1) else 0
    value = at_zero + q**m * int(ctx.quadratic[space.c]) * int(ctx.quadratic[space.eval_Q(v1)])
    return CycNum.from_int(ctx.p, value)


def weil_sum(space: QuadSpace, lam: int, chars: Optional[CharacterSums] = None) -> CycNum:
    """sum over v in V of psi(lambda Q(v))"""
    if lam == 0:
        raise FieldError("the Weil sum is taken at lambda != 0")
    chars = chars if chars is not None else make_chars(space.ctx)
    return chars.psi_sum(space.ctx.mul[lam, space.values(space.vectors)])


def weil_closed(space: QuadSpace, lam: int, chars: Optional[CharacterSums] = None) -> CycNum:
    chars = chars if chars is not None else make_chars(space.ctx)
    ctx = space.ctx
    return chars.gauss(1) * (space.q**space.m * int(ctx.quadratic[ctx.mul[space.c, lam]]))


def check_isotropic_count(space: QuadSpace) -> IdentityCheck:
    count = len(space.isotropic)
    want = space.q ** (2 * space.m)
    check = IdentityCheck(f"isotropic-count-{space.n}", count == want, 1, int(count != want))
    check.detail = {"count": str(count), "expected": str(want)}
    return check


def check_isotropic_sums(space: QuadSpace, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    chars = chars if chars is not None else make_chars(space.ctx)
    return compare_values(
        f"isotropic-sum-{space.n}-c{space.c}",
        (
            (space.format_vector(v), isotropic_psi_sum(space, v, chars), isotropic_closed(space, v))
            for v in space.vectors.tolist()
        ),
    )


def check_weil_sums(space: QuadSpace, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    chars = chars if chars is not None else make_chars(space.ctx)
    return compare_values(
        f"weil-sum-{space.n}-c{space.c}",
        (
            (space.ctx.format(lam), weil_sum(space, lam, chars), weil_closed(space, lam, chars))
            for lam in range(1, space.q)
        ),
    )


def check_theo2(
    space: _QuadraticForm,
    chars: Optional[CharacterSums] = None,
    matrix_cap: int = DEFAULT_MATRIX_CAP,
    threads: int = 1,
) -> InvolutivityResult:
    """F^X o F^X = q^(n-1) id on the isotropic cone; holds for odd n only."""
    kernel = cone_kernel(space, chars)
    result = check_involutive(
        kernel,
        space.expected_scale,
        groupoid=isotropic_groupoid(space),
        matrix_cap=matrix_cap,
        threads=threads,
    )
    logger.info("%s: involutive=%s (%s)", space, result.passed, result.method)
    return result


def proof_identities(space: QuadSpace, chars: Optional[CharacterSums] = None) -> List[IdentityCheck]:
    """The two ingredients of the involutivity argument, checked on their own."""
    chars = chars if chars is not None else make_chars(space.ctx)
    ctx = space.ctx
    q = space.q
    units = ctx.units
    groupoid = isotropic_groupoid(space)
    reps = np.array([c.rep for c in groupoid.classes], dtype=np.int64)
    auts = [c.aut for c in groupoid.classes]
    vectors = space.vectors
    iso = space.isotropic

    # B(s X, v') over every s, X and isotropic v'
    scaled = ctx.mul[units[:, None, None], vectors[None, :, :]]
    on_points = space.polarize(scaled[:, :, None, :], iso[None, None, :, :])
    on_reps = space.polarize(scaled[:, :, None, :], reps[None, None, :, :])

    def orbit_factor():
        for i, v in enumerate(vectors.tolist()):
            lhs = chars.psi_sum(on_points[:, i, :].ravel())
            rhs = CycNum.zero(ctx.p)
            for cid, aut in enumerate(auts):
                rhs = rhs + chars.psi_sum(on_reps[:, i, cid]) / aut
            yield space.format_vector(v), lhs, rhs * (q - 1)

    checks = [compare_values(f"orbit-factor-{space.n}", orbit_factor())]

    pairings = space.polarize(iso[:, None, :], iso[None, :, :])
    ss = ctx.mul[units[:, None], units[None, :]].ravel()
    totals = ctx.quadratic[ctx.mul[ss[:, None], pairings.ravel()[None, :]]].sum(axis=0)
    bad = int(np.count_nonzero(totals))
    checks.append(IdentityCheck(f"quadratic-character-vanishing-{space.n}", bad == 0, totals.size, bad))

    sv = ctx.mul[units[:, None, None], iso[None, :, :]]
    combined = ctx.add[sv[:, None, :, None, :], sv[None, :, None, :, :]]
    lhs = space.values(combined)
    rhs = ctx.mul[ss.reshape(len(units), len(units))[:, :, None, None], pairings[None, None, :, :]]
    bad = int(np.count_nonzero(lhs != rhs))
    checks.append(IdentityCheck(f"cone-polarization-{space.n}", bad == 0, lhs.size, bad))
    return checks


# the gl2 x gl1 model


def gl2_vector(ctx: FieldCtx, x: Mat, alpha: int) -> Vector:
    """(x, alpha) -> (x00, x01, alpha, -x10, x11), on which Q = det(x) - alpha^2."""
    neg = arith(ctx).neg
    return (x[0], x[1], alpha, neg[x[2]], x[3])


def gl2_pair(ctx: FieldCtx, v: Vector) -> Tuple[Mat, int]:
    neg = arith(ctx).neg
    return (v[0], v[1], neg[v[3]], v[4]), v[2]


@dataclass
class Gl2Model:
    q: int
    identities: Dict[str, bool] = field(default_factory=dict)
    conjugate: Optional[IdentityCheck] = None
    cone: Optional[InvolutivityResult] = None
    multiplicative: Optional[InvolutivityResult] = None

    @property
    def passed(self) -> bool:
        return (
            all(self.identities.values())
            and self.conjugate is not None
            and self.conjugate.passed
            and self.cone is not None
            and self.cone.passed
            and self.multiplicative is not None
            and self.multiplicative.passed
        )


def _iota_identities(ctx: FieldCtx) -> Dict[str, bool]:
    ar = arith(ctx)
    mats = matrices(ctx)
    identity: Mat = (1, 0, 0, 1)
    out = {
        "iota-identity": ar.iota(identity) == identity,
        "iota-involution": all(ar.iota(ar.iota(x)) == x for x in mats),
        "det-iota": all(ar.det(ar.iota(x)) == ar.det(x) for x in mats),
    }
    out["trace-iota"] = all(
        ar.trace(ar.matmul(ar.iota(y), ar.iota(x))) == ar.trace(ar.matmul(y, x))
        for y in mats
        for x in mats
    )
    out["iota-antihomomorphism"] = all(
        ar.iota(ar.matmul(x, y)) == ar.matmul(ar.iota(y), ar.iota(x)) for y in mats for x in mats
    )
    return out


def gl2_model(
    ctx: FieldCtx,
    chars: Optional[CharacterSums] = None,
    matrix_cap: int = DEFAULT_MATRIX_CAP,
    threads: int = 1,
) -> Gl2Model:
    """Q(x, alpha) = det(x) - alpha^2 on gl2 x gl1, its cone, and the two transforms on it."""
    chars = chars if chars is not None else make_chars(ctx)
    ar = arith(ctx)
    space = QuadSpace(ctx, 2, ar.minus_one)
    report = Gl2Model(ctx.q, _iota_identities(ctx))

    pairs = [(x, a) for x in matrices(ctx) for a in range(ctx.q)]
    report.identities["Q-is-det-minus-square"] = all(
        space.eval_Q(gl2_vector(ctx, x, a)) == ar.sub[ar.det(x)][ar.square[a]] for x, a in pairs
    )
    basis = [tuple(int(i == j) for j in range(space.n)) for i in range(space.n)]
    sample = basis if ctx.q > 3 else [gl2_vector(ctx, x, a) for x, a in pairs]

    def stated_B(u: Vector, v: Vector) -> int:
        (y, beta), (x, alpha) = gl2_pair(ctx, u), gl2_pair(ctx, v)
        two_ba = ar.mul[ctx.two][ar.mul[beta][alpha]]
        return ar.sub[ar.trace(ar.matmul(ar.iota(y), x))][two_ba]

    report.identities["B-is-polarization"] = all(
        space.eval_B(u, v) == stated_B(u, v) for u in sample for v in sample
    )

    cone = cone_kernel(space, chars)
    groupoid = isotropic_groupoid(space)

    def multiplicative(u: Vector, v: Vector) -> CycNum:
        (y, beta), (x, alpha) = gl2_pair(ctx, u), gl2_pair(ctx, v)
        tr = ar.trace(ar.matmul(y, x))
        return chars.line_sum(ar.add[tr][ar.mul[ctx.two][ar.mul[beta][alpha]]])

    def conjugation(u: Vector) -> Vector:
        y, beta = gl2_pair(ctx, u)
        return gl2_vector(ctx, ar.iota(y), ar.neg[beta])

    mult_kernel = KernelFn(groupoid.action, multiplicative, f"phi-G1-F{ctx.q}")
    points = groupoid.action.points
    report.conjugate = compare_values(
        "iota-conjugacy",
        (
            (f"{space.format_vector(u)}*{space.format_vector(v)}", cone(u, v), mult_kernel(conjugation(u), v))
            for u in points
            for v in points
        ),
    )
    report.cone = check_involutive(cone, ctx.q**4, groupoid=groupoid, matrix_cap=matrix_cap, threads=threads)
    report.multiplicative = check_involutive(
        mult_kernel, ctx.q**4, groupoid=groupoid, matrix_cap=matrix_cap, threads=threads
    )
    return report
