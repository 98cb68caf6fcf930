import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from itertools import product
from typing import Callable, Dict, Hashable, List, NamedTuple, Optional, Tuple

import pandas as pd

from .algebra import FieldCtx, QuadExtCtx, make_quad_ext
from .errors import FieldError, SizeLimitError
from .groupoid import FiniteGroupoid, GroupAction, class_map_summary, orbits

logger = logging.getLogger(__name__)

PLAIN = "plain"
TWISTED = "twisted"

Mat = Tuple[int, int, int, int]


class GroupId(str, Enum):
    SL2 = "sl2"
    PGL2 = "pgl2"
    GL2 = "gl2"
    GL2_CHAR2 = "gl2-char2"
    T = "T"
    T_SIGMA = "Tsigma"
    TORUS_STACK = "torus-stack"
    T3_MODEL = "t3"


class StackPoint(NamedTuple):
    """[x, alpha, b]; alpha is an F_{q^2} index, below q on the plain sector. Char-2 points keep alpha = 0."""

    x: Mat
    alpha: int
    b: int
    sector: str = PLAIN


class TorusPoint(NamedTuple):
    """[diag(x1, x2), alpha, b] with x1 x2 = alpha^2."""

    x1: int
    x2: int
    alpha: int
    b: int


class MatrixArith:
    """Python-list copies of the field tables, for the point-level loops."""

    def __init__(self, ctx: FieldCtx):
        self.ctx = ctx
        self.q = ctx.q
        self.add = ctx.add.tolist()
        self.sub = ctx.sub.tolist()
        self.mul = ctx.mul.tolist()
        self.neg = ctx.neg.tolist()
        self.inv = ctx.inv.tolist()
        self.square = ctx.square.tolist()
        self.rank = ctx.rank.tolist()
        self.one = 1
        self.minus_one = self.neg[1]
        self.quad: Optional[QuadExtCtx] = make_quad_ext(ctx) if ctx.odd else None
        if self.quad is not None:
            self.qmul = self.quad.mul.tolist()
            self.qadd = self.quad.add.tolist()
            self.qinv = self.quad.inv.tolist()
            self.frob = self.quad.frobenius.tolist()
            self.qrank = self.quad.rank.tolist()

    def matmul(self, x: Mat, y: Mat) -> Mat:
        a, b, c, d = x
        e, f, g, h = y
        add, mul = self.add, self.mul
        return (
            add[mul[a][e]][mul[b][g]],
            add[mul[a][f]][mul[b][h]],
            add[mul[c][e]][mul[d][g]],
            add[mul[c][f]][mul[d][h]],
        )

    def det(self, x: Mat) -> int:
        return self.sub[self.mul[x[0]][x[3]]][self.mul[x[1]][x[2]]]

    def trace(self, x: Mat) -> int:
        return self.add[x[0]][x[3]]

    def scale(self, s: int, x: Mat) -> Mat:
        row = self.mul[s]
        return (row[x[0]], row[x[1]], row[x[2]], row[x[3]])

    def iota(self, x: Mat) -> Mat:
        """Transpose of the cofactor matrix."""
        return (x[3], self.neg[x[1]], self.neg[x[2]], x[0])

    def iota2(self, x: Mat) -> Mat:
        return tuple(self.square[c] for c in x)

    def quad_trace(self, a: int) -> int:
        return self.qadd[a][self.frob[a]]

    def format(self, x: int) -> str:
        return self.ctx.format(x)

    def format_alpha(self, alpha: int, sector: str) -> str:
        if sector == TWISTED:
            return self.quad.format(alpha)
        return self.ctx.format(alpha)


@lru_cache(maxsize=None)
def arith(ctx: FieldCtx) -> MatrixArith:
    return MatrixArith(ctx)


@dataclass
class PointSet:
    group: GroupId
    ctx: FieldCtx
    action: GroupAction
    multiply: Callable
    identity: Hashable
    kind: str = "stack"
    extras: Dict[str, object] = field(default_factory=dict)

    @property
    def points(self) -> List[Hashable]:
        return self.action.points

    @cached_property
    def groupoid(self) -> FiniteGroupoid:
        return orbits(self.action)


def stack_point_bound(group: GroupId, q: int) -> int:
    """Upper bound on the raw stack points, q^5 per sector; the size checks compare against it."""
    group = GroupId(group)
    return (2 if group in (GroupId.PGL2, GroupId.GL2) else 1) * q**5


def _check_size(what: str, count: int, limit: Optional[int]) -> None:
    if limit is not None and count > limit:
        raise SizeLimitError(f"{what} needs {count} points, limit is {limit}")


def _require_char2(ctx: FieldCtx, what: str) -> None:
    if ctx.odd:
        raise FieldError(f"{what} needs characteristic 2, got F_{ctx.q}")


def matrices(ctx: FieldCtx) -> List[Mat]:
    return list(product(range(ctx.q), repeat=4))


def invertible_matrices(ctx: FieldCtx) -> List[Mat]:
    ar = arith(ctx)
    return [x for x in matrices(ctx) if ar.det(x) != 0]


def _matrices_by_det(ctx: FieldCtx) -> Dict[int, List[Mat]]:
    ar = arith(ctx)
    by_det: Dict[int, List[Mat]] = {d: [] for d in range(ctx.q)}
    for x in matrices(ctx):
        by_det[ar.det(x)].append(x)
    return by_det


def twisted_alphas(ctx: FieldCtx, include_zero: bool = True) -> List[int]:
    """alpha in F_{q^2} with alpha^q = -alpha."""
    quad = arith(ctx).quad
    values = [int(a) for a in quad.twisted]
    return sorted(a for a in values if include_zero or a != 0)


def stack_label(ar: MatrixArith) -> Callable[[StackPoint], str]:
    def label(point: StackPoint) -> str:
        entries = ",".join(ar.format(c) for c in point.x)
        if ar.quad is None:
            return f"({entries};{ar.format(point.b)})"
        alpha = ar.format_alpha(point.alpha, point.sector)
        return f"({entries};{alpha}[{point.sector}];{ar.format(point.b)})"

    return label


def stack_sort_key(ar: MatrixArith) -> Callable[[StackPoint], tuple]:
    rank = ar.rank

    def key(point: StackPoint) -> tuple:
        twisted = point.sector == TWISTED
        alpha = ar.qrank[point.alpha] if twisted else rank[point.alpha]
        return (twisted, tuple(rank[c] for c in point.x), alpha, rank[point.b])

    return key


def _sector_of(point) -> str:
    return point.sector


def _stack_multiply(ar: MatrixArith) -> Callable[[StackPoint, StackPoint], StackPoint]:
    mul = ar.mul
    if ar.quad is None:

        def multiply(u: StackPoint, v: StackPoint) -> StackPoint:
            return StackPoint(ar.matmul(u.x, v.x), 0, mul[u.b][v.b])

        return multiply
    qmul = ar.qmul

    def multiply(u: StackPoint, v: StackPoint) -> StackPoint:
        sector = PLAIN if u.sector == v.sector else TWISTED
        return StackPoint(ar.matmul(u.x, v.x), qmul[u.alpha][v.alpha], mul[u.b][v.b], sector)

    return multiply


def _act_sl2(ar: MatrixArith):
    # (s, t).(x, alpha, b) = (s x, s alpha, t b)
    def act(g, point: StackPoint) -> StackPoint:
        s, t = g
        return StackPoint(ar.scale(s, point.x), ar.mul[s][point.alpha], ar.mul[t][point.b], point.sector)

    return act


def _act_pgl2(ar: MatrixArith):
    # (s, t, e).(x, alpha, b) = (s x, e s alpha, t b)
    def act(g, point: StackPoint) -> StackPoint:
        s, t, e = g
        return StackPoint(
            ar.scale(s, point.x),
            ar.qmul[ar.mul[e][s]][point.alpha],
            ar.mul[t][point.b],
            point.sector,
        )

    return act


def _act_gl2(ar: MatrixArith):
    # (t, e).(x, alpha, b) = (t x, e t alpha, t^-1 b)
    def act(g, point: StackPoint) -> StackPoint:
        t, e = g
        return StackPoint(
            ar.scale(t, point.x),
            ar.qmul[ar.mul[e][t]][point.alpha],
            ar.mul[ar.inv[t]][point.b],
            point.sector,
        )

    return act


def _act_char2(ar: MatrixArith):
    # s.(x', b) = (s x', s^-2 b)
    def act(s, point: StackPoint) -> StackPoint:
        return StackPoint(ar.scale(s, point.x), 0, ar.mul[ar.inv[ar.square[s]]][point.b])

    return act


def _componentwise(ar: MatrixArith):
    def compose(g, h):
        return tuple(ar.mul[a][b] for a, b in zip(g, h))

    return compose


def _units(ctx: FieldCtx) -> List[int]:
    return list(range(1, ctx.q))


def _signs(ar: MatrixArith) -> List[int]:
    return [ar.one, ar.minus_one]


def _acting_group(group: GroupId, ar: MatrixArith, full: bool = True):
    units = _units(ar.ctx)
    if group is GroupId.SL2:
        elements = [(s, t) for s in units for t in (units if full else [1])]
        return elements, _act_sl2(ar), (1, 1)
    if group is GroupId.PGL2:
        elements = [(s, t, e) for s in units for t in (units if full else [1]) for e in _signs(ar)]
        return elements, _act_pgl2(ar), (1, 1, 1)
    if group is GroupId.GL2:
        return [(t, e) for t in units for e in _signs(ar)], _act_gl2(ar), (1, 1)
    if group is GroupId.GL2_CHAR2:
        return units, _act_char2(ar), 1
    raise FieldError(f"{group.value} has no stack presentation")


def _stack_action(
    name: str, group: GroupId, ar: MatrixArith, points: List[StackPoint], full: bool = True
) -> GroupAction:
    elements, act, identity = _acting_group(group, ar, full)
    compose = (lambda g, h: ar.mul[g][h]) if group is GroupId.GL2_CHAR2 else _componentwise(ar)
    return GroupAction(
        name=name,
        points=points,
        elements=elements,
        act=act,
        identity=identity,
        compose=compose,
        sector_of=_sector_of,
        sort_key=stack_sort_key(ar),
        label=stack_label(ar),
    )


def enumerate_stack_points(
    group: GroupId,
    ctx: FieldCtx,
    include_twisted_zero: bool = True,
    limit: Optional[int] = None,
) -> PointSet:
    """Raw points of the compactifying stack and the acting group."""
    group = GroupId(group)
    ar = arith(ctx)
    q = ctx.q
    if group is GroupId.GL2_CHAR2:
        _require_char2(ctx, "the char-2 stack")
        _check_size(f"{group.value} stack over F_{q}", stack_point_bound(group, q), limit)
        points = [StackPoint(x, 0, b) for x in matrices(ctx) for b in range(q)]
        action = _stack_action(f"{group.value}-stack-F{q}", group, ar, points)
        return PointSet(group, ctx, action, _stack_multiply(ar), StackPoint((1, 0, 0, 1), 0, 1))

    ctx.require_odd(f"the {group.value} stack")
    if group not in (GroupId.SL2, GroupId.PGL2, GroupId.GL2):
        raise FieldError(f"{group.value} has no stack presentation")
    sectors = 1 if group is GroupId.SL2 else 2
    _check_size(f"{group.value} stack over F_{q}", stack_point_bound(group, q), limit)
    by_det = _matrices_by_det(ctx)
    points: List[StackPoint] = []
    for alpha in range(q):
        for x in by_det[ar.square[alpha]]:
            points.extend(StackPoint(x, alpha, b) for b in range(q))
    if sectors == 2:
        quad = ar.quad
        for alpha in twisted_alphas(ctx, include_zero=include_twisted_zero):
            d = int(quad.square[alpha])
            assert d < q
            for x in by_det[d]:
                points.extend(StackPoint(x, alpha, b, TWISTED) for b in range(q))
    action = _stack_action(f"{group.value}-stack-F{q}", group, ar, points)
    logger.info("%s stack over F_%d: %d raw points", group.value, q, len(points))
    return PointSet(group, ctx, action, _stack_multiply(ar), StackPoint((1, 0, 0, 1), 1, 1))


def enumerate_group_points(
    group: GroupId, ctx: FieldCtx, limit: Optional[int] = None
) -> PointSet:
    """G^F in the [x, alpha, b] presentation; SL2 and PGL2 points carry b = 1."""
    group = GroupId(group)
    ar = arith(ctx)
    q = ctx.q
    _check_size(f"{group.value} over F_{q}", stack_point_bound(group, q), limit)
    gl = invertible_matrices(ctx)
    units = _units(ctx)
    if group is GroupId.GL2_CHAR2:
        _require_char2(ctx, "the char-2 group")
        points = [StackPoint(x, 0, b) for x in gl for b in units]
        action = _stack_action(f"{group.value}-F{q}", group, ar, points)
        return PointSet(group, ctx, action, _stack_multiply(ar), StackPoint((1, 0, 0, 1), 0, 1), "group")

    ctx.require_odd(f"the {group.value} group")
    quad = ar.quad
    scalars = units if group is GroupId.GL2 else [1]
    twisted = twisted_alphas(ctx, include_zero=False)
    points = []
    for x in gl:
        d = ar.det(x)
        if ctx.is_square[d]:
            roots = [a for a in units if ar.square[a] == d]
            points.extend(StackPoint(x, a, b) for a in roots for b in scalars)
        elif group is not GroupId.SL2:
            roots = [a for a in twisted if quad.square[a] == d]
            points.extend(StackPoint(x, a, b, TWISTED) for a in roots for b in scalars)
    action = _stack_action(f"{group.value}-F{q}", group, ar, points, full=group is GroupId.GL2)
    return PointSet(group, ctx, action, _stack_multiply(ar), StackPoint((1, 0, 0, 1), 1, 1), "group")


def group_order(group: GroupId, q: int) -> int:
    group = GroupId(group)
    if group in (GroupId.SL2, GroupId.PGL2):
        return q * (q * q - 1)
    return (q * q - 1) * (q * q - q)


def embed(point: StackPoint) -> StackPoint:
    """The open embedding G -> stack, g -> [g, 1, 1]; group points already carry their b."""
    return StackPoint(point.x, point.alpha, point.b, point.sector)


def gl2_element(ctx: FieldCtx, point: StackPoint) -> Mat:
    """[x, alpha, b] corresponds to b x in GL2."""
    return arith(ctx).scale(point.b, point.x)


def is_boundary(ctx: FieldCtx, point: StackPoint) -> bool:
    return arith(ctx).det(point.x) == 0 or point.b == 0


def mu2_action(ctx: FieldCtx, points: List[StackPoint], name: str = "mu2") -> GroupAction:
    """alpha -> -alpha on the points of a stack."""
    ar = arith(ctx)

    def act(e: int, point: StackPoint) -> StackPoint:
        return StackPoint(point.x, ar.qmul[e][point.alpha], point.b, point.sector)

    return GroupAction(
        name,
        points,
        _signs(ar),
        act,
        identity=1,
        compose=lambda g, h: ar.mul[g][h],
        sector_of=_sector_of,
        sort_key=stack_sort_key(ar),
        label=stack_label(ar),
    )


def pgl2_point(ctx: FieldCtx, g: Mat) -> StackPoint:
    """pi: GL2 -> PGL2, g -> [g, sqrt(det g)] on the plain or twisted sector."""
    ar = arith(ctx)
    d = ar.det(g)
    if ctx.is_square[d]:
        return StackPoint(g, int(ctx.sqrt[d]), 1)
    for a in twisted_alphas(ctx, include_zero=False):
        if ar.quad.square[a] == d:
            return StackPoint(g, a, 1, TWISTED)
    raise AssertionError(f"no square root of {d} in F_{ctx.q}^2")


@dataclass
class QuotientMaps:
    sl2: PointSet
    pgl2: PointSet
    gl2_matrices: List[Mat]
    mu2: GroupAction
    f: Callable[[StackPoint], StackPoint]
    pi: Callable[[Mat], StackPoint]


def group_quotient_maps(ctx: FieldCtx) -> QuotientMaps:
    ctx.require_odd("the SL2 -> PGL2 <- GL2 maps")
    sl2 = enumerate_group_points(GroupId.SL2, ctx)
    pgl2 = enumerate_group_points(GroupId.PGL2, ctx)
    return QuotientMaps(
        sl2=sl2,
        pgl2=pgl2,
        gl2_matrices=invertible_matrices(ctx),
        mu2=mu2_action(ctx, sl2.points, "mu2-on-sl2"),
        f=embed,
        pi=lambda g: pgl2_point(ctx, g),
    )


@dataclass
class TorusModels:
    """T_3^F, T_3^{sigma F}, the tori T^F, T^{sigma F} and the maps rho between them."""

    group: GroupId
    ctx: FieldCtx
    t3: List[Tuple[int, int, int]]
    t3_sigma: List[Tuple[int, int]]
    torus: List[Hashable]
    torus_sigma: List[Hashable]
    rho: Callable[[Tuple[int, int, int]], Hashable]
    rho_sigma: Callable[[Tuple[int, int]], Hashable]
    kernel: List[Tuple[int, int, int]]
    kernel_sigma: List[Tuple[int, int, int]]
    sign: int

    def act(self, k: Tuple[int, int, int], t: Tuple[int, int, int]) -> Tuple[int, int, int]:
        mul = arith(self.ctx).mul
        return tuple(mul[a][b] for a, b in zip(k, t))

    def act_sigma(self, k: Tuple[int, int, int], t: Tuple[int, int]) -> Tuple[int, int]:
        """(u, t, u^q).(a', b, a'^q) on the (a', b) coordinates."""
        ar = arith(self.ctx)
        return (ar.qmul[k[0]][t[0]], ar.mul[k[1]][t[1]])

    def multiply(self, s: Hashable, t: Hashable) -> Hashable:
        mul = arith(self.ctx).mul
        if isinstance(s, tuple):
            return tuple(mul[a][b] for a, b in zip(s, t))
        return mul[s][t]

    def fibers(self) -> pd.Series:
        return pd.Series([self.rho(t) for t in self.t3]).value_counts()

    def fibers_sigma(self) -> pd.Series:
        return pd.Series([self.rho_sigma(t) for t in self.t3_sigma]).value_counts()


def enumerate_torus_models(group: GroupId, ctx: FieldCtx) -> TorusModels:
    group = GroupId(group)
    ctx.require_odd("torus models")
    ar = arith(ctx)
    quad = ar.quad
    mul, inv, sq = ar.mul, ar.inv, ar.square
    qmul, qinv, frob = ar.qmul, ar.qinv, ar.frob
    units = _units(ctx)
    units2 = list(range(1, quad.size))
    t3 = [(a, b, c) for a in units for b in units for c in units]
    t3_sigma = [(a, b) for a in units2 for b in units]
    norm_one = sorted(int(u) for u in quad.norm_one)
    pm_units = [u for u in units2 if frob[u] in (u, ar.qmul[ar.minus_one][u])]

    def conj_ratio(a: int) -> int:
        return qmul[a][qinv[frob[a]]]

    if group is GroupId.SL2:
        return TorusModels(
            group,
            ctx,
            t3,
            t3_sigma,
            torus=units,
            torus_sigma=norm_one,
            rho=lambda t: mul[t[0]][inv[t[2]]],
            rho_sigma=lambda t: conj_ratio(t[0]),
            kernel=[(s, t, s) for s in units for t in units],
            kernel_sigma=[(s, t, s) for s in units for t in units],
            sign=1,
        )
    if group is GroupId.PGL2:
        return TorusModels(
            group,
            ctx,
            t3,
            t3_sigma,
            torus=units,
            torus_sigma=norm_one,
            rho=lambda t: mul[sq[t[0]]][inv[sq[t[2]]]],
            rho_sigma=lambda t: int(quad.square[conj_ratio(t[0])]),
            kernel=[(s, t, mul[e][s]) for s in units for t in units for e in _signs(ar)],
            kernel_sigma=[(u, t, frob[u]) for u in pm_units for t in units],
            sign=1,
        )
    if group is GroupId.GL2:
        return TorusModels(
            group,
            ctx,
            t3,
            t3_sigma,
            torus=[(u, v) for u in units for v in units],
            torus_sigma=units2,
            rho=lambda t: (mul[sq[t[0]]][t[1]], mul[t[1]][sq[t[2]]]),
            rho_sigma=lambda t: qmul[qmul[t[0]][t[0]]][t[1]],
            kernel=[(s, inv[sq[s]], mul[e][s]) for s in units for e in _signs(ar)],
            kernel_sigma=[(u, _inv_sq2(ar, u), frob[u]) for u in pm_units],
            sign=-1,
        )
    raise FieldError(f"no torus model for {group.value}")


def _inv_sq2(ar: MatrixArith, u: int) -> int:
    """u^-2 for u with u^q = +-u; the result lies in F_q."""
    value = ar.qinv[ar.qmul[u][u]]
    assert value < ar.q
    return value


@dataclass
class TorusStackModel:
    """[t_3^F / Ker(rho)^F], the torus stack T and the comparison map between them."""

    group: GroupId
    ctx: FieldCtx
    source: PointSet
    target: PointSet
    tilde_rho: Callable[[Tuple[int, int, int]], TorusPoint]
    group_map: Callable[[tuple], tuple]

    def equivariant(self) -> bool:
        src, tgt = self.source.action, self.target.action
        for u in src.points:
            image = self.tilde_rho(u)
            for k in src.elements:
                if self.tilde_rho(src.act(k, u)) != tgt.act(self.group_map(k), image):
                    return False
        return True

    def class_map(self) -> pd.DataFrame:
        return class_map_summary(self.source.groupoid, self.tilde_rho, self.target.groupoid)


def torus_stack_points(group: GroupId, ctx: FieldCtx) -> TorusStackModel:
    group = GroupId(group)
    ctx.require_odd("torus stacks")
    ar = arith(ctx)
    q = ctx.q
    mul, sq, inv = ar.mul, ar.square, ar.inv
    models = enumerate_torus_models(group, ctx)
    rank = ar.rank

    def t3_label(u) -> str:
        return "(" + ",".join(ar.format(c) for c in u) + ")"

    source_points = list(product(range(q), repeat=3))
    source_action = GroupAction(
        name=f"t3/{group.value}-F{q}",
        points=source_points,
        elements=models.kernel,
        act=models.act,
        identity=(1, 1, 1),
        compose=_componentwise(ar),
        sort_key=lambda u: tuple(rank[c] for c in u),
        label=t3_label,
    )
    source = PointSet(
        GroupId.T3_MODEL,
        ctx,
        source_action,
        multiply=lambda u, v: tuple(mul[a][b] for a, b in zip(u, v)),
        identity=(1, 1, 1),
        kind="t3",
        extras={"models": models},
    )

    target_points = [
        TorusPoint(x1, x2, alpha, b)
        for x1 in range(q)
        for x2 in range(q)
        for alpha in range(q)
        if mul[x1][x2] == sq[alpha]
        for b in range(q)
    ]
    units = _units(ctx)
    if group is GroupId.SL2:
        elements = [(s, t) for s in units for t in units]

        def act(g, p: TorusPoint) -> TorusPoint:
            s, t = g
            return TorusPoint(mul[s][p.x1], mul[s][p.x2], mul[s][p.alpha], mul[t][p.b])

        def group_map(k):
            return (sq[k[0]], k[1])

    elif group is GroupId.PGL2:
        elements = [(s, t, e) for s in units for t in units for e in _signs(ar)]

        def act(g, p: TorusPoint) -> TorusPoint:
            s, t, e = g
            return TorusPoint(mul[s][p.x1], mul[s][p.x2], mul[mul[e][s]][p.alpha], mul[t][p.b])

        def group_map(k):
            return (sq[k[0]], k[1], mul[k[2]][inv[k[0]]])

    else:
        elements = [(t, e) for t in units for e in _signs(ar)]

        def act(g, p: TorusPoint) -> TorusPoint:
            t, e = g
            return TorusPoint(mul[t][p.x1], mul[t][p.x2], mul[mul[e][t]][p.alpha], mul[inv[t]][p.b])

        def group_map(k):
            return (sq[k[0]], mul[k[2]][inv[k[0]]])

    target_action = GroupAction(
        name=f"calT/{group.value}-F{q}",
        points=target_points,
        elements=elements,
        act=act,
        identity=tuple(1 for _ in elements[0]),
        compose=_componentwise(ar),
        sort_key=lambda p: tuple(rank[c] for c in p),
        label=lambda p: f"(({ar.format(p.x1)},{ar.format(p.x2)});{ar.format(p.alpha)};{ar.format(p.b)})",
    )
    target = PointSet(
        GroupId.TORUS_STACK,
        ctx,
        target_action,
        multiply=lambda u, v: TorusPoint(*(mul[a][b] for a, b in zip(u, v))),
        identity=TorusPoint(1, 1, 1, 1),
        kind="calT",
    )

    def tilde_rho(u) -> TorusPoint:
        a, b, c = u
        return TorusPoint(sq[a], sq[c], mul[a][c], b)

    return TorusStackModel(group, ctx, source, target, tilde_rho, group_map)
