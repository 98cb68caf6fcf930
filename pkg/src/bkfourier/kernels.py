import dataclasses
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Tuple

import pandas as pd

from .algebra import CharacterSums, CycNum, FieldCtx, make_chars
from .errors import KernelError, SectorError
from .groupoid import (
    DEFAULT_MATRIX_CAP,
    FnOnGroupoid,
    FTOperator,
    InvolutivityResult,
    KernelFn,
    apply,
    assemble_sectors,
    check_involutive,
    delta,
    extend_by_zero,
    multiplicative_kernel,
    push_further,
    push_quotient,
    push_set_map,
    quotient_kernel,
    restrict,
    transport,
)
from .groups import (
    PLAIN,
    TWISTED,
    GroupId,
    Mat,
    PointSet,
    StackPoint,
    TorusPoint,
    TorusStackModel,
    arith,
    embed,
    enumerate_group_points,
    enumerate_stack_points,
    enumerate_torus_models,
    gl2_element,
    group_quotient_maps,
    invertible_matrices,
    is_boundary,
    mu2_action,
)

logger = logging.getLogger(__name__)

# c_S c_T^-1 for the torus kernels
TORUS_SIGNS: Dict[GroupId, int] = {GroupId.SL2: 1, GroupId.PGL2: 1, GroupId.GL2: -1}
# phi^calT = -(tilde rho)_!(phi^F) for GL2
CALT_SIGN = -1
SL2_PUSH_CONSTANT = 1
# pi_! sums over the q - 1 central translates
GL2_PUSH_CONSTANT = -1

ZERO_MATRIX: Mat = (0, 0, 0, 0)
IDENTITY_MATRIX: Mat = (1, 0, 0, 1)


def stated_gl2_push_constant(q: int) -> Fraction:
    return Fraction(-1, q)


@dataclass
class KernelTable:
    group: GroupId
    q: int
    provenance: str
    phi: Callable[[Hashable], CycNum]
    kernel: Optional[KernelFn] = None
    points: Optional[PointSet] = None


@dataclass
class IdentityCheck:
    name: str
    passed: bool
    compared: int = 0
    mismatches: int = 0
    witness: Optional[str] = None
    detail: Dict[str, str] = field(default_factory=dict)


def compare_values(name: str, items: Iterable[Tuple[str, CycNum, CycNum]]) -> IdentityCheck:
    check = IdentityCheck(name, True)
    for label, got, want in items:
        check.compared += 1
        if got != want:
            check.mismatches += 1
            check.passed = False
            if check.witness is None:
                check.witness = f"{label}: {got} != {want}"
    logger.debug("%s: %d compared, %d mismatches", name, check.compared, check.mismatches)
    return check


def _chars(ctx: FieldCtx, chars: Optional[CharacterSums]) -> CharacterSums:
    return chars if chars is not None else make_chars(ctx)


def _base(ctx: FieldCtx, value: int) -> int:
    assert value < ctx.q, f"{value} is not in F_{ctx.q}"
    return value


# torus kernels


def phi_T_pushforward(
    group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> Dict[Hashable, CycNum]:
    """sign * sum of psi(a + b + c) over the fibres of rho on T_3^F."""
    chars = _chars(ctx, chars)
    models = enumerate_torus_models(group, ctx)
    add = arith(ctx).add
    fibres: Dict[Hashable, List[int]] = {t: [] for t in models.torus}
    for a, b, c in models.t3:
        fibres[models.rho((a, b, c))].append(add[add[a][b]][c])
    return {t: chars.psi_sum(v) * models.sign for t, v in fibres.items()}


def phi_Tsigma_pushforward(
    group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> Dict[Hashable, CycNum]:
    """Same over T_3^{sigma F} = {(a', b, a'^q)}, with psi(a' + a'^q + b)."""
    chars = _chars(ctx, chars)
    models = enumerate_torus_models(group, ctx)
    ar = arith(ctx)
    fibres: Dict[Hashable, List[int]] = {t: [] for t in models.torus_sigma}
    for a1, b in models.t3_sigma:
        fibres[models.rho_sigma((a1, b))].append(ar.add[_base(ctx, ar.quad_trace(a1))][b])
    return {t: chars.psi_sum(v) * models.sign for t, v in fibres.items()}


def phi_T_closed(
    group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> Dict[Hashable, CycNum]:
    group = GroupId(group)
    chars = _chars(ctx, chars)
    models = enumerate_torus_models(group, ctx)
    ar = arith(ctx)
    add, sub, mul, inv, sq = ar.add, ar.sub, ar.mul, ar.inv, ar.square
    two = ctx.two
    four = mul[two][two]
    zero = CycNum.zero(ctx.p)
    out: Dict[Hashable, CycNum] = {}
    for t in models.torus:
        if group is GroupId.SL2:
            out[t] = -chars.line_sum(add[add[t][inv[t]]][two])
        elif group is GroupId.PGL2:
            if not ctx.is_square[t]:
                out[t] = zero
                continue
            r2 = mul[two][int(ctx.sqrt[t])]
            base = add[t][1]
            out[t] = -(chars.line_sum(add[base][r2]) + chars.line_sum(sub[base][r2]))
        else:
            u, v = t
            ratio = mul[v][inv[u]]
            if not ctx.is_square[ratio]:
                out[t] = zero
            elif u == v:
                out[t] = -(chars.kappa(u) + chars.crucial(mul[four][u]))
            else:
                c = int(ctx.sqrt[ratio])
                out[t] = -(
                    chars.crucial(mul[sq[add[1][c]]][u]) + chars.crucial(mul[sq[sub[1][c]]][u])
                )
    return out


def phi_Tsigma_closed(
    group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> Dict[Hashable, CycNum]:
    group = GroupId(group)
    chars = _chars(ctx, chars)
    models = enumerate_torus_models(group, ctx)
    ar = arith(ctx)
    quad = ar.quad
    add, sub, sq = ar.add, ar.sub, ar.square
    qadd, qmul, frob = ar.qadd, ar.qmul, ar.frob
    two = ctx.two
    zero = CycNum.zero(ctx.p)
    norm_one = sorted(int(u) for u in quad.norm_one)
    out: Dict[Hashable, CycNum] = {}
    for mu in models.torus_sigma:
        if group is GroupId.SL2:
            out[mu] = -chars.line_sum(_base(ctx, qadd[qadd[mu][frob[mu]]][two]))
        elif group is GroupId.PGL2:
            roots = [nu for nu in norm_one if qmul[nu][nu] == mu]
            if not roots:
                out[mu] = zero
                continue
            t = _base(ctx, qadd[roots[0]][frob[roots[0]]])
            out[mu] = -(chars.line_sum(add[t][two]) + chars.line_sum(sub[t][two]))
        else:
            if not quad.is_square[mu]:
                out[mu] = zero
                continue
            a1 = int(quad.sqrt[mu])
            t1 = _base(ctx, qadd[a1][frob[a1]])
            d = qadd[a1][qmul[ar.minus_one][frob[a1]]]
            split = chars.crucial(sq[t1]) if t1 else chars.kappa(1)
            twisted = chars.crucial(_base(ctx, qmul[d][d])) if d else chars.kappa_prime(1)
            out[mu] = -(split + twisted)
    return out


def torus_oracles(
    group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> List[IdentityCheck]:
    group = GroupId(group)
    checks = []
    for name, pushed, closed in (
        ("phi-T", phi_T_pushforward(group, ctx, chars), phi_T_closed(group, ctx, chars)),
        (
            "phi-Tsigma",
            phi_Tsigma_pushforward(group, ctx, chars),
            phi_Tsigma_closed(group, ctx, chars),
        ),
    ):
        checks.append(
            compare_values(
                f"{name}-{group.value}", ((str(t), pushed[t], closed[t]) for t in pushed)
            )
        )
    return checks


# group kernels


def phi_G_matrix(ctx: FieldCtx, g: Mat, chars: Optional[CharacterSums] = None) -> CycNum:
    """phi^{GL2}(g); 0 off the square determinants, with -q S(alpha_o, psi_lambda) at g = lambda I."""
    ctx.require_odd("phi^GL2")
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    d = ar.det(g)
    if not ctx.is_square[d] or d == 0:
        return CycNum.zero(ctx.p)
    tr = ar.trace(g)
    r2 = ar.mul[ctx.two][int(ctx.sqrt[d])]
    value = -(chars.crucial(ar.add[tr][r2]) + chars.crucial(ar.sub[tr][r2]))
    if g[1] == 0 and g[2] == 0 and g[0] == g[3]:
        value = value - chars.gauss(g[0]) * ctx.q
    return value


def bk2_table(ctx: FieldCtx, x: Mat, b: int, chars: Optional[CharacterSums] = None) -> CycNum:
    """Characteristic-2 group kernel at [x, alpha, b]."""
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    tr = ar.trace(x)
    if tr == 0:
        return -chars.kappa(b)
    return -chars.crucial(ar.mul[b][tr])


def rho_push_char2(ctx: FieldCtx, chars: Optional[CharacterSums] = None) -> Dict[Mat, CycNum]:
    """-rho_!(psi o Tr) along (x', b) -> iota2(x') b."""
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    fibres: Dict[Mat, List[int]] = {}
    for x in invertible_matrices(ctx):
        squared = ar.iota2(x)
        tr = ar.trace(x)
        for b in range(1, ctx.q):
            fibres.setdefault(ar.scale(b, squared), []).append(ar.add[tr][b])
    return {g: -chars.psi_sum(v) for g, v in fibres.items()}


def _line_pair(chars: CharacterSums, ctx: FieldCtx, point: StackPoint) -> CycNum:
    ar = arith(ctx)
    tr = ar.trace(point.x)
    a2 = ar.mul[ctx.two][point.alpha]
    return chars.line_sum(ar.add[tr][a2]) + chars.line_sum(ar.sub[tr][a2])


def phi_G(
    group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> Callable[[StackPoint], CycNum]:
    group = GroupId(group)
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    zero = CycNum.zero(ctx.p)

    if group is GroupId.SL2:

        def value(point: StackPoint) -> CycNum:
            return -chars.line_sum(ar.add[ar.trace(point.x)][ar.mul[ctx.two][point.alpha]])

    elif group is GroupId.PGL2:

        def value(point: StackPoint) -> CycNum:
            if point.sector == TWISTED:
                return zero
            return -_line_pair(chars, ctx, point)

    elif group is GroupId.GL2:

        def value(point: StackPoint) -> CycNum:
            return phi_G_matrix(ctx, gl2_element(ctx, point), chars)

    elif group is GroupId.GL2_CHAR2:

        def value(point: StackPoint) -> CycNum:
            return bk2_table(ctx, ar.iota2(point.x), point.b, chars)

    else:
        raise KernelError(f"no group kernel for {group.value}")
    return value


def group_kernel(points: PointSet, chars: Optional[CharacterSums] = None) -> KernelTable:
    phi = phi_G(points.group, points.ctx, chars)
    kernel = multiplicative_kernel(
        points.action, points.multiply, phi, f"phi-G-{points.group.value}-F{points.ctx.q}"
    )
    return KernelTable(points.group, points.ctx.q, "closed_form", phi, kernel, points)


# stack kernels


def Phi_helper(ctx: FieldCtx, point: StackPoint, chars: Optional[CharacterSums] = None) -> CycNum:
    """sum over s, eps of psi(s + s^-2 b (Tr x + 2 eps alpha))"""
    if point.sector != PLAIN:
        raise SectorError(f"Phi is defined on the plain sector, got {point.sector!r}")
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    tr = ar.trace(point.x)
    a2 = ar.mul[ctx.two][point.alpha]
    row = ar.mul[point.b]
    return chars.crucial(row[ar.add[tr][a2]]) + chars.crucial(row[ar.sub[tr][a2]])


def _phi_stack_gl2(ctx: FieldCtx, chars: CharacterSums) -> Callable[[StackPoint], CycNum]:
    ar = arith(ctx)
    q = ctx.q
    zero = CycNum.zero(ctx.p)
    four = ar.mul[ctx.two][ctx.two]
    half = ar.inv[ctx.two]

    def value(point: StackPoint) -> CycNum:
        if point.sector == TWISTED:
            return zero
        x, b = point.x, point.b
        tr = ar.trace(x)
        phi = Phi_helper(ctx, point, chars)
        if ar.sub[ar.square[tr]][ar.mul[four][ar.det(x)]] != 0:
            return -phi
        lam = ar.mul[tr][half]
        at_zero = q if b == 0 else 0
        if x[1] == 0 and x[2] == 0:
            if lam:
                return -(chars.gauss(ar.mul[lam][b]) * q + at_zero + phi)
            return (chars.gauss(b) * q + at_zero - 1) * -2
        if lam:
            return -(phi + at_zero)
        return CycNum.from_int(ctx.p, -2 * (at_zero - 1))

    return value


def phi_stack(
    group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> Callable[[StackPoint], CycNum]:
    """phi^G extended to every point of the compactifying stack, boundary included."""
    group = GroupId(group)
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    zero = CycNum.zero(ctx.p)

    if group is GroupId.SL2:

        def value(point: StackPoint) -> CycNum:
            tr = ar.trace(point.x)
            return chars.line_sum(ar.add[tr][ar.mul[ctx.two][point.alpha]]) * chars.line_sum(
                point.b
            )

    elif group is GroupId.PGL2:

        def value(point: StackPoint) -> CycNum:
            if point.sector == TWISTED:
                return zero
            return _line_pair(chars, ctx, point) * chars.line_sum(point.b)

    elif group is GroupId.GL2:
        value = _phi_stack_gl2(ctx, chars)

    elif group is GroupId.GL2_CHAR2:

        def value(point: StackPoint) -> CycNum:
            return -chars.mixed(ar.trace(point.x), point.b)

    else:
        raise KernelError(f"no stack kernel for {group.value}")
    return value


def gl2_exceptional(point: StackPoint) -> bool:
    """x = 0, alpha = 0, b != 0: the table value moves along the orbit."""
    return point.x == ZERO_MATRIX and point.b != 0 and point.sector == PLAIN


def stack_kernel(points: PointSet, chars: Optional[CharacterSums] = None) -> KernelTable:
    group = points.group
    phi = phi_stack(group, points.ctx, chars)
    exceptional = gl2_exceptional if group is GroupId.GL2 else None
    kernel = multiplicative_kernel(
        points.action,
        points.multiply,
        phi,
        f"phi-stack-{group.value}-F{points.ctx.q}",
        exceptional=exceptional,
    )
    provenance = "table" if group is GroupId.GL2 else "closed_form"
    return KernelTable(group, points.ctx.q, provenance, phi, kernel, points)


def assembled_stack_kernel(points: PointSet, chars: Optional[CharacterSums] = None) -> KernelFn:
    """The PGL2 stack kernel as a block kernel over the plain and twisted sectors."""
    base = stack_kernel(points, chars).kernel
    return assemble_sectors(
        {PLAIN: base, TWISTED: base}, points.action, name=f"{base.name}-assembled"
    )


# torus stacks


def phi_t3(model: TorusStackModel, chars: Optional[CharacterSums] = None) -> Callable:
    """q_!(psi o Tr) on [t_3^F / Ker(rho)^F]."""
    ctx = model.ctx
    chars = _chars(ctx, chars)
    models = model.source.extras["models"]
    add = arith(ctx).add

    def value(u) -> CycNum:
        images = (models.act(k, u) for k in models.kernel)
        return chars.psi_sum([add[add[a][b]][c] for a, b, c in images])

    return value


def torus_stack_kernel(model: TorusStackModel, chars: Optional[CharacterSums] = None) -> KernelTable:
    phi = phi_t3(model, chars)
    kernel = multiplicative_kernel(
        model.source.action,
        model.source.multiply,
        phi,
        f"phi-t3-{model.group.value}-F{model.ctx.q}",
    )
    return KernelTable(model.group, model.ctx.q, "pushforward", phi, kernel, model.source)


def t3_twist(ctx: FieldCtx) -> Callable:
    neg = arith(ctx).neg
    return lambda u: tuple(neg[c] for c in u)


def torus_stack_extension(
    model: TorusStackModel, chars: Optional[CharacterSums] = None
) -> IdentityCheck:
    """On invertible classes the torus-stack kernel is sign * phi^T(rho(u) rho(v))."""
    table = torus_stack_kernel(model, chars)
    models = model.source.extras["models"]
    phi_T = phi_T_pushforward(model.group, model.ctx, chars)
    label = model.source.action.label
    reps = [c.rep for c in model.source.groupoid.classes if all(c.rep)]
    return compare_values(
        f"t3-extends-phi-T-{model.group.value}",
        (
            (
                f"{label(u)}*{label(v)}",
                table.kernel(u, v),
                phi_T[models.multiply(models.rho(u), models.rho(v))] * models.sign,
            )
            for u in reps
            for v in reps
        ),
    )


def _phi_calT_gl2(ctx: FieldCtx, chars: CharacterSums) -> Callable[[TorusPoint], CycNum]:
    ar = arith(ctx)

    def value(point: TorusPoint) -> CycNum:
        if point.x1:
            a, c, b = point.x1, point.alpha, ar.mul[point.b][ar.inv[point.x1]]
        elif point.x2:
            a, c, b = 0, point.x2, ar.mul[point.b][ar.inv[point.x2]]
        else:
            a, c, b = 0, 0, point.b
        return (chars.mixed(ar.add[a][c], b) + chars.mixed(ar.sub[a][c], b)) * CALT_SIGN

    return value


def phi_calT(model: TorusStackModel, chars: Optional[CharacterSums] = None) -> Callable:
    """phi^calT: transported along tilde rho for SL2 and PGL2, pointwise for GL2."""
    ctx = model.ctx
    chars = _chars(ctx, chars)
    if model.group is GroupId.GL2:
        return _phi_calT_gl2(ctx, chars)
    add = arith(ctx).add
    pushed = push_quotient(
        lambda u: chars.psi(add[add[u[0]][u[1]]][u[2]]),
        model.source.action,
        model.source.groupoid,
    )
    return transport(pushed, model.tilde_rho, model.target.groupoid).at


def calT_exceptional(point: TorusPoint) -> bool:
    return point.x1 == 0 and point.x2 == 0 and point.b != 0


def calT_kernel(model: TorusStackModel, chars: Optional[CharacterSums] = None) -> KernelTable:
    phi = phi_calT(model, chars)
    exceptional = calT_exceptional if model.group is GroupId.GL2 else None
    kernel = multiplicative_kernel(
        model.target.action,
        model.target.multiply,
        phi,
        f"phi-calT-{model.group.value}-F{model.ctx.q}",
        exceptional=exceptional,
    )
    provenance = "table" if model.group is GroupId.GL2 else "pushforward"
    return KernelTable(model.group, model.ctx.q, provenance, phi, kernel, model.target)


def calT_twist(ctx: FieldCtx) -> Callable[[TorusPoint], TorusPoint]:
    neg = arith(ctx).neg
    return lambda p: p._replace(b=neg[p.b])


def gl2_calT_pullback(model: TorusStackModel, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    """phi^calT(tilde rho(u)) = -q_!(psi o Tr)(u) on every point of t_3^F."""
    phi_T = _phi_calT_gl2(model.ctx, _chars(model.ctx, chars))
    phi_F = phi_t3(model, chars)
    label = model.source.action.label
    return compare_values(
        "calT-pullback-gl2",
        (
            (label(u), phi_T(model.tilde_rho(u)), phi_F(u) * CALT_SIGN)
            for u in model.source.points
        ),
    )


def gl2_delta_witness(model: TorusStackModel, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    ctx = model.ctx
    kernel = calT_kernel(model, chars).kernel
    z, x = TorusPoint(1, 0, 0, 1), TorusPoint(0, 1, 0, 1)
    value = delta(kernel, kernel, z, x)
    expected = CycNum.from_int(ctx.p, 4 * int(ctx.quadratic[ctx.neg[1]]) * ctx.q)
    label = model.target.action.label
    return IdentityCheck(
        "calT-delta-witness",
        value == expected,
        1,
        0 if value == expected else 1,
        witness=f"Delta({label(z)}, {label(x)}) = {value}",
        detail={"delta": str(value), "expected": str(expected)},
    )


def _torus_Phi(ctx: FieldCtx, chars: CharacterSums, tr: int, alpha: int, b: int) -> CycNum:
    ar = arith(ctx)
    a2 = ar.mul[ctx.two][alpha]
    row = ar.mul[b]
    return chars.crucial(row[ar.add[tr][a2]]) + chars.crucial(row[ar.sub[tr][a2]])


def calT_table_check(ctx: FieldCtx, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    """The stated GL2 calT table against the pointwise kernel on its representatives."""
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    phi = _phi_calT_gl2(ctx, chars)
    sq = ar.square

    def items():
        for a in range(ctx.q):
            for b in range(ctx.q):
                point = TorusPoint(sq[a], sq[a], sq[a], b)
                if a:
                    tr = ar.add[sq[a]][sq[a]]
                    want = -(chars.kappa(b) + 1 + _torus_Phi(ctx, chars, tr, sq[a], b))
                else:
                    want = chars.kappa(b) * -2
                yield str(point), phi(point), want
                for c in range(ctx.q):
                    if sq[a] == sq[c]:
                        continue
                    point = TorusPoint(sq[a], sq[c], ar.mul[a][c], b)
                    tr = ar.add[sq[a]][sq[c]]
                    yield str(point), phi(point), -_torus_Phi(ctx, chars, tr, point.alpha, b)

    return compare_values("calT-table-gl2", items())


def phi_calTsigma(ctx: FieldCtx, a1: int, b: int, chars: Optional[CharacterSums] = None) -> CycNum:
    """Direct sum over s^q = s and s^q = -s at [(a'^2, a'^2q), a'^(q+1), b]."""
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    qmul, qinv, frob = ar.qmul, ar.qinv, ar.frob
    t1 = _base(ctx, ar.qadd[a1][frob[a1]])
    d = ar.qadd[a1][qmul[ar.minus_one][frob[a1]]]
    split = [ar.add[ar.mul[s][t1]][ar.mul[b][ar.inv[ar.square[s]]]] for s in range(1, ctx.q)]
    twisted = []
    for s in ar.quad.twisted:
        s = int(s)
        if s:
            inv_sq = _base(ctx, qinv[qmul[s][s]])
            twisted.append(ar.add[_base(ctx, qmul[s][d])][ar.mul[b][inv_sq]])
    return (chars.psi_sum(split) + chars.psi_sum(twisted)) * CALT_SIGN


def _sigma_Phi(ctx: FieldCtx, chars: CharacterSums, a1: int, b: int) -> CycNum:
    ar = arith(ctx)
    total = CycNum.zero(ctx.p)
    for eps in (1, ar.minus_one):
        s = ar.qadd[a1][ar.qmul[eps][ar.frob[a1]]]
        total = total + chars.crucial(ar.mul[b][_base(ctx, ar.qmul[s][s])])
    return total


def phi_calTsigma_table(
    ctx: FieldCtx, a1: int, b: int, chars: Optional[CharacterSums] = None
) -> CycNum:
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    if a1 < ctx.q:
        if a1:
            return -(chars.kappa_prime(b) + 1 + _sigma_Phi(ctx, chars, a1, b))
        return chars.kappa_prime(b) * -2
    square = ar.qmul[a1][a1]
    if square == ar.frob[square]:
        raise KernelError(f"no table entry at a' = {ar.quad.format(a1)} with a'^q = -a'")
    return -_sigma_Phi(ctx, chars, a1, b)


def calTsigma_checks(
    ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> Tuple[IdentityCheck, IdentityCheck]:
    """(entries with a' != 0, the a' = 0 entry) of the calT_sigma table against the direct sum."""
    chars = _chars(ctx, chars)
    ar = arith(ctx)
    covered = [
        a1
        for a1 in range(1, ctx.q * ctx.q)
        if a1 < ctx.q or ar.qmul[a1][a1] != ar.frob[ar.qmul[a1][a1]]
    ]
    label = ar.quad.format
    general = compare_values(
        "calTsigma-table-gl2",
        (
            (f"({label(a1)};{b})", phi_calTsigma(ctx, a1, b, chars), phi_calTsigma_table(ctx, a1, b, chars))
            for a1 in covered
            for b in range(ctx.q)
        ),
    )
    zero_entry = compare_values(
        "calTsigma-zero-entry-gl2",
        (
            (f"(0;{b})", phi_calTsigma(ctx, 0, b, chars), phi_calTsigma_table(ctx, 0, b, chars))
            for b in range(ctx.q)
        ),
    )
    zero_entry.detail["direct"] = "-kappa(b) - kappa'(b)"
    zero_entry.detail["table"] = "-2 kappa'(b)"
    return general, zero_entry


# cross identities


def restriction_check(group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    """phi^stack o embed = phi^G on every group point."""
    group = GroupId(group)
    points = enumerate_group_points(group, ctx)
    on_stack = phi_stack(group, ctx, chars)
    on_group = phi_G(group, ctx, chars)
    label = points.action.label
    return compare_values(
        f"restriction-{group.value}",
        ((label(p), on_stack(embed(p)), on_group(p)) for p in points.points),
    )


def char2_checks(ctx: FieldCtx, chars: Optional[CharacterSums] = None) -> List[IdentityCheck]:
    ar = arith(ctx)
    points = enumerate_group_points(GroupId.GL2_CHAR2, ctx)
    pushed = rho_push_char2(ctx, chars)
    label = points.action.label
    return [
        restriction_check(GroupId.GL2_CHAR2, ctx, chars),
        compare_values(
            "rho-pushforward-gl2-char2",
            (
                (
                    label(p),
                    pushed[ar.scale(p.b, ar.iota2(p.x))],
                    bk2_table(ctx, ar.iota2(p.x), p.b, chars),
                )
                for p in points.points
            ),
        ),
    ]


def extension_check(group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    """phi^stack(i(g') i(g)) = phi^G(g' g)."""
    group = GroupId(group)
    gpts = enumerate_group_points(group, ctx)
    spts = enumerate_stack_points(group, ctx)
    on_stack = stack_kernel(spts, chars).kernel
    on_group = group_kernel(gpts, chars).kernel
    label = gpts.action.label
    reps = [c.rep for c in gpts.groupoid.classes]
    return compare_values(
        f"extension-kernel-{group.value}",
        (
            (f"{label(y)}*{label(x)}", on_stack(embed(y), embed(x)), on_group(y, x))
            for y in reps
            for x in gpts.points
        ),
    )


def sample_function(groupoid, chars: CharacterSums) -> FnOnGroupoid:
    return FnOnGroupoid(
        groupoid,
        [
            chars.psi(c.rep.x[1]) + CycNum.from_int(chars.p, cid % 5 - 2)
            for cid, c in enumerate(groupoid.classes)
        ],
    )


def extension_operator_check(
    group: GroupId,
    ctx: FieldCtx,
    chars: Optional[CharacterSums] = None,
    f: Optional[FnOnGroupoid] = None,
    threads: int = 1,
) -> IdentityCheck:
    """i^* o F^stack o i_! = F^G on a test function."""
    group = GroupId(group)
    chars = _chars(ctx, chars)
    gpts = enumerate_group_points(group, ctx)
    spts = enumerate_stack_points(group, ctx)
    f = f or sample_function(gpts.groupoid, chars)
    zero = CycNum.zero(ctx.p)
    lifted = extend_by_zero(f, embed, spts.groupoid, zero)
    on_stack = apply(FTOperator(stack_kernel(spts, chars).kernel, spts.groupoid), lifted, threads)
    lhs = restrict(on_stack, embed, gpts.groupoid)
    rhs = apply(FTOperator(group_kernel(gpts, chars).kernel, gpts.groupoid), f, threads)
    label = gpts.action.label
    return compare_values(
        f"extension-operator-{group.value}",
        ((label(c.rep), lhs[i], rhs[i]) for i, c in enumerate(gpts.groupoid.classes)),
    )


def pushforward_identities(
    ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> List[IdentityCheck]:
    """phi^PGL2 = f_!(phi^SL2) and phi^PGL2 = c pi_!(phi^GL2), plus the stated constant."""
    chars = _chars(ctx, chars)
    zero = CycNum.zero(ctx.p)
    maps = group_quotient_maps(ctx)
    sl2, pgl2 = maps.sl2.groupoid, maps.pgl2.groupoid
    phi_sl2 = FnOnGroupoid.from_function(sl2, phi_G(GroupId.SL2, ctx, chars))
    phi_pgl2 = FnOnGroupoid.from_function(pgl2, phi_G(GroupId.PGL2, ctx, chars))
    label = maps.pgl2.action.label
    reps = [label(c.rep) for c in pgl2.classes]

    pushed = push_further(phi_sl2, maps.mu2, pgl2, zero)
    checks = [
        compare_values(
            "f-pushforward",
            ((r, pushed[i] * SL2_PUSH_CONSTANT, phi_pgl2[i]) for i, r in enumerate(reps)),
        )
    ]

    central = push_set_map(
        ((g, phi_G_matrix(ctx, g, chars)) for g in maps.gl2_matrices), maps.pi, pgl2, zero
    )
    checks.append(
        compare_values(
            "pi-pushforward",
            ((r, central[i] * GL2_PUSH_CONSTANT, phi_pgl2[i]) for i, r in enumerate(reps)),
        )
    )
    stated = stated_gl2_push_constant(ctx.q)
    finding = compare_values(
        "pi-pushforward-stated-constant",
        ((r, central[i] * stated, phi_pgl2[i]) for i, r in enumerate(reps)),
    )
    unit = pgl2.class_of(StackPoint(IDENTITY_MATRIX, 1, 1))
    finding.detail = {"stated_constant": str(stated)}
    if phi_pgl2[unit].is_rational() and central[unit].is_rational() and not central[unit].is_zero():
        computed = phi_pgl2[unit].as_fraction() / central[unit].as_fraction()
        finding.detail["computed_constant"] = str(computed)
    checks.append(finding)
    checks.extend(stack_pushforward_identities(ctx, chars))
    return checks


def stack_pushforward_identities(
    ctx: FieldCtx, chars: Optional[CharacterSums] = None
) -> List[IdentityCheck]:
    """The PGL2 stack kernel as the mu2-pushforward of the SL2 one, on functions and on kernels."""
    chars = _chars(ctx, chars)
    zero = CycNum.zero(ctx.p)
    sl2 = enumerate_stack_points(GroupId.SL2, ctx)
    pgl2 = enumerate_stack_points(GroupId.PGL2, ctx)
    mu2 = mu2_action(ctx, sl2.points, "mu2-on-sl2-stack")
    phi_sl2 = FnOnGroupoid.from_function(sl2.groupoid, phi_stack(GroupId.SL2, ctx, chars))
    phi_pgl2 = FnOnGroupoid.from_function(pgl2.groupoid, phi_stack(GroupId.PGL2, ctx, chars))
    pushed = push_further(phi_sl2, mu2, pgl2.groupoid, zero)
    label = pgl2.action.label
    on_functions = compare_values(
        "mu2-pushforward-stack",
        (
            (label(c.rep), pushed[i], phi_pgl2[i])
            for i, c in enumerate(pgl2.groupoid.classes)
        ),
    )

    plain = dataclasses.replace(
        pgl2.action,
        name=f"{pgl2.action.name}-plain",
        points=[p for p in pgl2.points if p.sector == PLAIN],
    )
    reps = [c.rep for c in sl2.groupoid.classes]
    pairs = [(y, x) for y in reps for x in reps]
    target = stack_kernel(pgl2, chars).kernel
    try:
        quotient = quotient_kernel(stack_kernel(sl2, chars).kernel, mu2, plain, pairs=pairs)
    except KernelError as exc:
        return [on_functions, IdentityCheck("mu2-quotient-kernel", False, witness=str(exc))]
    on_kernels = compare_values(
        "mu2-quotient-kernel",
        ((f"{label(y)}*{label(x)}", quotient(y, x), target(y, x)) for y, x in pairs),
    )
    return [on_functions, on_kernels]


# descent and the general table


def descent_check(group: GroupId, ctx: FieldCtx, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    """phi^G is constant on the fibres of the map to T//W."""
    group = GroupId(group)
    ar = arith(ctx)
    points = enumerate_group_points(group, ctx)
    phi = phi_G(group, ctx, chars)
    rows = []
    for c in points.groupoid.classes:
        p = c.rep
        tr = ar.trace(p.x)
        if group is GroupId.SL2:
            key = str(ar.mul[tr][ar.inv[p.alpha]])
        else:
            det = ar.det(p.x)
            key = f"{p.sector}:{ar.mul[ar.square[tr]][ar.inv[det]]}"
        rows.append({"key": key, "value": str(phi(p)), "point": points.action.label(p)})
    frame = pd.DataFrame(rows)
    spread = frame.groupby("key")["value"].nunique()
    bad = spread[spread > 1]
    check = IdentityCheck(f"descent-{group.value}", bad.empty, len(frame), len(bad))
    if not bad.empty:
        clash = frame[frame["key"] == bad.index[0]].drop_duplicates("value").head(2)
        check.witness = " vs ".join(clash["point"])
    return check


def non_descent_witness(ctx: FieldCtx, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    """Two elements of GL2 with the same (Tr, det) and different phi^G."""
    ar = arith(ctx)
    rows = [
        {
            "tr": ar.trace(g),
            "det": ar.det(g),
            "value": str(phi_G_matrix(ctx, g, chars)),
            "g": "(" + ",".join(ar.format(c) for c in g) + ")",
        }
        for g in invertible_matrices(ctx)
    ]
    frame = pd.DataFrame(rows)
    spread = frame.groupby(["tr", "det"])["value"].nunique()
    bad = spread[spread > 1]
    check = IdentityCheck("non-descent-gl2", not bad.empty, len(frame), len(bad))
    if not bad.empty:
        tr, det = bad.index[0]
        clash = frame[(frame["tr"] == tr) & (frame["det"] == det)].drop_duplicates("value").head(2)
        check.witness = " vs ".join(f"{g} -> {v}" for g, v in zip(clash["g"], clash["value"]))
    return check


def phi_G_general(
    ctx: FieldCtx,
    g: Mat,
    phi_T: Dict[Hashable, CycNum],
    phi_Tsigma: Dict[Hashable, CycNum],
) -> CycNum:
    """phi^GL2(g) assembled from phi^T and phi^{T_sigma} at the semisimple part of g."""
    ar = arith(ctx)
    q = ctx.q
    tr, det = ar.trace(g), ar.det(g)
    four = ar.mul[ctx.two][ctx.two]
    half = ar.inv[ctx.two]
    disc = ar.sub[ar.square[tr]][ar.mul[four][det]]
    if disc == 0:
        lam = ar.mul[tr][half]
        if g[1] == 0 and g[2] == 0:
            return (phi_T[(lam, lam)] * (q + 1) + phi_Tsigma[lam] * (1 - q)) / 2
        return (phi_T[(lam, lam)] + phi_Tsigma[lam]) / 2
    if ctx.is_square[disc]:
        r = int(ctx.sqrt[disc])
        return phi_T[(ar.mul[ar.add[tr][r]][half], ar.mul[ar.sub[tr][r]][half])]
    root = int(ar.quad.sqrt[disc])
    return phi_Tsigma[ar.qmul[ar.qadd[tr][root]][ar.qinv[ctx.two]]]


def gl2_table_general_check(ctx: FieldCtx, chars: Optional[CharacterSums] = None) -> IdentityCheck:
    chars = _chars(ctx, chars)
    phi_T = phi_T_closed(GroupId.GL2, ctx, chars)
    phi_Tsigma = phi_Tsigma_closed(GroupId.GL2, ctx, chars)
    ar = arith(ctx)
    return compare_values(
        "table-general-gl2",
        (
            (
                "(" + ",".join(ar.format(c) for c in g) + ")",
                phi_G_general(ctx, g, phi_T, phi_Tsigma),
                phi_G_matrix(ctx, g, chars),
            )
            for g in invertible_matrices(ctx)
        ),
    )


# involutivity wrappers


def phi_calT_involutivity(
    model: TorusStackModel,
    chars: Optional[CharacterSums] = None,
    matrix_cap: int = DEFAULT_MATRIX_CAP,
    threads: int = 1,
) -> InvolutivityResult:
    """F^calT o F^calT = q^3 (f -> f^-), with b -> -b the image of x -> -x under tilde rho."""
    table = calT_kernel(model, chars)
    return check_involutive(
        table.kernel,
        model.ctx.q**3,
        twist=calT_twist(model.ctx),
        groupoid=model.target.groupoid,
        matrix_cap=matrix_cap,
        threads=threads,
    )


def phi_stack_gl2_involutivity(
    points: PointSet,
    chars: Optional[CharacterSums] = None,
    matrix_cap: int = DEFAULT_MATRIX_CAP,
    threads: int = 1,
    exhaustive: bool = True,
) -> InvolutivityResult:
    """The GL2 table kernel on the stack; expected to fail, the witness is the result.

    exhaustive=False stops at the first mismatch, visiting the exceptional locus and then the
    boundary before the group points.
    """
    if points.group is not GroupId.GL2:
        raise KernelError(f"expected the GL2 stack, got {points.group.value}")
    table = stack_kernel(points, chars)
    ctx = points.ctx

    def search(point: StackPoint) -> Tuple[bool, bool]:
        return not gl2_exceptional(point), not is_boundary(ctx, point)

    return check_involutive(
        table.kernel,
        ctx.q**5,
        groupoid=points.groupoid,
        matrix_cap=matrix_cap,
        threads=threads,
        search=None if exhaustive else search,
    )
